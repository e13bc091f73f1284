"""Running scenarios end to end: trace files, final-state dumps, self-checks.

The trace file embeds its scenario source and any overrides in ``#`` header
lines, so ``inspect`` can reconstruct the run deterministically from the
trace alone and reproduce the dumped final states byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .blocklace import Blocklace
from .currency import check_conservation, dump_ledger, supply_metrics
from .errors import ScenarioError
from .ordering import order_cone
from .scenario import BuildContext, Scenario, build_simulator, parse_scenario
from .netsim import Simulator
from .social import (
    CURRENCY,
    WHATSAPP,
    assemble_author_feed,
    assemble_group_feed,
)

TRACE_MAGIC = "# grassroots-trace v1"


@dataclass
class RunResult:
    sim: Simulator
    ctx: BuildContext
    scenario: Scenario
    trace_text: str
    dumps: dict[str, str]
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def run_scenario(sc: Scenario, seed: int | None = None,
                 max_ticks: int | None = None) -> RunResult:
    sim, ctx = build_simulator(sc, seed=seed, max_ticks=max_ticks)
    sim.run(sim.scenario_max_ticks)
    header = [TRACE_MAGIC]
    if seed is not None:
        header.append(f"# override seed {seed}")
    if max_ticks is not None:
        header.append(f"# override max-ticks {max_ticks}")
    header.extend(f"#S {line}" for line in sc.source.splitlines())
    trace_text = "\n".join(header) + "\n" + sim.trace.to_text() + "\n"
    dumps = {
        "feeds": dump_feeds(sim, ctx, sc.protocol),
        "ledger": dump_ledgers(sim, ctx),
        "graph": dump_graphs(sim, ctx),
        "metrics": dump_metrics(sim, ctx),
    }
    violations = self_check(sim, ctx, sc.protocol)
    return RunResult(sim, ctx, sc, trace_text, dumps, violations)


def replay_trace(trace_text: str) -> RunResult:
    """Rebuild the run a trace records (deterministic re-execution)."""
    lines = trace_text.splitlines()
    if not lines or lines[0] != TRACE_MAGIC:
        raise ScenarioError("not a grassroots trace file")
    seed = None
    max_ticks = None
    source = []
    for line in lines[1:]:
        if line.startswith("#S"):
            source.append(line[3:] if line.startswith("#S ") else "")
        elif line.startswith("# override seed "):
            seed = int(line.rsplit(" ", 1)[1])
        elif line.startswith("# override max-ticks "):
            max_ticks = int(line.rsplit(" ", 1)[1])
        elif not line.startswith("#"):
            break
    sc = parse_scenario("\n".join(source))
    return run_scenario(sc, seed=seed, max_ticks=max_ticks)


# -- final-state dumps -------------------------------------------------------

def dump_feeds(sim: Simulator, ctx: BuildContext, protocol: str) -> str:
    sections = []
    for observer in sorted(ctx.ids):
        local = sim.agents[ctx.ids[observer]].local
        if protocol == WHATSAPP:
            for label in sorted(ctx.groups):
                feed = assemble_group_feed(local, ctx.groups[label])
                sections.append(f"== group {label} as seen by {observer}")
                sections.append(feed.export(local))
        else:
            for author in sorted(ctx.ids):
                feed = assemble_author_feed(local, ctx.ids[author])
                if feed.posts:
                    sections.append(f"== feed {author} as seen by {observer}")
                    sections.append(feed.export(local))
    return "\n".join(s for s in sections if s != "")


def dump_graphs(sim: Simulator, ctx: BuildContext) -> str:
    lines = []
    for observer in sorted(ctx.ids):
        state = sim.agents[ctx.ids[observer]]
        g = state.graph()
        lines.append(f"== graph as seen by {observer}")
        for (p, q) in sorted(g.follows, key=lambda e: (ctx.names[e[0]], ctx.names[e[1]])):
            lines.append(f"edge {ctx.names[p]} -> {ctx.names[q]}")
        for gid in sorted(g.groups):
            group = g.groups[gid]
            members = ",".join(sorted(ctx.names[m] for m in group.members))
            lines.append(f"group {gid.hex()[:8]} founder={ctx.names[group.founder]} "
                         f"members={members}")
    return "\n".join(lines)


def dump_ledgers(sim: Simulator, ctx: BuildContext) -> str:
    sections = []
    for observer in sorted(ctx.ids):
        state = sim.agents[ctx.ids[observer]]
        sections.append(f"== ledger as seen by {observer}")
        text = dump_ledger(state.ledger())
        if text:
            sections.append(text)
    return "\n".join(sections)


def dump_metrics(sim: Simulator, ctx: BuildContext) -> str:
    lines = [sim.summary()]
    for observer in sorted(ctx.ids):
        state = sim.agents[ctx.ids[observer]]
        for currency, m in supply_metrics(state.ledger()).items():
            lines.append(f"supply {ctx.names.get(currency, currency.hex()[:8])} "
                         f"as-seen-by {observer}: issued={m.issued} "
                         f"circulating={m.in_circulation} issuer-held={m.held_by_issuer}")
    return "\n".join(lines)


# -- invariant self-checks ---------------------------------------------------

def self_check(sim: Simulator, ctx: BuildContext, protocol: str) -> list[str]:
    violations = []
    if sim.counters["cordiality-violations"]:
        violations.append("cordiality")
    for observer in sorted(ctx.ids):
        local = sim.agents[ctx.ids[observer]].local
        if not _acyclic(local):
            violations.append("acyclicity")
        if not _tamper_evident(local):
            violations.append("tamper-evidence")
        if protocol == CURRENCY:
            try:
                check_conservation(sim.agents[ctx.ids[observer]].ledger())
            except AssertionError:
                violations.append("conservation")
    return sorted(set(violations))


def _acyclic(local: Blocklace) -> bool:
    return all(not local.in_cone(h, h) for h in local.blocks)


def _tamper_evident(local: Blocklace) -> bool:
    from .block import block_hash
    return all(block_hash(b) == h for h, b in local.blocks.items())


# -- inspect queries ---------------------------------------------------------

def query(result: RunResult, what: str, agent: str | None = None,
          anchor: str | None = None) -> str:
    sim, ctx = result.sim, result.ctx
    if what == "feed":
        if agent is None:
            return result.dumps["feeds"]
        local = sim.agents[_agent_id(ctx, agent)].local
        sections = []
        if result.scenario.protocol == WHATSAPP:
            for label in sorted(ctx.groups):
                feed = assemble_group_feed(local, ctx.groups[label])
                sections.append(f"== group {label} as seen by {agent}")
                sections.append(feed.export(local))
        else:
            for author in sorted(ctx.ids):
                feed = assemble_author_feed(local, ctx.ids[author])
                if feed.posts:
                    sections.append(f"== feed {author} as seen by {agent}")
                    sections.append(feed.export(local))
        return "\n".join(s for s in sections if s != "")
    if what == "ledger":
        if agent is None:
            return result.dumps["ledger"]
        state = sim.agents[_agent_id(ctx, agent)]
        return dump_ledger(state.ledger())
    if what == "graph":
        return result.dumps["graph"]
    if what == "equivocations":
        lines = []
        for observer in sorted(ctx.ids):
            local = sim.agents[ctx.ids[observer]].local
            for creator in sorted(local.by_creator, key=lambda c: ctx.names.get(c, "")):
                for h1, h2 in local.detect_equivocation(creator):
                    lines.append(f"{observer}\t{ctx.names.get(creator, '?')}\t"
                                 f"{h1.hex()[:8]}\t{h2.hex()[:8]}")
        return "\n".join(lines)
    if what == "order":
        if agent is None or anchor is None:
            raise ValueError("order query needs --agent and --anchor")
        local = sim.agents[_agent_id(ctx, agent)].local
        matches = [h for h in local.blocks if h.hex().startswith(anchor)]
        if len(matches) != 1:
            raise ValueError(f"anchor prefix matches {len(matches)} blocks")
        log = order_cone(local, matches[0])
        return "\n".join(h.hex() for h in log.sequence)
    raise ValueError(f"unknown query {what!r}")


def _agent_id(ctx: BuildContext, name: str) -> bytes:
    if name not in ctx.ids:
        raise ValueError(f"unknown agent {name!r}")
    return ctx.ids[name]
