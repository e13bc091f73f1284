"""Scenario files: a strict, line-oriented script format for simulator runs.

Grammar (one directive per line; ``#`` comments and blank lines ignored)::

    protocol twitter|whatsapp|currency
    agents <name> <name> ...
    faults <f>
    seed <u64>
    drop <p>            duplicate <p>
    delay <min> <max>
    max-ticks <n>
    batch-size <n>      disclose-every <n>
    at <tick> <agent> <verb> <args...>

Verbs: post "<text>" | follow <agent> | unfollow <agent> |
group-create <label> | group-invite <label> <agent> | group-join <label> |
group-leave <label> | group-remove <label> <agent> |
open-credit <agent> | close-credit <agent> | issue <amount> |
pay <agent> <amount> <currency-agent> |
redeem <coin-currency> <amount> <against-currency> |
roam | byzantine <behavior> |
equivocate-pay <to-a> <to-b> <amount> <currency> |
equivocate-post "<text-a>" "<text-b>"

Parsing is strict: unknown directives, unknown verbs, unknown agent names and
malformed values are errors with line numbers.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field

from .approval import FaultConfig
from .block import block_hash
from .dissemination import AgentState
from .errors import ScenarioError
from .identity import KeyedMacScheme
from .netsim import BYZANTINE_BEHAVIORS, NetConfig, Simulator
from .payload import (
    CloseCredit,
    FeedPost,
    Follow,
    GroupOp,
    Issue,
    NO_GROUP,
    OpenCredit,
    Pay,
    RedeemRequest,
    Unfollow,
)
from .social import CURRENCY, TWITTER, WHATSAPP

_PROTOCOLS = {
    "twitter": TWITTER, "twitter-like": TWITTER,
    "whatsapp": WHATSAPP, "whatsapp-like": WHATSAPP,
    "currency": CURRENCY,
}


@dataclass(frozen=True)
class Action:
    tick: int
    agent: str
    verb: str
    args: tuple[str, ...]
    line: int


@dataclass
class Scenario:
    protocol: str = TWITTER
    agent_names: list[str] = field(default_factory=list)
    faults: int = 0
    seed: int = 0
    drop: float = 0.0
    duplicate: float = 0.0
    delay_min: int = 1
    delay_max: int = 1
    max_ticks: int = 100
    batch_size: int = 64
    disclose_every: int = 1
    actions: list[Action] = field(default_factory=list)
    source: str = ""

    def fault_config(self) -> FaultConfig:
        return FaultConfig(len(self.agent_names), self.faults)


_VERB_ARITY = {
    "post": 1, "follow": 1, "unfollow": 1,
    "group-create": 1, "group-invite": 2, "group-join": 1,
    "group-leave": 1, "group-remove": 2,
    "open-credit": 1, "close-credit": 1, "issue": 1,
    "pay": 3, "redeem": 3, "roam": 0, "byzantine": 1,
    "equivocate-pay": 4, "equivocate-post": 2,
}


def parse_scenario(text: str) -> Scenario:
    sc = Scenario(source=text)
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        try:
            tokens = shlex.split(raw, comments=True)
        except ValueError as exc:
            raise ScenarioError(str(exc), lineno)
        if not tokens:
            continue
        key, args = tokens[0], tokens[1:]
        try:
            _parse_directive(sc, seen, key, args, lineno)
        except ScenarioError:
            raise
        except (ValueError, IndexError) as exc:
            raise ScenarioError(str(exc), lineno)
    if not sc.agent_names:
        raise ScenarioError("no agents declared")
    _check_actions(sc)
    return sc


def _parse_directive(sc: Scenario, seen: set[str], key: str,
                     args: list[str], lineno: int) -> None:
    if key == "at":
        if len(args) < 3:
            raise ScenarioError("at needs: tick agent verb ...", lineno)
        tick = int(args[0])
        if tick < 0:
            raise ScenarioError("negative tick", lineno)
        sc.actions.append(Action(tick, args[1], args[2], tuple(args[3:]), lineno))
        return
    if key in seen:
        raise ScenarioError(f"duplicate directive {key!r}", lineno)
    seen.add(key)
    if key == "protocol":
        (value,) = args
        if value not in _PROTOCOLS:
            raise ScenarioError(f"unknown protocol {value!r}", lineno)
        sc.protocol = _PROTOCOLS[value]
    elif key == "agents":
        if not args or len(set(args)) != len(args):
            raise ScenarioError("agents must be a non-empty unique list", lineno)
        sc.agent_names = list(args)
    elif key == "faults":
        (sc.faults,) = (int(args[0]),)
    elif key == "seed":
        sc.seed = int(args[0])
        if not 0 <= sc.seed < 2**64:
            raise ScenarioError("seed out of u64 range", lineno)
    elif key == "drop":
        sc.drop = float(args[0])
    elif key == "duplicate":
        sc.duplicate = float(args[0])
    elif key == "delay":
        sc.delay_min, sc.delay_max = int(args[0]), int(args[1])
    elif key == "max-ticks":
        sc.max_ticks = int(args[0])
    elif key == "batch-size":
        sc.batch_size = int(args[0])
    elif key == "disclose-every":
        sc.disclose_every = int(args[0])
    else:
        raise ScenarioError(f"unknown directive {key!r}", lineno)


def _check_actions(sc: Scenario) -> None:
    roster = set(sc.agent_names)
    for a in sc.actions:
        if a.agent not in roster:
            raise ScenarioError(f"unknown agent {a.agent!r}", a.line)
        arity = _VERB_ARITY.get(a.verb)
        if arity is None:
            raise ScenarioError(f"unknown verb {a.verb!r}", a.line)
        if len(a.args) != arity:
            raise ScenarioError(f"{a.verb} takes {arity} argument(s)", a.line)
        if a.verb == "byzantine" and a.args[0] not in BYZANTINE_BEHAVIORS:
            raise ScenarioError(f"unknown behavior {a.args[0]!r}", a.line)
        # agent-name arguments must be in the roster
        agent_args = {"follow": [0], "unfollow": [0], "group-invite": [1],
                      "group-remove": [1], "open-credit": [0], "close-credit": [0],
                      "pay": [0, 2], "redeem": [0, 2], "equivocate-pay": [0, 1, 3]}
        for i in agent_args.get(a.verb, []):
            if a.args[i] not in roster:
                raise ScenarioError(f"unknown agent {a.args[i]!r}", a.line)
        for i in {"pay": [1], "issue": [0], "redeem": [1],
                  "equivocate-pay": [2]}.get(a.verb, []):
            if int(a.args[i]) <= 0:
                raise ScenarioError("amount must be positive", a.line)


@dataclass
class BuildContext:
    scheme: KeyedMacScheme
    ids: dict[str, bytes]             # name -> agent id
    names: dict[bytes, str]           # agent id -> name
    groups: dict[str, bytes] = field(default_factory=dict)  # label -> group id
    roam_counter: dict[str, int] = field(default_factory=dict)


def build_simulator(sc: Scenario, seed: int | None = None,
                    max_ticks: int | None = None) -> tuple[Simulator, BuildContext]:
    """Instantiate agents and schedule all scripted actions."""
    scheme = KeyedMacScheme()
    ids = {name: scheme.register(name) for name in sc.agent_names}
    names = {a: n for n, a in ids.items()}
    ctx = BuildContext(scheme, ids, names)
    net = NetConfig(drop=sc.drop, duplicate=sc.duplicate,
                    delay_min=sc.delay_min, delay_max=sc.delay_max,
                    seed=sc.seed if seed is None else seed)
    agents = {
        ids[name]: AgentState(ids[name], scheme, sc.protocol,
                              batch_size=sc.batch_size,
                              disclose_every=sc.disclose_every)
        for name in sc.agent_names
    }
    sim = Simulator(scheme, net, agents, names)
    for action in sc.actions:
        _schedule(sim, ctx, action)
    sim.scenario_max_ticks = sc.max_ticks if max_ticks is None else max_ticks
    return sim, ctx


def _schedule(sim: Simulator, ctx: BuildContext, a: Action) -> None:
    agent = ctx.ids[a.agent]

    if a.verb == "post":
        sim.script_act(a.tick, agent, FeedPost(a.args[0]))
    elif a.verb == "follow":
        sim.script_act(a.tick, agent, Follow(ctx.ids[a.args[0]]))
    elif a.verb == "unfollow":
        sim.script_act(a.tick, agent, Unfollow(ctx.ids[a.args[0]]))
    elif a.verb == "group-create":
        label = a.args[0]

        def create() -> None:
            state = sim.agents[agent]
            block, _ = state.act(GroupOp("create", NO_GROUP))
            sim._log_block(agent, block)
            ctx.groups[label] = block_hash(block)
        sim.at(a.tick, create)
    elif a.verb in ("group-invite", "group-join", "group-leave", "group-remove"):
        label = a.args[0]
        op = a.verb.removeprefix("group-")
        subject = ctx.ids[a.args[1]] if len(a.args) > 1 else b"\x00" * 16

        def group_op(op=op, label=label, subject=subject, line=a.line) -> None:
            gid = ctx.groups.get(label)
            if gid is None:
                raise ScenarioError(f"group {label!r} not created yet", line)
            state = sim.agents[agent]
            block, intro = state.act(GroupOp(op, gid, subject))
            sim._log_block(agent, block)
            if intro is not None:
                sim._post(state, intro)
        sim.at(a.tick, group_op)
    elif a.verb == "open-credit":
        sim.script_act(a.tick, agent, OpenCredit(ctx.ids[a.args[0]]))
    elif a.verb == "close-credit":
        sim.script_act(a.tick, agent, CloseCredit(ctx.ids[a.args[0]]))
    elif a.verb == "issue":
        sim.script_act(a.tick, agent, Issue(int(a.args[0])))
    elif a.verb == "pay":
        sim.script_act(a.tick, agent,
                       Pay(ctx.ids[a.args[0]], ctx.ids[a.args[2]], int(a.args[1])))
    elif a.verb == "redeem":
        coin_currency = ctx.ids[a.args[0]]
        amount = int(a.args[1])
        against = ctx.ids[a.args[2]]

        def redeem() -> None:
            state = sim.agents[agent]
            pay_block, _ = state.act(Pay(coin_currency, coin_currency, amount))
            sim._log_block(agent, pay_block)
            req, _ = state.act(RedeemRequest(against, amount, block_hash(pay_block)))
            sim._log_block(agent, req)
        sim.at(a.tick, redeem)
    elif a.verb == "roam":
        n = ctx.roam_counter.get(a.agent, 0) + 1
        ctx.roam_counter[a.agent] = n
        sim.script_roam(a.tick, agent, f"net:{a.agent}:{n}")
    elif a.verb == "byzantine":
        behavior = a.args[0]
        sim.at(a.tick, lambda: sim.inject_byzantine(agent, behavior))
    elif a.verb == "equivocate-pay":
        to_a, to_b = ctx.ids[a.args[0]], ctx.ids[a.args[1]]
        amount, currency = int(a.args[2]), ctx.ids[a.args[3]]
        sim.script_equivocate(a.tick, agent,
                              Pay(to_a, currency, amount), Pay(to_b, currency, amount))
    elif a.verb == "equivocate-post":
        sim.script_equivocate(a.tick, agent,
                              FeedPost(a.args[0]), FeedPost(a.args[1]))
    else:  # pragma: no cover - guarded by _check_actions
        raise ScenarioError(f"unknown verb {a.verb!r}", a.line)
