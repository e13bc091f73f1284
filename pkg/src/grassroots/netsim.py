"""Deterministic discrete-event simulator of an unreliable, roaming network.

Logical ticks only.  Every random choice (drop, duplicate, delay) comes from
one seeded SplitMix64 stream, so a (scenario, config, seed) triple yields a
byte-identical trace on any host.

Transport model: connectionless datagrams addressed to string addresses.
Roaming changes an agent's address; datagrams to a stale address blackhole.
Each datagram carries its source address (like a UDP packet), so a peer
learns the roamer's new address from the next message it receives.

Per tick: scripted roaming, then due deliveries, then scripted actions, then
every agent's dissemination tick.  The run stops at max-ticks or at
quiescence (nothing in flight, nothing scheduled, nobody emitted).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .block import Block, block_hash, debug_str
from .blocklace import forge_block
from .currency import resolve_doublespend
from .dissemination import AgentState, Outgoing, decode_batch, encode_batch
from .errors import InvariantViolation, NotAnEquivocationError
from .identity import AgentId, SignatureScheme
from .payload import Payload
from .social import CURRENCY

MASK64 = (1 << 64) - 1


class Rng:
    """SplitMix64.  Recurrence, all mod 2^64:

        state += 0x9E3779B97F4A7C15
        z = state
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB
        output = z ^ (z >> 31)

    Chosen for portability: the whole stream is pinned by the recurrence
    above, independent of any language runtime's RNG.
    """

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] (simple modulo; bias is irrelevant at
        the ranges used here and keeps the stream definition trivial)."""
        if hi < lo:
            raise ValueError("empty range")
        return lo + self.next_u64() % (hi - lo + 1)

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(0, i)
            items[i], items[j] = items[j], items[i]


@dataclass(frozen=True)
class NetConfig:
    drop: float = 0.0
    duplicate: float = 0.0
    delay_min: int = 1
    delay_max: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.drop <= 1.0 and 0.0 <= self.duplicate <= 1.0):
            raise ValueError("probabilities must be in [0,1]")
        if not 1 <= self.delay_min <= self.delay_max:
            raise ValueError("need 1 <= delay_min <= delay_max")


@dataclass
class Trace:
    events: list[tuple[int, str, str, str, str]] = field(default_factory=list)

    def log(self, tick: int, kind: str, src: str, dst: str, summary: str) -> None:
        self.events.append((tick, kind, src, dst, summary))

    def to_text(self) -> str:
        return "\n".join(f"{t}\t{k}\t{s}\t{d}\t{m}" for t, k, s, d, m in self.events)


# -- adversarial agent variants --------------------------------------------

BYZANTINE_BEHAVIORS = ("equivocate-payment", "equivocate-feed", "withhold")


class WithholdAgent(AgentState):
    """Receives and stores normally, never sends anything."""

    def tick(self, now: int) -> list[Outgoing]:
        return []

    def introduce(self, target, new_block):
        return None


class EquivocatorAgent(AgentState):
    """Creates a pair of non-referring sibling blocks on demand and then
    shows each branch to a different half of its friends."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.branches: tuple[bytes, bytes] | None = None

    def equivocate(self, payload_a: Payload, payload_b: Payload) -> tuple[Block, Block]:
        own_tips = self.local.creator_tips(self.agent)
        preds = set(self.local.tips())
        seq = 0
        if own_tips:
            preds.add(own_tips[-1])
            seq = self.local.max_seq(self.agent) + 1
        b1 = forge_block(self.agent, self.scheme, seq, preds, payload_a)
        b2 = forge_block(self.agent, self.scheme, seq, preds, payload_b)
        self.local.insert(b1)
        self.local.insert(b2)
        self.branches = tuple(sorted((block_hash(b1), block_hash(b2))))
        return b1, b2

    def _branch_for(self, q: AgentId) -> int:
        friends = self.friends()
        try:
            return friends.index(q) % 2
        except ValueError:
            return 0

    def tick(self, now: int) -> list[Outgoing]:
        if self.branches is None:
            return super().tick(now)
        # no further own blocks: a disclosure would join the two branches
        out: list[Outgoing] = []
        for q in self.friends():
            view = self.view_of(q)
            if view.address is None:
                continue
            hide = self.branches[1 - self._branch_for(q)]
            batch = [b for b in self.cordial_diff(q)
                     if block_hash(b) != hide][:self.batch_size]
            if batch:
                out.append(Outgoing(q, view.address, batch))
        return out


def make_byzantine(state: AgentState, behavior: str) -> AgentState:
    """Swap an agent's state machine for the named adversarial variant,
    keeping its blocklace and peer views."""
    if behavior == "withhold":
        cls = WithholdAgent
    elif behavior in ("equivocate-payment", "equivocate-feed"):
        cls = EquivocatorAgent
    else:
        raise ValueError(f"unknown behavior {behavior!r}")
    evil = cls(state.agent, state.scheme, state.protocol,
               batch_size=state.batch_size, disclose_every=state.disclose_every)
    evil.local = state.local
    evil.views = state.views
    return evil


# -- the simulator ----------------------------------------------------------

@dataclass
class Datagram:
    deliver_tick: int
    seq: int
    sender: AgentId
    src_addr: str
    dst_addr: str
    payload: bytes

    def __lt__(self, other: "Datagram") -> bool:
        return (self.deliver_tick, self.seq) < (other.deliver_tick, other.seq)


class Simulator:
    def __init__(self, scheme: SignatureScheme, net: NetConfig,
                 agents: dict[AgentId, AgentState], names: dict[AgentId, str]):
        self.scheme = scheme
        self.net = net
        self.rng = Rng(net.seed)
        self.agents = agents
        self.names = names
        self.roster = sorted(agents)
        self.trace = Trace()
        self.now = 0
        self._queue: list[Datagram] = []
        self._seq = 0
        self.addresses: dict[AgentId, str] = {a: f"net:{names[a]}:0" for a in self.roster}
        self._addr_owner: dict[str, AgentId] = {addr: a for a, addr in self.addresses.items()}
        self.actions: dict[int, list] = {}          # tick -> [callable]
        self.roaming: dict[int, list[tuple[AgentId, str]]] = {}
        self.counters = {"blocks": 0, "sends": 0, "drops": 0, "duplicates": 0,
                         "delivers": 0, "blackholes": 0, "cordiality-violations": 0,
                         "equivocations": 0, "rulings": 0}
        self.created_at: dict[bytes, int] = {}
        self.max_resolve_latency = 0
        self._seen_equivocations: dict[AgentId, set] = {a: set() for a in self.roster}
        # bootstrap address book: roster addresses are public at t0
        for a in self.roster:
            for b in self.roster:
                if a != b:
                    agents[a].view_of(b).address = self.addresses[b]

    # -- scripting ----------------------------------------------------------

    def at(self, tick: int, fn) -> None:
        self.actions.setdefault(tick, []).append(fn)

    def script_act(self, tick: int, agent: AgentId, payload: Payload) -> None:
        def fn() -> Block:
            state = self.agents[agent]
            block, intro = state.act(payload)
            self._log_block(agent, block)
            if intro is not None:
                self._post(state, intro)
            return block
        self.at(tick, fn)

    def script_equivocate(self, tick: int, agent: AgentId,
                          payload_a: Payload, payload_b: Payload) -> None:
        def fn():
            state = self.agents[agent]
            if not isinstance(state, EquivocatorAgent):
                raise InvariantViolation("byzantine-injection",
                                         f"{self.names[agent]} is not an equivocator")
            b1, b2 = state.equivocate(payload_a, payload_b)
            self._log_block(agent, b1)
            self._log_block(agent, b2)
        self.at(tick, fn)

    def script_roam(self, tick: int, agent: AgentId, new_addr: str) -> None:
        self.roaming.setdefault(tick, []).append((agent, new_addr))

    def inject_byzantine(self, agent: AgentId, behavior: str) -> None:
        if agent not in self.agents:
            raise ValueError("unknown agent")
        self.agents[agent] = make_byzantine(self.agents[agent], behavior)

    # -- internals ----------------------------------------------------------

    def _log_block(self, agent: AgentId, block: Block) -> None:
        self.counters["blocks"] += 1
        h = block_hash(block)
        self.created_at.setdefault(h, self.now)
        self.trace.log(self.now, "block-created", self.names[agent], "-", debug_str(block))

    def _check_cordiality(self, state: AgentState, out: Outgoing) -> None:
        view = state.views.get(out.peer)
        if view is None or view.latest is None or not state.local.is_resolved(view.latest):
            return
        acked = state.local.cone(view.latest) | {view.latest}
        for b in out.blocks:
            if block_hash(b) in acked:
                self.counters["cordiality-violations"] += 1
                raise InvariantViolation(
                    "cordiality", f"{self.names[state.agent]} resent acked block to "
                    f"{self.names[out.peer]}")

    def _post(self, state: AgentState, out: Outgoing) -> None:
        self._check_cordiality(state, out)
        wire = encode_batch(out.blocks)
        src = self.names[state.agent]
        dst = self.names.get(out.peer, out.address)
        summary = f"n={len(out.blocks)} bytes={len(wire)}"
        self.counters["sends"] += 1
        self.trace.log(self.now, "send", src, dst, summary)
        if self.rng.random() < self.net.drop:
            self.counters["drops"] += 1
            self.trace.log(self.now, "drop", src, dst, "loss")
            return
        copies = 1
        if self.rng.random() < self.net.duplicate:
            copies = 2
            self.counters["duplicates"] += 1
            self.trace.log(self.now, "duplicate", src, dst, summary)
        for _ in range(copies):
            delay = self.rng.randint(self.net.delay_min, self.net.delay_max)
            self._seq += 1
            heapq.heappush(self._queue, Datagram(
                self.now + delay, self._seq, state.agent,
                self.addresses[state.agent], out.address, wire))

    def _deliver_due(self) -> int:
        delivered = 0
        while self._queue and self._queue[0].deliver_tick <= self.now:
            d = heapq.heappop(self._queue)
            owner = self._addr_owner.get(d.dst_addr)
            src = self.names[d.sender]
            if owner is None:
                self.counters["blackholes"] += 1
                self.trace.log(self.now, "drop", src, d.dst_addr, "blackhole")
                continue
            state = self.agents[owner]
            blocks = decode_batch(d.payload)
            newly = state.on_receive(d.sender, d.src_addr, blocks)
            for h in newly:
                if h in self.created_at:
                    self.max_resolve_latency = max(
                        self.max_resolve_latency, self.now - self.created_at[h])
            self.counters["delivers"] += 1
            self.trace.log(self.now, "deliver", src, self.names[owner],
                           f"n={len(blocks)} resolved={len(newly)}")
            self._note_equivocations(owner, blocks)
            delivered += 1
        return delivered

    def _note_equivocations(self, observer: AgentId, blocks: list[Block]) -> None:
        state = self.agents[observer]
        for creator in sorted({b.creator for b in blocks}):
            for pair in state.local.detect_equivocation(creator):
                if pair not in self._seen_equivocations[observer]:
                    self._seen_equivocations[observer].add(pair)
                    self.counters["equivocations"] += 1
                    self.trace.log(self.now, "equivocation", self.names[observer],
                                   self.names.get(creator, creator.hex()[:8]),
                                   f"{pair[0].hex()[:8]} {pair[1].hex()[:8]}")

    def _auto_rule(self, issuer: AgentId) -> None:
        """Currency protocol: the issuer rules payment equivocations in its
        own coin as soon as it sees them."""
        state = self.agents[issuer]
        ledger = state.ledger()
        ruled = set(ledger.rulings) | {l for ls in ledger.rulings.values() for l in ls}
        for payer in sorted(state.local.by_creator):
            for pair in state.local.detect_equivocation(payer):
                if pair[0] in ruled or pair[1] in ruled:
                    continue
                try:
                    ruling = resolve_doublespend(state.local, issuer, pair)
                except NotAnEquivocationError:
                    continue
                block = state.author(ruling)
                self._log_block(issuer, block)
                self.counters["rulings"] += 1
                self.trace.log(self.now, "ruling", self.names[issuer], "-",
                               f"winner={ruling.winner.hex()[:8]}")
                ruled.add(ruling.winner)
                ruled.update(ruling.losers)

    def _apply_roaming(self) -> int:
        moved = 0
        for agent, new_addr in self.roaming.pop(self.now, []):
            old = self.addresses[agent]
            if self._addr_owner.get(old) == agent:
                del self._addr_owner[old]
            self.addresses[agent] = new_addr
            self._addr_owner[new_addr] = agent
            self.trace.log(self.now, "address-change", self.names[agent], new_addr, "")
            # announce the move: a fresh disclosure block that friends need
            # and will keep receiving from the new source address
            state = self.agents[agent]
            block = state.disclose()
            self._log_block(agent, block)
            moved += 1
        return moved

    # -- main loop ----------------------------------------------------------

    def run(self, max_ticks: int) -> Trace:
        while self.now < max_ticks:
            activity = 0
            activity += self._apply_roaming()
            activity += self._deliver_due()
            for fn in self.actions.pop(self.now, []):
                fn()
                activity += 1
            for agent in self.roster:
                state = self.agents[agent]
                if state.protocol == CURRENCY and not isinstance(state, EquivocatorAgent):
                    self._auto_rule(agent)
                own_before = len(state.local.by_creator.get(agent, []))
                outs = state.tick(self.now)
                for h in state.local.by_creator.get(agent, [])[own_before:]:
                    self._log_block(agent, state.local.blocks[h])
                    activity += 1
                for out in outs:
                    self._post(state, out)
                    activity += 1
            if (activity == 0 and not self._queue
                    and not self.actions and not self.roaming):
                self.trace.log(self.now, "quiescent", "-", "-", "")
                break
            self.now += 1
        return self.trace

    def summary(self) -> str:
        lines = [f"{k} {v}" for k, v in sorted(self.counters.items())]
        lines.append(f"max-resolve-latency {self.max_resolve_latency}")
        lines.append(f"final-tick {self.now}")
        return "\n".join(lines)
