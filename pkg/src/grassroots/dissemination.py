"""Per-agent grassroots dissemination: disclosure and cordiality.

Disclosure: every new block an agent creates points at the current tips of
its local blocklace, so the block acks its whole cone and implicitly nacks
everything else.  Cordiality: each tick, for every friend, the agent sends
the blocks the friend needs (per the active protocol's needs table, closed
under cones) minus the cone of the friend's latest known block.

Retransmission is implicit: the diff is recomputed every tick, so lost
messages are resent until the friend's next disclosure acks them.

The friendship predicate and the needs predicate both derive from the
agent's *local* blocklace, so communication stays on the social graph as the
agent knows it.  Edge-creating acts (follow, invite, open-credit) emit a
one-shot introduction carrying the new block and its cone to the target,
which bootstraps mutual knowledge of the edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .block import Block, BlockHash, block_hash
from .blocklace import Blocklace, create_block
from .currency import credit_graph, replay
from .identity import AgentId, SignatureScheme
from .payload import COIN_OPS, Follow, GroupOp, Noop, OpenCredit, Payload
from .social import CURRENCY, GraphState, TWITTER, WHATSAPP, derive_graph, friendship

import struct

from .block import decode_block, encode_block
from .errors import DecodeError


def encode_batch(blocks: list[Block]) -> bytes:
    """Wire format: count-prefixed sequence of length-prefixed block encodings."""
    out = bytearray(struct.pack(">I", len(blocks)))
    for b in blocks:
        wire = encode_block(b)
        out += struct.pack(">I", len(wire))
        out += wire
    return bytes(out)


def decode_batch(data: bytes) -> list[Block]:
    off = 0
    if len(data) < 4:
        raise DecodeError("truncated batch")
    (count,) = struct.unpack(">I", data[:4])
    off = 4
    blocks = []
    for _ in range(count):
        if off + 4 > len(data):
            raise DecodeError("truncated batch")
        (n,) = struct.unpack(">I", data[off:off + 4])
        off += 4
        if off + n > len(data):
            raise DecodeError("truncated batch")
        blocks.append(decode_block(data[off:off + n]))
        off += n
    if off != len(data):
        raise DecodeError("trailing bytes in batch")
    return blocks


@dataclass
class PeerView:
    peer: AgentId
    latest: BlockHash | None = None  # most recent peer-created block held locally
    address: str | None = None
    sent_since_ack: set[BlockHash] = field(default_factory=set)


@dataclass
class Outgoing:
    """A batch addressed to a peer; the simulator turns it into a datagram."""
    peer: AgentId
    address: str
    blocks: list[Block]


class AgentState:
    """Dissemination state machine for one agent (single-owner, no locking)."""

    def __init__(self, agent: AgentId, scheme: SignatureScheme, protocol: str,
                 batch_size: int = 64, disclose_every: int = 1):
        self.agent = agent
        self.scheme = scheme
        self.protocol = protocol
        self.batch_size = batch_size
        self.disclose_every = disclose_every
        self.local = Blocklace(scheme)
        self.views: dict[AgentId, PeerView] = {}
        self.invalid_dropped = 0
        self._graph_cache: tuple[int, GraphState] | None = None
        self._ledger_cache = None

    # -- local state derivations -------------------------------------------

    def _version(self) -> int:
        return len(self.local.blocks)

    def graph(self) -> GraphState:
        if self._graph_cache is None or self._graph_cache[0] != self._version():
            if self.protocol == CURRENCY:
                state = credit_graph(self.ledger())
            else:
                state = derive_graph(self.local)
            self._graph_cache = (self._version(), state)
        return self._graph_cache[1]

    def ledger(self):
        if self._ledger_cache is None or self._ledger_cache[0] != self._version():
            self._ledger_cache = (self._version(), replay(self.local))
        return self._ledger_cache[1]

    def view_of(self, peer: AgentId) -> PeerView:
        view = self.views.get(peer)
        if view is None:
            view = PeerView(peer)
            self.views[peer] = view
        return view

    def friends(self) -> list[AgentId]:
        g = self.graph()
        peers = {q for q in self.views if q != self.agent}
        if self.protocol == TWITTER:
            peers |= {q for (p, q) in g.follows if p == self.agent}
        elif self.protocol == WHATSAPP:
            for group in g.groups.values():
                peers |= group.members
        else:
            peers |= {q for (p, q) in g.follows if p == self.agent}
        return sorted(q for q in peers if q != self.agent
                      and friendship(g, self.agent, q, self.protocol))

    # -- block creation -----------------------------------------------------

    def author(self, payload: Payload) -> Block:
        """Create, sign and insert a new own block pointing at current tips."""
        preds = set(self.local.tips())
        own_tips = self.local.creator_tips(self.agent)
        if own_tips:
            preds.add(own_tips[-1])
        block = create_block(self.local, self.agent, self.scheme, preds, payload)
        self.local.insert(block)
        return block

    def disclose(self) -> Block:
        """Author a tips-pointing block (a pure multichannel ack/nack)."""
        return self.author(Noop())

    def _needs_disclosure(self) -> bool:
        """Disclose when unacked foreign *content* exists.

        Acking only content (non-Noop payloads) damps the ack-of-ack regress:
        two quiescent friends would otherwise ack each other's acks forever.
        The price is that the last ack in any exchange is itself never acked,
        which is inherent to unreliable transport anyway.
        """
        own_tips = self.local.creator_tips(self.agent)
        if not own_tips:
            return True  # genesis block
        latest = own_tips[-1]
        local = self.local
        i = local._idx[latest]
        known = local._anc[i] | (1 << i)
        for h, b in local.resolved_in_order():
            if b.creator == self.agent or isinstance(b.payload, Noop):
                continue
            if not known >> local._idx[h] & 1:
                return True
        return False

    # -- needs / cordiality -------------------------------------------------

    def _needed_bits(self, q: AgentId) -> int:
        """Bitset of resolved blocks ``q`` needs, closed under cones."""
        local = self.local
        g = self.graph()
        base: list[BlockHash] = []
        if self.protocol == TWITTER:
            authors = {q} | {b for (a, b) in g.follows if a == q}
            for author in authors:
                base.extend(local.by_creator.get(author, []))
        elif self.protocol == WHATSAPP:
            peers = {q}
            for group in g.groups.values():
                if q in group.members:
                    peers |= group.members
                # invited agents need the group's history to decide to join
                if q in group.invited:
                    peers |= group.members
            for peer in peers:
                base.extend(local.by_creator.get(peer, []))
        elif self.protocol == CURRENCY:
            # payments to q / in q's coin, credit ops and rulings; all coin
            # traffic is shared along credit lines so ledgers can converge
            for h, b in local.resolved_in_order():
                if isinstance(b.payload, COIN_OPS) or b.creator == q:
                    base.append(h)
        else:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        bits = 0
        for h in base:
            i = local._idx[h]
            bits |= (1 << i) | local._anc[i]
        return bits

    def cordial_diff(self, q: AgentId) -> list[Block]:
        """Blocks ``q`` needs that are outside the cone of q's latest known
        block, parents first."""
        local = self.local
        view = self.view_of(q)
        known = 0
        if view.latest is not None and local.is_resolved(view.latest):
            i = local._idx[view.latest]
            known = local._anc[i] | (1 << i)
        send_bits = self._needed_bits(q) & ~known
        out = []
        i = 0
        while send_bits:
            if send_bits & 1:
                out.append(local.blocks[local._hashes[i]])
            send_bits >>= 1
            i += 1
        return out  # index order == resolution order == parents first

    # -- transport events ---------------------------------------------------

    def on_receive(self, sender: AgentId, sender_address: str,
                   blocks: list[Block]) -> set[BlockHash]:
        """Validate and insert a batch; update the sender's view and address."""
        newly: set[BlockHash] = set()
        for b in blocks:
            verdict = self.local.validate_block(b)
            if not verdict:
                self.invalid_dropped += 1
                continue
            newly |= self.local.insert(b)
        view = self.view_of(sender)
        view.address = sender_address
        sender_tips = self.local.creator_tips(sender)
        if sender_tips:
            view.latest = sender_tips[-1]
            known = self.local.cone(view.latest) | {view.latest}
            view.sent_since_ack -= known
        return newly

    def tick(self, now: int) -> list[Outgoing]:
        """One dissemination round: maybe disclose, then cordial batches."""
        if self.disclose_every and now % self.disclose_every == 0 and self._needs_disclosure():
            self.disclose()
        out: list[Outgoing] = []
        for q in self.friends():
            view = self.view_of(q)
            if view.address is None:
                continue
            diff = self.cordial_diff(q)
            if not diff:
                continue
            batch = diff[:self.batch_size]
            view.sent_since_ack.update(block_hash(b) for b in batch)
            out.append(Outgoing(q, view.address, batch))
        return out

    def introduce(self, target: AgentId, new_block: Block) -> Outgoing | None:
        """One-shot bootstrap send to the target of a new edge: the edge block
        plus its cone, so the target can resolve it."""
        view = self.view_of(target)
        if view.address is None:
            return None
        local = self.local
        h = block_hash(new_block)
        cone = local.cone(h)
        if view.latest is not None and local.is_resolved(view.latest):
            cone -= local.cone(view.latest) | {view.latest}
        blocks = [local.blocks[x] for x in sorted(cone, key=local._idx.get)]
        blocks.append(new_block)
        return Outgoing(target, view.address, blocks)

    # -- scripted acts (used by the simulator and tests) --------------------

    def act(self, payload: Payload) -> tuple[Block, Outgoing | None]:
        """Author a block and, for edge-creating payloads, an introduction."""
        block = self.author(payload)
        target: AgentId | None = None
        if isinstance(block.payload, (Follow, OpenCredit)):
            target = block.payload.target if isinstance(block.payload, Follow) \
                else block.payload.peer
        elif isinstance(block.payload, GroupOp) and block.payload.op in ("invite", "remove"):
            # A removal also goes straight to the affected agent: once the
            # edge is cut they would otherwise never learn they are out, and
            # their later posts would still look like member posts.
            target = block.payload.subject
        intro = self.introduce(target, block) if target and target != self.agent else None
        return block, intro
