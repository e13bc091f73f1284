"""The blocklace: a DAG of signed, hash-addressed blocks with buffering.

Each agent keeps a local blocklace.  Blocks whose predecessors are all present
are *resolved*; blocks arriving out of order are buffered as *pending* until
their missing predecessors arrive.  Hashes referenced but not present are
*dangling*.

Resolved blocks are indexed densely, and each resolved block carries an
ancestor bitset (a Python int with bit i set iff block i is in its cone).
Resolution happens parents-first, so the bitset of a block is the union of its
parents' bitsets plus the parents themselves; this makes cone membership,
equivocation detection and approval checks cheap bit operations.

The structure is a state-based CRDT: inserting the same set of valid blocks in
any order (with buffering) yields the same state, and ``join`` is set union.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

from .block import Block, BlockHash, block_hash, make_block, verify_signature
from .errors import (
    IncompleteConeError,
    InvalidBlockError,
    SelfChainViolationError,
    UnresolvedPredecessorError,
)
from .identity import AgentId, SignatureScheme

ACCEPT = "accept"
PENDING = "pending"
REJECT = "reject"


@dataclass(frozen=True)
class Verdict:
    status: str
    reason: str = ""
    missing: frozenset[BlockHash] = frozenset()

    def __bool__(self) -> bool:
        return self.status != REJECT


class Blocklace:
    """An agent's local set of validated blocks, with buffering and indices."""

    def __init__(self, scheme: SignatureScheme):
        self.scheme = scheme
        self.blocks: dict[BlockHash, Block] = {}          # resolved
        self.pending: dict[BlockHash, Block] = {}         # buffered, preds missing
        self._missing_of: dict[BlockHash, set[BlockHash]] = {}  # pending -> unresolved preds
        self._waiters: dict[BlockHash, set[BlockHash]] = {}     # missing hash -> pending deps
        self.by_creator: dict[AgentId, list[BlockHash]] = {}    # resolution order
        self._idx: dict[BlockHash, int] = {}
        self._hashes: list[BlockHash] = []                # index -> hash
        self._anc: list[int] = []                         # index -> ancestor bitset
        self._referenced: set[BlockHash] = set()          # referenced by a resolved block

    # -- queries ------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.blocks)

    def __contains__(self, h: BlockHash) -> bool:
        return h in self.blocks

    def is_resolved(self, h: BlockHash) -> bool:
        return h in self.blocks

    def has_block(self, h: BlockHash) -> bool:
        return h in self.blocks or h in self.pending

    @property
    def dangling(self) -> set[BlockHash]:
        """Hashes referenced by stored blocks but present nowhere locally."""
        return {h for h in self._waiters if not self.has_block(h)}

    def get(self, h: BlockHash) -> Block | None:
        b = self.blocks.get(h)
        return b if b is not None else self.pending.get(h)

    def resolved_in_order(self) -> Iterator[tuple[BlockHash, Block]]:
        """Resolved blocks in resolution order (a topological order)."""
        for h in self._hashes:
            yield h, self.blocks[h]

    # -- validation ---------------------------------------------------------

    def validate_block(self, b: Block) -> Verdict:
        """Accept / Pending / Reject verdict; never raises."""
        if len(b.predecessors) != len(set(b.predecessors)):
            return Verdict(REJECT, "duplicate predecessors")
        if list(b.predecessors) != sorted(b.predecessors):
            return Verdict(REJECT, "predecessors not canonical")
        if b.seq < 0:
            return Verdict(REJECT, "negative seq")
        if not verify_signature(b, self.scheme):
            return Verdict(REJECT, "signature")
        missing = frozenset(p for p in b.predecessors if p not in self.blocks)
        if missing:
            return Verdict(PENDING, missing=missing)
        return Verdict(ACCEPT)

    # -- mutation -----------------------------------------------------------

    def insert(self, b: Block) -> set[BlockHash]:
        """Store a valid block; returns the set of newly-resolved hashes.

        Idempotent.  Pending blocks are buffered and resolved once their
        missing predecessors arrive.  Raises InvalidBlockError on Reject.
        """
        verdict = self.validate_block(b)
        if verdict.status == REJECT:
            raise InvalidBlockError(f"invalid block: {verdict.reason}")
        h = block_hash(b)
        if self.has_block(h):
            return set()
        if verdict.status == PENDING:
            self.pending[h] = b
            self._missing_of[h] = set(verdict.missing)
            for m in verdict.missing:
                self._waiters.setdefault(m, set()).add(h)
            return set()
        resolved = {h}
        self._resolve(h, b)
        resolved |= self._cascade(h)
        return resolved

    def insert_all(self, blocks: Iterable[Block]) -> set[BlockHash]:
        out: set[BlockHash] = set()
        for b in blocks:
            out |= self.insert(b)
        return out

    def _resolve(self, h: BlockHash, b: Block) -> None:
        idx = len(self._hashes)
        bits = 0
        for p in b.predecessors:
            pi = self._idx[p]
            bits |= self._anc[pi] | (1 << pi)
        self.blocks[h] = b
        self._idx[h] = idx
        self._hashes.append(h)
        self._anc.append(bits)
        self.by_creator.setdefault(b.creator, []).append(h)
        self._referenced.update(b.predecessors)

    def _cascade(self, start: BlockHash) -> set[BlockHash]:
        newly: set[BlockHash] = set()
        frontier = [start]
        while frontier:
            h = frontier.pop()
            for waiter in sorted(self._waiters.pop(h, ())):
                missing = self._missing_of[waiter]
                missing.discard(h)
                if not missing:
                    b = self.pending.pop(waiter)
                    del self._missing_of[waiter]
                    self._resolve(waiter, b)
                    newly.add(waiter)
                    frontier.append(waiter)
                else:
                    self._missing_of[waiter] = missing
        return newly

    # -- partial-order queries ---------------------------------------------

    def cone_bits(self, h: BlockHash) -> int:
        if h not in self.blocks:
            raise IncompleteConeError("incomplete cone: block not resolved")
        return self._anc[self._idx[h]]

    def cone(self, h: BlockHash) -> set[BlockHash]:
        """All blocks reachable from ``h`` via predecessor pointers (excl. ``h``)."""
        bits = self.cone_bits(h)
        out: set[BlockHash] = set()
        i = 0
        while bits:
            if bits & 1:
                out.add(self._hashes[i])
            bits >>= 1
            i += 1
        return out

    def in_cone(self, ancestor: BlockHash, descendant: BlockHash) -> bool:
        """True iff ``ancestor`` is in cone(``descendant``)."""
        if ancestor not in self.blocks:
            return False
        return bool(self.cone_bits(descendant) >> self._idx[ancestor] & 1)

    def tips(self) -> set[BlockHash]:
        """Resolved blocks not referenced by any resolved block."""
        return {h for h in self.blocks if h not in self._referenced}

    def creator_tips(self, creator: AgentId) -> list[BlockHash]:
        """Tips of a creator's own sub-DAG (one element iff the creator's
        blocks form a chain), sorted by (seq, hash)."""
        own = self.by_creator.get(creator, [])
        covered = 0
        for h in own:
            covered |= self._anc[self._idx[h]]
        tips = [h for h in own if not covered >> self._idx[h] & 1]
        return sorted(tips, key=lambda h: (self.blocks[h].seq, h))

    def max_seq(self, creator: AgentId) -> int | None:
        own = self.by_creator.get(creator)
        if not own:
            return None
        return max(self.blocks[h].seq for h in own)

    def detect_equivocation(self, creator: AgentId) -> list[tuple[BlockHash, BlockHash]]:
        """All pairs of resolved same-creator blocks with no cone relation.

        Empty iff the creator's resolved blocks form a chain.  Pairs are
        returned sorted, each pair ordered ascending by hash.
        """
        own = self.by_creator.get(creator, [])
        pairs = []
        for i in range(len(own)):
            hi = own[i]
            ii = self._idx[hi]
            for j in range(i + 1, len(own)):
                hj = own[j]
                ij = self._idx[hj]
                if not (self._anc[ij] >> ii & 1) and not (self._anc[ii] >> ij & 1):
                    pairs.append(tuple(sorted((hi, hj))))
        return sorted(pairs)

    def equivocating_with(self, h: BlockHash) -> list[BlockHash]:
        """Resolved blocks by the same creator that equivocate with ``h``."""
        b = self.blocks[h]
        i = self._idx[h]
        out = []
        for other in self.by_creator.get(b.creator, []):
            if other == h:
                continue
            j = self._idx[other]
            if not (self._anc[i] >> j & 1) and not (self._anc[j] >> i & 1):
                out.append(other)
        return sorted(out)

    def is_equivocator(self, creator: AgentId) -> bool:
        return len(self.creator_tips(creator)) > 1 or bool(self.detect_equivocation(creator))

    # -- CRDT ---------------------------------------------------------------

    def join(self, other: "Blocklace") -> "Blocklace":
        """Set union of two blocklaces (commutative, associative, idempotent)."""
        out = Blocklace(self.scheme)
        for _, b in self.resolved_in_order():
            out.insert(b)
        for _, b in other.resolved_in_order():
            out.insert(b)
        for b in self.pending.values():
            out.insert(b)
        for b in other.pending.values():
            out.insert(b)
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Blocklace):
            return NotImplemented
        return (self.blocks.keys() == other.blocks.keys()
                and self.pending.keys() == other.pending.keys())

    def __hash__(self) -> int:  # pragma: no cover - identity hashing unused
        return id(self)

    def digest(self) -> bytes:
        """Order-insensitive fingerprint of the stored block sets."""
        import hashlib
        h = hashlib.sha256()
        for k in sorted(self.blocks):
            h.update(k)
        h.update(b"|pending|")
        for k in sorted(self.pending):
            h.update(k)
        return h.digest()


# create_block is a plain function (not a method) because it needs signing
# capability, which a blocklace holding remote blocks does not have.
def create_block(local: Blocklace, creator: AgentId, scheme: SignatureScheme,
                 predecessors: Iterable[BlockHash], payload) -> Block:
    """Create, sign and return a correct-agent block extending ``local``.

    Enforces the correct-agent discipline: every predecessor must be resolved,
    and if the creator already has blocks, the predecessors must include the
    creator's own latest block.  Use :func:`forge_block` to model Byzantine
    behaviour in tests and adversarial simulations.
    """
    preds = sorted(set(predecessors))
    for p in preds:
        if not local.is_resolved(p):
            raise UnresolvedPredecessorError("unresolved predecessor")
    own_tips = local.creator_tips(creator)
    if own_tips:
        latest = own_tips[-1]
        if latest not in preds:
            raise SelfChainViolationError("self-chain violation")
        seq = local.max_seq(creator) + 1
    else:
        seq = 0
    return make_block(creator, seq, preds, payload, scheme)


def forge_block(creator: AgentId, scheme: SignatureScheme, seq: int,
                predecessors: Iterable[BlockHash], payload) -> Block:
    """Build a signed block without correct-agent checks (Byzantine/test use)."""
    return make_block(creator, seq, sorted(set(predecessors)), payload, scheme)
