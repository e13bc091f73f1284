"""Shared fixtures and independent oracles for the test suite.

The oracles here deliberately avoid the library's incremental caches: cones
are recomputed by plain graph traversal over predecessor lists, and ordering
is re-derived by repeated minimum extraction.  Agreement between the fast
paths and these slow paths is what most of the suite checks.
"""

from __future__ import annotations

import pytest

from grassroots.block import Block, BlockHash
from grassroots.blocklace import Blocklace, create_block
from grassroots.identity import AgentId, KeyedMacScheme
from grassroots.netsim import Rng
from grassroots.payload import FeedPost, Noop


@pytest.fixture
def scheme() -> KeyedMacScheme:
    return KeyedMacScheme()


@pytest.fixture
def agents(scheme) -> list[AgentId]:
    return [scheme.register(name) for name in ("alice", "bob", "carol", "dave", "erin")]


def build_random_dag(scheme: KeyedMacScheme, creators: list[AgentId],
                     n_blocks: int, seed: int) -> list[Block]:
    """A valid random blocklace: each agent keeps a self-chain, predecessors
    are a random subset of current tips (always including the agent's own
    latest block once it has one).  Returned in a valid insertion order."""
    rng = Rng(seed)
    lace = Blocklace(scheme)
    out: list[Block] = []
    for i in range(n_blocks):
        creator = creators[rng.randint(0, len(creators) - 1)]
        tips = sorted(lace.tips())
        own = lace.creator_tips(creator)
        preds = {h for h in tips if rng.random() < 0.6}
        if own:
            preds.add(own[-1])
        elif tips and not preds:
            preds.add(tips[rng.randint(0, len(tips) - 1)])
        b = create_block(lace, creator, scheme, sorted(preds), FeedPost(f"p{i}"))
        lace.insert(b)
        out.append(b)
    return out


def cone_oracle(blocks_by_hash: dict[BlockHash, Block], h: BlockHash) -> set[BlockHash]:
    """Causal past of h (exclusive) by explicit DFS over predecessor lists."""
    seen: set[BlockHash] = set()
    stack = list(blocks_by_hash[h].predecessors)
    while stack:
        x = stack.pop()
        if x in seen:
            continue
        seen.add(x)
        stack.extend(blocks_by_hash[x].predecessors)
    return seen


def order_oracle(blocks_by_hash: dict[BlockHash, Block],
                 universe: set[BlockHash],
                 exclusions: set[BlockHash] = frozenset()) -> list[BlockHash]:
    """Repeated-minimum topological order: at each step emit the smallest
    hash whose (non-excluded) ancestors have all been emitted."""
    excluded = set(exclusions)
    # expand exclusions transitively is NOT done here: exclusions only drop
    # the named blocks; descendants remain and depend on surviving ancestors
    remaining = {h for h in universe if h not in excluded}
    anc = {h: cone_oracle(blocks_by_hash, h) & remaining for h in remaining}
    out: list[BlockHash] = []
    done: set[BlockHash] = set()
    while remaining:
        ready = sorted(h for h in remaining if anc[h] <= done)
        assert ready, "cycle in oracle input"
        pick = ready[0]
        out.append(pick)
        done.add(pick)
        remaining.discard(pick)
    return out


def mk_chain(scheme: KeyedMacScheme, creator: AgentId, length: int,
             lace: Blocklace | None = None) -> tuple[Blocklace, list[Block]]:
    lace = lace if lace is not None else Blocklace(scheme)
    chain = []
    for i in range(length):
        b = create_block(lace, creator, scheme, lace.tips(), Noop())
        lace.insert(b)
        chain.append(b)
    return lace, chain
