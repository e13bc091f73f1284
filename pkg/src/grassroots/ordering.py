"""Deterministic total ordering of a blocklace cone.

The linearization is a topological sort of the cone: among causally
incomparable blocks, ties break by ascending hash bytes, so every agent
holding the same cone produces the byte-identical sequence.

An exclusion set (losing sides of equivocations) removes blocks from the
output without breaking the order of the survivors: a survivor whose pointer
chain runs through an excluded block still follows that block's surviving
ancestors.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .block import BlockHash
from .blocklace import Blocklace
from .errors import IncompleteConeError


@dataclass(frozen=True)
class OrderedLog:
    anchor: BlockHash
    sequence: tuple[BlockHash, ...]


def order_cone(local: Blocklace, anchor: BlockHash,
               exclusions: frozenset[BlockHash] | set[BlockHash] = frozenset()) -> OrderedLog:
    """Linearize cone(anchor) ∪ {anchor} minus ``exclusions``.

    Kahn's algorithm with a min-heap keyed by hash bytes; edges are the direct
    predecessor pointers, with excluded blocks expanded transitively to their
    own predecessors so causal constraints survive exclusion.
    """
    if not local.is_resolved(anchor):
        raise IncompleteConeError("incomplete cone: anchor not resolved")
    members = local.cone(anchor) | {anchor}
    for x in exclusions:
        if x == anchor or x not in members:
            raise ValueError("exclusions must be a subset of cone(anchor)")
    nodes = members - set(exclusions)
    return OrderedLog(anchor, _linearize(local, nodes, set(exclusions)))


def order_blocks(local: Blocklace,
                 exclusions: frozenset[BlockHash] | set[BlockHash] = frozenset()) -> tuple[BlockHash, ...]:
    """Linearize all resolved blocks with the same rule (no anchor).

    Used for folding protocol state out of an agent's whole local blocklace.
    """
    nodes = set(local.blocks) - set(exclusions)
    return _linearize(local, nodes, set(exclusions))


def _linearize(local: Blocklace, nodes: set[BlockHash],
               excluded: set[BlockHash]) -> tuple[BlockHash, ...]:
    # effective predecessors within `nodes`, expanding through excluded blocks
    expand_memo: dict[BlockHash, frozenset[BlockHash]] = {}

    def effective_preds(h: BlockHash) -> set[BlockHash]:
        out: set[BlockHash] = set()
        for p in local.blocks[h].predecessors:
            if p in nodes:
                out.add(p)
            elif p in excluded:
                out |= expanded(p)
            # predecessors outside cone-of-interest cannot occur: cone is closed
        return out

    def expanded(x: BlockHash) -> frozenset[BlockHash]:
        got = expand_memo.get(x)
        if got is None:
            got = frozenset(effective_preds(x))
            expand_memo[x] = got
        return got

    preds_of = {h: effective_preds(h) for h in nodes}
    succs: dict[BlockHash, list[BlockHash]] = {h: [] for h in nodes}
    indegree: dict[BlockHash, int] = {}
    for h in nodes:
        indegree[h] = len(preds_of[h])
        for p in preds_of[h]:
            succs[p].append(h)
    ready = [h for h in nodes if indegree[h] == 0]
    heapq.heapify(ready)
    out: list[BlockHash] = []
    while ready:
        h = heapq.heappop(ready)
        out.append(h)
        for s in succs[h]:
            indegree[s] -= 1
            if indegree[s] == 0:
                heapq.heappush(ready, s)
    if len(out) != len(nodes):  # cycles are impossible given hash pointers
        raise AssertionError("topological sort did not cover all nodes")
    return tuple(out)
