"""Supermajority-based equivocation exclusion.

With n agents of which at most f are faulty, a supermajority is any set of
agents strictly larger than (n+f)/2.  Two supermajorities share a correct
agent, and a correct agent never approves two equivocating blocks, so no two
equivocating blocks can both be supermajority-approved.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .block import BlockHash
from .blocklace import Blocklace
from .identity import AgentId


@dataclass(frozen=True)
class FaultConfig:
    n: int
    f: int
    enforce_classical: bool = True  # assert n > 3f (the classical regime)

    def __post_init__(self) -> None:
        if not (0 <= self.f < self.n):
            raise ValueError("need 0 <= f < n")
        if self.enforce_classical and not self.n > 3 * self.f:
            raise ValueError("classical regime requires n > 3f")


def supermajority_threshold(cfg: FaultConfig) -> int:
    """Least integer strictly greater than (n+f)/2."""
    return (cfg.n + cfg.f) // 2 + 1


def approves(local: Blocklace, p: AgentId, h: BlockHash) -> bool:
    """True iff some p-block's cone contains ``h`` but no block equivocating
    with ``h``.

    Per the definition, the p-block itself does not count as referring to
    itself (a cone excludes its tip), so self-approval requires a later
    p-block.
    """
    if not local.is_resolved(h):
        return False
    target_idx = local._idx[h]
    sibling_idx = [local._idx[s] for s in local.equivocating_with(h)]
    for own in local.by_creator.get(p, []):
        bits = local._anc[local._idx[own]]
        if not bits >> target_idx & 1:
            continue
        if any(bits >> si & 1 for si in sibling_idx):
            continue
        return True
    return False


def approvers(local: Blocklace, h: BlockHash, roster: Iterable[AgentId]) -> set[AgentId]:
    return {p for p in roster if approves(local, p, h)}


def supermajority_approved(local: Blocklace, h: BlockHash, cfg: FaultConfig,
                           roster: Iterable[AgentId]) -> bool:
    roster = list(roster)
    threshold = supermajority_threshold(cfg)
    count = 0
    for p in roster:
        if approves(local, p, h):
            count += 1
            if count >= threshold:
                return True
    return False
