"""Grassroots currency semantics over the blocklace.

Coins are fungible units of debt: every agent may issue units of its own
currency, and balances are account-style per (holder, currency).  Payments
require an open mutual credit line between payer and payee and sufficient
balance; anything else folds to a no-op with a diagnostic, so replay never
stalls on bad input.

Doublespends are equivocating payments; the issuer of the spent currency
resolves them with a deterministic ruling (smaller block hash wins) whose
losers are excluded from replay.  Redemption is two-phase: a request paired
with the payment returning the redeemed coins records an obligation on the
issuer, which a later causally-following payment settles; unsettled
obligations are the insolvency signal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .block import Block, BlockHash
from .blocklace import Blocklace
from .errors import NotAnEquivocationError
from .identity import AgentId
from .ordering import order_blocks, order_cone
from .payload import (
    CloseCredit,
    COIN_OPS,
    Issue,
    IssuerRuling,
    OpenCredit,
    Pay,
    RedeemRequest,
)
from .social import GraphState


@dataclass
class Obligation:
    request: BlockHash
    issuer: AgentId
    redeemer: AgentId
    currency: AgentId
    amount: int
    settled_by: BlockHash | None = None

    @property
    def settled(self) -> bool:
        return self.settled_by is not None


@dataclass
class LedgerState:
    issued: dict[AgentId, int] = field(default_factory=dict)
    holdings: dict[tuple[AgentId, AgentId], int] = field(default_factory=dict)
    credit: dict[tuple[AgentId, AgentId], bool] = field(default_factory=dict)
    obligations: list[Obligation] = field(default_factory=list)
    applied_pays: set[BlockHash] = field(default_factory=set)
    exclusions: frozenset[BlockHash] = frozenset()
    rulings: dict[BlockHash, tuple[BlockHash, ...]] = field(default_factory=dict)
    diagnostics: list[tuple[BlockHash, str]] = field(default_factory=list)
    _ruling_issuer: dict[BlockHash, AgentId] = field(default_factory=dict)

    def balance(self, holder: AgentId, currency: AgentId) -> int:
        return self.holdings.get((holder, currency), 0)

    def credit_open(self, p: AgentId, q: AgentId) -> bool:
        """Mutual line: both sides' latest credit op toward the other is Open."""
        return bool(self.credit.get((p, q))) and bool(self.credit.get((q, p)))

    def unsettled(self) -> list[Obligation]:
        return [o for o in self.obligations if not o.settled]

    def discredited(self) -> set[AgentId]:
        """Issuers with a proven payment equivocation or unsettled obligation."""
        out = {w_issuer for w_issuer in
               (self._ruling_issuer.get(w) for w in self.rulings) if w_issuer}
        out |= {o.issuer for o in self.unsettled()}
        return out


@dataclass(frozen=True)
class SupplyMetrics:
    currency: AgentId
    issued: int
    in_circulation: int
    held_by_issuer: int


def _is_payment_equivocation(local: Blocklace, issuer: AgentId,
                             h1: BlockHash, h2: BlockHash) -> bool:
    b1, b2 = local.get(h1), local.get(h2)
    if b1 is None or b2 is None:
        return False
    p1, p2 = b1.payload, b2.payload
    if not (isinstance(p1, Pay) and isinstance(p2, Pay)):
        return False
    if p1.currency != issuer or p2.currency != issuer:
        return False
    if b1.creator != b2.creator:
        return False
    if not (local.is_resolved(h1) and local.is_resolved(h2)):
        return False
    return not local.in_cone(h1, h2) and not local.in_cone(h2, h1)


def resolve_doublespend(local: Blocklace, issuer: AgentId,
                        pair: tuple[BlockHash, BlockHash]) -> IssuerRuling:
    """The issuer's deterministic ruling for an equivocating payment pair:
    the block with the smaller hash wins."""
    h1, h2 = pair
    if not _is_payment_equivocation(local, issuer, h1, h2):
        raise NotAnEquivocationError("not an equivocation")
    winner, loser = sorted((h1, h2))
    return IssuerRuling(winner, (loser,))


def _collect_rulings(local: Blocklace, sequence: tuple[BlockHash, ...],
                     state: LedgerState) -> frozenset[BlockHash]:
    excluded: set[BlockHash] = set()
    for h in sequence:
        block = local.blocks[h]
        p = block.payload
        if not isinstance(p, IssuerRuling):
            continue
        issuer = block.creator
        ok = all(_is_payment_equivocation(local, issuer, p.winner, loser)
                 for loser in p.losers) and p.losers
        if not ok:
            state.diagnostics.append((h, "invalid ruling"))
            continue
        state.rulings[p.winner] = p.losers
        state._ruling_issuer[p.winner] = issuer
        excluded.update(p.losers)
    return frozenset(excluded)


def replay(local: Blocklace, anchor: BlockHash | None = None,
           extra_exclusions: frozenset[BlockHash] = frozenset()) -> LedgerState:
    """Derive ledger state from a cone (or the whole local blocklace).

    Two passes over the same deterministic linearization: first collect
    issuer rulings to build the exclusion set, then fold coin ops with the
    losers excluded.
    """
    state = LedgerState()
    if anchor is None:
        base = order_blocks(local)
    else:
        base = order_cone(local, anchor).sequence
    ruled_out = _collect_rulings(local, base, state)
    exclusions = frozenset(ruled_out | extra_exclusions)
    state.exclusions = exclusions
    if anchor is None:
        sequence = order_blocks(local, exclusions)
    else:
        safe = frozenset(x for x in exclusions if x != anchor and local.in_cone(x, anchor))
        sequence = order_cone(local, anchor, safe).sequence
    for h in sequence:
        block = local.blocks[h]
        if isinstance(block.payload, COIN_OPS):
            apply_coin_op(state, local, h, block)
    return state


def apply_coin_op(state: LedgerState, local: Blocklace, h: BlockHash, block: Block) -> None:
    """Fold one coin-op block into ``state`` (no-op + diagnostic on any
    precondition failure)."""
    p = block.payload
    who = block.creator
    if isinstance(p, OpenCredit):
        state.credit[(who, p.peer)] = True
    elif isinstance(p, CloseCredit):
        state.credit[(who, p.peer)] = False
    elif isinstance(p, Issue):
        state.issued[who] = state.issued.get(who, 0) + p.amount
        state.holdings[(who, who)] = state.holdings.get((who, who), 0) + p.amount
    elif isinstance(p, Pay):
        _apply_pay(state, local, h, who, p)
    elif isinstance(p, RedeemRequest):
        _apply_redeem_request(state, local, h, who, p)
    elif isinstance(p, IssuerRuling):
        pass  # consumed by the pre-pass
    else:  # pragma: no cover
        raise TypeError(f"not a coin op: {p!r}")


def _apply_pay(state: LedgerState, local: Blocklace, h: BlockHash,
               payer: AgentId, p: Pay) -> None:
    if p.to == payer:
        state.diagnostics.append((h, "self payment"))
        return
    if not state.credit_open(payer, p.to):
        state.diagnostics.append((h, "no credit line"))
        return
    if state.balance(payer, p.currency) < p.amount:
        state.diagnostics.append((h, "insufficient balance"))
        return
    state.holdings[(payer, p.currency)] = state.balance(payer, p.currency) - p.amount
    state.holdings[(p.to, p.currency)] = state.balance(p.to, p.currency) + p.amount
    state.applied_pays.add(h)
    for ob in state.obligations:
        if (not ob.settled and ob.issuer == payer and ob.redeemer == p.to
                and ob.currency == p.currency and ob.amount == p.amount
                and local.in_cone(ob.request, h)):
            ob.settled_by = h
            break


def _apply_redeem_request(state: LedgerState, local: Blocklace, h: BlockHash,
                          redeemer: AgentId, p: RedeemRequest) -> None:
    paired = p.paired_payment
    if paired not in state.applied_pays:
        state.diagnostics.append((h, "paired payment not applied"))
        return
    pay_block = local.blocks[paired]
    pay = pay_block.payload
    if (pay_block.creator != redeemer or pay.to != pay.currency
            or pay.amount != p.amount or not local.in_cone(paired, h)):
        state.diagnostics.append((h, "paired payment does not match request"))
        return
    issuer = pay.currency
    state.obligations.append(Obligation(h, issuer, redeemer, p.against_currency, p.amount))


def supply_metrics(state: LedgerState) -> dict[AgentId, SupplyMetrics]:
    """Per-currency issued / in-circulation / held-by-issuer totals."""
    out = {}
    for currency in sorted(state.issued):
        issued = state.issued[currency]
        own = state.balance(currency, currency)
        out[currency] = SupplyMetrics(currency, issued, issued - own, own)
    return out


def check_conservation(state: LedgerState) -> None:
    """Assert issued(c) == Σ holdings(·, c) for every currency."""
    totals: dict[AgentId, int] = {}
    for (holder, currency), amount in state.holdings.items():
        if amount < 0:
            raise AssertionError("negative balance")
        totals[currency] = totals.get(currency, 0) + amount
    for currency, issued in state.issued.items():
        if totals.get(currency, 0) != issued:
            raise AssertionError(
                f"conservation violated for {currency.hex()[:8]}: "
                f"issued {issued} != held {totals.get(currency, 0)}")
    for currency, total in totals.items():
        if state.issued.get(currency, 0) != total:
            raise AssertionError("holdings in a never-issued currency")


def credit_graph(state: LedgerState) -> GraphState:
    """The credit-line graph as a GraphState (directed open-credit edges),
    so the shared friendship predicate applies."""
    g = GraphState()
    for (a, b), is_open in state.credit.items():
        if is_open:
            g.follows.add((a, b))
    return g


def net_worth(state: LedgerState, agent: AgentId) -> int:
    """Sum of the agent's holdings over all currencies at the 1:1 peg."""
    return sum(amount for (holder, _), amount in state.holdings.items() if holder == agent)


def dump_ledger(state: LedgerState) -> str:
    """Sorted per-currency balance table for golden-file comparison."""
    lines = []
    for currency, metrics in supply_metrics(state).items():
        lines.append(f"currency {currency.hex()[:8]} issued={metrics.issued} "
                     f"circulating={metrics.in_circulation} issuer-held={metrics.held_by_issuer}")
    for (holder, currency) in sorted(state.holdings):
        amount = state.holdings[(holder, currency)]
        if amount:
            lines.append(f"balance {holder.hex()[:8]} {currency.hex()[:8]} {amount}")
    for ob in state.obligations:
        status = f"settled-by {ob.settled_by.hex()[:8]}" if ob.settled else "outstanding"
        lines.append(f"obligation {ob.issuer.hex()[:8]} owes {ob.redeemer.hex()[:8]} "
                     f"{ob.amount} of {ob.currency.hex()[:8]}: {status}")
    return "\n".join(lines)
