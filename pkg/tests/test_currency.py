"""Ledger replay, payment rules, redemption and doublespend rulings."""

import pytest

from grassroots.block import block_hash
from grassroots.blocklace import Blocklace, create_block, forge_block
from grassroots.currency import (
    check_conservation, net_worth, replay, resolve_doublespend,
    supply_metrics,
)
from grassroots.errors import NotAnEquivocationError
from grassroots.payload import (
    Issue, IssuerRuling, OpenCredit, Pay, RedeemRequest,
)


def _author(lace, who, scheme, payload):
    preds = set(lace.tips())
    own = lace.creator_tips(who)
    if own:
        preds.add(own[-1])
    b = create_block(lace, who, scheme, sorted(preds), payload)
    lace.insert(b)
    return b


def _open_mutual(lace, scheme, a, b):
    _author(lace, a, scheme, OpenCredit(b))
    _author(lace, b, scheme, OpenCredit(a))


def test_issue_and_pay(scheme, agents):
    bank, alice = agents[:2]
    lace = Blocklace(scheme)
    _open_mutual(lace, scheme, bank, alice)
    _author(lace, bank, scheme, Issue(100))
    _author(lace, bank, scheme, Pay(to=alice, currency=bank, amount=30))
    st = replay(lace)
    assert st.balance(bank, bank) == 70
    assert st.balance(alice, bank) == 30
    check_conservation(st)
    m = supply_metrics(st)[bank]
    assert (m.issued, m.in_circulation, m.held_by_issuer) == (100, 30, 70)


def test_pay_rejections_are_diagnosed(scheme, agents):
    bank, alice, carol = agents[:3]
    lace = Blocklace(scheme)
    _open_mutual(lace, scheme, bank, alice)
    _author(lace, bank, scheme, Issue(10))
    # no credit line bank->carol
    _author(lace, bank, scheme, Pay(to=carol, currency=bank, amount=5))
    # insufficient balance
    _author(lace, bank, scheme, Pay(to=alice, currency=bank, amount=999))
    # self payment
    _author(lace, bank, scheme, Pay(to=bank, currency=bank, amount=1))
    st = replay(lace)
    reasons = sorted(r for _, r in st.diagnostics)
    assert reasons == ["insufficient balance", "no credit line", "self payment"]
    assert st.balance(bank, bank) == 10          # nothing moved
    check_conservation(st)


def test_payment_needs_open_credit_in_effect_at_replay_point(scheme, agents):
    from grassroots.payload import CloseCredit
    bank, alice = agents[:2]
    lace = Blocklace(scheme)
    _open_mutual(lace, scheme, bank, alice)
    _author(lace, bank, scheme, Issue(10))
    _author(lace, alice, scheme, CloseCredit(bank))
    _author(lace, bank, scheme, Pay(to=alice, currency=bank, amount=5))
    st = replay(lace)
    assert st.balance(alice, bank) == 0
    assert any(r == "no credit line" for _, r in st.diagnostics)


def test_redemption_settles_obligation_and_preserves_net_worth(scheme, agents):
    red, blue, green = agents[:3]
    lace = Blocklace(scheme)
    _open_mutual(lace, scheme, red, blue)
    _open_mutual(lace, scheme, blue, green)
    _author(lace, blue, scheme, Issue(10))
    _author(lace, green, scheme, Issue(10))
    _author(lace, blue, scheme, Pay(to=red, currency=blue, amount=10))
    _author(lace, green, scheme, Pay(to=blue, currency=green, amount=10))
    pre = replay(lace)
    worth_red, worth_blue = net_worth(pre, red), net_worth(pre, blue)

    # red returns the blue coins, paired with a redemption request for green
    pay_back = _author(lace, red, scheme, Pay(to=blue, currency=blue, amount=10))
    _author(lace, red, scheme, RedeemRequest(
        against_currency=green, amount=10, paired_payment=block_hash(pay_back)))
    mid = replay(lace)
    assert len(mid.unsettled()) == 1
    ob = mid.unsettled()[0]
    assert (ob.issuer, ob.redeemer, ob.currency, ob.amount) == (blue, red, green, 10)
    assert blue in mid.discredited()            # unsettled obligation

    _author(lace, blue, scheme, Pay(to=red, currency=green, amount=10))
    post = replay(lace)
    assert post.unsettled() == []
    assert blue not in post.discredited()
    assert post.balance(red, green) == 10
    assert net_worth(post, red) == worth_red
    assert net_worth(post, blue) == worth_blue
    check_conservation(post)


def test_redeem_request_with_mismatched_pair_is_diagnosed(scheme, agents):
    red, blue = agents[:2]
    lace = Blocklace(scheme)
    _open_mutual(lace, scheme, red, blue)
    _author(lace, blue, scheme, Issue(5))
    _author(lace, blue, scheme, Pay(to=red, currency=blue, amount=5))
    # pair the request with blue's payment instead of red's return payment
    wrong = lace.creator_tips(blue)[-1]
    _author(lace, red, scheme, RedeemRequest(
        against_currency=blue, amount=5, paired_payment=wrong))
    st = replay(lace)
    assert st.obligations == []
    assert any("paired payment" in r for _, r in st.diagnostics)


def test_doublespend_ruling_and_exclusion(scheme, agents):
    bank, mallory, petra, quinn = agents[:4]
    lace = Blocklace(scheme)
    for peer in (mallory, petra, quinn):
        _open_mutual(lace, scheme, bank, peer)
    _open_mutual(lace, scheme, mallory, petra)
    _open_mutual(lace, scheme, mallory, quinn)
    _author(lace, bank, scheme, Issue(100))
    _author(lace, bank, scheme, Pay(to=mallory, currency=bank, amount=50))
    # mallory forks: same seq, same predecessors, two conflicting payments
    seq = len(lace.by_creator[mallory])
    preds = sorted(set(lace.tips()) | {lace.creator_tips(mallory)[-1]})
    pay1 = forge_block(mallory, scheme, seq, preds,
                       Pay(to=petra, currency=bank, amount=50))
    pay2 = forge_block(mallory, scheme, seq, preds,
                       Pay(to=quinn, currency=bank, amount=50))
    lace.insert(pay1)
    lace.insert(pay2)
    pair = tuple(sorted((block_hash(pay1), block_hash(pay2))))
    ruling = resolve_doublespend(lace, bank, pair)
    assert isinstance(ruling, IssuerRuling)
    assert ruling.winner == min(pair)
    assert ruling.losers == (max(pair),)
    _author(lace, bank, scheme, ruling)
    st = replay(lace)
    # exactly one branch applied; ledger balances and conserves
    winner_to = lace.blocks[ruling.winner].payload.to
    assert st.balance(winner_to, bank) == 50
    assert st.balance(mallory, bank) == 0
    assert max(pair) in st.exclusions
    check_conservation(st)


def test_resolve_doublespend_rejects_non_equivocation(scheme, agents):
    bank, alice = agents[:2]
    lace = Blocklace(scheme)
    _open_mutual(lace, scheme, bank, alice)
    _author(lace, bank, scheme, Issue(10))
    a1 = _author(lace, bank, scheme, Pay(to=alice, currency=bank, amount=1))
    a2 = _author(lace, bank, scheme, Pay(to=alice, currency=bank, amount=2))
    with pytest.raises(NotAnEquivocationError):
        resolve_doublespend(lace, bank, (block_hash(a1), block_hash(a2)))


def test_ruling_from_non_issuer_is_ignored(scheme, agents):
    bank, mallory, petra, quinn = agents[:4]
    lace = Blocklace(scheme)
    for peer in (mallory, petra, quinn):
        _open_mutual(lace, scheme, bank, peer)
    _open_mutual(lace, scheme, mallory, petra)
    _author(lace, bank, scheme, Issue(10))
    _author(lace, bank, scheme, Pay(to=mallory, currency=bank, amount=10))
    seq = len(lace.by_creator[mallory])
    preds = sorted(set(lace.tips()) | {lace.creator_tips(mallory)[-1]})
    pay1 = forge_block(mallory, scheme, seq, preds, Pay(to=petra, currency=bank, amount=10))
    pay2 = forge_block(mallory, scheme, seq, preds, Pay(to=quinn, currency=bank, amount=10))
    lace.insert(pay1)
    lace.insert(pay2)
    pair = tuple(sorted((block_hash(pay1), block_hash(pay2))))
    bogus = IssuerRuling(winner=pair[0], losers=(pair[1],))
    _author(lace, petra, scheme, bogus)       # petra did not issue the coin
    st = replay(lace)
    assert any(r == "invalid ruling" for _, r in st.diagnostics)
    assert pair[1] not in st.exclusions
