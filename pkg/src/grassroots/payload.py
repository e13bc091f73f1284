"""Block payload variants and their canonical byte encodings.

Every payload encodes to a one-byte tag plus a body whose layout is fixed per
tag.  Decoding is strict: unknown tags, short bodies and trailing bytes all
raise ``DecodeError``, so a byte string has at most one payload reading.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import DecodeError
from .identity import AGENT_ID_LEN

HASH_LEN = 32
NO_SUBJECT = b"\x00" * AGENT_ID_LEN
NO_GROUP = b"\x00" * HASH_LEN

GROUP_OPS = ("create", "invite", "remove", "join", "leave")


@dataclass(frozen=True)
class Noop:
    pass


@dataclass(frozen=True)
class FeedPost:
    text: str


@dataclass(frozen=True)
class Follow:
    target: bytes


@dataclass(frozen=True)
class Unfollow:
    target: bytes


@dataclass(frozen=True)
class GroupOp:
    """Group lifecycle op.  ``group`` is the founding block's hash; it is
    all-zero for ``create`` (the founding block names itself)."""

    op: str
    group: bytes = NO_GROUP
    subject: bytes = NO_SUBJECT

    def __post_init__(self) -> None:
        if self.op not in GROUP_OPS:
            raise ValueError(f"unknown group op {self.op!r}")


# -- currency ops -----------------------------------------------------------

@dataclass(frozen=True)
class OpenCredit:
    peer: bytes


@dataclass(frozen=True)
class CloseCredit:
    peer: bytes


@dataclass(frozen=True)
class Issue:
    amount: int


@dataclass(frozen=True)
class Pay:
    to: bytes
    currency: bytes  # agent id of the issuer whose coins move
    amount: int


@dataclass(frozen=True)
class RedeemRequest:
    against_currency: bytes
    amount: int
    paired_payment: bytes  # hash of the Pay returning the redeemed coins


@dataclass(frozen=True)
class IssuerRuling:
    winner: bytes
    losers: tuple[bytes, ...]


Payload = (
    Noop | FeedPost | Follow | Unfollow | GroupOp
    | OpenCredit | CloseCredit | Issue | Pay | RedeemRequest | IssuerRuling
)

COIN_OPS = (OpenCredit, CloseCredit, Issue, Pay, RedeemRequest, IssuerRuling)

_TAG_NOOP = 0
_TAG_POST = 1
_TAG_FOLLOW = 2
_TAG_UNFOLLOW = 3
_TAG_GROUP = 4
_TAG_COIN = 5

_COIN_SUB = {OpenCredit: 0, CloseCredit: 1, Issue: 2, Pay: 3, RedeemRequest: 4, IssuerRuling: 5}


def _u64(n: int) -> bytes:
    if not 0 <= n < 2**64:
        raise ValueError("amount out of u64 range")
    return struct.pack(">Q", n)


def encode_payload(p: Payload) -> tuple[int, bytes]:
    """Return (tag, body) for the canonical encoding of ``p``."""
    if isinstance(p, Noop):
        return _TAG_NOOP, b""
    if isinstance(p, FeedPost):
        return _TAG_POST, p.text.encode("utf-8")
    if isinstance(p, Follow):
        return _TAG_FOLLOW, _agent(p.target)
    if isinstance(p, Unfollow):
        return _TAG_UNFOLLOW, _agent(p.target)
    if isinstance(p, GroupOp):
        body = bytes([GROUP_OPS.index(p.op)]) + _hash(p.group) + _agent(p.subject)
        return _TAG_GROUP, body
    if isinstance(p, OpenCredit):
        return _TAG_COIN, bytes([0]) + _agent(p.peer)
    if isinstance(p, CloseCredit):
        return _TAG_COIN, bytes([1]) + _agent(p.peer)
    if isinstance(p, Issue):
        _positive(p.amount)
        return _TAG_COIN, bytes([2]) + _u64(p.amount)
    if isinstance(p, Pay):
        _positive(p.amount)
        return _TAG_COIN, bytes([3]) + _agent(p.to) + _agent(p.currency) + _u64(p.amount)
    if isinstance(p, RedeemRequest):
        _positive(p.amount)
        body = bytes([4]) + _agent(p.against_currency) + _u64(p.amount) + _hash(p.paired_payment)
        return _TAG_COIN, body
    if isinstance(p, IssuerRuling):
        losers = sorted(p.losers)
        body = bytes([5]) + _hash(p.winner) + struct.pack(">I", len(losers))
        for h in losers:
            body += _hash(h)
        return _TAG_COIN, body
    raise TypeError(f"not a payload: {p!r}")


def decode_payload(tag: int, body: bytes) -> Payload:
    """Strict inverse of :func:`encode_payload`."""
    try:
        return _decode(tag, body)
    except (struct.error, IndexError, UnicodeDecodeError, ValueError) as exc:
        raise DecodeError(f"bad payload: {exc}") from exc


def _decode(tag: int, body: bytes) -> Payload:
    if tag == _TAG_NOOP:
        _expect(len(body) == 0, "noop body must be empty")
        return Noop()
    if tag == _TAG_POST:
        return FeedPost(body.decode("utf-8"))
    if tag == _TAG_FOLLOW:
        _expect(len(body) == AGENT_ID_LEN, "follow body length")
        return Follow(body)
    if tag == _TAG_UNFOLLOW:
        _expect(len(body) == AGENT_ID_LEN, "unfollow body length")
        return Unfollow(body)
    if tag == _TAG_GROUP:
        _expect(len(body) == 1 + HASH_LEN + AGENT_ID_LEN, "group body length")
        op_idx = body[0]
        _expect(op_idx < len(GROUP_OPS), "group op code")
        return GroupOp(GROUP_OPS[op_idx], body[1:1 + HASH_LEN], body[1 + HASH_LEN:])
    if tag == _TAG_COIN:
        return _decode_coin(body)
    raise DecodeError(f"unknown payload tag {tag}")


def _decode_coin(body: bytes) -> Payload:
    _expect(len(body) >= 1, "empty coin body")
    sub, rest = body[0], body[1:]
    if sub in (0, 1):
        _expect(len(rest) == AGENT_ID_LEN, "credit body length")
        return (OpenCredit if sub == 0 else CloseCredit)(rest)
    if sub == 2:
        _expect(len(rest) == 8, "issue body length")
        (amount,) = struct.unpack(">Q", rest)
        _positive(amount)
        return Issue(amount)
    if sub == 3:
        _expect(len(rest) == 2 * AGENT_ID_LEN + 8, "pay body length")
        to = rest[:AGENT_ID_LEN]
        currency = rest[AGENT_ID_LEN:2 * AGENT_ID_LEN]
        (amount,) = struct.unpack(">Q", rest[2 * AGENT_ID_LEN:])
        _positive(amount)
        return Pay(to, currency, amount)
    if sub == 4:
        _expect(len(rest) == AGENT_ID_LEN + 8 + HASH_LEN, "redeem body length")
        against = rest[:AGENT_ID_LEN]
        (amount,) = struct.unpack(">Q", rest[AGENT_ID_LEN:AGENT_ID_LEN + 8])
        _positive(amount)
        return RedeemRequest(against, amount, rest[AGENT_ID_LEN + 8:])
    if sub == 5:
        _expect(len(rest) >= HASH_LEN + 4, "ruling body length")
        winner = rest[:HASH_LEN]
        (count,) = struct.unpack(">I", rest[HASH_LEN:HASH_LEN + 4])
        losers_raw = rest[HASH_LEN + 4:]
        _expect(len(losers_raw) == count * HASH_LEN, "ruling losers length")
        losers = tuple(losers_raw[i * HASH_LEN:(i + 1) * HASH_LEN] for i in range(count))
        _expect(list(losers) == sorted(set(losers)), "ruling losers must be sorted and unique")
        return IssuerRuling(winner, losers)
    raise DecodeError(f"unknown coin op {sub}")


def _agent(b: bytes) -> bytes:
    if len(b) != AGENT_ID_LEN:
        raise ValueError("bad agent id length")
    return b


def _hash(b: bytes) -> bytes:
    if len(b) != HASH_LEN:
        raise ValueError("bad hash length")
    return b


def _positive(amount: int) -> None:
    if amount <= 0:
        raise ValueError("amount must be positive")


def _expect(cond: bool, msg: str) -> None:
    if not cond:
        raise DecodeError(msg)
