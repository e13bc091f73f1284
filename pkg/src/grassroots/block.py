"""Blocks: canonical encoding, hashing, signing and wire (de)serialization.

Canonical body layout, all integers big-endian:

    creator (16) | seq (u64) | pred-count (u32) | preds (32 each, strictly
    ascending) | payload-tag (u8) | payload-len (u32) | payload-body

The signature is computed over the canonical body.  The wire form appends
``sig-len (u32) | signature``, and the block hash is SHA-256 of the full wire
form, so a block's identity covers pointers, payload and signature alike.
Decoding enforces canonical form exactly: sorted unique predecessors, exact
lengths, no trailing bytes.  Hence any single-byte change to a wire block is
detectable.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from functools import lru_cache

from .errors import DecodeError
from .identity import AGENT_ID_LEN, AgentId, SignatureScheme
from .payload import HASH_LEN, Payload, decode_payload, encode_payload

BlockHash = bytes  # exactly HASH_LEN bytes


@dataclass(frozen=True)
class Block:
    creator: AgentId
    seq: int
    predecessors: tuple[BlockHash, ...]  # strictly ascending
    payload: Payload
    signature: bytes


def canonical_body(creator: AgentId, seq: int, predecessors: tuple[BlockHash, ...],
                   payload: Payload) -> bytes:
    if len(creator) != AGENT_ID_LEN:
        raise ValueError("bad creator id length")
    if seq < 0:
        raise ValueError("negative seq")
    if list(predecessors) != sorted(set(predecessors)):
        raise ValueError("predecessors must be strictly ascending and unique")
    tag, body = encode_payload(payload)
    out = bytearray()
    out += creator
    out += struct.pack(">Q", seq)
    out += struct.pack(">I", len(predecessors))
    for h in predecessors:
        if len(h) != HASH_LEN:
            raise ValueError("bad predecessor hash length")
        out += h
    out += bytes([tag])
    out += struct.pack(">I", len(body))
    out += body
    return bytes(out)


def make_block(creator: AgentId, seq: int, predecessors: list[BlockHash] | tuple[BlockHash, ...],
               payload: Payload, scheme: SignatureScheme) -> Block:
    """Sign and assemble a block.  Predecessors are canonicalized (sorted)."""
    preds = tuple(sorted(set(predecessors)))
    if len(preds) != len(set(predecessors)):
        raise ValueError("duplicate predecessors")
    body = canonical_body(creator, seq, preds, payload)
    return Block(creator, seq, preds, payload, scheme.sign(creator, body))


@lru_cache(maxsize=1 << 16)
def encode_block(block: Block) -> bytes:
    body = canonical_body(block.creator, block.seq, block.predecessors, block.payload)
    return body + struct.pack(">I", len(block.signature)) + block.signature


@lru_cache(maxsize=1 << 16)
def block_hash(block: Block) -> BlockHash:
    return hashlib.sha256(encode_block(block)).digest()


def decode_block(data: bytes) -> Block:
    """Strict inverse of :func:`encode_block`; raises DecodeError otherwise."""
    off = 0

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(data):
            raise DecodeError("truncated block")
        chunk = data[off:off + n]
        off += n
        return chunk

    creator = take(AGENT_ID_LEN)
    (seq,) = struct.unpack(">Q", take(8))
    (npreds,) = struct.unpack(">I", take(4))
    preds = tuple(take(HASH_LEN) for _ in range(npreds))
    if list(preds) != sorted(set(preds)):
        raise DecodeError("predecessors not canonical")
    tag = take(1)[0]
    (plen,) = struct.unpack(">I", take(4))
    payload = decode_payload(tag, take(plen))
    # re-encoding must reproduce the payload bytes exactly (canonical form)
    (slen,) = struct.unpack(">I", take(4))
    signature = take(slen)
    if off != len(data):
        raise DecodeError("trailing bytes")
    block = Block(creator, seq, preds, payload, signature)
    if encode_block(block) != data:
        raise DecodeError("non-canonical encoding")
    return block


def verify_signature(block: Block, scheme: SignatureScheme) -> bool:
    body = canonical_body(block.creator, block.seq, block.predecessors, block.payload)
    return scheme.verify(block.creator, body, block.signature)


def debug_str(block: Block) -> str:
    """Compact one-line form for traces: creator:seq:hash[preds] payload-tag."""
    h = block_hash(block).hex()[:8]
    preds = ",".join(p.hex()[:8] for p in block.predecessors)
    tag = type(block.payload).__name__
    return f"{block.creator.hex()[:8]}:{block.seq}:{h}[{preds}] {tag}"
