"""Blocklace-based grassroots protocols: dissemination, social networking,
equivocation exclusion, deterministic ordering, and grassroots currencies,
with a deterministic simulator for unreliable, roaming networks."""

from .approval import FaultConfig, approves, supermajority_approved, supermajority_threshold
from .block import Block, block_hash, debug_str, decode_block, encode_block
from .blocklace import Blocklace, Verdict, create_block, forge_block
from .identity import AgentId, KeyedMacScheme
from .ordering import OrderedLog, order_blocks, order_cone

__all__ = [
    "AgentId",
    "Block",
    "Blocklace",
    "FaultConfig",
    "KeyedMacScheme",
    "OrderedLog",
    "Verdict",
    "approves",
    "block_hash",
    "create_block",
    "debug_str",
    "decode_block",
    "encode_block",
    "forge_block",
    "order_blocks",
    "order_cone",
    "supermajority_approved",
    "supermajority_threshold",
]

__version__ = "0.1.0"
