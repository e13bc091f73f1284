"""Agent identities and pluggable block signing.

An agent is identified by a fixed-length opaque byte string derived from its
key material.  The lexicographic order over these byte strings is the
deterministic tie-break order used throughout the package.

Signing is pluggable behind the ``SignatureScheme`` interface.  The default
``KeyedMacScheme`` is a deterministic HMAC-SHA256 construction intended for
tests and simulation only: the verifier holds every agent's secret in a
registry, so it provides no security against a real adversary.
"""

from __future__ import annotations

import hashlib
import hmac
from typing import Protocol

AGENT_ID_LEN = 16
SIGNATURE_LEN = 32

AgentId = bytes  # exactly AGENT_ID_LEN bytes


class SignatureScheme(Protocol):
    def sign(self, agent: AgentId, message: bytes) -> bytes: ...

    def verify(self, agent: AgentId, message: bytes, signature: bytes) -> bool: ...


def derive_secret(name: str) -> bytes:
    """Deterministic per-name key material for tests and scenarios."""
    return hashlib.sha256(b"grassroots-secret:" + name.encode("utf-8")).digest()


def derive_agent_id(secret: bytes) -> AgentId:
    return hashlib.sha256(b"grassroots-agent:" + secret).digest()[:AGENT_ID_LEN]


class KeyedMacScheme:
    """Deterministic keyed-MAC signature scheme (test-only, not production).

    ``signature = HMAC-SHA256(secret(agent), message)``.  Verification looks
    the agent's secret up in a shared registry, so anyone holding the registry
    can forge; that is acceptable here because the simulator is the only
    signer and honesty of the crypto layer is assumed by the protocols.
    """

    def __init__(self) -> None:
        self._secrets: dict[AgentId, bytes] = {}

    def register(self, name: str) -> AgentId:
        secret = derive_secret(name)
        agent = derive_agent_id(secret)
        self._secrets[agent] = secret
        return agent

    def register_secret(self, secret: bytes) -> AgentId:
        agent = derive_agent_id(secret)
        self._secrets[agent] = secret
        return agent

    def known_agents(self) -> list[AgentId]:
        return sorted(self._secrets)

    def sign(self, agent: AgentId, message: bytes) -> bytes:
        secret = self._secrets[agent]
        return hmac.new(secret, message, hashlib.sha256).digest()

    def verify(self, agent: AgentId, message: bytes, signature: bytes) -> bool:
        secret = self._secrets.get(agent)
        if secret is None:
            return False
        expected = hmac.new(secret, message, hashlib.sha256).digest()
        return hmac.compare_digest(expected, signature)
