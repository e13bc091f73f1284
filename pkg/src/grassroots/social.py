"""Social-graph protocols and feed assembly.

Three graph flavours share the blocklace substrate:

* Twitter-like: a directed follow graph; friendship is mutual following, and
  feeds are public with a sole author.
* WhatsApp-like: a hypergraph of groups; friendship is shared membership, and
  a group's feed is authored by its members.
* Currency: the mutual credit-line graph (derived in the currency module);
  exposed here only through the common ``friendship`` entry point.

Graph state is a pure fold of graph-op payloads over a deterministic
linearization, so two agents holding the same cone derive identical state.
Illegal operations (join without invite, non-founder invites, ...) are
recorded as diagnostics and skipped, never fatal: Byzantine garbage must not
stall replay.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .block import Block, BlockHash, block_hash
from .blocklace import Blocklace
from .identity import AgentId
from .ordering import order_blocks, order_cone
from .payload import FeedPost, Follow, GroupOp, NO_GROUP, Unfollow

TWITTER = "twitter-like"
WHATSAPP = "whatsapp-like"
CURRENCY = "currency"
PROTOCOLS = (TWITTER, WHATSAPP, CURRENCY)


@dataclass
class GroupState:
    group_id: BlockHash
    founder: AgentId
    invited: set[AgentId] = field(default_factory=set)
    members: set[AgentId] = field(default_factory=set)


@dataclass
class GraphState:
    """Follow edges and group states derived from a blocklace prefix."""

    follows: set[tuple[AgentId, AgentId]] = field(default_factory=set)
    groups: dict[BlockHash, GroupState] = field(default_factory=dict)
    diagnostics: list[tuple[BlockHash, str]] = field(default_factory=list)

    def follows_edge(self, p: AgentId, q: AgentId) -> bool:
        return (p, q) in self.follows

    def shared_group(self, p: AgentId, q: AgentId) -> bool:
        return any(p in g.members and q in g.members for g in self.groups.values())

    def groups_of(self, p: AgentId) -> list[BlockHash]:
        return sorted(gid for gid, g in self.groups.items() if p in g.members)


def apply_graph_op(state: GraphState, block: Block) -> GraphState:
    """Fold one Follow/Unfollow/GroupOp block into ``state`` (in place)."""
    h = block_hash(block)
    p = block.payload
    creator = block.creator
    if isinstance(p, Follow):
        state.follows.add((creator, p.target))
    elif isinstance(p, Unfollow):
        if (creator, p.target) in state.follows:
            state.follows.discard((creator, p.target))
        else:
            state.diagnostics.append((h, "unfollow without follow"))
    elif isinstance(p, GroupOp):
        _apply_group_op(state, h, creator, p)
    return state


def _apply_group_op(state: GraphState, h: BlockHash, creator: AgentId, op: GroupOp) -> None:
    if op.op == "create":
        if op.group != NO_GROUP:
            state.diagnostics.append((h, "create names a group"))
            return
        # founding block names itself; founder is sole member
        state.groups[h] = GroupState(h, creator, members={creator})
        return
    group = state.groups.get(op.group)
    if group is None:
        state.diagnostics.append((h, "unknown group"))
        return
    if op.op == "invite":
        if creator != group.founder:
            state.diagnostics.append((h, "invite by non-founder"))
        else:
            group.invited.add(op.subject)
    elif op.op == "remove":
        if creator != group.founder:
            state.diagnostics.append((h, "remove by non-founder"))
        else:
            group.members.discard(op.subject)
            group.invited.discard(op.subject)
    elif op.op == "join":
        if creator not in group.invited and creator != group.founder:
            state.diagnostics.append((h, "join without invite"))
        else:
            group.members.add(creator)
    elif op.op == "leave":
        if creator not in group.members:
            state.diagnostics.append((h, "leave by non-member"))
        else:
            group.members.discard(creator)


def derive_graph(local: Blocklace, anchor: BlockHash | None = None,
                 exclusions: frozenset[BlockHash] = frozenset()) -> GraphState:
    """Graph state folded over a cone (or the whole local blocklace)."""
    if anchor is None:
        sequence = order_blocks(local, exclusions)
    else:
        sequence = order_cone(local, anchor, exclusions).sequence
    state = GraphState()
    for h in sequence:
        apply_graph_op(state, local.blocks[h])
    return state


def friendship(state: GraphState, p: AgentId, q: AgentId, protocol: str) -> bool:
    """The friendship predicate of the active protocol.

    For the currency protocol the credit-line graph lives in the ledger;
    callers pass a GraphState produced by ``currency.credit_graph``.
    """
    if p == q:
        return False
    if protocol == TWITTER:
        return state.follows_edge(p, q) and state.follows_edge(q, p)
    if protocol == WHATSAPP:
        return state.shared_group(p, q)
    if protocol == CURRENCY:
        # credit_graph encodes open mutual lines as a pair of follow edges
        return state.follows_edge(p, q) and state.follows_edge(q, p)
    raise ValueError(f"unknown protocol {protocol!r}")


@dataclass(frozen=True)
class Feed:
    subject: bytes  # author id (Twitter-like) or group id
    posts: tuple[tuple[BlockHash, FeedPost], ...]

    def export(self, local: Blocklace) -> str:
        """Line-oriented text form: seq, hash prefix, author prefix, text."""
        lines = []
        for h, post in self.posts:
            b = local.blocks[h]
            lines.append(f"{b.seq}\t{h.hex()[:8]}\t{b.creator.hex()[:8]}\t{post.text}")
        return "\n".join(lines)


def assemble_author_feed(local: Blocklace, author: AgentId,
                         as_of: BlockHash | None = None) -> Feed:
    """All FeedPost blocks by ``author`` in cone(as_of) ∪ {as_of} (or in the
    whole local blocklace when ``as_of`` is None), in author-chain (seq, hash)
    order."""
    if as_of is None:
        members = set(local.blocks)
    else:
        members = local.cone(as_of) | {as_of}
    posts = []
    for h in local.by_creator.get(author, []):
        if h in members and isinstance(local.blocks[h].payload, FeedPost):
            posts.append((h, local.blocks[h].payload))
    posts.sort(key=lambda item: (local.blocks[item[0]].seq, item[0]))
    return Feed(author, tuple(posts))


def member_at_post(local: Blocklace, group_id: BlockHash, post_hash: BlockHash,
                   _memo: dict | None = None) -> bool:
    """Whether the post's creator was a group member at the post's own causal
    snapshot (graph state folded over the post's cone plus the post)."""
    state = derive_graph(local, anchor=post_hash)
    group = state.groups.get(group_id)
    return group is not None and local.blocks[post_hash].creator in group.members


def assemble_group_feed(local: Blocklace, group_id: BlockHash,
                        as_of: BlockHash | None = None) -> Feed:
    """FeedPost blocks by members-at-post-time of the group, in cone order."""
    if as_of is None:
        sequence = order_blocks(local)
    else:
        sequence = order_cone(local, as_of).sequence
    posts = []
    for h in sequence:
        if isinstance(local.blocks[h].payload, FeedPost) and member_at_post(local, group_id, h):
            posts.append((h, local.blocks[h].payload))
    return Feed(group_id, tuple(posts))


def assemble_feed(local: Blocklace, target: bytes, as_of: BlockHash | None = None) -> Feed:
    """Dispatch on target kind: 16-byte agent id → author feed, 32-byte block
    hash → group feed."""
    if len(target) == 16:
        return assemble_author_feed(local, target, as_of)
    return assemble_group_feed(local, target, as_of)
