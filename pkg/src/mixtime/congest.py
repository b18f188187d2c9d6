"""Synchronous CONGEST round engine with bandwidth accounting.

Every round, each node hands the engine a list of messages addressed to
neighbours. The engine checks adjacency and the per-edge budget, appends a
row per directed edge to the :class:`CongestLedger`, and returns the inboxes
that become readable in the next round.

Tree primitives built on it:

* :func:`build_bfs_tree` -- flooding from the root plus an echo (ack
  convergecast) so the root knows when the tree is complete. The echo also
  aggregates subtree size, degree sum and height, which is how the root
  learns ``n`` and ``m``.
* :func:`broadcast` -- pipelined down-tree broadcast of integer values.
* :func:`upcast_sum` / :func:`upcast_integers` -- pipelined convergecast of
  non-negative integers, chunked low-order first with local carries.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .graphcore import Graph

__all__ = [
    "TAG_BITS",
    "Kind",
    "Message",
    "NonAdjacentSend",
    "BandwidthExceeded",
    "CongestLedger",
    "LedgerRound",
    "BfsTree",
    "run_round",
    "build_bfs_tree",
    "flood_echo",
    "broadcast",
    "upcast_integers",
    "upcast_sum",
    "split_chunks",
    "join_chunks",
    "pair",
    "unpair",
]

TAG_BITS = 8


class Kind(enum.IntEnum):
    EXPLORE = 1
    CHILD = 2
    ACK = 3
    BCAST_PART = 4
    BCAST_END = 5
    WALK = 6
    UPCAST = 7


class NonAdjacentSend(RuntimeError):
    pass


class BandwidthExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Message:
    src: int
    dst: int
    kind: Kind
    value: int = 0

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("payloads are non-negative integers")

    @property
    def payload_bits(self) -> int:
        return max(1, self.value.bit_length())

    @property
    def bit_size(self) -> int:
        return self.payload_bits + TAG_BITS


@dataclass(frozen=True)
class LedgerRound:
    round: int
    phase: str
    # (src, dst) -> (message count, max bit_size)
    edges: dict[tuple[int, int], tuple[int, int]]


@dataclass
class CongestLedger:
    """Append-only per-round, per-directed-edge traffic log."""

    rounds: list[LedgerRound] = field(default_factory=list)

    @property
    def total_rounds(self) -> int:
        return len(self.rounds)

    def append(self, phase: str, edges: dict[tuple[int, int], tuple[int, int]]) -> LedgerRound:
        row = LedgerRound(len(self.rounds) + 1, phase, edges)
        self.rounds.append(row)
        return row

    def select(self, phase: str | None = None) -> list[LedgerRound]:
        return [r for r in self.rounds if phase is None or r.phase == phase]

    def max_messages_per_edge(self, phase: str | None = None) -> int:
        return max((c for r in self.select(phase) for c, _ in r.edges.values()), default=0)

    def max_bit_size(self, phase: str | None = None) -> int:
        return max((b for r in self.select(phase) for _, b in r.edges.values()), default=0)

    def message_count(self, phase: str | None = None) -> int:
        return sum(c for r in self.select(phase) for c, _ in r.edges.values())

    def phase_rounds(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for r in self.rounds:
            counts[r.phase] = counts.get(r.phase, 0) + 1
        return counts

    def write_csv(self, dest: str | Path | io.TextIOBase) -> None:
        """Columns: round, edge_src, edge_dst, msg_count, max_bits."""
        if isinstance(dest, (str, Path)):
            with open(dest, "w", newline="") as fh:
                self.write_csv(fh)
            return
        writer = csv.writer(dest, lineterminator="\n")
        writer.writerow(["round", "edge_src", "edge_dst", "msg_count", "max_bits"])
        for r in self.rounds:
            for (s, d), (count, bits) in sorted(r.edges.items()):
                writer.writerow([r.round, s, d, count, bits])


def run_round(
    g: Graph,
    outboxes: Sequence[Iterable[Message]],
    ledger: CongestLedger,
    *,
    phase: str = "",
    max_messages: int = 1,
    payload_bits: int | None = None,
) -> list[list[Message]]:
    """Deliver one synchronous round of messages.

    ``outboxes[v]`` holds the messages node ``v`` sends this round. Nothing is
    delivered or logged unless the whole round is valid.
    """
    if len(outboxes) != g.n:
        raise ValueError(f"expected {g.n} outboxes, got {len(outboxes)}")
    traffic: dict[tuple[int, int], tuple[int, int]] = {}
    inboxes: list[list[Message]] = [[] for _ in range(g.n)]
    for v, box in enumerate(outboxes):
        for msg in box:
            if msg.src != v or not g.has_edge(msg.src, msg.dst):
                raise NonAdjacentSend(f"node {v} cannot send {msg}")
            if payload_bits is not None and msg.payload_bits > payload_bits:
                raise BandwidthExceeded(
                    f"{msg.kind.name} payload of {msg.payload_bits} bits on "
                    f"({msg.src}, {msg.dst}) exceeds the {payload_bits}-bit budget"
                )
            count, bits = traffic.get((msg.src, msg.dst), (0, 0))
            count += 1
            if count > max_messages:
                raise BandwidthExceeded(
                    f"{count} messages on ({msg.src}, {msg.dst}) in one round "
                    f"(budget {max_messages})"
                )
            traffic[msg.src, msg.dst] = (count, max(bits, msg.bit_size))
            inboxes[msg.dst].append(msg)
    ledger.append(phase, traffic)
    return inboxes


# ---------------------------------------------------------------------------
# payload helpers
# ---------------------------------------------------------------------------


def pair(a: int, b: int) -> int:
    """Cantor pairing of two non-negative integers."""
    s = a + b
    return s * (s + 1) // 2 + b


def unpair(z: int) -> tuple[int, int]:
    w = (math.isqrt(8 * z + 1) - 1) // 2
    b = z - w * (w + 1) // 2
    return w - b, b


def split_chunks(value: int, width: int | None, count: int | None = None) -> list[int]:
    """Split a non-negative integer into ``width``-bit chunks, low order first."""
    if width is None:
        chunks = [value]
    else:
        mask = (1 << width) - 1
        chunks = []
        while True:
            chunks.append(value & mask)
            value >>= width
            if not value:
                break
    if count is not None:
        if len(chunks) > count:
            raise ValueError("value does not fit in the agreed number of chunks")
        chunks += [0] * (count - len(chunks))
    return chunks


def join_chunks(chunks: Sequence[int], width: int | None) -> int:
    if width is None:
        (value,) = chunks
        return value
    return sum(c << (width * i) for i, c in enumerate(chunks))


# ---------------------------------------------------------------------------
# BFS tree
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BfsTree:
    root: int
    parent: tuple[int, ...]
    depth: tuple[int, ...]

    @property
    def height(self) -> int:
        return max(self.depth)

    @property
    def children(self) -> tuple[tuple[int, ...], ...]:
        kids: list[list[int]] = [[] for _ in self.parent]
        for v, p in enumerate(self.parent):
            if v != self.root:
                kids[p].append(v)
        return tuple(tuple(k) for k in kids)


@dataclass(frozen=True)
class EchoResult:
    tree: BfsTree
    rounds: int
    node_count: int
    degree_sum: int
    height: int


def flood_echo(
    g: Graph,
    root: int,
    ledger: CongestLedger | None = None,
    *,
    payload_bits: int | None = None,
) -> EchoResult:
    """Build a BFS tree by flooding and detect completion with an echo.

    A node discovered in round ``r`` (depth ``r``) sends, in round ``r + 1``,
    CHILD to its parent (smallest-label discoverer) and EXPLORE to every other
    neighbour; it therefore knows its children after round ``r + 2``. Acks
    carry ``pair(pair(subtree size, subtree degree sum), subtree height)``.
    The root is done once every child has acked, after ``2 * height + 2``
    rounds.
    """
    if not 0 <= root < g.n:
        raise ValueError(f"root {root} out of range")
    ledger = ledger if ledger is not None else CongestLedger()
    n = g.n
    parent: list[int | None] = [None] * n
    depth = [-1] * n
    parent[root], depth[root] = root, 0
    children: list[list[int]] = [[] for _ in range(n)]
    acks: list[dict[int, tuple[int, int, int]]] = [{} for _ in range(n)]
    acked = [False] * n
    rnd = 0
    inboxes: list[list[Message]] = [[] for _ in range(n)]
    while True:
        rnd += 1
        # local computation on messages received last round
        for v in range(n):
            for msg in inboxes[v]:
                if msg.kind == Kind.EXPLORE and depth[v] < 0:
                    if parent[v] is None or msg.src < parent[v]:
                        parent[v] = msg.src
                elif msg.kind == Kind.CHILD:
                    children[v].append(msg.src)
                elif msg.kind == Kind.ACK:
                    inner, h = unpair(msg.value)
                    size, dsum = unpair(inner)
                    acks[v][msg.src] = (size, dsum, h)
            if depth[v] < 0 and parent[v] is not None:
                depth[v] = rnd - 1
        if rnd > 2 and len(acks[root]) == len(children[root]):
            rnd -= 1
            break
        outboxes: list[list[Message]] = [[] for _ in range(n)]
        for v in range(n):
            if depth[v] == rnd - 1:
                for w in g.adjacency[v]:
                    kind = Kind.CHILD if (w == parent[v] and v != root) else Kind.EXPLORE
                    outboxes[v].append(Message(v, w, kind))
            elif (
                v != root
                and not acked[v]
                and depth[v] >= 0
                and rnd >= depth[v] + 3
                and len(acks[v]) == len(children[v])
            ):
                size = 1 + sum(a[0] for a in acks[v].values())
                dsum = g.degrees[v] + sum(a[1] for a in acks[v].values())
                h = 1 + max((a[2] for a in acks[v].values()), default=-1)
                outboxes[v].append(Message(v, parent[v], Kind.ACK, pair(pair(size, dsum), h)))
                acked[v] = True
        inboxes = run_round(g, outboxes, ledger, phase="bfs", payload_bits=payload_bits)
    tree = BfsTree(root, tuple(parent), tuple(depth))  # type: ignore[arg-type]
    agg = acks[root].values()
    return EchoResult(
        tree=tree,
        rounds=rnd,
        node_count=1 + sum(a[0] for a in agg),
        degree_sum=g.degrees[root] + sum(a[1] for a in agg),
        height=1 + max((a[2] for a in agg), default=-1),
    )


def build_bfs_tree(
    g: Graph, root: int, ledger: CongestLedger | None = None, *, payload_bits: int | None = None
) -> tuple[BfsTree, int]:
    res = flood_echo(g, root, ledger, payload_bits=payload_bits)
    return res.tree, res.rounds


# ---------------------------------------------------------------------------
# broadcast / convergecast
# ---------------------------------------------------------------------------


def broadcast(
    g: Graph,
    tree: BfsTree,
    values: Sequence[int],
    ledger: CongestLedger,
    *,
    payload_bits: int | None = None,
    phase: str = "broadcast",
) -> tuple[list[list[int]], int]:
    """Pipeline ``values`` from the root to every node along the tree.

    Each value travels as chunks of at most ``payload_bits`` bits; the message
    kind marks the final chunk. Returns the values decoded at every node and
    the number of rounds, ``height + (total chunks) - 1``.
    """
    stream: list[Message] = []
    for value in values:
        chunks = split_chunks(value, payload_bits)
        for i, c in enumerate(chunks):
            kind = Kind.BCAST_END if i == len(chunks) - 1 else Kind.BCAST_PART
            stream.append(Message(tree.root, tree.root, kind, c))
    kids = tree.children
    pending: list[list[Message]] = [[] for _ in range(g.n)]
    pending[tree.root] = list(stream)
    got: list[list[Message]] = [[] for _ in range(g.n)]
    got[tree.root] = list(stream)
    rounds = 0
    while any(pending[v] and kids[v] for v in range(g.n)):
        outboxes: list[list[Message]] = [[] for _ in range(g.n)]
        for v in range(g.n):
            if pending[v]:
                head = pending[v].pop(0)
                if kids[v]:
                    outboxes[v] = [Message(v, w, head.kind, head.value) for w in kids[v]]
        inboxes = run_round(g, outboxes, ledger, phase=phase, payload_bits=payload_bits)
        rounds += 1
        for v in range(g.n):
            for msg in inboxes[v]:
                pending[v].append(msg)
                got[v].append(msg)
    decoded = [_decode_stream(msgs, payload_bits) for msgs in got]
    return decoded, rounds


def _decode_stream(msgs: Sequence[Message], width: int | None) -> list[int]:
    values, part = [], []
    for msg in msgs:
        part.append(msg.value)
        if msg.kind == Kind.BCAST_END:
            values.append(join_chunks(part, width))
            part = []
    return values


def upcast_integers(
    g: Graph,
    tree: BfsTree,
    values: Sequence[int],
    ledger: CongestLedger,
    *,
    chunks: int = 1,
    payload_bits: int | None = None,
    phase: str = "upcast",
) -> tuple[int, int]:
    """Convergecast the sum of non-negative integers to the root.

    Every node forwards chunk ``j`` of its subtree sum once it holds chunk
    ``j`` from all children, keeping the carry locally. ``chunks`` is the
    pre-agreed number of chunks, enough for the largest possible total.
    Takes ``height + chunks - 1`` rounds.
    """
    if any(v < 0 for v in values):
        raise ValueError("upcast values must be non-negative")
    if payload_bits is None and chunks != 1:
        raise ValueError("multi-chunk upcast needs a chunk width")
    kids = tree.children
    own = [split_chunks(v, payload_bits, chunks) for v in values]
    received: list[list[dict[int, int]]] = [[{} for _ in range(chunks)] for _ in range(g.n)]
    sent = [0] * g.n
    carry = [0] * g.n
    mask = None if payload_bits is None else (1 << payload_bits) - 1
    out_chunks: list[list[int]] = [[] for _ in range(g.n)]

    def ready(v: int) -> bool:
        j = sent[v]
        return j < chunks and len(received[v][j]) == len(kids[v])

    def step(v: int) -> int:
        j = sent[v]
        total = own[v][j] + sum(received[v][j].values()) + carry[v]
        if mask is None:
            low, carry[v] = total, 0
        else:
            low, carry[v] = total & mask, total >> payload_bits
        sent[v] += 1
        return low

    rounds = 0
    while sent[tree.root] < chunks:
        # the root folds chunks in as soon as they are complete
        while ready(tree.root):
            out_chunks[tree.root].append(step(tree.root))
        if sent[tree.root] == chunks:
            break
        outboxes: list[list[Message]] = [[] for _ in range(g.n)]
        for v in range(g.n):
            if v != tree.root and ready(v):
                outboxes[v].append(Message(v, tree.parent[v], Kind.UPCAST, step(v)))
        inboxes = run_round(g, outboxes, ledger, phase=phase, payload_bits=payload_bits)
        rounds += 1
        for v in range(g.n):
            for msg in inboxes[v]:
                j = sent[msg.src] - 1
                received[v][j][msg.src] = msg.value
    if carry[tree.root]:
        raise ValueError("upcast total overflowed the agreed number of chunks")
    return join_chunks(out_chunks[tree.root], payload_bits), rounds


def upcast_sum(
    g: Graph,
    tree: BfsTree,
    values: Sequence[Fraction | int],
    ledger: CongestLedger | None = None,
    *,
    denominator: int | None = None,
    payload_bits: int | None = None,
) -> tuple[Fraction, int]:
    """Exact sum of non-negative rationals by convergecast.

    Nodes transmit integer numerators over ``denominator``, which must be a
    common denominator agreed on beforehand (default: the lcm of the value
    denominators).
    """
    ledger = ledger if ledger is not None else CongestLedger()
    fracs = [Fraction(v) for v in values]
    if denominator is None:
        denominator = math.lcm(*(f.denominator for f in fracs))
    nums = []
    for f in fracs:
        scaled = f * denominator
        if scaled.denominator != 1:
            raise ValueError(f"{f} is not a multiple of 1/{denominator}")
        nums.append(int(scaled))
    bound = sum(nums)
    chunks = 1
    if payload_bits is not None:
        chunks = max(1, -(-max(1, bound.bit_length()) // payload_bits))
    total, rounds = upcast_integers(
        g, tree, nums, ledger, chunks=chunks, payload_bits=payload_bits
    )
    return Fraction(total, denominator), rounds
