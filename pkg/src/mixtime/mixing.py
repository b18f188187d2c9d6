"""Distributed estimation of the source mixing time by token-count walks.

The source injects ``K`` walk tokens. In every round each node forwards the
*number* of tokens going to each neighbour (one count message per directed
edge), so ``K`` can be astronomically large without congesting any edge.
After ``l`` rounds every node compares its share of tokens with its
stationary probability ``d(w) / 2m`` and the absolute differences are
summed at the source over a BFS tree. Lengths ``1, 2, 4, ...`` are probed
until the summed deviation drops to ``epsilon``; a binary search over the
last doubling interval then pins down the smallest passing length.

Token counts are Python integers throughout, so the full-scale preset
``K = ceil(80 n^8 ln n)`` works for any ``n``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from decimal import Decimal, localcontext
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .congest import (
    CongestLedger,
    Kind,
    Message,
    broadcast,
    flood_echo,
    run_round,
    upcast_integers,
)
from .graphcore import Graph, MaxLengthExceeded, default_max_length, validate_for_walk

__all__ = [
    "WalkConfig",
    "TokenState",
    "DeviationReport",
    "Probe",
    "MixingEstimate",
    "MaxLengthExceeded",
    "ConservationError",
    "paper_token_count",
    "word_bits",
    "default_max_length",
    "node_rng",
    "forward_tokens",
    "lazy_split",
    "run_walk_phase",
    "deviation_sum",
    "estimate_mixing_time",
    "bias_bound",
    "Agreement",
    "oracle_agreement",
]

# per-token sampling draws one integer per token below this; multinomial above
_PER_TOKEN_LIMIT = 1 << 22


class ConservationError(AssertionError):
    pass


def paper_token_count(n: int, log_base: float | str = "e") -> int:
    """``ceil(80 * n**8 * log(n))``, natural log by default.

    Evaluated with 80-digit decimals, so the ceiling is exact for any
    realistic ``n``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    with localcontext() as ctx:
        ctx.prec = 80 + 10 * len(str(n))
        log_n = Decimal(n).ln()
        if log_base != "e":
            log_n /= Decimal(log_base).ln()
        value = Decimal(80) * Decimal(n) ** 8 * log_n
        return int(value.to_integral_value(rounding="ROUND_CEILING"))


def word_bits(n: int) -> int:
    """Payload width that fits any count up to the ``80 n^8 ln n`` preset for ``n`` nodes."""
    return 9 * math.ceil(math.log2(n)) + 7


@dataclass(frozen=True)
class WalkConfig:
    """Protocol parameters.

    ``None`` fields are filled in per graph by :meth:`resolve`: ``epsilon``
    becomes ``1/n**2``, the averaging threshold factor ``ceil(ln n)``, the
    length cap ``n**3 * ceil(log2 n)`` and the payload budget
    ``max(9*ceil(log2 n) + 7, K.bit_length())``. Set
    ``averaging_threshold_factor=math.inf`` to sample every token individually.
    """

    K: int
    epsilon: Fraction | None = None
    seed: int = 0
    lazy: bool = False
    averaging_threshold_factor: float | None = None
    max_length: int | None = None
    payload_bits: int | None = None

    def __post_init__(self):
        if not isinstance(self.K, int) or self.K < 1:
            raise ValueError("K must be a positive integer")
        if self.epsilon is not None:
            object.__setattr__(self, "epsilon", Fraction(self.epsilon))
            if not 0 < self.epsilon <= 2:
                raise ValueError("epsilon must lie in (0, 2]")
        if self.max_length is not None and self.max_length < 1:
            raise ValueError("max_length must be at least 1")
        if self.averaging_threshold_factor is not None and self.averaging_threshold_factor < 0:
            raise ValueError("averaging threshold factor must be non-negative")

    @classmethod
    def paper(cls, n: int, log_base: float | str = "e", **kwargs) -> WalkConfig:
        """Config with the full-scale token count ``ceil(80 n^8 log n)``."""
        return cls(K=paper_token_count(n, log_base), **kwargs)

    def resolve(self, g: Graph) -> WalkConfig:
        n = g.n
        return replace(
            self,
            epsilon=self.epsilon if self.epsilon is not None else Fraction(1, n * n),
            averaging_threshold_factor=(
                self.averaging_threshold_factor
                if self.averaging_threshold_factor is not None
                else math.ceil(math.log(n))
            ),
            max_length=self.max_length if self.max_length is not None else default_max_length(n),
            payload_bits=(
                self.payload_bits
                if self.payload_bits is not None
                else max(word_bits(n), self.K.bit_length())
            ),
        )


@dataclass
class TokenState:
    zeta: tuple[int, ...]
    round_totals: tuple[int, ...]
    # one dict per round: (v, w) -> tokens sent from v to w
    flows: list[dict[tuple[int, int], int]] = field(default_factory=list, repr=False)


@dataclass(frozen=True)
class DeviationReport:
    numerators: tuple[int, ...]
    total: int
    denominator: int
    epsilon: Fraction
    passed: bool

    @property
    def deviation(self) -> Fraction:
        return Fraction(self.total, self.denominator)


@dataclass(frozen=True)
class Probe:
    index: int
    length: int
    deviation: Fraction
    passed: bool
    rounds: int
    zeta: tuple[int, ...] = field(repr=False)
    round_totals: tuple[int, ...] = field(repr=False)


@dataclass
class MixingEstimate:
    estimate: int | None
    probes: list[Probe]
    total_rounds: int
    bracket: tuple[int, int] | None
    ledger: CongestLedger = field(repr=False)
    config: WalkConfig
    setup_rounds: int = 0
    tree_height: int = 0
    upcast_chunks: int = 1

    def probe_at(self, length: int) -> Probe | None:
        for p in self.probes:
            if p.length == length:
                return p
        return None

    def write_probes_csv(self, dest: str | Path | io.TextIOBase) -> None:
        """Columns: probe_index, length, deviation_num, deviation_den, verdict, rounds."""
        if isinstance(dest, (str, Path)):
            with open(dest, "w", newline="") as fh:
                self.write_probes_csv(fh)
            return
        writer = csv.writer(dest, lineterminator="\n")
        writer.writerow(
            ["probe_index", "length", "deviation_num", "deviation_den", "verdict", "rounds"]
        )
        for p in self.probes:
            writer.writerow(
                [
                    p.index,
                    p.length,
                    p.deviation.numerator,
                    p.deviation.denominator,
                    "pass" if p.passed else "fail",
                    p.rounds,
                ]
            )


# ---------------------------------------------------------------------------
# node-local token forwarding
# ---------------------------------------------------------------------------


def node_rng(seed: int, probe_index: int, node: int) -> np.random.Generator:
    """Independent stream per (seed, probe, node); order of node execution is irrelevant."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(probe_index, node)))


def _sample_uniform(count: int, k: int, rng: np.random.Generator) -> list[int]:
    """Throw ``count`` tokens independently and uniformly into ``k`` bins."""
    if count == 0:
        return [0] * k
    if count <= _PER_TOKEN_LIMIT:
        picks = rng.integers(0, k, size=count)
        return [int(c) for c in np.bincount(picks, minlength=k)]
    if count >= 1 << 62:
        raise OverflowError("too many tokens to sample individually; enable averaging")
    return [int(c) for c in rng.multinomial(count, [1.0 / k] * k)]


def _average(count: int, degree: int, rng: np.random.Generator) -> list[int]:
    base, rem = divmod(count, degree)
    out = [base] * degree
    if rem:
        for i in rng.choice(degree, size=rem, replace=False):
            out[int(i)] += 1
    return out


def forward_tokens(
    held: int, degree: int, threshold: float, rng: np.random.Generator
) -> list[int]:
    """Split ``held`` tokens over ``degree`` neighbours (adjacency order).

    At or above ``threshold`` each neighbour gets ``held // degree`` and the
    remainder goes one token each to a uniformly random subset of neighbours.
    Below it every token picks a uniform neighbour on its own.
    """
    if held < 0:
        raise ValueError("held must be non-negative")
    if held >= threshold:
        return _average(held, degree, rng)
    return _sample_uniform(held, degree, rng)


def lazy_split(
    held: int, degree: int, threshold: float, rng: np.random.Generator
) -> tuple[int, list[int]]:
    """Lazy step: returns (tokens staying, tokens per neighbour).

    Averaging keeps ``ceil(held/2)`` and spreads the rest; per-token mode
    stays with probability 1/2, else moves to a uniform neighbour.
    """
    if held < 0:
        raise ValueError("held must be non-negative")
    if held >= threshold:
        moving = held // 2
        return held - moving, _average(moving, degree, rng)
    bins = _sample_uniform(held, 2 * degree, rng)
    return sum(bins[:degree]), bins[degree:]


# ---------------------------------------------------------------------------
# walk phase
# ---------------------------------------------------------------------------


def run_walk_phase(
    g: Graph,
    source: int,
    length: int,
    cfg: WalkConfig,
    ledger: CongestLedger | None = None,
    *,
    probe_index: int = 0,
    record_flows: bool = False,
) -> TokenState:
    """Move ``cfg.K`` tokens from ``source`` for exactly ``length`` rounds."""
    if length < 1:
        raise ValueError("walk length must be at least 1")
    cfg = cfg.resolve(g)
    ledger = ledger if ledger is not None else CongestLedger()
    K = cfg.K
    rngs = [node_rng(cfg.seed, probe_index, v) for v in range(g.n)]
    held = [0] * g.n
    held[source] = K
    totals: list[int] = []
    flows: list[dict[tuple[int, int], int]] = []
    for _ in range(length):
        nxt = [0] * g.n
        outboxes: list[list[Message]] = [[] for _ in range(g.n)]
        sent: dict[tuple[int, int], int] = {}
        for v in range(g.n):
            if not held[v]:
                continue
            d = g.degrees[v]
            threshold = d * cfg.averaging_threshold_factor
            if cfg.lazy:
                stay, counts = lazy_split(held[v], d, threshold, rngs[v])
                nxt[v] += stay
            else:
                counts = forward_tokens(held[v], d, threshold, rngs[v])
            for w, c in zip(g.adjacency[v], counts):
                if c:
                    outboxes[v].append(Message(v, w, Kind.WALK, c))
                    sent[v, w] = c
        inboxes = run_round(g, outboxes, ledger, phase="walk", payload_bits=cfg.payload_bits)
        for w in range(g.n):
            nxt[w] += sum(msg.value for msg in inboxes[w])
        held = nxt
        total = sum(held)
        if total != K:
            raise ConservationError(f"token count {total} != K = {K}")
        totals.append(total)
        if record_flows:
            flows.append(sent)
    return TokenState(zeta=tuple(held), round_totals=tuple(totals), flows=flows)


def deviation_sum(
    zeta: Sequence[int] | TokenState, g: Graph, K: int, epsilon: Fraction | None = None
) -> DeviationReport:
    """Sum of |zeta_w/K - d(w)/2m| as integer numerators over 2mK."""
    if isinstance(zeta, TokenState):
        zeta = zeta.zeta
    if sum(zeta) != K:
        raise ValueError("token counts must sum to K")
    two_m = 2 * g.m
    nums = tuple(abs(two_m * z - d * K) for z, d in zip(zeta, g.degrees))
    total = sum(nums)
    den = two_m * K
    eps = Fraction(epsilon) if epsilon is not None else Fraction(1, g.n * g.n)
    return DeviationReport(nums, total, den, eps, total * eps.denominator <= den * eps.numerator)


# ---------------------------------------------------------------------------
# search driver
# ---------------------------------------------------------------------------


def estimate_mixing_time(g: Graph, source: int, cfg: WalkConfig) -> MixingEstimate:
    """Run the full protocol from ``source`` and return the estimated length.

    The returned estimate has a passing probe at ``estimate`` and, unless it
    is 1, a failing probe at ``estimate - 1``. Each probe reruns the walk from
    scratch with its own random substream.
    """
    if not 0 <= source < g.n:
        raise ValueError(f"source {source} out of range")
    validate_for_walk(g, cfg.lazy)
    cfg = cfg.resolve(g)
    B = cfg.payload_bits
    ledger = CongestLedger()

    echo = flood_echo(g, source, ledger, payload_bits=B)
    tree = echo.tree
    n, m, height = echo.node_count, echo.degree_sum // 2, echo.height
    _, bcast_rounds = broadcast(g, tree, [n, m, height, cfg.K], ledger, payload_bits=B)
    # deviation numerators are at most 2mK each and sum to at most 4mK
    chunks = max(1, -(-(4 * m * cfg.K).bit_length() // B))

    probes: list[Probe] = []
    result = MixingEstimate(
        estimate=None,
        probes=probes,
        total_rounds=0,
        bracket=None,
        ledger=ledger,
        config=cfg,
        setup_rounds=echo.rounds + bcast_rounds,
        tree_height=height,
        upcast_chunks=chunks,
    )

    def probe(length: int) -> bool:
        start = ledger.total_rounds
        broadcast(g, tree, [length], ledger, payload_bits=B, phase="control")
        state = run_walk_phase(g, source, length, cfg, ledger, probe_index=len(probes))
        report = deviation_sum(state, g, cfg.K, cfg.epsilon)
        total, _ = upcast_integers(
            g, tree, list(report.numerators), ledger, chunks=chunks, payload_bits=B
        )
        den = 2 * m * cfg.K
        passed = total * cfg.epsilon.denominator <= den * cfg.epsilon.numerator
        probes.append(
            Probe(
                index=len(probes),
                length=length,
                deviation=Fraction(total, den),
                passed=passed,
                rounds=ledger.total_rounds - start,
                zeta=state.zeta,
                round_totals=state.round_totals,
            )
        )
        result.total_rounds = ledger.total_rounds
        return passed

    cap = cfg.max_length
    prev, length = 0, 1
    while not probe(length):
        if length >= cap:
            raise MaxLengthExceeded(f"no length up to {cap} reached epsilon", result)
        prev, length = length, min(2 * length, cap)
    lo, hi = prev, length
    result.bracket = (lo, hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if probe(mid):
            hi = mid
        else:
            lo = mid
    result.estimate = hi
    result.total_rounds = ledger.total_rounds
    return result


# ---------------------------------------------------------------------------
# verification against the exact oracle
# ---------------------------------------------------------------------------


def bias_bound(g: Graph, length: int, K: int) -> Fraction:
    """Worst-case L1 gap between token frequencies and ``P_length``.

    Each averaging node misroutes at most ``d(v)`` tokens per round relative
    to exact splitting, and the walk operator never expands L1 distance.
    """
    return Fraction(length * 2 * g.m, K)


@dataclass(frozen=True)
class Agreement:
    estimate: int
    delta: Fraction
    lower: int
    upper: int | None  # None: epsilon - delta <= 0, no finite upper end
    ok: bool


def oracle_agreement(g: Graph, source: int, estimate: int, cfg: WalkConfig) -> Agreement:
    """Check ``tau(eps + delta) <= estimate <= tau(eps - delta)`` with ``delta = 2 * bias_bound``."""
    from . import oracle

    cfg = cfg.resolve(g)
    eps = cfg.epsilon
    delta = 2 * bias_bound(g, estimate, cfg.K)
    lower = oracle.exact_mixing_time(g, source, min(eps + delta, Fraction(2)), cfg.lazy, cfg.max_length)
    upper = None
    if eps - delta > 0:
        try:
            upper = oracle.exact_mixing_time(g, source, eps - delta, cfg.lazy, cfg.max_length)
        except MaxLengthExceeded:
            upper = None
    ok = lower <= estimate and (upper is None or estimate <= upper)
    return Agreement(estimate, delta, lower, upper, ok)
