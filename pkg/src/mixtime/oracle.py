"""Centralized exact ground truth for the walk on a graph.

Distributions are propagated exactly: ``P_t`` is kept as integer numerators
over a common denominator (``L**t`` with ``L`` the lcm of the degrees, or
``(2L)**t`` for the lazy walk), which avoids per-entry gcd work while staying
exact. Spectra are floating point with residual-based error bounds and are
only used as diagnostics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Iterator

import numpy as np

from .graphcore import (
    BipartiteGraph,
    DistVector,
    Graph,
    MaxLengthExceeded,
    default_max_length,
    validate_for_walk,
)

__all__ = [
    "MaxLengthExceeded",
    "ConvergenceFailure",
    "TransitionOperator",
    "SpectralReport",
    "MonotonicityVerdict",
    "iter_numerators",
    "distribution_numerators",
    "exact_distribution",
    "l1_to_stationary",
    "distance_profile",
    "exact_mixing_time",
    "check_monotonicity",
    "spectral_report",
    "inv_2e_bounds",
    "mixing_time_inv_2e",
]


class ConvergenceFailure(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class TransitionOperator:
    """Column-stochastic matrix: ``matrix[i][j]`` is the probability of j -> i."""

    matrix: tuple[tuple[Fraction, ...], ...]
    lazy: bool = False

    @classmethod
    def from_graph(cls, g: Graph, lazy: bool = False) -> TransitionOperator:
        rows = [[Fraction(0)] * g.n for _ in range(g.n)]
        move = Fraction(1, 2) if lazy else Fraction(1)
        for j in range(g.n):
            for i in g.adjacency[j]:
                rows[i][j] = move / g.degrees[j]
            if lazy:
                rows[j][j] += Fraction(1, 2)
        return cls(tuple(tuple(r) for r in rows), lazy)

    @property
    def n(self) -> int:
        return len(self.matrix)

    def column_sums(self) -> list[Fraction]:
        return [sum((row[j] for row in self.matrix), Fraction(0)) for j in range(self.n)]

    def apply(self, vec) -> tuple[Fraction, ...]:
        return tuple(
            sum((a * x for a, x in zip(row, vec) if a), Fraction(0)) for row in self.matrix
        )


def iter_numerators(g: Graph, source: int, lazy: bool = False) -> Iterator[tuple[list[int], int]]:
    """Yield ``(numerators, denominator)`` for ``P_0, P_1, P_2, ...`` forever."""
    if not 0 <= source < g.n:
        raise ValueError(f"source {source} out of range")
    L = math.lcm(*g.degrees)
    shares = [L // d for d in g.degrees]
    scale = 2 * L if lazy else L
    nums = [0] * g.n
    nums[source] = 1
    den = 1
    while True:
        yield nums, den
        nxt = [0] * g.n
        for j, x in enumerate(nums):
            if x:
                flow = x * shares[j]
                for i in g.adjacency[j]:
                    nxt[i] += flow
                if lazy:
                    nxt[j] += x * L
        den *= scale
        common = math.gcd(den, *nxt)
        if common > 1:
            nxt = [x // common for x in nxt]
            den //= common
        nums = nxt


def distribution_numerators(
    g: Graph, source: int, t: int, lazy: bool = False
) -> tuple[list[int], int]:
    if t < 0:
        raise ValueError("t must be non-negative")
    for step, item in enumerate(iter_numerators(g, source, lazy)):
        if step == t:
            return item
    raise AssertionError("unreachable")


def exact_distribution(g: Graph, source: int, t: int, lazy: bool = False) -> DistVector:
    nums, den = distribution_numerators(g, source, t, lazy)
    return DistVector(tuple(Fraction(x, den) for x in nums))


def l1_to_stationary(g: Graph, nums: list[int], den: int) -> Fraction:
    """``||P - pi||_1`` for ``P = nums / den``, exactly."""
    two_m = 2 * g.m
    total = sum(abs(two_m * x - d * den) for x, d in zip(nums, g.degrees))
    return Fraction(total, two_m * den)


def distance_profile(g: Graph, source: int, horizon: int, lazy: bool = False) -> list[Fraction]:
    """``||P_t - pi||_1`` for ``t = 0..horizon``."""
    out = []
    for t, (nums, den) in enumerate(iter_numerators(g, source, lazy)):
        out.append(l1_to_stationary(g, nums, den))
        if t == horizon:
            return out
    raise AssertionError("unreachable")


def exact_mixing_time(
    g: Graph,
    source: int,
    epsilon: Fraction | int,
    lazy: bool = False,
    max_length: int | None = None,
) -> int:
    """Smallest ``t`` with ``||P_t - pi||_1 <= epsilon``."""
    epsilon = Fraction(epsilon)
    if not 0 < epsilon <= 2:
        raise ValueError("epsilon must lie in (0, 2]")
    validate_for_walk(g, lazy)
    cap = default_max_length(g.n) if max_length is None else max_length
    two_m = 2 * g.m
    for t, (nums, den) in enumerate(iter_numerators(g, source, lazy)):
        total = sum(abs(two_m * x - d * den) for x, d in zip(nums, g.degrees))
        if total * epsilon.denominator <= epsilon.numerator * two_m * den:
            return t
        if t >= cap:
            raise MaxLengthExceeded(f"distance still above {epsilon} at t = {cap}")
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class MonotonicityVerdict:
    ok: bool
    first_violation: int | None
    distances: tuple[Fraction, ...]


def check_monotonicity(g: Graph, source: int, horizon: int, lazy: bool = False) -> MonotonicityVerdict:
    """Check ``||P_{t+1} - pi||_1 <= ||P_t - pi||_1`` exactly for ``t < horizon``.

    ``first_violation`` is the first ``t + 1`` at which the distance grew.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    dist = distance_profile(g, source, horizon, lazy)
    for t in range(horizon):
        if dist[t + 1] > dist[t]:
            return MonotonicityVerdict(False, t + 1, tuple(dist))
    return MonotonicityVerdict(True, None, tuple(dist))


# ---------------------------------------------------------------------------
# 1/(2e) threshold
# ---------------------------------------------------------------------------


def inv_2e_bounds(digits: int = 60) -> tuple[Fraction, Fraction]:
    """Rationals ``lo < 1/(2e) < hi`` that differ by ``10**-digits``."""
    with localcontext() as ctx:
        ctx.prec = digits + 10
        value = 1 / (2 * Decimal(1).exp())
        lo = Fraction(value.quantize(Decimal(10) ** -digits, rounding="ROUND_FLOOR"))
    return lo, lo + Fraction(1, 10**digits)


def mixing_time_inv_2e(g: Graph, source: int, lazy: bool = False) -> int:
    """Exact mixing time at the irrational threshold ``1/(2e)``.

    The times at the two rational enclosures bracket the answer; they agree
    unless some distance lies within ``1e-60`` of ``1/(2e)``.
    """
    lo, hi = inv_2e_bounds()
    t_lo = exact_mixing_time(g, source, lo, lazy)
    t_hi = exact_mixing_time(g, source, hi, lazy)
    if t_lo != t_hi:
        raise ArithmeticError("a walk distance is too close to 1/(2e) to decide")
    return t_lo


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: tuple[float, ...]  # descending
    error_bound: float
    lambda2: float
    lambda_min: float
    abs_gap: float
    cheeger_lower: float
    cheeger_upper: float
    relaxation_time: float
    pi_min: Fraction
    mixing_upper_bound: float  # ceil(ln(2e / pi_min) / abs_gap)
    tau_quarter: int | None  # oracle mixing time at epsilon = 1/(2e)
    sandwich_ok: bool

    def to_json(self) -> dict:
        return {
            "lambda2": self.lambda2,
            "lambda_min": self.lambda_min,
            "abs_gap": self.abs_gap,
            "cheeger_lower": self.cheeger_lower,
            "cheeger_upper": self.cheeger_upper,
            "tau_quarter": self.tau_quarter,
            "sandwich_ok": self.sandwich_ok,
        }


def symmetrized_operator(g: Graph, lazy: bool = False) -> np.ndarray:
    """``D^{-1/2} A D^{-1/2}`` (lazy: averaged with the identity).

    Similar to the walk operator, so it has the same real spectrum.
    """
    inv_sqrt = 1.0 / np.sqrt(np.asarray(g.degrees, dtype=float))
    S = np.zeros((g.n, g.n))
    for u in range(g.n):
        for v in g.adjacency[u]:
            S[u, v] = inv_sqrt[u] * inv_sqrt[v]
    if lazy:
        S = 0.5 * (np.eye(g.n) + S)
    return S


def spectral_report(
    g: Graph, lazy: bool = False, source: int = 0, tol: float = 1e-9
) -> SpectralReport:
    """Eigenvalue diagnostics and the relaxation-time upper-bound check.

    For a symmetric matrix every eigenvalue estimate lies within the residual
    norm ``||S v - lam v||`` of a true eigenvalue, so the largest residual is
    reported as ``error_bound``. ``sandwich_ok`` checks that the exact mixing
    time at ``1/(2e)`` from ``source`` is at most
    ``ceil(ln(2e / pi_min) / abs_gap)``.
    """
    S = symmetrized_operator(g, lazy)
    vals, vecs = np.linalg.eigh(S)
    residual = float(np.max(np.linalg.norm(S @ vecs - vecs * vals, axis=0)))
    if not residual <= tol:
        raise ConvergenceFailure("eigen-decomposition residual above tolerance", residual)
    vals = vals[::-1]
    lambda2 = float(vals[1])
    lambda_min = float(vals[-1])
    abs_gap = 1.0 - max(abs(lambda2), abs(lambda_min))
    # snap round-off so a periodic chain reports a zero gap
    if abs(abs_gap) <= residual + 1e-12:
        abs_gap = 0.0
    pi_min = Fraction(min(g.degrees), 2 * g.m)
    if abs_gap > 0:
        bound = float(math.ceil(math.log(2 * math.e / float(pi_min)) / abs_gap))
    else:
        bound = math.inf
    try:
        tau = mixing_time_inv_2e(g, source, lazy)
    except BipartiteGraph:
        tau = None
    return SpectralReport(
        eigenvalues=tuple(float(x) for x in vals),
        error_bound=residual,
        lambda2=lambda2,
        lambda_min=lambda_min,
        abs_gap=abs_gap,
        cheeger_lower=(1.0 - lambda2) / 2.0,
        cheeger_upper=math.sqrt(2.0 * max(0.0, 1.0 - lambda2)),
        relaxation_time=1.0 / abs_gap if abs_gap > 0 else math.inf,
        pi_min=pi_min,
        mixing_upper_bound=bound,
        tau_quarter=tau,
        sandwich_ok=tau is not None and tau <= bound,
    )
