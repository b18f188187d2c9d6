"""Exit criteria, one test per criterion; each records a PASS/FAIL line."""
import math
from fractions import Fraction as F

import pytest

from mixtime.cli import ExperimentConfig, main, run_experiment
from mixtime.congest import TAG_BITS
from mixtime.graphcore import diameter
from mixtime.mixing import (
    WalkConfig,
    estimate_mixing_time,
    oracle_agreement,
    paper_token_count,
    run_walk_phase,
)
from mixtime.oracle import (
    check_monotonicity,
    distance_profile,
    distribution_numerators,
    exact_distribution,
    spectral_report,
)

from conftest import SUITE, SUITE_IDS, make

SEED = 1
# Round-complexity constant, measured once over the suite (max observed 1.875).
ROUND_CONSTANT = 2


def criterion1_tokens(g) -> int:
    return max(paper_token_count(g.n), 10**6 * 2 * g.m * g.n**3)


@pytest.fixture(scope="module")
def suite_runs():
    runs = {}
    for (family, lazy), name in zip(SUITE, SUITE_IDS):
        g = make(family)
        cfg = WalkConfig(K=criterion1_tokens(g), seed=SEED, lazy=lazy)
        runs[name] = (g, cfg, estimate_mixing_time(g, 0, cfg))
    return runs


@pytest.fixture(scope="module")
def paper_runs():
    runs = {}
    for (family, lazy), name in zip(SUITE, SUITE_IDS):
        g = make(family)
        cfg = WalkConfig.paper(g.n, seed=SEED, lazy=lazy)
        runs[name] = (g, cfg, estimate_mixing_time(g, 0, cfg))
    return runs


def test_c1_oracle_agreement(suite_runs, record):
    bad = []
    for name, (g, cfg, est) in suite_runs.items():
        agree = oracle_agreement(g, 0, est.estimate, cfg)
        if not agree.ok or agree.upper is None:
            bad.append(f"{name}: {est.estimate} not in [{agree.lower}, {agree.upper}]")
    detail = "; ".join(bad) or f"{len(suite_runs)} graphs within [tau(eps+delta), tau(eps-delta)]"
    assert record("C1 oracle agreement", not bad, detail)


def test_c2_exact_triangle(record):
    g = make("complete:3")
    est = estimate_mixing_time(g, 0, WalkConfig(K=300, epsilon=F(1, 9), seed=SEED))
    distances = distance_profile(g, 0, 4)[1:]
    ok = est.estimate == 4 and distances == [F(2, 3), F(1, 3), F(1, 6), F(1, 12)]
    assert record("C2 exact triangle", ok, f"estimate {est.estimate}, oracle distances {[str(d) for d in distances]}")


def test_c3_monotonicity(record):
    bad = [
        f"{name}: t={v.first_violation}"
        for (family, lazy), name in zip(SUITE, SUITE_IDS)
        if not (v := check_monotonicity(make(family), 0, 50, lazy)).ok
    ]
    assert record("C3 monotonicity (horizon 50, exact)", not bad, "; ".join(bad) or "all suite graphs")


def test_c4_congestion(suite_runs, paper_runs, record):
    bad = []
    for name, (g, cfg, est) in list(suite_runs.items()) + list(paper_runs.items()):
        if est.ledger.max_messages_per_edge("walk") > 1:
            bad.append(f"{name}: >1 walk message per edge-round")
    for name, (g, cfg, est) in paper_runs.items():
        limit = 9 * math.ceil(math.log2(g.n)) + 7
        widest = est.ledger.max_bit_size() - TAG_BITS
        if widest > limit:
            bad.append(f"{name}: payload {widest} > {limit} bits")
    assert record("C4 congestion", not bad, "; ".join(bad) or "<=1 msg/edge/round, full-scale-K payloads within 9*ceil(log2 n)+7")


def test_c5_round_complexity(suite_runs, record):
    worst, bad = 0.0, []
    for name, (g, cfg, est) in suite_runs.items():
        ell, D = est.estimate, diameter(g)
        budget = (ell + D) * (math.ceil(math.log2(ell)) + 2)
        worst = max(worst, est.total_rounds / budget)
        if est.total_rounds > ROUND_CONSTANT * budget:
            bad.append(f"{name}: {est.total_rounds} > {ROUND_CONSTANT}*{budget}")
    assert record("C5 round complexity", not bad, "; ".join(bad) or f"C={ROUND_CONSTANT}, worst ratio {worst:.3f}")


def test_c6_chernoff(record):
    g = make("petersen")
    K, ell = 10**6, 3
    p3 = exact_distribution(g, 0, ell)
    good = 0
    for seed in range(100):
        cfg = WalkConfig(K=K, seed=seed, averaging_threshold_factor=math.inf)
        zeta = run_walk_phase(g, 0, ell, cfg).zeta
        # squared comparison keeps it exact: |z/K - p| <= 5 sqrt(p(1-p)/K)
        if all((F(z, K) - p) ** 2 <= 25 * p * (1 - p) / K for z, p in zip(zeta, p3)):
            good += 1
    assert record("C6 Chernoff concentration", good >= 99, f"{good}/100 seeds within 5 sigma")


def test_c7_averaging_bias(suite_runs, record):
    bad, probes = [], 0
    for name, (g, cfg, est) in suite_runs.items():
        for p in est.probes:
            probes += 1
            nums, den = distribution_numerators(g, 0, p.length, cfg.lazy)
            gap = F(sum(abs(z * den - cfg.K * x) for z, x in zip(p.zeta, nums)), cfg.K * den)
            if gap > F(p.length * 2 * g.m, cfg.K):
                bad.append(f"{name} l={p.length}")
    assert record("C7 averaging bias", not bad, "; ".join(bad) or f"{probes} probes within l*2m/K")


def test_c8_token_conservation(suite_runs, record):
    bad = [
        f"{name} l={p.length}"
        for name, (g, cfg, est) in suite_runs.items()
        for p in est.probes
        if len(p.round_totals) != p.length or any(t != cfg.K for t in p.round_totals)
    ]
    assert record("C8 token conservation", not bad, "; ".join(bad) or "sum zeta = K after every round")


def test_c9_spectral(record):
    bad = []
    r = spectral_report(make("complete:4"))
    if abs(r.lambda2 + 1 / 3) > 1e-9:
        bad.append(f"K4 lambda2 {r.lambda2}")
    r = spectral_report(make("cycle:5"))
    if abs(r.lambda2 - math.cos(2 * math.pi / 5)) > 1e-9:
        bad.append(f"C5 lambda2 {r.lambda2}")
    r = spectral_report(make("petersen"))
    expected = [1.0] + [1 / 3] * 5 + [-2 / 3] * 4
    if max(abs(a - b) for a, b in zip(r.eigenvalues, expected)) > 1e-9:
        bad.append(f"Petersen spectrum {r.eigenvalues}")
    for (family, lazy), name in zip(SUITE, SUITE_IDS):
        rep = spectral_report(make(family), lazy=lazy)
        if not rep.sandwich_ok:
            bad.append(f"{name}: tau {rep.tau_quarter} > {rep.mixing_upper_bound}")
    assert record("C9 spectral diagnostics", not bad, "; ".join(bad) or "analytic spectra match, sandwich holds")


def test_c10_reproducibility(tmp_path, record):
    args = ["--family", "barbell:5", "--seed", "9", "--tokens", "987654321", "--oracle", "--spectral"]
    codes = [main(args + ["--out", str(tmp_path / d)]) for d in ("a", "b")]
    same = (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
    cfg = ExperimentConfig(family="barbell:5", seed=9, tokens=987654321, oracle=True, spectral=True)
    same_api = run_experiment(cfg).to_json() == run_experiment(cfg).to_json()
    ok = codes == [0, 0] and same and same_api
    assert record("C10 reproducibility", ok, "byte-identical report.json" if ok else f"codes {codes}")
