import io
import math
from fractions import Fraction as F

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixtime.congest import BandwidthExceeded, CongestLedger
from mixtime.graphcore import BipartiteGraph, MaxLengthExceeded
from mixtime.mixing import (
    WalkConfig,
    bias_bound,
    deviation_sum,
    estimate_mixing_time,
    forward_tokens,
    lazy_split,
    node_rng,
    oracle_agreement,
    paper_token_count,
    run_walk_phase,
    word_bits,
)
from mixtime.oracle import distribution_numerators, exact_mixing_time, l1_to_stationary

from conftest import SUITE, SUITE_IDS, make


def rng(seed=0):
    return np.random.default_rng(seed)


# --- forwarding -------------------------------------------------------------


def test_forward_exact_average():
    assert forward_tokens(1000, 4, 1000, rng()) == [250, 250, 250, 250]


def test_forward_remainder():
    out = forward_tokens(10, 3, 3, rng())
    assert sum(out) == 10 and sorted(out) == [3, 3, 4]


def test_forward_below_threshold():
    out = forward_tokens(2, 5, 10, rng())
    assert len(out) == 5 and sum(out) == 2 and all(0 <= c <= 2 for c in out)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**30), st.integers(1, 12), st.integers(0, 10**6), st.integers(0, 2**32))
def test_forward_conserves(held, degree, threshold, seed):
    if held < threshold and held > 10**9:
        held %= 10**9
    out = forward_tokens(held, degree, threshold, rng(seed))
    assert len(out) == degree and sum(out) == held and min(out) >= 0
    if held >= threshold:
        assert max(out) - min(out) <= 1


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**30), st.integers(1, 12), st.integers(0, 2**32))
def test_lazy_split_conserves(held, degree, seed):
    stay, out = lazy_split(held, degree, 0, rng(seed))
    assert stay == held - held // 2 and sum(out) == held // 2


def test_remainder_is_uniform():
    # each neighbour should receive the extra token 1/4 of the time for held % 4 == 1
    r = rng(3)
    hits = np.zeros(4)
    trials = 20000
    for _ in range(trials):
        hits += np.array(forward_tokens(9, 4, 0, r)) - 2
    chi2 = ((hits - trials / 4) ** 2 / (trials / 4)).sum()
    assert chi2 < 16.27  # 3 dof, p = 0.001


def test_per_token_lazy_stays_half_the_time():
    stay, out = lazy_split(100000, 3, math.inf, rng(1))
    assert abs(stay - 50000) < 5 * math.sqrt(25000)
    assert stay + sum(out) == 100000


def test_node_streams_are_independent():
    a = node_rng(1, 0, 0).integers(0, 2**63, size=4)
    b = node_rng(1, 0, 1).integers(0, 2**63, size=4)
    c = node_rng(1, 1, 0).integers(0, 2**63, size=4)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    assert np.array_equal(a, node_rng(1, 0, 0).integers(0, 2**63, size=4))


# --- walk phase -------------------------------------------------------------


@pytest.mark.parametrize("length, zeta", [(1, (0, 150, 150)), (2, (150, 75, 75))])
def test_triangle_walk(triangle, length, zeta):
    state = run_walk_phase(triangle, 0, length, WalkConfig(K=300))
    assert state.zeta == zeta


def test_single_token(triangle):
    g = make("petersen")
    for seed in range(5):
        state = run_walk_phase(g, 0, 1, WalkConfig(K=1, seed=seed))
        assert sum(state.zeta) == 1
        assert state.zeta.index(1) in g.adjacency[0]


def test_exact_rounds_and_one_message_per_edge():
    g = make("lollipop:4,4")
    ledger = CongestLedger()
    run_walk_phase(g, 0, 9, WalkConfig(K=10**12), ledger)
    assert ledger.total_rounds == 9
    assert ledger.max_messages_per_edge("walk") == 1


@pytest.mark.parametrize("family, lazy, degree", [("complete:4", False, 3), ("petersen", False, 3), ("cycle:6", True, 4), ("hypercube:3", True, 6)])
def test_exact_flow_regime(family, lazy, degree):
    g = make(family)
    length = 6
    K = degree**length * 10**6
    for seed in (0, 1, 2):
        state = run_walk_phase(g, 0, length, WalkConfig(K=K, seed=seed, lazy=lazy))
        nums, den = distribution_numerators(g, 0, length, lazy)
        assert [z * den for z in state.zeta] == [K * x for x in nums]


@pytest.mark.parametrize("family, lazy", SUITE, ids=SUITE_IDS)
def test_bias_bound(family, lazy):
    g = make(family)
    K = 10**9 + 7
    for length in (1, 2, 3, 5, 8, 13, 21):
        zeta = run_walk_phase(g, 0, length, WalkConfig(K=K, lazy=lazy, seed=length)).zeta
        nums, den = distribution_numerators(g, 0, length, lazy)
        gap = F(sum(abs(z * den - K * x) for z, x in zip(zeta, nums)), K * den)
        assert gap <= bias_bound(g, length, K)


def test_conservation_every_round():
    g = make("barbell:5")
    state = run_walk_phase(g, 3, 40, WalkConfig(K=123456789, seed=4))
    assert state.round_totals == (123456789,) * 40


def test_flows_match_counts(triangle):
    state = run_walk_phase(triangle, 0, 3, WalkConfig(K=301, seed=2), record_flows=True)
    last = state.flows[-1]
    received = [sum(c for (v, w), c in last.items() if w == u) for u in range(3)]
    assert tuple(received) == state.zeta


def test_walk_overflowing_budget():
    with pytest.raises(BandwidthExceeded):
        run_walk_phase(make("complete:3"), 0, 1, WalkConfig(K=2**40, payload_bits=20))


# --- deviation --------------------------------------------------------------


def test_deviation_zero_at_stationary():
    g = make("lollipop:4,4")
    K = 20 * 7
    rep = deviation_sum([K * d // 20 for d in g.degrees], g, K)
    assert rep.deviation == 0 and rep.passed


@pytest.mark.parametrize("zeta, expected", [((0, 150, 150), F(2, 3)), ((150, 75, 75), F(1, 3))])
def test_deviation_triangle(triangle, zeta, expected):
    rep = deviation_sum(zeta, triangle, 300, F(1, 9))
    assert rep.deviation == expected and not rep.passed
    assert rep.denominator == 6 * 300
    nums, den = distribution_numerators(triangle, 0, 1 if zeta[0] == 0 else 2)
    assert l1_to_stationary(triangle, nums, den) == expected


def test_deviation_requires_conservation(triangle):
    with pytest.raises(ValueError):
        deviation_sum((1, 1, 1), triangle, 4)


# --- search -----------------------------------------------------------------


def test_triangle_estimate(triangle):
    est = estimate_mixing_time(triangle, 0, WalkConfig(K=300, epsilon=F(1, 9), seed=7))
    assert est.estimate == 4
    assert est.probe_at(4).passed and not est.probe_at(3).passed
    assert [p.length for p in est.probes] == [1, 2, 4, 3]
    assert est.bracket == (2, 4)


def test_epsilon_two_returns_one():
    est = estimate_mixing_time(make("complete:8"), 0, WalkConfig(K=1000, epsilon=F(2)))
    assert est.estimate == 1 and len(est.probes) == 1


def test_cycle5_paper_k():
    g = make("cycle:5")
    est = estimate_mixing_time(g, 0, WalkConfig.paper(5, epsilon=F(1, 25)))
    assert est.estimate == exact_mixing_time(g, 0, F(1, 25)) == 17


def test_bipartite_rejected():
    with pytest.raises(BipartiteGraph):
        estimate_mixing_time(make("cycle:6"), 0, WalkConfig(K=100))


def test_cap_exceeded_keeps_partial_log():
    with pytest.raises(MaxLengthExceeded) as info:
        estimate_mixing_time(make("cycle:7"), 0, WalkConfig(K=10**9, max_length=12))
    est = info.value.estimate
    assert [p.length for p in est.probes] == [1, 2, 4, 8, 12]
    assert not any(p.passed for p in est.probes)


def test_clamped_cap_still_searches():
    g = make("cycle:5")
    # exact answer 17 lies between the last power of two (16) and the cap
    est = estimate_mixing_time(g, 0, WalkConfig(K=10**12, epsilon=F(1, 25), max_length=20))
    assert est.estimate == 17
    assert est.bracket == (16, 20)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(SUITE), st.integers(0, 2**32), st.integers(2, 40))
def test_search_postcondition(case, seed, eps_den):
    family, lazy = case
    g = make(family)
    cfg = WalkConfig(K=10**7, epsilon=F(1, eps_den), seed=seed, lazy=lazy)
    est = estimate_mixing_time(g, 0, cfg)
    hit = est.probe_at(est.estimate)
    assert hit.passed and hit.deviation <= cfg.epsilon
    if est.estimate > 1:
        below = est.probe_at(est.estimate - 1)
        assert not below.passed and below.deviation > cfg.epsilon
    assert oracle_agreement(g, 0, est.estimate, cfg).ok


def test_deterministic_given_seed():
    g = make("lollipop:4,4")
    cfg = WalkConfig(K=10**5 + 3, epsilon=F(1, 30), seed=11)
    a, b = estimate_mixing_time(g, 0, cfg), estimate_mixing_time(g, 0, cfg)
    assert a.probes == b.probes
    assert a.ledger.rounds == b.ledger.rounds


def test_probe_csv(triangle):
    est = estimate_mixing_time(triangle, 0, WalkConfig(K=300, epsilon=F(1, 9), seed=7))
    buf = io.StringIO()
    est.write_probes_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "probe_index,length,deviation_num,deviation_den,verdict,rounds"
    assert lines[1].startswith("0,1,2,3,fail,")
    assert len(lines) == 5


# --- K preset ---------------------------------------------------------------


@pytest.mark.parametrize("n", [2, 3, 10, 12, 90, 1000])
def test_paper_k_matches_high_precision(n):
    with mpmath.workdps(200):
        expected = int(mpmath.ceil(80 * mpmath.mpf(n) ** 8 * mpmath.log(n)))
    assert paper_token_count(n) == expected
    assert paper_token_count(n).bit_length() <= word_bits(n)


def test_paper_k_leaves_int64_range_at_112():
    assert paper_token_count(111) < 2**63 <= paper_token_count(112)


def test_paper_k_log_base():
    assert paper_token_count(16, log_base=2) == 80 * 16**8 * 4


def test_config_validation():
    with pytest.raises(ValueError):
        WalkConfig(K=0)
    with pytest.raises(ValueError):
        WalkConfig(K=5, epsilon=F(0))
    with pytest.raises(ValueError):
        WalkConfig(K=5, max_length=0)
    cfg = WalkConfig(K=5).resolve(make("cycle:5"))
    assert cfg.epsilon == F(1, 25)
    assert cfg.averaging_threshold_factor == 2
    assert cfg.max_length == 125 * 3


def test_paper_preset_config():
    assert WalkConfig.paper(16, log_base=2).K == 80 * 16**8 * 4
    assert WalkConfig.paper(3).K == paper_token_count(3)
