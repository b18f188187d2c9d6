"""Distributed estimation against the exact oracle.

Run:  python demos/03_estimate_mixing_time.py
"""
from fractions import Fraction

from mixtime.graphcore import diameter, generate, parse_family
from mixtime.mixing import WalkConfig, estimate_mixing_time, oracle_agreement
from mixtime.oracle import exact_mixing_time

# Triangle with 300 tokens: the estimator reproduces the exact answer.
tri = generate(parse_family("complete:3"))
est = estimate_mixing_time(tri, 0, WalkConfig(K=300, epsilon=Fraction(1, 9), seed=7))
for p in est.probes:
    print(f"  probe l={p.length}: tokens {p.zeta}, deviation {p.deviation}, {'pass' if p.passed else 'fail'}")
print("estimate", est.estimate, "oracle", exact_mixing_time(tri, 0, Fraction(1, 9)))

# A larger sweep with plenty of tokens. Token counts are plain integers, so K
# can be far beyond 64 bits; only counts travel over the edges.
print(f"\n{'graph':14} {'lazy':5} {'K bits':>6} {'est':>4} {'exact':>5} {'rounds':>6} {'D':>2}")
for family, lazy in [("cycle:5", False), ("petersen", False), ("lollipop:6,6", False),
                     ("barbell:5", False), ("cycle:6", True), ("hypercube:4", True)]:
    g = generate(parse_family(family))
    cfg = WalkConfig(K=10**6 * 2 * g.m * g.n**3, seed=1, lazy=lazy)
    est = estimate_mixing_time(g, 0, cfg)
    exact = exact_mixing_time(g, 0, Fraction(1, g.n**2), lazy)
    assert oracle_agreement(g, 0, est.estimate, cfg).ok
    print(f"{family:14} {str(lazy):5} {cfg.K.bit_length():6} {est.estimate:4} {exact:5} {est.total_rounds:6} {diameter(g):2}")

# Where do the rounds go? (last run of the sweep)
print(f"\n{family} rounds per phase:", est.ledger.phase_rounds())
