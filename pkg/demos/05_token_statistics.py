"""Per-token sampling versus averaging.

With averaging off every token picks its own neighbour, and the end-point
frequencies concentrate around the exact distribution. With averaging on,
the whole run is nearly deterministic and its error is bounded by l*2m/K.

Run:  python demos/05_token_statistics.py
"""
import math
from fractions import Fraction

import numpy as np

from mixtime.graphcore import generate, parse_family
from mixtime.mixing import WalkConfig, bias_bound, run_walk_phase
from mixtime.oracle import distribution_numerators, exact_distribution

g = generate(parse_family("petersen"))
K, ell = 10**6, 3
p3 = [float(p) for p in exact_distribution(g, 0, ell)]

z_scores = []
for seed in range(30):
    zeta = run_walk_phase(g, 0, ell, WalkConfig(K=K, seed=seed, averaging_threshold_factor=math.inf)).zeta
    z_scores.append([(z / K - p) / math.sqrt(p * (1 - p) / K) if 0 < p < 1 else 0.0 for z, p in zip(zeta, p3)])
z = np.array(z_scores)
print("per-token sampling, Petersen, l=3: max |z| over 30 seeds =", np.abs(z).max().round(2))
print("mean z per node:", z.mean(axis=0).round(2))

# Averaging: error against the exact distribution, relative to the bound.
g = generate(parse_family("lollipop:6,6"))
K = 10**9 + 7
print("\nlollipop(6,6), averaging, K=10^9+7")
for ell in (1, 4, 16, 64):
    zeta = run_walk_phase(g, 0, ell, WalkConfig(K=K, seed=ell)).zeta
    nums, den = distribution_numerators(g, 0, ell)
    gap = Fraction(sum(abs(zz * den - K * x) for zz, x in zip(zeta, nums)), K * den)
    print(f"  l={ell:3}: L1 error {float(gap):.2e}, bound {float(bias_bound(g, ell, K)):.2e}")
