"""Exact walk distributions and mixing times.

Run:  python demos/01_exact_walks.py
"""
from fractions import Fraction

from mixtime.graphcore import generate, parse_family, stationary_distribution
from mixtime.oracle import check_monotonicity, distance_profile, exact_distribution, exact_mixing_time

# The triangle: from node 0 the walk spreads to both neighbours and then
# halves its distance to the uniform distribution every step.
tri = generate(parse_family("complete:3"))
for t in range(5):
    print(t, [str(p) for p in exact_distribution(tri, 0, t)])
print("L1 distances:", [str(d) for d in distance_profile(tri, 0, 6)])

# Stationary probabilities are d(v)/2m; on a lollipop the path end is the
# rarest node and the clique junction the most frequent.
lol = generate(parse_family("lollipop:4,4"))
print("lollipop pi:", [str(p) for p in stationary_distribution(lol)])

# Distance to stationarity never increases (checked with exact rationals).
print("monotone over 50 steps:", check_monotonicity(lol, 0, 50).ok)

# Mixing time at the default accuracy 1/n^2, from the clique and from the
# far end of the path. Starting at the path end is much slower.
eps = Fraction(1, lol.n**2)
print("tau from clique node 0:", exact_mixing_time(lol, 0, eps))
print("tau from path end 7:  ", exact_mixing_time(lol, 7, eps))

# Even cycles are bipartite; the lazy walk fixes the periodicity.
c6 = generate(parse_family("cycle:6"))
print("lazy cycle(6), eps=1/36:", exact_mixing_time(c6, 0, Fraction(1, 36), lazy=True))
