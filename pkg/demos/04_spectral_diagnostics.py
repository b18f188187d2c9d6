"""Spectral gap, Cheeger bounds and the relaxation-time upper bound.

Run:  python demos/04_spectral_diagnostics.py
"""
import math

from mixtime.graphcore import generate, parse_family
from mixtime.oracle import spectral_report

print(f"{'graph':14} {'lambda2':>9} {'lambda_min':>10} {'abs gap':>8} {'Phi in':>17} {'tau(1/2e)':>9} {'bound':>6}")
for family, lazy in [("complete:4", False), ("cycle:5", False), ("petersen", False),
                     ("lollipop:6,6", False), ("barbell:5", False), ("cycle:6", True)]:
    r = spectral_report(generate(parse_family(family)), lazy=lazy)
    phi = f"[{r.cheeger_lower:.3f}, {r.cheeger_upper:.3f}]"
    print(f"{family:14} {r.lambda2:9.5f} {r.lambda_min:10.5f} {r.abs_gap:8.5f} {phi:>17} "
          f"{r.tau_quarter:9} {r.mixing_upper_bound:6.0f}")

# cycle(5): the walk eigenvalues are cos(2 pi k / 5)
r = spectral_report(generate(parse_family("cycle:5")))
print("\ncycle(5) lambda2 - cos(2pi/5) =", r.lambda2 - math.cos(2 * math.pi / 5))

# K4 has lambda2 = -1/3, so its plain gap 1 - lambda2 = 4/3 overstates the
# speed; the absolute gap accounts for the negative end of the spectrum.
r = spectral_report(generate(parse_family("complete:4")))
print("K4: 1 - lambda2 =", 1 - r.lambda2, " absolute gap =", r.abs_gap)
