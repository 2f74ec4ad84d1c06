"""Spatial accuracy of the Laplace solve and gradient recovery.

We freeze a stream-function wave at t = 0 and measure the largest error in
the vertical surface velocity w_eta. Halving the element size should cut the
error by about 2^p. Raising p on a fixed mesh should make it fall
exponentially.
"""

from wavesem.analysis import convergence_rate
from wavesem.studies import h_study, manufactured_study, observed_order, p_study

print("h-refinement, kh = 1, half the limiting steepness")
for p in (1, 2, 3, 4):
    rec = h_study(1.0, 0.5, p)
    rates = " ".join(f"{r:5.2f}" for r in convergence_rate(rec))
    print(f"  p={p}: errors " + " ".join(f"{e:.2e}" for e in rec.errors)
          + f" | pairwise orders {rates} | fitted {observed_order(rec.parameter, rec.errors):.2f}")

print("\np-refinement on h_max = 0.125, kh = 1, 10% of the limiting steepness")
rec = p_study(1.0, 0.1, nx=8)
for p, e in zip(rec.parameter, rec.errors):
    print(f"  p={int(p)}: {e:.3e}")

print("\nmanufactured solution phi = cos(kx) cosh(k(z+h))/cosh(kh)")
for p in (1, 2, 3):
    phi, w = manufactured_study(p)
    print(f"  p={p}: phi order {observed_order(phi.parameter, phi.errors):.2f} (expect {p + 1}), "
          f"w_eta order {observed_order(w.parameter, w.errors):.2f} (expect {p})")
