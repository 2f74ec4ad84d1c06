"""Thread scaling of the three timed routines.

Each thread count runs in a fresh process because numba fixes its pool size
at start-up. On a host with fewer cores than requested threads the numbers
measure oversubscription rather than parallel speedup.
"""

import os

from wavesem.analysis import ScalingRecord, scaling_metrics
from wavesem.cli import scaling_sweep
from wavesem.dynamics import ROUTINES

threads = [1, 2, 4]
print(f"usable cores: {len(os.sched_getaffinity(0))}")
for kind, nx in (("strong", 512), ("weak", 128)):
    rows = scaling_sweep(kind, threads, nx, 4, p=4, steps=2)
    print(f"\n{kind} scaling, {rows[0]['volume_ndof']} DoF at 1 thread")
    for routine in ROUTINES:
        m = scaling_metrics(ScalingRecord(threads, [r[routine] for r in rows], kind=kind))
        eff = m["gamma_s"] if kind == "strong" else m["gamma_w"]
        print(f"  {routine:>13}: " + "  ".join(f"{n}T {r[routine]:.3f}s (eff {e:.2f})"
                                              for n, r, e in zip(threads, rows, eff)))
