"""A quick look at how settling time depends on chain length.

The full comparison (N up to 80, several seeds) is the ``shdempc scaling``
command and takes about an hour on one core; this preview stops at N=20
with one seed.

    python demos/scaling_preview.py
"""

from shdempc import ExperimentSpec, scaling_comparison

if __name__ == "__main__":
    rows = scaling_comparison((10, 20), seeds=(1,), base=ExperimentSpec(T=15))
    for r in rows:
        print(f"{r.variant:9s} N={r.n_agents:3d}  iterations to settle {r.settle[0]:4d}  "
              f"final V {r.final_V[0]:.5f}")
