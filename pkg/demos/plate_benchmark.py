"""The ten-plate benchmark for one seed, narrated step by step.

Prints, for each time step, the conflicts seen, the levels the plates end
up on and the global cost, then the final layout.

    python demos/plate_benchmark.py [seed]
"""

import sys
from collections import Counter

import numpy as np

from shdempc import ExperimentSpec, run


def main(seed=1):
    spec = ExperimentSpec()
    m = run(spec, seed)
    per_step = Counter(r.time_step for r in m.trace if r.conflict)
    levels = {}
    for r in m.trace:
        levels.setdefault(r.time_step, {})[r.agent] = r.level_after
    V = m.V("per_iteration")
    stride = 2 * spec.N_p
    print(f"seed {seed}: {spec.n_agents} plates, {spec.N_q} levels, T={spec.T}")
    for t in range(1, spec.T + 1):
        lv = "".join(str(levels[t][i]) for i in range(spec.n_agents))
        print(f"  t={t:2d}  conflicts {per_step.get(t, 0):3d}  levels {lv}  V {V[t * stride]:.5f}")
    print(f"settled after {m.settle_index('per_iteration')} iterations")
    print("final layout (position, level):")
    for i, (x, q) in enumerate(zip(m.final_positions, m.final_levels)):
        bar = " " * int(round(20 + 40 * x)) + "#"
        print(f"  {i}  {x:+.4f}  q={q} {bar}")
    print(f"adjacent plates on opposite sides: "
          f"{int(np.sum(np.diff(np.sign(m.final_positions)) != 0))} of {spec.n_agents - 1}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 1)
