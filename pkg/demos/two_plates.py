"""Two overlapping plates, solved side by side and then one after the other.

Both plates start on top of each other.  Their targets split cleanly either
way, but when both replan their paths at once each one assumes the other
keeps its old plan, and the combined result overlaps more than either
expected: a conflict.  Giving the plates different levels lets the second
one plan against the first one's fresh path.

    python demos/two_plates.py
"""

import numpy as np

from shdempc import ExperimentSpec, run


def show(title, spec):
    m = run(spec, seed=1)
    by_phase = {"stationary": 0, "trajectory": 0}
    for r in m.trace:
        by_phase[r.phase] += r.conflict
    print(title)
    print(f"  conflicts: stationary {by_phase['stationary']}, trajectory {by_phase['trajectory']}, "
          f"last at step {m.last_mutation_step()}")
    print(f"  final positions {np.round(m.final_positions, 4).tolist()}, final V {m.V()[-1]:.5f}\n")


if __name__ == "__main__":
    show("parallel (one level)", ExperimentSpec(n_agents=2, N_q=1))
    show("two levels, emergent", ExperimentSpec(n_agents=2))
    show("two levels, plate 1 first", ExperimentSpec(n_agents=2, hierarchy_init=[2, 1]))
