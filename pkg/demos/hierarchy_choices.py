"""Emergent versus prescribed hierarchies on the ten-plate chain.

The plates agree on their targets straight away in both cases; every
conflict comes from planning the paths there.  Starting from a single level
the plates sort themselves onto levels through those conflicts.  Starting
from the alternating two-level hierarchy does not avoid them: once an
earlier neighbour has moved away, a later plate is content with less effort,
and the earlier plate then notices more overlap than it planned for.

    python demos/hierarchy_choices.py
"""

from dataclasses import replace

from shdempc import ExperimentSpec, run


def describe(label, spec, seeds=(1, 2, 3)):
    for s in seeds:
        m = run(spec, s)
        by_phase = {"stationary": 0, "trajectory": 0}
        for r in m.trace:
            by_phase[r.phase] += r.conflict
        print(f"{label:10s} seed {s}: conflicts stationary {by_phase['stationary']:3d} "
              f"trajectory {by_phase['trajectory']:3d}, last at step {m.last_mutation_step()}, "
              f"final V {m.V()[-1]:.5f}")


if __name__ == "__main__":
    base = ExperimentSpec()
    describe("emergent", base)
    describe("universal", replace(base, hierarchy_init="universal"))
