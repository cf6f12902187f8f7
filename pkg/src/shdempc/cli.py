"""Command-line entry point: ``run``, ``study``, ``scaling`` and ``audit``.

Exit codes: 0 success, 2 bad configuration or arguments, 3 file I/O
failure, 4 audit failure, 5 run failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import yaml

from .config import ConfigError, ExperimentSpec, dump_spec, spec_from_dict
from .coordinator import RunMetrics, run
from .objective import conflict_tolerance
from .experiments import SCALING_NS, SCALING_T, plate_study, scaling_comparison

log = logging.getLogger("shdempc")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_AUDIT, EXIT_RUN = 0, 2, 3, 4, 5

TRACE_HEADER = ["time_step", "phase", "iteration", "agent", "level", "conflict", "V_hat", "V_breve"]
GLOBAL_HEADER = ["sample", "V", "cumulative_mutations", "mean_target"]
FINAL_HEADER = ["agent", "position", "level"]
SCALING_HEADER = ["variant", "n_agents", "seed", "settle", "final_V"]


def fmt(x: float) -> str:
    """17 significant digits: enough for an exact float round trip."""
    return format(float(x), ".17g")


# -- config -----------------------------------------------------------------

def _parse_value(text: str):
    return yaml.safe_load(text)


def parse_config(path=None, overrides=()) -> ExperimentSpec:
    """Resolve a spec from an optional YAML file plus ``key=value`` overrides.

    Dotted keys reach into the solver block, e.g. ``solver.mu_smooth=1e-3``.
    """
    data = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise OSError(f"{path}: {exc.strerror}") from None
        loaded = yaml.safe_load(text)
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigError("top level: must be a mapping")
        data = dict(loaded or {})
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"{item}: overrides take the form key=value")
        if key.startswith("solver."):
            data.setdefault("solver", {})
            data["solver"] = {**data["solver"], key[len("solver."):]: _parse_value(value)}
        else:
            data[key] = _parse_value(value)
    return spec_from_dict(data)


# -- sinks ------------------------------------------------------------------

def trace_rows(m: RunMetrics):
    for r in m.trace:
        yield [r.time_step, r.phase, r.iteration, r.agent, r.level_before, int(r.conflict),
               fmt(r.V_hat), fmt(r.V_breve)]


def global_rows(m: RunMetrics, mode: str | None = None):
    for k, s in enumerate(m.samples(mode)):
        yield [k, fmt(s.V), s.cumulative_mutations, fmt(s.mean_target)]


def final_rows(m: RunMetrics):
    for i, (x, q) in enumerate(zip(m.final_positions, m.final_levels)):
        yield [i, fmt(x), q]


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _write(path: Path, text: str):
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror}") from None


def emit_metrics(m: RunMetrics, out: Path, plots: bool = False) -> list[Path]:
    """Write trace, global and final CSVs plus the resolved config into ``out``."""
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"{out}: {exc.strerror}") from None
    files = {
        "trace.csv": csv_text(TRACE_HEADER, trace_rows(m)),
        "global.csv": csv_text(GLOBAL_HEADER, global_rows(m)),
        "final.csv": csv_text(FINAL_HEADER, final_rows(m)),
        "config.yaml": dump_spec(m.spec) + yaml.safe_dump({"seed": m.seed}),
    }
    paths = []
    for name, text in files.items():
        _write(out / name, text)
        paths.append(out / name)
    if plots:
        from . import plots as plotting  # matplotlib only when asked for

        paths += plotting.plot_run(out)
    return paths


def read_csv(path: Path) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror}") from None


# -- audit ------------------------------------------------------------------

def audit_outputs(out: Path, replay: bool = False) -> list[str]:
    """Re-check invariants over an emitted run directory; returns the violations."""
    cfg = yaml.safe_load((out / "config.yaml").read_text())
    seed = cfg.pop("seed")
    spec = spec_from_dict(cfg)
    trace = read_csv(out / "trace.csv")
    glob = read_csv(out / "global.csv")
    problems = []

    per_step = 2 * spec.N_p * (spec.N_q if spec.sampling_mode == "per_level" else 1)
    if len(glob) != 1 + spec.T * per_step:
        problems.append(f"global.csv has {len(glob)} rows, expected {1 + spec.T * per_step}")
    if len(trace) != spec.T * 2 * spec.N_p * spec.n_agents:
        problems.append(f"trace.csv has {len(trace)} rows")

    # conflicts per negotiation iteration, numbered across the whole run
    per_iter = [0] * (spec.T * 2 * spec.N_p)
    last_conflict = 0
    for k, r in enumerate(trace):
        hat, breve = float(r["V_hat"]), float(r["V_breve"])
        flagged = r["conflict"] == "1"
        if flagged and not breve > hat + conflict_tolerance(hat):
            problems.append(f"trace row {k}: conflict flagged without a cost increase")
        if flagged:
            phase = 0 if r["phase"] == "stationary" else 1
            g = (int(r["time_step"]) - 1) * 2 * spec.N_p + phase * spec.N_p + int(r["iteration"]) - 1
            if 0 <= g < len(per_iter):
                per_iter[g] += 1
            last_conflict = int(r["time_step"])
    # level samples precede their iteration's conflict check, iteration samples follow it
    seen = [0]
    for c in per_iter:
        seen.append(seen[-1] + c)
    for k, g in enumerate(glob[1:], start=1):
        it = (k - 1) // spec.N_q if spec.sampling_mode == "per_level" else k
        if it < len(seen) and int(g["cumulative_mutations"]) != seen[it]:
            problems.append(f"global.csv row {k}: cumulative mutations disagree with the trace")
            break

    # cost must not rise inside a time step once the hierarchy has stopped changing
    V = [float(g["V"]) for g in glob]
    for k in range(1, len(V) - 1):
        t_a, t_b = (k - 1) // per_step + 1, k // per_step + 1
        if t_a == t_b and t_a > last_conflict and V[k + 1] > V[k] + 1e-9 * max(1.0, abs(V[k])):
            problems.append(f"global.csv row {k + 1}: V rose after the last conflict")

    if replay:
        m = run(spec, seed)
        for where, agent, issues in m.audit_failures:
            problems.append(f"replay {where} agent {agent}: {issues[0]}")
        fresh = {
            "trace.csv": csv_text(TRACE_HEADER, trace_rows(m)),
            "global.csv": csv_text(GLOBAL_HEADER, global_rows(m)),
            "final.csv": csv_text(FINAL_HEADER, final_rows(m)),
        }
        for name, text in fresh.items():
            if (out / name).read_text() != text:
                problems.append(f"replay differs from {name}")
    return problems


# -- commands ---------------------------------------------------------------

def _report_failures(m: RunMetrics):
    for where, agent, issues in m.audit_failures:
        log.error("feasibility audit: %s agent %d: %s", where, agent, "; ".join(issues))


def cmd_run(args) -> int:
    spec = parse_config(args.config, args.set)
    seed = args.seed if args.seed is not None else spec.seeds[0]
    m = run(spec, seed)
    emit_metrics(m, Path(args.out), args.plots)
    _report_failures(m)
    print(f"seed {seed}: V={m.V()[-1]:.6g} mutations={m.total_mutations} "
          f"settle={m.settle_index()} -> {args.out}")
    return EXIT_AUDIT if m.audit_failures else EXIT_OK


def cmd_study(args) -> int:
    spec = parse_config(args.config, args.set)
    result = plate_study(spec, jobs=args.jobs)
    out = Path(args.out)
    rows = []
    for m, s in zip(result.runs, result.summary):
        emit_metrics(m, out / f"seed_{m.seed}", args.plots)
        _report_failures(m)
        rows.append([s.seed, s.settle_index, fmt(s.final_V), s.mutations, s.last_mutation_step])
        print(f"seed {s.seed}: V={s.final_V:.6g} mutations={s.mutations} "
              f"last mutation at step {s.last_mutation_step} settle={s.settle_index}")
    _write(out / "summary.csv", csv_text(
        ["seed", "settle", "final_V", "mutations", "last_mutation_step"], rows))
    return EXIT_AUDIT if any(m.audit_failures for m in result.runs) else EXIT_OK


def cmd_scaling(args) -> int:
    base = parse_config(args.config, [f"T={args.T}"] + list(args.set))
    seeds = tuple(args.seeds) if args.seeds else base.seeds
    rows = scaling_comparison(tuple(args.Ns), seeds=seeds, base=base, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for r in rows:
        for seed, settle, V in zip(seeds, r.settle, r.final_V):
            lines.append([r.variant, r.n_agents, seed, settle, fmt(V)])
        print(f"{r.variant:9s} N={r.n_agents:3d} median settle={r.median_settle:g} {list(r.settle)}")
    _write(out / "scaling.csv", csv_text(SCALING_HEADER, lines))
    _write(out / "config.yaml", dump_spec(base))
    if args.plots:
        from . import plots as plotting

        plotting.plot_scaling(out)
    return EXIT_OK


def cmd_audit(args) -> int:
    problems = audit_outputs(Path(args.dir), args.replay)
    for p in problems:
        print(f"FAIL {p}")
    if not problems:
        print(f"ok {args.dir}")
    return EXIT_AUDIT if problems else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shdempc", description="Hierarchy-coordinated distributed EMPC")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default):
        sp.add_argument("--config", help="YAML config file (defaults apply to missing keys)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key; repeatable")
        sp.add_argument("--out", default=out_default, help="output directory")
        sp.add_argument("--plots", action="store_true", help="also write PNG figures")

    sp = sub.add_parser("run", help="one seeded run")
    common(sp, "out/run")
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("study", help="one run per configured seed")
    common(sp, "out/study")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    sp.set_defaults(func=cmd_study)

    sp = sub.add_parser("scaling", help="parallel vs hierarchy iterations-to-settle over N")
    common(sp, "out/scaling")
    sp.add_argument("--Ns", type=int, nargs="+", default=list(SCALING_NS))
    sp.add_argument("--seeds", type=int, nargs="+")
    sp.add_argument("--T", type=int, default=SCALING_T)
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_scaling)

    sp = sub.add_parser("audit", help="re-verify invariants over an emitted run directory")
    sp.add_argument("dir")
    sp.add_argument("--replay", action="store_true",
                    help="re-run the config and compare feasibility and CSV bytes")
    sp.set_defaults(func=cmd_audit)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, yaml.YAMLError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001 - surface any run failure as one category
        log.debug("run failure", exc_info=True)
        print(f"run error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
