"""Configuration parsing, trace persistence, and the command-line surface.

Config files are flat ``key = value`` lines with ``#`` comments.  The CSV
trace format serialises every numeric field with 17 significant digits, so
write -> read round trips are bit exact for doubles.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import analysis, geometry, normalization, scenarios, solver
from .errors import ConfigError, CylflowError, SolverError
from .normalization import NormalizedRecord, NormalizedTrace
from .scenarios import ScenarioSpec
from .solver import FlowTrace, StepperConfig, StopRule, TraceRecord

CONFIG_KEYS = ("scenario", "a", "rho", "n", "w0", "epsilon", "mode", "scheme",
               "safety", "stop", "stop_value", "record_every", "a_target", "out")
REQUIRED_KEYS = ("scenario", "rho", "n")

CSV_HEADER = ("step,t_tilde,dt,area,total_R,R_max,R_min,total_R2,len_minus,"
              "len_plus,len_mid,k_minus,k_plus,gb_residual,meridian,argmax_node,"
              "rmin_loc,r_boundary,phi,t_norm,R_max_norm,R_min_norm,r_norm,"
              "len_minus_norm,len_plus_norm,len_mid_norm,k_minus_norm,k_plus_norm")

SUITES = ("conservation", "asymptotic", "lemmas", "all")


@dataclass(frozen=True)
class RunConfig:
    """One fully-specified run: scenario, stepping, stop rule, output."""

    scenario: str
    rho: float
    n: int
    a: float = 1.0
    w0: str = "zero"
    epsilon: float = 0.0
    mode: int = 1
    scheme: str = "explicit_heun"
    safety: float = 0.25
    stop: str = "t_tilde"
    stop_value: float = 1.0
    record_every: int = 1
    a_target: float = 1.0
    out: str = "trace.csv"

    def scenario_spec(self) -> ScenarioSpec:
        return ScenarioSpec(profile_kind=self.scenario, a=self.a, rho=self.rho,
                            n=self.n, w0_kind=self.w0, epsilon=self.epsilon,
                            mode=self.mode)

    def stepper(self) -> StepperConfig:
        return StepperConfig(scheme=self.scheme, safety=self.safety)

    def stop_rule(self) -> StopRule:
        return StopRule(self.stop, self.stop_value)


_FLOAT_KEYS = ("a", "rho", "epsilon", "safety", "stop_value", "a_target")
_INT_KEYS = ("n", "mode", "record_every")
_CHOICE_KEYS = {
    "scenario": geometry.PROFILE_KINDS,
    "w0": scenarios.W0_KINDS,
    "scheme": solver.SCHEMES,
    "stop": solver.STOP_KINDS,
}


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines into a RunConfig.

    Unknown or malformed keys are rejected by name; a duplicated key wins
    with a warning on the diagnostic stream; missing required keys are
    rejected by name.
    """
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key \"{key}\" (line {lineno})")
        if not val:
            raise ConfigError(f"empty value for key \"{key}\" (line {lineno})")
        if key in values:
            print(f"warning: duplicate key \"{key}\"; last value wins", file=sys.stderr)
        values[key] = val

    for key in REQUIRED_KEYS:
        if key not in values:
            raise ConfigError(f"missing required key \"{key}\"")

    kwargs: dict = {}
    for key, val in values.items():
        if key in _FLOAT_KEYS:
            try:
                kwargs[key] = float(val)
            except ValueError:
                raise ConfigError(f"key \"{key}\": expected a number, got {val!r}")
        elif key in _INT_KEYS:
            try:
                kwargs[key] = int(val)
            except ValueError:
                raise ConfigError(f"key \"{key}\": expected an integer, got {val!r}")
        elif key in _CHOICE_KEYS:
            if val not in _CHOICE_KEYS[key]:
                raise ConfigError(
                    f"key \"{key}\": expected one of {_CHOICE_KEYS[key]}, got {val!r}")
            kwargs[key] = val
        else:
            kwargs[key] = val
    cfg = RunConfig(**kwargs)
    cfg.scenario_spec()   # surfaces scenario-level validation errors now
    cfg.stepper()
    cfg.stop_rule()
    if cfg.record_every < 1:
        raise ConfigError(f"key \"record_every\": must be >= 1, got {cfg.record_every}")
    return cfg


def _fmt(x: float) -> str:
    return "%.17g" % x


def write_trace_csv(trace: FlowTrace, normalized_trace: NormalizedTrace, sink) -> None:
    """Serialise aligned traces with the fixed column schema (17 significant
    digits; write -> read is lossless)."""
    if len(trace.records) != len(normalized_trace.records):
        raise ConfigError("trace and normalized trace are not aligned record-for-record")
    own = isinstance(sink, (str, Path))
    fh = open(sink, "w", encoding="utf-8") if own else sink
    try:
        fh.write(CSV_HEADER + "\n")
        for rec, nrec in zip(trace.records, normalized_trace.records):
            row = [
                str(rec.step), _fmt(rec.t_tilde), _fmt(rec.dt), _fmt(rec.area),
                _fmt(rec.total_R), _fmt(rec.R_max), _fmt(rec.R_min),
                _fmt(rec.total_R2), _fmt(rec.len_minus), _fmt(rec.len_plus),
                _fmt(rec.len_mid), _fmt(rec.k_minus), _fmt(rec.k_plus),
                _fmt(rec.gb_residual), _fmt(rec.meridian), str(rec.argmax_node),
                rec.rmin_loc, _fmt(rec.r_boundary), _fmt(nrec.phi), _fmt(nrec.t),
                _fmt(nrec.R_max), _fmt(nrec.R_min), _fmt(nrec.r),
                _fmt(nrec.len_minus), _fmt(nrec.len_plus), _fmt(nrec.len_mid),
                _fmt(nrec.k_minus), _fmt(nrec.k_plus),
            ]
            fh.write(",".join(row) + "\n")
    finally:
        if own:
            fh.close()


def read_trace_csv(source) -> tuple[FlowTrace, NormalizedTrace]:
    """Read a trace CSV back into record lists.

    The returned FlowTrace carries no BaseGeometry (the grid is not part of
    the file format); checks that need the background must rerun the
    scenario instead.
    """
    own = isinstance(source, (str, Path))
    fh = open(source, "r", encoding="utf-8") if own else source
    try:
        header = fh.readline().rstrip("\n")
        if header != CSV_HEADER:
            raise ConfigError(
                "unsupported trace format: header does not match the "
                f"expected schema (got {header[:60]!r}...)")
        records = []
        nrecords = []
        a_target = None
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 28:
                raise ConfigError(f"line {lineno}: expected 28 fields, got {len(parts)}")
            records.append(TraceRecord(
                step=int(parts[0]), t_tilde=float(parts[1]), dt=float(parts[2]),
                area=float(parts[3]), total_R=float(parts[4]), R_max=float(parts[5]),
                R_min=float(parts[6]), total_R2=float(parts[7]),
                len_minus=float(parts[8]), len_plus=float(parts[9]),
                len_mid=float(parts[10]), k_minus=float(parts[11]),
                k_plus=float(parts[12]), gb_residual=float(parts[13]),
                meridian=float(parts[14]), argmax_node=int(parts[15]),
                rmin_loc=parts[16], r_boundary=float(parts[17])))
            nrecords.append(NormalizedRecord(
                t_tilde=float(parts[1]), t=float(parts[19]), phi=float(parts[18]),
                R_max=float(parts[20]), R_min=float(parts[21]), r=float(parts[22]),
                total_R2=float(parts[7]) / float(parts[18]),
                len_minus=float(parts[23]), len_plus=float(parts[24]),
                len_mid=float(parts[25]), k_minus=float(parts[26]),
                k_plus=float(parts[27]), rmin_loc=parts[16]))
            if a_target is None:
                a_target = float(parts[3]) * float(parts[18])
    finally:
        if own:
            fh.close()
    trace = FlowTrace(records=records, base=None, scheme="unknown",
                      record_every=0, stop_kind="unknown", stop_value=math.nan)
    ntrace = NormalizedTrace(records=nrecords, a_target=a_target if a_target else 1.0)
    return trace, ntrace


def run_config(config: RunConfig, store_states: bool = False) -> tuple[FlowTrace, NormalizedTrace]:
    """Build the scenario, evolve it, and normalise the trace."""
    state = scenarios.make_initial(config.scenario_spec())
    trace = solver.evolve(state, config.stepper(), config.stop_rule(),
                          record_every=config.record_every, store_states=store_states)
    return trace, normalization.normalize_trace(trace, config.a_target)


def _verify_checks(config: RunConfig, suite: str) -> list[analysis.BoundCheck]:
    trace, ntrace = run_config(config, store_states=True)
    implicit = config.scheme == "implicit_euler"
    checks: list[analysis.BoundCheck] = []

    if suite in ("conservation", "all"):
        checks.append(analysis.check_gauss_bonnet(trace))
        checks.append(analysis.check_boundary_preservation(trace))
        checks.append(analysis.check_positivity(trace))
        checks.append(analysis.check_monotone_total_curvature(trace))
        checks.append(analysis.check_area_law(trace))
        checks.append(analysis.check_symmetry_preservation(trace))
        checks.append(analysis.check_total_curvature_ode(
            trace, rel_tol=0.25 if implicit else 0.05))

    if suite in ("asymptotic", "all"):
        checks.append(analysis.check_total_curvature_unnormalized(trace))
        checks.append(analysis.check_total_curvature_normalized(ntrace))
        checks.append(analysis.check_blowup(trace, ntrace))
        checks.append(analysis.check_nonexponential(trace, ntrace))
        checks.append(normalization.time_map_bounds_check(trace))
        floor = float(np.min(np.minimum(ntrace.column("len_minus"),
                                        ntrace.column("len_plus"))))
        checks.append(analysis.BoundCheck(
            "boundary_length_floor", "pass" if floor > 0 else "fail",
            floor, floor, (0, len(ntrace.records)),
            "measured floor of the normalized boundary lengths"))

    if suite in ("lemmas", "all"):
        par_margin = math.inf
        area_margin = math.inf
        worst_par = worst_area = None
        for j in range(len(trace.records)):
            state = trace.state_at(j)
            cp = analysis.check_parallel_bounds(state)
            ca = analysis.check_area_bounds(state)
            if cp.worst_margin < par_margin:
                par_margin, worst_par = cp.worst_margin, cp
            if ca.worst_margin < area_margin:
                area_margin, worst_area = ca.worst_margin, ca
        checks.append(replace(worst_par, window=(0, len(trace.records)),
                              notes="worst record: " + worst_par.notes))
        checks.append(replace(worst_area, window=(0, len(trace.records)),
                              notes="worst record: " + worst_area.notes))
        # backward Euler's first-order profile error is visible to the
        # strict monotonicity comparison, so implicit runs get a looser tie
        tie = 2e-2 if implicit else 1e-9
        ineq = 0.2 if implicit else 1e-6
        checks.append(analysis.check_decreasing_from_middle(
            trace, ntrace, tie_rtol=tie, ineq_tol=ineq))
        worst_pot = max(analysis.potential_residual(trace.state_at(j))
                        for j in range(len(trace.records)))
        checks.append(analysis.BoundCheck(
            "potential_solve", "pass" if worst_pot <= 1e-10 else "fail",
            worst_pot, 1e-10 - worst_pot, (0, len(trace.records)),
            f"worst direct-substitution residual {worst_pot:.3e} (tol 1e-10)"))
        h_norm = [analysis.h_monitor(trace.state_at(j)) * trace.records[j].area
                  / config.a_target for j in range(len(trace.records))]
        h_cap = 10.0 * max(1.0, ntrace.records[0].R_max)
        h_worst = max(h_norm)
        checks.append(analysis.BoundCheck(
            "h_monitor_bounded",
            "pass" if math.isfinite(h_worst) and h_worst <= h_cap else "fail",
            h_worst, h_cap - h_worst, (0, len(trace.records)),
            f"max normalized h = {h_worst:.4f} (cap {h_cap:.1f})"))
    return checks


def _print_report(checks: list[analysis.BoundCheck], summary_path: str | None,
                  out=None) -> int:
    out = out if out is not None else sys.stdout
    failed = 0
    for c in checks:
        const = "-" if c.constant_found is None else "%.6g" % c.constant_found
        margin = "-" if c.worst_margin is None else "%.3g" % c.worst_margin
        out.write(f"{c.name:<32s} {c.verdict:<18s} constant={const:<12s} "
                  f"margin={margin:<10s} {c.notes}\n")
        if c.verdict == "fail":
            failed += 1
    out.write(f"{len(checks)} checks: "
              f"{sum(c.verdict == 'pass' for c in checks)} pass, {failed} fail, "
              f"{sum(c.verdict not in ('pass', 'fail') for c in checks)} other\n")
    if summary_path:
        with open(summary_path, "w", encoding="utf-8") as fh:
            for c in checks:
                const = "nan" if c.constant_found is None else _fmt(c.constant_found)
                margin = "nan" if c.worst_margin is None else _fmt(c.worst_margin)
                fh.write(f"{c.name}\t{c.verdict}\t{const}\t{margin}\n")
    return failed


def cmd_run(config: RunConfig) -> int:
    try:
        trace, ntrace = run_config(config)
    except SolverError as err:
        if err.trace is not None:
            ntrace = normalization.normalize_trace(err.trace, config.a_target)
            write_trace_csv(err.trace, ntrace, config.out)
            print(f"run aborted; partial trace written to {config.out}", file=sys.stderr)
        print(f"error: {err}", file=sys.stderr)
        return 1
    write_trace_csv(trace, ntrace, config.out)
    last = trace.records[-1]
    print(f"{config.scenario} n={config.n}: {last.step} steps to t_tilde="
          f"{last.t_tilde:.6g}, area {trace.records[0].area:.6g} -> {last.area:.6g}, "
          f"{len(trace.records)} records -> {config.out}")
    return 0


def cmd_verify(config: RunConfig, suite: str, summary_path: str | None = None) -> int:
    try:
        checks = _verify_checks(config, suite)
    except SolverError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    failed = _print_report(checks, summary_path)
    return 1 if failed else 0


def cmd_convergence(config: RunConfig, levels: int) -> int:
    if levels < 3:
        raise ConfigError(f"convergence needs at least 3 levels, got {levels}")
    if config.stop != "t_tilde":
        raise ConfigError("convergence requires a t_tilde stop rule "
                          "(states must be compared at one time)")
    states = {}
    residuals = {}
    for k in range(levels):
        n_k = config.n * 2 ** k
        cfg_k = replace(config, n=n_k)
        state = scenarios.make_initial(cfg_k.scenario_spec())
        tr = solver.evolve(state, cfg_k.stepper(), cfg_k.stop_rule(),
                           record_every=10 ** 9, store_states=True)
        end = tr.state_at(len(tr.records) - 1)
        states[n_k] = end
        delta = end.base.h / 2.0
        tr2 = solver.evolve(end, cfg_k.stepper(),
                            StopRule("t_tilde", config.stop_value + delta),
                            record_every=10 ** 9, store_states=True)
        residuals[n_k] = solver.curvature_evolution_residual(
            end, tr2.state_at(len(tr2.records) - 1), delta)

    ns = sorted(states)
    errs = [float(np.max(np.abs(states[nc].w - states[nf].w[::2])))
            for nc, nf in zip(ns[:-1], ns[1:])]
    print(f"{'n':>6s} {'err_w':>12s} {'order':>7s} {'evol_res_int':>12s} "
          f"{'factor':>7s} {'evol_res_bdy':>12s} {'factor':>7s}")
    for i, n_k in enumerate(ns):
        err_s = ("%.4e" % errs[i]) if i < len(errs) else "-"
        order_s = ("%.2f" % math.log2(errs[i] / errs[i + 1])) \
            if i + 1 < len(errs) else ""
        ri, rb = residuals[n_k]
        fi = ("%.2f" % (residuals[ns[i - 1]][0] / ri)) if i > 0 else ""
        fb = ("%.2f" % (residuals[ns[i - 1]][1] / rb)) if i > 0 else ""
        print(f"{n_k:>6d} {err_s:>12s} {order_s:>7s} {ri:>12.4e} {fi:>7s} "
              f"{rb:>12.4e} {fb:>7s}")
    return 0


def cmd_sweep(config: RunConfig, key: str, values: list[str]) -> int:
    if key not in CONFIG_KEYS or key == "out":
        raise ConfigError(f"cannot sweep key \"{key}\"")
    stem = Path(config.out)
    index_path = stem.with_name(stem.stem + "_index.csv")
    rows = []
    for val in values:
        text = f"{key} = {val}"
        # reuse the typed parsing for the overridden key
        patched = parse_config(
            "\n".join(f"{k} = {getattr(config, k)}" for k in CONFIG_KEYS
                      if k != key) + "\n" + text)
        out_k = stem.with_name(f"{stem.stem}_{key}{val}{stem.suffix}")
        patched = replace(patched, out=str(out_k))
        code = cmd_run(patched)
        if code != 0:
            return code
        rows.append((val, str(out_k)))
    with open(index_path, "w", encoding="utf-8") as fh:
        fh.write("key,value,path\n")
        for val, path in rows:
            fh.write(f"{key},{val},{path}\n")
    print(f"sweep over {key}: {len(rows)} runs, index -> {index_path}")
    return 0


def _load_config(path: str) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="cylflow",
        description="Ricci flow on cylinders with fixed boundary geodesic "
                    "curvature: run, verify, and convergence-study driver.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate a scenario and write its trace CSV")
    p_run.add_argument("config")

    p_verify = sub.add_parser("verify", help="run a scenario and check invariants")
    p_verify.add_argument("config")
    p_verify.add_argument("--suite", choices=SUITES, default="all")
    p_verify.add_argument("--summary", default=None,
                          help="write a machine-readable summary (TSV) here")

    p_conv = sub.add_parser("convergence", help="grid refinement study")
    p_conv.add_argument("config")
    p_conv.add_argument("--levels", type=int, default=3)

    p_sweep = sub.add_parser("sweep", help="run one config across parameter values")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--key", required=True)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated list of values")

    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        if args.command == "run":
            return cmd_run(config)
        if args.command == "verify":
            return cmd_verify(config, args.suite, args.summary)
        if args.command == "convergence":
            return cmd_convergence(config, args.levels)
        if args.command == "sweep":
            return cmd_sweep(config, args.key, args.values.split(","))
    except CylflowError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
