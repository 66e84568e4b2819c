"""Command-line frontend: ``affroll {simulate,invariants,poincare,selfcheck}``.

Exit codes: 0 ok, 1 configuration error, 2 numerical failure, 3 self-check failure.
CSV numbers use the shortest round-trip representation (``repr``).
"""
import argparse
import io
import math
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import checks
from . import invariants as inv
from . import poincare as pc
from . import scenario as sc
from .errors import AffrollError, ConfigError, MaxTimeExceeded, ShapeODEViolation
from .integrate import integrate

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_SELFCHECK = 3
# every section run must keep its integrals within this relative drift
SECTION_DRIFT_TOL = 1e-7


def fmt(x):
    return repr(float(x))


def _csv(header, rows):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")
    return buf.getvalue()


# ------------------------------------------------------------------ simulate / invariants


def state_header(system):
    head = ["time", "M1", "M2", "M3", "g1", "g2", "g3"]
    if system == "full":
        head += ["u1", "u2", "u3"]
    elif system == "homsphere":
        head += ["U1", "U2", "U3"]
    return head


def state_columns(system, y):
    """Row values (after time) for a flat state of ``system``."""
    if system == "full":
        return np.concatenate([y[0:3], y[9:12], y[12:15]])
    return np.asarray(y)


def simulate(s, t_max=None, rtol=None, atol=None):
    """Trajectory of a normalized scenario."""
    params = sc.build_params(s)
    system = sc.build_system(s, params)
    y0 = sc.initial_state(s, params)
    t1 = s["integrator"]["t_max"] if t_max is None else t_max
    return integrate(system, y0, (0.0, t1), sc.integrator_options(s, rtol, atol))


def trajectory_csv(s, traj):
    rows = [[t, *state_columns(s["system"], y)] for t, y in zip(traj.times, traj.states)]
    return _csv(state_header(s["system"]), rows)


def invariant_reports(s, t_max=None, rtol=None, atol=None):
    params = sc.build_params(s)
    traj = simulate(s, t_max, rtol, atol)
    states = [traj.state(i) for i in range(len(traj))]
    return inv.integral_reports(params, states, s["system"])


def reports_csv(reports):
    rows = [[r.name, fmt(r.values[0]), fmt(r.max_drift), fmt(r.tol), str(r.passed).lower()] for r in reports]
    return _csv(["name", "initial", "max_drift", "tol", "passed"], rows)


# ------------------------------------------------------------------ poincare


@dataclass
class SeedResult:
    index: int
    free: tuple
    times: list = field(default_factory=list)
    coords: list = field(default_factory=list)
    drifts: dict = field(default_factory=dict)
    error: str = ""

    @property
    def n(self):
        return len(self.times)

    @property
    def max_drift(self):
        return max(self.drifts.values(), default=0.0)

    @property
    def drift_ok(self):
        return self.max_drift < SECTION_DRIFT_TOL


def run_seed(s, index, free, n_crossings, t_max, rtol=None, atol=None):
    """Crossings of one seed; failures are recorded on the result instead of raised."""
    res = SeedResult(index, tuple(float(v) for v in free))
    try:
        params = sc.build_params(s)
        system = sc.build_system(s, params)
        seed = sc.section_seed(s, free, params)
        opts = sc.integrator_options(s, rtol, atol)
        events = pc.section_map(system, sc.section_spec(s), seed, n_crossings, opts, t_max, strict=False)
    except AffrollError as e:
        res.error = f"{type(e).__name__}: {e}"
        return res
    res.times = [e.time for e in events]
    res.coords = [e.coords for e in events]
    states = [seed] + [system.unpack(e.state) for e in events]
    for rep in inv.integral_reports(params, states, s["system"]):
        res.drifts[rep.name] = rep.max_drift
    if len(events) < n_crossings:
        res.error = f"{MaxTimeExceeded.__name__}: {len(events)} of {n_crossings} crossings before t = {t_max:g}"
    return res


def _run_seed_args(args):
    return run_seed(*args)


def parse_seeds(text):
    """``N`` (first N grid seeds) or ``AxB`` (a new A-by-B grid)."""
    if text is None:
        return None
    m = re.fullmatch(r"\s*(\d+)\s*(?:[xX]\s*(\d+)\s*)?", text)
    if not m or int(m.group(1)) < 1 or (m.group(2) is not None and int(m.group(2)) < 1):
        raise ConfigError("expected N or AxB with positive integers", "--seeds")
    if m.group(2) is None:
        return int(m.group(1))
    return (int(m.group(1)), int(m.group(2)))


def section_batch(s, seeds=None, n_crossings=None, t_max=None, rtol=None, atol=None, workers=1):
    """Run every seed of the scenario's section; results are sorted by seed index."""
    if s["section"] is None:
        raise ConfigError("the scenario has no section block", "section")
    if isinstance(seeds, tuple):
        s = dict(s, section=dict(s["section"], grid=list(seeds)))
    grid = sc.seed_grid(s)
    if isinstance(seeds, int):
        grid = grid[:seeds]
    n = s["section"]["n_crossings"] if n_crossings is None else n_crossings
    tm = s["section"]["t_max"] if t_max is None else t_max
    jobs = [(s, i, free, n, tm, rtol, atol) for i, free in enumerate(grid)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_seed_args, jobs))
    else:
        results = [_run_seed_args(j) for j in jobs]
    return sorted(results, key=lambda r: r.index)


def section_csv(s, results):
    names = pc.SectionSpec(s["section"]["chart"]).coord_names
    rows = []
    for r in results:
        for t, (a, b) in zip(r.times, r.coords):
            rows.append([str(r.index), a, b, t])
    return _csv(["seed", *names, "t"], rows)


def section_summary(results):
    lines = []
    for r in results:
        worst = max(r.drifts, key=r.drifts.get) if r.drifts else "-"
        status = "ok" if not r.error and r.drift_ok else (r.error or "drift above tolerance")
        lines.append(f"seed {r.index} at ({fmt(r.free[0])}, {fmt(r.free[1])}): {r.n} crossings, "
                     f"max drift {r.max_drift:.3e} ({worst}), {status}")
    done = [r for r in results if r.n > 0]
    lines.append(f"summary: {len(done)} of {len(results)} seeds produced crossings, "
                 f"max drift {max((r.max_drift for r in done), default=0.0):.3e} (tolerance {SECTION_DRIFT_TOL:g})")
    return lines


def section_svg(s, results, path):
    spec = pc.SectionSpec(s["section"]["chart"])
    series = [np.array(r.coords) for r in results if r.coords]
    # the Andoyer chart has fixed bounds; the homogeneous-sphere chart is scaled to the data
    xlim, ylim = ((0.0, 2 * math.pi), (-1.0, 1.0)) if spec.chart == "andoyer" else (None, None)
    pc.write_svg(path, series, *spec.coord_names, xlim=xlim, ylim=ylim)


# ------------------------------------------------------------------ selfcheck


def selfcheck_results(s, n=200, seed=0):
    profile = None
    if s["body"]["kind"] == "revolution":
        profile = sc.build_profile_unchecked(s["body"])
    try:
        params = sc.build_params(s)
    except ShapeODEViolation:
        params = None
    return checks.selfcheck(params, s["system"], profile=profile, n=n, seed=seed)


# ------------------------------------------------------------------ entry point


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors; 2 is reserved for numerical failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="affroll", description="Rigid bodies rolling under affine nonholonomic constraints.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, solver=True):
        sp.add_argument("--scenario", required=True, help="scenario YAML file or preset name (fig5_eps2, fig6_E-8, ...)")
        sp.add_argument("--out", help="output path (default: stdout)")
        if solver:
            sp.add_argument("--t-max", type=float, help="override the final time")
            sp.add_argument("--rtol", type=float, help="override the relative tolerance")
            sp.add_argument("--atol", type=float, help="override the absolute tolerance")

    common(sub.add_parser("simulate", help="trajectory CSV"))
    common(sub.add_parser("invariants", help="first-integral drift report"))
    sp = sub.add_parser("poincare", help="Poincare section CSV")
    common(sp)
    sp.add_argument("--seeds", help="N (first N grid seeds) or AxB (seed grid)")
    sp.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    sp.add_argument("--svg", help="also write a scatter plot")
    sp = sub.add_parser("selfcheck", help="shape, field, inversion and measure checks")
    common(sp, solver=False)
    sp.add_argument("--seeds", help="number of random states per check (default 200)")
    return p


def _positive(name, v):
    if v is not None and not (math.isfinite(v) and v > 0):
        raise ConfigError(f"must be positive, got {v!r}", name)


def run(args):
    s = sc.load(args.scenario)
    if args.command != "selfcheck":
        for name in ("t_max", "rtol", "atol"):
            _positive("--" + name.replace("_", "-"), getattr(args, name))
        if s["body"]["kind"] == "revolution":
            sc.build_params(s)
    if args.command == "simulate":
        _emit(trajectory_csv(s, simulate(s, args.t_max, args.rtol, args.atol)), args.out)
        return EXIT_OK
    if args.command == "invariants":
        reports = invariant_reports(s, args.t_max, args.rtol, args.atol)
        _emit(reports_csv(reports), args.out)
        return EXIT_OK if all(r.passed for r in reports) else EXIT_NUMERICAL
    if args.command == "poincare":
        if args.workers < 1:
            raise ConfigError("must be at least 1", "--workers")
        results = section_batch(s, parse_seeds(args.seeds), None, args.t_max, args.rtol, args.atol, args.workers)
        _emit(section_csv(s, results), args.out)
        if args.svg:
            section_svg(s, results, args.svg)
        for line in section_summary(results):
            print(line, file=sys.stderr)
        done = [r for r in results if r.n > 0]
        return EXIT_OK if done and all(r.drift_ok for r in done) else EXIT_NUMERICAL
    n = parse_seeds(args.seeds) if args.seeds else 200
    if not isinstance(n, int):
        raise ConfigError("expected a single count", "--seeds")
    results = selfcheck_results(s, n=n)
    lines = [f"{'PASS' if r.passed else 'FAIL'} {r.name} value={r.value:.3e} tol={r.tol:g}"
             + (f" ({r.detail})" if r.detail else "") for r in results]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_SELFCHECK


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code
    try:
        return run(args)
    except (ConfigError, ShapeODEViolation) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except AffrollError as e:
        print(f"numerical error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except BrokenPipeError:
        return EXIT_OK
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
