"""Configuration-driven experiment runner and file emission.

Config files are flat ``key = value`` text with dotted section prefixes
(``domain.kind``, ``params.epsilon``, ...).  Outputs are deterministic for
a fixed config and seed: time series as CSV with a pinned column order,
field snapshots as raw little-endian dumps behind an 8-byte magic string,
and a human-readable summary whose every asserted property names the
structural fact it tests, its tolerance and the measured value.
"""

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import geometry as geo
from . import flow as fl
from . import barriers as ba
from . import verify as vf
from . import liouville as lv
from .expressions import parse_expression, ExpressionError
from .operator import FlowParams, OperatorError

SNAPSHOT_MAGIC = b"MCFGRID1"
CSV_HEADER = "t,sup_u,sup_grad,sup_ut,J,diss,src,resid"
EXPERIMENTS = ("flow", "steady", "continuation", "barrier", "comparison",
               "viscosity", "liouville")


class ConfigError(ValueError):
    """Malformed or invalid run configuration."""


@dataclass
class RunConfig:
    experiment: str
    domain: geo.DomainSpec
    boundary_expr: object
    initial_expr: object
    params: FlowParams
    spacing: float
    horizon: float = 1.0
    snapshot_times: tuple = ()
    tolerance: float = 1e-6
    eps_list: tuple = ()
    seed: int = 0
    pairs: int = 20
    probe_budget: int = 2000
    plateau_start: float = 0.25
    plateau_value: float = 1.0
    plateau_margin: float = 0.125
    out_dir: Path = Path(".")
    raw: dict = dc_field(default_factory=dict)


@dataclass
class PropertyCheck:
    name: str
    anchor: str            # which structural fact of the flow this audits
    tolerance: float
    measured: float
    passed: bool


@dataclass
class RunSummary:
    experiment: str
    properties: list
    scalars: dict
    manifest: list

    @property
    def all_passed(self) -> bool:
        return all(p.passed for p in self.properties)


def _parse_kv(path) -> dict:
    raw = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, val = stripped.split("=", 1)
        raw[key.strip()] = val.strip()
    return raw


def _domain_from(raw: dict) -> geo.DomainSpec:
    kind = raw.get("domain.kind")
    if kind is None:
        raise ConfigError("missing field domain.kind")
    dim = int(raw.get("domain.dim", "2"))
    center = tuple(float(c) for c in raw.get("domain.center", "").split()) or (0.0,) * dim
    try:
        if kind == "ball":
            return geo.ball(float(raw["domain.radius"]), center, dim)
        if kind == "ellipse":
            return geo.ellipse(float(raw["domain.semi_major"]),
                               float(raw["domain.semi_minor"]), center, dim)
        if kind == "smoothed-stadium":
            return geo.smoothed_stadium(float(raw["domain.half_width"]),
                                        float(raw["domain.straight_half_length"]),
                                        float(raw["domain.corner_radius"]), center, dim)
    except KeyError as exc:
        raise ConfigError(f"missing field {exc.args[0]} for domain.kind={kind}") from None
    except geo.GeometryError as exc:
        raise ConfigError(f"invalid domain: {exc}") from None
    raise ConfigError(f"unknown domain.kind {kind!r}")


def load_config(path, out_dir=None) -> RunConfig:
    """Parse and fully validate a run configuration.

    Expressions are smoke-tested at 10 random domain points, the smoothing
    parameter must be strictly positive, and boundary/initial data must
    agree on the boundary (the max mismatch is reported on rejection).
    """
    raw = _parse_kv(path)
    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")
    domain = _domain_from(raw)

    try:
        boundary = parse_expression(raw.get("data.boundary", "0"))
        initial = parse_expression(raw.get("data.initial", raw.get("data.boundary", "0")))
    except ExpressionError as exc:
        raise ConfigError(f"bad data expression: {exc}") from None

    rng = np.random.default_rng(12345)
    probe = rng.uniform(-1.0, 1.0, (10, domain.dim)) * np.min(domain.half_extents) \
        + np.asarray(domain.center)
    for name, expr in (("data.boundary", boundary), ("data.initial", initial)):
        vals = expr(probe)
        if not np.all(np.isfinite(vals)):
            raise ConfigError(f"{name} evaluates non-finite at sample points")

    try:
        params = FlowParams(
            epsilon=float(raw.get("params.epsilon", "0.05")),
            nu=float(raw.get("params.nu", "0")),
            sigma=float(raw.get("params.sigma", "1")),
            cfl_factor=float(raw.get("params.cfl_factor", "0.25")),
            dt_override=float(raw["params.dt_override"]) if "params.dt_override" in raw else None,
        )
    except OperatorError as exc:
        raise ConfigError(f"invalid params: {exc}") from None

    bpts = geo.boundary_points(domain, 512)
    mismatch = float(np.max(np.abs(boundary(bpts) - initial(bpts))))
    if mismatch > fl.COMPATIBILITY_TOL:
        raise ConfigError(f"data.boundary and data.initial differ by {mismatch:.3e} "
                          f"on the boundary (tolerance {fl.COMPATIBILITY_TOL})")

    cfg = RunConfig(
        experiment=experiment, domain=domain, boundary_expr=boundary,
        initial_expr=initial, params=params,
        spacing=float(raw.get("grid.spacing", "0.03125")),
        horizon=float(raw.get("run.horizon", "1.0")),
        snapshot_times=tuple(float(v) for v in raw.get("run.snapshot_times", "").split()),
        tolerance=float(raw.get("run.tolerance", "1e-6")),
        eps_list=tuple(float(v) for v in raw.get("run.eps_list", "").split()),
        seed=int(raw.get("run.seed", "0")),
        pairs=int(raw.get("run.pairs", "20")),
        probe_budget=int(raw.get("run.probe_budget", "2000")),
        plateau_start=float(raw.get("liouville.plateau_start", "0.25")),
        plateau_value=float(raw.get("liouville.plateau_value", "1.0")),
        plateau_margin=float(raw.get("liouville.plateau_margin", "0.125")),
        out_dir=Path(out_dir) if out_dir else Path(raw.get("run.out_dir", ".")),
        raw=raw,
    )
    return cfg


# -- output writers ---------------------------------------------------------

def write_snapshot(path, grid: geo.Grid, values: np.ndarray) -> int:
    """Raw field dump: magic, dimension count, axis counts, box corners, values.

    Counts are little-endian uint32, corners and node values little-endian
    float64, values in row-major node order.  Returns the byte count.
    """
    lo = np.asarray(grid.origin, dtype="<f8")
    hi = lo + (np.asarray(grid.shape) - 1) * grid.spacing
    blob = (SNAPSHOT_MAGIC
            + np.asarray([grid.dim], dtype="<u4").tobytes()
            + np.asarray(grid.shape, dtype="<u4").tobytes()
            + lo.tobytes() + np.asarray(hi, dtype="<f8").tobytes()
            + np.ascontiguousarray(values, dtype="<f8").tobytes())
    Path(path).write_bytes(blob)
    return len(blob)


def read_snapshot(path):
    """Inverse of write_snapshot: returns (shape, lo_corner, hi_corner, values)."""
    blob = Path(path).read_bytes()
    if blob[:8] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: bad magic {blob[:8]!r}")
    off = 8
    ndim = int(np.frombuffer(blob, "<u4", 1, off)[0])
    off += 4
    shape = tuple(int(c) for c in np.frombuffer(blob, "<u4", ndim, off))
    off += 4 * ndim
    lo = np.frombuffer(blob, "<f8", ndim, off).copy()
    off += 8 * ndim
    hi = np.frombuffer(blob, "<f8", ndim, off).copy()
    off += 8 * ndim
    values = np.frombuffer(blob, "<f8", int(np.prod(shape)), off).reshape(shape).copy()
    return shape, lo, hi, values


def write_series_csv(path, report: fl.FlowReport, params: FlowParams) -> None:
    """Time series in the pinned column order t,sup_u,sup_grad,sup_ut,J,diss,src,resid."""
    trace = vf.energy_series(report, params)
    rows = [CSV_HEADER]
    for i in range(len(report.t)):
        cells = [report.t[i], report.sup_u[i], report.sup_grad[i], report.sup_ut[i],
                 report.energy[i], report.dissipation[i], report.source[i],
                 trace.residual[i]]
        rows.append(",".join(f"{c:.17g}" for c in cells))
    Path(path).write_text("\n".join(rows) + "\n")


def write_summary(path, summary: RunSummary) -> None:
    lines = [f"experiment: {summary.experiment}",
             f"all_passed: {summary.all_passed}"]
    for p in summary.properties:
        lines.append(f"property {p.name}: {'pass' if p.passed else 'FAIL'} "
                     f"(audits: {p.anchor}; tolerance: {p.tolerance:.6g}; "
                     f"measured: {p.measured:.6g})")
    for k in sorted(summary.scalars):
        lines.append(f"{k}: {summary.scalars[k]:.10g}")
    for m in summary.manifest:
        lines.append(f"file: {m}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_outputs(cfg: RunConfig, report: fl.FlowReport, grid: geo.Grid,
                  summary: RunSummary) -> list:
    """Emit series, snapshots and summary into the run directory."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = []
    csv_path = out / "series.csv"
    write_series_csv(csv_path, report, cfg.params)
    manifest.append(str(csv_path))
    for step, _t, values in report.snapshots:
        p = out / f"snapshot_{step:08d}.mcfgrid"
        write_snapshot(p, grid, values)
        manifest.append(str(p))
    summary.manifest = manifest + [str(out / "summary.txt")]
    write_summary(out / "summary.txt", summary)
    return summary.manifest


# -- experiment dispatch ------------------------------------------------------

def _grid_for(cfg: RunConfig) -> geo.Grid:
    return geo.build_grid(cfg.domain, cfg.spacing)


def _ibvp(cfg: RunConfig) -> fl.IBVP:
    return fl.IBVP(cfg.domain, cfg.boundary_expr, cfg.initial_expr)


def _run_flow(cfg: RunConfig) -> RunSummary:
    grid = _grid_for(cfg)
    problem = _ibvp(cfg)
    report = fl.solve_ibvp(problem, grid, cfg.params, cfg.horizon, cfg.snapshot_times)
    checks = []
    h = grid.spacing
    b0 = vf.ut_initial_slice_bound(problem, grid, cfg.params)
    checks.append(PropertyCheck(
        "rate-ceiling", "time-derivative bound from the initial slice",
        b0 + 10 * h, float(report.sup_ut.max()), bool(report.sup_ut.max() <= b0 + 10 * h)))
    if cfg.params.nu == 0.0:
        inside_pts = grid.points[grid.inside]
        bpts = geo.boundary_points(cfg.domain, 512)
        data_max = max(float(np.max(cfg.initial_expr(inside_pts))),
                       float(np.max(cfg.boundary_expr(bpts))))
        data_min = min(float(np.min(cfg.initial_expr(inside_pts))),
                       float(np.min(cfg.boundary_expr(bpts))))
        over = max(float(report.max_u.max()) - data_max,
                   data_min - float(report.min_u.min()), 0.0)
        checks.append(PropertyCheck(
            "max-principle", "solution stays inside the data range", 1e-8,
            over, over <= 1e-8))
    else:
        bound = ba.sup_norm_bound(problem, grid, cfg.params)
        checks.append(PropertyCheck(
            "max-norm-bound", "steady comparison field dominates the flow",
            bound.value, float(report.sup_u.max()),
            bool(report.sup_u.max() <= bound.value) and bound.available))
    trace = vf.energy_series(report, cfg.params)
    summary = RunSummary("flow", checks, {
        "steps": report.steps, "dt": report.dt,
        "max_energy_residual": trace.max_interior_residual,
        "sup_u": float(report.sup_u.max()), "sup_grad": float(report.sup_grad.max()),
        "aborted": float(bool(report.aborted)),
    }, [])
    write_outputs(cfg, report, grid, summary)
    return summary


def _run_steady(cfg: RunConfig) -> RunSummary:
    grid = _grid_for(cfg)
    problem = _ibvp(cfg)
    res = fl.relax_to_steady(problem, grid, cfg.params, cfg.tolerance)
    snaps, times = vf.replicate_steady(res.state.values)
    n_sub = len(vf.viscosity_spot_check(snaps, times, grid, cfg.params, "sub",
                                        cfg.probe_budget))
    n_super = len(vf.viscosity_spot_check(snaps, times, grid, cfg.params, "super",
                                          cfg.probe_budget))
    checks = [
        PropertyCheck("steady-residual", "relaxation reaches the steady equation",
                      cfg.tolerance, res.residual, res.converged),
        PropertyCheck("steady-viscosity-clean",
                      "steady field passes both one-sided differential checks",
                      0.0, float(n_sub + n_super), n_sub + n_super == 0),
    ]
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    snap_path = out / f"steady_{res.steps:08d}.mcfgrid"
    write_snapshot(snap_path, grid, res.state.values)
    summary = RunSummary("steady", checks,
                         {"steps": res.steps, "residual": res.residual},
                         [str(snap_path), str(out / "summary.txt")])
    write_summary(out / "summary.txt", summary)
    return summary


def _run_continuation(cfg: RunConfig) -> RunSummary:
    grid = _grid_for(cfg)
    problem = _ibvp(cfg)
    eps_list = cfg.eps_list or (0.2, 0.1, 0.05)
    table = fl.epsilon_continuation(problem, grid, cfg.params, eps_list, cfg.horizon)
    checks = [PropertyCheck("continuation-cauchy",
                            "terminal fields tighten as the smoothing vanishes",
                            0.0, float(table.sup_diffs[-1]), table.monotone_decreasing)]
    scalars = {f"diff_{i}": d for i, d in enumerate(table.sup_diffs)}
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = RunSummary("continuation", checks, scalars, [str(out / "summary.txt")])
    write_summary(out / "summary.txt", summary)
    return summary


def _run_barrier(cfg: RunConfig) -> RunSummary:
    grid = _grid_for(cfg)
    h = grid.spacing
    upper = ba.build_upper_barrier(cfg.domain, grid, cfg.boundary_expr,
                                   cfg.initial_expr, cfg.params)
    lower = ba.build_lower_barrier(cfg.domain, grid, cfg.boundary_expr,
                                   cfg.initial_expr, cfg.params)
    r_up = ba.barrier_supersolution_residual(upper, cfg.domain, grid,
                                             cfg.boundary_expr, cfg.params)
    r_lo = ba.barrier_supersolution_residual(lower, cfg.domain, grid,
                                             cfg.boundary_expr, cfg.params)
    problem = _ibvp(cfg)
    report = fl.solve_ibvp(problem, grid, cfg.params, cfg.horizon,
                           snapshot_times=np.linspace(0, cfg.horizon, 9))
    worst = -np.inf
    hvals = np.full(grid.shape, np.nan)
    hvals[grid.inside] = cfg.boundary_expr(grid.points[grid.inside])
    for _s, _t, values in report.snapshots:
        gap = (values - hvals - upper.psi)[upper.collar]
        worst = max(worst, float(np.max(gap)))
    checks = [
        PropertyCheck("barrier-upper-certified", "distance barrier is a supersolution",
                      0.0, r_up, r_up >= 0.0),
        PropertyCheck("barrier-lower-certified", "mirrored barrier is a subsolution",
                      0.0, r_lo, r_lo >= 0.0),
        PropertyCheck("collar-domination", "flow stays under boundary data plus barrier",
                      10 * h, worst, worst <= 10 * h),
    ]
    summary = RunSummary("barrier", checks, {
        "upper_slope": upper.slope, "lower_slope": lower.slope,
        "collar_width": upper.collar_width, "data_lipschitz": upper.data_lipschitz,
    }, [])
    write_outputs(cfg, report, grid, summary)
    return summary


def _run_comparison(cfg: RunConfig) -> RunSummary:
    grid = _grid_for(cfg)
    worst = 0.0
    for k in range(cfg.pairs):
        low, high = ba.random_ordered_pair(cfg.domain, cfg.seed + k)
        rep = ba.comparison_experiment(low, high, grid, cfg.params, cfg.horizon)
        worst = max(worst, rep.max_violation)
    checks = [PropertyCheck("ordering-preserved", "ordered data evolve ordered",
                            1e-10, worst, worst <= 1e-10)]
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = RunSummary("comparison", checks,
                         {"pairs": cfg.pairs, "max_violation": worst},
                         [str(out / "summary.txt")])
    write_summary(out / "summary.txt", summary)
    return summary


def _run_viscosity(cfg: RunConfig) -> RunSummary:
    grid = _grid_for(cfg)
    problem = _ibvp(cfg)
    dt = cfg.horizon / 4
    times = (cfg.horizon - 2 * dt, cfg.horizon - dt, cfg.horizon)
    report = fl.solve_ibvp(problem, grid, cfg.params, cfg.horizon, snapshot_times=times)
    snaps = [s[2] for s in report.snapshots]
    stimes = [s[1] for s in report.snapshots]
    violations = []
    for mode in ("sub", "super"):
        violations += vf.viscosity_spot_check(snaps, stimes, grid, cfg.params, mode,
                                              cfg.probe_budget)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    vpath = out / "violations.csv"
    rows = ["t,location,branch,margin"]
    for v in violations:
        rows.append(f"{v.time:.17g},\"{v.index}\",{v.branch},{v.margin:.17g}")
    vpath.write_text("\n".join(rows) + "\n")
    checks = [PropertyCheck("viscosity-clean", "no one-sided differential violations",
                            10 * grid.spacing, float(len(violations)),
                            len(violations) == 0)]
    summary = RunSummary("viscosity", checks, {"violations": float(len(violations))},
                         [str(vpath), str(out / "summary.txt")])
    write_summary(out / "summary.txt", summary)
    return summary


def _run_liouville(cfg: RunConfig) -> RunSummary:
    grid = _grid_for(cfg)
    problem = lv.CylinderProblem(
        domain=cfg.domain, initial_data=cfg.initial_expr,
        plateau_start=cfg.plateau_start, plateau_value=cfg.plateau_value,
        plateau_margin=cfg.plateau_margin)
    report = lv.flatness_and_sandwich(problem, grid, cfg.params, cfg.horizon)
    bound = report.flatness_bound(cfg.params, grid.spacing, problem.data_lipschitz)
    env = report.envelopes
    upper_field = np.where(grid.inside, env.upper_value, np.nan)
    lower_field = np.where(grid.inside,
                           env.lower_profile(grid.points[..., -1].ravel()).reshape(grid.shape),
                           np.nan)
    snaps_u, times_u = vf.replicate_steady(upper_field)
    snaps_l, times_l = vf.replicate_steady(lower_field)
    n_super = len(vf.viscosity_spot_check(snaps_u, times_u, grid, cfg.params, "super",
                                          cfg.probe_budget))
    n_sub = len(vf.viscosity_spot_check(snaps_l, times_l, grid, cfg.params, "sub",
                                        cfg.probe_budget))
    checks = [
        PropertyCheck("flatness-bound", "plateau deviation under drift plus grid slack",
                      bound, report.sup_flatness, report.sup_flatness <= bound),
        PropertyCheck("envelope-upper-super", "upper envelope passes the super check",
                      0.0, float(n_super), n_super == 0),
        PropertyCheck("envelope-lower-sub", "lower envelope passes the sub check",
                      0.0, float(n_sub), n_sub == 0),
    ]
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cpath = out / "flatness.csv"
    rows = ["t,flatness,lower_violation,upper_violation"]
    for i in range(len(report.t)):
        rows.append(f"{report.t[i]:.17g},{report.flatness[i]:.17g},"
                    f"{report.lower_violation[i]:.17g},{report.upper_violation[i]:.17g}")
    cpath.write_text("\n".join(rows) + "\n")
    summary = RunSummary("liouville", checks, {
        "sup_flatness": report.sup_flatness, "bound": bound,
        "max_monotone_violation": float(report.monotone_violation.max()),
    }, [str(cpath), str(out / "summary.txt")])
    write_summary(out / "summary.txt", summary)
    return summary


_RUNNERS = {
    "flow": _run_flow,
    "steady": _run_steady,
    "continuation": _run_continuation,
    "barrier": _run_barrier,
    "comparison": _run_comparison,
    "viscosity": _run_viscosity,
    "liouville": _run_liouville,
}


def run(cfg: RunConfig) -> RunSummary:
    """Dispatch a validated config to its experiment runner."""
    return _RUNNERS[cfg.experiment](cfg)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mcflow",
        description="Level-set curvature flow solver and estimate certifier")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run a {name} experiment")
        p.add_argument("--config", action="append", required=True,
                       help="config file (repeatable)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--batch", type=int, default=1,
                       help="max concurrent configs")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    args = parser.parse_args(argv)

    configs = []
    for i, path in enumerate(args.config):
        try:
            out = None
            if args.out:
                out = args.out if len(args.config) == 1 else str(Path(args.out) / f"run{i:03d}")
            cfg = load_config(path, out_dir=out)
        except (ConfigError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        if cfg.experiment != args.command:
            print(f"error: config {path} declares experiment={cfg.experiment}, "
                  f"but the {args.command} subcommand was invoked", file=sys.stderr)
            return 2
        if args.seed is not None:
            cfg.seed = args.seed
        configs.append(cfg)

    if args.batch > 1 and len(configs) > 1:
        with ThreadPoolExecutor(max_workers=args.batch) as pool:
            summaries = list(pool.map(run, configs))
    else:
        summaries = [run(c) for c in configs]

    ok = True
    for cfg, summary in zip(configs, summaries):
        for p in summary.properties:
            status = "pass" if p.passed else "FAIL"
            print(f"[{summary.experiment}] {p.name}: {status} "
                  f"(measured {p.measured:.6g}, tolerance {p.tolerance:.6g})")
        ok &= summary.all_passed
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
