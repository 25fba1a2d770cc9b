"""Initial-boundary value problem driver, steady-state relaxation and
continuation in the smoothing parameter.

One run is sequential in time; independent runs share no mutable state.
Per-step diagnostics are reduced in a fixed order so reports are
reproducible bit for bit.
"""

import time as _time
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from .geometry import Grid, DomainSpec, boundary_points, admissible_nu_interval
from .operator import (FlowParams, FieldState, Workspace, boundary_values,
                       init_state, regularized_rhs, euler_update, stable_dt,
                       dt_exceeds_stability, BlowUpError)

COMPATIBILITY_TOL = 1e-10
DEFAULT_STEP_BUDGET = 10_000_000


class IncompatibleDataError(ValueError):
    """Boundary and initial data disagree on the boundary."""


@dataclass
class IBVP:
    """Problem data: domain, boundary values h and initial values g.

    Both data functions take (N, dim) point arrays and must agree on the
    boundary to within 1e-10; the flow's a priori bounds require it, so a
    mismatch is an error rather than a warning.
    """

    domain: DomainSpec
    boundary_data: Callable
    initial_data: Callable
    check_samples: int = 512

    def __post_init__(self):
        pts = boundary_points(self.domain, self.check_samples)
        gap = np.max(np.abs(self.boundary_data(pts) - self.initial_data(pts)))
        if gap > COMPATIBILITY_TOL:
            raise IncompatibleDataError(
                f"boundary and initial data differ by {gap:.3e} on the boundary "
                f"(tolerance {COMPATIBILITY_TOL})")


@dataclass
class FlowReport:
    """Per-step series and snapshots of one evolution run.

    u_t is recorded as the applied rate (what the scheme integrates), at
    interior nodes only.  Integrals use the theta-weighted node quadrature.
    """

    t: np.ndarray
    sup_u: np.ndarray
    min_u: np.ndarray
    max_u: np.ndarray
    sup_grad: np.ndarray
    sup_grad_interior: np.ndarray
    sup_grad_ring: np.ndarray
    sup_ut: np.ndarray
    energy: np.ndarray            # J(t) = integral of sqrt(|grad u|^2 + eps^2)
    dissipation: np.ndarray       # integral of u_t^2 / sqrt(|grad u|^2 + eps^2)
    source: np.ndarray            # nu * integral of u_t
    ut_sq_integral: np.ndarray    # integral of u_t^2
    snapshots: list = dc_field(default_factory=list)   # (step, time, values)
    steps: int = 0
    dt: float = 0.0
    wall_clock: float = 0.0
    aborted: str | None = None
    warnings: list = dc_field(default_factory=list)

    @property
    def grad_max_t0(self) -> float:
        return float(self.sup_grad[0])

    def series_matrix(self) -> np.ndarray:
        """Columns in the canonical output order, residual excluded."""
        return np.column_stack([self.t, self.sup_u, self.sup_grad, self.sup_ut,
                                self.energy, self.dissipation, self.source])


def _collect_warnings(problem: IBVP, grid: Grid, params: FlowParams) -> list:
    warns = []
    lo, hi = admissible_nu_interval(problem.domain)
    if not lo < params.nu < hi:
        warns.append(f"nu={params.nu} outside the admissible interval ({lo:.6g}, {hi:.6g})")
    if dt_exceeds_stability(params, grid):
        warns.append(f"dt_override={params.dt_override} exceeds the stability bound "
                     f"{0.5 * grid.spacing ** 2 / grid.dim:.6g}")
    if grid.coarse_warning:
        warns.append("grid spacing above an eighth of the smallest shape parameter")
    return warns


class _Recorder:
    """Accumulates per-step diagnostics from the live workspace."""

    def __init__(self, grid: Grid, params: FlowParams, ws: Workspace):
        self.grid = grid
        self.eps2 = params.epsilon ** 2
        self.nu = params.nu
        self.ws = ws
        self.rows = {k: [] for k in ("t", "sup_u", "min_u", "max_u", "sup_grad",
                                     "sup_gi", "sup_gr", "sup_ut", "J", "D", "S", "Q")}
        self.wvol = grid.qweight * grid.spacing ** grid.dim
        self.inside = grid.inside
        self.interior = grid.interior
        self.ring = grid.near_boundary
        self.has_ring = bool(self.ring.any())

    def record(self, state: FieldState, rate: np.ndarray):
        # ws.grads holds the gradient of exactly this state (same rhs call)
        g2 = np.zeros(self.grid.shape)
        for k in range(self.grid.dim):
            g2 += self.ws.grads[k] ** 2
        with np.errstate(invalid="ignore"):
            gmag = np.sqrt(g2)
            s = np.sqrt(g2 + self.eps2)
        r = np.where(self.interior, rate, 0.0)
        rows = self.rows
        rows["t"].append(state.time)
        uin = state.values[self.inside]
        rows["sup_u"].append(float(np.max(np.abs(uin))))
        rows["min_u"].append(float(np.min(uin)))
        rows["max_u"].append(float(np.max(uin)))
        rows["sup_grad"].append(float(np.max(gmag[self.inside])))
        rows["sup_gi"].append(float(np.max(gmag[self.interior])) if self.interior.any() else 0.0)
        rows["sup_gr"].append(float(np.max(gmag[self.ring])) if self.has_ring else 0.0)
        rows["sup_ut"].append(float(np.max(np.abs(r[self.interior]))) if self.interior.any() else 0.0)
        svals = np.where(self.inside, s, 0.0)
        rows["J"].append(float(np.sum(svals * self.wvol)))
        with np.errstate(invalid="ignore", divide="ignore"):
            d = np.where(self.inside, r * r / s, 0.0)
        rows["D"].append(float(np.sum(d * self.wvol)))
        rows["S"].append(self.nu * float(np.sum(r * self.wvol)))
        rows["Q"].append(float(np.sum(r * r * self.wvol)))


def solve_ibvp(problem: IBVP, grid: Grid, params: FlowParams, horizon: float,
               snapshot_times: Sequence[float] = ()) -> FlowReport:
    """Evolve the problem to the horizon, recording diagnostics each step.

    Snapshot times are rounded down to the nearest completed step.  A
    non-finite update aborts the run and returns the partial report with
    the abort reason set.
    """
    t0 = _time.perf_counter()
    bvals = boundary_values(grid, problem.boundary_data)
    ws = Workspace(grid)
    state = init_state(grid, problem.initial_data, bvals)
    dt = stable_dt(params, grid)
    n_steps = max(int(np.floor(horizon / dt + 1e-12)), 0)
    snap_steps = sorted({min(int(np.floor(ts / dt + 1e-12)), n_steps) for ts in snapshot_times})

    rec = _Recorder(grid, params, ws)
    snapshots = []
    aborted = None

    rate = regularized_rhs(state.values, grid, params, bvals, ws)
    rec.record(state, rate)
    if 0 in snap_steps:
        snapshots.append((0, state.time, state.values.copy()))

    k = 0
    for k in range(1, n_steps + 1):
        try:
            state = euler_update(state, rate, dt, grid, bvals, ws, step_index=k)
        except BlowUpError as exc:
            aborted = str(exc)
            k -= 1
            break
        rate = regularized_rhs(state.values, grid, params, bvals, ws)
        rec.record(state, rate)
        if k in snap_steps:
            snapshots.append((k, state.time, state.values.copy()))

    rows = rec.rows
    return FlowReport(
        t=np.array(rows["t"]), sup_u=np.array(rows["sup_u"]),
        min_u=np.array(rows["min_u"]), max_u=np.array(rows["max_u"]),
        sup_grad=np.array(rows["sup_grad"]),
        sup_grad_interior=np.array(rows["sup_gi"]),
        sup_grad_ring=np.array(rows["sup_gr"]),
        sup_ut=np.array(rows["sup_ut"]),
        energy=np.array(rows["J"]), dissipation=np.array(rows["D"]),
        source=np.array(rows["S"]), ut_sq_integral=np.array(rows["Q"]),
        snapshots=snapshots, steps=k, dt=dt,
        wall_clock=_time.perf_counter() - t0, aborted=aborted,
        warnings=_collect_warnings(problem, grid, params),
    )


@dataclass
class SteadyResult:
    state: FieldState
    steps: int
    converged: bool
    residual: float
    warnings: list = dc_field(default_factory=list)


def relax_to_steady(problem: IBVP, grid: Grid, params: FlowParams, tol: float,
                    max_steps: int = DEFAULT_STEP_BUDGET) -> SteadyResult:
    """Step until sup|rate| < tol; the terminal field is the steady candidate.

    The budget guards against the genuinely degenerate regimes; exhaustion
    returns the best field with converged=False.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    bvals = boundary_values(grid, problem.boundary_data)
    ws = Workspace(grid)
    state = init_state(grid, problem.initial_data, bvals)
    dt = stable_dt(params, grid)
    idx = ws.interior_flat
    rate = regularized_rhs(state.values, grid, params, bvals, ws)
    res = float(np.max(np.abs(rate.ravel()[idx]))) if len(idx) else 0.0
    steps = 0
    while res >= tol and steps < max_steps:
        state = euler_update(state, rate, dt, grid, bvals, ws, step_index=steps + 1)
        rate = regularized_rhs(state.values, grid, params, bvals, ws)
        res = float(np.max(np.abs(rate.ravel()[idx])))
        steps += 1
    return SteadyResult(state=state, steps=steps, converged=res < tol, residual=res,
                        warnings=_collect_warnings(problem, grid, params))


@dataclass
class ContinuationTable:
    epsilons: tuple
    sup_diffs: tuple            # sup-norm differences of consecutive terminal fields
    monotone_decreasing: bool


def epsilon_continuation(problem: IBVP, grid: Grid, params: FlowParams,
                         eps_list: Sequence[float], horizon: float) -> ContinuationTable:
    """Terminal-field Cauchy differences along a decreasing smoothing ladder.

    Monotonicity of the differences is reported, not enforced; any failing
    run aborts the table at that row.
    """
    eps_list = tuple(float(e) for e in eps_list)
    if len(eps_list) < 3:
        raise ValueError("continuation needs at least 3 smoothing values")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("smoothing values must be strictly decreasing")
    fields = []
    for eps in eps_list:
        p = FlowParams(epsilon=eps, nu=params.nu, sigma=params.sigma,
                       cfl_factor=params.cfl_factor, dt_override=params.dt_override)
        rep = solve_ibvp(problem, grid, p, horizon, snapshot_times=(horizon,))
        if rep.aborted:
            raise BlowUpError(f"continuation row eps={eps} aborted: {rep.aborted}")
        fields.append(rep.snapshots[-1][2])
    inside = grid.inside
    diffs = tuple(float(np.max(np.abs(a[inside] - b[inside])))
                  for a, b in zip(fields, fields[1:]))
    mono = all(d1 > d2 for d1, d2 in zip(diffs, diffs[1:]))
    return ContinuationTable(epsilons=eps_list, sup_diffs=diffs, monotone_decreasing=mono)
