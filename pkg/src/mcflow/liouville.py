"""Flatness propagation for monotone data on a domain with a cylindrical
section: plateau preservation, envelope construction and the sandwich
comparison.

The exact flatness statement belongs to the vanishing-smoothing limit; the
regularized flow drifts flat regions at rate epsilon*nu and leaks into the
plateau near the data corner, so the quantitative target used here is

    F(t) = sup over the margin-deep plateau of |u - plateau_value|
         <= epsilon * |nu| * t + 10 * spacing * Lip(data).
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import DomainSpec, Grid, smoothed_stadium
from .flow import IBVP
from .operator import (FlowParams, Workspace, boundary_values, init_state,
                       regularized_rhs, euler_update, stable_dt)

ENVELOPE_SAMPLES = 1000


class EnvelopeError(ValueError):
    """No admissible envelope for the given data."""


@dataclass
class CylinderProblem:
    """Monotone axial data on a smoothed stadium.

    The initial data must be non-decreasing in the last coordinate and
    exactly equal to plateau_value from plateau_start on; the boundary data
    is its trace.  plateau_margin is the depth past plateau_start where
    flatness is measured (and where the envelopes level off).
    """

    domain: DomainSpec
    initial_data: Callable
    plateau_start: float          # axial coordinate where the data plateau begins
    plateau_value: float
    plateau_margin: float         # envelope shift, > 0
    data_lipschitz: float = 0.0

    def __post_init__(self):
        if self.domain.kind != "smoothed-stadium":
            raise ValueError("cylinder problems live on smoothed stadiums")
        if self.plateau_margin <= 0:
            raise EnvelopeError("plateau margin must be positive")
        straight = self.domain.straight_half_length - self.domain.corner_radius
        if self.plateau_start + self.plateau_margin > straight:
            raise EnvelopeError(
                f"plateau_start + margin = {self.plateau_start + self.plateau_margin} "
                f"leaves the straight section (|axial| <= {straight})")
        axis = np.asarray(self.domain.center)[-1]
        taus = axis + np.linspace(-self.domain.straight_half_length,
                                  self.domain.straight_half_length, 200)
        prof = self.axial_profile(taus)
        if np.min(np.diff(prof)) < -1e-10:
            raise ValueError("initial data is not non-decreasing along the axis")
        plateau = taus >= self.plateau_start
        if plateau.any() and np.max(np.abs(prof[plateau] - self.plateau_value)) > 1e-12:
            raise ValueError("initial data does not sit at the plateau value past plateau_start")
        if self.data_lipschitz == 0.0:
            self.data_lipschitz = float(np.max(np.abs(np.diff(prof) / np.diff(taus))))

    def axial_profile(self, taus: np.ndarray) -> np.ndarray:
        """Data along the axis at the transverse center."""
        center = np.asarray(self.domain.center, dtype=float)
        pts = np.tile(center, (len(taus), 1))
        pts[:, -1] = taus
        return self.initial_data(pts)

    def ibvp(self) -> IBVP:
        return IBVP(self.domain, self.initial_data, self.initial_data)


def ramp_problem(plateau_value: float = 1.0, ramp_width: float = 0.5,
                 half_width: float = 0.5, straight_half_length: float = 1.5,
                 corner_radius: float = 0.25, plateau_start: float = 0.25,
                 plateau_margin: float = 0.125, dim: int = 2) -> CylinderProblem:
    """The standard monotone ramp: 0 below, linear rise, plateau above."""
    dom = smoothed_stadium(half_width, straight_half_length, corner_radius, dim=dim)
    lam, w, m = plateau_value, ramp_width, plateau_start

    def g(pts):
        tau = pts[:, -1]
        return np.minimum(lam, np.maximum(0.0, lam * (tau - m + w) / w))

    return CylinderProblem(domain=dom, initial_data=g, plateau_start=m,
                           plateau_value=lam, plateau_margin=plateau_margin)


@dataclass
class EnvelopePair:
    """One-dimensional axial profiles bracketing the data, level past the margin."""

    lower: Callable               # g-(tau), non-decreasing, C2, <= axial max of data
    upper_value: float            # g+ is the constant plateau value
    margin: float
    ramp_steepness: float

    def lower_profile(self, taus: np.ndarray) -> np.ndarray:
        return self.lower(np.asarray(taus, dtype=float))

    def upper_profile(self, taus: np.ndarray, shift: float = 0.0) -> np.ndarray:
        return np.full(np.shape(taus), self.upper_value)


def _smoothed_ramp(lam: float, corner: float, steep: float, width: float):
    """Non-decreasing C2 profile: line of slope lam/steep into a level at lam.

    The corner at (corner, lam) is rounded over [corner - width, corner] by
    a quintic blend, which matches the line and the plateau to second
    order at both ends.
    """

    def profile(tau):
        tau = np.asarray(tau, dtype=float)
        line = lam * (tau - corner + steep) / steep
        s = np.clip((tau - (corner - width)) / width, 0.0, 1.0)
        blend = s ** 3 * (10.0 - 15.0 * s + 6.0 * s ** 2)
        out = line + (lam - line) * blend
        return np.where(tau >= corner, lam, out)

    return profile


def build_envelopes(problem: CylinderProblem) -> EnvelopePair:
    """Bracket the data's axial maximum profile per the level-set sandwich.

    The upper envelope is the constant plateau value; the lower one is a
    steep smoothed ramp reaching the plateau exactly at
    plateau_start + plateau_margin, with the steepness shrunk until it
    sits under the data profile at sampled resolution.
    """
    lam = problem.plateau_value
    m = problem.plateau_start
    delta = problem.plateau_margin
    dom = problem.domain
    axis_lo = np.asarray(dom.center)[-1] - dom.straight_half_length
    taus = np.linspace(axis_lo, m + delta, ENVELOPE_SAMPLES)
    data_profile = _axial_max_profile(problem, taus)

    if np.min(data_profile) >= lam - 1e-12:
        flat = lambda tau: np.full(np.shape(tau), lam)
        return EnvelopePair(lower=flat, upper_value=lam, margin=delta, ramp_steepness=np.inf)

    corner = m + delta
    width = delta / 4.0
    steep = delta / 2.0
    for _ in range(60):
        prof = _smoothed_ramp(lam, corner, steep, width)
        if np.all(prof(taus) <= data_profile + 1e-12):
            return EnvelopePair(lower=prof, upper_value=lam, margin=delta,
                                ramp_steepness=steep)
        steep *= 0.5
    gap = prof(taus) - data_profile
    bad = taus[int(np.argmax(gap))]
    raise EnvelopeError(f"no ramp steepness dominates the data profile; "
                        f"worst overshoot at axial coordinate {bad:.4f}")


def _axial_max_profile(problem: CylinderProblem, taus: np.ndarray) -> np.ndarray:
    """max over the cross-section of the data, per axial slice (sampled)."""
    dom = problem.domain
    center = np.asarray(dom.center, dtype=float)
    n_cross = 41
    if dom.dim == 2:
        xs = center[0] + np.linspace(-dom.half_width, dom.half_width, n_cross)
        cross = xs[:, None]
    else:
        xs = center[0] + np.linspace(-dom.half_width, dom.half_width, n_cross)
        ys = center[1] + np.linspace(-dom.half_width, dom.half_width, n_cross)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        cross = np.stack([gx.ravel(), gy.ravel()], axis=1)
    out = np.empty(len(taus))
    for i, tau in enumerate(taus):
        pts = np.concatenate([cross, np.full((len(cross), 1), tau)], axis=1)
        out[i] = np.max(problem.initial_data(pts))
    return out


@dataclass
class LiouvilleReport:
    t: np.ndarray
    flatness: np.ndarray            # sup over the deep plateau of |u - plateau_value|
    lower_violation: np.ndarray     # max (g-(tau) - u)+ per step
    upper_violation: np.ndarray     # max (u - g+(tau + nu t) - eps*nu*t)+ per step
    monotone_violation: np.ndarray  # max axial ordering defect per step
    sup_flatness: float = 0.0
    steps: int = 0
    dt: float = 0.0
    envelopes: EnvelopePair | None = None

    def flatness_bound(self, params: FlowParams, spacing: float, lip: float) -> float:
        return params.epsilon * abs(params.nu) * float(self.t[-1]) + 10.0 * spacing * lip


def flatness_and_sandwich(problem: CylinderProblem, grid: Grid, params: FlowParams,
                          horizon: float) -> LiouvilleReport:
    """Evolve the monotone problem and track flatness and the sandwich.

    The upper sandwich includes the explicit flat-region drift
    epsilon*nu*t of the regularized operator; the lower violation is
    reported raw (the smoothing leak shows up there, quantified by the
    flatness series).
    """
    if params.nu < 0:
        raise ValueError("flatness propagation needs nu >= 0")
    env = build_envelopes(problem)
    ibvp = problem.ibvp()
    bvals = boundary_values(grid, ibvp.boundary_data)
    ws = Workspace(grid)
    state = init_state(grid, ibvp.initial_data, bvals)
    dt = stable_dt(params, grid)
    n_steps = max(int(np.floor(horizon / dt + 1e-12)), 0)

    tau = grid.points[..., -1]
    inside = grid.inside
    deep = inside & (tau >= problem.plateau_start + problem.plateau_margin)
    glow = env.lower_profile(tau.ravel()).reshape(grid.shape)
    lam = problem.plateau_value

    axis = grid.dim - 1
    shifted_inside = np.roll(inside, -1, axis=axis)
    pair = inside & shifted_inside
    edge = np.zeros(grid.shape, bool)
    sl = [slice(None)] * grid.dim
    sl[axis] = slice(0, -1)
    edge[tuple(sl)] = True
    pair &= edge

    rows = {k: [] for k in ("t", "F", "lo", "hi", "mono")}

    def record(st):
        u = st.values
        rows["t"].append(st.time)
        rows["F"].append(float(np.max(np.abs(u[deep] - lam))) if deep.any() else 0.0)
        rows["lo"].append(float(np.max(np.maximum(glow[inside] - u[inside], 0.0))))
        drift = params.epsilon * params.nu * st.time
        rows["hi"].append(float(np.max(np.maximum(u[inside] - lam - drift, 0.0))))
        nxt = np.roll(u, -1, axis=axis)
        rows["mono"].append(float(np.max(np.maximum(u[pair] - nxt[pair], 0.0))) if pair.any() else 0.0)

    record(state)
    for k in range(1, n_steps + 1):
        rate = regularized_rhs(state.values, grid, params, bvals, ws)
        state = euler_update(state, rate, dt, grid, bvals, ws, k)
        record(state)

    flat = np.array(rows["F"])
    return LiouvilleReport(t=np.array(rows["t"]), flatness=flat,
                           lower_violation=np.array(rows["lo"]),
                           upper_violation=np.array(rows["hi"]),
                           monotone_violation=np.array(rows["mono"]),
                           sup_flatness=float(flat.max()), steps=n_steps, dt=dt,
                           envelopes=env)
