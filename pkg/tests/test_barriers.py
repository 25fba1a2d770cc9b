import numpy as np
import pytest

import mcflow as mc
from mcflow import barriers as ba
from mcflow import geometry as geo

from helpers import zero, linear_x1, fd_gradient


def test_zero_data_barrier_slope_floor(unit_ball, grid32):
    params = mc.FlowParams(epsilon=0.05, nu=0.0)
    bar = ba.build_upper_barrier(unit_ball, grid32, zero, zero, params)
    assert bar.data_lipschitz == 0.0
    assert bar.slope >= 1.0
    assert bar.collar_width == pytest.approx(0.5)


def test_zero_data_residual_is_collar_curvature(unit_ball, grid32):
    # with unit slope the margin is the distance Laplacian, n/r on the ball,
    # minimized at the boundary side of the collar
    params = mc.FlowParams(epsilon=0.05, nu=0.0)
    bar = ba.Barrier(sign=1, slope=1.0, collar_width=0.5, data_lipschitz=0.0,
                     psi=None, collar=_collar(unit_ball, grid32, 0.5))
    res = ba.barrier_supersolution_residual(bar, unit_ball, grid32, zero, params)
    assert 0.98 <= res <= 1.1


def _collar(domain, grid, rho):
    d = geo.signed_distance(domain, grid.points.reshape(-1, grid.dim)).reshape(grid.shape)
    return grid.inside & (d < rho)


def test_linear_data_barrier_certified(unit_ball, grid32):
    params = mc.FlowParams(epsilon=0.05, nu=0.0)
    bar = ba.build_upper_barrier(unit_ball, grid32, linear_x1, linear_x1, params)
    assert bar.data_lipschitz <= 2.0
    assert np.isfinite(bar.slope)
    assert bar.collar_width == pytest.approx(0.5)
    res = ba.barrier_supersolution_residual(bar, unit_ball, grid32, linear_x1, params)
    assert res >= 0.0


def test_weak_slope_fails_certification(unit_ball, grid32):
    # with a driving term, a tiny slope cannot beat the source: the
    # certification margin goes negative, so the slope threshold is active
    params = mc.FlowParams(epsilon=0.05, nu=0.3)
    weak = ba.Barrier(sign=1, slope=1e-6, collar_width=0.5, data_lipschitz=0.0,
                      psi=None, collar=_collar(unit_ball, grid32, 0.5))
    res = ba.barrier_supersolution_residual(weak, unit_ball, grid32, linear_x1, params)
    assert res < 0.0


def test_flat_boundary_domain_rejected(unit_ball):
    st = mc.smoothed_stadium(0.5, 1.5, 0.25)
    grid = mc.build_grid(st, 1 / 16)
    with pytest.raises(ba.BarrierError):
        ba.build_upper_barrier(st, grid, zero, zero, mc.FlowParams(epsilon=0.05))


def test_speed_beyond_curvature_rejected(unit_ball, grid16):
    # n*H0 = 1 on the unit disk
    with pytest.raises(ba.BarrierError):
        ba.build_upper_barrier(unit_ball, grid16, zero, zero,
                               mc.FlowParams(epsilon=0.05, nu=1.1))


def test_intro_bound_flagged_not_rejected(unit_ball, grid16):
    # n*H0/(n+1) = 0.5 on the unit disk: 0.6 is flagged but buildable
    params = mc.FlowParams(epsilon=0.05, nu=0.6)
    bar = ba.build_upper_barrier(unit_ball, grid16, zero, zero, params)
    assert bar.intro_bound_violated
    res = ba.barrier_supersolution_residual(bar, unit_ball, grid16, zero, params)
    assert res >= 0.0


def test_barrier_vanishes_on_boundary(unit_ball, grid32):
    params = mc.FlowParams(epsilon=0.05, nu=0.0)
    bar = ba.build_upper_barrier(unit_ball, grid32, linear_x1, linear_x1, params)
    bpts = geo.boundary_points(unit_ball, 256)
    psi_b = bar.slope * geo.signed_distance(unit_ball, bpts)
    assert np.max(np.abs(psi_b)) < 1e-10


def test_barrier_dominates_shifted_data_on_collar(unit_ball, grid32):
    params = mc.FlowParams(epsilon=0.05, nu=0.0)
    g = lambda p: p[:, 0] + 0.3 * (1 - np.sum(p ** 2, axis=1))
    bar = ba.build_upper_barrier(unit_ball, grid32, linear_x1, g, params)
    w = g(grid32.points[bar.collar]) - linear_x1(grid32.points[bar.collar])
    assert np.max(w - bar.psi[bar.collar]) <= 0.0


def test_distance_hessian_radial_identity(unit_ball, grid32):
    # sum_i d_i d_ij vanishes for a true distance function
    h = grid32.spacing
    d_fn = lambda q: geo.signed_distance(unit_ball, q)
    collar = _collar(unit_ball, grid32, 0.5)
    pts = grid32.points[collar]
    grad = fd_gradient(d_fn, pts, step=h)
    worst = 0.0
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        dgrad = (fd_gradient(d_fn, pts + e, step=h) - fd_gradient(d_fn, pts - e, step=h)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(np.sum(grad * dgrad, axis=1)))))
    assert worst <= 10 * h ** 2


def test_lower_barrier_mirrors_upper(unit_ball, grid32):
    params = mc.FlowParams(epsilon=0.05, nu=0.3)
    lo = ba.build_lower_barrier(unit_ball, grid32, linear_x1, linear_x1, params)
    assert lo.sign == -1
    assert np.nanmax(lo.psi) <= 0.0
    res = ba.barrier_supersolution_residual(lo, unit_ball, grid32, linear_x1, params)
    assert res >= 0.0


def test_sup_norm_bound_nu_zero_is_data_plus_one(unit_ball, grid16):
    prob = mc.IBVP(unit_ball, linear_x1, linear_x1)
    sb = ba.sup_norm_bound(prob, grid16, mc.FlowParams(epsilon=0.05, nu=0.0))
    assert sb.available
    assert sb.steady_max == pytest.approx(1.0, abs=1e-12)
    assert sb.value == pytest.approx(2.0, abs=1e-12)


def test_sup_norm_bound_kappa_tracks_data(unit_ball, grid16):
    prob = mc.IBVP(unit_ball, lambda p: 2 * p[:, 0], lambda p: 2 * p[:, 0])
    sb = ba.sup_norm_bound(prob, grid16, mc.FlowParams(epsilon=0.05, nu=0.0))
    assert sb.data_shift == pytest.approx(2.0, abs=1e-12)
    assert sb.value == pytest.approx(3.0, abs=1e-12)


def test_sup_norm_bound_with_drift(unit_ball, grid16):
    prob = mc.IBVP(unit_ball, linear_x1, linear_x1)
    sb = ba.sup_norm_bound(prob, grid16, mc.FlowParams(epsilon=0.05, nu=0.3))
    assert sb.available
    # steady comparison field stays near 1: value 1 + O(eps*nu)
    assert 1.0 <= sb.steady_max <= 1.05
    assert sb.value == pytest.approx(1.0 + sb.steady_max)


def test_comparison_identical_problems_zero_violation(unit_ball, grid16):
    prob = mc.IBVP(unit_ball, linear_x1, linear_x1)
    rep = ba.comparison_experiment(prob, prob, grid16,
                                   mc.FlowParams(epsilon=0.1), horizon=0.02)
    assert rep.max_violation == 0.0


def test_comparison_constant_shift_exact(unit_ball, grid16):
    lo = mc.IBVP(unit_ball, linear_x1, linear_x1)
    hi = mc.IBVP(unit_ball, lambda p: p[:, 0] + 1.0, lambda p: p[:, 0] + 1.0)
    rep = ba.comparison_experiment(lo, hi, grid16, mc.FlowParams(epsilon=0.1),
                                   horizon=0.05)
    assert rep.max_violation == 0.0


def test_comparison_interior_bump_ordering(unit_ball, grid16):
    lo = mc.IBVP(unit_ball, linear_x1, linear_x1)
    hi = mc.IBVP(unit_ball, linear_x1,
                 lambda p: p[:, 0] + 0.5 * (1 - np.sum(p ** 2, axis=1)))
    rep = ba.comparison_experiment(lo, hi, grid16, mc.FlowParams(epsilon=0.05),
                                   horizon=0.1)
    assert rep.max_violation <= 1e-10


def test_comparison_rejects_unordered_data(unit_ball, grid16):
    lo = mc.IBVP(unit_ball, linear_x1, linear_x1)
    hi = mc.IBVP(unit_ball, lambda p: p[:, 0] - 0.5, lambda p: p[:, 0] - 0.5)
    with pytest.raises(ValueError):
        ba.comparison_experiment(lo, hi, grid16, mc.FlowParams(epsilon=0.1), 0.01)


def test_random_ordered_pairs_are_ordered(unit_ball):
    rng_pts = np.random.default_rng(0).uniform(-0.7, 0.7, (200, 2))
    for seed in range(5):
        lo, hi = ba.random_ordered_pair(unit_ball, seed)
        assert np.all(hi.initial_data(rng_pts) >= lo.initial_data(rng_pts))


def test_flow_respects_upper_barrier_on_collar(unit_ball, grid16):
    params = mc.FlowParams(epsilon=0.05, nu=0.3)
    bar = ba.build_upper_barrier(unit_ball, grid16, linear_x1, linear_x1, params)
    prob = mc.IBVP(unit_ball, linear_x1, linear_x1)
    rep = mc.solve_ibvp(prob, grid16, params, horizon=0.5,
                        snapshot_times=np.linspace(0, 0.5, 6))
    hvals = np.where(grid16.inside, grid16.points[..., 0], np.nan)
    worst = max(float(np.max((v - hvals - bar.psi)[bar.collar]))
                for _s, _t, v in rep.snapshots)
    assert worst <= 10 * grid16.spacing


def test_ring_gradient_under_barrier_slopes(unit_ball, grid16):
    params = mc.FlowParams(epsilon=0.05, nu=0.3)
    up = ba.build_upper_barrier(unit_ball, grid16, linear_x1, linear_x1, params)
    lo = ba.build_lower_barrier(unit_ball, grid16, linear_x1, linear_x1, params)
    prob = mc.IBVP(unit_ball, linear_x1, linear_x1)
    rep = mc.solve_ibvp(prob, grid16, params, horizon=0.25)
    bound = up.slope + lo.slope + 1.0 + 10 * grid16.spacing
    assert float(np.max(rep.sup_grad_ring)) <= bound
