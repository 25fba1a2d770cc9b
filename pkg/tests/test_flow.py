import numpy as np
import pytest

import mcflow as mc
from mcflow import flow as fl

from helpers import zero, linear_x1, bump, linear_plus_bump

# first converged run of the drift steady state, kept as a scheme anchor
STEADY_CENTER_H16_NU03 = 0.148835559260


def test_incompatible_data_rejected(unit_ball):
    with pytest.raises(fl.IncompatibleDataError):
        mc.IBVP(unit_ball, zero, lambda p: p[:, 0] + 0.5)


def test_zero_data_zero_solution(unit_ball, grid16):
    prob = mc.IBVP(unit_ball, zero, zero)
    rep = mc.solve_ibvp(prob, grid16, mc.FlowParams(epsilon=0.05), horizon=0.05)
    assert rep.sup_u.max() == 0.0
    assert rep.sup_ut.max() == 0.0
    assert rep.aborted is None


def test_linear_data_stationary(unit_ball, grid32):
    prob = mc.IBVP(unit_ball, linear_x1, linear_x1)
    rep = mc.solve_ibvp(prob, grid32, mc.FlowParams(epsilon=0.05), horizon=0.05)
    assert rep.sup_ut.max() < 1e-12
    assert abs(rep.sup_u.max() - rep.sup_u[0]) < 1e-12


def test_snapshots_at_requested_steps(unit_ball, grid16):
    prob = mc.IBVP(unit_ball, zero, bump)
    params = mc.FlowParams(epsilon=0.05)
    rep = mc.solve_ibvp(prob, grid16, params, horizon=0.02, snapshot_times=(0.0, 0.01, 0.02))
    assert len(rep.snapshots) == 3
    dt = rep.dt
    for step, t, _v in rep.snapshots:
        assert t == pytest.approx(step * dt)
        assert step * dt <= 0.02 + 1e-12


def test_max_principle_nu_zero(unit_ball, grid16):
    prob = mc.IBVP(unit_ball, zero, bump)
    rep = mc.solve_ibvp(prob, grid16, mc.FlowParams(epsilon=0.05), horizon=0.2)
    assert rep.max_u.max() <= 0.3 + 1e-8
    assert rep.min_u.min() >= 0.0 - 1e-8


def test_warnings_surface_inadmissible_speed(unit_ball, grid16):
    prob = mc.IBVP(unit_ball, linear_x1, linear_x1)
    rep = mc.solve_ibvp(prob, grid16, mc.FlowParams(epsilon=0.05, nu=0.7), horizon=0.001)
    assert any("admissible" in w for w in rep.warnings)


def test_relax_stationary_converges_immediately(unit_ball, grid16):
    prob = mc.IBVP(unit_ball, linear_x1, linear_x1)
    res = mc.relax_to_steady(prob, grid16, mc.FlowParams(epsilon=0.05), tol=1e-6)
    assert res.converged
    assert res.steps == 0


def test_relax_bump_returns_to_linear(unit_ball):
    # the linear field solves the driftless steady equation; grid refinement
    # keeps the terminal deviation at the relaxation-tolerance scale
    for h in (1 / 8, 1 / 16):
        grid = mc.build_grid(unit_ball, h)
        prob = mc.IBVP(unit_ball, linear_x1, linear_plus_bump)
        res = mc.relax_to_steady(prob, grid, mc.FlowParams(epsilon=0.05), tol=1e-6)
        assert res.converged
        dev = np.max(np.abs(res.state.values[grid.inside] - grid.points[grid.inside][:, 0]))
        assert dev < 1e-5


def test_relax_drift_steady_regression_anchor(unit_ball, grid16):
    prob = mc.IBVP(unit_ball, linear_x1, linear_x1)
    res = mc.relax_to_steady(prob, grid16, mc.FlowParams(epsilon=0.05, nu=0.3), tol=1e-6)
    assert res.converged
    assert res.residual < 1e-6
    center = res.state.values[tuple(np.array(grid16.shape) // 2)]
    assert center == pytest.approx(STEADY_CENTER_H16_NU03, abs=1e-6)


def test_relax_budget_exhaustion_flagged(unit_ball, grid16):
    prob = mc.IBVP(unit_ball, linear_x1, linear_x1)
    res = mc.relax_to_steady(prob, grid16, mc.FlowParams(epsilon=0.05, nu=0.3),
                             tol=1e-12, max_steps=10)
    assert not res.converged
    assert res.steps == 10


def test_relax_rejects_bad_tolerance(unit_ball, grid16):
    prob = mc.IBVP(unit_ball, linear_x1, linear_x1)
    with pytest.raises(ValueError):
        mc.relax_to_steady(prob, grid16, mc.FlowParams(epsilon=0.05), tol=0.0)


def test_continuation_stationary_data_eps_independent(unit_ball, grid16):
    prob = mc.IBVP(unit_ball, linear_x1, linear_x1)
    table = mc.epsilon_continuation(prob, grid16, mc.FlowParams(epsilon=0.2),
                                    (0.2, 0.1, 0.05), horizon=0.05)
    assert all(d <= 1e-10 for d in table.sup_diffs)


def test_continuation_needs_three_strictly_decreasing(unit_ball, grid16):
    prob = mc.IBVP(unit_ball, linear_x1, linear_x1)
    with pytest.raises(ValueError):
        mc.epsilon_continuation(prob, grid16, mc.FlowParams(epsilon=0.2), (0.2,), 0.1)
    with pytest.raises(ValueError):
        mc.epsilon_continuation(prob, grid16, mc.FlowParams(epsilon=0.2),
                                (0.2, 0.2, 0.1), 0.1)


def test_report_series_lengths_agree(unit_ball, grid16):
    prob = mc.IBVP(unit_ball, zero, bump)
    rep = mc.solve_ibvp(prob, grid16, mc.FlowParams(epsilon=0.05), horizon=0.02)
    n = len(rep.t)
    for arr in (rep.sup_u, rep.min_u, rep.max_u, rep.sup_grad, rep.sup_ut,
                rep.energy, rep.dissipation, rep.source, rep.ut_sq_integral):
        assert len(arr) == n
        assert np.all(np.isfinite(arr))
