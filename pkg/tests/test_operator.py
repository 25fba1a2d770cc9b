import numpy as np
import pytest

import mcflow as mc
from mcflow import operator as op

from helpers import zero, linear_x1, quadratic_r2, observed_orders


def _node_index(grid, x, y):
    return tuple(np.argwhere((np.abs(grid.points[..., 0] - x) < 1e-9)
                             & (np.abs(grid.points[..., 1] - y) < 1e-9))[0])


def test_params_validation():
    with pytest.raises(op.OperatorError):
        mc.FlowParams(epsilon=0.0)
    with pytest.raises(op.OperatorError):
        mc.FlowParams(epsilon=1.0)
    with pytest.raises(op.OperatorError):
        mc.FlowParams(epsilon=0.1, sigma=1.5)
    with pytest.raises(op.OperatorError):
        mc.FlowParams(epsilon=0.1, cfl_factor=0.6)


def test_gradient_zero_on_constants(grid32):
    bv = op.boundary_values(grid32, lambda p: np.full(len(p), 3.0))
    st = op.init_state(grid32, lambda p: np.full(len(p), 3.0), bv)
    g = op.node_gradient(st.values, grid32, bv)
    assert np.nanmax(np.abs(g[:, grid32.inside])) < 1e-12


def test_gradient_exact_on_linear(grid32):
    p = np.array([0.7, -0.4])
    fn = lambda q: q @ p
    bv = op.boundary_values(grid32, fn)
    st = op.init_state(grid32, fn, bv)
    g = op.node_gradient(st.values, grid32, bv)
    for k in range(2):
        assert np.nanmax(np.abs(g[k][grid32.inside] - p[k])) < 1e-11


def test_gradient_exact_on_quadratic_interior(grid32):
    bv = op.boundary_values(grid32, quadratic_r2)
    st = op.init_state(grid32, quadratic_r2, bv)
    g = op.node_gradient(st.values, grid32, bv)
    idx = _node_index(grid32, 0.25, 0.25)
    assert g[0][idx] == pytest.approx(0.5, abs=1e-12)
    assert g[1][idx] == pytest.approx(0.5, abs=1e-12)


def test_rate_closed_form_quadratic():
    # shrinking-circle field: rate = 4 - 8 r^2/(eps^2 + 4 r^2)
    params = mc.FlowParams(epsilon=0.1, nu=0.0)
    val = op.rate_closed_form([1.0, 0.0], 2 * np.eye(2), params)
    assert val == pytest.approx(4 - 8 * 0.25 / (0.01 + 1.0), abs=1e-12)
    assert val == pytest.approx(2.019801980198020, abs=1e-12)


def test_discrete_rate_matches_closed_form(grid32):
    params = mc.FlowParams(epsilon=0.1, nu=0.0)
    bv = op.boundary_values(grid32, quadratic_r2)
    st = op.init_state(grid32, quadratic_r2, bv)
    rate = op.regularized_rhs(st.values, grid32, params, bv)
    idx = _node_index(grid32, 0.5, 0.0)
    assert rate[idx] == pytest.approx(2.019801980198020, abs=2e-3)


def test_rate_linear_field_is_pure_source(grid32):
    params = mc.FlowParams(epsilon=0.05, nu=0.3)
    bv = op.boundary_values(grid32, linear_x1)
    st = op.init_state(grid32, linear_x1, bv)
    rate = op.regularized_rhs(st.values, grid32, params, bv)
    expect = 0.3 * np.sqrt(0.05 ** 2 + 1.0)
    vals = rate[grid32.interior]
    assert np.max(np.abs(vals - expect)) < 1e-11


def test_rate_epsilon_limit_of_quadratic(grid32):
    # eps -> 0 at r > 0: rate -> 2, the exact shrinking-circle speed
    bv = op.boundary_values(grid32, quadratic_r2)
    st = op.init_state(grid32, quadratic_r2, bv)
    idx = _node_index(grid32, 0.5, 0.0)
    vals = []
    for eps in (0.1, 0.01, 0.001):
        rate = op.regularized_rhs(st.values, grid32, mc.FlowParams(epsilon=eps), bv)
        vals.append(rate[idx])
    assert abs(vals[-1] - 2.0) < 5e-3
    assert abs(vals[-1] - 2.0) < abs(vals[0] - 2.0)


def test_stable_dt_formula(grid32, grid16):
    assert op.stable_dt(mc.FlowParams(epsilon=0.1), grid32) == pytest.approx(
        0.25 / (2 * 32 ** 2))
    g3 = mc.build_grid(mc.ball(1.0, dim=3), 1 / 16)
    assert op.stable_dt(mc.FlowParams(epsilon=0.1), g3) == pytest.approx(
        0.25 * (1 / 256) / 3)


def test_dt_override_warning_threshold(grid32):
    h2 = grid32.spacing ** 2
    ok = mc.FlowParams(epsilon=0.1, dt_override=0.2 * h2)
    bad = mc.FlowParams(epsilon=0.1, dt_override=h2)
    assert not op.dt_exceeds_stability(ok, grid32)
    assert op.dt_exceeds_stability(bad, grid32)
    assert op.stable_dt(bad, grid32) == h2


def test_step_constant_stationary_when_nu_zero(grid32):
    params = mc.FlowParams(epsilon=0.05, nu=0.0)
    c = 2.0
    fn = lambda p: np.full(len(p), c)
    bv = op.boundary_values(grid32, fn)
    st = op.init_state(grid32, fn, bv)
    new = op.step(st, grid32, params, bv)
    assert np.nanmax(np.abs(new.values[grid32.inside] - c)) < 1e-14


def test_step_constant_drifts_at_eps_nu(grid32):
    params = mc.FlowParams(epsilon=0.05, nu=0.3)
    c = 2.0
    fn = lambda p: np.full(len(p), c)
    bv = op.boundary_values(grid32, fn)
    st = op.init_state(grid32, fn, bv)
    new = op.step(st, grid32, params, bv)
    dt = op.stable_dt(params, grid32)
    drift = new.values[grid32.interior] - c
    assert np.max(np.abs(drift - dt * 0.05 * 0.3)) < 1e-12


def test_step_quadratic_moves_by_closed_form_rate(grid32):
    params = mc.FlowParams(epsilon=0.05, nu=0.0)
    bv = op.boundary_values(grid32, quadratic_r2)
    st = op.init_state(grid32, quadratic_r2, bv)
    new = op.step(st, grid32, params, bv)
    dt = op.stable_dt(params, grid32)
    idx = _node_index(grid32, 0.5, 0.0)
    expect = st.values[idx] + dt * (4 - 8 * 0.25 / (0.05 ** 2 + 1.0))
    assert new.values[idx] == pytest.approx(expect, abs=dt * 5e-3)


def test_boundary_trace_exact_after_steps(grid32):
    params = mc.FlowParams(epsilon=0.05, nu=0.3)
    bv = op.boundary_values(grid32, linear_x1)
    st = op.init_state(grid32, linear_x1, bv)
    for k in range(5):
        st = op.step(st, grid32, params, bv, k)
    assert op.boundary_trace_residual(st.values, grid32, bv) < 1e-12


def test_diffusion_tensor_eigenvalues_in_unit_interval(grid32):
    rng = np.random.default_rng(11)
    params = mc.FlowParams(epsilon=0.05, nu=0.0)
    for _ in range(50):
        p = rng.normal(scale=2.0, size=2)
        lam = np.linalg.eigvalsh(op.diffusion_tensor(p, params))
        assert lam[0] > 0.0
        assert lam[-1] <= 1.0 + 1e-14


def test_consistency_orders_quadratic_family(unit_ball):
    """Residual of the exact shrinking-circle solution on nested sample nodes."""
    params = mc.FlowParams(epsilon=1e-3, nu=0.0)
    res = []
    for h in (1 / 16, 1 / 32, 1 / 64):
        grid = mc.build_grid(unit_ball, h)
        bv = op.boundary_values(grid, quadratic_r2)
        st = op.init_state(grid, quadratic_r2, bv)
        rate = op.regularized_rhs(st.values, grid, params, bv)
        r = np.linalg.norm(grid.points, axis=-1)
        stride = int(round((1 / 16) / h))
        sel = np.zeros(grid.shape, bool)
        sel[::stride, ::stride] = True
        mask = grid.interior & sel & (r >= 0.2) & (r <= 0.8)
        res.append(float(np.max(np.abs(2.0 - rate[mask]))))
    orders = observed_orders(res)
    assert min(orders) >= 1.5


def test_consistency_linear_family_exact(unit_ball):
    params = mc.FlowParams(epsilon=0.07, nu=0.25)
    p = np.array([0.8, -0.3])
    fn = lambda q: q @ p
    expect = 0.25 * np.sqrt(0.07 ** 2 + p @ p)
    for h in (1 / 16, 1 / 32):
        grid = mc.build_grid(unit_ball, h)
        bv = op.boundary_values(grid, fn)
        st = op.init_state(grid, fn, bv)
        rate = op.regularized_rhs(st.values, grid, params, bv)
        assert np.max(np.abs(rate[grid.interior] - expect)) < 1e-11


def test_per_step_ordering_preserved(grid16):
    # one Euler step keeps ordered fields ordered (empirical, smooth data)
    params = mc.FlowParams(epsilon=0.1, nu=0.0)
    fn_lo = lambda p: p[:, 0]
    fn_hi = lambda p: p[:, 0] + 0.1 * (1 - np.sum(p ** 2, axis=1))
    bv_lo = op.boundary_values(grid16, fn_lo)
    bv_hi = op.boundary_values(grid16, fn_hi)
    lo = op.init_state(grid16, fn_lo, bv_lo)
    hi = op.init_state(grid16, fn_hi, bv_hi)
    for k in range(20):
        lo = op.step(lo, grid16, params, bv_lo, k)
        hi = op.step(hi, grid16, params, bv_hi, k)
    gap = (lo.values - hi.values)[grid16.inside]
    assert np.max(gap) <= 1e-10


def test_blowup_error_names_node_and_step(grid16):
    params = mc.FlowParams(epsilon=0.05, nu=0.0)
    bv = op.boundary_values(grid16, zero)
    st = op.init_state(grid16, zero, bv)
    st.values[grid16.interior] = np.inf
    with pytest.raises(op.BlowUpError) as exc:
        op.step(st, grid16, params, bv, step_index=7)
    assert "step 7" in str(exc.value)
    assert exc.value.node is not None


def test_quadrature_measures_disk_area(grid32):
    one = np.where(grid32.inside, 1.0, np.nan)
    assert op.quadrature(one, grid32) == pytest.approx(np.pi, rel=0.01)
