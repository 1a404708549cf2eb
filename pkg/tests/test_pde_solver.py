import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mobilecontrol.controls import (ConstMultiplicative, ControlSchedule, ControlStage, FieldAdditive,
                                    FieldMultiplicative, SampledField, Window)
from mobilecontrol.errors import InvalidArgumentError, MMatrixViolation
from mobilecontrol.pde_solver import (Frozen, Quasilinear, SolverConfig, SpatialGrid, State, build_grid,
                                      discrete_gradient_norm, eigen_oracle, l2_norm, mmatrix_dt_threshold,
                                      sample_field_bounds, solve_forward, stage_dt, stage_time_levels,
                                      step_implicit, subdomain_solve, subgrid, window_energy)


def test_grid_geometry():
    g = build_grid(4)
    assert g.h == pytest.approx(0.2)
    np.testing.assert_allclose(g.nodes, [0.2, 0.4, 0.6, 0.8])
    np.testing.assert_allclose(g.faces, [0.1, 0.3, 0.5, 0.7, 0.9])
    assert list(g.mask(0.2, 0.6)) == [False, True, False, False]


def test_build_grid_rejects_tiny():
    with pytest.raises(InvalidArgumentError):
        build_grid(1)


def test_subgrid_aligns_with_parent():
    g = SpatialGrid(199)
    sub = subgrid(g, 0.4, 0.9)
    assert sub.n == 99
    assert np.allclose(sub.nodes, g.nodes[(g.nodes > 0.4 + 1e-9) & (g.nodes < 0.9 - 1e-9)])


def test_eigen_oracle_is_exact_for_first_mode():
    g = SpatialGrid(50)
    y0 = State(np.sin(np.pi * g.nodes))
    out = eigen_oracle(y0, 2.0, 3.0, 0.1, g)
    np.testing.assert_allclose(out.values, y0.values * math.exp(-(2 * math.pi ** 2 + 3) * 0.1), rtol=1e-12)


def test_eigen_oracle_rejects_bad_input():
    with pytest.raises(InvalidArgumentError):
        eigen_oracle(State(np.ones(5)), 0.0, 0.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        eigen_oracle(State(np.ones(5)), 1.0, -1.0, 1.0)


def test_second_order_in_space_first_order_in_time():
    errs_h = []
    for n in (20, 40, 80):
        g = SpatialGrid(n)
        y0 = State(np.sin(np.pi * g.nodes))
        tr = solve_forward(y0, (0, 0.1), Frozen.constant(1.0), cfg=SolverConfig(dt=1e-5), grid=g)
        exact = np.sin(np.pi * g.nodes) * math.exp(-math.pi ** 2 * 0.1)
        errs_h.append(l2_norm(tr.final.values - exact, g.h))
    g = SpatialGrid(200)
    y0 = State(np.sin(np.pi * g.nodes))
    errs_t = []
    for dt in (2e-3, 1e-3, 5e-4):
        tr = solve_forward(y0, (0, 0.1), Frozen.constant(1.0), cfg=SolverConfig(dt=dt), grid=g)
        errs_t.append(l2_norm(tr.final.values - eigen_oracle(y0, 1.0, 0.0, 0.1, g).values, g.h))
    # error ratios: about 4 under halving h, about 2 under halving dt
    assert errs_h[0] / errs_h[1] > 3.0 and errs_h[1] / errs_h[2] > 3.0
    assert 1.8 < errs_t[0] / errs_t[1] < 2.2 and 1.8 < errs_t[1] / errs_t[2] < 2.2


def test_step_implicit_matches_linear_algebra():
    g = SpatialGrid(5)
    y = State(np.array([0.1, 0.4, 0.2, 0.3, 0.0]))
    u = np.array([-1.0, 0.0, 0.5, 0.0, 0.0])
    v = np.array([0.0, 1.0, 0.0, 0.0, 2.0])
    out = step_implicit(y, 0.01, Frozen.constant(2.0), (u, v), grid=g)
    h2 = g.h ** 2
    A = np.diag(1 / 0.01 + 4 / h2 - u) - np.diag(np.full(4, 2 / h2), 1) - np.diag(np.full(4, 2 / h2), -1)
    np.testing.assert_allclose(out.values, np.linalg.solve(A, y.values / 0.01 + v), rtol=1e-12)
    assert out.time == pytest.approx(0.01)


def test_mmatrix_violation_detected():
    g = SpatialGrid(3)
    u = np.full(3, 1e6)
    with pytest.raises(MMatrixViolation):
        step_implicit(State(np.ones(3)), 1.0, Frozen.constant(1e-3), (u, None), grid=g)
    assert mmatrix_dt_threshold(u) == pytest.approx(1e-6)
    assert math.isinf(mmatrix_dt_threshold(np.zeros(3)))


def test_solve_forward_halves_steps_when_certificate_fails():
    g = SpatialGrid(10)
    fld = lambda x, t: np.full_like(x, 500.0)
    sched = ControlSchedule((ControlStage(0, 0.1, Window(0, 1), FieldMultiplicative(fld)),))
    tr = solve_forward(State(np.sin(np.pi * g.nodes)), (0, 0.1), Frozen.constant(1e-3), sched,
                       SolverConfig(dt=0.05), g)
    assert np.all(tr.values > 0)
    assert tr.final.time == pytest.approx(0.1)


def test_quasilinear_newton_converges_and_matches_frozen_for_constant_a():
    g = SpatialGrid(60)
    y0 = State(np.sin(np.pi * g.nodes))
    lin = solve_forward(y0, (0, 0.05), Frozen.constant(1.3), cfg=SolverConfig(dt=1e-3), grid=g)
    qs = solve_forward(y0, (0, 0.05), Quasilinear(lambda y: 1.3 + 0 * y, 1.3, 0.0, 0.0), cfg=SolverConfig(dt=1e-3),
                       grid=g)
    np.testing.assert_allclose(qs.values, lin.values, atol=1e-10)
    a = Quasilinear.certified(lambda y: 1 + 0.5 / (1 + y * y))
    tr = solve_forward(y0, (0, 0.05), a, cfg=SolverConfig(dt=1e-3), grid=g)
    assert tr.newton_iterations.max() <= 25


def test_quasilinear_certification_refuses_nonpositive():
    with pytest.raises(InvalidArgumentError):
        Quasilinear.certified(lambda y: -1 + 0 * y)


def test_frozen_bounds_sampled():
    rho, bsup, bt, bx = sample_field_bounds(lambda x, t: 1 + 0.1 * t + 0 * x, 1.0, 40, 40)
    assert rho == pytest.approx(1.0) and bsup == pytest.approx(1.1)
    assert bt == pytest.approx(0.1) and bx == 0.0
    with pytest.raises(InvalidArgumentError):
        Frozen.from_function(lambda x, t: x - 0.5, 1.0, 20, 5)


def test_stage_dt_and_levels():
    assert stage_dt(1e-3, 10.0) == 1e-3
    assert stage_dt(1e-3, 1e4) == pytest.approx(1e-4)
    lev = stage_time_levels(0.0, 0.25, 0.1)
    np.testing.assert_allclose(lev, [0.1, 0.2, 0.25])


@given(st.floats(0.0, 5.0), st.floats(0.01, 3.0), st.floats(1e-4, 0.2))
def test_stage_levels_end_exactly(t0, span, dt):
    lev = stage_time_levels(t0, t0 + span, dt)
    assert lev[-1] == t0 + span
    assert np.all(np.diff(np.concatenate(([t0], lev))) <= dt * (1 + 1e-9))
    assert np.all(np.diff(lev) > 0)


def test_stage_payload_applies_on_its_own_steps():
    g = SpatialGrid(20)
    y0 = State(np.sin(np.pi * g.nodes))
    damp = ControlStage(0.0, 0.05, Window(0, 1), ConstMultiplicative(10.0))
    idle = ControlStage(0.05, 0.1, Window(0, 1))
    tr = solve_forward(y0, (0, 0.1), Frozen.constant(1.0), ControlSchedule((damp, idle)), SolverConfig(dt=0.01), g)
    ref = solve_forward(y0, (0, 0.05), Frozen.constant(1.0),
                        ControlSchedule((damp,)), SolverConfig(dt=0.01), g)
    np.testing.assert_allclose(tr.at(0.05).values, ref.final.values, rtol=1e-13)
    assert list(tr.stage_ids) == [-1] + [0] * 5 + [1] * 5


def test_max_dt_caps_stage_steps():
    g = SpatialGrid(10)
    st0 = ControlStage(0.0, 0.1, Window(0, 1), max_dt=0.01)
    tr = solve_forward(State(np.ones(10)), (0, 0.1), Frozen.constant(1.0), ControlSchedule((st0,)),
                       SolverConfig(dt=0.05), g)
    assert len(tr.times) == 11


def test_subdomain_solve_against_interval_oracle():
    g = SpatialGrid(99, 0.4, 0.9)
    y0 = State(np.sin(2 * np.pi * (g.nodes - 0.4)))
    tr = subdomain_solve(y0, (0.4, 0.9), Frozen.constant(1.0), span=(0.0, 0.01), cfg=SolverConfig(dt=1e-5))
    exact = y0.values * math.exp(-(2 * math.pi) ** 2 * 0.01)
    assert l2_norm(tr.final.values - exact, g.h) < 1e-4


def test_subdomain_solve_with_traces():
    tr = subdomain_solve(State(np.zeros(9)), (0.0, 1.0), Frozen.constant(1.0),
                         boundary=(lambda t: 1.0, lambda t: 1.0), span=(0, 2.0))
    np.testing.assert_allclose(tr.final.values, 1.0, atol=1e-6)


def test_trajectory_helpers():
    g = SpatialGrid(30)
    y0 = State(np.sin(np.pi * g.nodes))
    a = solve_forward(y0, (0, 0.1), Frozen.constant(1.0), cfg=SolverConfig(dt=0.01), grid=g)
    b = solve_forward(a.final, (0.1, 0.2), Frozen.constant(1.0), cfg=SolverConfig(dt=0.01), grid=g)
    c = a.concat(b)
    assert len(c.times) == 21 and c.final.time == pytest.approx(0.2)
    assert c.sup_norm() == pytest.approx(1.0, abs=5e-3)
    assert c.trace(0.5)(0.0) == pytest.approx(1.0, abs=5e-3)
    assert c.l2_spacetime() > 0
    with pytest.raises(InvalidArgumentError):
        b.concat(a)


def test_discrete_helpers():
    g = SpatialGrid(99)
    y = np.sin(np.pi * g.nodes)
    assert l2_norm(y, g.h) == pytest.approx(math.sqrt(0.5), rel=1e-12)
    assert discrete_gradient_norm(y, g.h) == pytest.approx(math.pi / math.sqrt(2), rel=1e-3)
    assert window_energy(y, g, 0.0, 1.0) == pytest.approx(0.5)


def test_state_validation():
    with pytest.raises(InvalidArgumentError):
        State(np.array([np.nan]))
    with pytest.raises(InvalidArgumentError):
        State(np.zeros(2), -1.0)
    s = State(np.zeros(3))
    with pytest.raises(ValueError):
        s.values[0] = 1.0


@given(st.integers(0, 2 ** 31 - 1))
def test_linear_superposition_of_additive_controls(seed):
    rng = np.random.default_rng(seed)
    g = SpatialGrid(15)
    v1 = rng.uniform(0, 1, g.n)
    v2 = rng.uniform(0, 1, g.n)
    y0 = rng.uniform(0, 1, g.n)

    def run(v, y):
        fld = SampledField(np.array([0.1]), g.nodes, v[None, :])
        sched = ControlSchedule((ControlStage(0, 0.1, Window(0, 1), FieldAdditive(fld)),))
        return solve_forward(State(y), (0, 0.1), Frozen.constant(1.0), sched, SolverConfig(dt=0.02), g).final.values

    np.testing.assert_allclose(run(v1 + v2, y0), run(v1, y0) + run(v2, 0 * y0), atol=1e-12)
