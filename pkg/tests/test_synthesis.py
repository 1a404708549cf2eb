import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mobilecontrol.certificates import check_nonnegativity
from mobilecontrol.cli.expr import bump
from mobilecontrol.controls import ControlSchedule, ControlStage, FieldAdditive, Window
from mobilecontrol.errors import (BallViolation, ControlInfeasible, DecompositionInfeasible,
                                  InvalidArgumentError, StageInfeasible)
from mobilecontrol.pde_solver import Frozen, Quasilinear, SolverConfig, SpatialGrid, State, l2_norm, solve_forward
from mobilecontrol.synthesis import (PicardConfig, additive_sequence, additive_to_multiplicative,
                                     decompose_target, nonneg_additive_control, picard_quasilinear,
                                     run_sweep, synthesize_pipeline)
from mobilecontrol.synthesis.additive import _piece_groups, delta_schedule, smooth_step
from mobilecontrol.synthesis.sweep import cumulative_threshold, gap_limit, window_threshold


def test_thresholds():
    assert window_threshold(0.1, 2) == pytest.approx(8.3333333e-4)
    assert window_threshold(0.2, 2) == pytest.approx(0.04 / 12)
    assert cumulative_threshold(0.1, 2, 2) == pytest.approx(3 * 0.01 / 12)
    assert gap_limit(0.1, 2, 0.0) == math.inf
    assert gap_limit(0.1, 2, 1.0) == pytest.approx(0.01 / 24)


def test_sweep_single_window_closed_form():
    # sin(pi x) under damping 1 on (0, 1): energy e^{-2(pi^2+1)t}/2 hits eps^2/4 at ln(200)/(2(pi^2+1))
    g = SpatialGrid(200)
    plan, y = run_sweep(State(np.sin(np.pi * g.nodes)), 0.1, 1.0, Frozen.constant(), 0.5,
                        SolverConfig(), g)
    t_star = math.log(200) / (2 * (math.pi ** 2 + 1))
    assert t_star == pytest.approx(0.2437217, abs=1e-7)
    assert plan.M == 1 and plan.stages[0].m == 1.0
    assert plan.T_M == pytest.approx(t_star, abs=2e-3)
    assert plan.final_norm <= 0.05


def test_sweep_zero_state_trivial():
    g = SpatialGrid(50)
    plan, y = run_sweep(State(np.zeros(50)), 0.1, 0.5, Frozen.constant(), 0.5, SolverConfig(), g)
    assert [s.m for s in plan.stages] == [0.0, 0.0]
    assert plan.final_norm == 0.0


def test_sweep_infeasible_reports_plan():
    g = SpatialGrid(100)
    with pytest.raises(StageInfeasible) as info:
        run_sweep(State(np.sin(np.pi * g.nodes)), 1e-3, 0.5, Frozen.constant(), 0.5, SolverConfig(), g,
                  m_ladder=(1.0, 2.0))
    assert info.value.best > 0
    with pytest.raises(InvalidArgumentError):
        run_sweep(State(-np.ones(100)), 0.1, 0.5, Frozen.constant(), 0.5, SolverConfig(), g)


def test_sweep_stage_invariants():
    g = SpatialGrid(200)
    plan, _ = run_sweep(State(np.sin(np.pi * g.nodes)), 0.1, 0.5, Frozen.constant(), 0.5, SolverConfig(), g)
    t = 0.0
    for rec in plan.stages:
        assert rec.t_start == t and rec.T_j > rec.t_start
        assert rec.window_energy <= rec.threshold
        assert rec.T_j - rec.t_start <= rec.gap_limit
        t = rec.T_j
    assert plan.T_M < 0.5
    # the plan's schedule replays its own trajectory once the base step is no finer than the stage caps
    replay = solve_forward(State(np.sin(np.pi * g.nodes)), (0, plan.T_M), Frozen.constant(),
                           plan.schedule(), SolverConfig(dt=1e-3), g)
    np.testing.assert_allclose(replay.final.values, plan.trajectory().final.values, atol=1e-12)


@given(st.floats(0.1, 1.0))
def test_decomposition_sums_to_target(l):
    g = SpatialGrid(120)
    y_d = State(np.abs(np.sin(3 * np.pi * g.nodes)))
    try:
        dec = decompose_target(y_d, l, 10.0, g)
    except DecompositionInfeasible:
        return
    np.testing.assert_allclose(sum(dec.pieces), y_d.values, atol=0)
    for p, w in zip(dec.mollified, dec.windows):
        assert np.all(p[~w.mask(g)] == 0)
    assert dec.decomposition_error <= 5.0


def test_decomposition_example_l03():
    g = SpatialGrid(200)
    x = g.nodes
    y_d = np.where((x > 0.1) & (x < 0.2), 1.0, 0.0)
    dec = decompose_target(State(y_d), 0.3, 0.1, g)
    assert [round(w.r, 12) for w in dec.windows] == [0.0, 0.3, 0.6, 0.7]
    assert [bool(np.any(p)) for p in dec.pieces] == [True, False, False, False]
    # the cutoff equals one more than four cells inside the window, so the error vanishes
    assert dec.decomposition_error == 0.0
    with pytest.raises(DecompositionInfeasible):
        decompose_target(State(np.ones(200)), 0.3, 1e-3, g)


def test_smooth_step_and_delta():
    np.testing.assert_array_equal(smooth_step([-1, 0, 1, 2]), [0, 0, 1, 1])
    assert smooth_step(0.5) == pytest.approx(0.5)
    assert delta_schedule(1.0, 3) == pytest.approx([0.25, 0.1, 0.04])
    with pytest.raises(InvalidArgumentError):
        delta_schedule(1.0, 3, ratio=2.0)


def test_piece_groups_dyadic():
    g = _piece_groups(64, 6)
    sizes = np.bincount(g)
    assert list(sizes[::-1][:5]) == [1, 1, 2, 4, 8]
    assert sizes.sum() == 64 and np.all(np.diff(g) >= 0)


def test_additive_control_matches_forward_solve():
    g = SpatialGrid(99)
    law = Frozen.constant()
    win = Window(0.2, 0.6)
    target = 0.2 * bump(g.nodes, 0.3, 0.7)
    ctrl = nonneg_additive_control(win, State(target, 0.0), (0.0, 0.1), law, SolverConfig(dt=1e-3), g)
    assert np.all(ctrl.field.values >= 0)
    assert np.all(ctrl.field.values[:, ~win.mask(g)] == 0)
    assert ctrl.residual < 0.1 * l2_norm(target, g.h)
    sched = ControlSchedule((ControlStage(0.0, 0.1, win, FieldAdditive(ctrl.field)),))
    run = solve_forward(State(np.zeros(99)), (0, 0.1), law, sched, SolverConfig(dt=1e-3), g)
    np.testing.assert_allclose(run.final.values, ctrl.achieved, atol=1e-10)
    with pytest.raises(ControlInfeasible):
        nonneg_additive_control(win, State(target, 0.0), (0.0, 0.1), law, SolverConfig(dt=1e-3), g,
                                budget=1e-9)
    with pytest.raises(InvalidArgumentError):
        nonneg_additive_control(win, State(np.ones(99), 0.0), (0.0, 0.1), law, SolverConfig(dt=1e-3), g)


def test_lifting_reproduces_additive_run(grid200, flagship_target):
    g = grid200
    law = Frozen.constant()
    y_start = State(0.05 * np.sin(np.pi * g.nodes), 0.5)
    dec = decompose_target(State(flagship_target), 0.5, 0.05, g)
    plan, add_sched = additive_sequence(dec, 1.0, 0.05, law, SolverConfig(), g, t0=0.5)
    add_run = solve_forward(y_start, (0.5, 1.0), law, add_sched, SolverConfig(), g)
    lifted, rep = additive_to_multiplicative(add_run, add_sched)
    assert rep.dropped_fraction <= 1e-3
    lift_run = solve_forward(y_start, (0.5, 1.0), law, lifted, SolverConfig(), g)
    assert l2_norm(lift_run.final.values - add_run.final.values, g.h) < 1e-8
    assert max(plan.achieved_errors) <= plan.budget


def test_pipeline_early_return():
    g = SpatialGrid(100)
    res = synthesize_pipeline(State(0.01 * np.sin(np.pi * g.nodes)), State(np.zeros(100)), 0.05, 1.0, 0.5,
                              Frozen.constant(), SolverConfig(), g)
    assert res.early_return and res.terminal_error < 0.05
    with pytest.raises(InvalidArgumentError):
        synthesize_pipeline(State(-np.ones(100)), State(np.zeros(100)), 0.05, 1.0, 0.5, Frozen.constant())


def test_pipeline_flagship(grid200, flagship_target):
    g = grid200
    res = synthesize_pipeline(State(np.sin(np.pi * g.nodes)), State(flagship_target), 0.1, 1.0, 0.5,
                              Frozen.constant(), SolverConfig(), g)
    assert res.terminal_error < 0.1
    b = res.budgets
    assert b["sweep_norm"] <= 0.05 and b["phase2_error"] < 0.05 and b["T_M"] <= 0.5
    assert check_nonnegativity(res.trajectory, res.schedule).passed
    assert all(r.passed for r in res.reports)
    replay = solve_forward(State(np.sin(np.pi * g.nodes)), (0, 1), Frozen.constant(), res.schedule,
                           SolverConfig(), g)
    assert l2_norm(replay.final.values - flagship_target, g.h) == pytest.approx(res.terminal_error, abs=1e-12)


def _arctan_law():
    return Quasilinear.certified(lambda y: 1 + 0.1 * np.arctan(y), (-10, 10))


def test_picard_small_data_converges():
    g = SpatialGrid(100)
    res = picard_quasilinear(State(np.sin(np.pi * g.nodes)), State(np.zeros(100)), 0.05, 1.0, 0.5,
                             _arctan_law(), PicardConfig(gamma=0.01), SolverConfig(), g)
    assert res.iterations <= 5 and res.distances[-1] <= 1e-4
    assert res.terminal_error < 0.05


def test_picard_large_data_is_not_a_false_success():
    g = SpatialGrid(100)
    with pytest.raises(BallViolation) as info:
        picard_quasilinear(State(np.sin(np.pi * g.nodes)), State(np.zeros(100)), 0.05, 1.0, 0.5,
                           _arctan_law(), PicardConfig(gamma=100.0), SolverConfig(), g)
    assert info.value.sup_norm > 1.0


def test_picard_config_validation():
    for kw in ({"gamma": 0}, {"fix_tol": -1}, {"R": 0}, {"max_iters": 0}):
        with pytest.raises(InvalidArgumentError):
            PicardConfig(**kw)


def test_picard_moderate_data_iterates():
    g = SpatialGrid(100)
    res = picard_quasilinear(State(np.sin(np.pi * g.nodes)), State(np.zeros(100)), 0.05, 1.0, 0.5,
                             _arctan_law(), PicardConfig(gamma=0.5), SolverConfig(), g)
    assert 2 <= res.iterations <= 5
    assert all(a >= b for a, b in zip(res.distances, res.distances[1:]))
    assert res.distances[-1] <= 1e-4 and res.terminal_error < 0.05
    assert max(res.iterate_sups) <= 1.0
