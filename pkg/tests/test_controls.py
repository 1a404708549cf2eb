import numpy as np
import pytest
from hypothesis import example, given, strategies as st

from mobilecontrol.controls import (ConstMultiplicative, ControlSchedule, ControlStage, FieldAdditive,
                                    FieldMultiplicative, Idle, SampledField, Window, compose_schedules,
                                    dumps_schedule, evaluate_control, idle_schedule, loads_schedule,
                                    schedule_from_dict, sweep_window_sequence, window_count)
from mobilecontrol.errors import InvalidArgumentError
from mobilecontrol.pde_solver import SpatialGrid


def test_window_validation():
    Window(0.5, 0.5)
    with pytest.raises(InvalidArgumentError):
        Window(0.6, 0.5)
    with pytest.raises(InvalidArgumentError):
        Window(0.0, 0.0)


def test_window_mask_is_open():
    g = SpatialGrid(3)  # nodes 0.25, 0.5, 0.75
    assert list(Window(0.25, 0.5).mask(g)) == [False, True, False]


def test_gap_and_overlap_rejected():
    w = Window(0, 1)
    with pytest.raises(InvalidArgumentError, match="gap"):
        ControlSchedule((ControlStage(0, 1, w), ControlStage(1.5, 2, w)))
    with pytest.raises(InvalidArgumentError, match="overlap"):
        ControlSchedule((ControlStage(0, 1, w), ControlStage(0.5, 2, w)))


def test_stage_lookup_right_continuous():
    w1, w2 = Window(0, 0.5), Window(0.5, 0.5)
    s = ControlSchedule((ControlStage(0, 1, w1), ControlStage(1, 2, w2)))
    assert s.window_origin(0.0) == 0.0
    assert s.window_origin(1.0) == 0.5
    assert s.window_origin(2.0) == 0.5
    with pytest.raises(InvalidArgumentError):
        s.stage_at(2.5)


def test_negative_additive_rejected():
    fld = SampledField(np.array([1.0]), np.array([0.5]), np.array([[-1.0]]))
    with pytest.raises(InvalidArgumentError):
        ControlStage(0, 1, Window(0, 1), FieldAdditive(fld))
    with pytest.raises(InvalidArgumentError):
        ControlStage(0, 1, Window(0, 1), FieldAdditive(lambda x, t: np.sin(10 * x)))


def test_evaluate_constant_damping():
    g = SpatialGrid(9)
    s = ControlSchedule((ControlStage(0, 1, Window(0.0, 0.5), ConstMultiplicative(4.0)),))
    u, v = evaluate_control(s, g, 0.3)
    np.testing.assert_array_equal(u, np.where(g.nodes < 0.5, -4.0, 0.0))
    assert not v.any()


def test_sampled_field_held_backward():
    fld = SampledField(np.array([0.1, 0.2]), np.array([0.0, 1.0]), np.array([[1.0, 1.0], [2.0, 2.0]]))
    assert fld(np.array([0.5]), 0.1)[0] == 1.0
    assert fld(np.array([0.5]), 0.15)[0] == 2.0
    assert fld(np.array([0.5]), 0.2)[0] == 2.0


def test_compose_identity_and_join():
    a = idle_schedule(0, 1, "a")
    b = idle_schedule(1, 2, "b")
    empty = ControlSchedule(())
    assert compose_schedules(empty, a) is a
    assert compose_schedules(a, empty) is a
    assert compose_schedules(a, b).span == (0, 2)
    with pytest.raises(InvalidArgumentError):
        compose_schedules(a, idle_schedule(1.5, 2))


@given(st.lists(st.floats(0.01, 1.0), min_size=3, max_size=6))
def test_compose_associative(lengths):
    t = np.concatenate(([0.0], np.cumsum(lengths)))
    parts = [idle_schedule(t[i], t[i + 1], f"s{i}") for i in range(3)]
    left = compose_schedules(compose_schedules(parts[0], parts[1]), parts[2])
    right = compose_schedules(parts[0], compose_schedules(parts[1], parts[2]))
    assert [(s.t_start, s.t_end) for s in left.stages] == [(s.t_start, s.t_end) for s in right.stages]


@given(st.floats(0.05, 1.0))
@example(0.9999999999999999)
def test_window_sequence_covers_unit_interval(l):
    wins = sweep_window_sequence(l)
    M = window_count(l)
    assert len(wins) == M and M * l >= 1 - 1e-9
    assert wins[0].lo == 0.0 and wins[-1].hi == pytest.approx(1.0)
    for a, b in zip(wins, wins[1:]):
        assert b.lo <= a.hi + 1e-12


def test_window_sequence_examples():
    assert [w.r for w in sweep_window_sequence(0.5)] == [0.0, 0.5]
    assert [round(w.r, 12) for w in sweep_window_sequence(0.3)] == [0.0, 0.3, 0.6, 0.7]
    with pytest.raises(InvalidArgumentError):
        sweep_window_sequence(0.3, 3)


@given(st.integers(0, 2 ** 31 - 1))
def test_schedule_json_round_trip(seed):
    rng = np.random.default_rng(seed)
    g = SpatialGrid(7)
    fld = SampledField(np.array([0.5, 1.0]), g.nodes, rng.uniform(0, 2, (2, 7)))
    s = ControlSchedule((
        ControlStage(0, 0.5, Window(0, 0.5), ConstMultiplicative(float(rng.uniform(0, 10))), max_dt=0.01),
        ControlStage(0.5, 1.0, Window(0.5, 0.5), FieldAdditive(fld)),
        ControlStage(1.0, 1.5, Window(0.2, 0.5), FieldMultiplicative(fld)),
        ControlStage(1.5, 2.0, Window(0, 1), Idle()),
    ), "x")
    text = dumps_schedule(s, g, {"ok": True})
    back = loads_schedule(text)
    assert dumps_schedule(back, g, {"ok": True}) == text
    for t in (0.25, 0.75, 1.2, 1.9):
        for a, b in zip(evaluate_control(s, g, t), evaluate_control(back, g, t)):
            np.testing.assert_array_equal(a, b)


def test_analytic_field_serialization_needs_grid():
    s = ControlSchedule((ControlStage(0, 1, Window(0, 1), FieldMultiplicative(lambda x, t: x)),))
    with pytest.raises(InvalidArgumentError):
        dumps_schedule(s)
    assert "field_multiplicative" in dumps_schedule(s, SpatialGrid(5))


def test_schema_version_checked():
    with pytest.raises(InvalidArgumentError):
        schedule_from_dict({"schema_version": 99, "stages": []})
