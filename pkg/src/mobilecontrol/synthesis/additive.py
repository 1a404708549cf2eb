"""Nonnegative additive controls on moving windows and their lifting to
multiplicative controls."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from ..controls import (ControlSchedule, ControlStage, FieldAdditive, FieldMultiplicative, Idle,
                        SampledField, Window, sweep_window_sequence, window_count)
from ..errors import ControlInfeasible, DecompositionInfeasible, InvalidArgumentError, LiftingInfeasible
from ..pde_solver import (Frozen, SolverConfig, SpatialGrid, State, Trajectory, _assemble_linear,
                          l2_norm, stage_time_levels)
from .nnls import nnls_bb

DELTA_RATIO = 2.5
TIME_PIECES = 6
# steps per delta_M on the additive stages
ADDITIVE_STEPS = 400
LIFT_FLOOR = 1e-6
LIFT_U_MAX = 1e6
# largest fraction of additive mass allowed to be dropped by the lifting floor
LIFT_DROP_FRACTION = 1e-3


# ---------------------------------------------------------------------------
# target decomposition
# ---------------------------------------------------------------------------


def smooth_step(tau):
    """C-infinity step: 0 for tau <= 0, 1 for tau >= 1."""
    tau = np.clip(np.asarray(tau, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f = np.where(tau > 0, np.exp(-1.0 / np.where(tau > 0, tau, 1.0)), 0.0)
        g = np.where(tau < 1, np.exp(-1.0 / np.where(tau < 1, 1.0 - tau, 1.0)), 0.0)
    return f / (f + g)


def window_cutoff(grid: SpatialGrid, window: Window, margin_cells: int) -> np.ndarray:
    """Zero within ``margin_cells`` of the window edges, one beyond twice that."""
    d = np.minimum(grid.nodes - window.lo, window.hi - grid.nodes) / grid.h
    k = float(margin_cells)
    return smooth_step((d - k) / k)


@dataclass
class TargetDecomposition:
    y_d: np.ndarray
    windows: list
    pieces: list
    mollified: list
    margin_cells: int
    decomposition_error: float

    @property
    def M(self) -> int:
        return len(self.windows)


def decompose_target(y_d: State, l: float, eps: float, grid: Optional[SpatialGrid] = None,
                     margin_cells: int = 2, max_margin: Optional[int] = None) -> TargetDecomposition:
    """Split ``y_d`` over consecutive windows and mollify each piece.

    Pieces are restrictions to [(j-1)l, jl) for j < M and [(M-1)l, 1) for the
    last one.  Each piece is multiplied by a smooth cutoff vanishing within
    ``margin`` cells of its window edges; the smallest margin (at least
    ``margin_cells``) with total error <= eps/2 is used.

    Raises
    ------
    DecompositionInfeasible
        No margin meets the eps/2 budget.
    """
    grid = grid or SpatialGrid(y_d.n)
    vals = np.asarray(y_d.values, dtype=float)
    if np.any(vals < 0):
        raise InvalidArgumentError("target must be nonnegative")
    M = window_count(l)
    windows = sweep_window_sequence(l, M)
    x = grid.nodes
    pieces = []
    for j in range(1, M + 1):
        lo = (j - 1) * l
        hi = j * l if j < M else math.inf
        sel = (x >= lo - 1e-12) & (x < hi - 1e-12)
        pieces.append(np.where(sel, vals, 0.0))
    max_margin = max_margin or margin_cells
    worst = None
    for k in range(margin_cells, max_margin + 1):
        moll = [p * window_cutoff(grid, w, k) for p, w in zip(pieces, windows)]
        errs = [l2_norm(mp - p, grid.h) for mp, p in zip(moll, pieces)]
        total = float(sum(errs))
        if total <= eps / 2:
            return TargetDecomposition(vals, windows, pieces, moll, k, total)
        worst = (int(np.argmax(errs)) + 1, total)
    raise DecompositionInfeasible(
        f"decomposition error {worst[1]:.4g} exceeds eps/2={eps / 2:.4g}; worst piece {worst[0]}",
        best=worst[1], partial=worst[0])


# ---------------------------------------------------------------------------
# linear propagation and the nonnegative least-squares control
# ---------------------------------------------------------------------------


def propagate_linear(grid: SpatialGrid, law: Frozen, t0: float, levels: np.ndarray, Y0: np.ndarray,
                     forcing=None) -> np.ndarray:
    """Backward-Euler propagation of many states at once (no multiplicative control).

    ``Y0`` has shape (n, K); ``forcing(k)`` returns the (n, K) additive
    source at level ``levels[k]`` or ``None``.  Returns the states at the last
    level.
    """
    Y = np.array(Y0, dtype=float)
    u = np.zeros(grid.n)
    t = t0
    for k, t_new in enumerate(levels):
        dt = t_new - t
        ab, _ = _assemble_linear(grid, dt, law.coefficient(grid.faces, t_new), u, (0.0, 0.0))
        rhs = Y / dt
        if forcing is not None:
            f = forcing(k)
            if f is not None:
                rhs = rhs + f
        Y = solve_banded((1, 1), ab, rhs)
        t = t_new
    return Y


@dataclass
class AdditiveControl:
    field: SampledField
    residual: float
    coefficients: np.ndarray
    iterations: int
    achieved: np.ndarray


def _piece_groups(n_levels: int, pieces: int) -> np.ndarray:
    """Group index per level; groups double in size going back from the last level."""
    sizes = [1]
    while len(sizes) < pieces - 1 and sum(sizes) < n_levels:
        sizes.append(min(sum(sizes), n_levels - sum(sizes)))
    if sum(sizes) < n_levels:
        sizes.append(n_levels - sum(sizes))
    return np.repeat(np.arange(len(sizes)), sizes[::-1])


def nonneg_additive_control(window: Window, y_target_piece: State, horizon, law: Frozen,
                            cfg: SolverConfig = SolverConfig(), grid: Optional[SpatialGrid] = None,
                            levels: Optional[np.ndarray] = None, observe_levels: Sequence[float] = (),
                            time_pieces: int = TIME_PIECES, budget: Optional[float] = None,
                            max_iter: int = 5000) -> AdditiveControl:
    """Nonnegative additive control on ``window`` steering zero data near a target.

    The control is nodal in space on the window nodes and piecewise constant
    on ``time_pieces`` groups of time levels, the groups halving in length
    towards the end of the interval.  Each basis response is
    propagated from zero data at ``horizon[0]`` through the active levels
    and then freely through ``observe_levels``; the coefficients solve a
    nonnegative least-squares problem in the discrete L2 norm.

    Parameters
    ----------
    window : Window
    y_target_piece : State
        Full-grid nonnegative target, supported inside the window.
    horizon : (float, float)
        Active interval of the control.
    levels : array, optional
        Time levels inside the active interval (default from ``cfg``).
    observe_levels : sequence of float
        Later levels through which the state decays freely before it is
        compared with the target.
    budget : float, optional
        Largest admissible residual.

    Returns
    -------
    AdditiveControl

    Raises
    ------
    ControlInfeasible
        Residual exceeds ``budget``.
    """
    t0, t1 = map(float, horizon)
    if not t1 > t0:
        raise InvalidArgumentError("horizon must have positive length")
    grid = grid or SpatialGrid(y_target_piece.n)
    target = np.asarray(y_target_piece.values, dtype=float)
    if np.any(target < 0):
        raise InvalidArgumentError("target piece must be nonnegative")
    mask = window.mask(grid)
    if np.any(target[~mask] != 0):
        raise InvalidArgumentError("target piece is not supported inside the window")
    if levels is None:
        levels = stage_time_levels(t0, t1, cfg.resolve_dt(grid, t1 - t0))
    levels = np.asarray(levels, dtype=float)
    observe_levels = np.asarray(observe_levels, dtype=float)
    idx = np.flatnonzero(mask)
    nw = idx.size
    groups = _piece_groups(len(levels), time_pieces)
    P = int(groups.max()) + 1
    if not np.any(target > 0):
        return AdditiveControl(SampledField(levels, grid.nodes, np.zeros((len(levels), grid.n))),
                               0.0, np.zeros(nw * P), 0, np.zeros(grid.n))
    # column c = p * nw + q: node idx[q] during time piece p
    K = nw * P

    def forcing(k):
        F = np.zeros((grid.n, K))
        p = groups[k]
        F[idx, p * nw + np.arange(nw)] = 1.0
        return F

    Y = propagate_linear(grid, law, t0, levels, np.zeros((grid.n, K)), forcing)
    if observe_levels.size:
        Y = propagate_linear(grid, law, levels[-1], observe_levels, Y)
    w = math.sqrt(grid.h)
    res = nnls_bb(w * Y, w * target, max_iter=max_iter)
    c = res.x
    achieved = Y @ c
    residual = l2_norm(achieved - target, grid.h)
    values = np.zeros((len(levels), grid.n))
    coef = c.reshape(P, nw)
    values[:, idx] = coef[groups]
    fld = SampledField(levels, grid.nodes, values)
    if budget is not None and residual > budget:
        raise ControlInfeasible(f"additive control residual {residual:.4g} exceeds budget {budget:.4g}",
                                best=residual, partial=fld)
    return AdditiveControl(fld, residual, c, res.iterations, achieved)


# ---------------------------------------------------------------------------
# staged additive plan
# ---------------------------------------------------------------------------


@dataclass
class AdditivePlan:
    delta: list
    intervals: list
    controls: list
    achieved_errors: list
    budget: float
    dt: float
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"delta": list(map(float, self.delta)),
                "intervals": [[float(a), float(b)] for a, b in self.intervals],
                "achieved_errors": list(map(float, self.achieved_errors)),
                "budget": float(self.budget), "dt": float(self.dt)}


def delta_schedule(length: float, M: int, ratio: float = DELTA_RATIO) -> list:
    """delta_1 = length/4, delta_j = delta_{j-1}/ratio."""
    if not ratio > 2:
        raise InvalidArgumentError("delta ratio must exceed 2")
    d = [length / 4.0]
    for _ in range(1, M):
        d.append(d[-1] / ratio)
    return d


def additive_stage_table(decomp: TargetDecomposition, t0: float, T: float, ratio: float = DELTA_RATIO):
    """[(kind, window, a, b, j)] with kind 'idle' or 'add'."""
    M = decomp.M
    delta = delta_schedule(T - t0, M, ratio)
    wins = decomp.windows
    table = []
    t = t0
    for j in range(1, M + 1):
        a, b = (T - 2 * delta[j - 1], T - delta[j - 1]) if j < M else (T - delta[j - 1], T)
        if a > t + 1e-14:
            table.append(("idle", wins[j - 1], t, a, j))
        table.append(("add", wins[j - 1], a, b, j))
        t = b
    return delta, table


def additive_sequence(decomp: TargetDecomposition, T: float, eps: float, law: Frozen,
                      cfg: SolverConfig = SolverConfig(), grid: Optional[SpatialGrid] = None,
                      t0: float = 0.0, ratio: float = DELTA_RATIO, time_pieces: int = TIME_PIECES,
                      max_iter: int = 5000):
    """Per-window nonnegative additive controls on shrinking intervals before T.

    Window j acts on (T - 2 delta_j, T - delta_j) (the last window on
    (T - delta_M, T)) and is fitted so that its response at T, including the
    free decay through every later stage, matches the mollified piece within
    eps/(2M).

    Returns
    -------
    (AdditivePlan, ControlSchedule)
    """
    grid = grid or SpatialGrid(decomp.y_d.size)
    M = decomp.M
    budget = eps / (2 * M)
    delta, table = additive_stage_table(decomp, t0, T, ratio)
    base = cfg.resolve_dt(grid, T - t0)
    dt = min(base, delta[-1] / ADDITIVE_STEPS)
    level_lists = [stage_time_levels(a, b, dt if kind == "add" else base) for kind, _, a, b, _ in table]
    stages = []
    intervals, controls, errors = [], [], []
    for s, (kind, win, a, b, j) in enumerate(table):
        if kind == "idle":
            stages.append(ControlStage(a, b, win, Idle(), max_dt=base))
            continue
        piece = decomp.mollified[j - 1]
        later = np.concatenate(level_lists[s + 1:]) if s + 1 < len(table) else np.zeros(0)
        ctrl = nonneg_additive_control(win, State(piece, a), (a, b), law, cfg, grid, level_lists[s],
                                       later, time_pieces, budget, max_iter)
        intervals.append((a, b))
        controls.append(ctrl)
        errors.append(ctrl.residual)
        payload = FieldAdditive(ctrl.field) if np.any(ctrl.field.values > 0) else Idle()
        stages.append(ControlStage(a, b, win, payload, max_dt=dt))
    plan = AdditivePlan(delta, intervals, controls, errors, budget, dt)
    return plan, ControlSchedule(tuple(stages), "additive")


# ---------------------------------------------------------------------------
# additive -> multiplicative lifting
# ---------------------------------------------------------------------------


@dataclass
class LiftReport:
    floor: float
    u_max_used: float
    dropped_fraction: float
    clamped: int


def additive_to_multiplicative(traj: Trajectory, v_schedule: ControlSchedule, floor: Optional[float] = None,
                               u_max: float = LIFT_U_MAX):
    """Lift additive stages to u = v / y along the additive-run trajectory.

    ``traj`` must be the run under ``v_schedule``; its levels inside each
    additive stage are the sample times of the lifted field, so that the
    lifted run reproduces the additive one step for step.  Nodes with
    y < floor get no control.

    Returns
    -------
    (ControlSchedule, LiftReport)

    Raises
    ------
    LiftingInfeasible
        More than a 1e-3 fraction of the additive mass sits where y < floor.
    """
    if floor is None:
        floor = LIFT_FLOOR * float(np.abs(traj.values[0]).max(initial=0.0))
    if not floor > 0:
        raise LiftingInfeasible("lifting needs a positive floor (state vanishes)", best=0.0)
    grid = traj.grid
    stages = []
    dropped = 0.0
    total = 0.0
    clamped = 0
    u_used = 0.0
    offending = []
    for st in v_schedule.stages:
        if not isinstance(st.payload, FieldAdditive):
            stages.append(st)
            continue
        sel = (traj.times > st.t_start + 1e-13) & (traj.times <= st.t_end + 1e-13)
        times = traj.times[sel]
        ys = traj.values[sel]
        vs = np.array([st.evaluate(grid, t)[1] for t in times])
        ok = ys >= floor
        bad = (vs > 0) & ~ok
        if np.any(bad):
            offending.append((float(times[np.argmax(bad.any(axis=1))]),
                              float(grid.nodes[np.argmax(bad.any(axis=0))])))
        dropped += float(vs[bad].sum())
        total += float(vs.sum())
        u = np.where(ok, vs / np.where(ok, ys, 1.0), 0.0)
        clamped += int(np.count_nonzero(u > u_max))
        u = np.clip(u, 0.0, u_max)
        u_used = max(u_used, float(u.max(initial=0.0)))
        stages.append(ControlStage(st.t_start, st.t_end, st.window,
                                   FieldMultiplicative(SampledField(times, grid.nodes, u)), max_dt=st.max_dt))
    frac = dropped / total if total > 0 else 0.0
    if frac > LIFT_DROP_FRACTION:
        raise LiftingInfeasible(f"state below floor {floor:.3g} on the control support "
                                f"(dropped mass fraction {frac:.3g}, first at t, x = {offending[0]})",
                                best=frac, partial=offending)
    return ControlSchedule(tuple(stages), "lifted"), LiftReport(floor, u_used, frac, clamped)
