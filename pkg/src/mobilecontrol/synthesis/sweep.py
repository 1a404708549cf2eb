"""Damping sweep: constant damping -m on consecutive windows until the
L2 norm of the state is below eps/2."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..certificates import compute_energy_constants
from ..controls import ConstMultiplicative, ControlSchedule, ControlStage, Idle, Window, sweep_window_sequence
from ..errors import InvalidArgumentError, StageInfeasible
from ..pde_solver import (Frozen, SolverConfig, SpatialGrid, State, Trajectory, l2_norm, stage_dt,
                          step_implicit, window_energy)

DEFAULT_LADDER = tuple(2.0 ** k for k in range(21))
# steps per stage-gap interval when the gap rule is active
GAP_RESOLUTION = 10


def window_threshold(eps: float, M: int) -> float:
    """Window-energy threshold eps^2 / (4 (2M - 1))."""
    return eps ** 2 / (4.0 * (2 * M - 1))


def cumulative_threshold(eps: float, M: int, j: int) -> float:
    return (2 * j - 1) * eps ** 2 / (4.0 * (2 * M - 1))


def gap_limit(eps: float, M: int, C1: float) -> float:
    """Stage-gap bound eps^2 / (8 (2M - 1) C1)."""
    return math.inf if C1 <= 0 else eps ** 2 / (8.0 * (2 * M - 1) * C1)


@dataclass
class SweepStageRecord:
    j: int
    window: Window
    m: float
    t_start: float
    T_j: float
    dt: float
    window_energy: float
    threshold: float
    gap_limit: float
    C1: float
    cumulative_energy: float
    cumulative_bound: float
    boundary_term: float
    tried: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "j": self.j, "r": self.window.r, "l": self.window.l, "m": self.m,
            "t_start": self.t_start, "T_j": self.T_j, "dt": self.dt,
            "window_energy": self.window_energy, "threshold": self.threshold,
            "gap_limit": self.gap_limit if math.isfinite(self.gap_limit) else None,
            "C1": self.C1, "cumulative_energy": self.cumulative_energy,
            "cumulative_bound": self.cumulative_bound, "boundary_term": self.boundary_term,
            "ladder_tried": [[float(m), float(e)] for m, e in self.tried],
        }


@dataclass
class SweepPlan:
    M: int
    l: float
    eps: float
    T_budget: float
    stages: list = field(default_factory=list)
    stage_trajectories: list = field(default_factory=list)
    final_norm: float = float("nan")

    @property
    def T_M(self) -> float:
        return self.stages[-1].T_j if self.stages else float("nan")

    def schedule(self, schedule_id: str = "sweep") -> ControlSchedule:
        out = []
        for rec in self.stages:
            payload = ConstMultiplicative(rec.m) if rec.m > 0 else Idle()
            out.append(ControlStage(rec.t_start, rec.T_j, rec.window, payload, max_dt=rec.dt))
        return ControlSchedule(tuple(out), schedule_id)

    def trajectory(self) -> Trajectory:
        traj = self.stage_trajectories[0]
        for nxt in self.stage_trajectories[1:]:
            traj = traj.concat(nxt)
        return traj

    def to_dict(self) -> dict:
        return {"M": self.M, "l": self.l, "eps": self.eps, "T_budget": self.T_budget,
                "T_M": self.T_M, "final_norm": self.final_norm,
                "stages": [s.to_dict() for s in self.stages]}


@dataclass
class StageResult:
    m: float
    T_j: float
    y_out: State
    record: SweepStageRecord
    trajectory: Trajectory


def boundary_term(traj: Trajectory, law, x_if: float) -> float:
    """2 * int b(x_if, t) y_x(x_if, t) y(x_if, t) dt along a trajectory."""
    if len(traj.times) < 2:
        return 0.0
    grid = traj.grid
    xs = np.concatenate(([grid.left], grid.nodes, [grid.right]))
    full = traj.full_values()
    h = grid.h
    vals, ders = [], []
    for row in full:
        vals.append(np.interp(x_if, xs, row))
        ders.append((np.interp(x_if + 0.5 * h, xs, row) - np.interp(x_if - 0.5 * h, xs, row)) / h)
    b = np.array([float(law.coefficient(np.array([x_if]), t)[0]) for t in traj.times])
    return float(2.0 * np.trapezoid(b * np.array(ders) * np.array(vals), traj.times))


def _run_candidate(y_in, window, m, t_start, deadline, dts, law, cfg, grid, accept):
    """Step under damping m on ``window``; stop at the first accepted level."""
    mask = window.mask(grid)
    u = np.zeros(grid.n)
    u[mask] = -m
    k_max = max(int(math.ceil((deadline - t_start) / dts - 1e-9)), 1)
    times = [t_start]
    values = [np.array(y_in.values, dtype=float)]
    y = State(y_in.values, t_start)
    best = math.inf
    for k in range(1, k_max + 1):
        t_new = t_start + dts * k if k < k_max else deadline
        y = State(step_implicit(y, t_new - y.time, law, (u, None), cfg, grid).values, t_new)
        times.append(t_new)
        values.append(np.array(y.values))
        ok, energy = accept(y)
        best = min(best, energy)
        if ok:
            return True, times, values, best
    return False, times, values, best


def sweep_stage(y_in: State, window: Window, j: int, M: int, eps: float, law: Frozen, t_start: float,
                T_budget: float, m_ladder: Sequence[float] = DEFAULT_LADDER,
                cfg: SolverConfig = SolverConfig(), grid: Optional[SpatialGrid] = None,
                l: Optional[float] = None) -> StageResult:
    """One sweep stage on ``window``.

    Tries each damping constant of ``m_ladder`` in order and scans the
    trajectory for the earliest time at which the window energy is below
    eps^2/(4(2M-1)) and, for j >= 2, the stage-gap rule holds.

    Parameters
    ----------
    y_in : State
        Nonnegative incoming state at ``t_start``.
    window : Window
        Damping window of this stage.
    j, M : int
        Stage index (1-based) and number of windows.
    eps : float
        Target tolerance.
    law : Frozen
        Diffusion field.
    t_start, T_budget : float
        Stage start and the end of the time available for the sweep.
    m_ladder : sequence of float
        Candidate damping constants, tried in order.

    Returns
    -------
    StageResult

    Raises
    ------
    StageInfeasible
        No candidate meets both conditions; carries the best window energy.
    """
    grid = grid or SpatialGrid(y_in.n)
    if np.any(y_in.values < 0):
        raise InvalidArgumentError("sweep requires a nonnegative incoming state")
    if not t_start < T_budget:
        raise InvalidArgumentError(f"t_start={t_start} must precede T_budget={T_budget}")
    l = window.l if l is None else l
    thr = window_threshold(eps, M)
    base_dt = cfg.resolve_dt(grid, T_budget - t_start)
    tried = []
    # stop strictly before the budget end
    budget_end = T_budget - 1e-9 * max(1.0, T_budget)

    def make_accept(deadline):
        def accept(y):
            e = window_energy(y.values, grid, window.lo, window.hi)
            return e <= thr and y.time <= deadline + 1e-12, e
        return accept

    candidates = list(m_ladder)
    if window_energy(y_in.values, grid, window.lo, window.hi) <= thr:
        candidates = [0.0] + candidates
    best = math.inf
    for m in candidates:
        C1 = 0.0
        limit = math.inf
        if j >= 2:
            consts = compute_energy_constants(y_in, law, u_sup=m, ut_sup=0.0, T=T_budget - t_start,
                                              grid=grid, t0=t_start)
            C1 = consts.C1
            limit = gap_limit(eps, M, C1)
        deadline = min(t_start + limit, budget_end)
        if not deadline > t_start:
            tried.append((m, math.inf))
            continue
        dts = stage_dt(base_dt, m)
        if math.isfinite(limit):
            dts = min(dts, limit / GAP_RESOLUTION)
        if m == 0.0:
            # idle candidate: a single step
            deadline = min(t_start + dts, deadline)
        ok, times, values, e_best = _run_candidate(y_in, window, m, t_start, deadline, dts, law, cfg,
                                                   grid, make_accept(deadline))
        tried.append((m, e_best))
        best = min(best, e_best)
        if not ok:
            continue
        y_out = State(values[-1], times[-1])
        n_lev = len(times)
        traj = Trajectory(np.array(times), np.array(values), dts, law, grid, f"sweep-{j}",
                          np.concatenate(([-1], np.zeros(n_lev - 1, dtype=int))),
                          np.zeros((n_lev, 2)))
        covered = min(j * l, 1.0)
        cum = window_energy(y_out.values, grid, 0.0, covered)
        x_if = window.lo if j >= 2 else window.hi
        rec = SweepStageRecord(j, window, float(m), t_start, times[-1], dts,
                               window_energy(y_out.values, grid, window.lo, window.hi), thr, limit, C1,
                               cum, cumulative_threshold(eps, M, j), boundary_term(traj, law, x_if), tried)
        return StageResult(float(m), times[-1], y_out, rec, traj)
    raise StageInfeasible(
        f"sweep stage {j} on ({window.lo:.4g}, {window.hi:.4g}): ladder exhausted "
        f"(best window energy {best:.4g}, threshold {thr:.4g})", best=best, partial=tried)


def run_sweep(y0: State, eps: float, l: float, law: Frozen, T_budget: float,
              cfg: SolverConfig = SolverConfig(), grid: Optional[SpatialGrid] = None,
              m_ladder: Sequence[float] = DEFAULT_LADDER):
    """Chain sweep stages over the window sequence.

    Returns
    -------
    (SweepPlan, State)
        The plan with per-stage certified bounds and the state at T_M.

    Raises
    ------
    StageInfeasible
        A stage failed; ``partial`` holds the plan built so far.
    """
    grid = grid or SpatialGrid(y0.n)
    if not eps > 0:
        raise InvalidArgumentError("eps must be positive")
    windows = sweep_window_sequence(l)
    M = len(windows)
    plan = SweepPlan(M, l, eps, T_budget)
    y = State(y0.values, y0.time)
    t = y0.time
    for j, win in enumerate(windows, start=1):
        try:
            res = sweep_stage(y, win, j, M, eps, law, t, T_budget, m_ladder, cfg, grid, l)
        except StageInfeasible as exc:
            exc.partial = plan
            raise
        plan.stages.append(res.record)
        plan.stage_trajectories.append(res.trajectory)
        y, t = res.y_out, res.T_j
    plan.final_norm = l2_norm(y.values, grid.h)
    if plan.final_norm > eps / 2 * (1 + 1e-9):
        raise StageInfeasible(f"sweep ended with norm {plan.final_norm:.4g} > eps/2",
                              best=plan.final_norm, partial=plan)
    return plan, y
