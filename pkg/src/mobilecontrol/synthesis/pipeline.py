"""Two-phase synthesis: damping sweep, then lifted additive correction."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..certificates import (CertificateReport, check_bernstein_boundary, check_nonnegativity,
                            check_time_derivative_bound, compute_energy_constants)
from ..controls import (ConstMultiplicative, ControlSchedule, ControlStage, compose_schedules,
                        idle_schedule)
from ..errors import ControlInfeasible, InfeasibleError, InvalidArgumentError
from ..pde_solver import Frozen, SolverConfig, SpatialGrid, State, Trajectory, l2_norm, solve_forward
from .additive import (DELTA_RATIO, TIME_PIECES, AdditivePlan, LiftReport, TargetDecomposition,
                       additive_sequence, additive_to_multiplicative, decompose_target)
from .sweep import DEFAULT_LADDER, SweepPlan, run_sweep


@dataclass
class PipelineResult:
    schedule: ControlSchedule
    trajectory: Trajectory
    terminal_error: float
    budgets: dict = field(default_factory=dict)
    sweep_plan: Optional[SweepPlan] = None
    decomposition: Optional[TargetDecomposition] = None
    additive_plan: Optional[AdditivePlan] = None
    lift_report: Optional[LiftReport] = None
    reports: list = field(default_factory=list)
    early_return: bool = False

    def __iter__(self):
        yield self.schedule
        yield self.trajectory


def sweep_stage_reports(plan: SweepPlan, law: Frozen) -> list[CertificateReport]:
    """Time-derivative and boundary-gradient certificates on every sweep stage."""
    out = []
    for rec, traj in zip(plan.stages, plan.stage_trajectories):
        stage = ControlStage(rec.t_start, rec.T_j, rec.window, ConstMultiplicative(rec.m), max_dt=rec.dt)
        sched = ControlSchedule((stage,), f"sweep-{rec.j}")
        consts = compute_energy_constants(traj.initial, law, u_sup=rec.m, ut_sup=0.0,
                                          T=rec.T_j - rec.t_start, grid=traj.grid, t0=rec.t_start)
        a = check_time_derivative_bound(traj, consts, sched)
        a.name = f"{a.name}[stage {rec.j}]"
        b = check_bernstein_boundary(traj, law, sched)
        b.name = f"{b.name}[stage {rec.j}]"
        out += [a, b]
    return out


def synthesize_pipeline(y0: State, y_d: State, eps: float, T: float, l: float, law: Frozen,
                        cfg: SolverConfig = SolverConfig(), grid: Optional[SpatialGrid] = None,
                        m_ladder: Sequence[float] = DEFAULT_LADDER, delta_ratio: float = DELTA_RATIO,
                        time_pieces: int = TIME_PIECES, nnls_iter: int = 5000) -> PipelineResult:
    """Steer nonnegative ``y0`` to within ``eps`` of ``y_d`` at time ``T``.

    Phase 1 sweeps the state below eps/2 on [0, T_M] with T_M <= T/2.  Phase 2
    fits nonnegative additive controls reaching y_d on top of the free decay
    of the swept state, lifts them to multiplicative controls and re-simulates.
    Every accepted result has ``terminal_error < eps`` under a fresh
    simulation of the composed schedule.

    Parameters
    ----------
    y0, y_d : State
        Nonnegative initial and target states.
    eps, T, l : float
        Tolerance, horizon and window length.
    law : Frozen
        Diffusion field.

    Returns
    -------
    PipelineResult
        Unpacks as ``(schedule, trajectory)``.

    Raises
    ------
    InfeasibleError
        A sub-stage could not meet its budget, or the terminal error could
        not be certified.
    """
    grid = grid or SpatialGrid(y0.n)
    if not (eps > 0 and T > 0):
        raise InvalidArgumentError("eps and T must be positive")
    if np.any(y0.values < 0) or np.any(y_d.values < 0):
        raise InvalidArgumentError("pipeline requires nonnegative initial and target states")
    h = grid.h
    n0 = l2_norm(y0.values, h)
    nd = l2_norm(y_d.values, h)
    if n0 + nd < eps:
        sched = idle_schedule(0.0, T, "idle")
        traj = solve_forward(State(y0.values, 0.0), (0.0, T), law, sched, cfg, grid)
        err = l2_norm(traj.final.values - y_d.values, h)
        if not err < eps:
            raise InfeasibleError(f"idle run misses the target ({err:.4g} >= {eps:.4g})", best=err)
        return PipelineResult(sched, traj, err, {"initial_norm": n0, "target_norm": nd}, early_return=True,
                              reports=[check_nonnegativity(traj, sched)])
    if not np.any(y0.values > 0):
        raise InvalidArgumentError("pipeline requires y0 not identically zero")

    plan, y_M = run_sweep(State(y0.values, 0.0), eps, l, law, T / 2.0, cfg, grid, m_ladder)
    T_M = plan.T_M
    sweep_sched = plan.schedule()
    y_M = State(y_M.values, T_M)
    free = solve_forward(y_M, (T_M, T), law, None, cfg, grid)
    free_T = free.final.values
    eps2 = eps / 2.0
    decomp = decompose_target(y_d, l, eps2, grid)
    add_plan, add_sched = additive_sequence(decomp, T, eps2, law, cfg, grid, t0=T_M, ratio=delta_ratio,
                                            time_pieces=time_pieces, max_iter=nnls_iter)
    add_run = solve_forward(y_M, (T_M, T), law, add_sched, cfg, grid)
    lifted, lift_rep = additive_to_multiplicative(add_run, add_sched)
    phase2 = solve_forward(y_M, (T_M, T), law, lifted, cfg, grid)
    lift_defect = l2_norm(phase2.final.values - add_run.final.values, h)
    phase2_err = l2_norm(phase2.final.values - (y_d.values + free_T), h)
    budgets = {
        "sweep_norm": plan.final_norm,
        "free_decay_norm": l2_norm(free_T, h),
        "free_decay_ok": l2_norm(free_T, h) <= plan.final_norm * (1 + 1e-9) and plan.final_norm <= eps2,
        "decomposition_error": decomp.decomposition_error,
        "additive_errors": list(add_plan.achieved_errors),
        "lift_defect": lift_defect,
        "phase2_error": phase2_err,
        "phase2_ok": phase2_err < eps2,
        "T_M": T_M,
    }
    if not phase2_err < eps2:
        raise ControlInfeasible(f"phase-2 error {phase2_err:.4g} >= eps/2", best=phase2_err, partial=budgets)
    full = compose_schedules(sweep_sched, lifted, "pipeline")
    traj = solve_forward(State(y0.values, 0.0), (0.0, T), law, full, cfg, grid)
    err = l2_norm(traj.final.values - y_d.values, h)
    budgets["terminal_error"] = err
    if not err < eps:
        raise InfeasibleError(f"terminal error {err:.4g} >= eps={eps:.4g}", best=err, partial=budgets)
    reports = [check_nonnegativity(traj, full)] + sweep_stage_reports(plan, law)
    return PipelineResult(full, traj, err, budgets, plan, decomp, add_plan, lift_rep, reports)
