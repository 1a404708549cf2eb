"""Frozen-coefficient fixed-point iteration for the quasilinear problem."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..controls import FieldMultiplicative, ConstMultiplicative, ControlSchedule
from ..errors import BallViolation, InfeasibleError, InvalidArgumentError, NonConvergenceError
from ..pde_solver import (Frozen, Quasilinear, SolverConfig, SpatialGrid, State, Trajectory, l2_norm,
                          sampled_field, solve_forward)
from .pipeline import PipelineResult, synthesize_pipeline

# time samples of the lattice on which iterates are compared and damped
LATTICE_STEPS = 200


@dataclass(frozen=True)
class PicardConfig:
    R: float = 1.0
    gamma: float = 1.0
    max_iters: int = 5
    fix_tol: float = 1e-4

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidArgumentError("gamma must be positive")
        if not self.fix_tol > 0:
            raise InvalidArgumentError("fix_tol must be positive")
        if not self.R > 0:
            raise InvalidArgumentError("R must be positive")
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be >= 1")


@dataclass
class PicardResult:
    schedule: ControlSchedule
    trajectory: Trajectory
    terminal_error: float
    iterations: int
    distances: list = field(default_factory=list)
    control_sups: list = field(default_factory=list)
    iterate_sups: list = field(default_factory=list)
    thetas: list = field(default_factory=list)
    pipeline: Optional[PipelineResult] = None

    def __iter__(self):
        yield self.schedule
        yield self.trajectory
        yield self.history

    @property
    def history(self) -> dict:
        return {"distances": self.distances, "control_sups": self.control_sups,
                "iterate_sups": self.iterate_sups, "thetas": self.thetas}


def resample(traj: Trajectory, times: np.ndarray) -> np.ndarray:
    """Interior values of ``traj`` at ``times`` (linear in t)."""
    z = sampled_field(traj)
    x = traj.grid.nodes
    return np.array([z(x, t) for t in times])


def lattice_distance(a: np.ndarray, b: np.ndarray, times: np.ndarray, h: float) -> float:
    """Discrete L2(Q_T) distance with trapezoid weights in time."""
    sq = h * np.sum((a - b) ** 2, axis=1)
    return float(math.sqrt(np.trapezoid(sq, times)))


def freeze(law: Quasilinear, lattice: np.ndarray, times: np.ndarray, grid: SpatialGrid) -> Frozen:
    """Frozen field b(x, t) = a(z(x, t)) with sup-norms taken from the lattice."""
    xs = np.concatenate(([grid.left], grid.nodes, [grid.right]))
    full = np.column_stack([np.zeros(len(times)), lattice, np.zeros(len(times))])
    bvals = law.coefficient(full)

    def b(x, t):
        x = np.asarray(x, dtype=float)
        k = int(np.searchsorted(times, t))
        if k <= 0:
            row = bvals[0]
        elif k >= len(times):
            row = bvals[-1]
        else:
            w = (t - times[k - 1]) / (times[k] - times[k - 1])
            row = (1 - w) * bvals[k - 1] + w * bvals[k]
        return np.interp(x, xs, row)

    bt = float(np.abs(np.diff(bvals, axis=0)).max() / np.diff(times).min()) if len(times) > 1 else 0.0
    bx = float(np.abs(np.diff(bvals, axis=1)).max() / grid.h)
    return Frozen(b, float(bvals.min()), float(np.abs(bvals).max()), bt, bx)


def schedule_control_sup(schedule: ControlSchedule) -> float:
    out = 0.0
    for st in schedule.stages:
        p = st.payload
        if isinstance(p, ConstMultiplicative):
            out = max(out, p.m)
        elif isinstance(p, FieldMultiplicative) and hasattr(p.u, "values"):
            out = max(out, float(np.abs(p.u.values).max(initial=0.0)))
    return out


def picard_quasilinear(y0: State, y_d: State, eps: float, T: float, l: float, law: Quasilinear,
                       pcfg: PicardConfig = PicardConfig(), cfg: SolverConfig = SolverConfig(),
                       grid: Optional[SpatialGrid] = None, **pipeline_options) -> PicardResult:
    """Control the quasilinear equation by iterating frozen-coefficient syntheses.

    Starting from the free quasilinear solution z0 of the scaled data
    ``gamma * y0``, each iteration freezes b = a(z), synthesizes a schedule
    for the frozen problem, and re-solves the quasilinear equation under that
    schedule.  Iterates are compared on a fixed time lattice; the damping
    factor theta starts at 1 and is halved whenever the iterate distance grows.

    Returns
    -------
    PicardResult
        Unpacks as ``(schedule, trajectory, history)``.

    Raises
    ------
    BallViolation
        An iterate leaves the sup-norm ball of radius R.
    NonConvergenceError
        No fixed point within ``max_iters``; carries the distance history.
    InfeasibleError
        The converged schedule misses the target under the true dynamics.
    """
    grid = grid or SpatialGrid(y0.n)
    ys = State(pcfg.gamma * np.asarray(y0.values, dtype=float), 0.0)
    times = np.linspace(0.0, T, LATTICE_STEPS + 1)
    h = grid.h
    res = PicardResult(None, None, math.nan, 0)

    def ball(traj_sup, k):
        res.iterate_sups.append(traj_sup)
        if traj_sup > pcfg.R:
            raise BallViolation(f"iterate {k} has sup-norm {traj_sup:.4g} > R={pcfg.R}",
                                sup_norm=traj_sup, history=res.history)

    z_traj = solve_forward(ys, (0.0, T), law, None, cfg, grid)
    ball(z_traj.sup_norm(), 0)
    z = resample(z_traj, times)
    theta = 1.0
    prev = math.inf
    for k in range(1, pcfg.max_iters + 1):
        frozen = freeze(law, z, times, grid)
        pipe = synthesize_pipeline(ys, y_d, eps, T, l, frozen, cfg, grid, **pipeline_options)
        res.control_sups.append(schedule_control_sup(pipe.schedule))
        traj = solve_forward(ys, (0.0, T), law, pipe.schedule, cfg, grid)
        ball(traj.sup_norm(), k)
        z_new = resample(traj, times)
        dist = lattice_distance(z_new, z, times, h)
        if dist > prev:
            theta *= 0.5
        res.distances.append(dist)
        res.thetas.append(theta)
        prev = dist
        z = (1.0 - theta) * z + theta * z_new
        if dist <= pcfg.fix_tol:
            err = l2_norm(traj.final.values - y_d.values, h)
            res.schedule, res.trajectory, res.terminal_error = pipe.schedule, traj, err
            res.iterations, res.pipeline = k, pipe
            if not err < eps:
                raise InfeasibleError(f"fixed point misses the target under the true dynamics "
                                      f"({err:.4g} >= {eps:.4g})", best=err, partial=res)
            return res
    raise NonConvergenceError(f"no fixed point within {pcfg.max_iters} iterations "
                              f"(last distance {res.distances[-1]:.4g})",
                              residual=res.distances[-1], history=res.history)
