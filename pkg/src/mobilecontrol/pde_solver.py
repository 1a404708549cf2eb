"""Finite-difference method of lines for 1D (quasi)linear diffusion with
multiplicative and additive controls.

Backward Euler in time, conservative three-point flux in space, Dirichlet
data eliminated from the unknown vector.  The quasilinear case is solved by
damped Newton on the tridiagonal Jacobian with a frozen-coefficient
(Picard) fallback.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.fft import dst
from scipy.linalg import solve_banded

from .errors import InvalidArgumentError, MMatrixViolation, NonConvergenceError

# sampling refinement used when certifying coefficient bounds
SAMPLING_REFINEMENT = 4


# ---------------------------------------------------------------------------
# grid, laws, states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform mesh of ``n`` interior nodes on ``(left, right)``."""

    n: int
    left: float = 0.0
    right: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidArgumentError(f"grid needs a positive node count, got {self.n}")
        if not self.right > self.left:
            raise InvalidArgumentError("grid interval must have positive length")

    @property
    def length(self) -> float:
        return self.right - self.left

    @property
    def h(self) -> float:
        return self.length / (self.n + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.left + self.h * np.arange(1, self.n + 1)

    @property
    def faces(self) -> np.ndarray:
        """Cell-face midpoints x_{i+1/2}, i = 0..n."""
        return self.left + self.h * (np.arange(self.n + 1) + 0.5)

    def with_boundary(self, values: np.ndarray, g0: float = 0.0, g1: float = 0.0) -> np.ndarray:
        return np.concatenate(([g0], values, [g1]))

    def mask(self, lo: float, hi: float) -> np.ndarray:
        """Nodes strictly inside the open interval (lo, hi)."""
        x = self.nodes
        return (x > lo) & (x < hi)


def build_grid(n: int) -> SpatialGrid:
    if int(n) != n or n < 2:
        raise InvalidArgumentError(f"build_grid requires n >= 2, got {n}")
    return SpatialGrid(int(n))


def subgrid(grid: SpatialGrid, lo: float, hi: float, atol: float = 1e-9) -> SpatialGrid:
    """Grid on (lo, hi) sharing the spacing of ``grid`` when the endpoints align."""
    if not (grid.left <= lo < hi <= grid.right):
        raise InvalidArgumentError(f"subinterval ({lo}, {hi}) not inside grid domain")
    cells = (hi - lo) / grid.h
    n_sub = max(int(round(cells)) - 1, 1)
    return SpatialGrid(n_sub, lo, hi)


def l2_norm(values: np.ndarray, h: float) -> float:
    """Discrete L2 norm h * sum(y_i^2) with zero boundary values."""
    values = np.asarray(values, dtype=float)
    return float(math.sqrt(h * float(np.dot(values, values))))


def window_energy(values: np.ndarray, grid: SpatialGrid, lo: float, hi: float) -> float:
    """h * sum of y^2 over nodes inside [lo, hi]."""
    x = grid.nodes
    sel = (x >= lo - 1e-12) & (x <= hi + 1e-12)
    v = np.asarray(values)[sel]
    return float(grid.h * np.dot(v, v))


@dataclass(frozen=True, eq=False)
class Quasilinear:
    """State-dependent diffusion a(y) with certified bounds on a state range."""

    a: Callable[[np.ndarray], np.ndarray]
    a_min: float
    a_d1_max: float
    a_d2_max: float
    da: Optional[Callable[[np.ndarray], np.ndarray]] = None
    state_range: tuple = (-10.0, 10.0)

    def coefficient(self, y):
        return np.asarray(self.a(np.asarray(y, dtype=float)), dtype=float) * np.ones_like(y, dtype=float)

    def derivative(self, y):
        y = np.asarray(y, dtype=float)
        if self.da is not None:
            return np.asarray(self.da(y), dtype=float) * np.ones_like(y)
        eps = 1e-6 * np.maximum(1.0, np.abs(y))
        return (self.coefficient(y + eps) - self.coefficient(y - eps)) / (2 * eps)

    def validate(self, samples: int = 4001) -> None:
        lo, hi = self.state_range
        r = np.linspace(lo, hi, samples)
        vals = self.coefficient(r)
        if not np.all(np.isfinite(vals)):
            raise InvalidArgumentError("diffusion coefficient is not finite on the declared range")
        if self.a_min <= 0 or vals.min() < self.a_min - 1e-12:
            raise InvalidArgumentError(
                f"diffusion coefficient violates inf a > 0 (min sampled {vals.min():.6g}, "
                f"declared a_min {self.a_min:.6g})")
        d1 = self.derivative(r)
        step = r[1] - r[0]
        d2 = np.gradient(d1, step)
        if np.abs(d1).max() > self.a_d1_max * (1 + 1e-6) + 1e-9:
            raise InvalidArgumentError("|a'| exceeds declared bound")
        if np.abs(d2).max() > self.a_d2_max * (1 + 1e-3) + 1e-6:
            raise InvalidArgumentError("|a''| exceeds declared bound")

    @classmethod
    def certified(cls, a, state_range=(-10.0, 10.0), da=None, samples=4001):
        """Build a law whose bounds are measured by dense sampling."""
        r = np.linspace(state_range[0], state_range[1], samples)
        tmp = cls(a, 1.0, np.inf, np.inf, da=da, state_range=state_range)
        vals = tmp.coefficient(r)
        d1 = tmp.derivative(r)
        d2 = np.gradient(d1, r[1] - r[0])
        law = cls(a, float(vals.min()), float(np.abs(d1).max()), float(np.abs(d2).max()),
                  da=da, state_range=state_range)
        law.validate(samples)
        return law


@dataclass(frozen=True, eq=False)
class Frozen:
    """Space-time diffusion field b(x, t) >= rho with certified sup-norms.

    ``b`` must accept an array of positions and a scalar time.  ``value`` is
    set for spatially and temporally constant fields, which enables the
    closed-form oracles.
    """

    b: Callable[[np.ndarray, float], np.ndarray]
    rho: float
    b_sup: float
    bt_sup: float
    bx_sup: float
    value: Optional[float] = None

    def coefficient(self, x, t):
        x = np.asarray(x, dtype=float)
        return np.asarray(self.b(x, t), dtype=float) * np.ones_like(x)

    @classmethod
    def constant(cls, value: float = 1.0) -> "Frozen":
        if value <= 0:
            raise InvalidArgumentError("constant diffusion must be positive")
        v = float(value)
        return cls(lambda x, t: np.full_like(np.asarray(x, dtype=float), v), v, v, 0.0, 0.0, value=v)

    @classmethod
    def from_function(cls, b, T: float, n: int = 200, nt: int = 200,
                      refine: int = SAMPLING_REFINEMENT) -> "Frozen":
        """Certify rho and the sup-norms of b, b_t, b_x by dense sampling."""
        rho, b_sup, bt_sup, bx_sup = sample_field_bounds(b, T, n * refine, nt * refine)
        law = cls(b, rho, b_sup, bt_sup, bx_sup)
        if rho <= 0:
            raise InvalidArgumentError(f"frozen diffusion violates b >= rho > 0 (min sampled {rho:.6g})")
        return law

    def validate(self, T: float, n: int = 200, nt: int = 50) -> None:
        rho, *_ = sample_field_bounds(self.b, T, n, nt)
        if self.rho <= 0 or rho < self.rho - 1e-12:
            raise InvalidArgumentError(f"b(x,t) falls below rho={self.rho} (sampled min {rho:.6g})")


def sample_field_bounds(b, T: float, nx: int, nt: int):
    """(min b, sup|b|, sup|b_t|, sup|b_x|) sampled on a (nx+1) x (nt+1) lattice."""
    x = np.linspace(0.0, 1.0, nx + 1)
    ts = np.linspace(0.0, max(T, 0.0), nt + 1)
    vals = np.array([np.asarray(b(x, t), dtype=float) * np.ones_like(x) for t in ts])
    bx = np.abs(np.diff(vals, axis=1)).max() / (x[1] - x[0]) if nx > 0 else 0.0
    bt = np.abs(np.diff(vals, axis=0)).max() / (ts[1] - ts[0]) if nt > 0 and T > 0 else 0.0
    return float(vals.min()), float(np.abs(vals).max()), float(bt), float(bx)


@dataclass(frozen=True, eq=False)
class State:
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if not np.all(np.isfinite(vals)):
            raise InvalidArgumentError("state has non-finite entries")
        if self.time < 0:
            raise InvalidArgumentError("state time must be >= 0")

    @property
    def n(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class SolverConfig:
    dt: Optional[float] = None
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    picard_fallback: bool = True
    max_halvings: int = 10
    max_substep_level: int = 12

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise InvalidArgumentError("dt must be positive")
        if not self.newton_tol > 0:
            raise InvalidArgumentError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise InvalidArgumentError("newton_max_iter must be >= 1")

    def resolve_dt(self, grid: SpatialGrid, span: float) -> float:
        if self.dt is not None:
            return self.dt
        return min(grid.h, 1e-3 * span) if span > 0 else grid.h


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-stamped discrete states.

    ``values`` has shape (len(times), n); ``stage_ids`` marks which schedule
    stage produced each level (-1 for the initial level and for free runs).
    """

    times: np.ndarray
    values: np.ndarray
    dt: float
    law: object
    grid: SpatialGrid
    schedule_id: str = "none"
    stage_ids: Optional[np.ndarray] = None
    boundary: Optional[np.ndarray] = None
    newton_iterations: Optional[np.ndarray] = None

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise InvalidArgumentError("trajectory times must be strictly increasing")
        for name in ("times", "values"):
            getattr(self, name).setflags(write=False)

    @property
    def states(self) -> list[State]:
        return [State(v, float(t)) for t, v in zip(self.times, self.values)]

    @property
    def initial(self) -> State:
        return State(self.values[0], float(self.times[0]))

    @property
    def final(self) -> State:
        return State(self.values[-1], float(self.times[-1]))

    def at(self, t: float) -> State:
        """Stored state whose time is closest to ``t``."""
        k = int(np.argmin(np.abs(self.times - t)))
        return State(self.values[k], float(self.times[k]))

    def full_values(self) -> np.ndarray:
        """Values padded with the Dirichlet data, shape (len(times), n + 2)."""
        bnd = self.boundary if self.boundary is not None else np.zeros((len(self.times), 2))
        return np.column_stack([bnd[:, 0], self.values, bnd[:, 1]])

    def trace(self, x: float) -> Callable[[float], float]:
        """Time function t -> y(x, t), linear in t and in x between nodes."""
        xs = np.concatenate(([self.grid.left], self.grid.nodes, [self.grid.right]))
        full = self.full_values()
        col = np.array([np.interp(x, xs, row) for row in full])
        times = self.times
        return lambda t: float(np.interp(t, times, col))

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0

    def l2_norms(self) -> np.ndarray:
        return np.sqrt(self.grid.h * np.sum(self.values ** 2, axis=1))

    def l2_spacetime(self) -> float:
        """Discrete L2(Q_T) norm with trapezoid weights in time."""
        if len(self.times) < 2:
            return 0.0
        sq = self.grid.h * np.sum(self.values ** 2, axis=1)
        return float(math.sqrt(np.trapezoid(sq, self.times)))

    def concat(self, other: "Trajectory") -> "Trajectory":
        if abs(other.times[0] - self.times[-1]) > 1e-12:
            raise InvalidArgumentError("trajectories do not join")
        sid_a = self.stage_ids if self.stage_ids is not None else -np.ones(len(self.times), int)
        sid_b = other.stage_ids if other.stage_ids is not None else -np.ones(len(other.times), int)
        offset = sid_a.max() + 1 if sid_a.size else 0
        sid_b = np.where(sid_b >= 0, sid_b + offset, -1)
        return Trajectory(
            np.concatenate([self.times, other.times[1:]]),
            np.vstack([self.values, other.values[1:]]),
            self.dt, self.law, self.grid, f"{self.schedule_id}+{other.schedule_id}",
            np.concatenate([sid_a, sid_b[1:]]),
            None if self.boundary is None or other.boundary is None
            else np.vstack([self.boundary, other.boundary[1:]]),
        )


def sampled_field(traj: Trajectory):
    """Callable (x, t) -> z(x, t), linear in x and t, from a trajectory."""
    xs = np.concatenate(([traj.grid.left], traj.grid.nodes, [traj.grid.right]))
    full = traj.full_values()
    times = traj.times

    def z(x, t):
        x = np.asarray(x, dtype=float)
        k = int(np.searchsorted(times, t))
        if k <= 0:
            row = full[0]
        elif k >= len(times):
            row = full[-1]
        else:
            w = (t - times[k - 1]) / (times[k] - times[k - 1])
            row = (1 - w) * full[k - 1] + w * full[k]
        return np.interp(x, xs, row)

    return z


# ---------------------------------------------------------------------------
# one implicit step
# ---------------------------------------------------------------------------


def _assemble_linear(grid, dt, kface, u, boundary):
    """Banded (3, n) matrix and boundary rhs for coefficients at the faces."""
    h2 = grid.h ** 2
    n = grid.n
    ab = np.zeros((3, n))
    ab[1] = 1.0 / dt + (kface[:-1] + kface[1:]) / h2 - u
    ab[0, 1:] = -kface[1:-1] / h2
    ab[2, :-1] = -kface[1:-1] / h2
    bc = np.zeros(n)
    bc[0] += kface[0] / h2 * boundary[0]
    bc[-1] += kface[-1] / h2 * boundary[1]
    return ab, bc


def _certify_mmatrix(ab, u, dt):
    """Raise unless the Z-matrix ``ab`` is certified to be an M-matrix.

    Strict row dominance (dt * max u < 1) is the cheap sufficient test; when
    it fails, semipositivity is checked directly: A w = 1 with w > 0.
    """
    upos = np.max(u) if u.size else 0.0
    if upos * dt < 1.0:
        return
    w = solve_banded((1, 1), ab, np.ones(ab.shape[1]))
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise MMatrixViolation(f"step matrix is not an M-matrix (dt={dt:.3g}, max u={upos:.3g})")


def mmatrix_dt_threshold(u) -> float:
    """Largest dt for which the implicit matrix is row-dominant for every law."""
    upos = float(np.max(u)) if np.size(u) else 0.0
    return math.inf if upos <= 0 else 1.0 / upos


def _residual(grid, a_law, y_full, yold, dt, u, v):
    h = grid.h
    m = 0.5 * (y_full[:-1] + y_full[1:])
    d = np.diff(y_full)
    flux = a_law.coefficient(m) * d / h
    return (y_full[1:-1] - yold) / dt - np.diff(flux) / h - u * y_full[1:-1] - v


def _jacobian(grid, a_law, y_full, dt, u):
    h = grid.h
    m = 0.5 * (y_full[:-1] + y_full[1:])
    d = np.diff(y_full)
    a = a_law.coefficient(m)
    da = a_law.derivative(m)
    dF_left = (0.5 * da * d - a) / h    # dF_{k+1/2}/dy_k
    dF_right = (0.5 * da * d + a) / h   # dF_{k+1/2}/dy_{k+1}
    n = grid.n
    ab = np.zeros((3, n))
    ab[1] = 1.0 / dt - u - (dF_left[1:] - dF_right[:-1]) / h
    ab[0, 1:] = -dF_right[1:-1] / h
    ab[2, :-1] = dF_left[1:-1] / h
    return ab


def step_implicit(state: State, dt: float, law, control, cfg: SolverConfig = SolverConfig(),
                  grid: Optional[SpatialGrid] = None, boundary=(0.0, 0.0)) -> State:
    """Advance one backward-Euler step.

    Parameters
    ----------
    state : State
        Values at the current time level.
    dt : float
        Step length.
    law : Quasilinear or Frozen
        Diffusion law; frozen fields are evaluated at the faces and the new time.
    control : tuple of arrays
        ``(u, v)`` nodal multiplicative and additive controls at the new level.
    boundary : tuple of float
        Dirichlet values at the two ends at the new level.

    Returns
    -------
    State
        Solution at ``state.time + dt``.
    """
    new, _ = _step(state.values, state.time, dt, law, control, cfg,
                   grid or SpatialGrid(state.n), boundary)
    return State(new, state.time + dt)


def _step(yold, t, dt, law, control, cfg, grid, boundary):
    u, v = control
    n = grid.n
    u = np.zeros(n) if u is None else np.asarray(u, dtype=float)
    v = np.zeros(n) if v is None else np.asarray(v, dtype=float)
    t_new = t + dt
    if isinstance(law, Frozen):
        kface = law.coefficient(grid.faces, t_new)
        ab, bc = _assemble_linear(grid, dt, kface, u, boundary)
        _certify_mmatrix(ab, u, dt)
        return solve_banded((1, 1), ab, yold / dt + v + bc), 0
    if isinstance(law, Quasilinear):
        return _newton(yold, t_new, dt, law, u, v, cfg, grid, boundary)
    raise InvalidArgumentError(f"unknown diffusion law {type(law).__name__}")


def _newton(yold, t_new, dt, law, u, v, cfg, grid, boundary):
    g0, g1 = boundary
    scale = max(np.abs(yold).max(initial=0.0) / dt, np.abs(v).max(initial=0.0),
                max(abs(g0), abs(g1)) / grid.h ** 2)
    tol = cfg.newton_tol * max(scale, 1e-300)

    def full(y):
        return np.concatenate(([g0], y, [g1]))

    y = yold.copy()
    r = _residual(grid, law, full(y), yold, dt, u, v)
    rn = np.abs(r).max()
    it = 0
    while rn > tol and it < cfg.newton_max_iter:
        it += 1
        J = _jacobian(grid, law, full(y), dt, u)
        delta = solve_banded((1, 1), J, -r)
        lam = 1.0
        for _ in range(cfg.max_halvings + 1):
            y_try = y + lam * delta
            r_try = _residual(grid, law, full(y_try), yold, dt, u, v)
            rn_try = np.abs(r_try).max()
            if np.isfinite(rn_try) and rn_try < rn:
                break
            lam *= 0.5
        else:
            break
        y, r, rn = y_try, r_try, rn_try
    if rn > tol and cfg.picard_fallback:
        y, rn, extra = _picard_step(y, yold, t_new, dt, law, u, v, grid, boundary, tol)
        it += extra
    if not rn <= tol:
        raise NonConvergenceError(f"implicit step failed to converge at t={t_new:.6g}",
                                  residual=float(rn), time=t_new)
    kface = law.coefficient(0.5 * (full(y)[:-1] + full(y)[1:]))
    ab, _ = _assemble_linear(grid, dt, kface, u, boundary)
    _certify_mmatrix(ab, u, dt)
    return y, it


def _picard_step(y, yold, t_new, dt, law, u, v, grid, boundary, tol, max_iter=200):
    g0, g1 = boundary
    rn = np.inf
    for k in range(max_iter):
        yf = np.concatenate(([g0], y, [g1]))
        kface = law.coefficient(0.5 * (yf[:-1] + yf[1:]))
        ab, bc = _assemble_linear(grid, dt, kface, u, boundary)
        y = solve_banded((1, 1), ab, yold / dt + v + bc)
        rn = np.abs(_residual(grid, law, np.concatenate(([g0], y, [g1])), yold, dt, u, v)).max()
        if rn <= tol:
            return y, rn, k + 1
    return y, rn, max_iter


# ---------------------------------------------------------------------------
# time integration
# ---------------------------------------------------------------------------


def stage_time_levels(t0: float, t1: float, dt: float) -> np.ndarray:
    """Step end times on [t0, t1]: uniform by dt, last step shortened."""
    span = t1 - t0
    if span <= 0:
        return np.zeros(0)
    k = max(int(math.ceil(span / dt - 1e-9)), 1)
    levels = t0 + dt * np.arange(1, k + 1)
    levels[-1] = t1
    return levels


def stage_dt(dt: float, damping: float) -> float:
    """dt reduced by max(1, m dt) for strongly damped stages."""
    return dt / max(1.0, damping * dt)


def _segments(schedule, t_start, t_end):
    """(stage_index, stage, a, b) pieces of the schedule intersecting the span."""
    if schedule is None:
        return [(-1, None, t_start, t_end)]
    out = []
    stages = schedule.stages
    if not stages:
        raise InvalidArgumentError("empty schedule")
    if stages[0].t_start > t_start + 1e-12 or stages[-1].t_end < t_end - 1e-12:
        raise InvalidArgumentError(
            f"schedule [{stages[0].t_start}, {stages[-1].t_end}] does not cover [{t_start}, {t_end}]")
    for k, st in enumerate(stages):
        a = max(st.t_start, t_start)
        b = min(st.t_end, t_end)
        if b - a > 1e-14:
            out.append((k, st, a, b))
    return out


def solve_forward(y0: State, t_span, law, schedule=None, cfg: SolverConfig = SolverConfig(),
                  grid: Optional[SpatialGrid] = None, boundary=None) -> Trajectory:
    """Integrate from ``y0`` over ``t_span`` under ``schedule``.

    ``schedule`` may be ``None`` (uncontrolled).  ``boundary`` optionally gives
    two callables t -> Dirichlet value; default is homogeneous.
    """
    t_start, t_end = map(float, t_span)
    if abs(y0.time - t_start) > 1e-12:
        raise InvalidArgumentError(f"y0.time={y0.time} differs from t_start={t_start}")
    if not t_end > t_start:
        raise InvalidArgumentError("t_span must have positive length")
    grid = grid or SpatialGrid(y0.n)
    if grid.n != y0.n:
        raise InvalidArgumentError("state length does not match grid")
    dt = cfg.resolve_dt(grid, t_end - t_start)
    g = boundary or (lambda t: 0.0, lambda t: 0.0)

    times = [t_start]
    values = [np.array(y0.values, dtype=float)]
    sids = [-1]
    bnd = [(g[0](t_start), g[1](t_start))]
    iters = [0]
    y = values[0]
    for k, st, a, b in _segments(schedule, t_start, t_end):
        damping = st.damping if st is not None else 0.0
        dts = stage_dt(dt, damping)
        cap = getattr(st, "max_dt", None)
        if cap is not None:
            dts = min(dts, cap)
        t = a
        for t_new in stage_time_levels(a, b, dts):
            ctrl = st.evaluate(grid, t_new) if st is not None else (None, None)
            y, it = _advance(y, t, t_new, law, ctrl, st, cfg, grid, g)
            times.append(t_new)
            values.append(y)
            sids.append(k)
            bnd.append((g[0](t_new), g[1](t_new)))
            iters.append(it)
            t = t_new
    sid = getattr(schedule, "schedule_id", "free") if schedule is not None else "free"
    return Trajectory(np.array(times), np.array(values), dt, law, grid, sid,
                      np.array(sids), np.array(bnd, dtype=float), np.array(iters))


def _advance(y, t, t_new, law, ctrl, stage, cfg, grid, g, level=0):
    """One step, recursively halved when the M-matrix certificate fails."""
    try:
        return _step(y, t, t_new - t, law, ctrl, cfg, grid, (g[0](t_new), g[1](t_new)))
    except (MMatrixViolation, NonConvergenceError) as exc:
        if level >= cfg.max_substep_level:
            if isinstance(exc, NonConvergenceError):
                exc.time = t_new
            raise
    mid = 0.5 * (t + t_new)
    ctrl_mid = stage.evaluate(grid, mid) if stage is not None else ctrl
    y_mid, i1 = _advance(y, t, mid, law, ctrl_mid, stage, cfg, grid, g, level + 1)
    y_new, i2 = _advance(y_mid, mid, t_new, law, ctrl, stage, cfg, grid, g, level + 1)
    return y_new, i1 + i2


def subdomain_solve(y0_restricted: State, interval, law, boundary=None, span=(0.0, 1.0),
                    cfg: SolverConfig = SolverConfig(), schedule=None) -> Trajectory:
    """Same scheme on the subinterval ``interval`` with Dirichlet traces.

    ``y0_restricted`` holds values at the interior nodes of the uniform
    subinterval grid; ``boundary`` is a pair of callables (default zero).
    """
    lo, hi = map(float, interval)
    if not (0.0 <= lo < hi <= 1.0):
        raise InvalidArgumentError(f"bad subinterval ({lo}, {hi})")
    grid = SpatialGrid(y0_restricted.n, lo, hi)
    if boundary is not None:
        for gfun in boundary:
            if not np.isfinite(gfun(span[0])):
                raise InvalidArgumentError("boundary trace is not finite")
    return solve_forward(y0_restricted, span, law, schedule, cfg, grid, boundary)


# ---------------------------------------------------------------------------
# closed-form reference
# ---------------------------------------------------------------------------


def sine_coefficients(values: np.ndarray) -> np.ndarray:
    """c_k with y_i = sum_k c_k sin(k pi i / (n+1)), k = 1..n."""
    n = len(values)
    return dst(np.asarray(values, dtype=float), type=1) / (n + 1)


def eigen_oracle(y0: State, b_const: float, m: float, t: float,
                 grid: Optional[SpatialGrid] = None) -> State:
    """Exact solution of y_t = b y_xx - m y from the discrete sine expansion of y0."""
    if not b_const > 0:
        raise InvalidArgumentError("b_const must be positive")
    if m < 0 or t < 0 or not np.isfinite(m) or not np.isfinite(t):
        raise InvalidArgumentError("m and t must be finite and nonnegative")
    grid = grid or SpatialGrid(y0.n)
    k = np.arange(1, y0.n + 1)
    lam = (k * math.pi / grid.length) ** 2 * b_const + m
    c = sine_coefficients(y0.values) * np.exp(-lam * t)
    return State(dst(c, type=1) / 2.0, y0.time + t)


def sample(fn: Callable, grid: SpatialGrid, t: Optional[float] = None) -> np.ndarray:
    x = grid.nodes
    out = fn(x) if t is None else fn(x, t)
    return np.asarray(out, dtype=float) * np.ones_like(x)


def discrete_gradient_norm(values: np.ndarray, h: float, boundary: Sequence[float] = (0.0, 0.0)) -> float:
    """L2 norm of forward differences including the boundary cells."""
    full = np.concatenate(([boundary[0]], values, [boundary[1]]))
    d = np.diff(full) / h
    return float(math.sqrt(h * np.dot(d, d)))
