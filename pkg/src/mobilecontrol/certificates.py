"""Numerical certificates for the maximum principle, comparison, decay,
energy and boundary-gradient bounds, and the static-support obstruction.

Every check returns a :class:`CertificateReport`.  A check whose hypotheses
do not hold on its inputs reports ``inapplicable``; it never passes.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .controls import (ConstMultiplicative, ControlSchedule, ControlStage, FieldAdditive,
                       FieldMultiplicative, Idle, SampledField, Window)
from .errors import InvalidArgumentError
from .pde_solver import (SAMPLING_REFINEMENT, Frozen, SolverConfig, SpatialGrid, State, Trajectory,
                         discrete_gradient_norm, l2_norm, solve_forward, stage_time_levels,
                         subdomain_solve, subgrid)

# tolerance model: 10x the observed oracle-error constants of the solver
# (L2 error ~ 0.22 h^2 + 1.29 dt for unit-amplitude data)
TOL_H2 = 2.2
TOL_DT = 13.0
SIGN_TOL = 1e-10
POSITIVITY_TOL = 1e-12

PASS, FAIL, INAPPLICABLE = "pass", "fail", "inapplicable"


def discretization_tolerance(h: float, dt: float, scale: float = 1.0) -> float:
    return abs(scale) * (TOL_H2 * h ** 2 + TOL_DT * dt)


def digest(*items) -> str:
    """Stable SHA-256 over arrays, numbers and strings."""
    hsh = hashlib.sha256()
    for it in items:
        if isinstance(it, Trajectory):
            hsh.update(np.ascontiguousarray(it.times).tobytes())
            hsh.update(np.ascontiguousarray(it.values).tobytes())
        elif isinstance(it, State):
            hsh.update(np.ascontiguousarray(it.values).tobytes())
            hsh.update(repr(float(it.time)).encode())
        elif isinstance(it, np.ndarray):
            hsh.update(np.ascontiguousarray(it, dtype=float).tobytes())
        else:
            hsh.update(repr(it).encode())
    return hsh.hexdigest()[:16]


@dataclass
class CertificateReport:
    name: str
    inputs_digest: str
    measured: list = field(default_factory=list)
    bound: float = float("nan")
    tolerance: float = 0.0
    verdict: str = INAPPLICABLE
    inequalities: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        """Smallest (bound + tolerance - lhs) across inequalities."""
        if not self.inequalities:
            return float("nan")
        return min(rhs + tol - lhs for _, lhs, rhs, tol in self.inequalities)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "inputs_digest": self.inputs_digest,
            "measured": [[q, _num(v)] for q, v in self.measured],
            "bound": _num(self.bound),
            "tolerance": _num(self.tolerance),
            "margin": _num(self.margin),
            "verdict": self.verdict,
            "inequalities": [[q, _num(l), _num(r), _num(t)] for q, l, r, t in self.inequalities],
            "notes": {k: _num(v) if isinstance(v, (float, np.floating)) else v for k, v in self.notes.items()},
        }

    def csv_row(self) -> list:
        return [self.name, _num(self.margin), _num(self.bound), self.verdict]


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def _decide(report: CertificateReport) -> CertificateReport:
    ok = all(lhs <= rhs + tol for _, lhs, rhs, tol in report.inequalities)
    report.verdict = PASS if ok else FAIL
    return report


def inapplicable(name, dig, reason) -> CertificateReport:
    return CertificateReport(name, dig, verdict=INAPPLICABLE, notes={"reason": reason})


def reports_to_json(reports: Sequence[CertificateReport]) -> str:
    return json.dumps({"schema_version": 1, "reports": [r.to_dict() for r in reports]}, indent=1)


def reports_to_csv(reports: Sequence[CertificateReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "margin", "bound", "verdict"])
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


# ---------------------------------------------------------------------------
# control introspection
# ---------------------------------------------------------------------------


def _controls_at_levels(traj: Trajectory, schedule: Optional[ControlSchedule]):
    """(u, v) arrays at every stored level after the first, as seen by the solver."""
    n = traj.grid.n
    k = len(traj.times) - 1
    if schedule is None or not schedule.stages:
        return np.zeros((k, n)), np.zeros((k, n))
    us, vs = [], []
    sids = traj.stage_ids
    for i in range(1, len(traj.times)):
        if sids is not None and sids[i] >= 0:
            st = schedule.stages[int(sids[i])]
        else:
            st = schedule.stage_at(traj.times[i] - 1e-13)
        u, v = st.evaluate(traj.grid, traj.times[i])
        us.append(u)
        vs.append(v)
    return np.array(us), np.array(vs)


def _time_independent_u(schedule: Optional[ControlSchedule]) -> bool:
    if schedule is None or not schedule.stages:
        return True
    def key(st):
        p = st.payload
        if isinstance(p, Idle):
            return ("idle",)
        if isinstance(p, ConstMultiplicative):
            return ("const", p.m, st.window.r, st.window.l) if p.m > 0 else ("idle",)
        if isinstance(p, FieldAdditive):
            return ("idle",)
        return ("field", id(p))
    keys = {key(st) for st in schedule.stages}
    return len(keys) == 1 and next(iter(keys))[0] != "field"


# ---------------------------------------------------------------------------
# maximum principle and comparison
# ---------------------------------------------------------------------------


def check_nonnegativity(traj: Trajectory, schedule: Optional[ControlSchedule] = None) -> CertificateReport:
    name = "nonnegativity"
    dig = digest(traj)
    y0 = traj.values[0]
    if np.any(y0 < 0):
        return inapplicable(name, dig, "initial data has negative entries")
    if traj.boundary is not None and np.any(traj.boundary < 0):
        return inapplicable(name, dig, "boundary data has negative entries")
    _, v = _controls_at_levels(traj, schedule)
    if np.any(v < 0):
        return inapplicable(name, dig, "additive control has negative entries")
    scale = max(float(np.abs(traj.values).max()), 1e-300)
    mn = float(traj.values.min())
    tol = SIGN_TOL * scale
    rep = CertificateReport(name, dig, measured=[("min_y", mn)], bound=0.0, tolerance=tol,
                            inequalities=[("-min_y", -mn, 0.0, tol)])
    return _decide(rep)


def check_sup_bound(traj: Trajectory, schedule: Optional[ControlSchedule] = None) -> CertificateReport:
    name = "sup_bound"
    dig = digest(traj)
    u, v = _controls_at_levels(traj, schedule)
    if np.any(u > 0):
        return inapplicable(name, dig, "multiplicative control is positive somewhere")
    if np.any(v != 0):
        return inapplicable(name, dig, "additive control is present")
    parabolic_boundary = float(np.abs(traj.values[0]).max(initial=0.0))
    if traj.boundary is not None:
        parabolic_boundary = max(parabolic_boundary, float(np.abs(traj.boundary).max(initial=0.0)))
    sup = float(np.abs(traj.values).max())
    tol = POSITIVITY_TOL * max(parabolic_boundary, 1e-300)
    rep = CertificateReport(name, dig, measured=[("sup_Q|y|", sup)], bound=parabolic_boundary,
                            tolerance=tol, inequalities=[("sup_Q|y|", sup, parabolic_boundary, tol)])
    return _decide(rep)


def check_strict_positivity(traj: Trajectory, t_probe: float,
                            schedule: Optional[ControlSchedule] = None) -> CertificateReport:
    name = "strict_positivity"
    dig = digest(traj, t_probe)
    y0 = traj.values[0]
    if np.any(y0 < 0) or not np.any(y0 > 0):
        return inapplicable(name, dig, "requires y0 >= 0 and y0 not identically zero")
    if not t_probe > traj.times[0]:
        return inapplicable(name, dig, "probe time must be after the initial time")
    u, v = _controls_at_levels(traj, schedule)
    if np.any(v < 0):
        return inapplicable(name, dig, "additive control has negative entries")
    if np.any(u > 0) or not _time_independent_u(schedule):
        return inapplicable(name, dig, "requires a time-independent u <= 0")
    state = traj.at(t_probe)
    mn = float(state.values.min())
    thresh = POSITIVITY_TOL * max(float(np.abs(traj.values).max()), 1e-300)
    rep = CertificateReport(name, dig, measured=[("min_interior_y", mn), ("t_probe", state.time)],
                            bound=thresh, tolerance=0.0,
                            inequalities=[("threshold - min_y", thresh - mn, 0.0, -1e-300)])
    rep.verdict = PASS if mn > thresh else FAIL
    return rep


def check_comparison(traj1: Trajectory, traj2: Trajectory) -> CertificateReport:
    name = "comparison"
    dig = digest(traj1, traj2)
    if traj1.values.shape != traj2.values.shape or not np.allclose(traj1.times, traj2.times, atol=1e-12):
        return inapplicable(name, dig, "trajectories are not on the same space-time lattice")
    if np.any(traj1.values[0] > traj2.values[0]):
        return inapplicable(name, dig, "initial data are not ordered")
    if traj1.boundary is not None and traj2.boundary is not None and np.any(traj1.boundary > traj2.boundary):
        return inapplicable(name, dig, "boundary traces are not ordered")
    scale = max(float(np.abs(traj1.values).max()), float(np.abs(traj2.values).max()), 1e-300)
    worst = float((traj1.values - traj2.values).max())
    tol = SIGN_TOL * scale
    rep = CertificateReport(name, dig, measured=[("max(y1 - y2)", worst)], bound=0.0, tolerance=tol,
                            inequalities=[("max(y1 - y2)", worst, 0.0, tol)])
    return _decide(rep)


# ---------------------------------------------------------------------------
# decay estimate and energy constants
# ---------------------------------------------------------------------------


def check_decay(y0: State, law: Frozen, T: float, cfg: SolverConfig = SolverConfig(),
                grid: Optional[SpatialGrid] = None) -> CertificateReport:
    """||free(T) - y0|| <= sqrt(|b| T) ||y0_x||."""
    name = "decay"
    grid = grid or SpatialGrid(y0.n)
    dig = digest(y0, T, law.b_sup)
    traj = solve_forward(State(y0.values, 0.0), (0.0, T), law, None, cfg, grid)
    lhs = l2_norm(traj.final.values - y0.values, grid.h)
    grad = discrete_gradient_norm(y0.values, grid.h)
    rhs = math.sqrt(law.b_sup * T) * grad
    tol = discretization_tolerance(grid.h, traj.dt, float(np.abs(y0.values).max(initial=0.0)))
    rep = CertificateReport(name, dig, measured=[("||y(T)-y0||", lhs), ("||y0_x||", grad), ("T", T)],
                            bound=rhs, tolerance=tol, inequalities=[("||y(T)-y0||", lhs, rhs, tol)])
    return _decide(rep)


@dataclass
class EnergyConstants:
    K1: float
    K2: float
    K3: float
    K4: float
    C1: float
    C2: float
    time_derivative_bound: float
    bernstein_bound: float
    bernstein_bound_sharp: float
    y0_sup: float
    b0_sup: float
    horizon: float

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in self.__dict__.items()}


def _full(values):
    return np.concatenate(([0.0], np.asarray(values, dtype=float), [0.0]))


def bernstein_max(values: np.ndarray, h: float) -> float:
    """max over [0, 1] of y0'(x) e^{y0(x)} using second-order differences."""
    yf = _full(values)
    d = np.gradient(yf, h, edge_order=2)
    return float(np.max(d * np.exp(yf)))


def compute_energy_constants(y0: State, law: Frozen, u_sup: float = 0.0, ut_sup: float = 0.0,
                             T: float = 1.0, grid: Optional[SpatialGrid] = None,
                             t0: Optional[float] = None) -> EnergyConstants:
    """Energy-estimate constants K1..K4 and the stage-gap constants C1, C2.

    ``u_sup`` and ``ut_sup`` are sup-norms of the multiplicative control and
    its time derivative on the stage; ``T`` is the horizon entering the
    Gronwall factor; ``t0`` is the time at which b(., t0) is frozen for the
    initial-gradient terms (default ``y0.time``).
    """
    if not law.rho > 0:
        raise InvalidArgumentError("invalid law: rho must be positive")
    grid = grid or SpatialGrid(y0.n)
    t0 = y0.time if t0 is None else t0
    h = grid.h
    rho = law.rho
    yf = _full(y0.values)
    b_faces = law.coefficient(grid.faces, t0)
    dy = np.diff(yf) / h
    y0_l2 = l2_norm(y0.values, h)
    K1 = law.bt_sup / rho
    K2 = u_sup ** 2 * y0_l2 ** 2
    sqrtb_grad_sq = float(h * np.sum(b_faces * dy ** 2))
    K3 = (K2 + sqrtb_grad_sq) / rho
    K4 = (law.bt_sup ** 2 + ut_sup ** 2) / rho
    flux_div = np.diff(b_faces * dy) / h
    flux_div_sq = float(h * np.dot(flux_div, flux_div))
    a_bound = math.sqrt(2.0 * (flux_div_sq + K2) + K4 * K3 * T * math.exp(K1 * T))
    kappa = 1.0 + law.bx_sup / rho
    bmax = max(bernstein_max(y0.values, h), 0.0)
    bern = math.exp(kappa) * bmax
    Mconst = bmax * rho / (rho + law.bx_sup) * math.exp(law.bx_sup / rho)
    bern_sharp = Mconst * math.e * kappa
    ts = np.linspace(t0, t0 + T, 4 * SAMPLING_REFINEMENT + 1)
    b0_sup = max(float(abs(law.coefficient(np.array([0.0]), t)[0])) for t in ts)
    C2 = b0_sup * bern + a_bound
    y0_sup = float(np.abs(y0.values).max(initial=0.0))
    C1 = y0_sup * C2
    return EnergyConstants(K1, K2, K3, K4, C1, C2, a_bound, bern, bern_sharp, y0_sup, b0_sup, T)


def control_sups(schedule: Optional[ControlSchedule], grid: SpatialGrid, times: np.ndarray):
    """(sup|u|, sup|u_t|) sampled at the given times."""
    if schedule is None or not schedule.stages:
        return 0.0, 0.0
    us = np.array([schedule.stage_at(t - 1e-13 if t > schedule.span[0] else t).evaluate(grid, t)[0]
                   for t in times])
    u_sup = float(np.abs(us).max(initial=0.0))
    ut_sup = 0.0
    if len(times) > 1:
        # jumps between stages are not time derivatives; only differentiate within a stage
        for st in schedule.stages:
            if isinstance(st.payload, FieldMultiplicative):
                sel = (times > st.t_start) & (times <= st.t_end)
                if sel.sum() > 1:
                    block = us[sel]
                    ut_sup = max(ut_sup, float((np.abs(np.diff(block, axis=0)).max(axis=1)
                                                / np.diff(times[sel])).max()))
    return u_sup, ut_sup


def check_time_derivative_bound(traj: Trajectory, constants: EnergyConstants,
                                schedule: Optional[ControlSchedule] = None) -> CertificateReport:
    name = "time_derivative_bound"
    dig = digest(traj, constants.time_derivative_bound)
    u, v = _controls_at_levels(traj, schedule)
    if np.any(u > 0):
        return inapplicable(name, dig, "requires u <= 0")
    if np.any(v != 0):
        return inapplicable(name, dig, "requires no additive control")
    if len(traj.times) < 2:
        return inapplicable(name, dig, "trajectory has a single level")
    dts = np.diff(traj.times)
    yt = np.diff(traj.values, axis=0) / dts[:, None]
    norms = np.sqrt(traj.grid.h * np.sum(yt ** 2, axis=1))
    worst = float(norms.max())
    bound = constants.time_derivative_bound
    tol = discretization_tolerance(traj.grid.h, float(dts.max()), bound)
    rep = CertificateReport(name, dig, measured=[("max_t ||y_t||", worst)], bound=bound, tolerance=tol,
                            inequalities=[("max_t ||y_t||", worst, bound, tol)])
    return _decide(rep)


def boundary_flux(traj: Trajectory) -> np.ndarray:
    """y_x(0, t) by one-sided second-order differencing."""
    h = traj.grid.h
    left = traj.boundary[:, 0] if traj.boundary is not None else np.zeros(len(traj.times))
    return (-3.0 * left + 4.0 * traj.values[:, 0] - traj.values[:, 1]) / (2.0 * h)


def check_bernstein_boundary(traj: Trajectory, law: Frozen,
                             schedule: Optional[ControlSchedule] = None) -> CertificateReport:
    """0 <= y_x(0,t) <= e^{1 + |b_x|/rho} max{y0' e^{y0}} and the location of max w."""
    name = "bernstein_boundary"
    dig = digest(traj, law.bx_sup, law.rho)
    y0 = traj.values[0]
    u, v = _controls_at_levels(traj, schedule)
    if np.any(y0 < 0):
        return inapplicable(name, dig, "requires y0 >= 0")
    if np.any(u > 0) or np.any(v != 0):
        return inapplicable(name, dig, "requires u <= 0 and no additive control")
    h = traj.grid.h
    rho, bx = law.rho, law.bx_sup
    kappa = 1.0 + bx / rho
    bmax = bernstein_max(y0, h)
    bound = math.exp(kappa) * bmax
    Mconst = bmax * rho / (rho + bx) * math.exp(bx / rho)
    sharp = Mconst * math.e * kappa
    flux = boundary_flux(traj)
    tol = discretization_tolerance(h, traj.dt, max(bound, float(np.abs(flux).max(initial=0.0))))
    # auxiliary function w = e^y + M e^{1 - kappa x} - 1 on t > 0
    xs = np.concatenate(([0.0], traj.grid.nodes, [1.0]))
    full = traj.full_values()[1:]
    w = np.exp(full) + Mconst * np.exp(1.0 - kappa * xs)[None, :] - 1.0
    w_edge = float(w[:, 0].max()) if w.size else 0.0
    w_inner = float(w[:, 1:].max()) if w.size else 0.0
    w_tol = discretization_tolerance(h, traj.dt, max(abs(w_edge), 1.0))
    rep = CertificateReport(
        name, dig,
        measured=[("max_t y_x(0,t)", float(flux.max())), ("min_t y_x(0,t)", float(flux.min())),
                  ("max w interior", w_inner), ("max w at x=0", w_edge)],
        bound=bound, tolerance=tol,
        inequalities=[("max_t y_x(0,t)", float(flux.max()), bound, tol),
                      ("-min_t y_x(0,t)", float(-flux.min()), 0.0, tol),
                      ("max w(x>0) - max w(0)", w_inner - w_edge, 0.0, w_tol)],
        notes={"bound_stated": bound, "bound_proof_constant": sharp, "M": Mconst})
    return _decide(rep)


# ---------------------------------------------------------------------------
# static-support obstruction
# ---------------------------------------------------------------------------


def random_static_controls(grid: SpatialGrid, omega, T: float, count: int, amplitude: float,
                           seed: int, pieces: int = 10, t0: float = 0.0) -> list:
    """Seeded batch of bounded controls on a static window.

    Each control is piecewise constant in time on ``pieces`` equal intervals
    and nodewise uniform in [-amplitude, amplitude].  Draws come from numpy's
    PCG64 generator seeded with ``seed``; one array of shape
    (count, pieces, n) is drawn in C order, so batches reproduce exactly.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    draws = rng.uniform(-amplitude, amplitude, size=(count, pieces, grid.n))
    times = t0 + (T - t0) * np.arange(1, pieces + 1) / pieces
    window = Window(float(omega[0]), float(omega[1] - omega[0]))
    out = []
    for k in range(count):
        fld = SampledField(times, grid.nodes, draws[k])
        st = ControlStage(t0, T, window, FieldMultiplicative(fld))
        out.append(ControlSchedule((st,), f"random-{seed}-{k}"))
    return out


def noncontrollability_witness(y0: State, omega, probe, controls: Sequence[ControlSchedule], T: float,
                               law=None, cfg: SolverConfig = SolverConfig(),
                               grid: Optional[SpatialGrid] = None) -> CertificateReport:
    """Every static-support control leaves y(T) above the probe-interval envelope."""
    name = "noncontrollability_witness"
    grid = grid or SpatialGrid(y0.n)
    law = law or Frozen.constant(1.0)
    lo, hi = map(float, probe)
    wlo, whi = map(float, omega)
    if not (hi <= wlo or lo >= whi):
        raise InvalidArgumentError(f"probe ({lo}, {hi}) overlaps control window ({wlo}, {whi})")
    dig = digest(y0, tuple(omega), tuple(probe), T, len(controls))
    sub = subgrid(grid, lo, hi)
    aligned = bool(np.all(np.abs(sub.nodes[:, None] - grid.nodes[None, :]).min(axis=1) < 1e-9))
    y_sub0 = np.interp(sub.nodes, grid.nodes, y0.values)
    if not np.any(y_sub0 > 0):
        return inapplicable(name, dig, "y0 vanishes on the probe interval")
    if np.any(y0.values < 0):
        return inapplicable(name, dig, "requires y0 >= 0")
    env = subdomain_solve(State(y_sub0, 0.0), (lo, hi), law, None, (0.0, T), cfg)
    env_T = env.final.values
    obstruction = l2_norm(env_T, sub.h)
    scale = float(np.abs(y0.values).max())
    tol = SIGN_TOL * scale if aligned else discretization_tolerance(grid.h, env.dt, scale)
    worst = -math.inf
    margins = []
    for sched in controls:
        traj = solve_forward(State(y0.values, 0.0), (0.0, T), law, sched, cfg, grid)
        y_probe = np.interp(sub.nodes, grid.nodes, traj.final.values)
        gap = float((env_T - y_probe).max())
        margins.append(-gap)
        worst = max(worst, gap)
    dominated = sum(1 for m in margins if m >= -tol)
    rep = CertificateReport(
        name, dig,
        measured=[("obstruction_norm", obstruction), ("max(envelope - y)", worst),
                  ("dominated", dominated), ("controls", len(controls))],
        bound=0.0, tolerance=tol,
        inequalities=[("max(envelope - y)", worst if controls else -math.inf, 0.0, tol),
                      ("-obstruction_norm", -obstruction, 0.0, -1e-300)],
        notes={"aligned_grid": bool(aligned), "probe_nodes": sub.n})
    return _decide(rep)


# ---------------------------------------------------------------------------
# control-to-state Lipschitz bound on a window problem
# ---------------------------------------------------------------------------


def _window_additive_solve(window: Window, v, law, T, cfg, grid):
    sub = subgrid(grid, window.lo, window.hi)
    st = ControlStage(0.0, T, Window(0.0, 1.0), FieldAdditive(v))
    sched = ControlSchedule((st,), "window-additive")
    return subdomain_solve(State(np.zeros(sub.n), 0.0), (window.lo, window.hi), law, None,
                           (0.0, T), cfg, sched), sub


def check_control_to_state_lipschitz(window: Window, v, v_perturbed, T: float, law: Frozen,
                                     cfg: SolverConfig = SolverConfig(),
                                     grid: Optional[SpatialGrid] = None) -> CertificateReport:
    """||y(T; v) - y(T; v')|| <= C(rho, |omega|) ||v - v'|| on the window problem.

    With the Poincare inequality on the window the energy identity gives
    C = |omega| / (rho pi) * sqrt(2 rho); the factor sqrt(2 rho) is the
    recorded calibration.
    """
    name = "control_to_state_lipschitz"
    grid = grid or SpatialGrid(199)
    dig = digest(window.r, window.l, T, law.rho, law.b_sup)
    tr1, sub = _window_additive_solve(window, v, law, T, cfg, grid)
    tr2, _ = _window_additive_solve(window, v_perturbed, law, T, cfg, grid)
    dv = []
    for t in tr1.times[1:]:
        dv.append(np.asarray(v_perturbed(sub.nodes, t), dtype=float) - np.asarray(v(sub.nodes, t), dtype=float))
    dv = np.array(dv) * np.ones((len(tr1.times) - 1, sub.n))
    dv_norm = math.sqrt(float(np.sum(np.diff(tr1.times)[:, None] * sub.h * dv ** 2)))
    if dv_norm == 0:
        return inapplicable(name, dig, "perturbation has zero norm")
    dy = l2_norm(tr2.final.values - tr1.final.values, sub.h)
    ratio = dy / dv_norm
    calibration = math.sqrt(2.0 * law.rho)
    const = window.l / (law.rho * math.pi) * calibration
    rep = CertificateReport(name, dig, measured=[("||dy(T)||", dy), ("||dv||", dv_norm), ("ratio", ratio)],
                            bound=const, tolerance=discretization_tolerance(sub.h, tr1.dt, const),
                            notes={"calibration_factor": calibration, "meas_omega": window.l, "rho": law.rho})
    rep.inequalities = [("ratio", ratio, const, rep.tolerance)]
    return _decide(rep)
