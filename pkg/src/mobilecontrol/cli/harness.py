"""Experiment orchestration and run-directory persistence.

Run directory layout::

    config.toml         copy of the input document
    config.json         resolved configuration (defaults and overrides applied)
    trajectory.csv      time, stage, l2, y_1..y_n (one row per time level)
    schedule.json       control schedule with a certificate block
    certificates.json   full certificate reports
    certificates.csv    name, margin, bound, verdict
    summary.json        deterministic numerics and verdicts
    timings.json        wall-clock timings (not deterministic)
    *.svg               plots
    FAILED              present only when the run failed
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..certificates import (FAIL, PASS, CertificateReport, check_bernstein_boundary, check_comparison,
                            check_control_to_state_lipschitz, check_decay, check_nonnegativity,
                            check_strict_positivity, check_sup_bound, check_time_derivative_bound,
                            compute_energy_constants, digest, noncontrollability_witness,
                            random_static_controls, reports_to_csv, reports_to_json)
from ..controls import ConstMultiplicative, ControlSchedule, ControlStage, Window, dumps_schedule, idle_schedule
from ..errors import BallViolation, ConfigError, InfeasibleError, InvalidArgumentError, NonConvergenceError
from ..pde_solver import (Frozen, Quasilinear, SolverConfig, State, Trajectory, eigen_oracle, l2_norm,
                          solve_forward, subgrid)
from ..synthesis import PicardConfig, picard_quasilinear, run_sweep, synthesize_pipeline
from ..synthesis.pipeline import sweep_stage_reports
from ..synthesis.sweep import window_threshold
from .config import ExperimentConfig

EXIT_PASS = 0
EXIT_CERTIFICATE = 2
EXIT_INFEASIBLE = 3
EXIT_CONFIG = 4


@dataclass
class RunArtifact:
    out_dir: Path
    experiment: str
    summary: dict = field(default_factory=dict)
    reports: list = field(default_factory=list)
    trajectory: Optional[Trajectory] = None
    schedule: Optional[ControlSchedule] = None
    markers: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    error: Optional[str] = None
    exit_code: int = EXIT_PASS


def _solver_cfg(cfg: ExperimentConfig) -> SolverConfig:
    return SolverConfig(dt=cfg.dt)


def _ladder(cfg: ExperimentConfig):
    k = int(cfg.get("synthesis", "ladder_max_exponent"))
    return tuple(2.0 ** i for i in range(k + 1))


def _terminal_report(err: float, eps: float, traj: Trajectory, y_d) -> CertificateReport:
    rep = CertificateReport("terminal_error", digest(traj, np.asarray(y_d)),
                            measured=[("||y(T)-y_d||", err)], bound=eps, tolerance=0.0,
                            inequalities=[("||y(T)-y_d||", err, eps, 0.0)])
    rep.verdict = PASS if err < eps else FAIL
    return rep


def _inequality_report(name, dig, items) -> CertificateReport:
    rep = CertificateReport(name, dig, measured=[(q, l) for q, l, _, _ in items],
                            bound=items[-1][2] if items else math.nan,
                            tolerance=items[-1][3] if items else 0.0, inequalities=list(items))
    ok = all(l <= r + t for _, l, r, t in items)
    rep.verdict = PASS if ok else FAIL
    return rep


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def _control_schedule(cfg: ExperimentConfig) -> Optional[ControlSchedule]:
    m = float(cfg.get("control", "m"))
    if m == 0:
        return None
    win = Window(float(cfg.get("control", "r")), float(cfg.get("control", "l")))
    return ControlSchedule((ControlStage(0.0, cfg.T, win, ConstMultiplicative(m)),), "constant-damping")


def run_solve(cfg: ExperimentConfig, art: RunArtifact) -> None:
    sched = _control_schedule(cfg)
    scfg = _solver_cfg(cfg)
    traj = solve_forward(State(cfg.y0, 0.0), (0.0, cfg.T), cfg.law, sched, scfg, cfg.grid)
    art.trajectory, art.schedule = traj, sched or idle_schedule(0.0, cfg.T)
    s = {"final_l2": l2_norm(traj.final.values, cfg.grid.h), "sup": traj.sup_norm(),
         "levels": len(traj.times), "dt": traj.dt}
    law = cfg.law
    window_full = sched is None or (sched.stages[0].window.l >= 1.0)
    if cfg.get("solve", "oracle") and isinstance(law, Frozen) and law.value is not None and window_full:
        m = 0.0 if sched is None else sched.stages[0].payload.m
        ora = eigen_oracle(State(cfg.y0), law.value, m, cfg.T, cfg.grid)
        err = l2_norm(traj.final.values - ora.values, cfg.grid.h)
        s["oracle_error"] = err
        s["oracle_table"] = [[float(t), l2_norm(v - eigen_oracle(State(cfg.y0), law.value, m, t, cfg.grid).values,
                                                cfg.grid.h)]
                             for t, v in zip(traj.times[:: max(1, len(traj.times) // 10)],
                                             traj.values[:: max(1, len(traj.times) // 10)])]
    art.summary.update(s)
    art.reports.append(check_nonnegativity(traj, sched))


def run_sweep_experiment(cfg: ExperimentConfig, art: RunArtifact) -> None:
    if not isinstance(cfg.law, Frozen):
        raise ConfigError("sweep needs a frozen law")
    eps = float(cfg.get("synthesis", "eps"))
    l = float(cfg.get("synthesis", "l"))
    T_budget = cfg.get("synthesis", "T_budget")
    T_budget = cfg.T if T_budget is None else float(T_budget)
    plan, y_M = run_sweep(State(cfg.y0, 0.0), eps, l, cfg.law, T_budget, _solver_cfg(cfg), cfg.grid,
                          _ladder(cfg))
    sched = plan.schedule()
    traj = plan.trajectory()
    art.trajectory, art.schedule = traj, sched
    art.markers = {f"T_{r.j}": r.T_j for r in plan.stages}
    art.thresholds = {"eps^2/(4(2M-1))": window_threshold(eps, plan.M), "(eps/2)^2": (eps / 2) ** 2}
    art.summary.update({"plan": plan.to_dict(), "final_l2": plan.final_norm, "T_M": plan.T_M})
    items = []
    for rec in plan.stages:
        items.append((f"window_energy[{rec.j}]", rec.window_energy, rec.threshold, 0.0))
        items.append((f"cumulative_energy[{rec.j}]", rec.cumulative_energy, rec.cumulative_bound, 0.0))
        if rec.j >= 2:
            items.append((f"stage_gap[{rec.j}]", rec.T_j - rec.t_start, rec.gap_limit, 0.0))
    items.append(("||y(T_M)||", plan.final_norm, eps / 2, 0.0))
    art.reports.append(_inequality_report("sweep_chain", digest(traj), items))
    art.reports += [check_nonnegativity(traj, sched), check_sup_bound(traj, sched)]
    art.reports += sweep_stage_reports(plan, cfg.law)


def run_pipeline_experiment(cfg: ExperimentConfig, art: RunArtifact) -> None:
    if not isinstance(cfg.law, Frozen):
        raise ConfigError("pipeline needs a frozen law")
    eps = float(cfg.get("synthesis", "eps"))
    l = float(cfg.get("synthesis", "l"))
    syn = cfg.raw["synthesis"]
    res = synthesize_pipeline(State(cfg.y0, 0.0), State(cfg.y_d), eps, cfg.T, l, cfg.law, _solver_cfg(cfg),
                              cfg.grid, _ladder(cfg), float(syn["delta_ratio"]), int(syn["time_pieces"]),
                              int(syn["nnls_iter"]))
    art.trajectory, art.schedule = res.trajectory, res.schedule
    summary = {"terminal_error": res.terminal_error, "early_return": res.early_return,
               "budgets": res.budgets}
    if res.sweep_plan is not None:
        summary["plan"] = res.sweep_plan.to_dict()
        art.markers = {f"T_{r.j}": r.T_j for r in res.sweep_plan.stages}
    if res.additive_plan is not None:
        summary["additive"] = res.additive_plan.to_dict()
    art.summary.update(summary)
    art.thresholds = {"(eps/2)^2": (eps / 2) ** 2}
    art.reports += list(res.reports)
    art.reports.append(_terminal_report(res.terminal_error, eps, res.trajectory, cfg.y_d))
    if not res.early_return:
        b = res.budgets
        art.reports.append(_inequality_report("phase_budgets", digest(res.trajectory), [
            ("||free(T)|| - ||y(T_M)||", b["free_decay_norm"] - b["sweep_norm"], 0.0, 1e-12),
            ("||y(T_M)||", b["sweep_norm"], eps / 2, 0.0),
            ("phase-2 error", b["phase2_error"], eps / 2, 0.0)]))


def run_picard_experiment(cfg: ExperimentConfig, art: RunArtifact) -> None:
    if not isinstance(cfg.law, Quasilinear):
        raise ConfigError("picard needs a quasilinear law")
    p = cfg.raw["picard"]
    pcfg = PicardConfig(float(p["R"]), float(p["gamma"]), int(p["max_iters"]), float(p["fix_tol"]))
    eps = float(cfg.get("synthesis", "eps"))
    res = picard_quasilinear(State(cfg.y0, 0.0), State(cfg.y_d), eps, cfg.T, float(cfg.get("synthesis", "l")),
                             cfg.law, pcfg, _solver_cfg(cfg), cfg.grid, m_ladder=_ladder(cfg))
    art.trajectory, art.schedule = res.trajectory, res.schedule
    art.summary.update({"terminal_error": res.terminal_error, "iterations": res.iterations,
                        "history": res.history})
    art.reports.append(_terminal_report(res.terminal_error, eps, res.trajectory, cfg.y_d))
    art.reports.append(_inequality_report("iterate_ball", digest(res.trajectory),
                                          [("max iterate sup", max(res.iterate_sups), pcfg.R, 0.0)]))
    art.reports.append(check_nonnegativity(res.trajectory, res.schedule))


def run_certify(cfg: ExperimentConfig, art: RunArtifact) -> None:
    sched = _control_schedule(cfg)
    scfg = _solver_cfg(cfg)
    grid = cfg.grid
    law = cfg.law
    traj = solve_forward(State(cfg.y0, 0.0), (0.0, cfg.T), law, sched, scfg, grid)
    art.trajectory, art.schedule = traj, sched or idle_schedule(0.0, cfg.T)
    c = cfg.raw["certify"]
    t_probe = c["t_probe"]
    t_probe = 0.5 * cfg.T if t_probe is None else float(t_probe)
    reps = [check_nonnegativity(traj, sched), check_sup_bound(traj, sched),
            check_strict_positivity(traj, t_probe, sched)]
    lower = State(float(c["comparison_scale"]) * cfg.y0, 0.0)
    traj_low = solve_forward(lower, (0.0, cfg.T), law, sched, scfg, grid)
    reps.append(check_comparison(traj_low, traj))
    if isinstance(law, Frozen):
        for T in c["decay_T"]:
            r = check_decay(State(cfg.y0, 0.0), law, float(T), scfg, grid)
            r.name = f"decay[T={float(T):g}]"
            reps.append(r)
        m = 0.0 if sched is None else sched.stages[0].payload.m
        consts = compute_energy_constants(State(cfg.y0, 0.0), law, u_sup=m, T=cfg.T, grid=grid)
        reps.append(check_time_derivative_bound(traj, consts, sched))
        reps.append(check_bernstein_boundary(traj, law, sched))
        art.summary["energy_constants"] = consts.to_dict()
        half = Window(0.0, 0.5)
        reps.append(check_control_to_state_lipschitz(
            half, lambda x, t: np.zeros_like(x), lambda x, t: 10.0 * np.exp(-200.0 * (x - 0.25) ** 2),
            min(cfg.T, 0.5), law, scfg, grid))
    art.reports += reps


def run_witness(cfg: ExperimentConfig, art: RunArtifact) -> None:
    w = cfg.raw["witness"]
    omega = tuple(map(float, w["omega"]))
    probe = tuple(map(float, w["probe"]))
    grid = cfg.grid
    scfg = _solver_cfg(cfg)
    controls = random_static_controls(grid, omega, cfg.T, int(w["count"]), float(w["amplitude"]),
                                      int(w["seed"]), int(w["pieces"]))
    rep = noncontrollability_witness(State(cfg.y0, 0.0), omega, probe, controls, cfg.T, cfg.law, scfg, grid)
    art.reports.append(rep)
    s = {m[0]: m[1] for m in rep.measured}
    law = cfg.law
    if isinstance(law, Frozen) and law.value is not None:
        sub = subgrid(grid, *probe)
        y_sub = np.interp(sub.nodes, grid.nodes, cfg.y0)
        ora = eigen_oracle(State(y_sub), law.value, 0.0, cfg.T, sub)
        s["obstruction_oracle"] = l2_norm(ora.values, sub.h)
    art.summary.update({"witness": s})
    free = solve_forward(State(cfg.y0, 0.0), (0.0, cfg.T), law, controls[0] if controls else None, scfg, grid)
    art.trajectory, art.schedule = free, controls[0] if controls else None


RUNNERS = {"solve": run_solve, "sweep": run_sweep_experiment, "pipeline": run_pipeline_experiment,
           "picard": run_picard_experiment, "certify": run_certify, "witness": run_witness}


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy with floats rounded through repr (deterministic)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def write_trajectory_csv(path: Path, traj: Trajectory) -> None:
    """Columns: time, stage, l2, y_1..y_n; floats written with 17 significant digits."""
    n = traj.grid.n
    l2 = traj.l2_norms()
    sids = traj.stage_ids if traj.stage_ids is not None else -np.ones(len(traj.times), int)
    with open(path, "w") as fh:
        fh.write(",".join(["time", "stage", "l2"] + [f"y_{i}" for i in range(1, n + 1)]) + "\n")
        for t, s, nrm, row in zip(traj.times, sids, l2, traj.values):
            fh.write(",".join([format(t, ".17g"), str(int(s)), format(nrm, ".17g")]
                              + [format(v, ".17g") for v in row]) + "\n")


def emit_report(art: RunArtifact) -> None:
    """Write the summary, certificate tables and SVG plots of a (possibly failed) run."""
    out = art.out_dir
    verdicts = {r.name: r.verdict for r in art.reports}
    summary = {"experiment": art.experiment, "status": "failed" if art.error else "completed",
               "exit_code": art.exit_code, "verdicts": verdicts}
    if art.error:
        summary["error"] = art.error
    summary.update(art.summary)
    (out / "summary.json").write_text(json.dumps(_clean(summary), indent=1, sort_keys=True) + "\n")
    (out / "timings.json").write_text(json.dumps(_clean(art.timings), indent=1, sort_keys=True) + "\n")
    (out / "certificates.json").write_text(reports_to_json(art.reports) + "\n")
    (out / "certificates.csv").write_text(reports_to_csv(art.reports))
    _plots(art)


def _plots(art: RunArtifact) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "mobilecontrol"
    meta = {"Date": None}
    traj = art.trajectory
    out = art.out_dir
    times = traj.times if traj is not None else np.zeros(1)
    norms = traj.l2_norms() if traj is not None else np.zeros(1)

    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(times, norms, marker="." if len(times) == 1 else None)
    for name, t in art.markers.items():
        ax.axvline(t, color="0.6", lw=0.8, ls="--")
    for name, v in art.thresholds.items():
        if v is not None:
            ax.axhline(math.sqrt(v), color="C3", lw=0.8, ls=":", label=f"sqrt({name})")
    ax.set_xlabel("t")
    ax.set_ylabel("L2 norm")
    ax.set_yscale("log" if np.all(norms > 0) and len(norms) > 1 else "linear")
    if art.thresholds:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out / "norm.svg", metadata=meta)
    plt.close(fig)

    if traj is not None:
        fig, ax = plt.subplots(figsize=(6, 3.5))
        xs = np.concatenate(([0.0], traj.grid.nodes, [1.0]))
        full = traj.full_values()
        picks = sorted({0, len(times) - 1} | {int(np.argmin(np.abs(times - t))) for t in art.markers.values()})
        for k in picks:
            ax.plot(xs, full[k], label=f"t={times[k]:.4g}")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(out / "snapshots.svg", metadata=meta)
        plt.close(fig)

    if art.schedule is not None and art.schedule.stages:
        fig, ax = plt.subplots(figsize=(6, 2.5))
        ts, rs = [], []
        for st in art.schedule.stages:
            ts += [st.t_start, st.t_end]
            rs += [st.window.r, st.window.r]
        ax.plot(ts, rs, drawstyle="steps-post")
        ax.set_xlabel("t")
        ax.set_ylabel("r(t)")
        fig.tight_layout()
        fig.savefig(out / "window.svg", metadata=meta)
        plt.close(fig)


def run_experiment(cfg: ExperimentConfig, out_dir) -> RunArtifact:
    """Execute ``cfg`` and persist every artifact into ``out_dir``.

    The exit code is 0 when every certificate passed, 2 when any failed, 3
    on infeasible synthesis, nonconvergence or a ball violation, and 4 on
    configuration errors raised while running.  Failed runs keep their
    partial artifacts and a ``FAILED`` marker.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / "FAILED"
    if marker.exists():
        marker.unlink()
    (out / "config.toml").write_text(cfg.source_text)
    (out / "config.json").write_text(json.dumps(_clean({"resolved": cfg.raw, "overrides": cfg.overrides}),
                                                indent=1, sort_keys=True) + "\n")
    art = RunArtifact(out, cfg.experiment)
    t0 = time.perf_counter()
    try:
        RUNNERS[cfg.experiment](cfg, art)
        if any(r.verdict == FAIL for r in art.reports):
            art.exit_code = EXIT_CERTIFICATE
    except (InfeasibleError, NonConvergenceError, BallViolation) as exc:
        art.error = f"{type(exc).__name__}: {exc}"
        art.exit_code = EXIT_INFEASIBLE
    except (ConfigError, InvalidArgumentError) as exc:
        art.error = f"{type(exc).__name__}: {exc}"
        art.exit_code = EXIT_CONFIG
    art.timings["run_seconds"] = time.perf_counter() - t0
    if art.trajectory is not None:
        write_trajectory_csv(out / "trajectory.csv", art.trajectory)
    if art.schedule is not None:
        cert = {"verdicts": {r.name: r.verdict for r in art.reports},
                "terminal_error": art.summary.get("terminal_error")}
        (out / "schedule.json").write_text(dumps_schedule(art.schedule, art.trajectory.grid
                                                          if art.trajectory is not None else None,
                                                          _clean(cert)) + "\n")
    emit_report(art)
    if art.exit_code != EXIT_PASS:
        marker.write_text((art.error or "certificate failure") + "\n")
    return art
