"""Mobile-support controls: windows, stages, schedules and their JSON form."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import InvalidArgumentError
from .pde_solver import SpatialGrid

SCHEDULE_SCHEMA_VERSION = 1
_TIME_EPS = 1e-12


@dataclass(frozen=True)
class Window:
    r: float
    l: float

    def __post_init__(self):
        if not 0 < self.l <= 1:
            raise InvalidArgumentError(f"window length must lie in (0, 1], got {self.l}")
        if self.r < -_TIME_EPS or self.r + self.l > 1 + 1e-12:
            raise InvalidArgumentError(f"window ({self.r}, {self.r + self.l}) leaves (0, 1)")

    @property
    def lo(self) -> float:
        return self.r

    @property
    def hi(self) -> float:
        return self.r + self.l

    def mask(self, grid: SpatialGrid) -> np.ndarray:
        # open interval: a node on the window edge gets no control
        return grid.mask(self.lo, self.hi)


@dataclass(frozen=True, eq=False)
class SampledField:
    """Field tabulated at ``times`` x ``x``; held backward in time.

    The value stored at time level t_k applies on (t_{k-1}, t_k], which is the
    convention of a backward-Euler step ending at t_k.
    """

    times: np.ndarray
    x: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.atleast_1d(np.asarray(self.times, dtype=float))
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        values = np.asarray(self.values, dtype=float).reshape(len(times), len(x))
        for arr in (times, x, values):
            arr.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", values)
        if np.any(np.diff(times) <= 0):
            raise InvalidArgumentError("sampled field times must increase")

    def __call__(self, xq, t):
        k = int(np.searchsorted(self.times, t - _TIME_EPS, side="left"))
        row = self.values[min(k, len(self.times) - 1)]
        xq = np.asarray(xq, dtype=float)
        if xq.shape == self.x.shape and np.array_equal(xq, self.x):
            return row.copy()
        return np.interp(xq, self.x, row, left=0.0, right=0.0)

    def min(self) -> float:
        return float(self.values.min()) if self.values.size else 0.0

    def max(self) -> float:
        return float(self.values.max()) if self.values.size else 0.0


Field = Union[SampledField, Callable[[np.ndarray, float], np.ndarray]]


@dataclass(frozen=True)
class Idle:
    kind = "idle"


@dataclass(frozen=True)
class ConstMultiplicative:
    m: float
    kind = "const_multiplicative"

    def __post_init__(self):
        if not self.m >= 0:
            raise InvalidArgumentError(f"damping constant must be >= 0, got {self.m}")


@dataclass(frozen=True, eq=False)
class FieldMultiplicative:
    u: Field
    kind = "field_multiplicative"


@dataclass(frozen=True, eq=False)
class FieldAdditive:
    v: Field
    kind = "field_additive"


Payload = Union[Idle, ConstMultiplicative, FieldMultiplicative, FieldAdditive]


def _field_values(fld, grid, t):
    return np.asarray(fld(grid.nodes, t), dtype=float) * np.ones(grid.n)


@dataclass(frozen=True, eq=False)
class ControlStage:
    t_start: float
    t_end: float
    window: Window
    payload: Payload = Idle()
    max_dt: Optional[float] = None

    def __post_init__(self):
        if self.max_dt is not None and not self.max_dt > 0:
            raise InvalidArgumentError("stage max_dt must be positive")
        if not self.t_start < self.t_end:
            raise InvalidArgumentError(f"stage needs t_start < t_end, got [{self.t_start}, {self.t_end}]")
        if isinstance(self.payload, FieldAdditive):
            v = self.payload.v
            if isinstance(v, SampledField):
                lo = v.min()
            else:
                probe = SpatialGrid(4 * 50 - 1)
                ts = np.linspace(self.t_start, self.t_end, 11)
                lo = min(float(_field_values(v, probe, t).min()) for t in ts)
            if lo < 0:
                raise InvalidArgumentError(f"additive control is negative somewhere (min {lo:.3g})")

    @property
    def damping(self) -> float:
        return self.payload.m if isinstance(self.payload, ConstMultiplicative) else 0.0

    def evaluate(self, grid: SpatialGrid, t: float):
        """(u, v) nodal vectors of this stage's payload at time ``t``."""
        n = grid.n
        u = np.zeros(n)
        v = np.zeros(n)
        p = self.payload
        if isinstance(p, Idle):
            return u, v
        mask = self.window.mask(grid)
        if isinstance(p, ConstMultiplicative):
            u[mask] = -p.m
        elif isinstance(p, FieldMultiplicative):
            u[mask] = _field_values(p.u, grid, t)[mask]
        elif isinstance(p, FieldAdditive):
            v[mask] = _field_values(p.v, grid, t)[mask]
        return u, v


@dataclass(frozen=True, eq=False)
class ControlSchedule:
    stages: tuple = ()
    schedule_id: str = "schedule"

    def __post_init__(self):
        stages = tuple(self.stages)
        object.__setattr__(self, "stages", stages)
        for a, b in zip(stages, stages[1:]):
            if abs(a.t_end - b.t_start) > _TIME_EPS:
                kind = "overlap" if b.t_start < a.t_end else "gap"
                raise InvalidArgumentError(
                    f"schedule stages {kind} at [{a.t_end}, {b.t_start}]")

    @property
    def span(self):
        if not self.stages:
            return None
        return self.stages[0].t_start, self.stages[-1].t_end

    def stage_at(self, t: float) -> ControlStage:
        """Right-continuous lookup; the final instant belongs to the last stage."""
        if not self.stages:
            raise InvalidArgumentError("empty schedule")
        t0, t1 = self.span
        if t < t0 - _TIME_EPS or t > t1 + _TIME_EPS:
            raise InvalidArgumentError(f"t={t} outside schedule span [{t0}, {t1}]")
        starts = np.array([s.t_start for s in self.stages])
        k = int(np.searchsorted(starts, t + _TIME_EPS, side="right")) - 1
        return self.stages[max(k, 0)]

    def window_origin(self, t: float) -> float:
        return self.stage_at(t).window.r

    def __len__(self):
        return len(self.stages)


def evaluate_control(schedule: ControlSchedule, grid: SpatialGrid, t: float):
    return schedule.stage_at(t).evaluate(grid, t)


def compose_schedules(first: ControlSchedule, second: ControlSchedule,
                      schedule_id: Optional[str] = None) -> ControlSchedule:
    if not second.stages:
        return first
    if not first.stages:
        return second
    gap = second.stages[0].t_start - first.stages[-1].t_end
    if abs(gap) > _TIME_EPS:
        raise InvalidArgumentError(f"schedules do not join ({'gap' if gap > 0 else 'overlap'} of {abs(gap):.3g})")
    return ControlSchedule(first.stages + second.stages,
                           schedule_id or f"{first.schedule_id}+{second.schedule_id}")


def window_count(l: float) -> int:
    """Smallest M with M * l >= 1."""
    if not 0 < l <= 1:
        raise InvalidArgumentError(f"window length must lie in (0, 1], got {l}")
    return max(1, math.ceil(1.0 / l - 1e-9))


def sweep_window_sequence(l: float, M: Optional[int] = None) -> list[Window]:
    """Windows (0,l), (l,2l), ..., with the last one flush against x = 1."""
    if M is None:
        M = window_count(l)
    if M * l < 1 - 1e-12:
        raise InvalidArgumentError(f"M*l = {M * l} < 1: windows do not cover (0, 1)")
    wins = [Window((j - 1) * l, l) for j in range(1, M)]
    # a single window starts at 0 even when l rounds just below 1
    wins.append(Window(1.0 - l if M > 1 else 0.0, l))
    return wins


def idle_schedule(t0: float, t1: float, schedule_id: str = "idle") -> ControlSchedule:
    return ControlSchedule((ControlStage(t0, t1, Window(0.0, 1.0)),), schedule_id)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _field_to_dict(fld, grid, t0, t1):
    if not isinstance(fld, SampledField):
        if grid is None:
            raise InvalidArgumentError("a grid is needed to serialize an analytic field")
        times = np.linspace(t0, t1, 11)[1:]
        fld = SampledField(times, grid.nodes, np.array([_field_values(fld, grid, t) for t in times]))
    return {"times": fld.times.tolist(), "x": fld.x.tolist(), "values": fld.values.tolist()}


def _field_from_dict(d) -> SampledField:
    return SampledField(np.array(d["times"], dtype=float), np.array(d["x"], dtype=float),
                        np.array(d["values"], dtype=float))


def stage_to_dict(stage: ControlStage, grid: Optional[SpatialGrid] = None) -> dict:
    p = stage.payload
    payload = {"kind": p.kind}
    if isinstance(p, ConstMultiplicative):
        payload["m"] = float(p.m)
    elif isinstance(p, FieldMultiplicative):
        payload["field"] = _field_to_dict(p.u, grid, stage.t_start, stage.t_end)
    elif isinstance(p, FieldAdditive):
        payload["field"] = _field_to_dict(p.v, grid, stage.t_start, stage.t_end)
    d = {"t_start": float(stage.t_start), "t_end": float(stage.t_end),
         "r": float(stage.window.r), "l": float(stage.window.l), "payload": payload}
    if stage.max_dt is not None:
        d["max_dt"] = float(stage.max_dt)
    return d


def stage_from_dict(d: dict) -> ControlStage:
    p = d["payload"]
    kind = p["kind"]
    if kind == "idle":
        payload = Idle()
    elif kind == "const_multiplicative":
        payload = ConstMultiplicative(float(p["m"]))
    elif kind == "field_multiplicative":
        payload = FieldMultiplicative(_field_from_dict(p["field"]))
    elif kind == "field_additive":
        payload = FieldAdditive(_field_from_dict(p["field"]))
    else:
        raise InvalidArgumentError(f"unknown payload kind {kind!r}")
    max_dt = d.get("max_dt")
    return ControlStage(float(d["t_start"]), float(d["t_end"]), Window(float(d["r"]), float(d["l"])), payload,
                        None if max_dt is None else float(max_dt))


def schedule_to_dict(schedule: ControlSchedule, grid: Optional[SpatialGrid] = None,
                     certificate: Optional[dict] = None) -> dict:
    doc = {
        "schema_version": SCHEDULE_SCHEMA_VERSION,
        "schedule_id": schedule.schedule_id,
        "stages": [stage_to_dict(s, grid) for s in schedule.stages],
    }
    if certificate is not None:
        doc["certificate"] = certificate
    return doc


def schedule_from_dict(doc: dict) -> ControlSchedule:
    version = doc.get("schema_version")
    if version != SCHEDULE_SCHEMA_VERSION:
        raise InvalidArgumentError(f"unsupported schedule schema version {version!r}")
    return ControlSchedule(tuple(stage_from_dict(s) for s in doc["stages"]),
                           doc.get("schedule_id", "schedule"))


def dumps_schedule(schedule: ControlSchedule, grid: Optional[SpatialGrid] = None,
                   certificate: Optional[dict] = None) -> str:
    return json.dumps(schedule_to_dict(schedule, grid, certificate), indent=1)


def loads_schedule(text: str) -> ControlSchedule:
    return schedule_from_dict(json.loads(text))
