"""Event-triggered closed-loop simulation.

A :class:`Scenario` names a plant and a controller from the model
registry, the detector topology with its trigger levels, the exogenous
inputs ``w1`` (plant reference) and ``w2`` (controller disturbance), and
the integration grid.  :func:`simulate` runs the loop and returns a
:class:`Trace` of every signal on the grid plus an :class:`EventLog` of
transmission times.

Wiring (negative feedback, held signals marked by ^):

- plant side:      u_p = w1 - y_c,   u_c = w2 + y_p^
- controller side: u_p = w1 - y_c^,  u_c = w2 + y_p
- both sides:      u_p = w1 - y_c^,  u_c = w2 + y_p^

A detector transmits unconditionally at t = 0 and afterwards exactly when
``||y - y^||^2 > delta * ||y||^2`` (strict).  Hold errors recorded in the
trace are post-update, so event rows show e = 0 and every recorded row
satisfies the trigger bound.

Two engines produce identical results: a compiled core for built-in
scalar-channel models and a pure-Python fallback (also covering custom
models and vector channels).  Set ``ETPASS_PURE=1`` to force the fallback.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from typing import IO, Mapping

import numpy as np

from . import _pyloop
from .certificates import Topology, validate_trigger_level
from .dynamics import ContinuousSystem, get_model
from .signals import SignalSpec, resolve_hold_dt, sample_grid

try:
    from . import _core
except ImportError:
    _core = None

__all__ = [
    "AlgebraicLoopError",
    "Scenario",
    "Trace",
    "EventLog",
    "DetectorStats",
    "CommStats",
    "detector_check",
    "validate_scenario",
    "simulate",
    "comm_stats",
    "trace_to_csv",
    "compiled_available",
    "CSV_HEADER",
]

CSV_HEADER = "t,w1,w2,u_p,u_c,y_p,y_c,y_p_held,y_c_held,e_p,e_c,event_p,event_c"

_TOPO_CODE = {
    Topology.PLANT_SIDE: _pyloop.TOPO_PLANT,
    Topology.CONTROLLER_SIDE: _pyloop.TOPO_CONTROLLER,
    Topology.BOTH_SIDES: _pyloop.TOPO_BOTH,
}


class AlgebraicLoopError(ValueError):
    """Both subsystems have direct feedthrough on an unbroken path."""


def compiled_available() -> bool:
    return _core is not None


def detector_check(e, y, delta: float) -> bool:
    """True when the hold error violates the trigger bound (strict)."""
    validate_trigger_level(delta)
    e = np.asarray(e, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(e.dot(e)) > delta * float(y.dot(y))


@dataclass(frozen=True)
class Scenario:
    """One closed-loop experiment, fully determined (seeds included)."""

    topology: Topology
    plant: str
    controller: str
    delta_p: float | None
    delta_c: float | None
    w1: SignalSpec
    w2: SignalSpec
    dt: float
    duration: float
    x0_plant: tuple[float, ...] | None = None
    x0_controller: tuple[float, ...] | None = None

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def n_samples(self) -> int:
        return self.n_steps + 1


def validate_scenario(
    scn: Scenario, registry: Mapping[str, ContinuousSystem] | None = None
) -> tuple[ContinuousSystem, ContinuousSystem]:
    """Resolve and cross-check the scenario; returns (plant, controller)."""
    plant = get_model(scn.plant, registry)
    controller = get_model(scn.controller, registry)

    if not (math.isfinite(scn.dt) and scn.dt > 0.0):
        raise ValueError(f"dt must be a positive finite real, got {scn.dt}")
    if not (math.isfinite(scn.duration) and scn.duration >= scn.dt):
        raise ValueError(f"duration must cover at least one step, got {scn.duration}")

    if scn.topology.has_plant_detector:
        validate_trigger_level(scn.delta_p, "delta_p")
    elif scn.delta_p is not None:
        raise ValueError(f"{scn.topology.value} has no plant-side detector; delta_p must be None")
    if scn.topology.has_controller_detector:
        validate_trigger_level(scn.delta_c, "delta_c")
    elif scn.delta_c is not None:
        raise ValueError(
            f"{scn.topology.value} has no controller-side detector; delta_c must be None"
        )

    if plant.output_dim != controller.input_dim or controller.output_dim != plant.input_dim:
        raise ValueError(
            f"channel mismatch: {plant.name} is {plant.input_dim}->{plant.output_dim}, "
            f"{controller.name} is {controller.input_dim}->{controller.output_dim}"
        )
    if plant.input_dim != plant.output_dim:
        raise ValueError("loop channels must have equal width on both sides")
    if plant.has_feedthrough and controller.has_feedthrough:
        raise AlgebraicLoopError(
            f"{plant.name} and {controller.name} both have direct feedthrough; "
            "the loop is algebraic at the initial transmission"
        )

    for x0, sys_, label in (
        (scn.x0_plant, plant, "x0_plant"),
        (scn.x0_controller, controller, "x0_controller"),
    ):
        if x0 is not None and len(x0) != sys_.state_dim:
            raise ValueError(f"{label} must have length {sys_.state_dim}, got {len(x0)}")

    return plant, controller


@dataclass(frozen=True)
class Trace:
    """All loop signals on the simulation grid.

    Scalar channels give 1-D arrays; vector channels give (n, m) arrays
    for the signal columns.  Hold and error columns of a side without a
    detector are identically zero.  On divergence the arrays hold the
    valid prefix and ``diverged`` is set.
    """

    topology: Topology
    dt: float
    t: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    u_p: np.ndarray
    u_c: np.ndarray
    y_p: np.ndarray
    y_c: np.ndarray
    y_p_held: np.ndarray
    y_c_held: np.ndarray
    e_p: np.ndarray
    e_c: np.ndarray
    event_p: np.ndarray
    event_c: np.ndarray
    diverged: bool

    @property
    def n_samples(self) -> int:
        return len(self.t)

    @property
    def has_plant_detector(self) -> bool:
        return self.topology.has_plant_detector

    @property
    def has_controller_detector(self) -> bool:
        return self.topology.has_controller_detector


@dataclass(frozen=True)
class EventLog:
    """Transmission instants per detector (``None``: no such detector)."""

    plant_times: np.ndarray | None
    controller_times: np.ndarray | None

    def intervals(self, side: str) -> np.ndarray:
        times = {"plant": self.plant_times, "controller": self.controller_times}[side]
        if times is None:
            raise ValueError(f"no {side}-side detector in this log")
        return np.diff(times)


def _select_engine(engine: str | None, plant: ContinuousSystem, controller: ContinuousSystem) -> str:
    scalar = plant.input_dim == 1 and plant.output_dim == 1
    kernels = plant.kernel_id is not None and controller.kernel_id is not None
    can_compile = _core is not None and scalar and kernels and not os.environ.get("ETPASS_PURE")
    if engine is None:
        return "compiled" if can_compile else "pure"
    if engine == "compiled":
        if _core is None:
            raise RuntimeError("compiled core is not available in this installation")
        if not (scalar and kernels):
            raise RuntimeError("compiled core only covers built-in scalar-channel models")
        return "compiled"
    if engine == "pure":
        return "pure"
    raise ValueError(f"unknown engine {engine!r}; expected 'compiled' or 'pure'")


def simulate(
    scn: Scenario,
    registry: Mapping[str, ContinuousSystem] | None = None,
    engine: str | None = None,
) -> tuple[Trace, EventLog]:
    """Run the closed loop over the scenario grid.

    ``engine`` forces ``'compiled'`` or ``'pure'``; by default the
    compiled core is used whenever it covers the scenario.  Identical
    scenarios produce bit-identical traces on either engine.
    """
    plant, controller = validate_scenario(scn, registry)
    engine = _select_engine(engine, plant, controller)

    n = scn.n_samples
    m = plant.output_dim
    ts = np.arange(n) * scn.dt
    w1 = np.ascontiguousarray(sample_grid(resolve_hold_dt(scn.w1, scn.dt), ts))
    w2 = np.ascontiguousarray(sample_grid(resolve_hold_dt(scn.w2, scn.dt), ts))

    x0p = scn.x0_plant if scn.x0_plant is not None else (0.0,) * plant.state_dim
    x0c = scn.x0_controller if scn.x0_controller is not None else (0.0,) * controller.state_dim
    x0p = tuple(float(v) for v in x0p)
    x0c = tuple(float(v) for v in x0c)

    code = _TOPO_CODE[scn.topology]
    delta_p = scn.delta_p if scn.delta_p is not None else 0.0
    delta_c = scn.delta_c if scn.delta_c is not None else 0.0

    shape = n if m == 1 else (n, m)
    up = np.empty(shape)
    uc = np.empty(shape)
    yp = np.empty(shape)
    yc = np.empty(shape)
    yph = np.empty(shape)
    ych = np.empty(shape)
    ep = np.empty(shape)
    ec = np.empty(shape)
    evp = np.zeros(n, dtype=np.uint8)
    evc = np.zeros(n, dtype=np.uint8)

    if engine == "compiled":
        rows, diverged = _core.run_scalar_loop(
            plant.kernel_id, plant.state_dim, plant.has_feedthrough,
            controller.kernel_id, controller.state_dim,
            code, np.asarray(x0p), np.asarray(x0c), w1, w2,
            scn.dt, delta_p, delta_c,
            up, uc, yp, yc, yph, ych, ep, ec, evp, evc,
        )
    elif m == 1:
        rows, diverged = _pyloop.run_scalar_loop(
            plant, controller, code, x0p, x0c, w1, w2, scn.dt, delta_p, delta_c,
            up, uc, yp, yc, yph, ych, ep, ec, evp, evc,
        )
    else:
        rows, diverged = _pyloop.run_vector_loop(
            plant, controller, code, x0p, x0c, w1, w2, scn.dt, delta_p, delta_c,
            up, uc, yp, yc, yph, ych, ep, ec, evp, evc,
        )

    sel = slice(0, rows)
    trace = Trace(
        topology=scn.topology,
        dt=scn.dt,
        t=ts[sel],
        w1=w1[sel],
        w2=w2[sel],
        u_p=up[sel],
        u_c=uc[sel],
        y_p=yp[sel],
        y_c=yc[sel],
        y_p_held=yph[sel],
        y_c_held=ych[sel],
        e_p=ep[sel],
        e_c=ec[sel],
        event_p=evp[sel],
        event_c=evc[sel],
        diverged=bool(diverged),
    )
    log = EventLog(
        plant_times=trace.t[trace.event_p == 1] if scn.topology.has_plant_detector else None,
        controller_times=(
            trace.t[trace.event_c == 1] if scn.topology.has_controller_detector else None
        ),
    )
    return trace, log


@dataclass(frozen=True)
class DetectorStats:
    """Communication load of one detector over a run."""

    count: int
    events_per_second: float
    ratio: float
    min_interval: float | None
    mean_interval: float | None
    max_interval: float | None


@dataclass(frozen=True)
class CommStats:
    plant: DetectorStats | None
    controller: DetectorStats | None
    n_samples: int
    duration: float


def _detector_stats(times: np.ndarray, n_samples: int, duration: float) -> DetectorStats:
    count = len(times)
    gaps = np.diff(times)
    return DetectorStats(
        count=count,
        events_per_second=count / duration if duration > 0 else math.nan,
        ratio=count / n_samples,
        min_interval=float(gaps.min()) if len(gaps) else None,
        mean_interval=float(gaps.mean()) if len(gaps) else None,
        max_interval=float(gaps.max()) if len(gaps) else None,
    )


def comm_stats(log: EventLog, n_samples: int, dt: float) -> CommStats:
    """Event counts, sampling ratio, and inter-event interval summary.

    ``ratio`` is events per grid sample, so a detector that fires on every
    sample has ratio 1.  Intervals are ``None`` with fewer than two events.
    """
    duration = (n_samples - 1) * dt
    return CommStats(
        plant=(
            _detector_stats(log.plant_times, n_samples, duration)
            if log.plant_times is not None
            else None
        ),
        controller=(
            _detector_stats(log.controller_times, n_samples, duration)
            if log.controller_times is not None
            else None
        ),
        n_samples=n_samples,
        duration=duration,
    )


def trace_to_csv(trace: Trace, target: str | IO[str]) -> None:
    """Write a scalar-channel trace as CSV with the fixed column header.

    Floats are written with 17 significant digits, so a written trace
    reads back bit for bit; event flags are 0/1 integers.
    """
    if trace.y_p.ndim != 1:
        raise ValueError("CSV export is defined for scalar-channel traces only")
    columns = np.column_stack(
        [
            trace.t, trace.w1, trace.w2, trace.u_p, trace.u_c,
            trace.y_p, trace.y_c, trace.y_p_held, trace.y_c_held,
            trace.e_p, trace.e_c,
            trace.event_p.astype(float), trace.event_c.astype(float),
        ]
    )
    fmt = ["%.17g"] * 11 + ["%d", "%d"]
    if hasattr(target, "write"):
        np.savetxt(target, columns, fmt=fmt, delimiter=",", header=CSV_HEADER, comments="")
    else:
        with open(target, "w") as fh:
            np.savetxt(fh, columns, fmt=fmt, delimiter=",", header=CSV_HEADER, comments="")


def scenario_with(scn: Scenario, **changes) -> Scenario:
    """Convenience: a copy of the scenario with fields replaced."""
    return replace(scn, **changes)
