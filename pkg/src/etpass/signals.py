"""Exogenous input signals for the networked loop.

Each signal is a small frozen spec that can be sampled pointwise or on a
whole time grid.  Sampling is a pure function of the spec and the time, so
two engines fed the same specs see identical inputs and a scenario reruns
bit for bit.

White noise is band-limited by construction: the signal is piecewise
constant over windows of length ``hold_dt`` and the level of window ``i``
is drawn as ``N(0, power / hold_dt)`` from an RNG keyed on
``(seed, i)``.  That keeps pointwise sampling O(1) and makes the draw for
a given window independent of how the surrounding grid is laid out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "Zero",
    "Constant",
    "Step",
    "Sinusoid",
    "WhiteNoise",
    "SignalSpec",
    "sample_signal",
    "sample_grid",
    "parse_signal",
    "signal_fields",
]


@dataclass(frozen=True)
class Zero:
    """Identically zero."""


@dataclass(frozen=True)
class Constant:
    """Constant level for all times."""

    level: float


@dataclass(frozen=True)
class Step:
    """0 before ``time``, ``level`` from ``time`` on (closed on the left)."""

    level: float = 1.0
    time: float = 0.0


@dataclass(frozen=True)
class Sinusoid:
    """``amplitude * sin(angular_freq * t + phase) + offset``."""

    amplitude: float
    angular_freq: float
    phase: float = 0.0
    offset: float = 0.0


@dataclass(frozen=True)
class WhiteNoise:
    """Piecewise-constant noise with flat low-frequency power ``power``.

    ``hold_dt`` is the window length; ``None`` means "use the integration
    step of the scenario" and is resolved before simulation.  ``power = 0``
    produces an exact zero signal.
    """

    power: float
    seed: int
    hold_dt: float | None = None

    def __post_init__(self) -> None:
        if self.power < 0.0:
            raise ValueError(f"noise power must be non-negative, got {self.power}")
        if self.hold_dt is not None and self.hold_dt <= 0.0:
            raise ValueError(f"hold_dt must be positive, got {self.hold_dt}")


SignalSpec = Union[Zero, Constant, Step, Sinusoid, WhiteNoise]


def resolve_hold_dt(spec: SignalSpec, dt: float) -> SignalSpec:
    """Fill in a missing noise window length with the integration step."""
    if isinstance(spec, WhiteNoise) and spec.hold_dt is None:
        return WhiteNoise(power=spec.power, seed=spec.seed, hold_dt=dt)
    return spec


def _noise_level(spec: WhiteNoise, window: int) -> float:
    sigma = math.sqrt(spec.power / spec.hold_dt)
    return sigma * np.random.default_rng((spec.seed, window)).standard_normal()


def sample_signal(spec: SignalSpec, t: float) -> float:
    """Sample one signal value at time ``t``."""
    if isinstance(spec, Zero):
        return 0.0
    if isinstance(spec, Constant):
        return spec.level
    if isinstance(spec, Step):
        return spec.level if t >= spec.time else 0.0
    if isinstance(spec, Sinusoid):
        return spec.amplitude * math.sin(spec.angular_freq * t + spec.phase) + spec.offset
    if isinstance(spec, WhiteNoise):
        if spec.power == 0.0:
            return 0.0
        if spec.hold_dt is None:
            raise ValueError("white noise needs hold_dt resolved before sampling")
        return _noise_level(spec, int(math.floor(t / spec.hold_dt)))
    raise TypeError(f"not a signal spec: {spec!r}")


def sample_grid(spec: SignalSpec, ts: np.ndarray) -> np.ndarray:
    """Sample a signal on a whole time grid at once."""
    ts = np.asarray(ts, dtype=float)
    if isinstance(spec, Zero):
        return np.zeros_like(ts)
    if isinstance(spec, Constant):
        return np.full_like(ts, spec.level)
    if isinstance(spec, Step):
        return np.where(ts >= spec.time, spec.level, 0.0)
    if isinstance(spec, Sinusoid):
        return spec.amplitude * np.sin(spec.angular_freq * ts + spec.phase) + spec.offset
    if isinstance(spec, WhiteNoise):
        if spec.power == 0.0:
            return np.zeros_like(ts)
        if spec.hold_dt is None:
            raise ValueError("white noise needs hold_dt resolved before sampling")
        windows = np.floor(ts / spec.hold_dt).astype(np.int64)
        sigma = math.sqrt(spec.power / spec.hold_dt)
        levels = {
            w: sigma * np.random.default_rng((spec.seed, int(w))).standard_normal()
            for w in np.unique(windows)
        }
        return np.array([levels[w] for w in windows])
    raise TypeError(f"not a signal spec: {spec!r}")


_SIGNAL_KINDS = {
    "zero": (Zero, ()),
    "constant": (Constant, ("level",)),
    "step": (Step, ("level", "time")),
    "sinusoid": (Sinusoid, ("amplitude", "angular_freq", "phase", "offset")),
    "white_noise": (WhiteNoise, ("power", "seed", "hold_dt")),
}


def parse_signal(kind: str, params: dict[str, str]) -> SignalSpec:
    """Build a signal spec from a config ``kind`` plus string parameters."""
    kind = kind.strip().lower()
    if kind not in _SIGNAL_KINDS:
        valid = ", ".join(sorted(_SIGNAL_KINDS))
        raise ValueError(f"unknown signal kind {kind!r}; expected one of: {valid}")
    cls, names = _SIGNAL_KINDS[kind]
    unknown = set(params) - set(names)
    if unknown:
        raise ValueError(f"signal kind {kind!r} does not take parameters: {sorted(unknown)}")
    kwargs = {}
    for key, raw in params.items():
        kwargs[key] = int(raw) if key == "seed" else float(raw)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValueError(f"signal kind {kind!r}: {exc}") from None


def signal_fields(spec: SignalSpec) -> dict[str, object]:
    """Flatten a spec back to config keys (inverse of :func:`parse_signal`)."""
    for kind, (cls, names) in _SIGNAL_KINDS.items():
        if type(spec) is cls:
            out: dict[str, object] = {"kind": kind}
            for name in names:
                value = getattr(spec, name, None)
                if value is not None:
                    out[name] = value
            return out
    raise TypeError(f"not a signal spec: {spec!r}")
