"""Continuous-time state-space models and fixed-step integration.

Models are plain callables bundled in a :class:`ContinuousSystem`: a state
derivative ``f(x, u, t)`` and an output map ``h(x, u, t)``, both taking and
returning tuples of floats.  ``has_feedthrough`` declares whether ``h``
actually depends on ``u``; models that declare it false must keep ``h``
constant in ``u`` so the closed-loop wiring can order output evaluations.

The built-in registry carries the plant/controller pairs of the benchmark
scenarios.  Entries with a ``kernel_id`` have a C transcription in the
compiled simulation core; the Python callables here remain the reference
definition either way.

Integration is classical fixed-step fourth-order Runge-Kutta with the
input held constant across the step, matching the zero-order-hold
semantics of the networked loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Sequence

__all__ = [
    "DimensionError",
    "DivergenceError",
    "ContinuousSystem",
    "evaluate_deriv",
    "evaluate_output",
    "rk4_step",
    "integrate_open_loop",
    "REGISTRY",
    "default_registry",
    "get_model",
    "model_names",
]

StateFn = Callable[[tuple[float, ...], tuple[float, ...], float], tuple[float, ...]]


class DimensionError(ValueError):
    """A state, input, or output vector has the wrong length."""


class DivergenceError(RuntimeError):
    """Integration produced a non-finite state."""


@dataclass(frozen=True)
class ContinuousSystem:
    """A continuous-time model ``x' = f(x, u, t)``, ``y = h(x, u, t)``."""

    name: str
    state_dim: int
    input_dim: int
    output_dim: int
    deriv: StateFn
    output: StateFn
    has_feedthrough: bool
    kernel_id: int | None = field(default=None, compare=False)
    description: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if self.state_dim < 1 or self.input_dim < 1 or self.output_dim < 1:
            raise DimensionError(f"{self.name}: dimensions must be positive")


def _as_vector(value: Sequence[float], dim: int, what: str, name: str) -> tuple[float, ...]:
    vec = tuple(float(v) for v in value)
    if len(vec) != dim:
        raise DimensionError(f"{name}: {what} must have length {dim}, got {len(vec)}")
    return vec


def evaluate_deriv(
    sys: ContinuousSystem, x: Sequence[float], u: Sequence[float], t: float = 0.0
) -> tuple[float, ...]:
    """Evaluate ``f(x, u, t)`` with dimension checks on every vector."""
    xv = _as_vector(x, sys.state_dim, "state", sys.name)
    uv = _as_vector(u, sys.input_dim, "input", sys.name)
    dx = sys.deriv(xv, uv, float(t))
    return _as_vector(dx, sys.state_dim, "derivative", sys.name)


def evaluate_output(
    sys: ContinuousSystem, x: Sequence[float], u: Sequence[float], t: float = 0.0
) -> tuple[float, ...]:
    """Evaluate ``h(x, u, t)`` with dimension checks on every vector."""
    xv = _as_vector(x, sys.state_dim, "state", sys.name)
    uv = _as_vector(u, sys.input_dim, "input", sys.name)
    y = sys.output(xv, uv, float(t))
    return _as_vector(y, sys.output_dim, "output", sys.name)


def _rk4_tuple(
    f: StateFn, x: tuple[float, ...], u: tuple[float, ...], t: float, dt: float
) -> tuple[float, ...]:
    # Classical RK4 with u held constant.  The combination is written in one
    # fixed association order; the compiled core mirrors it operation for
    # operation so both engines produce identical bits.
    h2 = 0.5 * dt
    k1 = f(x, u, t)
    k2 = f(tuple(xi + h2 * ki for xi, ki in zip(x, k1)), u, t + h2)
    k3 = f(tuple(xi + h2 * ki for xi, ki in zip(x, k2)), u, t + h2)
    k4 = f(tuple(xi + dt * ki for xi, ki in zip(x, k3)), u, t + dt)
    return tuple(
        xi + dt * (a + 2.0 * (b + c) + d) / 6.0 for xi, a, b, c, d in zip(x, k1, k2, k3, k4)
    )


def rk4_step(
    sys: ContinuousSystem,
    x: Sequence[float],
    u_hold: Sequence[float],
    t: float,
    dt: float,
) -> tuple[float, ...]:
    """Advance the state one step of length ``dt`` under a held input."""
    if not (math.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be a positive finite real, got {dt}")
    xv = _as_vector(x, sys.state_dim, "state", sys.name)
    uv = _as_vector(u_hold, sys.input_dim, "input", sys.name)
    xn = _rk4_tuple(sys.deriv, xv, uv, float(t), dt)
    if not all(math.isfinite(v) for v in xn):
        raise DivergenceError(f"{sys.name}: non-finite state after step at t={t}")
    return xn


def integrate_open_loop(
    sys: ContinuousSystem,
    x0: Sequence[float],
    u: Callable[[float], float],
    dt: float,
    duration: float,
):
    """Integrate a single-input model under a scalar input signal ``u(t)``.

    The input is sampled at the RK4 stage times, so smooth signals keep the
    fourth-order accuracy.  Returns ``(t, u_samples, y)`` as numpy arrays on
    the uniform grid including both endpoints.
    """
    import numpy as np

    if sys.input_dim != 1 or sys.output_dim != 1:
        raise DimensionError(f"{sys.name}: open-loop driver requires a scalar channel")
    n = int(round(duration / dt))
    if n < 1:
        raise ValueError("duration must cover at least one step")
    x = _as_vector(x0, sys.state_dim, "state", sys.name)
    ts = np.arange(n + 1) * dt
    us = np.empty(n + 1)
    ys = np.empty(n + 1)
    f = sys.deriv
    for k in range(n + 1):
        t = k * dt
        uk = float(u(t))
        us[k] = uk
        ys[k] = sys.output(x, (uk,), t)[0]
        if k == n:
            break
        h2 = 0.5 * dt
        um = float(u(t + h2))
        ue = float(u(t + dt))
        k1 = f(x, (uk,), t)
        k2 = f(tuple(xi + h2 * ki for xi, ki in zip(x, k1)), (um,), t + h2)
        k3 = f(tuple(xi + h2 * ki for xi, ki in zip(x, k2)), (um,), t + h2)
        k4 = f(tuple(xi + dt * ki for xi, ki in zip(x, k3)), (ue,), t + dt)
        x = tuple(
            xi + dt * (a + 2.0 * (b + c) + d) / 6.0 for xi, a, b, c, d in zip(x, k1, k2, k3, k4)
        )
        if not all(math.isfinite(v) for v in x):
            raise DivergenceError(f"{sys.name}: non-finite state after step at t={t}")
    return ts, us, ys


# Built-in models.  Cubic terms are written as repeated products, not pow(),
# to match the compiled kernels bit for bit.


def _ex1_plant_deriv(x, u, t):
    x1, x2 = x
    return (-3.0 * x1 * x1 * x1 + x1 * x2, -0.8 * x2 + 2.0 * u[0])


def _ex1_plant_output(x, u, t):
    return (x[1],)


def _gain7_controller_deriv(x, u, t):
    return (-3.0 * x[0] + u[0],)


def _gain7_controller_output(x, u, t):
    return (7.0 * x[0] + u[0],)


def _ex2_plant_deriv(x, u, t):
    x1, x2 = x
    return (x2, -0.5 * x1 * x1 * x1 - x2 + u[0])


def _ex2_plant_output(x, u, t):
    return (x[1],)


def _ex2_controller_deriv(x, u, t):
    x1, x2 = x
    return (-2.0 * x1 - x2 + u[0], -3.0 * x1 - 5.0 * x2 + 2.0 * u[0])


def _ex2_controller_output(x, u, t):
    return (x[0] + x[1] + u[0],)


def _ex4_plant_deriv(x, u, t):
    x1, x2 = x
    return (-3.0 * x1 * x1 * x1 + x1 * x2, 0.2 * x2 + 2.0 * u[0])


def _ex4_plant_output(x, u, t):
    return (x[1],)


def _ex5_plant_deriv(x, u, t):
    return (-x[0] + u[0],)


def _ex5_plant_output(x, u, t):
    return (x[0] - 0.25 * u[0],)


def _ex5_controller_deriv(x, u, t):
    return (-x[0] + u[0],)


def _ex5_controller_output(x, u, t):
    return (-0.5 * x[0] + 1.0,)


def _ex7_plant_deriv(x, u, t):
    x1, x2 = x
    return (x2, -0.6 * x1 * x1 * x1 - 0.9 * x2 + u[0])


def _ex7_plant_output(x, u, t):
    return (x[1],)


def _ex7_controller_deriv(x, u, t):
    x1, x2 = x
    return (x2, -x1 - x2 * x2 * x2 + u[0])


def _ex7_controller_output(x, u, t):
    return (x[1],)


def _ex8_plant_deriv(x, u, t):
    x1, x2 = x
    return (x2, -2.0 * x1 - 2.0 * x2 + u[0])


def _ex8_plant_output(x, u, t):
    return (x[0] + 2.0 * x[1] + 0.05 * u[0],)


def _make_registry() -> dict[str, ContinuousSystem]:
    def siso(name, n, deriv, output, feedthrough, kernel_id, description):
        return ContinuousSystem(
            name=name,
            state_dim=n,
            input_dim=1,
            output_dim=1,
            deriv=deriv,
            output=output,
            has_feedthrough=feedthrough,
            kernel_id=kernel_id,
            description=description,
        )

    models = [
        siso(
            "ex1_plant", 2, _ex1_plant_deriv, _ex1_plant_output, False, 0,
            "two-state nonlinear plant; cubic first state does not reach the output",
        ),
        siso(
            "ex1_controller", 1, _gain7_controller_deriv, _gain7_controller_output, True, 1,
            "first-order lag with gain-7 state output plus unit feedthrough",
        ),
        siso(
            "ex2_plant", 2, _ex2_plant_deriv, _ex2_plant_output, False, 2,
            "double integrator chain with cubic spring and unit damping",
        ),
        siso(
            "ex2_controller", 2, _ex2_controller_deriv, _ex2_controller_output, True, 3,
            "stable two-state linear controller with unit feedthrough",
        ),
        siso(
            "ex4_plant", 2, _ex4_plant_deriv, _ex4_plant_output, False, 4,
            "variant of ex1_plant with an unstable output state (+0.2 pole)",
        ),
        siso(
            "ex4_controller", 1, _gain7_controller_deriv, _gain7_controller_output, True, 1,
            "same dynamics as ex1_controller; paired with ex4_plant",
        ),
        siso(
            "ex5_plant", 1, _ex5_plant_deriv, _ex5_plant_output, True, 5,
            "first-order lag with negative feedthrough -0.25",
        ),
        siso(
            "ex5_controller", 1, _ex5_controller_deriv, _ex5_controller_output, False, 6,
            "first-order lag with output offset 1 and gain -0.5",
        ),
        siso(
            "ex7_plant", 2, _ex7_plant_deriv, _ex7_plant_output, False, 7,
            "double integrator chain with cubic spring and 0.9 damping",
        ),
        siso(
            "ex7_controller", 2, _ex7_controller_deriv, _ex7_controller_output, False, 8,
            "oscillator with cubic velocity damping, velocity output",
        ),
        siso(
            "ex8_plant", 2, _ex8_plant_deriv, _ex8_plant_output, True, 9,
            "second-order linear plant, DC gain 0.55, feedthrough 0.05",
        ),
    ]
    return {m.name: m for m in models}


REGISTRY: Mapping[str, ContinuousSystem] = MappingProxyType(_make_registry())


def default_registry() -> dict[str, ContinuousSystem]:
    """A mutable copy of the built-in model registry."""
    return dict(REGISTRY)


def get_model(name: str, registry: Mapping[str, ContinuousSystem] | None = None) -> ContinuousSystem:
    reg = REGISTRY if registry is None else registry
    try:
        return reg[name]
    except KeyError:
        known = ", ".join(sorted(reg))
        raise KeyError(f"unknown model {name!r}; registered models: {known}") from None


def model_names(registry: Mapping[str, ContinuousSystem] | None = None) -> list[str]:
    reg = REGISTRY if registry is None else registry
    return sorted(reg)
