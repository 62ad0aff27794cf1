"""Numerical verification of certified supply-rate inequalities.

Two kinds of checks live here.

Trajectory checks integrate a supply rate along a simulated trace with the
trapezoid rule and require the running integral to stay above ``-tol``;
for a dissipative loop started at rest the integral bounds the stored
energy from below by zero, so any real dip marks a violated certificate.

The proof-step oracle needs no simulation: it samples millions of random
``(w, y, e)`` tuples satisfying the trigger bound ``||e||^2 <= delta
||y||^2`` and checks that the closed loop's expanded supply rate never
exceeds the certified QSR form.  The expanded form is transcribed from
the certificate derivation independently of the certificate entries, so
agreement here cross-validates both transcriptions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .certificates import (
    PassivityIndices,
    QsrCertificate,
    Topology,
    qsr_certificate,
)
from .eventsim import Trace

__all__ = [
    "SupplySeries",
    "VerificationReport",
    "qsr_supply_series",
    "ifofp_supply_series",
    "subsystem_ifofp_series",
    "io_passivity_series",
    "check_dissipation",
    "certificate_margin_series",
    "proof_step_oracle",
    "l2_gain_estimate",
]


@dataclass(frozen=True)
class SupplySeries:
    """A supply rate sampled along a trajectory and its running integral."""

    name: str
    t: np.ndarray
    omega: np.ndarray
    cumulative: np.ndarray


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of one verification check."""

    name: str
    passed: bool
    tolerance: float
    min_cumulative: float | None = None
    first_violation_time: float | None = None
    samples: int | None = None
    worst_margin: float | None = None


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Row-wise inner product; scalar exogenous signals broadcast across
    # vector channels (w stands for w * ones).
    if a.ndim == 1 and b.ndim == 1:
        return a * b
    if a.ndim == 1:
        return a * b.sum(axis=1)
    if b.ndim == 1:
        return a.sum(axis=1) * b
    return (a * b).sum(axis=1)


def _sq(a: np.ndarray, width: int) -> np.ndarray:
    if a.ndim == 1:
        return width * a * a
    return (a * a).sum(axis=1)


def _cumulative(t: np.ndarray, omega: np.ndarray) -> np.ndarray:
    out = np.empty(len(t))
    out[0] = 0.0
    np.cumsum(0.5 * (omega[1:] + omega[:-1]) * np.diff(t), out=out[1:])
    return out


def _series(name: str, t: np.ndarray, omega: np.ndarray) -> SupplySeries:
    return SupplySeries(name=name, t=t, omega=omega, cumulative=_cumulative(t, omega))


def _channel_width(trace: Trace) -> int:
    return 1 if trace.y_p.ndim == 1 else trace.y_p.shape[1]


def qsr_supply_series(trace: Trace, cert: QsrCertificate) -> SupplySeries:
    """Certified closed-loop supply ``w'Rw + 2w'Sy + y'Qy`` along a trace."""
    if cert.topology is not trace.topology:
        raise ValueError(
            f"certificate topology {cert.topology.value} does not match trace {trace.topology.value}"
        )
    m = _channel_width(trace)
    omega = (
        cert.r_p * _sq(trace.w1, m)
        + cert.r_c * _sq(trace.w2, m)
        + 2.0
        * (
            cert.s11 * _dot(trace.w1, trace.y_p)
            + cert.s12 * _dot(trace.w1, trace.y_c)
            + cert.s21 * _dot(trace.w2, trace.y_p)
            + cert.s22 * _dot(trace.w2, trace.y_c)
        )
        + cert.q_p * _sq(trace.y_p, m)
        + cert.q_c * _sq(trace.y_c, m)
    )
    return _series("qsr-supply", trace.t, omega)


def ifofp_supply_series(
    t: np.ndarray, u: np.ndarray, y: np.ndarray, nu: float, rho: float, name: str = "ifofp-supply"
) -> SupplySeries:
    """Supply ``u'y - nu*u'u - rho*y'y`` over a recorded input/output pair."""
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    width = 1 if y.ndim == 1 else y.shape[1]
    omega = _dot(u, y) - nu * _sq(u, width) - rho * _sq(y, width)
    return _series(name, t, omega)


def subsystem_ifofp_series(trace: Trace, which: str, indices: PassivityIndices) -> SupplySeries:
    """IF-OFP supply of one subsystem along the closed-loop trace."""
    if which == "plant":
        u, y = trace.u_p, trace.y_p
    elif which == "controller":
        u, y = trace.u_c, trace.y_c
    else:
        raise ValueError(f"which must be 'plant' or 'controller', got {which!r}")
    return ifofp_supply_series(
        trace.t, u, y, indices.nu, indices.rho, name=f"ifofp[{which}]"
    )


def io_passivity_series(trace: Trace, eps0: float, delta0: float) -> SupplySeries:
    """Channel supply ``w1'y_p - eps0*w1'w1 - delta0*y_p'y_p``.

    Only defined when ``w2`` is identically zero; the closed-form channel
    certificates assume that hypothesis.
    """
    if np.any(trace.w2 != 0.0):
        raise ValueError("w1 -> y_p passivity is only defined for w2 identically zero")
    m = _channel_width(trace)
    omega = (
        _dot(trace.w1, trace.y_p)
        - eps0 * _sq(trace.w1, m)
        - delta0 * _sq(trace.y_p, m)
    )
    return _series("w1-to-yp-supply", trace.t, omega)


def check_dissipation(
    series: SupplySeries, tolerance: float = 1e-6, name: str | None = None
) -> VerificationReport:
    """Require the running supply integral to stay above ``-tolerance``."""
    if tolerance < 0.0:
        raise ValueError(f"tolerance must be non-negative, got {tolerance}")
    cml = series.cumulative
    min_cml = float(cml.min())
    violating = np.nonzero(cml < -tolerance)[0]
    return VerificationReport(
        name=name if name is not None else series.name,
        passed=len(violating) == 0,
        tolerance=tolerance,
        min_cumulative=min_cml,
        first_violation_time=float(series.t[violating[0]]) if len(violating) else None,
    )


def _expanded_supply(
    topology: Topology,
    plant: PassivityIndices,
    controller: PassivityIndices,
    w1: np.ndarray,
    w2: np.ndarray,
    yp: np.ndarray,
    yc: np.ndarray,
    ep: np.ndarray,
    ec: np.ndarray,
) -> np.ndarray:
    # The closed loop's worst-case supply after substituting the wiring
    # into both subsystem IF-OFP inequalities, exactly as expanded in the
    # certificate derivation (hold errors kept symbolic).
    nu_p, rho_p = plant.nu, plant.rho
    nu_c, rho_c = controller.nu, controller.rho
    e = (
        w1 * yp
        + w2 * yc
        - nu_p * w1 * w1
        - nu_c * w2 * w2
        - (rho_p + nu_c) * yp * yp
        - (rho_c + nu_p) * yc * yc
        + 2.0 * nu_p * w1 * yc
        - 2.0 * nu_c * w2 * yp
    )
    if topology is not Topology.CONTROLLER_SIDE:
        e = e + 2.0 * nu_c * yp * ep + 2.0 * nu_c * w2 * ep - ep * yc - nu_c * ep * ep
    if topology is not Topology.PLANT_SIDE:
        e = e + 2.0 * nu_p * yc * ec - 2.0 * nu_p * w1 * ec + yp * ec - nu_p * ec * ec
    return e


def _qsr_form(
    cert: QsrCertificate,
    w1: np.ndarray,
    w2: np.ndarray,
    yp: np.ndarray,
    yc: np.ndarray,
) -> np.ndarray:
    return (
        cert.r_p * w1 * w1
        + cert.r_c * w2 * w2
        + 2.0
        * (
            cert.s11 * w1 * yp
            + cert.s12 * w1 * yc
            + cert.s21 * w2 * yp
            + cert.s22 * w2 * yc
        )
        + cert.q_p * yp * yp
        + cert.q_c * yc * yc
    )


def certificate_margin_series(
    trace: Trace,
    cert: QsrCertificate,
    plant: PassivityIndices,
    controller: PassivityIndices,
) -> np.ndarray:
    """Pointwise margin of the certified QSR form over the expanded supply.

    Every recorded sample satisfies the trigger bound, so the margins must
    be non-negative up to rounding whenever the certificate algebra holds.
    Scalar-channel traces only.
    """
    if trace.y_p.ndim != 1:
        raise ValueError("margin series is defined for scalar-channel traces")
    expanded = _expanded_supply(
        trace.topology, plant, controller,
        trace.w1, trace.w2, trace.y_p, trace.y_c, trace.e_p, trace.e_c,
    )
    certified = _qsr_form(cert, trace.w1, trace.w2, trace.y_p, trace.y_c)
    return certified - expanded


def _bounded_errors(
    rng: np.random.Generator, y: np.ndarray, delta: float, boundary_fraction: float
) -> np.ndarray:
    # Errors filling the admissible disc |e| <= sqrt(delta)*|y|, with a
    # fraction pinned to the boundary where the inequality is tightest.
    n = len(y)
    r = rng.uniform(0.0, 1.0, n)
    r[rng.uniform(0.0, 1.0, n) < boundary_fraction] = 1.0
    sign = np.where(rng.uniform(0.0, 1.0, n) < 0.5, -1.0, 1.0)
    return sign * r * math.sqrt(delta) * np.abs(y)


def proof_step_oracle(
    topology: Topology,
    plant: PassivityIndices,
    controller: PassivityIndices,
    delta_p: float | None = None,
    delta_c: float | None = None,
    samples: int = 1_000_000,
    seed: int = 20260823,
    tolerance: float = 1e-9,
) -> VerificationReport:
    """Randomized check that the QSR certificate dominates the loop supply.

    Draws ``samples`` standard-normal ``(w1, w2, y_p, y_c)`` tuples, pairs
    them with hold errors satisfying the trigger bound (boundary cases
    included), and compares the expanded supply against the certified QSR
    form pointwise.  ``worst_margin`` is the smallest observed margin; the
    check passes when it stays above ``-tolerance``.
    """
    cert = qsr_certificate(topology, plant, controller, delta_p=delta_p, delta_c=delta_c)
    rng = np.random.default_rng(seed)
    w1 = rng.standard_normal(samples)
    w2 = rng.standard_normal(samples)
    yp = rng.standard_normal(samples)
    yc = rng.standard_normal(samples)
    zeros = np.zeros(samples)
    ep = (
        _bounded_errors(rng, yp, delta_p, 0.1)
        if topology.has_plant_detector
        else zeros
    )
    ec = (
        _bounded_errors(rng, yc, delta_c, 0.1)
        if topology.has_controller_detector
        else zeros
    )
    expanded = _expanded_supply(topology, plant, controller, w1, w2, yp, yc, ep, ec)
    certified = _qsr_form(cert, w1, w2, yp, yc)
    margins = certified - expanded
    worst = float(margins.min())
    return VerificationReport(
        name=f"proof-step-oracle[{topology.value}]",
        passed=worst >= -tolerance,
        tolerance=tolerance,
        samples=samples,
        worst_margin=worst,
    )


def l2_gain_estimate(trace: Trace) -> float:
    """Ratio of output to input L2 norms over the recorded horizon."""
    m = _channel_width(trace)
    num = _cumulative(trace.t, _sq(trace.y_p, m) + _sq(trace.y_c, m))[-1]
    den = _cumulative(trace.t, _sq(trace.w1, m) + _sq(trace.w2, m))[-1]
    if den == 0.0:
        raise ValueError("input energy is zero; no gain estimate exists")
    return math.sqrt(num / den)
