"""Dissipativity certificates for event-triggered feedback interconnections.

A plant and a controller, each characterized only by input-feedforward
output-feedback passivity (IF-OFP) indices ``(nu, rho)``, are connected in
negative feedback through a network that transmits one or both output
signals via event-triggered sampling and zero-order holds.  A detector on a
transmitted output ``y`` fires when the hold error ``e = y - y_held``
violates ``||e||^2 <= delta * ||y||^2`` for a trigger level
``delta in (0, 1]``.

Everything here is closed-form arithmetic on the four indices and the
trigger levels.  The central object is a QSR supply-rate certificate for
the closed loop,

    V_dot <= w' R w + 2 w' S y + y' Q y,

with ``w = (w1, w2)`` the exogenous inputs and ``y = (y_p, y_c)`` the raw
outputs.  ``Q`` and ``R`` are diagonal and ``S`` is fixed up to the index
values, so the certificate is stored entrywise.  A negative definite ``Q``
gives finite-gain L2 stability; further closed-form bounds certify
passivity indices for the full interconnection and for the ``w1 -> y_p``
channel when ``w2`` is identically zero.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

__all__ = [
    "Topology",
    "PassivityIndices",
    "QsrCertificate",
    "Condition",
    "StabilityReport",
    "IndexBounds",
    "TriggerBudget",
    "validate_trigger_level",
    "beta_nu_c",
    "beta_nu_p",
    "qsr_certificate",
    "l2_stable",
    "interconnection_index_bounds",
    "w1_yp_passive",
    "w1_yp_index_bounds",
    "max_trigger_level",
]


class Topology(enum.Enum):
    """Placement of the event detectors in the feedback loop.

    PLANT_SIDE:      only the plant output is sampled; the controller
                     output reaches the plant continuously.
    CONTROLLER_SIDE: only the controller output is sampled.
    BOTH_SIDES:      both outputs are sampled, with independent trigger
                     levels ``delta_p`` and ``delta_c``.
    """

    PLANT_SIDE = "plant_side"
    CONTROLLER_SIDE = "controller_side"
    BOTH_SIDES = "both_sides"

    @classmethod
    def parse(cls, text: str) -> "Topology":
        try:
            return cls(text.strip().lower())
        except ValueError:
            valid = ", ".join(t.value for t in cls)
            raise ValueError(f"unknown topology {text!r}; expected one of: {valid}") from None

    @property
    def has_plant_detector(self) -> bool:
        return self is not Topology.CONTROLLER_SIDE

    @property
    def has_controller_detector(self) -> bool:
        return self is not Topology.PLANT_SIDE


@dataclass(frozen=True)
class PassivityIndices:
    """IF-OFP indices of one subsystem.

    ``nu`` is the input-feedforward index and ``rho`` the output-feedback
    index in the supply rate ``u'y - nu*u'u - rho*y'y``.  Either index may
    be negative (a passivity shortage).
    """

    nu: float
    rho: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.nu) and math.isfinite(self.rho)):
            raise ValueError(f"passivity indices must be finite, got nu={self.nu}, rho={self.rho}")


def validate_trigger_level(delta: float, name: str = "delta") -> float:
    """Check that a trigger level lies in (0, 1] and return it."""
    if not (isinstance(delta, (int, float)) and math.isfinite(delta)):
        raise ValueError(f"{name} must be a finite real, got {delta!r}")
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"{name} must lie in (0, 1], got {delta}")
    return float(delta)


def _beta(rho_other: float, nu: float, delta: float) -> float:
    # Residual output dissipation on one loop flank after the hold error of
    # the sampled output is absorbed; affine and decreasing in delta.
    if nu > 0.0:
        return rho_other - nu - delta * (1.0 + nu)
    if nu < 0.0:
        return rho_other + 2.0 * nu - delta * (1.0 - 3.0 * nu)
    return rho_other - delta


def beta_nu_c(plant: PassivityIndices, controller: PassivityIndices, delta_p: float) -> float:
    """Margin beta(nu_c): plant-output flank, sampled with level ``delta_p``.

    Piecewise in the sign of ``nu_c``::

        nu_c > 0:  rho_p - nu_c - delta_p * (1 + nu_c)
        nu_c = 0:  rho_p - delta_p
        nu_c < 0:  rho_p + 2*nu_c - delta_p * (1 - 3*nu_c)
    """
    validate_trigger_level(delta_p, "delta_p")
    return _beta(plant.rho, controller.nu, delta_p)


def beta_nu_p(plant: PassivityIndices, controller: PassivityIndices, delta_c: float) -> float:
    """Margin beta(nu_p): controller-output flank, sampled with level ``delta_c``.

    Same piecewise form as :func:`beta_nu_c` with the roles swapped:
    ``rho_c`` replaces ``rho_p`` and the branch is selected by ``nu_p``.
    """
    validate_trigger_level(delta_c, "delta_c")
    return _beta(controller.rho, plant.nu, delta_c)


@dataclass(frozen=True)
class QsrCertificate:
    """Entrywise QSR supply-rate certificate for the closed loop.

    The certified inequality is ``V_dot <= w'Rw + 2w'Sy + y'Qy`` with
    ``Q = diag(q_p, q_c)``, ``R = diag(r_p, r_c)`` and
    ``S = [[s11, s12], [s21, s22]]`` acting as ``2*w'Sy``.  ``beta_c`` is
    beta(nu_c) when a plant-side detector exists, ``beta_p`` is beta(nu_p)
    when a controller-side detector exists; otherwise ``None``.
    """

    topology: Topology
    q_p: float
    q_c: float
    r_p: float
    r_c: float
    s11: float
    s12: float
    s21: float
    s22: float
    beta_c: float | None
    beta_p: float | None


def _require_deltas(topology: Topology, delta_p: float | None, delta_c: float | None) -> None:
    if topology.has_plant_detector:
        if delta_p is None:
            raise ValueError(f"{topology.value} requires delta_p")
    elif delta_p is not None:
        raise ValueError(f"{topology.value} has no plant-side detector; delta_p must be None")
    if topology.has_controller_detector:
        if delta_c is None:
            raise ValueError(f"{topology.value} requires delta_c")
    elif delta_c is not None:
        raise ValueError(f"{topology.value} has no controller-side detector; delta_c must be None")


def qsr_certificate(
    topology: Topology,
    plant: PassivityIndices,
    controller: PassivityIndices,
    delta_p: float | None = None,
    delta_c: float | None = None,
) -> QsrCertificate:
    """Build the QSR certificate for the given detector topology.

    ``S = [[1/2, nu_p], [-nu_c, 1/2]]`` in every topology.  ``Q`` and ``R``
    depend on where the holds sit:

    - plant side:      R = diag(-nu_p, -(nu_c - |nu_c|)),
                       Q = diag(-beta(nu_c), -(rho_c + nu_p - 1/4))
    - controller side: R = diag(-(nu_p - |nu_p|), -nu_c),
                       Q = diag(-(rho_p + nu_c - 1/4), -beta(nu_p))
    - both sides:      R = diag(-(nu_p - |nu_p|), -(nu_c - |nu_c|)),
                       Q = diag(-(beta(nu_c) - 1/4), -(beta(nu_p) - 1/4))
    """
    _require_deltas(topology, delta_p, delta_c)
    nu_p, rho_p = plant.nu, plant.rho
    nu_c, rho_c = controller.nu, controller.rho
    beta_c = beta_nu_c(plant, controller, delta_p) if delta_p is not None else None
    beta_p = beta_nu_p(plant, controller, delta_c) if delta_c is not None else None

    if topology is Topology.PLANT_SIDE:
        r_p, r_c = -nu_p, -(nu_c - abs(nu_c))
        q_p, q_c = -beta_c, -(rho_c + nu_p - 0.25)
    elif topology is Topology.CONTROLLER_SIDE:
        r_p, r_c = -(nu_p - abs(nu_p)), -nu_c
        q_p, q_c = -(rho_p + nu_c - 0.25), -beta_p
    else:
        r_p, r_c = -(nu_p - abs(nu_p)), -(nu_c - abs(nu_c))
        q_p, q_c = -(beta_c - 0.25), -(beta_p - 0.25)

    return QsrCertificate(
        topology=topology,
        q_p=q_p,
        q_c=q_c,
        r_p=r_p,
        r_c=r_c,
        s11=0.5,
        s12=nu_p,
        s21=-nu_c,
        s22=0.5,
        beta_c=beta_c,
        beta_p=beta_p,
    )


@dataclass(frozen=True)
class Condition:
    """One named scalar condition of a verdict, with its margin value."""

    name: str
    value: float
    satisfied: bool


@dataclass(frozen=True)
class StabilityReport:
    """L2-stability verdict derived from a QSR certificate."""

    certificate: QsrCertificate
    conditions: tuple[Condition, ...]

    @property
    def q_negative_definite(self) -> bool:
        return self.certificate.q_p < 0.0 and self.certificate.q_c < 0.0

    @property
    def stable(self) -> bool:
        return all(c.satisfied for c in self.conditions)


def l2_stable(certificate: QsrCertificate) -> StabilityReport:
    """Finite-gain L2 stability test: Q < 0, stated as named margins.

    Because Q is diagonal the test reduces to two strict positivity
    conditions whose values are reported so a caller can see how much
    margin each one has.
    """
    cert = certificate
    if cert.topology is Topology.PLANT_SIDE:
        conds = (
            Condition("beta(nu_c) > 0", cert.beta_c, cert.beta_c > 0.0),
            Condition("rho_c + nu_p - 1/4 > 0", -cert.q_c, -cert.q_c > 0.0),
        )
    elif cert.topology is Topology.CONTROLLER_SIDE:
        conds = (
            Condition("rho_p + nu_c - 1/4 > 0", -cert.q_p, -cert.q_p > 0.0),
            Condition("beta(nu_p) > 0", cert.beta_p, cert.beta_p > 0.0),
        )
    else:
        conds = (
            Condition("beta(nu_c) - 1/4 > 0", -cert.q_p, -cert.q_p > 0.0),
            Condition("beta(nu_p) - 1/4 > 0", -cert.q_c, -cert.q_c > 0.0),
        )
    return StabilityReport(certificate=cert, conditions=conds)


@dataclass(frozen=True)
class IndexBounds:
    """Admissible IF-OFP index budget ``(eps0, delta0)`` for a channel.

    ``eps_sup`` bounds the input index strictly from above.  ``delta_sup``
    bounds the output index, inclusively when ``delta_inclusive`` is true.
    ``eps0`` is the representative input index the delta bound was
    evaluated at (the bounds of the full interconnection depend on it).
    ``feasible`` means a pair with ``eps0 >= 0`` and ``delta0 >= 0`` is
    certifiable.
    """

    eps_sup: float
    delta_sup: float
    delta_inclusive: bool
    feasible: bool
    eps0: float


def _ratio(num: float, den: float) -> float:
    # num/den with the degenerate corners pinned: a vanishing numerator
    # costs nothing regardless of the denominator, anything else over a
    # non-positive denominator makes the bound empty.
    if den > 0.0:
        return num / den
    if num == 0.0:
        return 0.0
    return math.inf


def _default_eps0(eps_sup: float) -> float:
    # A representative admissible value strictly below the supremum.
    if eps_sup > 0.0:
        return 0.5 * eps_sup
    return 1.5 * eps_sup - 1e-9


def interconnection_index_bounds(
    topology: Topology,
    plant: PassivityIndices,
    controller: PassivityIndices,
    delta_p: float | None = None,
    delta_c: float | None = None,
    eps0: float | None = None,
) -> IndexBounds:
    """Index budget for the full map ``(w1, w2) -> (y_p, y_c)``.

    Both bounds are strict.  The ``delta_sup`` reported is evaluated at
    ``eps0`` (a representative value below ``eps_sup`` when not given);
    it shrinks as ``eps0`` grows toward ``eps_sup``.

    - plant side:      eps_sup = min(nu_p, nu_c - |nu_c|),
                       delta_sup = min(beta(nu_c) - nu_c^2/(nu_c - |nu_c| - eps0),
                                       rho_c + nu_p - 1/4 - nu_p^2/(nu_p - eps0))
    - controller side: roles of the indices swapped
    - both sides:      eps_sup = min(nu_c - |nu_c|, nu_p - |nu_p|),
                       delta_sup = min(beta(nu_c) - 1/4 - nu_c^2/(nu_c - |nu_c| - eps0),
                                       beta(nu_p) - 1/4 - nu_p^2/(nu_p - |nu_p| - eps0))
    """
    _require_deltas(topology, delta_p, delta_c)
    nu_p, nu_c = plant.nu, controller.nu

    if topology is Topology.PLANT_SIDE:
        eps_sup = min(nu_p, nu_c - abs(nu_c))
    elif topology is Topology.CONTROLLER_SIDE:
        eps_sup = min(nu_c, nu_p - abs(nu_p))
    else:
        eps_sup = min(nu_c - abs(nu_c), nu_p - abs(nu_p))

    if eps0 is None:
        eps0 = _default_eps0(eps_sup)
    elif not eps0 < eps_sup:
        raise ValueError(f"eps0 must be strictly below eps_sup={eps_sup}, got {eps0}")

    if topology is Topology.PLANT_SIDE:
        term_p = beta_nu_c(plant, controller, delta_p) - _ratio(nu_c * nu_c, nu_c - abs(nu_c) - eps0)
        term_c = (controller.rho + nu_p - 0.25) - _ratio(nu_p * nu_p, nu_p - eps0)
    elif topology is Topology.CONTROLLER_SIDE:
        term_p = beta_nu_p(plant, controller, delta_c) - _ratio(nu_p * nu_p, nu_p - abs(nu_p) - eps0)
        term_c = (plant.rho + nu_c - 0.25) - _ratio(nu_c * nu_c, nu_c - eps0)
    else:
        term_p = (
            beta_nu_c(plant, controller, delta_p)
            - 0.25
            - _ratio(nu_c * nu_c, nu_c - abs(nu_c) - eps0)
        )
        term_c = (
            beta_nu_p(plant, controller, delta_c)
            - 0.25
            - _ratio(nu_p * nu_p, nu_p - abs(nu_p) - eps0)
        )

    delta_sup = min(term_p, term_c)
    feasible = eps_sup > 0.0 and delta_sup >= 0.0
    return IndexBounds(
        eps_sup=eps_sup,
        delta_sup=delta_sup,
        delta_inclusive=False,
        feasible=feasible,
        eps0=eps0,
    )


def w1_yp_passive(
    topology: Topology,
    plant: PassivityIndices,
    controller: PassivityIndices,
    delta_p: float | None = None,
    delta_c: float | None = None,
) -> tuple[bool, tuple[Condition, ...]]:
    """Passivity of the ``w1 -> y_p`` channel when ``w2`` is identically zero.

    Returns the verdict and the named conditions behind it:

    - plant side:      beta(nu_c) >= 0,  nu_p > 0,    rho_c > 1/4
    - controller side: rho_c >= delta_c, nu_p == 0,   rho_p + nu_c >= 1/4
    - both sides:      beta(nu_p) >= 1/4, nu_p == 0,  beta(nu_c) >= 1/4

    The equality condition on ``nu_p`` is exact; the certified conditions
    do not tolerate a plant feedforward shortage or excess in those cases.
    """
    _require_deltas(topology, delta_p, delta_c)
    nu_p = plant.nu

    if topology is Topology.PLANT_SIDE:
        b = beta_nu_c(plant, controller, delta_p)
        conds = (
            Condition("beta(nu_c) >= 0", b, b >= 0.0),
            Condition("nu_p > 0", nu_p, nu_p > 0.0),
            Condition("rho_c > 1/4", controller.rho, controller.rho > 0.25),
        )
    elif topology is Topology.CONTROLLER_SIDE:
        conds = (
            Condition("rho_c >= delta_c", controller.rho - delta_c, controller.rho >= delta_c),
            Condition("nu_p == 0", nu_p, nu_p == 0.0),
            Condition(
                "rho_p + nu_c >= 1/4",
                plant.rho + controller.nu,
                plant.rho + controller.nu >= 0.25,
            ),
        )
    else:
        b_p = beta_nu_p(plant, controller, delta_c)
        b_c = beta_nu_c(plant, controller, delta_p)
        conds = (
            Condition("beta(nu_p) >= 1/4", b_p, b_p >= 0.25),
            Condition("nu_p == 0", nu_p, nu_p == 0.0),
            Condition("beta(nu_c) >= 1/4", b_c, b_c >= 0.25),
        )
    return all(c.satisfied for c in conds), conds


def w1_yp_index_bounds(
    topology: Topology,
    plant: PassivityIndices,
    controller: PassivityIndices,
    delta_p: float | None = None,
    delta_c: float | None = None,
) -> IndexBounds:
    """Index budget for the ``w1 -> y_p`` channel when ``w2`` is zero.

    The delta bound is inclusive here (``0 <= delta0 <= delta_sup``) and
    independent of the choice of ``eps0``:

    - plant side:      eps_sup = min(nu_p, nu_p*(rho_c - 1/4)/(rho_c + nu_p - 1/4)),
                       delta_sup = beta(nu_c)
    - controller side: eps_sup = min(nu_p, nu_p - |nu_p| - nu_p^2/beta(nu_p)),
                       delta_sup = rho_p + nu_c - 1/4
    - both sides:      eps_sup = 0 exactly (requires nu_p == 0),
                       delta_sup = beta(nu_c) - 1/4

    ``eps_sup == 0`` is admissible (the plain-passivity reading with
    ``eps0 = 0``), so feasibility only requires ``eps_sup >= 0`` and
    ``delta_sup >= 0`` plus the flank margin prerequisites.
    """
    _require_deltas(topology, delta_p, delta_c)
    nu_p = plant.nu

    if topology is Topology.PLANT_SIDE:
        den = controller.rho + nu_p - 0.25
        if den > 0.0:
            eps_sup = min(nu_p, nu_p * (controller.rho - 0.25) / den)
        elif nu_p == 0.0 and den == 0.0:
            eps_sup = 0.0
        else:
            eps_sup = -math.inf
        delta_sup = beta_nu_c(plant, controller, delta_p)
        feasible = eps_sup >= 0.0 and delta_sup >= 0.0
    elif topology is Topology.CONTROLLER_SIDE:
        b = beta_nu_p(plant, controller, delta_c)
        eps_sup = min(nu_p, nu_p - abs(nu_p) - _ratio(nu_p * nu_p, b))
        delta_sup = plant.rho + controller.nu - 0.25
        feasible = eps_sup >= 0.0 and delta_sup >= 0.0 and b >= 0.0
    else:
        b_p = beta_nu_p(plant, controller, delta_c)
        eps_sup = 0.0
        delta_sup = beta_nu_c(plant, controller, delta_p) - 0.25
        feasible = nu_p == 0.0 and b_p >= 0.25 and delta_sup >= 0.0

    eps0 = 0.0 if eps_sup <= 0.0 else 0.5 * eps_sup
    return IndexBounds(
        eps_sup=eps_sup,
        delta_sup=delta_sup,
        delta_inclusive=True,
        feasible=feasible,
        eps0=eps0,
    )


@dataclass(frozen=True)
class TriggerBudget:
    """Largest trigger levels that keep the L2-stability certificate valid.

    Each bound is a supremum: the stability conditions hold strictly for
    any level below it and fail at or above it (unless the bound clamps at
    the admissible ceiling 1).  ``None`` marks a detector the topology does
    not have.  When no admissible level exists the applicable bounds are
    reported as 0 and ``feasible`` is false.
    """

    delta_p_max: float | None
    delta_c_max: float | None
    feasible: bool


def _delta_sup_for_beta(rho_other: float, nu: float, threshold: float) -> tuple[float, float]:
    # Largest delta with _beta(rho_other, nu, delta) > threshold; _beta is
    # affine and strictly decreasing in delta on every branch.
    if nu > 0.0:
        bound = (rho_other - nu - threshold) / (1.0 + nu)
    elif nu < 0.0:
        bound = (rho_other + 2.0 * nu - threshold) / (1.0 - 3.0 * nu)
    else:
        bound = rho_other - threshold
    return min(max(bound, 0.0), 1.0), bound


def max_trigger_level(
    topology: Topology,
    plant: PassivityIndices,
    controller: PassivityIndices,
    margin: float = 0.0,
) -> TriggerBudget:
    """Invert the stability conditions for the largest admissible levels.

    ``margin`` demands that every stability condition hold with at least
    that slack, shrinking the returned bounds accordingly.
    """
    if margin < 0.0 or not math.isfinite(margin):
        raise ValueError(f"margin must be a finite non-negative real, got {margin}")

    if topology is Topology.PLANT_SIDE:
        delta_p_max, raw = _delta_sup_for_beta(plant.rho, controller.nu, margin)
        fixed_ok = controller.rho + plant.nu - 0.25 > margin
        return TriggerBudget(delta_p_max, None, feasible=raw > 0.0 and fixed_ok)
    if topology is Topology.CONTROLLER_SIDE:
        delta_c_max, raw = _delta_sup_for_beta(controller.rho, plant.nu, margin)
        fixed_ok = plant.rho + controller.nu - 0.25 > margin
        return TriggerBudget(None, delta_c_max, feasible=raw > 0.0 and fixed_ok)

    delta_p_max, raw_p = _delta_sup_for_beta(plant.rho, controller.nu, 0.25 + margin)
    delta_c_max, raw_c = _delta_sup_for_beta(controller.rho, plant.nu, 0.25 + margin)
    return TriggerBudget(delta_p_max, delta_c_max, feasible=raw_p > 0.0 and raw_c > 0.0)
