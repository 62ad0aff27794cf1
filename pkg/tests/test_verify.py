"""Supply-rate integration, the proof-step oracle, and falsification teeth."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from etpass.certificates import PassivityIndices, Topology, qsr_certificate
from etpass.eventsim import Scenario, Trace, scenario_with, simulate
from etpass.signals import Sinusoid, Step, WhiteNoise, Zero
from etpass.verify import (
    SupplySeries,
    _bounded_errors,
    _expanded_supply,
    _qsr_form,
    certificate_margin_series,
    check_dissipation,
    ifofp_supply_series,
    io_passivity_series,
    l2_gain_estimate,
    proof_step_oracle,
    qsr_supply_series,
    subsystem_ifofp_series,
)

EX2_P = PassivityIndices(0.0, 1.0)
EX2_C = PassivityIndices(0.3, 0.5)

SCN_DET = Scenario(
    topology=Topology.PLANT_SIDE,
    plant="ex2_plant",
    controller="ex2_controller",
    delta_p=0.3,
    delta_c=None,
    w1=Sinusoid(amplitude=1.0, angular_freq=7.853981633974483),
    w2=Zero(),
    dt=0.001,
    duration=2.0,
)


def _blank_trace(t, **cols):
    zeros = np.zeros_like(t)
    fields = dict(
        topology=Topology.PLANT_SIDE,
        dt=float(t[1] - t[0]),
        t=t,
        w1=zeros,
        w2=zeros,
        u_p=zeros,
        u_c=zeros,
        y_p=zeros,
        y_c=zeros,
        y_p_held=zeros,
        y_c_held=zeros,
        e_p=zeros,
        e_c=zeros,
        event_p=np.zeros(len(t), dtype=np.uint8),
        event_c=np.zeros(len(t), dtype=np.uint8),
        diverged=False,
    )
    fields.update(cols)
    return Trace(**fields)


def test_cumulative_integral_of_constant_rate():
    t = np.linspace(0.0, 3.0, 301)
    series = ifofp_supply_series(t, np.ones_like(t), np.ones_like(t), 0.0, 0.0)
    # omega = u*y = 1, so the running integral is t itself
    assert np.allclose(series.cumulative, t, rtol=0, atol=1e-12)
    assert series.cumulative[0] == 0.0


def test_check_dissipation_locates_first_crossing():
    t = np.array([0.0, 1.0, 2.0, 3.0])
    omega = np.array([0.0, 0.0, -2.0, 0.0])
    series = SupplySeries("toy", t, omega, np.array([0.0, 0.0, -1.0, -2.0]))
    report = check_dissipation(series)
    assert not report.passed
    assert report.min_cumulative == -2.0
    assert report.first_violation_time == 2.0

    # tolerance is inclusive at the boundary
    assert not check_dissipation(series, tolerance=1.5).passed
    assert check_dissipation(series, tolerance=2.0).passed
    with pytest.raises(ValueError):
        check_dissipation(series, tolerance=-1.0)


def test_io_series_reduces_to_channel_inner_product():
    trace, _ = simulate(scenario_with(SCN_DET, duration=1.0))
    series = io_passivity_series(trace, 0.0, 0.0)
    plain = ifofp_supply_series(trace.t, trace.w1, trace.y_p, 0.0, 0.0)
    assert np.array_equal(series.omega, plain.omega)


def test_io_series_requires_zero_disturbance():
    trace, _ = simulate(
        scenario_with(SCN_DET, w2=WhiteNoise(power=1e-4, seed=3), duration=0.2)
    )
    with pytest.raises(ValueError):
        io_passivity_series(trace, 0.0, 0.1)


def test_subsystem_series_selects_ports():
    trace, _ = simulate(scenario_with(SCN_DET, duration=0.3))
    sp = subsystem_ifofp_series(trace, "plant", EX2_P)
    manual = trace.u_p * trace.y_p - 1.0 * trace.y_p * trace.y_p
    assert np.allclose(sp.omega, manual, rtol=0, atol=1e-15)
    with pytest.raises(ValueError):
        subsystem_ifofp_series(trace, "network", EX2_P)


def _wired_supply(topology, p, c, w1, w2, yp, yc, ep, ec):
    # Substitute the hold errors into the wiring and add both subsystem
    # IF-OFP supplies directly; the expanded form must agree identically.
    if topology is Topology.PLANT_SIDE:
        up = w1 - yc
        uc = w2 + (yp - ep)
    elif topology is Topology.CONTROLLER_SIDE:
        up = w1 - (yc - ec)
        uc = w2 + yp
    else:
        up = w1 - (yc - ec)
        uc = w2 + (yp - ep)
    sp = up * yp - p.nu * up * up - p.rho * yp * yp
    sc = uc * yc - c.nu * uc * uc - c.rho * yc * yc
    return sp + sc


def test_expanded_supply_matches_wiring_substitution():
    rng = np.random.default_rng(2026)
    p = PassivityIndices(-0.4, 1.3)
    c = PassivityIndices(0.7, -0.2)
    w1, w2, yp, yc, ep, ec = rng.standard_normal((6, 4000))
    for topology in Topology:
        ep_t = ep if topology.has_plant_detector else np.zeros_like(ep)
        ec_t = ec if topology.has_controller_detector else np.zeros_like(ec)
        expanded = _expanded_supply(topology, p, c, w1, w2, yp, yc, ep_t, ec_t)
        wired = _wired_supply(topology, p, c, w1, w2, yp, yc, ep_t, ec_t)
        assert np.allclose(expanded, wired, rtol=1e-12, atol=1e-12), topology


def test_oracle_passes_on_certified_index_sets():
    cases = [
        (Topology.PLANT_SIDE, EX2_P, EX2_C, 0.5, None),
        (Topology.CONTROLLER_SIDE, PassivityIndices(0.0, -0.2), PassivityIndices(1.0, 0.3), None, 0.2),
        (Topology.BOTH_SIDES, PassivityIndices(0.02, 0.8), PassivityIndices(0.5, 1.0), 0.02, 0.7),
    ]
    for topology, p, c, dp, dc in cases:
        report = proof_step_oracle(topology, p, c, delta_p=dp, delta_c=dc, samples=50_000)
        assert report.passed, (topology, report.worst_margin)
        assert report.samples == 50_000
        assert report.worst_margin >= -1e-9


def test_oracle_machinery_detects_tampered_certificate():
    # Claiming extra output dissipation must produce visible violations.
    cert = qsr_certificate(Topology.PLANT_SIDE, EX2_P, EX2_C, delta_p=0.5)
    tampered = replace(cert, q_p=cert.q_p - 0.5)
    rng = np.random.default_rng(99)
    w1, w2, yp, yc = rng.standard_normal((4, 50_000))
    ep = _bounded_errors(rng, yp, 0.5, 0.1)
    expanded = _expanded_supply(
        Topology.PLANT_SIDE, EX2_P, EX2_C, w1, w2, yp, yc, ep, np.zeros_like(yp)
    )
    honest = _qsr_form(cert, w1, w2, yp, yc) - expanded
    forged = _qsr_form(tampered, w1, w2, yp, yc) - expanded
    assert honest.min() >= -1e-9
    assert forged.min() < -1e-3
    assert (forged < -1e-9).sum() > 100


def test_certificate_margins_nonnegative_along_traces():
    scn_noisy = scenario_with(SCN_DET, delta_p=0.5, w2=WhiteNoise(power=1e-4, seed=102))
    both = Scenario(
        topology=Topology.BOTH_SIDES,
        plant="ex7_plant",
        controller="ex7_controller",
        delta_p=0.6,
        delta_c=0.7,
        w1=Step(level=1.0),
        w2=WhiteNoise(power=0.02, seed=107),
        dt=0.001,
        duration=2.0,
    )
    for scn, p, c in (
        (scn_noisy, EX2_P, EX2_C),
        (both, PassivityIndices(0.0, 0.9), PassivityIndices(0.0, 1.0)),
    ):
        trace, _ = simulate(scn)
        cert = qsr_certificate(scn.topology, p, c, delta_p=scn.delta_p, delta_c=scn.delta_c)
        margins = certificate_margin_series(trace, cert, p, c)
        assert margins.min() >= -1e-9


def test_qsr_check_stable_under_grid_refinement():
    cert = qsr_certificate(Topology.PLANT_SIDE, EX2_P, EX2_C, delta_p=0.3)
    for dt in (0.001, 0.0005):
        trace, _ = simulate(scenario_with(SCN_DET, dt=dt, duration=2.0))
        report = check_dissipation(qsr_supply_series(trace, cert))
        assert report.passed, dt


def test_qsr_series_rejects_topology_mismatch():
    trace, _ = simulate(scenario_with(SCN_DET, duration=0.1))
    cert = qsr_certificate(Topology.CONTROLLER_SIDE, EX2_P, EX2_C, delta_c=0.3)
    with pytest.raises(ValueError):
        qsr_supply_series(trace, cert)


def test_l2_gain_estimate_identity_and_zero_input():
    t = np.arange(0, 200) * 0.01
    sig = np.sin(t)
    trace = _blank_trace(t, w1=sig, y_p=sig.copy())
    assert l2_gain_estimate(trace) == pytest.approx(1.0, abs=1e-12)
    silent = _blank_trace(t)
    with pytest.raises(ValueError):
        l2_gain_estimate(silent)
