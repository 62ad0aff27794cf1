"""Acceptance gate: one check per release criterion, one summary line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines on a passing run; without ``-s`` they still appear in the captured
output of any failing test.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from etpass.certificates import (
    PassivityIndices,
    Topology,
    l2_stable,
    qsr_certificate,
    w1_yp_passive,
)
from etpass.config import fixture_path, load_config
from etpass.dynamics import ContinuousSystem, get_model, integrate_open_loop, rk4_step
from etpass.eventsim import comm_stats, scenario_with, simulate
from etpass.signals import Zero
from etpass.verify import (
    check_dissipation,
    ifofp_supply_series,
    io_passivity_series,
    proof_step_oracle,
    qsr_supply_series,
)

EX1 = (PassivityIndices(0.0, 0.4), PassivityIndices(0.0, 1.8))
EX2 = (PassivityIndices(0.0, 1.0), PassivityIndices(0.3, 0.5))
EX4 = (PassivityIndices(0.0, -0.2), PassivityIndices(1.0, 0.3))
EX5 = (PassivityIndices(-0.37, 2.0), PassivityIndices(0.5, 1.0))
EX7 = (PassivityIndices(0.0, 0.9), PassivityIndices(0.0, 1.0))
EX8 = (PassivityIndices(0.02, 0.8), PassivityIndices(0.5, 1.0))


def _announce(num: int, label: str, ok: bool) -> None:
    print(f"ACCEPTANCE {num} {label}: {'PASS' if ok else 'FAIL'}")


def _exact(value):
    return pytest.approx(value, abs=1e-12, rel=0)


def test_acceptance_1_certificate_reproduction():
    checks = []

    cert1 = qsr_certificate(Topology.PLANT_SIDE, *EX1, delta_p=0.3)
    checks.append(cert1.beta_c == _exact(0.1))
    checks.append(-cert1.q_c == _exact(1.55))
    checks.append(l2_stable(cert1).stable)

    cert2 = qsr_certificate(Topology.PLANT_SIDE, *EX2, delta_p=0.5)
    checks.append(cert2.beta_c == _exact(0.05))
    checks.append(cert2.q_c == _exact(-0.25))

    cert4 = qsr_certificate(Topology.CONTROLLER_SIDE, *EX4, delta_c=0.2)
    checks.append(-cert4.q_p == _exact(0.55))
    checks.append(cert4.beta_p == _exact(0.1))

    cert5 = qsr_certificate(Topology.CONTROLLER_SIDE, *EX5, delta_c=0.1)
    checks.append(cert5.beta_p == _exact(0.049))

    cert7 = qsr_certificate(Topology.BOTH_SIDES, *EX7, delta_p=0.6, delta_c=0.7)
    checks.append(-cert7.q_p == _exact(0.05))
    checks.append(-cert7.q_c == _exact(0.05))

    cert8 = qsr_certificate(Topology.BOTH_SIDES, *EX8, delta_p=0.02, delta_c=0.7)
    checks.append(-cert8.q_c == _exact(0.016))
    checks.append(-cert8.q_p == _exact(0.02))

    ok = all(checks)
    _announce(1, "certificate reproduction at 1e-12", ok)
    assert ok, checks


def test_acceptance_2_channel_verdicts():
    ctrl_side, _ = w1_yp_passive(Topology.CONTROLLER_SIDE, *EX4, delta_c=0.2)
    plant_side, conds = w1_yp_passive(Topology.PLANT_SIDE, *EX2, delta_p=0.5)
    failed = [c.name for c in conds if not c.satisfied]
    ok = ctrl_side is True and plant_side is False and failed == ["nu_p > 0"]
    _announce(2, "channel passivity condition tables", ok)
    assert ok


def test_acceptance_3_proof_step_oracle():
    start = time.perf_counter()
    reports = [
        proof_step_oracle(Topology.PLANT_SIDE, *EX2, delta_p=0.5, samples=1_000_000),
        proof_step_oracle(Topology.CONTROLLER_SIDE, *EX4, delta_c=0.2, samples=1_000_000),
        proof_step_oracle(
            Topology.BOTH_SIDES, *EX8, delta_p=0.02, delta_c=0.7, samples=1_000_000
        ),
    ]
    elapsed = time.perf_counter() - start
    ok = all(r.passed and r.worst_margin >= -1e-9 for r in reports) and elapsed < 30.0
    _announce(3, f"proof-step oracle 3x1e6 samples in {elapsed:.1f}s", ok)
    assert ok, [(r.name, r.worst_margin) for r in reports]


def test_acceptance_4_trajectory_dissipation():
    start = time.perf_counter()

    cfg2 = load_config(fixture_path("ex2"))
    scn2 = scenario_with(cfg2.scenario, w2=Zero())
    trace2, _ = simulate(scn2)
    cert2 = qsr_certificate(Topology.PLANT_SIDE, *EX2, delta_p=scn2.delta_p)
    qsr = check_dissipation(qsr_supply_series(trace2, cert2), 1e-6)

    cfg3 = load_config(fixture_path("ex3"))
    trace3, _ = simulate(cfg3.scenario)
    chan = check_dissipation(io_passivity_series(trace3, 0.0, 0.3), 1e-6)

    elapsed = time.perf_counter() - start
    ok = qsr.passed and chan.passed and elapsed < 1.0
    _announce(4, f"trajectory dissipation (QSR + channel) in {elapsed:.2f}s", ok)
    assert ok, (qsr, chan, elapsed)


def test_acceptance_5_step_reference_channel_integral():
    start = time.perf_counter()
    cfg = load_config(fixture_path("ex6"))
    trace, _ = simulate(cfg.scenario)
    report = check_dissipation(io_passivity_series(trace, 0.0, 0.0), 1e-6)
    elapsed = time.perf_counter() - start
    ok = report.passed and elapsed < 1.0
    _announce(5, f"step-reference channel integral in {elapsed:.2f}s", ok)
    assert ok, (report, elapsed)


def test_acceptance_6_conservative_output_budget():
    cfg = load_config(fixture_path("ex9"))
    assert cfg.delta0 == 0.10  # conservative derived bound, not the looser print
    trace, _ = simulate(cfg.scenario)
    report = check_dissipation(io_passivity_series(trace, 0.0, cfg.delta0), 1e-6)
    ok = report.passed
    _announce(6, "channel integral at conservative delta0=0.10", ok)
    assert ok, report


def test_acceptance_7_communication_savings():
    base = load_config(fixture_path("ex3")).scenario
    grid = [round(0.1 * k, 10) for k in range(1, 10)]
    ratios = {}
    diverged = []
    for delta in grid:
        trace, log = simulate(scenario_with(base, delta_p=delta))
        stats = comm_stats(log, trace.n_samples, trace.dt)
        ratios[delta] = stats.plant.ratio
        diverged.append(trace.diverged)
    ok = (
        not any(diverged)
        and ratios[0.8] <= ratios[0.1]
        and all(r < 1.0 for r in ratios.values())
    )
    _announce(7, "event ratio shrinks with the trigger level", ok)
    assert ok, ratios


def test_acceptance_8_integrator_and_realization():
    decay = ContinuousSystem(
        name="decay", state_dim=1, input_dim=1, output_dim=1,
        deriv=lambda x, u, t: (-x[0],), output=lambda x, u, t: (x[0],),
        has_feedthrough=False,
    )

    def err(dt):
        x = (1.0,)
        for k in range(int(round(1.0 / dt))):
            x = rk4_step(decay, x, (0.0,), k * dt, dt)
        return abs(x[0] - np.exp(-1.0))

    errors = [err(dt) for dt in (0.1, 0.05, 0.025, 0.0125)]
    factors = [a / b for a, b in zip(errors, errors[1:])]
    order_ok = all(12.0 <= f <= 20.0 for f in factors)

    ts, us, ys = integrate_open_loop(get_model("ex8_plant"), (0.0, 0.0), lambda t: 1.0, 1e-3, 15.0)
    gain_ok = abs(ys[-1] - 0.55) <= 1e-6
    feedthrough_ok = abs(ys[0] - 0.05) <= 1e-9

    ok = order_ok and gain_ok and feedthrough_ok
    _announce(8, "RK4 order and transfer-function realization", ok)
    assert ok, (factors, ys[0], ys[-1])


def test_acceptance_9_index_falsification_teeth():
    ts, us, ys = integrate_open_loop(get_model("ex2_plant"), (0.0, 0.0), lambda t: 1.0, 1e-3, 10.0)
    honest = check_dissipation(ifofp_supply_series(ts, us, ys, 0.0, 1.0), 1e-6)
    inflated = check_dissipation(ifofp_supply_series(ts, us, ys, 0.0, 10.0), 1e-6)
    ok = honest.passed and not inflated.passed
    _announce(9, "subsystem index residual has teeth", ok)
    assert ok, (honest, inflated)
