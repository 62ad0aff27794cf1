"""Closed-loop simulation: triggering, holds, engines, and exports."""

from __future__ import annotations

import io

import numpy as np
import pytest

from etpass.certificates import Topology
from etpass.dynamics import ContinuousSystem
from etpass.eventsim import (
    CSV_HEADER,
    AlgebraicLoopError,
    EventLog,
    Scenario,
    comm_stats,
    compiled_available,
    detector_check,
    scenario_with,
    simulate,
    trace_to_csv,
    validate_scenario,
)
from etpass.signals import Constant, Sinusoid, Step, WhiteNoise, Zero

SCN_PLANT = Scenario(
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

SCN_BOTH = Scenario(
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


def _lag(name, rate=1.0, feedthrough=False):
    if feedthrough:
        out = lambda x, u, t: (x[0] + 0.5 * u[0],)
    else:
        out = lambda x, u, t: (x[0],)
    return ContinuousSystem(
        name=name,
        state_dim=1,
        input_dim=1,
        output_dim=1,
        deriv=lambda x, u, t: (-rate * x[0] + u[0],),
        output=out,
        has_feedthrough=feedthrough,
    )


def test_detector_strict_inequality():
    # e^2 == delta * y^2 exactly: no event
    assert not detector_check(1.0, 2.0, 0.25)
    assert detector_check(1.0000001, 2.0, 0.25)
    assert detector_check(1.0, 0.0, 0.5)
    assert not detector_check(0.0, 0.0, 0.5)


def test_scenario_grid_counts():
    assert SCN_PLANT.n_steps == 2000
    assert SCN_PLANT.n_samples == 2001


def test_validate_scenario_delta_placement():
    with pytest.raises(ValueError):
        validate_scenario(scenario_with(SCN_PLANT, delta_c=0.2))
    with pytest.raises(ValueError):
        validate_scenario(scenario_with(SCN_PLANT, delta_p=None))
    with pytest.raises(ValueError):
        validate_scenario(scenario_with(SCN_PLANT, delta_p=0.0))
    with pytest.raises(ValueError):
        validate_scenario(scenario_with(SCN_PLANT, delta_p=1.5))


def test_validate_scenario_initial_state_length():
    with pytest.raises(ValueError):
        validate_scenario(scenario_with(SCN_PLANT, x0_plant=(1.0,)))
    validate_scenario(scenario_with(SCN_PLANT, x0_plant=(1.0, 0.0)))


def test_validate_scenario_rejects_double_feedthrough():
    reg = {"a": _lag("a", feedthrough=True), "b": _lag("b", feedthrough=True)}
    scn = scenario_with(SCN_PLANT, plant="a", controller="b")
    with pytest.raises(AlgebraicLoopError):
        validate_scenario(scn, reg)


def test_zero_inputs_stay_at_rest():
    scn = scenario_with(SCN_PLANT, w1=Zero(), duration=0.5)
    trace, log = simulate(scn)
    assert np.all(trace.y_p == 0.0) and np.all(trace.y_c == 0.0)
    assert np.all(trace.u_p == 0.0) and np.all(trace.u_c == 0.0)
    # only the unconditional initial transmission fires
    assert trace.event_p[0] == 1
    assert trace.event_p[1:].sum() == 0
    assert len(log.plant_times) == 1 and log.plant_times[0] == 0.0


def test_recorded_rows_satisfy_trigger_bound():
    for scn in (SCN_PLANT, SCN_BOTH):
        trace, _ = simulate(scn)
        if trace.has_plant_detector:
            assert np.all(
                trace.e_p * trace.e_p <= scn.delta_p * (trace.y_p * trace.y_p)
            )
        if trace.has_controller_detector:
            assert np.all(
                trace.e_c * trace.e_c <= scn.delta_c * (trace.y_c * trace.y_c)
            )


def test_holds_update_only_on_events():
    trace, _ = simulate(SCN_PLANT)
    ev = trace.event_p.astype(bool)
    assert ev[0]
    # event rows copy the raw output into the hold, so the error is zero
    assert np.all(trace.y_p_held[ev] == trace.y_p[ev])
    assert np.all(trace.e_p[ev] == 0.0)
    # non-event rows carry the previous hold forward unchanged
    quiet = ~ev
    quiet[0] = False
    assert np.all(trace.y_p_held[quiet] == np.roll(trace.y_p_held, 1)[quiet])
    # the recorded error is exactly raw minus held
    assert np.all(trace.e_p == trace.y_p - trace.y_p_held)
    # no detector on the controller side: zero columns
    assert np.all(trace.y_c_held == 0.0) and np.all(trace.e_c == 0.0)


def test_wiring_uses_post_update_holds():
    trace, _ = simulate(SCN_PLANT)
    assert np.all(trace.u_p == trace.w1 - trace.y_c)
    assert np.all(trace.u_c == trace.w2 + trace.y_p_held)

    both, _ = simulate(SCN_BOTH)
    assert np.all(both.u_p == both.w1 - both.y_c_held)
    assert np.all(both.u_c == both.w2 + both.y_p_held)


def test_simulation_is_deterministic():
    a, _ = simulate(SCN_BOTH)
    b, _ = simulate(SCN_BOTH)
    for field in ("t", "w1", "w2", "u_p", "u_c", "y_p", "y_c",
                  "y_p_held", "y_c_held", "e_p", "e_c", "event_p", "event_c"):
        assert np.array_equal(getattr(a, field), getattr(b, field)), field


@pytest.mark.skipif(not compiled_available(), reason="compiled core not built")
def test_engines_agree_bit_for_bit():
    for scn in (SCN_PLANT, SCN_BOTH, scenario_with(SCN_PLANT, x0_plant=(0.3, -0.2))):
        fast, _ = simulate(scn, engine="compiled")
        slow, _ = simulate(scn, engine="pure")
        for field in ("u_p", "u_c", "y_p", "y_c", "y_p_held", "y_c_held",
                      "e_p", "e_c", "event_p", "event_c"):
            assert np.array_equal(getattr(fast, field), getattr(slow, field)), field


def test_engine_forcing_errors():
    reg = {"a": _lag("a"), "b": _lag("b", rate=2.0)}
    scn = scenario_with(SCN_PLANT, plant="a", controller="b", duration=0.1)
    with pytest.raises(RuntimeError):
        simulate(scn, registry=reg, engine="compiled")  # no kernels for custom models
    with pytest.raises(ValueError):
        simulate(SCN_PLANT, engine="fastest")


def test_vector_channel_loop():
    def vplant_deriv(x, u, t):
        return (-x[0] + u[0], -2.0 * x[1] + u[1])

    def vctrl_deriv(x, u, t):
        return (-3.0 * x[0] + u[0], -x[1] + 0.5 * u[1])

    reg = {
        "vplant": ContinuousSystem(
            name="vplant", state_dim=2, input_dim=2, output_dim=2,
            deriv=vplant_deriv, output=lambda x, u, t: (x[0], x[1]),
            has_feedthrough=False,
        ),
        "vctrl": ContinuousSystem(
            name="vctrl", state_dim=2, input_dim=2, output_dim=2,
            deriv=vctrl_deriv, output=lambda x, u, t: (0.5 * x[0], x[1]),
            has_feedthrough=False,
        ),
    }
    scn = Scenario(
        topology=Topology.PLANT_SIDE,
        plant="vplant",
        controller="vctrl",
        delta_p=0.4,
        delta_c=None,
        w1=Step(level=1.0),
        w2=Zero(),
        dt=0.001,
        duration=1.0,
    )
    trace, log = simulate(scn, registry=reg)
    assert trace.y_p.shape == (1001, 2)
    assert trace.event_p[0] == 1 and len(log.plant_times) >= 1
    err_sq = (trace.e_p * trace.e_p).sum(axis=1)
    out_sq = (trace.y_p * trace.y_p).sum(axis=1)
    assert np.all(err_sq <= scn.delta_p * out_sq)
    # scalar exogenous input broadcasts across both channels
    assert np.all(trace.u_p == trace.w1[:, None] - trace.y_c)


def test_divergence_returns_partial_trace():
    blow = ContinuousSystem(
        name="blow", state_dim=1, input_dim=1, output_dim=1,
        deriv=lambda x, u, t: (x[0] * x[0] + 1.0,),
        output=lambda x, u, t: (x[0],),
        has_feedthrough=False,
    )
    reg = {"blow": blow, "lag": _lag("lag")}
    scn = Scenario(
        topology=Topology.PLANT_SIDE,
        plant="blow",
        controller="lag",
        delta_p=1.0,
        delta_c=None,
        w1=Zero(),
        w2=Zero(),
        dt=0.001,
        duration=3.0,
    )
    trace, _ = simulate(scn, registry=reg)
    assert trace.diverged
    assert 0 < trace.n_samples < scn.n_samples
    assert np.all(np.isfinite(trace.y_p))
    # the escape happens near t = pi/2 for xdot = x^2 + 1 from rest
    assert 1.4 < trace.t[-1] < 1.7


def test_comm_stats_frozen_example():
    log = EventLog(plant_times=np.array([0.0, 0.5, 1.0]), controller_times=None)
    stats = comm_stats(log, n_samples=11, dt=0.1)
    assert stats.plant.count == 3
    assert stats.plant.ratio == pytest.approx(3.0 / 11.0, rel=0, abs=1e-15)
    assert stats.plant.events_per_second == pytest.approx(3.0)
    assert stats.plant.min_interval == 0.5
    assert stats.plant.mean_interval == 0.5
    assert stats.plant.max_interval == 0.5
    assert stats.controller is None
    assert stats.duration == pytest.approx(1.0)


def test_comm_stats_single_event_has_no_intervals():
    log = EventLog(plant_times=np.array([0.0]), controller_times=None)
    stats = comm_stats(log, n_samples=11, dt=0.1)
    assert stats.plant.count == 1
    assert stats.plant.min_interval is None


def test_event_log_intervals():
    log = EventLog(plant_times=np.array([0.0, 0.2, 0.7]), controller_times=None)
    assert np.allclose(log.intervals("plant"), [0.2, 0.5])
    with pytest.raises(ValueError):
        log.intervals("controller")


def test_csv_round_trip_preserves_bits():
    scn = scenario_with(SCN_PLANT, duration=0.5)
    trace, _ = simulate(scn)
    buf = io.StringIO()
    trace_to_csv(trace, buf)
    text = buf.getvalue()
    header, _, body = text.partition("\n")
    assert header == CSV_HEADER
    back = np.loadtxt(io.StringIO(body), delimiter=",")
    assert back.shape == (trace.n_samples, 13)
    cols = [trace.t, trace.w1, trace.w2, trace.u_p, trace.u_c, trace.y_p,
            trace.y_c, trace.y_p_held, trace.y_c_held, trace.e_p, trace.e_c]
    for j, col in enumerate(cols):
        assert np.array_equal(back[:, j], col), CSV_HEADER.split(",")[j]
    assert np.array_equal(back[:, 11], trace.event_p)
    assert np.array_equal(back[:, 12], trace.event_c)


def test_csv_rejects_vector_traces():
    trace, _ = simulate(scenario_with(SCN_PLANT, duration=0.1))
    fake = trace.__class__(**{**trace.__dict__, "y_p": np.zeros((3, 2))})
    with pytest.raises(ValueError):
        trace_to_csv(fake, io.StringIO())


def test_constant_disturbance_reaches_both_sides():
    scn = scenario_with(SCN_PLANT, w1=Zero(), w2=Constant(level=0.5), duration=1.0)
    trace, _ = simulate(scn)
    assert np.any(trace.y_c != 0.0)
    assert np.any(trace.y_p != 0.0)
