"""Time the compiled loop stepper against the pure-Python reference.

Runs the same closed-loop scenarios through both engines, reports the
best wall time of each, and verifies that the engines agree bit for bit
on every recorded signal.  Usage::

    python benchmarks/bench_loops.py [--duration 10.0] [--repeats 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from etpass.certificates import Topology
from etpass.eventsim import Scenario, compiled_available, simulate
from etpass.signals import Sinusoid, Step, Zero

TRACE_FIELDS = (
    "u_p", "u_c", "y_p", "y_c", "y_p_held", "y_c_held",
    "e_p", "e_c", "event_p", "event_c",
)


def scenarios(duration: float) -> dict[str, Scenario]:
    return {
        "plant-side linear pair": Scenario(
            topology=Topology.PLANT_SIDE,
            plant="ex2_plant",
            controller="ex2_controller",
            delta_p=0.5,
            delta_c=None,
            w1=Sinusoid(amplitude=1.0, angular_freq=7.853981633974483),
            w2=Zero(),
            dt=0.001,
            duration=duration,
        ),
        "both-sides nonlinear pair": Scenario(
            topology=Topology.BOTH_SIDES,
            plant="ex7_plant",
            controller="ex7_controller",
            delta_p=0.6,
            delta_c=0.7,
            w1=Step(level=1.0),
            w2=Zero(),
            dt=0.001,
            duration=duration,
        ),
    }


def best_time(scn: Scenario, engine: str, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        simulate(scn, engine=engine)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--duration", type=float, default=10.0)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if not compiled_available():
        print("compiled core is not available; nothing to compare")
        return 1

    steps = int(round(args.duration / 0.001))
    print(f"{steps} steps per run, best of {args.repeats}\n")
    print(f"{'scenario':<28} {'pure':>10} {'compiled':>10} {'speedup':>9}  agree")
    for label, scn in scenarios(args.duration).items():
        fast, _ = simulate(scn, engine="compiled")
        slow, _ = simulate(scn, engine="pure")
        agree = all(
            np.array_equal(getattr(fast, f), getattr(slow, f)) for f in TRACE_FIELDS
        )
        t_pure = best_time(scn, "pure", args.repeats)
        t_comp = best_time(scn, "compiled", args.repeats)
        print(
            f"{label:<28} {t_pure:>9.3f}s {t_comp:>9.4f}s {t_pure / t_comp:>8.1f}x"
            f"  {'bitwise' if agree else 'MISMATCH'}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
