"""Pure-Python closed-loop steppers.

These are the reference engines for the event-triggered loop.  The scalar
stepper handles the common single-channel case and is mirrored operation
for operation by the compiled core; the vector stepper generalizes the
same procedure to multi-channel interconnections with Euclidean-norm
triggering and elementwise wiring (scalar exogenous inputs broadcast
across channels).

Per sample, in this order: raw outputs from the previous holds, detector
checks (strict inequality, unconditional transmission at t = 0), hold
updates, input wiring from the post-update holds, row recording, then an
RK4 advance under the held inputs.  Each stepper fills caller-allocated
arrays and returns ``(rows_filled, diverged)``; on divergence the filled
prefix is a valid partial trace.
"""

from __future__ import annotations

from math import isfinite

from .dynamics import ContinuousSystem, _rk4_tuple

TOPO_PLANT = 0
TOPO_CONTROLLER = 1
TOPO_BOTH = 2


def run_scalar_loop(
    plant: ContinuousSystem,
    controller: ContinuousSystem,
    code: int,
    x0p: tuple[float, ...],
    x0c: tuple[float, ...],
    w1,
    w2,
    dt: float,
    delta_p: float,
    delta_c: float,
    up_arr,
    uc_arr,
    yp_arr,
    yc_arr,
    yph_arr,
    ych_arr,
    ep_arr,
    ec_arr,
    evp_arr,
    evc_arr,
) -> tuple[int, bool]:
    n = len(w1)
    xp = x0p
    xc = x0c
    held_p = 0.0
    held_c = 0.0
    fp, hp = plant.deriv, plant.output
    fc, hc = controller.deriv, controller.output
    plant_ft = plant.has_feedthrough

    for k in range(n):
        t = k * dt
        w1k = w1[k]
        w2k = w2[k]

        if k == 0:
            # Initial transmission: holds equal the raw outputs, so the
            # wiring is direct and the feedthrough-free side goes first.
            if not plant_ft:
                yp = hp(xp, (0.0,), t)[0]
                yc = hc(xc, (w2k + yp,), t)[0]
            else:
                yc = hc(xc, (0.0,), t)[0]
                yp = hp(xp, (w1k - yc,), t)[0]
        elif code == TOPO_PLANT:
            yc = hc(xc, (w2k + held_p,), t)[0]
            yp = hp(xp, (w1k - yc,), t)[0]
        elif code == TOPO_CONTROLLER:
            yp = hp(xp, (w1k - held_c,), t)[0]
            yc = hc(xc, (w2k + yp,), t)[0]
        else:
            yp = hp(xp, (w1k - held_c,), t)[0]
            yc = hc(xc, (w2k + held_p,), t)[0]

        if not (isfinite(yp) and isfinite(yc)):
            return k, True

        evp = 0
        evc = 0
        if code != TOPO_CONTROLLER:
            if k == 0:
                held_p = yp
                evp = 1
            else:
                e = yp - held_p
                if e * e > delta_p * (yp * yp):
                    held_p = yp
                    evp = 1
        if code != TOPO_PLANT:
            if k == 0:
                held_c = yc
                evc = 1
            else:
                e = yc - held_c
                if e * e > delta_c * (yc * yc):
                    held_c = yc
                    evc = 1

        if code == TOPO_PLANT:
            up = w1k - yc
            uc = w2k + held_p
        elif code == TOPO_CONTROLLER:
            up = w1k - held_c
            uc = w2k + yp
        else:
            up = w1k - held_c
            uc = w2k + held_p

        up_arr[k] = up
        uc_arr[k] = uc
        yp_arr[k] = yp
        yc_arr[k] = yc
        yph_arr[k] = held_p
        ych_arr[k] = held_c
        ep_arr[k] = yp - held_p if code != TOPO_CONTROLLER else 0.0
        ec_arr[k] = yc - held_c if code != TOPO_PLANT else 0.0
        evp_arr[k] = evp
        evc_arr[k] = evc

        if k + 1 < n:
            xp = _rk4_tuple(fp, xp, (up,), t, dt)
            xc = _rk4_tuple(fc, xc, (uc,), t, dt)
            for v in xp:
                if not isfinite(v):
                    return k + 1, True
            for v in xc:
                if not isfinite(v):
                    return k + 1, True

    return n, False


def run_vector_loop(
    plant: ContinuousSystem,
    controller: ContinuousSystem,
    code: int,
    x0p: tuple[float, ...],
    x0c: tuple[float, ...],
    w1,
    w2,
    dt: float,
    delta_p: float,
    delta_c: float,
    up_arr,
    uc_arr,
    yp_arr,
    yc_arr,
    yph_arr,
    ych_arr,
    ep_arr,
    ec_arr,
    evp_arr,
    evc_arr,
) -> tuple[int, bool]:
    n = len(w1)
    m = plant.output_dim
    xp = x0p
    xc = x0c
    zeros = (0.0,) * m
    held_p = zeros
    held_c = zeros
    fp, hp = plant.deriv, plant.output
    fc, hc = controller.deriv, controller.output
    plant_ft = plant.has_feedthrough

    for k in range(n):
        t = k * dt
        w1k = w1[k]
        w2k = w2[k]

        if k == 0:
            if not plant_ft:
                yp = hp(xp, zeros, t)
                yc = hc(xc, tuple(w2k + v for v in yp), t)
            else:
                yc = hc(xc, zeros, t)
                yp = hp(xp, tuple(w1k - v for v in yc), t)
        elif code == TOPO_PLANT:
            yc = hc(xc, tuple(w2k + v for v in held_p), t)
            yp = hp(xp, tuple(w1k - v for v in yc), t)
        elif code == TOPO_CONTROLLER:
            yp = hp(xp, tuple(w1k - v for v in held_c), t)
            yc = hc(xc, tuple(w2k + v for v in yp), t)
        else:
            yp = hp(xp, tuple(w1k - v for v in held_c), t)
            yc = hc(xc, tuple(w2k + v for v in held_p), t)

        if not all(isfinite(v) for v in yp) or not all(isfinite(v) for v in yc):
            return k, True

        evp = 0
        evc = 0
        if code != TOPO_CONTROLLER:
            if k == 0:
                held_p = yp
                evp = 1
            else:
                e_sq = sum((a - b) * (a - b) for a, b in zip(yp, held_p))
                if e_sq > delta_p * sum(v * v for v in yp):
                    held_p = yp
                    evp = 1
        if code != TOPO_PLANT:
            if k == 0:
                held_c = yc
                evc = 1
            else:
                e_sq = sum((a - b) * (a - b) for a, b in zip(yc, held_c))
                if e_sq > delta_c * sum(v * v for v in yc):
                    held_c = yc
                    evc = 1

        if code == TOPO_PLANT:
            up = tuple(w1k - v for v in yc)
            uc = tuple(w2k + v for v in held_p)
        elif code == TOPO_CONTROLLER:
            up = tuple(w1k - v for v in held_c)
            uc = tuple(w2k + v for v in yp)
        else:
            up = tuple(w1k - v for v in held_c)
            uc = tuple(w2k + v for v in held_p)

        up_arr[k] = up
        uc_arr[k] = uc
        yp_arr[k] = yp
        yc_arr[k] = yc
        yph_arr[k] = held_p
        ych_arr[k] = held_c
        ep_arr[k] = tuple(a - b for a, b in zip(yp, held_p)) if code != TOPO_CONTROLLER else zeros
        ec_arr[k] = tuple(a - b for a, b in zip(yc, held_c)) if code != TOPO_PLANT else zeros
        evp_arr[k] = evp
        evc_arr[k] = evc

        if k + 1 < n:
            xp = _rk4_tuple(fp, xp, up, t, dt)
            xc = _rk4_tuple(fc, xc, uc, t, dt)
            for v in xp:
                if not isfinite(v):
                    return k + 1, True
            for v in xc:
                if not isfinite(v):
                    return k + 1, True

    return n, False
