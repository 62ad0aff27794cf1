# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled closed-loop stepper for the built-in scalar-channel models.

Mirrors ``_pyloop.run_scalar_loop`` operation for operation: same
evaluation order, same association of every floating-point expression, no
fused multiply-add (the build passes -ffp-contract=off), so both engines
produce bit-identical traces.  Models are addressed by the ``kernel_id``
assigned in the dynamics registry; the Python callables there remain the
reference definition and the id-to-equation mapping below must track them.
"""

from libc.math cimport isfinite

KERNEL_COUNT = 10

cdef int TOPO_PLANT = 0
cdef int TOPO_CONTROLLER = 1
cdef int TOPO_BOTH = 2


cdef void kderiv(int kid, double* x, double u, double t, double* dx) noexcept nogil:
    cdef double x1
    cdef double x2
    if kid == 0:
        x1 = x[0]; x2 = x[1]
        dx[0] = -3.0 * x1 * x1 * x1 + x1 * x2
        dx[1] = -0.8 * x2 + 2.0 * u
    elif kid == 1:
        dx[0] = -3.0 * x[0] + u
    elif kid == 2:
        x1 = x[0]; x2 = x[1]
        dx[0] = x2
        dx[1] = -0.5 * x1 * x1 * x1 - x2 + u
    elif kid == 3:
        x1 = x[0]; x2 = x[1]
        dx[0] = -2.0 * x1 - x2 + u
        dx[1] = -3.0 * x1 - 5.0 * x2 + 2.0 * u
    elif kid == 4:
        x1 = x[0]; x2 = x[1]
        dx[0] = -3.0 * x1 * x1 * x1 + x1 * x2
        dx[1] = 0.2 * x2 + 2.0 * u
    elif kid == 5:
        dx[0] = -x[0] + u
    elif kid == 6:
        dx[0] = -x[0] + u
    elif kid == 7:
        x1 = x[0]; x2 = x[1]
        dx[0] = x2
        dx[1] = -0.6 * x1 * x1 * x1 - 0.9 * x2 + u
    elif kid == 8:
        x1 = x[0]; x2 = x[1]
        dx[0] = x2
        dx[1] = -x1 - x2 * x2 * x2 + u
    elif kid == 9:
        dx[0] = x[1]
        dx[1] = -2.0 * x[0] - 2.0 * x[1] + u


cdef double kout(int kid, double* x, double u, double t) noexcept nogil:
    if kid == 0:
        return x[1]
    elif kid == 1:
        return 7.0 * x[0] + u
    elif kid == 2:
        return x[1]
    elif kid == 3:
        return x[0] + x[1] + u
    elif kid == 4:
        return x[1]
    elif kid == 5:
        return x[0] - 0.25 * u
    elif kid == 6:
        return -0.5 * x[0] + 1.0
    elif kid == 7:
        return x[1]
    elif kid == 8:
        return x[1]
    elif kid == 9:
        return x[0] + 2.0 * x[1] + 0.05 * u
    return 0.0


cdef void rk4(int kid, int dim, double* x, double u, double t, double dt, double* xn) noexcept nogil:
    cdef double k1[2]
    cdef double k2[2]
    cdef double k3[2]
    cdef double k4[2]
    cdef double xs[2]
    cdef double h2 = 0.5 * dt
    cdef int i
    kderiv(kid, x, u, t, k1)
    for i in range(dim):
        xs[i] = x[i] + h2 * k1[i]
    kderiv(kid, xs, u, t + h2, k2)
    for i in range(dim):
        xs[i] = x[i] + h2 * k2[i]
    kderiv(kid, xs, u, t + h2, k3)
    for i in range(dim):
        xs[i] = x[i] + dt * k3[i]
    kderiv(kid, xs, u, t + dt, k4)
    for i in range(dim):
        xn[i] = x[i] + dt * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]) / 6.0


def run_scalar_loop(int plant_kid, int plant_dim, bint plant_ft,
                    int ctrl_kid, int ctrl_dim,
                    int code,
                    double[::1] x0p, double[::1] x0c,
                    double[::1] w1, double[::1] w2,
                    double dt, double delta_p, double delta_c,
                    double[::1] up_arr, double[::1] uc_arr,
                    double[::1] yp_arr, double[::1] yc_arr,
                    double[::1] yph_arr, double[::1] ych_arr,
                    double[::1] ep_arr, double[::1] ec_arr,
                    unsigned char[::1] evp_arr, unsigned char[::1] evc_arr):
    """Fill the caller's arrays; return ``(rows_filled, diverged)``."""
    cdef Py_ssize_t n = w1.shape[0]
    cdef Py_ssize_t k
    cdef int i
    cdef int diverged = 0
    cdef Py_ssize_t rows = 0
    cdef double xp[2]
    cdef double xc[2]
    cdef double xn[2]
    cdef double held_p = 0.0
    cdef double held_c = 0.0
    cdef double t, w1k, w2k, yp, yc, e, up, uc
    cdef int evp, evc

    for i in range(plant_dim):
        xp[i] = x0p[i]
    for i in range(ctrl_dim):
        xc[i] = x0c[i]

    with nogil:
        for k in range(n):
            t = k * dt
            w1k = w1[k]
            w2k = w2[k]

            if k == 0:
                if not plant_ft:
                    yp = kout(plant_kid, xp, 0.0, t)
                    yc = kout(ctrl_kid, xc, w2k + yp, t)
                else:
                    yc = kout(ctrl_kid, xc, 0.0, t)
                    yp = kout(plant_kid, xp, w1k - yc, t)
            elif code == TOPO_PLANT:
                yc = kout(ctrl_kid, xc, w2k + held_p, t)
                yp = kout(plant_kid, xp, w1k - yc, t)
            elif code == TOPO_CONTROLLER:
                yp = kout(plant_kid, xp, w1k - held_c, t)
                yc = kout(ctrl_kid, xc, w2k + yp, t)
            else:
                yp = kout(plant_kid, xp, w1k - held_c, t)
                yc = kout(ctrl_kid, xc, w2k + held_p, t)

            if not (isfinite(yp) and isfinite(yc)):
                rows = k
                diverged = 1
                break

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
            evp_arr[k] = <unsigned char> evp
            evc_arr[k] = <unsigned char> evc
            rows = k + 1

            if k + 1 < n:
                rk4(plant_kid, plant_dim, xp, up, t, dt, xn)
                for i in range(plant_dim):
                    xp[i] = xn[i]
                rk4(ctrl_kid, ctrl_dim, xc, uc, t, dt, xn)
                for i in range(ctrl_dim):
                    xc[i] = xn[i]
                for i in range(plant_dim):
                    if not isfinite(xp[i]):
                        diverged = 1
                        break
                if not diverged:
                    for i in range(ctrl_dim):
                        if not isfinite(xc[i]):
                            diverged = 1
                            break
                if diverged:
                    break

    return rows, bool(diverged)


def kernel_deriv_py(int kid, x, u, double t=0.0):
    """Debug access to a kernel derivative (for parity tests)."""
    cdef double xv[2]
    cdef double dx[2]
    cdef int dim = len(x)
    cdef int i
    if not 1 <= dim <= 2:
        raise ValueError("kernel states have one or two components")
    for i in range(dim):
        xv[i] = x[i]
    kderiv(kid, xv, u[0], t, dx)
    return tuple(dx[i] for i in range(dim))


def kernel_output_py(int kid, x, u, double t=0.0):
    """Debug access to a kernel output map (for parity tests)."""
    cdef double xv[2]
    cdef int dim = len(x)
    cdef int i
    for i in range(dim):
        xv[i] = x[i]
    return (kout(kid, xv, u[0], t),)
