# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled simulation kernels.

Operation-for-operation mirror of ``pyref.py`` (the documented reference
backend); the two produce bit-identical IEEE-double results, which the test
suite asserts.  Any change here must be applied to pyref.py as well.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

# Keep in sync with pyref.CLAMP_FLOOR / CLAMP_DIFFUSION.
CLAMP_FLOOR = 2e-6
CLAMP_DIFFUSION = 64.0


cdef inline double _threshold(double kappa, double eta, double dt) nogil:
    cdef double scaled = 64.0 * kappa * eta * dt
    return scaled if scaled > 2e-6 else 2e-6


def clamp_threshold(double kappa, double eta, double dt):
    """Allowed ||r|| - 1 overshoot before a step is declared non-physical."""
    return _threshold(kappa, eta, dt)


def sim_block(r0, axes, dw, double kappa, double eta, double phi, g, noise, double dt):
    """See ``pyref.sim_block``."""
    cdef const double[:, ::1] ax_v = np.ascontiguousarray(axes, dtype=np.float64)
    cdef const double[::1] dw_v = np.ascontiguousarray(dw, dtype=np.float64)
    cdef Py_ssize_t m_steps = ax_v.shape[0]
    cdef double gx = g[0], gy = g[1], gz = g[2]
    cdef double ax = noise[0], ay = noise[1], az = noise[2], bz = noise[3]
    cdef double s2k = sqrt(2.0 * kappa)
    cdef double s4e = sqrt(4.0 * eta)
    cdef double c1 = sqrt(2.0 * kappa * eta)
    cdef double rmax = 1.0 + _threshold(kappa, eta, dt)
    cdef double rmax2 = rmax * rmax

    dy_arr = np.empty(m_steps)
    states_arr = np.empty((m_steps, 3))
    cdef double[::1] dy = dy_arr
    cdef double[:, ::1] states = states_arr
    cdef double rx = r0[0], ry = r0[1], rz = r0[2]
    cdef double nx, ny, nz, w, nr, mk, s, rx1, ry1, rz1, n2, norm
    cdef Py_ssize_t i
    cdef Py_ssize_t bad = -1

    with nogil:
        for i in range(m_steps):
            nx = ax_v[i, 0]
            ny = ax_v[i, 1]
            nz = ax_v[i, 2]
            w = dw_v[i]
            nr = nx * rx + ny * ry + nz * rz
            mk = s2k * nr
            dy[i] = 0.5 * mk * dt + w / s4e
            s = c1 * w
            rx1 = rx + (2.0 * phi * (gy * rz - gz * ry) + kappa * (nr * nx - rx) - ax * rx) * dt + (nx - nr * rx) * s
            ry1 = ry + (2.0 * phi * (gz * rx - gx * rz) + kappa * (nr * ny - ry) - ay * ry) * dt + (ny - nr * ry) * s
            rz1 = rz + (2.0 * phi * (gx * ry - gy * rx) + kappa * (nr * nz - rz) - az * rz + bz) * dt + (nz - nr * rz) * s
            n2 = rx1 * rx1 + ry1 * ry1 + rz1 * rz1
            if n2 > 1.0:
                if n2 > rmax2:
                    bad = i
                    break
                norm = sqrt(n2)
                rx1 /= norm
                ry1 /= norm
                rz1 /= norm
            rx = rx1
            ry = ry1
            rz = rz1
            states[i, 0] = rx
            states[i, 1] = ry
            states[i, 2] = rz

    return dy_arr, states_arr, bad


def sim_block_tracking(r0, dw, double kappa, double eta, double phi, g, noise, double dt):
    """See ``pyref.sim_block_tracking``."""
    cdef const double[::1] dw_v = np.ascontiguousarray(dw, dtype=np.float64)
    cdef Py_ssize_t m_steps = dw_v.shape[0]
    cdef double gx = g[0], gy = g[1], gz = g[2]
    cdef double ax = noise[0], ay = noise[1], az = noise[2], bz = noise[3]
    cdef double s2k = sqrt(2.0 * kappa)
    cdef double s4e = sqrt(4.0 * eta)
    cdef double c1 = sqrt(2.0 * kappa * eta)
    cdef double rmax = 1.0 + _threshold(kappa, eta, dt)
    cdef double rmax2 = rmax * rmax

    dy_arr = np.empty(m_steps)
    axes_arr = np.empty((m_steps, 3))
    states_arr = np.empty((m_steps, 3))
    flags_arr = np.zeros(m_steps, dtype=np.uint8)
    cdef double[::1] dy = dy_arr
    cdef double[:, ::1] axes = axes_arr
    cdef double[:, ::1] states = states_arr
    cdef unsigned char[::1] flags = flags_arr
    cdef double rx = r0[0], ry = r0[1], rz = r0[2]
    cdef double cx, cy, cz, c2, cn, nx, ny, nz, w, nr, mk, s
    cdef double rx1, ry1, rz1, n2, norm
    cdef Py_ssize_t i
    cdef Py_ssize_t bad = -1

    with nogil:
        for i in range(m_steps):
            cx = gy * rz - gz * ry
            cy = gz * rx - gx * rz
            cz = gx * ry - gy * rx
            c2 = cx * cx + cy * cy + cz * cz
            if c2 >= 1e-12:
                cn = sqrt(c2)
                nx = cx / cn
                ny = cy / cn
                nz = cz / cn
            else:
                nx = 0.0
                ny = 0.0
                nz = 1.0
                flags[i] = 1
            axes[i, 0] = nx
            axes[i, 1] = ny
            axes[i, 2] = nz
            w = dw_v[i]
            nr = nx * rx + ny * ry + nz * rz
            mk = s2k * nr
            dy[i] = 0.5 * mk * dt + w / s4e
            s = c1 * w
            rx1 = rx + (2.0 * phi * (gy * rz - gz * ry) + kappa * (nr * nx - rx) - ax * rx) * dt + (nx - nr * rx) * s
            ry1 = ry + (2.0 * phi * (gz * rx - gx * rz) + kappa * (nr * ny - ry) - ay * ry) * dt + (ny - nr * ry) * s
            rz1 = rz + (2.0 * phi * (gx * ry - gy * rx) + kappa * (nr * nz - rz) - az * rz + bz) * dt + (nz - nr * rz) * s
            n2 = rx1 * rx1 + ry1 * ry1 + rz1 * rz1
            if n2 > 1.0:
                if n2 > rmax2:
                    bad = i
                    break
                norm = sqrt(n2)
                rx1 /= norm
                ry1 /= norm
                rz1 /= norm
            rx = rx1
            ry = ry1
            rz = rz1
            states[i, 0] = rx
            states[i, 1] = ry
            states[i, 2] = rz

    return dy_arr, axes_arr, states_arr, flags_arr, bad


def mean_path(r0, axes, double kappa, double phi, g, noise, double dt):
    """See ``pyref.mean_path``."""
    cdef const double[:, ::1] ax_v = np.ascontiguousarray(axes, dtype=np.float64)
    cdef Py_ssize_t m_steps = ax_v.shape[0]
    cdef double gx = g[0], gy = g[1], gz = g[2]
    cdef double ax = noise[0], ay = noise[1], az = noise[2], bz = noise[3]
    cdef double rmax = 1.0 + _threshold(kappa, 0.0, dt)
    cdef double rmax2 = rmax * rmax

    states_arr = np.empty((m_steps, 3))
    cdef double[:, ::1] states = states_arr
    cdef double rx = r0[0], ry = r0[1], rz = r0[2]
    cdef double nx, ny, nz, nr, rx1, ry1, rz1, n2, norm
    cdef Py_ssize_t i
    cdef Py_ssize_t bad = -1

    with nogil:
        for i in range(m_steps):
            nx = ax_v[i, 0]
            ny = ax_v[i, 1]
            nz = ax_v[i, 2]
            nr = nx * rx + ny * ry + nz * rz
            rx1 = rx + (2.0 * phi * (gy * rz - gz * ry) + kappa * (nr * nx - rx) - ax * rx) * dt
            ry1 = ry + (2.0 * phi * (gz * rx - gx * rz) + kappa * (nr * ny - ry) - ay * ry) * dt
            rz1 = rz + (2.0 * phi * (gx * ry - gy * rx) + kappa * (nr * nz - rz) - az * rz + bz) * dt
            n2 = rx1 * rx1 + ry1 * ry1 + rz1 * rz1
            if n2 > 1.0:
                if n2 > rmax2:
                    bad = i
                    break
                norm = sqrt(n2)
                rx1 /= norm
                ry1 /= norm
                rz1 /= norm
            rx = rx1
            ry = ry1
            rz = rz1
            states[i, 0] = rx
            states[i, 1] = ry
            states[i, 2] = rz

    return states_arr, bad


def plan_axes(r0, Py_ssize_t n_steps, double kappa, double phi, g, noise, double dt,
              Py_ssize_t latency, prev_axis):
    """See ``pyref.plan_axes``."""
    cdef double gx = g[0], gy = g[1], gz = g[2]
    cdef double ax = noise[0], ay = noise[1], az = noise[2], bz = noise[3]
    cdef double px = prev_axis[0], py = prev_axis[1], pz = prev_axis[2]
    cdef double rmax = 1.0 + _threshold(kappa, 0.0, dt)
    cdef double rmax2 = rmax * rmax

    axes_arr = np.empty((n_steps, 3))
    flags_arr = np.zeros(n_steps, dtype=np.uint8)
    states_arr = np.empty((n_steps, 3))
    cdef double[:, ::1] axes = axes_arr
    cdef unsigned char[::1] flags = flags_arr
    cdef double[:, ::1] states = states_arr
    cdef double rx = r0[0], ry = r0[1], rz = r0[2]
    cdef double cx, cy, cz, c2, cn, nx, ny, nz, nr, rx1, ry1, rz1, n2, norm
    cdef Py_ssize_t i
    cdef Py_ssize_t bad = -1

    with nogil:
        for i in range(n_steps):
            if i < latency:
                nx = px
                ny = py
                nz = pz
            else:
                cx = gy * rz - gz * ry
                cy = gz * rx - gx * rz
                cz = gx * ry - gy * rx
                c2 = cx * cx + cy * cy + cz * cz
                if c2 >= 1e-12:
                    cn = sqrt(c2)
                    nx = cx / cn
                    ny = cy / cn
                    nz = cz / cn
                else:
                    nx = 0.0
                    ny = 0.0
                    nz = 1.0
                    flags[i] = 1
            axes[i, 0] = nx
            axes[i, 1] = ny
            axes[i, 2] = nz
            nr = nx * rx + ny * ry + nz * rz
            rx1 = rx + (2.0 * phi * (gy * rz - gz * ry) + kappa * (nr * nx - rx) - ax * rx) * dt
            ry1 = ry + (2.0 * phi * (gz * rx - gx * rz) + kappa * (nr * ny - ry) - ay * ry) * dt
            rz1 = rz + (2.0 * phi * (gx * ry - gy * rx) + kappa * (nr * nz - rz) - az * rz + bz) * dt
            n2 = rx1 * rx1 + ry1 * ry1 + rz1 * rz1
            if n2 > 1.0:
                if n2 > rmax2:
                    bad = i
                    break
                norm = sqrt(n2)
                rx1 /= norm
                ry1 /= norm
                rz1 /= norm
            rx = rx1
            ry = ry1
            rz = rz1
            states[i, 0] = rx
            states[i, 1] = ry
            states[i, 2] = rz

    return axes_arr, flags_arr, states_arr, bad


def bank_block(bloch, log_like, phis, axes, dys, double kappa, double eta, g, noise, double dt):
    """See ``pyref.bank_block``.  Updates ``bloch`` and ``log_like`` in place."""
    cdef double[:, ::1] R = bloch
    cdef double[::1] ell = log_like
    cdef const double[::1] ph = np.ascontiguousarray(phis, dtype=np.float64)
    cdef const double[:, ::1] ax_v = np.ascontiguousarray(axes, dtype=np.float64)
    cdef const double[::1] dy_v = np.ascontiguousarray(dys, dtype=np.float64)
    cdef Py_ssize_t n_steps = ax_v.shape[0]
    cdef Py_ssize_t n_nodes = R.shape[0]
    cdef double gx = g[0], gy = g[1], gz = g[2]
    cdef double ax = noise[0], ay = noise[1], az = noise[2], bz = noise[3]
    cdef double s2k = sqrt(2.0 * kappa)
    cdef double s4e = sqrt(4.0 * eta)
    cdef double c1 = sqrt(2.0 * kappa * eta)
    cdef double two_eta = 2.0 * eta
    cdef double rmax = 1.0 + _threshold(kappa, eta, dt)
    cdef double rmax2 = rmax * rmax

    cdef double shift_total = 0.0
    cdef double nx, ny, nz, dyi, rx, ry, rz, nr, mk, wk, s
    cdef double rx1, ry1, rz1, n2, norm, mx, phik
    cdef Py_ssize_t i, k
    cdef Py_ssize_t bad_node = -1, bad_step = -1

    with nogil:
        for i in range(n_steps):
            nx = ax_v[i, 0]
            ny = ax_v[i, 1]
            nz = ax_v[i, 2]
            dyi = dy_v[i]
            for k in range(n_nodes):
                rx = R[k, 0]
                ry = R[k, 1]
                rz = R[k, 2]
                phik = ph[k]
                nr = nx * rx + ny * ry + nz * rz
                mk = s2k * nr
                ell[k] += two_eta * (mk * dyi - 0.25 * mk * mk * dt)
                wk = s4e * (dyi - 0.5 * mk * dt)
                s = c1 * wk
                rx1 = rx + (2.0 * phik * (gy * rz - gz * ry) + kappa * (nr * nx - rx) - ax * rx) * dt + (nx - nr * rx) * s
                ry1 = ry + (2.0 * phik * (gz * rx - gx * rz) + kappa * (nr * ny - ry) - ay * ry) * dt + (ny - nr * ry) * s
                rz1 = rz + (2.0 * phik * (gx * ry - gy * rx) + kappa * (nr * nz - rz) - az * rz + bz) * dt + (nz - nr * rz) * s
                n2 = rx1 * rx1 + ry1 * ry1 + rz1 * rz1
                if n2 > 1.0:
                    if n2 > rmax2:
                        bad_node = k
                        bad_step = i
                        break
                    norm = sqrt(n2)
                    rx1 /= norm
                    ry1 /= norm
                    rz1 /= norm
                R[k, 0] = rx1
                R[k, 1] = ry1
                R[k, 2] = rz1
            if bad_node >= 0:
                break
            mx = ell[0]
            for k in range(1, n_nodes):
                if ell[k] > mx:
                    mx = ell[k]
            for k in range(n_nodes):
                ell[k] -= mx
            shift_total += mx

    return shift_total, bad_node, bad_step
