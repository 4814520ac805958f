"""Pure NumPy reference implementation of the simulation kernels.

All hot loops in the package reduce to the qubit diffusive-measurement
equation written in Bloch coordinates, which is an exact reparametrization
of the 2x2 master equation for rho = (I + r.sigma)/2.  With measurement
operator c = sqrt(kappa/2) n.sigma (unit axis n, efficiency eta), generator
axis g, unknown phase phi and decoherence coefficients (ax, ay, az, bz)
from ``NoiseModel.bloch_decay_coeffs``, one Euler-Maruyama step reads

    nr  = n . r
    m   = sqrt(2 kappa) nr                      # tr[(c + c+) rho]
    dy  = m dt / 2 + dW / sqrt(4 eta)           # measurement record
    dr  = [ 2 phi (g x r) + kappa (nr n - r)
            + (-ax rx, -ay ry, -az rz + bz) ] dt
          + sqrt(2 kappa eta) (n - nr r) dW

followed by a radial clamp: if ||r|| lands in (1, 1 + thr] the vector is
rescaled to the sphere (equivalent to zeroing the small negative eigenvalue
and renormalizing), and beyond 1 + thr the step fails.  The threshold

    thr = max(2e-6, 64 kappa eta dt)

is the diffusionless constant 2e-6 (eigenvalue -1e-6) widened by the
O(kappa eta dt chi^2) overshoot that Euler diffusion produces at the sphere;
without the widening, routine Wiener draws near a pure state would trip the
error on a large fraction of steps.

The hypothesis-bank kernel advances one Bloch vector per candidate phase
with the hypothesis-consistent innovation dW_k = sqrt(4 eta)(dy - m_k dt/2)
and accumulates the Gaussian log-likelihood-ratio increment against the
zero-mean reference record measure,

    dl_k = 2 eta (m_k dy - m_k^2 dt / 4),

subtracting max_k l_k after each step (posterior-invariant overflow guard;
the subtracted total is returned so absolute likelihoods stay recoverable).

The compiled backend (``_speedups``) mirrors these expressions operation
for operation and is bit-identical on IEEE double hardware; keep the two
files in sync.  Only +, -, *, /, sqrt and comparisons may be used here.
"""

from __future__ import annotations

import math

import numpy as np

# Radial clamp policy (see module docstring).
CLAMP_FLOOR = 2e-6
CLAMP_DIFFUSION = 64.0


def clamp_threshold(kappa: float, eta: float, dt: float) -> float:
    """Allowed ||r|| - 1 overshoot before a step is declared non-physical."""
    scaled = CLAMP_DIFFUSION * kappa * eta * dt
    return scaled if scaled > CLAMP_FLOOR else CLAMP_FLOOR


def sim_block(r0, axes, dw, kappa, eta, phi, g, noise, dt):
    """Integrate one block of conditional evolution under a fixed schedule.

    Parameters
    ----------
    r0 : (3,) float array; initial Bloch vector.
    axes : (m, 3) float array; measurement axis per step.
    dw : (m,) float array; Wiener increments (mean 0, variance dt).
    kappa, eta, phi : measurement strength, efficiency, true phase.
    g : (3,) float array; generator axis.
    noise : (ax, ay, az, bz) Bloch decay coefficients.
    dt : time step.

    Returns
    -------
    dy : (m,) record increments.
    states : (m, 3) Bloch vector after each step.
    bad_step : index of the first failing step, or -1.
    """
    m_steps = axes.shape[0]
    gx, gy, gz = float(g[0]), float(g[1]), float(g[2])
    ax, ay, az, bz = (float(v) for v in noise)
    kappa = float(kappa)
    eta = float(eta)
    phi = float(phi)
    dt = float(dt)
    s2k = math.sqrt(2.0 * kappa)
    s4e = math.sqrt(4.0 * eta)
    c1 = math.sqrt(2.0 * kappa * eta)
    rmax = 1.0 + clamp_threshold(kappa, eta, dt)
    rmax2 = rmax * rmax

    dy = np.empty(m_steps)
    states = np.empty((m_steps, 3))
    rx, ry, rz = float(r0[0]), float(r0[1]), float(r0[2])

    for i in range(m_steps):
        nx, ny, nz = float(axes[i, 0]), float(axes[i, 1]), float(axes[i, 2])
        w = float(dw[i])
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
                return dy, states, i
            norm = math.sqrt(n2)
            rx1 /= norm
            ry1 /= norm
            rz1 /= norm
        rx, ry, rz = rx1, ry1, rz1
        states[i, 0] = rx
        states[i, 1] = ry
        states[i, 2] = rz

    return dy, states, -1


def sim_block_tracking(r0, dw, kappa, eta, phi, g, noise, dt):
    """Conditional evolution with the axis re-chosen every step.

    Each step measures along normalize(g x r) computed from the current
    conditional state (the rapid-purification rule), falling back to the
    z axis with a flag when ||g x r|| < 1e-6.

    Returns (dy, axes, states, flags, bad_step); flags is uint8, 1 where
    the fallback axis was used.
    """
    m_steps = dw.shape[0]
    gx, gy, gz = float(g[0]), float(g[1]), float(g[2])
    ax, ay, az, bz = (float(v) for v in noise)
    kappa = float(kappa)
    eta = float(eta)
    phi = float(phi)
    dt = float(dt)
    s2k = math.sqrt(2.0 * kappa)
    s4e = math.sqrt(4.0 * eta)
    c1 = math.sqrt(2.0 * kappa * eta)
    rmax = 1.0 + clamp_threshold(kappa, eta, dt)
    rmax2 = rmax * rmax

    dy = np.empty(m_steps)
    axes = np.empty((m_steps, 3))
    states = np.empty((m_steps, 3))
    flags = np.zeros(m_steps, dtype=np.uint8)
    rx, ry, rz = float(r0[0]), float(r0[1]), float(r0[2])

    for i in range(m_steps):
        cx = gy * rz - gz * ry
        cy = gz * rx - gx * rz
        cz = gx * ry - gy * rx
        c2 = cx * cx + cy * cy + cz * cz
        if c2 >= 1e-12:
            cn = math.sqrt(c2)
            nx = cx / cn
            ny = cy / cn
            nz = cz / cn
        else:
            nx, ny, nz = 0.0, 0.0, 1.0
            flags[i] = 1
        axes[i, 0] = nx
        axes[i, 1] = ny
        axes[i, 2] = nz
        w = float(dw[i])
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
                return dy, axes, states, flags, i
            norm = math.sqrt(n2)
            rx1 /= norm
            ry1 /= norm
            rz1 /= norm
        rx, ry, rz = rx1, ry1, rz1
        states[i, 0] = rx
        states[i, 1] = ry
        states[i, 2] = rz

    return dy, axes, states, flags, -1


def mean_path(r0, axes, kappa, phi, g, noise, dt):
    """Deterministic (ensemble-average) evolution: the step without dW.

    Returns (states, bad_step) with states holding the post-step vectors.
    """
    m_steps = axes.shape[0]
    gx, gy, gz = float(g[0]), float(g[1]), float(g[2])
    ax, ay, az, bz = (float(v) for v in noise)
    kappa = float(kappa)
    phi = float(phi)
    dt = float(dt)
    rmax = 1.0 + clamp_threshold(kappa, 0.0, dt)
    rmax2 = rmax * rmax

    states = np.empty((m_steps, 3))
    rx, ry, rz = float(r0[0]), float(r0[1]), float(r0[2])

    for i in range(m_steps):
        nx, ny, nz = float(axes[i, 0]), float(axes[i, 1]), float(axes[i, 2])
        nr = nx * rx + ny * ry + nz * rz
        rx1 = rx + (2.0 * phi * (gy * rz - gz * ry) + kappa * (nr * nx - rx) - ax * rx) * dt
        ry1 = ry + (2.0 * phi * (gz * rx - gx * rz) + kappa * (nr * ny - ry) - ay * ry) * dt
        rz1 = rz + (2.0 * phi * (gx * ry - gy * rx) + kappa * (nr * nz - rz) - az * rz + bz) * dt
        n2 = rx1 * rx1 + ry1 * ry1 + rz1 * rz1
        if n2 > 1.0:
            if n2 > rmax2:
                return states, i
            norm = math.sqrt(n2)
            rx1 /= norm
            ry1 /= norm
            rz1 /= norm
        rx, ry, rz = rx1, ry1, rz1
        states[i, 0] = rx
        states[i, 1] = ry
        states[i, 2] = rz

    return states, -1


def plan_axes(r0, n_steps, kappa, phi, g, noise, dt, latency, prev_axis):
    """Self-consistent rapid-purification planning along the mean path.

    At each step the measurement axis is chosen from the current mean Bloch
    vector (normalize(g x r), z-axis fallback with flag), then the mean state
    is advanced one step under that axis, so the planned schedule and the
    planning trajectory are mutually consistent.  The first ``latency`` steps
    instead reuse ``prev_axis`` (feedback-loop delay).

    Returns (axes, flags, states, bad_step).
    """
    gx, gy, gz = float(g[0]), float(g[1]), float(g[2])
    ax, ay, az, bz = (float(v) for v in noise)
    kappa = float(kappa)
    phi = float(phi)
    dt = float(dt)
    px, py, pz = float(prev_axis[0]), float(prev_axis[1]), float(prev_axis[2])
    rmax = 1.0 + clamp_threshold(kappa, 0.0, dt)
    rmax2 = rmax * rmax

    axes = np.empty((n_steps, 3))
    flags = np.zeros(n_steps, dtype=np.uint8)
    states = np.empty((n_steps, 3))
    rx, ry, rz = float(r0[0]), float(r0[1]), float(r0[2])

    for i in range(n_steps):
        if i < latency:
            nx, ny, nz = px, py, pz
        else:
            cx = gy * rz - gz * ry
            cy = gz * rx - gx * rz
            cz = gx * ry - gy * rx
            c2 = cx * cx + cy * cy + cz * cz
            if c2 >= 1e-12:
                cn = math.sqrt(c2)
                nx = cx / cn
                ny = cy / cn
                nz = cz / cn
            else:
                nx, ny, nz = 0.0, 0.0, 1.0
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
                return axes, flags, states, i
            norm = math.sqrt(n2)
            rx1 /= norm
            ry1 /= norm
            rz1 /= norm
        rx, ry, rz = rx1, ry1, rz1
        states[i, 0] = rx
        states[i, 1] = ry
        states[i, 2] = rz

    return axes, flags, states, -1


def bank_block(bloch, log_like, phis, axes, dys, kappa, eta, g, noise, dt):
    """Assimilate a block of record increments into a hypothesis bank.

    ``bloch`` (n, 3) and ``log_like`` (n,) are updated in place; each node k
    advances under its own phase phis[k] with innovation
    dW_k = sqrt(4 eta) (dy - m_k dt / 2) and accumulates
    dl_k = 2 eta (m_k dy - m_k^2 dt / 4), with max_k l_k subtracted after
    every step.

    Returns (shift_total, bad_node, bad_step); shift_total is the sum of
    the per-step subtracted maxima (add it back to recover absolute
    log-likelihoods), and bad indices are -1 on success.
    """
    n_steps = axes.shape[0]
    gx, gy, gz = float(g[0]), float(g[1]), float(g[2])
    ax, ay, az, bz = (float(v) for v in noise)
    kappa = float(kappa)
    eta = float(eta)
    dt = float(dt)
    s2k = math.sqrt(2.0 * kappa)
    s4e = math.sqrt(4.0 * eta)
    c1 = math.sqrt(2.0 * kappa * eta)
    two_eta = 2.0 * eta
    rmax = 1.0 + clamp_threshold(kappa, eta, dt)
    rmax2 = rmax * rmax

    rx = bloch[:, 0]
    ry = bloch[:, 1]
    rz = bloch[:, 2]
    shift_total = 0.0

    for i in range(n_steps):
        nx, ny, nz = float(axes[i, 0]), float(axes[i, 1]), float(axes[i, 2])
        dyi = float(dys[i])
        nr = nx * rx + ny * ry + nz * rz
        mk = s2k * nr
        log_like += two_eta * (mk * dyi - 0.25 * mk * mk * dt)
        wk = s4e * (dyi - 0.5 * mk * dt)
        s = c1 * wk
        rx1 = rx + (2.0 * phis * (gy * rz - gz * ry) + kappa * (nr * nx - rx) - ax * rx) * dt + (nx - nr * rx) * s
        ry1 = ry + (2.0 * phis * (gz * rx - gx * rz) + kappa * (nr * ny - ry) - ay * ry) * dt + (ny - nr * ry) * s
        rz1 = rz + (2.0 * phis * (gx * ry - gy * rx) + kappa * (nr * nz - rz) - az * rz + bz) * dt + (nz - nr * rz) * s
        n2 = rx1 * rx1 + ry1 * ry1 + rz1 * rz1
        over = n2 > 1.0
        if over.any():
            bad = n2 > rmax2
            if bad.any():
                return shift_total, int(np.argmax(bad)), i
            norm = np.sqrt(n2[over])
            rx1[over] /= norm
            ry1[over] /= norm
            rz1[over] /= norm
        rx[:] = rx1
        ry[:] = ry1
        rz[:] = rz1
        mx = float(log_like.max())
        log_like -= mx
        shift_total += mx

    return shift_total, -1, -1
