"""Independent linear (ostensible-measure) filter used as a likelihood oracle.

Propagates the UNNORMALIZED 2x2 conditional matrix with an explicit Euler
step of the linear filtering equation

    d rho~ = ( -i phi [G, rho~] + thermal Lindblad(rho~) + D[c] rho~ ) dt
             + 2 eta (c rho~ + rho~ c+) dy ,

whose trace is the likelihood of the record relative to the zero-mean
reference measure.  Everything here is written directly against matrices
(own Pauli constants, own dissipator) so it shares no code with the
package's Bloch-coordinate kernels; the two agree at O(dt), which the
tests exploit with a small step.
"""

import numpy as np

_SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_SY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
_SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
_SP = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
_SM = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
_GX = _SX  # generator fixed to the x axis, as in the protocol


def _dissipator(c, rho):
    cd = c.conj().T
    return c @ rho @ cd - 0.5 * (cd @ c @ rho + rho @ cd @ c)


def linear_filter_trace(phi, rho0, dys, axes, kappa, eta, gamma, nbar, dt):
    """Trace of the unnormalized filter state after assimilating the record."""
    rho = np.array(rho0, dtype=complex)
    for dy, n in zip(dys, axes):
        c = np.sqrt(kappa / 2.0) * (n[0] * _SX + n[1] * _SY + n[2] * _SZ)
        drift = (
            -1j * phi * (_GX @ rho - rho @ _GX)
            + gamma * nbar * _dissipator(_SP, rho)
            + gamma * (1.0 + nbar) * _dissipator(_SM, rho)
            + _dissipator(c, rho)
        )
        rho = rho + drift * dt + 2.0 * eta * (c @ rho + rho @ c.conj().T) * dy
    return float(np.trace(rho).real)
