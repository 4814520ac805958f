"""Exact 2x2 algebra for qubit states, channels, and Fisher information.

Conventions used throughout the package:

* Basis ordering is (|e>, |g>) so that sigma_z = |e><e| - |g><g| = diag(1, -1),
  sigma_plus = |e><g| raises and sigma_minus = |g><e| lowers.
* A state is written rho = (I + r.sigma)/2 with Bloch vector r; ||r|| = 1
  iff rho is pure, and the eigenvalues of rho are (1 +- ||r||)/2.
* The quantum Fisher information here is normalized so that a pure state
  with an orthogonal generator gives F_Q = 2 (see ``qfi``); some texts use a
  convention 4x the variance that is twice this value for pure states.

Everything in this module is an immutable value or a pure function, safe to
share across threads.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "SIGMA_PLUS",
    "SIGMA_MINUS",
    "IDENTITY",
    "StabqubitError",
    "NonPhysicalStateError",
    "DegenerateBoundError",
    "NonPhysicalDriftError",
    "AllZeroLikelihoodError",
    "QubitState",
    "PauliAxis",
    "NoiseModel",
    "bloch_to_state",
    "dissipator",
    "innovation_term",
    "linear_entropy",
    "purity",
    "qfi",
    "cramer_rao_bound",
]

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)   # |e><g|
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)  # |g><e|
IDENTITY = np.eye(2, dtype=complex)

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-9
EIGENVALUE_TOL = 1e-8   # physicality: both eigenvalues >= -EIGENVALUE_TOL
BLOCH_NORM_TOL = 1e-8   # equivalently ||r|| <= 1 + BLOCH_NORM_TOL
AXIS_NORM_TOL = 1e-12


class StabqubitError(Exception):
    """Base class for errors raised by this package."""


class NonPhysicalStateError(StabqubitError):
    """A density matrix failed Hermiticity, trace, or positivity checks."""


class DegenerateBoundError(StabqubitError):
    """Cramer-Rao bound requested for non-positive Fisher information."""


class NonPhysicalDriftError(StabqubitError):
    """An integration step left the Bloch ball by more than the clamp allows.

    Signals that the time step is too large for the configured rates.
    Carries the failing ``step`` index and, for hypothesis-bank updates,
    the failing ``node`` index.
    """

    def __init__(self, message, *, step=None, node=None, block=None):
        super().__init__(message)
        self.step = step
        self.node = node
        self.block = block


class AllZeroLikelihoodError(StabqubitError):
    """Every hypothesis weight vanished or became non-finite."""


def _frozen_array(values, shape, dtype=float):
    arr = np.array(values, dtype=dtype)
    if arr.shape != shape:
        raise ValueError(f"expected array of shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class QubitState:
    """A 2x2 density operator with a Bloch-vector view.

    Construction validates Hermiticity (1e-12), unit trace (1e-9) and
    positivity (eigenvalues >= -1e-8); invalid input raises
    :class:`NonPhysicalStateError` rather than being clamped.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen_array(self.matrix, (2, 2), dtype=complex)
        object.__setattr__(self, "matrix", m)
        if np.max(np.abs(m - m.conj().T)) > HERMITICITY_TOL:
            raise NonPhysicalStateError("density matrix is not Hermitian")
        tr = m[0, 0].real + m[1, 1].real
        if abs(tr - 1.0) > TRACE_TOL:
            raise NonPhysicalStateError(f"trace {tr!r} differs from 1")
        if np.min(np.linalg.eigvalsh(m)) < -EIGENVALUE_TOL:
            raise NonPhysicalStateError("density matrix has a negative eigenvalue")

    @classmethod
    def from_bloch(cls, r) -> "QubitState":
        return bloch_to_state(r)

    @cached_property
    def bloch(self) -> np.ndarray:
        """Bloch vector r with rho = (I + r.sigma)/2."""
        m = self.matrix
        r = np.array(
            [2.0 * m[0, 1].real, -2.0 * m[0, 1].imag, (m[0, 0] - m[1, 1]).real]
        )
        r.setflags(write=False)
        return r

    @property
    def purity(self) -> float:
        return purity(self)

    def expect(self, op) -> float:
        """Real expectation value tr(op rho) of a Hermitian operator."""
        return float(np.trace(np.asarray(op) @ self.matrix).real)


@dataclass(frozen=True, eq=False)
class PauliAxis:
    """A unit 3-vector n together with its operator view n.sigma.

    The constructor normalizes its input; a near-zero vector is rejected.
    """

    vector: np.ndarray

    def __post_init__(self):
        v = np.array(self.vector, dtype=float)
        if v.shape != (3,):
            raise ValueError("axis needs three components")
        norm = float(np.linalg.norm(v))
        if norm < 1e-12:
            raise ValueError("cannot normalize a zero axis vector")
        if abs(norm - 1.0) > AXIS_NORM_TOL:
            v = v / norm
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)

    @classmethod
    def x(cls) -> "PauliAxis":
        return cls(np.array([1.0, 0.0, 0.0]))

    @classmethod
    def y(cls) -> "PauliAxis":
        return cls(np.array([0.0, 1.0, 0.0]))

    @classmethod
    def z(cls) -> "PauliAxis":
        return cls(np.array([0.0, 0.0, 1.0]))

    @classmethod
    def from_name(cls, name: str) -> "PauliAxis":
        try:
            return {"x": cls.x, "y": cls.y, "z": cls.z}[name.lower()]()
        except KeyError:
            raise ValueError(f"unknown axis name {name!r}; use x, y, or z") from None

    @cached_property
    def operator(self) -> np.ndarray:
        """The Hermitian operator n.sigma."""
        nx, ny, nz = self.vector
        op = nx * SIGMA_X + ny * SIGMA_Y + nz * SIGMA_Z
        op.setflags(write=False)
        return op


@dataclass(frozen=True)
class NoiseModel:
    """Decoherence rates: thermal (gamma, nbar) or per-axis dephasing.

    ``thermal`` applies gamma*nbar*D[sigma_plus] + gamma*(1+nbar)*D[sigma_minus];
    ``generic`` applies sum_j (gamma_j/2)*D[sigma_j].  All rates are in the
    same inverse-time units as the measurement strength.
    """

    kind: str  # "thermal" or "generic"
    gamma: float = 0.0
    nbar: float = 0.0
    gamma_x: float = 0.0
    gamma_y: float = 0.0
    gamma_z: float = 0.0

    def __post_init__(self):
        if self.kind not in ("thermal", "generic"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        for name in ("gamma", "nbar", "gamma_x", "gamma_y", "gamma_z"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")

    @classmethod
    def thermal(cls, gamma: float, nbar: float) -> "NoiseModel":
        return cls(kind="thermal", gamma=gamma, nbar=nbar)

    @classmethod
    def generic(cls, gamma_x: float, gamma_y: float, gamma_z: float) -> "NoiseModel":
        return cls(kind="generic", gamma_x=gamma_x, gamma_y=gamma_y, gamma_z=gamma_z)

    @classmethod
    def none(cls) -> "NoiseModel":
        return cls(kind="thermal", gamma=0.0, nbar=0.0)

    def bloch_decay_coeffs(self) -> tuple[float, float, float, float]:
        """Coefficients (ax, ay, az, bz) of the Bloch-space decoherence drift.

        The noise contribution to dr/dt is (-ax*rx, -ay*ry, -az*rz + bz);
        for the thermal model ax = ay = gamma*(2*nbar+1)/2, az = gamma*(2*nbar+1)
        and bz = -gamma, giving the fixed point r_z = -1/(2*nbar+1).
        """
        if self.kind == "thermal":
            big = self.gamma * (2.0 * self.nbar + 1.0)
            return (0.5 * big, 0.5 * big, big, -self.gamma)
        return (
            self.gamma_y + self.gamma_z,
            self.gamma_x + self.gamma_z,
            self.gamma_x + self.gamma_y,
            0.0,
        )

    def lindblad_increment(self, rho: QubitState) -> np.ndarray:
        """Matrix-valued decoherence drift sum_k gamma_k D[c_k] rho."""
        m = rho.matrix
        if self.kind == "thermal":
            return self.gamma * self.nbar * dissipator(SIGMA_PLUS, m) + self.gamma * (
                1.0 + self.nbar
            ) * dissipator(SIGMA_MINUS, m)
        out = np.zeros((2, 2), dtype=complex)
        for rate, op in (
            (self.gamma_x, SIGMA_X),
            (self.gamma_y, SIGMA_Y),
            (self.gamma_z, SIGMA_Z),
        ):
            if rate != 0.0:
                out += 0.5 * rate * dissipator(op, m)
        return out

    def max_rate(self) -> float:
        """Largest decay rate, used by time-step stability guards."""
        if self.kind == "thermal":
            return self.gamma * (1.0 + self.nbar)
        return max(self.gamma_x, self.gamma_y, self.gamma_z)


def bloch_to_state(r) -> QubitState:
    """Build rho = (I + r.sigma)/2 from a Bloch vector inside the unit ball."""
    r = np.asarray(r, dtype=float)
    if r.shape != (3,):
        raise ValueError("Bloch vector needs three components")
    norm = float(np.linalg.norm(r))
    if norm > 1.0 + BLOCH_NORM_TOL:
        raise NonPhysicalStateError(f"Bloch vector norm {norm} exceeds 1")
    rx, ry, rz = r
    m = 0.5 * np.array(
        [[1.0 + rz, rx - 1.0j * ry], [rx + 1.0j * ry, 1.0 - rz]], dtype=complex
    )
    return QubitState(m)


def _as_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, QubitState) else np.asarray(rho, dtype=complex)


def dissipator(c, rho) -> np.ndarray:
    """Lindblad dissipator D[c] rho = c rho c+ - (c+c rho + rho c+c)/2.

    Accepts a QubitState or a raw 2x2 matrix; the result is a traceless
    Hermitian increment (a raw matrix, not a state).
    """
    c = np.asarray(c, dtype=complex)
    m = _as_matrix(rho)
    cdc = c.conj().T @ c
    return c @ m @ c.conj().T - 0.5 * (cdc @ m + m @ cdc)


def innovation_term(c, rho) -> np.ndarray:
    """Measurement innovation H[c] rho = c rho + rho c+ - <c + c+> rho.

    ``rho`` must be normalized (unit trace) for the result to be traceless.
    """
    c = np.asarray(c, dtype=complex)
    m = _as_matrix(rho)
    mean = np.trace(c @ m + m @ c.conj().T).real
    return c @ m + m @ c.conj().T - mean * m


def linear_entropy(rho) -> float:
    """Linear entropy S_L = 1 - tr(rho^2); equals (1 - ||r||^2)/2."""
    m = _as_matrix(rho)
    return float(1.0 - np.trace(m @ m).real)


def purity(rho) -> float:
    """tr(rho^2), between 1/2 (maximally mixed) and 1 (pure)."""
    m = _as_matrix(rho)
    return float(np.trace(m @ m).real)


def qfi(rho: QubitState, generator: PauliAxis) -> float:
    """Quantum Fisher information of ``rho`` for phase generated by n.sigma.

    Computed from the eigendecomposition of rho as

        F_Q = sum_{j,k} (l_j - l_k)^2 / (l_j + l_k) |<j| G |k>|^2,

    skipping terms with l_j + l_k < 1e-12 (the standard regularization at
    rank-deficient states).  With this normalization a pure state whose
    Bloch vector is orthogonal to the generator axis gives F_Q = 2.
    """
    m = _as_matrix(rho)
    vals, vecs = np.linalg.eigh(m)
    g = generator.operator if isinstance(generator, PauliAxis) else np.asarray(generator)
    gmat = vecs.conj().T @ g @ vecs
    total = 0.0
    for j in range(2):
        for k in range(2):
            denom = vals[j] + vals[k]
            if denom < 1e-12:
                continue
            total += (vals[j] - vals[k]) ** 2 / denom * abs(gmat[j, k]) ** 2
    return float(total)


def cramer_rao_bound(fq: float, nu: int = 1) -> float:
    """Lower bound 1/(nu * F_Q) on the variance of unbiased phase estimators."""
    if fq <= 0.0:
        raise DegenerateBoundError(f"Fisher information must be positive, got {fq}")
    if nu < 1:
        raise ValueError("repetition count must be >= 1")
    return 1.0 / (nu * fq)
