"""Grid-based Bayesian inference of the phase from the measurement record.

A bank of hypotheses, one per node of a uniform phase grid, shares the
measured record.  Each node propagates its own conditional state under its
candidate phase, using the hypothesis-consistent innovation
dW_k = sqrt(4 eta)(dy - m_k dt/2), and accumulates the log-likelihood-ratio
of the record against the zero-mean reference (ostensible) measure,

    dl_k = 2 eta (m_k dy - m_k^2 dt / 4),      m_k = tr[(c + c+) rho_k],

which is the Gaussian form of the record model dy ~ N(m_k dt/2, dt/(4 eta)).
The largest log-likelihood is subtracted after every step (harmless to the
posterior, prevents overflow); the running total of subtractions is kept so
absolute likelihoods remain available (``HypothesisBank.log_shift``).

Posterior, mean and variance use trapezoidal quadrature on the grid.  The
bank is never reset between blocks: hypothesis states carry their purity
history across re-planning.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from . import kernels
from .core import (
    AllZeroLikelihoodError,
    NoiseModel,
    NonPhysicalDriftError,
    PauliAxis,
    QubitState,
    bloch_to_state,
)
from .engine import MeasurementOp, TrajectoryRecord, ValidationError

__all__ = [
    "PhaseGrid",
    "HypothesisBank",
    "PhaseEstimate",
    "init_bank",
    "assimilate",
    "assimilate_record",
    "posterior",
    "estimate",
    "mean_state",
]


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform grid of candidate phases on [phi_min, phi_max]."""

    phi_min: float
    phi_max: float
    n_points: int

    def __post_init__(self):
        if not self.phi_min < self.phi_max:
            raise ValidationError("phase grid needs phi_min < phi_max")
        if self.n_points < 2:
            raise ValidationError("phase grid needs at least two nodes")

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = np.linspace(self.phi_min, self.phi_max, self.n_points)
        nodes.setflags(write=False)
        return nodes

    @property
    def spacing(self) -> float:
        return (self.phi_max - self.phi_min) / (self.n_points - 1)

    @cached_property
    def quadrature(self) -> np.ndarray:
        """Trapezoid weights; sums to phi_max - phi_min."""
        w = np.full(self.n_points, self.spacing)
        w[0] *= 0.5
        w[-1] *= 0.5
        w.setflags(write=False)
        return w

    def contains(self, phi: float) -> bool:
        return self.phi_min <= phi <= self.phi_max


@dataclass
class HypothesisBank:
    """Conditional states and log-likelihoods, one per grid node."""

    grid: PhaseGrid
    bloch: np.ndarray      # (n, 3) conditional Bloch vector per node
    log_like: np.ndarray   # (n,) relative log-likelihoods (max-shifted)
    log_prior: np.ndarray  # (n,) log prior mass shape on the nodes
    log_shift: float = 0.0  # total subtracted from log_like so far

    @property
    def n_nodes(self) -> int:
        return self.grid.n_points

    def states(self) -> list[QubitState]:
        return [bloch_to_state(r) for r in self.bloch]

    def absolute_log_like(self) -> np.ndarray:
        """Log-likelihoods with the overflow shift restored."""
        return self.log_like + self.log_shift

    def copy(self) -> "HypothesisBank":
        return HypothesisBank(
            grid=self.grid,
            bloch=self.bloch.copy(),
            log_like=self.log_like.copy(),
            log_prior=self.log_prior.copy(),
            log_shift=self.log_shift,
        )


@dataclass(frozen=True)
class PhaseEstimate:
    """Posterior mean and variance of the phase."""

    phi_est: float
    variance: float

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))


def init_bank(grid: PhaseGrid, rho0: QubitState, log_prior=None) -> HypothesisBank:
    """Fresh bank: every hypothesis holds rho0; flat prior unless given."""
    n = grid.n_points
    bloch = np.ascontiguousarray(np.tile(rho0.bloch, (n, 1)))
    if log_prior is None:
        log_prior = np.zeros(n)
    else:
        log_prior = np.asarray(log_prior, dtype=float).copy()
        if log_prior.shape != (n,):
            raise ValidationError("log_prior must have one entry per grid node")
    return HypothesisBank(
        grid=grid,
        bloch=bloch,
        log_like=np.zeros(n),
        log_prior=log_prior,
    )


def assimilate_record(
    bank: HypothesisBank,
    record,
    kappa: float,
    eta: float,
    noise: NoiseModel,
    g_axis: PauliAxis,
    dt: float,
) -> HypothesisBank:
    """Assimilate a whole block of record increments into the bank (in place).

    ``record`` is a TrajectoryRecord or a (dy, axes) pair produced with the
    same measurement parameters and time step.
    """
    if isinstance(record, TrajectoryRecord):
        dys, axes = record.dy, record.axes
    else:
        dys, axes = record
        dys = np.asarray(dys, dtype=float)
        axes = np.asarray(axes, dtype=float)
    if axes.shape != (len(dys), 3):
        raise ValidationError("record axes must have shape (len(dy), 3)")
    if len(dys) == 0:
        return bank
    shift, bad_node, bad_step = kernels.bank_block(
        bank.bloch,
        bank.log_like,
        bank.grid.nodes,
        axes,
        dys,
        float(kappa),
        float(eta),
        g_axis.vector,
        noise.bloch_decay_coeffs(),
        float(dt),
    )
    bank.log_shift += shift
    if bad_node >= 0:
        raise NonPhysicalDriftError(
            f"hypothesis node {bad_node} (phi={bank.grid.nodes[bad_node]:.6g}) "
            f"left the Bloch ball at record step {bad_step}",
            step=int(bad_step),
            node=int(bad_node),
        )
    return bank


def assimilate(
    bank: HypothesisBank,
    dy: float,
    meas: MeasurementOp,
    noise: NoiseModel,
    g_axis: PauliAxis,
    dt: float,
) -> HypothesisBank:
    """Assimilate one record increment dy measured along meas.axis."""
    return assimilate_record(
        bank,
        (np.array([float(dy)]), meas.axis.vector.reshape(1, 3)),
        meas.kappa,
        meas.eta,
        noise,
        g_axis,
        dt,
    )


def _weights(bank: HypothesisBank) -> np.ndarray:
    """Normalized posterior mass per node (trapezoid-weighted)."""
    score = bank.log_like + bank.log_prior
    top = np.max(score)
    if not np.isfinite(top):
        raise AllZeroLikelihoodError("no hypothesis has a finite likelihood")
    q = np.exp(score - top) * bank.grid.quadrature
    z = q.sum()
    if not (np.isfinite(z) and z > 0.0):
        raise AllZeroLikelihoodError("posterior normalization vanished")
    return q / z


def posterior(bank: HypothesisBank) -> np.ndarray:
    """Posterior probability density at the grid nodes.

    The returned densities integrate to one under the grid's trapezoid rule
    (the corresponding node masses sum to one).
    """
    return _weights(bank) / bank.grid.quadrature


def estimate(bank: HypothesisBank) -> PhaseEstimate:
    """Posterior-mean phase and the posterior variance."""
    w = _weights(bank)
    nodes = bank.grid.nodes
    phi_est = float(w @ nodes)
    variance = float(w @ (nodes - phi_est) ** 2)
    return PhaseEstimate(phi_est=phi_est, variance=variance)


def mean_state(bank: HypothesisBank) -> QubitState:
    """Posterior-weighted average of the hypothesis states.

    This is the controller's belief state, used as the starting point for
    planning the next block.
    """
    w = _weights(bank)
    return bloch_to_state(w @ bank.bloch)
