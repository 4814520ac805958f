"""Measurement-axis planning for rapid purification in the rotating frame.

Block 0 measures along the fixed z axis (no phase knowledge yet).  Later
blocks integrate the deterministic mean evolution from the controller's
belief state at the current phase estimate and, step by step, choose the
axis mutually perpendicular to the generator and the mean Bloch vector:
axis = normalize(g x r).  Axis choice and mean propagation are interleaved
(the chosen axis feeds the very step that advances the mean state), since
the schedule itself alters the mean evolution through the measurement
back-action.

When ||g x r|| < 1e-6 the rule is degenerate and the fixed z axis is used
instead, flagged in the schedule; z remains perpendicular to the default
generator x, so the Hamiltonian-noninterference half of the criterion still
holds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .core import NonPhysicalDriftError, PauliAxis, QubitState
from .engine import SimConfig, MeasurementOp, ValidationError, stability_guard

__all__ = [
    "AxisChoice",
    "MeasurementSchedule",
    "purification_axis",
    "plan_block",
    "DEGENERACY_CUTOFF",
]

DEGENERACY_CUTOFF = 1e-6  # on ||g x r||; matches the kernels


@dataclass(frozen=True)
class AxisChoice:
    """A planned measurement axis plus whether the fallback rule fired."""

    axis: PauliAxis
    degenerate: bool


@dataclass(frozen=True)
class MeasurementSchedule:
    """Per-step measurement axes sharing one strength and efficiency."""

    axes: np.ndarray
    kappa: float
    eta: float
    degenerate: np.ndarray = field(default=None)  # type: ignore[assignment]
    planned_mean: Optional[np.ndarray] = None
    latency_steps: int = 0

    def __post_init__(self):
        axes = np.ascontiguousarray(self.axes, dtype=float)
        if axes.ndim != 2 or axes.shape[1] != 3:
            raise ValidationError("schedule axes must have shape (m, 3)")
        norms = np.linalg.norm(axes, axis=1)
        if axes.shape[0] and np.max(np.abs(norms - 1.0)) > 1e-9:
            raise ValidationError("every schedule axis must be unit norm")
        axes.setflags(write=False)
        object.__setattr__(self, "axes", axes)
        flags = self.degenerate
        if flags is None:
            flags = np.zeros(axes.shape[0], dtype=bool)
        flags = np.asarray(flags).astype(bool)
        if flags.shape != (axes.shape[0],):
            raise ValidationError("degeneracy flags must match the schedule length")
        flags.setflags(write=False)
        object.__setattr__(self, "degenerate", flags)

    def __len__(self) -> int:
        return self.axes.shape[0]

    def measurement_ops(self) -> list[MeasurementOp]:
        return [MeasurementOp(PauliAxis(a), self.kappa, self.eta) for a in self.axes]


def purification_axis(r, g_axis: PauliAxis) -> AxisChoice:
    """Axis mutually perpendicular to the generator and the Bloch vector.

    Returns normalize(g x r) when ||g x r|| >= 1e-6; otherwise the fixed
    z axis with the degeneracy flag set.
    """
    r = np.asarray(r, dtype=float)
    g = g_axis.vector
    cross = np.array(
        [
            g[1] * r[2] - g[2] * r[1],
            g[2] * r[0] - g[0] * r[2],
            g[0] * r[1] - g[1] * r[0],
        ]
    )
    norm = float(np.sqrt(cross[0] ** 2 + cross[1] ** 2 + cross[2] ** 2))
    if norm < DEGENERACY_CUTOFF:
        return AxisChoice(PauliAxis.z(), True)
    return AxisChoice(PauliAxis(cross / norm), False)


def plan_block(
    block_index: int,
    phi_est: float,
    rho_est: QubitState,
    cfg: SimConfig,
    meas_params: tuple[float, float],
    *,
    latency_steps: int = 0,
    prev_axis: Optional[PauliAxis] = None,
) -> MeasurementSchedule:
    """Plan one block of measurement axes.

    Block 0 is the static z-axis schedule.  For later blocks the mean
    trajectory is integrated from ``rho_est`` with phase ``phi_est`` and the
    axis at each step is the purification axis of the current mean state.
    The first ``latency_steps`` steps of a re-planned block keep
    ``prev_axis`` (feedback-loop delay), during which the mean state is
    advanced under that held axis.
    """
    kappa, eta = meas_params
    m = cfg.steps_per_block
    if block_index == 0:
        axes = np.tile(np.array([0.0, 0.0, 1.0]), (m, 1))
        return MeasurementSchedule(axes=axes, kappa=kappa, eta=eta)
    if latency_steps < 0:
        raise ValidationError("latency_steps must be >= 0")
    if latency_steps > 0 and prev_axis is None:
        raise ValidationError("latency_steps > 0 requires the previous block's axis")
    stability_guard(cfg.dt, kappa, cfg.noise, phi_est)
    prev = prev_axis.vector if prev_axis is not None else np.array([0.0, 0.0, 1.0])
    axes, flags, mean_states, bad = kernels.plan_axes(
        rho_est.bloch,
        m,
        kappa,
        phi_est,
        cfg.g_axis.vector,
        cfg.noise.bloch_decay_coeffs(),
        cfg.dt,
        int(latency_steps),
        prev,
    )
    if bad >= 0:
        raise NonPhysicalDriftError(
            f"planning mean path left the Bloch ball at step {bad}", step=int(bad)
        )
    return MeasurementSchedule(
        axes=axes,
        kappa=kappa,
        eta=eta,
        degenerate=flags.astype(bool),
        planned_mean=mean_states,
        latency_steps=int(latency_steps),
    )
