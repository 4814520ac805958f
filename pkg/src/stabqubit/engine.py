"""Ito integration of the conditional qubit evolution and its record.

The conditional state under continuous measurement of c = sqrt(kappa/2) X
(X = n.sigma) evolves as

    d rho = -i [phi G, rho] dt + (noise Lindblad terms) dt
            + D[c] rho dt + sqrt(eta) H[c] rho dW,

with record increments dy = <c + c+>/2 dt + dW/sqrt(4 eta).  Steps use
Euler-Maruyama in Bloch coordinates (see ``kernels.pyref`` for the exact
update and the radial clamp policy).  Wiener increments are injected by the
caller (``step``) or drawn from a caller-supplied generator
(``simulate_block``), so a record can be replayed exactly through the
Bayesian filter.

Ensemble seeding: trajectory ``i`` of an ensemble uses the generator
returned by ``derive_rng(master_seed, i)``, a stable hash of the pair.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .core import (
    NoiseModel,
    NonPhysicalDriftError,
    PauliAxis,
    QubitState,
    bloch_to_state,
)

__all__ = [
    "MeasurementOp",
    "SimConfig",
    "TrajectoryRecord",
    "ValidationError",
    "stability_guard",
    "default_dt",
    "derive_rng",
    "step",
    "simulate_block",
    "simulate_block_tracking",
    "mean_evolution",
    "ensemble_mean_bloch",
]

STABILITY_LIMIT = 0.05  # hard guard on dt * max rate
RECORD_CSV_COLUMNS = ("t", "dy", "axis_x", "axis_y", "axis_z")


class ValidationError(ValueError):
    """A configuration value violates one of its documented invariants."""


@dataclass(frozen=True)
class MeasurementOp:
    """Measurement axis, strength and detector efficiency.

    Operator view: c = sqrt(kappa/2) * (axis . sigma).
    """

    axis: PauliAxis
    kappa: float
    eta: float = 1.0

    def __post_init__(self):
        if self.kappa < 0.0:
            raise ValidationError("measurement strength kappa must be >= 0")
        if not 0.0 < self.eta <= 1.0:
            raise ValidationError("detector efficiency eta must be in (0, 1]")

    @property
    def operator(self) -> np.ndarray:
        return math.sqrt(self.kappa / 2.0) * self.axis.operator


@dataclass(frozen=True)
class SimConfig:
    """Static simulation parameters shared by every step of a run."""

    phi_true: float
    noise: NoiseModel
    dt: float
    steps_per_block: int
    g_axis: PauliAxis = field(default_factory=PauliAxis.x)
    rng_seed: int = 0

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValidationError("time step dt must be positive")
        if self.steps_per_block < 1:
            raise ValidationError("steps_per_block must be >= 1")
        # kappa joins the guard at the point of use; check the rates known here.
        stability_guard(self.dt, 0.0, self.noise, self.phi_true)


def stability_guard(dt: float, kappa: float, noise: NoiseModel, phi: float) -> None:
    """Enforce dt * max(kappa, noise rate, |phi|) <= 0.05."""
    rate = max(kappa, noise.max_rate(), abs(phi))
    if dt * rate > STABILITY_LIMIT:
        raise ValidationError(
            f"stability guard violated: dt*max_rate = {dt * rate:.3g} > "
            f"{STABILITY_LIMIT} (dt={dt}, max rate={rate}); reduce dt"
        )


def default_dt(kappa: float, noise: NoiseModel, phi: float) -> float:
    """Time step satisfying (kappa + gamma*(2 nbar + 1) + |phi|) * dt <= 0.01."""
    if noise.kind == "thermal":
        gtot = noise.gamma * (2.0 * noise.nbar + 1.0)
    else:
        gtot = noise.gamma_x + noise.gamma_y + noise.gamma_z
    total = kappa + gtot + abs(phi)
    if total <= 0.0:
        return 1e-3
    return 0.01 / total


def derive_rng(master_seed: int, index: int) -> np.random.Generator:
    """Deterministic per-trajectory generator: hash of (master_seed, index)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([master_seed, index])))


def _as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.Generator(np.random.PCG64(seed_or_rng))


@dataclass
class TrajectoryRecord:
    """One block's measurement record with the axes that produced it.

    ``times[i]`` is the time at the end of step i (uniform spacing dt);
    ``dy[i]`` is the record increment accrued over that step and
    ``states[i]`` the post-step conditional Bloch vector (optional).
    """

    times: np.ndarray
    dy: np.ndarray
    axes: np.ndarray
    states: Optional[np.ndarray] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.dy = np.asarray(self.dy, dtype=float)
        self.axes = np.asarray(self.axes, dtype=float)
        n = len(self.times)
        if len(self.dy) != n or self.axes.shape != (n, 3):
            raise ValidationError("record arrays must share one length")
        if self.states is not None:
            self.states = np.asarray(self.states, dtype=float)
            if self.states.shape != (n, 3):
                raise ValidationError("state snapshots must match the record length")
        if n >= 2:
            gaps = np.diff(self.times)
            if np.any(gaps <= 0) or abs(gaps.max() - gaps.min()) > 1e-9 * gaps.max():
                raise ValidationError("record times must increase with uniform spacing")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dt(self) -> float:
        if len(self.times) >= 2:
            return float(self.times[1] - self.times[0])
        raise ValueError("dt is undefined for records shorter than two steps")

    def qubit_states(self) -> list[QubitState]:
        if self.states is None:
            raise ValueError("record was built without state snapshots")
        return [bloch_to_state(r) for r in self.states]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(RECORD_CSV_COLUMNS)
            for i in range(len(self)):
                writer.writerow(
                    [
                        repr(float(self.times[i])),
                        repr(float(self.dy[i])),
                        repr(float(self.axes[i, 0])),
                        repr(float(self.axes[i, 1])),
                        repr(float(self.axes[i, 2])),
                    ]
                )

    @classmethod
    def from_csv(cls, path) -> "TrajectoryRecord":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.size == 0:
            return cls(np.empty(0), np.empty(0), np.empty((0, 3)))
        return cls(times=data[:, 0], dy=data[:, 1], axes=data[:, 2:5])

    def to_npz(self, path) -> None:
        payload = {"times": self.times, "dy": self.dy, "axes": self.axes}
        if self.states is not None:
            payload["states"] = self.states
        np.savez(path, **payload)

    @classmethod
    def from_npz(cls, path) -> "TrajectoryRecord":
        with np.load(path) as data:
            return cls(
                times=data["times"],
                dy=data["dy"],
                axes=data["axes"],
                states=data["states"] if "states" in data.files else None,
            )


def _empty_record(t0: float) -> TrajectoryRecord:
    return TrajectoryRecord(np.empty(0), np.empty(0), np.empty((0, 3)), np.empty((0, 3)))


def _schedule_arrays(schedule) -> tuple[np.ndarray, float, float]:
    """Accept a MeasurementSchedule-like object or a sequence of MeasurementOp."""
    if hasattr(schedule, "axes") and hasattr(schedule, "kappa"):
        axes = np.ascontiguousarray(schedule.axes, dtype=float)
        return axes, float(schedule.kappa), float(schedule.eta)
    ops: Sequence[MeasurementOp] = list(schedule)
    if not ops:
        return np.empty((0, 3)), 0.0, 1.0
    kappas = {op.kappa for op in ops}
    etas = {op.eta for op in ops}
    if len(kappas) > 1 or len(etas) > 1:
        raise ValidationError("a block schedule must share one kappa and one eta")
    axes = np.ascontiguousarray([op.axis.vector for op in ops], dtype=float)
    return axes, ops[0].kappa, ops[0].eta


def step(
    rho: QubitState, meas: MeasurementOp, cfg: SimConfig, dW: float
) -> tuple[QubitState, float]:
    """Advance one Ito step with a caller-supplied Wiener increment.

    Returns the renormalized post-step state and the record increment
    dy = <c + c+>/2 dt + dW/sqrt(4 eta).  Raises NonPhysicalDriftError if
    the step leaves the Bloch ball beyond the clamp threshold.
    """
    stability_guard(cfg.dt, meas.kappa, cfg.noise, cfg.phi_true)
    axes = meas.axis.vector.reshape(1, 3)
    dy, states, bad = kernels.sim_block(
        rho.bloch,
        axes,
        np.array([float(dW)]),
        meas.kappa,
        meas.eta,
        cfg.phi_true,
        cfg.g_axis.vector,
        cfg.noise.bloch_decay_coeffs(),
        cfg.dt,
    )
    if bad >= 0:
        raise NonPhysicalDriftError(
            "step left the Bloch ball beyond the clamp threshold "
            f"(dt={cfg.dt} too large for the configured rates)",
            step=int(bad),
        )
    return bloch_to_state(states[0]), float(dy[0])


def simulate_block(
    rho0: QubitState,
    schedule,
    cfg: SimConfig,
    rng,
    *,
    t0: float = 0.0,
    keep_states: bool = True,
) -> tuple[QubitState, TrajectoryRecord]:
    """Simulate one block of conditional evolution under a fixed schedule.

    ``schedule`` is a MeasurementSchedule or a per-step sequence of
    MeasurementOp (one kappa/eta per block).  Wiener increments are drawn
    from ``rng`` (a Generator or a seed); identical inputs and seed give a
    bit-identical record.
    """
    axes, kappa, eta = _schedule_arrays(schedule)
    m = axes.shape[0]
    if m == 0:
        return rho0, _empty_record(t0)
    stability_guard(cfg.dt, kappa, cfg.noise, cfg.phi_true)
    rng = _as_rng(rng)
    dw = rng.standard_normal(m) * math.sqrt(cfg.dt)
    dy, states, bad = kernels.sim_block(
        rho0.bloch,
        axes,
        dw,
        kappa,
        eta,
        cfg.phi_true,
        cfg.g_axis.vector,
        cfg.noise.bloch_decay_coeffs(),
        cfg.dt,
    )
    if bad >= 0:
        raise NonPhysicalDriftError(
            f"trajectory left the Bloch ball at step {bad} "
            f"(dt={cfg.dt} too large for the configured rates)",
            step=int(bad),
        )
    times = t0 + cfg.dt * np.arange(1, m + 1)
    record = TrajectoryRecord(times, dy, axes, states if keep_states else None)
    return bloch_to_state(states[-1]), record


def simulate_block_tracking(
    rho0: QubitState,
    n_steps: int,
    meas_kappa: float,
    meas_eta: float,
    cfg: SimConfig,
    rng,
    *,
    t0: float = 0.0,
) -> tuple[QubitState, TrajectoryRecord, np.ndarray]:
    """Conditional evolution with the rapid-purification axis re-chosen each step.

    The measurement axis tracks normalize(g x r) of the current conditional
    state (z-axis fallback when degenerate), which keeps the measurement
    exactly perpendicular to the state and the generator.  Returns the final
    state, the record (with per-step axes), and the degeneracy flags.
    """
    if n_steps == 0:
        return rho0, _empty_record(t0), np.zeros(0, dtype=np.uint8)
    stability_guard(cfg.dt, meas_kappa, cfg.noise, cfg.phi_true)
    rng = _as_rng(rng)
    dw = rng.standard_normal(n_steps) * math.sqrt(cfg.dt)
    dy, axes, states, flags, bad = kernels.sim_block_tracking(
        rho0.bloch,
        dw,
        meas_kappa,
        meas_eta,
        cfg.phi_true,
        cfg.g_axis.vector,
        cfg.noise.bloch_decay_coeffs(),
        cfg.dt,
    )
    if bad >= 0:
        raise NonPhysicalDriftError(
            f"tracking trajectory left the Bloch ball at step {bad}", step=int(bad)
        )
    times = t0 + cfg.dt * np.arange(1, n_steps + 1)
    return (
        bloch_to_state(states[-1]),
        TrajectoryRecord(times, dy, axes, states),
        flags,
    )


def mean_evolution(rho0: QubitState, schedule, phi: float, cfg: SimConfig) -> list[QubitState]:
    """Deterministic ensemble-average path under a fixed schedule.

    Integrates the evolution with the stochastic term dropped, using ``phi``
    (typically an estimate) instead of cfg.phi_true.  Returns the post-step
    states, one per schedule entry.
    """
    axes, kappa, _ = _schedule_arrays(schedule)
    if axes.shape[0] == 0:
        return []
    stability_guard(cfg.dt, kappa, cfg.noise, phi)
    states, bad = kernels.mean_path(
        rho0.bloch,
        axes,
        kappa,
        phi,
        cfg.g_axis.vector,
        cfg.noise.bloch_decay_coeffs(),
        cfg.dt,
    )
    if bad >= 0:
        raise NonPhysicalDriftError(
            f"mean path left the Bloch ball at step {bad}", step=int(bad)
        )
    return [bloch_to_state(r) for r in states]


def mean_evolution_bloch(rho0: QubitState, schedule, phi: float, cfg: SimConfig) -> np.ndarray:
    """Like :func:`mean_evolution` but returning the raw (m, 3) Bloch path."""
    axes, kappa, _ = _schedule_arrays(schedule)
    if axes.shape[0] == 0:
        return np.empty((0, 3))
    stability_guard(cfg.dt, kappa, cfg.noise, phi)
    states, bad = kernels.mean_path(
        rho0.bloch,
        axes,
        kappa,
        phi,
        cfg.g_axis.vector,
        cfg.noise.bloch_decay_coeffs(),
        cfg.dt,
    )
    if bad >= 0:
        raise NonPhysicalDriftError(
            f"mean path left the Bloch ball at step {bad}", step=int(bad)
        )
    return states


def ensemble_mean_bloch(
    rho0: QubitState,
    schedule,
    cfg: SimConfig,
    n_traj: int,
    master_seed: int,
    checkpoints: Sequence[int],
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo mean and standard error of the Bloch vector.

    Runs ``n_traj`` independent conditional trajectories (trajectory i is
    seeded with derive_rng(master_seed, i)) and accumulates the Bloch vector
    at the given step indices (0-based, referring to post-step states).
    Returns (mean, stderr), each of shape (len(checkpoints), 3).
    """
    axes, kappa, eta = _schedule_arrays(schedule)
    m = axes.shape[0]
    idx = np.asarray(checkpoints, dtype=int)
    if np.any(idx < 0) or np.any(idx >= m):
        raise ValueError("checkpoints must be valid step indices")
    stability_guard(cfg.dt, kappa, cfg.noise, cfg.phi_true)
    noise = cfg.noise.bloch_decay_coeffs()
    g = cfg.g_axis.vector
    r0 = rho0.bloch
    sqrt_dt = math.sqrt(cfg.dt)

    total = np.zeros((len(idx), 3))
    total_sq = np.zeros((len(idx), 3))
    for i in range(n_traj):
        dw = derive_rng(master_seed, i).standard_normal(m) * sqrt_dt
        _, states, bad = kernels.sim_block(r0, axes, dw, kappa, eta, cfg.phi_true, g, noise, cfg.dt)
        if bad >= 0:
            raise NonPhysicalDriftError(
                f"trajectory {i} left the Bloch ball at step {bad}", step=int(bad)
            )
        picked = states[idx]
        total += picked
        total_sq += picked * picked
    mean = total / n_traj
    var = np.maximum(total_sq / n_traj - mean * mean, 0.0)
    stderr = np.sqrt(var / n_traj)
    return mean, stderr
