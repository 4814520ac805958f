"""The self-stabilizing measurement loop.

Each block: plan a measurement schedule from the controller's belief
(static z axis on block 0, rapid-purification axes afterwards), simulate
the true conditional trajectory under the hidden phase, assimilate the
record into the hypothesis bank, re-estimate.  The loop stops when the
posterior standard deviation falls below the tolerance or after a fixed
number of blocks.

The controller half (planning + filtering) sees only the record and its
own state; the hidden phase enters the trajectory simulation alone.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    PauliAxis,
    QubitState,
    StabqubitError,
    bloch_to_state,
)
from .engine import (
    SimConfig,
    TrajectoryRecord,
    ValidationError,
    derive_rng,
    simulate_block,
    stability_guard,
)
from .feedback import MeasurementSchedule, plan_block
from .filtering import (
    HypothesisBank,
    PhaseEstimate,
    PhaseGrid,
    assimilate_record,
    estimate,
    init_bank,
    mean_state,
)

__all__ = [
    "ProtocolConfig",
    "BlockResult",
    "ProtocolResult",
    "TrajectoryStats",
    "EnsembleSummary",
    "run",
    "run_ensemble",
]

TERMINATION_TOLERANCE = "tolerance_reached"
TERMINATION_MAX_BLOCKS = "max_blocks"


@dataclass(frozen=True)
class ProtocolConfig:
    """Everything a protocol run needs besides the master seed."""

    sim: SimConfig
    grid: PhaseGrid
    kappa: float
    eta: float = 1.0
    epsilon: float = 0.2
    max_blocks: int = 5
    latency_steps: int = 0
    init_bloch: tuple[float, float, float] = (0.0, 1.0, 0.0)

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValidationError("stopping tolerance epsilon must be > 0")
        if self.max_blocks < 1:
            raise ValidationError("max_blocks must be >= 1")
        if self.latency_steps < 0:
            raise ValidationError("latency_steps must be >= 0")
        if self.latency_steps >= self.sim.steps_per_block:
            raise ValidationError("latency_steps must be smaller than the block length")
        stability_guard(self.sim.dt, self.kappa, self.sim.noise, self.sim.phi_true)
        if not self.grid.contains(self.sim.phi_true):
            warnings.warn(
                f"phi_true={self.sim.phi_true} lies outside the grid support "
                f"[{self.grid.phi_min}, {self.grid.phi_max}]; the estimate cannot converge to it",
                stacklevel=2,
            )
        bloch_to_state(np.asarray(self.init_bloch, dtype=float))  # validates

    @property
    def block_time(self) -> float:
        return self.sim.steps_per_block * self.sim.dt


@dataclass
class BlockResult:
    """Per-block outcome: estimate after assimilating the block's record."""

    index: int
    phi_est: float
    variance: float
    purity: np.ndarray            # true conditional tr(rho^2) per step
    belief_purity: float          # purity of the controller's mean state
    n_degenerate: int             # fallback-axis steps in the schedule
    schedule: Optional[MeasurementSchedule] = None
    record: Optional[TrajectoryRecord] = None

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))

    @property
    def end_purity(self) -> float:
        return float(self.purity[-1])

    @property
    def median_purity(self) -> float:
        return float(np.median(self.purity))


@dataclass
class ProtocolResult:
    """Outcome of one full protocol run."""

    blocks: list[BlockResult]
    termination_reason: str
    final: PhaseEstimate
    phi_true: float
    master_seed: Optional[int]
    bank: Optional[HypothesisBank] = None

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def blocks_to_tolerance(self, epsilon: float) -> float:
        """1-based index of the first block with posterior std < epsilon (inf if none)."""
        for blk in self.blocks:
            if blk.std < epsilon:
                return float(blk.index + 1)
        return float("inf")

    def to_dict(self) -> dict:
        return {
            "phi_true": self.phi_true,
            "master_seed": self.master_seed,
            "termination_reason": self.termination_reason,
            "n_blocks": self.n_blocks,
            "final": {"phi_est": self.final.phi_est, "variance": self.final.variance,
                      "std": self.final.std},
            "blocks": [
                {
                    "index": blk.index,
                    "phi_est": blk.phi_est,
                    "variance": blk.variance,
                    "std": blk.std,
                    "end_purity": blk.end_purity,
                    "median_purity": blk.median_purity,
                    "belief_purity": blk.belief_purity,
                    "n_degenerate_axes": blk.n_degenerate,
                }
                for blk in self.blocks
            ],
        }


def _bloch_purity(states: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.sum(states * states, axis=1))


def run(
    cfg: ProtocolConfig,
    master_seed,
    *,
    keep_records: bool = True,
    keep_bank: bool = False,
) -> ProtocolResult:
    """Run the stabilization loop for one trajectory.

    ``master_seed`` seeds the trajectory noise (int, SeedSequence or
    Generator).  The filter and planner never see cfg.sim.phi_true; they
    work from the record alone.  Set ``keep_records=False`` to drop the
    per-block records and schedules (ensemble mode).
    """
    rng = (
        master_seed
        if isinstance(master_seed, np.random.Generator)
        else np.random.Generator(np.random.PCG64(master_seed))
    )
    seed_repr = master_seed if isinstance(master_seed, int) else None

    rho_true = bloch_to_state(np.asarray(cfg.init_bloch, dtype=float))
    bank = init_bank(cfg.grid, rho_true)
    blocks: list[BlockResult] = []
    termination = TERMINATION_MAX_BLOCKS
    prev_axis: Optional[PauliAxis] = None
    phi_est = 0.5 * (cfg.grid.phi_min + cfg.grid.phi_max)
    t0 = 0.0

    for b in range(cfg.max_blocks):
        try:
            schedule = plan_block(
                b,
                phi_est,
                mean_state(bank),
                cfg.sim,
                (cfg.kappa, cfg.eta),
                latency_steps=cfg.latency_steps if b > 0 else 0,
                prev_axis=prev_axis,
            )
            rho_true, record = simulate_block(rho_true, schedule, cfg.sim, rng, t0=t0)
            assimilate_record(
                bank, record, cfg.kappa, cfg.eta, cfg.sim.noise, cfg.sim.g_axis, cfg.sim.dt
            )
        except StabqubitError as err:
            if getattr(err, "block", None) is None:
                err.block = b
            raise
        est = estimate(bank)
        phi_est = est.phi_est
        blocks.append(
            BlockResult(
                index=b,
                phi_est=est.phi_est,
                variance=est.variance,
                purity=_bloch_purity(record.states),
                belief_purity=mean_state(bank).purity,
                n_degenerate=int(schedule.degenerate.sum()),
                schedule=schedule if keep_records else None,
                record=record if keep_records else None,
            )
        )
        prev_axis = PauliAxis(schedule.axes[-1])
        t0 += cfg.block_time
        if est.std < cfg.epsilon:
            termination = TERMINATION_TOLERANCE
            break

    return ProtocolResult(
        blocks=blocks,
        termination_reason=termination,
        final=PhaseEstimate(blocks[-1].phi_est, blocks[-1].variance),
        phi_true=cfg.sim.phi_true,
        master_seed=seed_repr,
        bank=bank if keep_bank else None,
    )


@dataclass
class TrajectoryStats:
    """Light per-trajectory summary used by ensembles."""

    phi_est: np.ndarray       # (blocks_run,)
    std: np.ndarray
    end_purity: np.ndarray
    median_purity: np.ndarray
    termination_reason: str


@dataclass
class EnsembleSummary:
    """Ensemble statistics over independent protocol runs.

    Per-block arrays have one column per block up to max_blocks; runs that
    stopped early carry their final values forward (documented convention,
    so "the estimate after <= b blocks" is well defined for every run).
    """

    phi_true: float
    epsilon: float
    n_traj: int
    max_blocks: int
    phi_est: np.ndarray       # (n_ok, max_blocks)
    std: np.ndarray
    end_purity: np.ndarray
    median_purity: np.ndarray
    blocks_run: np.ndarray    # (n_ok,)
    blocks_to_tol: np.ndarray  # (n_ok,), 1-based, inf when never reached
    failures: list[tuple[int, str]] = field(default_factory=list)

    @property
    def n_failed(self) -> int:
        return len(self.failures)

    def abs_error(self, block: int) -> np.ndarray:
        return np.abs(self.phi_est[:, block] - self.phi_true)

    def coverage(self, block: int, z: float = 3.0) -> float:
        """Fraction of runs with |phi_est - phi_true| <= z * posterior std."""
        ok = self.abs_error(block) <= z * self.std[:, block]
        denom = self.phi_est.shape[0] + self.n_failed
        return float(ok.sum()) / denom

    def median_blocks_to_tolerance(self) -> float:
        vals = self.blocks_to_tol
        if self.n_failed:
            vals = np.concatenate([vals, np.full(self.n_failed, np.inf)])
        return float(np.median(vals))

    def to_dict(self) -> dict:
        per_block = []
        for b in range(self.max_blocks):
            err = self.abs_error(b)
            per_block.append(
                {
                    "block": b,
                    "median_abs_error": float(np.median(err)),
                    "q90_abs_error": float(np.quantile(err, 0.9)),
                    "median_std": float(np.median(self.std[:, b])),
                    "median_end_purity": float(np.median(self.end_purity[:, b])),
                    "median_block_purity": float(np.median(self.median_purity[:, b])),
                    "coverage_3sigma": self.coverage(b),
                }
            )
        mb = self.median_blocks_to_tolerance()
        return {
            "phi_true": self.phi_true,
            "epsilon": self.epsilon,
            "n_traj": self.n_traj,
            "n_failed": self.n_failed,
            "median_blocks_to_tolerance": (mb if np.isfinite(mb) else None),
            "per_block": per_block,
        }


def _run_stats(cfg: ProtocolConfig, master_seed: int, index: int) -> TrajectoryStats:
    result = run(cfg, derive_rng(master_seed, index), keep_records=False)
    return TrajectoryStats(
        phi_est=np.array([blk.phi_est for blk in result.blocks]),
        std=np.array([blk.std for blk in result.blocks]),
        end_purity=np.array([blk.end_purity for blk in result.blocks]),
        median_purity=np.array([blk.median_purity for blk in result.blocks]),
        termination_reason=result.termination_reason,
    )


def _pad_forward(rows: list[np.ndarray], width: int) -> np.ndarray:
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        out[i, : len(row)] = row
        out[i, len(row):] = row[-1]
    return out


def run_ensemble(
    cfg: ProtocolConfig,
    n_traj: int,
    master_seed: int,
    *,
    n_jobs: int = 1,
) -> EnsembleSummary:
    """Run n_traj independent protocols (trajectory i seeded from
    (master_seed, i)) and aggregate per-block statistics.

    Individual trajectory failures (filter divergence, non-physical drift)
    are collected rather than raised; they count as non-converged in the
    blocks-to-tolerance statistics.  Results are deterministic for a given
    master_seed, independent of n_jobs.
    """
    if n_traj < 1:
        raise ValidationError("ensemble needs at least one trajectory")
    stats: list[Optional[TrajectoryStats]] = [None] * n_traj
    failures: list[tuple[int, str]] = []

    if n_jobs == 1:
        for i in range(n_traj):
            try:
                stats[i] = _run_stats(cfg, master_seed, i)
            except StabqubitError as err:
                failures.append((i, f"{type(err).__name__}: {err}"))
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            futures = [pool.submit(_run_stats, cfg, master_seed, i) for i in range(n_traj)]
            for i, fut in enumerate(futures):
                try:
                    stats[i] = fut.result()
                except StabqubitError as err:
                    failures.append((i, f"{type(err).__name__}: {err}"))

    good = [s for s in stats if s is not None]
    if not good:
        raise StabqubitError(f"all {n_traj} trajectories failed; first: {failures[0][1]}")

    blocks_run = np.array([len(s.phi_est) for s in good])
    std = _pad_forward([s.std for s in good], cfg.max_blocks)
    btt = np.full(len(good), np.inf)
    for j, s in enumerate(good):
        hit = np.nonzero(s.std < cfg.epsilon)[0]
        if hit.size:
            btt[j] = hit[0] + 1.0

    return EnsembleSummary(
        phi_true=cfg.sim.phi_true,
        epsilon=cfg.epsilon,
        n_traj=n_traj,
        max_blocks=cfg.max_blocks,
        phi_est=_pad_forward([s.phi_est for s in good], cfg.max_blocks),
        std=std,
        end_purity=_pad_forward([s.end_purity for s in good], cfg.max_blocks),
        median_purity=_pad_forward([s.median_purity for s in good], cfg.max_blocks),
        blocks_run=blocks_run,
        blocks_to_tol=btt,
        failures=failures,
    )
