"""Command-line front end: config parsing, subcommands, reproducible output.

Config files are TOML (JSON accepted with the same structure), with one
section per concern; every omitted key takes a documented default and the
fully resolved config is echoed into the run manifest.  All rates are in
units of the measurement strength kappa (kappa = 1 by convention).

Output layout for file-producing subcommands::

    <out-dir>/manifest.json     config snapshot, seed, version, wall clock
    <out-dir>/results/...       result files (deterministic bytes given seed)

The manifest is written before any result file; everything under results/
is byte-reproducible from the manifest's config + seed.  Wall-clock fields
live only in the manifest, under the "wallclock" key.

Exit codes: 0 ok, 2 config/usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import platform
import socket
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - version dependent
    import tomli as tomllib

from . import __version__
from .core import NoiseModel, PauliAxis, StabqubitError, bloch_to_state, qfi
from .engine import (
    SimConfig,
    ValidationError,
    default_dt,
    simulate_block_tracking,
)
from .filtering import PhaseGrid, posterior
from .protocol import ProtocolConfig, ProtocolResult, run, run_ensemble

__all__ = ["ConfigError", "parse_config", "build_manifest", "run_from_manifest", "main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

DEFAULT_SEED = 2024


class ConfigError(ValueError):
    """A config file could not be parsed; carries file/key context."""


_SCHEMA = {
    "sim": {"phi_true", "dt", "steps_per_block", "g_axis", "seed"},
    "noise": {"model", "gamma", "nbar", "gamma_x", "gamma_y", "gamma_z"},
    "measurement": {"kappa", "eta"},
    "grid": {"phi_min", "phi_max", "n_points"},
    "protocol": {"epsilon", "max_blocks", "latency_steps", "init_bloch"},
}


def _load_config_dict(path: Path) -> dict:
    text = path.read_bytes()
    if path.suffix.lower() == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: line {err.lineno}: {err.msg}") from None
    try:
        return tomllib.loads(text.decode("utf-8"))
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"{path}: {err}") from None


def _check_keys(raw: dict, path: Path) -> None:
    for section, content in raw.items():
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        if not isinstance(content, dict):
            raise ConfigError(f"{path}: section [{section}] must be a table")
        for key in content:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{path}: unknown key '{key}' in section [{section}]")


def resolve_config(raw: dict, origin: str = "<config>") -> tuple[ProtocolConfig, int, dict]:
    """Apply defaults and build a validated ProtocolConfig.

    Returns (config, master_seed, snapshot) where snapshot is the fully
    resolved key/value tree echoed into the manifest.
    """
    sim_raw = dict(raw.get("sim", {}))
    noise_raw = dict(raw.get("noise", {}))
    meas_raw = dict(raw.get("measurement", {}))
    grid_raw = dict(raw.get("grid", {}))
    proto_raw = dict(raw.get("protocol", {}))

    model = noise_raw.get("model", "thermal")
    try:
        if model == "thermal":
            noise = NoiseModel.thermal(
                gamma=float(noise_raw.get("gamma", 0.01)),
                nbar=float(noise_raw.get("nbar", 0.1)),
            )
        elif model == "generic":
            noise = NoiseModel.generic(
                gamma_x=float(noise_raw.get("gamma_x", 0.0)),
                gamma_y=float(noise_raw.get("gamma_y", 0.0)),
                gamma_z=float(noise_raw.get("gamma_z", 0.0)),
            )
        else:
            raise ConfigError(f"{origin}: noise.model must be 'thermal' or 'generic'")

        kappa = float(meas_raw.get("kappa", 1.0))
        eta = float(meas_raw.get("eta", 1.0))
        phi_true = float(sim_raw.get("phi_true", 0.3))
        g_axis = PauliAxis.from_name(str(sim_raw.get("g_axis", "x")))
        dt = sim_raw.get("dt")
        if dt is None:
            dt = default_dt(kappa, noise, phi_true)
        dt = float(dt)
        seed = int(sim_raw.get("seed", DEFAULT_SEED))

        sim = SimConfig(
            phi_true=phi_true,
            noise=noise,
            dt=dt,
            steps_per_block=int(sim_raw.get("steps_per_block", 2000)),
            g_axis=g_axis,
            rng_seed=seed,
        )
        grid = PhaseGrid(
            phi_min=float(grid_raw.get("phi_min", 0.0)),
            phi_max=float(grid_raw.get("phi_max", 1.0)),
            n_points=int(grid_raw.get("n_points", 512)),
        )
        init_bloch = proto_raw.get("init_bloch", [0.0, 1.0, 0.0])
        if not (isinstance(init_bloch, (list, tuple)) and len(init_bloch) == 3):
            raise ConfigError(f"{origin}: protocol.init_bloch must be a 3-vector")
        cfg = ProtocolConfig(
            sim=sim,
            grid=grid,
            kappa=kappa,
            eta=eta,
            epsilon=float(proto_raw.get("epsilon", 0.2)),
            max_blocks=int(proto_raw.get("max_blocks", 5)),
            latency_steps=int(proto_raw.get("latency_steps", 0)),
            init_bloch=tuple(float(v) for v in init_bloch),
        )
    except (TypeError, ValueError) as err:
        if isinstance(err, (ConfigError, ValidationError)):
            raise
        raise ConfigError(f"{origin}: {err}") from None

    snapshot = {
        "sim": {
            "phi_true": sim.phi_true,
            "dt": sim.dt,
            "steps_per_block": sim.steps_per_block,
            "g_axis": str(sim_raw.get("g_axis", "x")),
            "seed": seed,
        },
        "noise": (
            {"model": "thermal", "gamma": noise.gamma, "nbar": noise.nbar}
            if noise.kind == "thermal"
            else {
                "model": "generic",
                "gamma_x": noise.gamma_x,
                "gamma_y": noise.gamma_y,
                "gamma_z": noise.gamma_z,
            }
        ),
        "measurement": {"kappa": cfg.kappa, "eta": cfg.eta},
        "grid": {
            "phi_min": grid.phi_min,
            "phi_max": grid.phi_max,
            "n_points": grid.n_points,
        },
        "protocol": {
            "epsilon": cfg.epsilon,
            "max_blocks": cfg.max_blocks,
            "latency_steps": cfg.latency_steps,
            "init_bloch": list(cfg.init_bloch),
        },
    }
    return cfg, seed, snapshot


def parse_config(path) -> tuple[ProtocolConfig, int, dict]:
    """Parse and validate a TOML or JSON config file.

    Unknown sections or keys are rejected (ConfigError); invariant
    violations raise ValidationError naming the violated guard.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    raw = _load_config_dict(path)
    _check_keys(raw, path)
    return resolve_config(raw, origin=str(path))


# ---------------------------------------------------------------------------
# Output writing


def _json_dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def build_manifest(snapshot: dict, seed: int, out_dir: Path, outputs: list[str], command: str) -> dict:
    return {
        "artifact": "stabqubit",
        "version": __version__,
        "command": command,
        "master_seed": seed,
        "config": snapshot,
        "outputs": sorted(outputs),
        "wallclock": {
            "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "hostname": socket.gethostname(),
            "platform": platform.platform(),
            "python": platform.python_version(),
        },
    }


def _prepare_out_dir(out_dir: Path) -> Path:
    results = out_dir / "results"
    results.mkdir(parents=True, exist_ok=True)
    return results


def write_run_outputs(result: ProtocolResult, results_dir: Path, fmt: str) -> list[str]:
    """Write a single run's result files; returns the relative paths."""
    written = []
    doc = result.to_dict()
    if fmt == "json":
        doc["record"] = [
            {
                "block": blk.index,
                "t": blk.record.times.tolist(),
                "dy": blk.record.dy.tolist(),
                "axes": blk.record.axes.tolist(),
            }
            for blk in result.blocks
        ]
        doc["posterior"] = _posterior_rows(result)
        _json_dump(doc, results_dir / "result.json")
        return ["results/result.json"]

    _json_dump(doc, results_dir / "result.json")
    written.append("results/result.json")

    rows = []
    for blk in result.blocks:
        rec = blk.record
        for i in range(len(rec)):
            rows.append((rec.times[i], rec.dy[i], rec.axes[i, 0], rec.axes[i, 1], rec.axes[i, 2]))
    _write_csv(results_dir / "record.csv", ("t", "dy", "axis_x", "axis_y", "axis_z"), rows)
    written.append("results/record.csv")

    _write_csv(
        results_dir / "posterior.csv",
        ("block", "phi", "weight"),
        [(b, phi, w) for (b, phi, w) in _posterior_rows(result, as_tuples=True)],
    )
    written.append("results/posterior.csv")

    purity_rows = []
    for blk in result.blocks:
        times = blk.record.times
        for i, p in enumerate(blk.purity):
            purity_rows.append((blk.index, times[i], p))
    _write_csv(results_dir / "purity.csv", ("block", "t", "purity"), purity_rows)
    written.append("results/purity.csv")

    _write_csv(
        results_dir / "summary.csv",
        ("block", "phi_est", "std", "purity_median"),
        [(blk.index, blk.phi_est, blk.std, blk.median_purity) for blk in result.blocks],
    )
    written.append("results/summary.csv")
    return written


def _posterior_rows(result: ProtocolResult, as_tuples: bool = False):
    """Final posterior only is stored per run (one row per grid node per block
    would be redundant: the bank is cumulative, so the last block's posterior
    is the posterior given all data).  Earlier blocks keep their scalar
    summaries in result.json."""
    if result.bank is None:
        return []
    dens = posterior(result.bank)
    w = dens * result.bank.grid.quadrature
    nodes = result.bank.grid.nodes
    last = result.blocks[-1].index
    if as_tuples:
        return [(last, float(nodes[k]), float(w[k])) for k in range(len(nodes))]
    return [{"block": last, "phi": float(nodes[k]), "weight": float(w[k])} for k in range(len(nodes))]


def run_from_manifest(manifest_path, out_dir) -> ProtocolResult:
    """Re-execute the run described by a manifest into a fresh directory.

    Reproduces the original results byte-for-byte (same config, same seed).
    """
    manifest = json.loads(Path(manifest_path).read_text())
    cfg, seed, snapshot = resolve_config(manifest["config"], origin=str(manifest_path))
    out_dir = Path(out_dir)
    results_dir = _prepare_out_dir(out_dir)
    keep_posterior = manifest.get("command", "run") == "run"
    result = run(cfg, seed, keep_bank=keep_posterior)
    fmt = manifest.get("format", "csv")
    outputs = write_run_outputs(result, results_dir, fmt)
    _json_dump(build_manifest(snapshot, seed, out_dir, outputs, manifest.get("command", "run")),
               out_dir / "manifest.json")
    return result


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_run(args) -> int:
    cfg, seed, snapshot = parse_config(args.config)
    if args.seed is not None:
        seed = args.seed
        snapshot["sim"]["seed"] = seed
    out_dir = Path(args.out_dir)
    results_dir = _prepare_out_dir(out_dir)
    manifest = build_manifest(snapshot, seed, out_dir, [], "run")
    manifest["format"] = args.format
    _json_dump(manifest, out_dir / "manifest.json")

    result = run(cfg, seed, keep_bank=True)
    outputs = write_run_outputs(result, results_dir, args.format)

    manifest["outputs"] = sorted(outputs)
    _json_dump(manifest, out_dir / "manifest.json")
    print(
        f"phi_est={result.final.phi_est:.6g} std={result.final.std:.3g} "
        f"blocks={result.n_blocks} ({result.termination_reason})"
    )
    return EXIT_OK


def _cmd_ensemble(args) -> int:
    cfg, seed, snapshot = parse_config(args.config)
    if args.seed is not None:
        seed = args.seed
        snapshot["sim"]["seed"] = seed
    if args.traj < 1:
        raise ConfigError("--traj must be >= 1")
    out_dir = Path(args.out_dir)
    results_dir = _prepare_out_dir(out_dir)
    manifest = build_manifest(snapshot, seed, out_dir, [], "ensemble")
    manifest["format"] = args.format
    manifest["n_traj"] = args.traj
    _json_dump(manifest, out_dir / "manifest.json")

    summary = run_ensemble(cfg, args.traj, seed, n_jobs=args.jobs)
    doc = summary.to_dict()
    _json_dump(doc, results_dir / "ensemble.json")
    outputs = ["results/ensemble.json"]
    if args.format == "csv":
        _write_csv(
            results_dir / "summary.csv",
            ("block", "phi_est", "std", "purity_median"),
            [
                (
                    row["block"],
                    float(np.median(summary.phi_est[:, row["block"]])),
                    row["median_std"],
                    row["median_end_purity"],
                )
                for row in doc["per_block"]
            ],
        )
        outputs.append("results/summary.csv")

    manifest["outputs"] = sorted(outputs)
    _json_dump(manifest, out_dir / "manifest.json")
    mbt = doc["median_blocks_to_tolerance"]
    print(
        f"n={summary.n_traj} failed={summary.n_failed} "
        f"median_blocks_to_tolerance={mbt if mbt is not None else 'never'}"
    )
    return EXIT_OK


def _cmd_qfi(args) -> int:
    r = np.array([float(v) for v in args.bloch.split(",")])
    if r.size != 3:
        raise ConfigError("--bloch needs three comma-separated components")
    if "," in args.g:
        g = PauliAxis(np.array([float(v) for v in args.g.split(",")]))
    else:
        g = PauliAxis.from_name(args.g)
    value = qfi(bloch_to_state(r), g)
    print(f"{value:.12g}")
    return EXIT_OK


def _cmd_purify_demo(args) -> int:
    """Rapid-purification trace: noiseless qubit, axis tracking the state.

    Validates the purification law: with the measurement kept perpendicular
    to the state, the linear entropy decays deterministically at rate
    2 kappa (the record carries no information about the state direction).
    """
    noise = NoiseModel.none()
    kappa, eta = args.kappa, args.eta
    steps = args.steps
    cfg = SimConfig(
        phi_true=args.phi,
        noise=noise,
        dt=args.dt,
        steps_per_block=steps,
        g_axis=PauliAxis.from_name(args.g),
        rng_seed=args.seed,
    )
    r0 = np.array([float(v) for v in args.bloch.split(",")])
    out_dir = Path(args.out_dir)
    results_dir = _prepare_out_dir(out_dir)
    snapshot = {
        "sim": {"phi_true": args.phi, "dt": args.dt, "steps_per_block": steps,
                "g_axis": args.g, "seed": args.seed},
        "noise": {"model": "thermal", "gamma": 0.0, "nbar": 0.0},
        "measurement": {"kappa": kappa, "eta": eta},
        "grid": {"phi_min": 0.0, "phi_max": 1.0, "n_points": 2},
        "protocol": {"epsilon": 1.0, "max_blocks": 1, "latency_steps": 0,
                     "init_bloch": [float(v) for v in r0]},
    }
    manifest = build_manifest(snapshot, args.seed, out_dir, [], "purify-demo")
    _json_dump(manifest, out_dir / "manifest.json")

    _, record, flags = simulate_block_tracking(
        bloch_to_state(r0), steps, kappa, eta, cfg, args.seed
    )
    norms2 = np.sum(record.states * record.states, axis=1)
    s_lin = 0.5 * (1.0 - norms2)
    law = 0.5 * (1.0 - float(r0 @ r0)) * np.exp(-2.0 * kappa * record.times)
    _write_csv(
        results_dir / "purify.csv",
        ("t", "linear_entropy", "law_exponential", "degenerate_axis"),
        [
            (record.times[i], s_lin[i], law[i], int(flags[i]))
            for i in range(len(record))
        ],
    )
    manifest["outputs"] = ["results/purify.csv"]
    _json_dump(manifest, out_dir / "manifest.json")
    print(f"final linear entropy {s_lin[-1]:.3e} (law {law[-1]:.3e})")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stabqubit",
        description="Self-stabilizing phase measurements on a noisy qubit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one protocol trajectory")
    p_run.add_argument("--config", required=True, help="TOML or JSON config file")
    p_run.add_argument("--seed", type=int, default=None, help="override the master seed")
    p_run.add_argument("--out-dir", default="out", help="output directory")
    p_run.add_argument("--format", choices=("csv", "json"), default="csv")
    p_run.set_defaults(func=_cmd_run)

    p_ens = sub.add_parser("ensemble", help="run a Monte Carlo ensemble of protocols")
    p_ens.add_argument("--config", required=True)
    p_ens.add_argument("--seed", type=int, default=None)
    p_ens.add_argument("--traj", type=int, required=True, help="number of trajectories (>= 1)")
    p_ens.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p_ens.add_argument("--out-dir", default="out")
    p_ens.add_argument("--format", choices=("csv", "json"), default="csv")
    p_ens.set_defaults(func=_cmd_ensemble)

    p_qfi = sub.add_parser("qfi", help="quantum Fisher information of a Bloch vector")
    p_qfi.add_argument("--bloch", required=True, help="comma-separated Bloch vector, e.g. 0,0,1")
    p_qfi.add_argument("--g", default="x", help="generator axis: x, y, z, or a 3-vector")
    p_qfi.set_defaults(func=_cmd_qfi)

    p_dem = sub.add_parser(
        "purify-demo", help="noiseless rapid-purification trace (entropy decay law)"
    )
    p_dem.add_argument("--kappa", type=float, default=1.0)
    p_dem.add_argument("--eta", type=float, default=1.0)
    p_dem.add_argument("--phi", type=float, default=0.3)
    p_dem.add_argument("--g", default="x")
    p_dem.add_argument("--bloch", default="0,0,0.5", help="initial Bloch vector")
    p_dem.add_argument("--dt", type=float, default=1e-3)
    p_dem.add_argument("--steps", type=int, default=3000)
    p_dem.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_dem.add_argument("--out-dir", default="out")
    p_dem.set_defaults(func=_cmd_purify_demo)

    return parser


def _error_json(err: Exception) -> str:
    return json.dumps(
        {"error": type(err).__name__, "message": str(err)}, sort_keys=True
    )


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, matching our config exit code
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, ValidationError) as err:
        print(_error_json(err), file=sys.stderr)
        return EXIT_CONFIG
    except StabqubitError as err:
        print(_error_json(err), file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
