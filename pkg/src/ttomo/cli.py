"""Command-line pipeline: synth, sample, fit, evaluate, scan.

Every value has a built-in default, may be set in a ``key = value`` config
file (``#`` starts a comment), and may be overridden by a flag; flags win
over the file, the file wins over defaults. All files the commands write can
be read back by the other commands.

Exit codes: 0 success, 1 invalid values, 2 capacity guard, 3 input/output or
format problems, 4 degenerate fit.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .density import diagnose, mpo_to_dense, normalize_tt, tt_to_mpo
from .errors import (
    DataFormatError,
    DegenerateFitError,
    TomoError,
    ValidationError,
)
from .fit import FitConfig, fit
from .metrics import classical_fidelity, quantum_fidelity
from .networks import TTDistribution
from .povm import tetrahedral_povm
from .sampling import SampleSet, load_samples, sample_dataset, save_samples
from .states import XxzParams, density_to_mpo, exact_outcome_distribution, synth_target
from .storage import load_tensor, save_tensor

_MANIFEST_MAGIC = "ttsnapshot 1"
# Spacing between the base seeds of successive scan grid points; larger than
# any realistic trial count so per-trial seeds never collide across points.
_POINT_SEED_STRIDE = 10007


@dataclass(frozen=True)
class ExperimentConfig:
    """Desk-scale defaults for the full pipeline."""

    L: int = 4
    J: float = 1.0
    gamma: float = 1.0
    h: float = 1.0
    p: float = 0.6
    train: int = 1_000_000
    test: int = 1_000_000
    bond_dim: int = 10
    trials: int = 20
    max_sweeps: int = 2000
    stop_window: int = 10
    stop_rtol: float = 1e-8
    eps: float = 1e-16
    mpo_tol: float = 1e-14
    seed: int = 1234
    outdir: str = "runs/exp"
    jobs: int = 1
    fq_max_l: int = 10
    scan_L: tuple | None = None
    scan_p: tuple | None = None
    scan_gamma: tuple | None = None
    scan_bond_dim: tuple | None = None
    scan_n: tuple | None = None
    min_n_search: bool = False
    ic_target: float = 0.01
    n_start: int = 1000
    n_max: int = 10_000_000

    def fit_config(self) -> FitConfig:
        return FitConfig(
            bond_dim=self.bond_dim,
            max_sweeps=self.max_sweeps,
            stop_window=self.stop_window,
            stop_rtol=self.stop_rtol,
            eps=self.eps,
            trials=self.trials,
            seed=self.seed,
        )


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"cannot parse boolean from '{text}'")


def _parse_list(conv):
    def parse(text):
        if isinstance(text, (list, tuple)):
            return tuple(conv(v) for v in text)
        tokens = [tok for tok in text.replace(",", " ").split() if tok]
        return tuple(conv(tok) for tok in tokens)

    return parse


_FIELD_PARSERS = {
    "L": int,
    "J": float,
    "gamma": float,
    "h": float,
    "p": float,
    "train": int,
    "test": int,
    "bond_dim": int,
    "trials": int,
    "max_sweeps": int,
    "stop_window": int,
    "stop_rtol": float,
    "eps": float,
    "mpo_tol": float,
    "seed": int,
    "outdir": str,
    "jobs": int,
    "fq_max_l": int,
    "scan_L": _parse_list(int),
    "scan_p": _parse_list(float),
    "scan_gamma": _parse_list(float),
    "scan_bond_dim": _parse_list(int),
    "scan_n": _parse_list(int),
    "min_n_search": _parse_bool,
    "ic_target": float,
    "n_start": int,
    "n_max": int,
}


def load_config_file(path) -> dict:
    """Parse ``key = value`` lines into config fields."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataFormatError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _FIELD_PARSERS:
                raise DataFormatError(f"{path}:{lineno}: unknown key '{key}'")
            try:
                values[key] = _FIELD_PARSERS[key](value)
            except (ValueError, ValidationError) as exc:
                raise DataFormatError(f"{path}:{lineno}: bad value for '{key}': {exc}")
    return values


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge defaults, config file, and flags (flags win)."""
    merged = {}
    if getattr(args, "config", None):
        merged.update(load_config_file(args.config))
    for name, parser in _FIELD_PARSERS.items():
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            merged[name] = parser(flag_value) if isinstance(flag_value, str) else flag_value
    try:
        return ExperimentConfig(**merged)
    except TypeError as exc:
        raise ValidationError(str(exc))


# -- snapshot persistence ---------------------------------------------------


def _param_hash(cfg: ExperimentConfig) -> str:
    canon = ",".join(
        f"{name}={repr(getattr(cfg, name))}"
        for name in ("L", "J", "gamma", "h", "p", "mpo_tol")
    )
    return hashlib.sha256(canon.encode("ascii")).hexdigest()


def _write_manifest(path: Path, entries: dict) -> None:
    lines = [_MANIFEST_MAGIC] + [f"{key} {value}" for key, value in entries.items()]
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def read_manifest(path) -> dict:
    try:
        lines = Path(path).read_text(encoding="ascii").splitlines()
    except FileNotFoundError:
        raise
    if not lines or lines[0] != _MANIFEST_MAGIC:
        raise DataFormatError(f"{path}:1: expected header '{_MANIFEST_MAGIC}'")
    entries = {}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(maxsplit=1)
        if len(parts) != 2:
            raise DataFormatError(f"{path}:{lineno}: expected 'key value'")
        entries[parts[0]] = parts[1]
    return entries


def _snapshot_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.outdir) / "target"


def cmd_synth(cfg: ExperimentConfig) -> int:
    """Synthesize the target state, its operator chain, and exact distribution."""
    params = XxzParams(L=cfg.L, J=cfg.J, gamma=cfg.gamma, h=cfg.h, p=cfg.p)
    rho = synth_target(params)
    mpo = density_to_mpo(rho, cfg.mpo_tol)
    dist = exact_outcome_distribution(rho, tetrahedral_povm())
    out = _snapshot_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    np.save(out / "rho.npy", rho)
    np.save(out / "dist.npy", dist)
    save_tensor(out / "mpo.tt", mpo)
    _write_manifest(
        out / "manifest.txt",
        {
            "L": cfg.L,
            "J": repr(cfg.J),
            "gamma": repr(cfg.gamma),
            "h": repr(cfg.h),
            "p": repr(cfg.p),
            "mpo_tol": repr(cfg.mpo_tol),
            "d": 2**cfg.L,
            "trace": repr(float(np.real(np.trace(rho)))),
            "bonds": " ".join(str(d) for d in mpo.bond_dims),
            "param_hash": _param_hash(cfg),
            "dist_digest": hashlib.sha256(dist.tobytes()).hexdigest(),
            "rho_file": "rho.npy",
            "mpo_file": "mpo.tt",
            "dist_file": "dist.npy",
        },
    )
    print(f"synth: wrote target snapshot to {out}")
    return 0


def cmd_sample(cfg: ExperimentConfig, snapshot) -> int:
    """Draw train and test datasets from a synthesized target."""
    snap = Path(snapshot) if snapshot else _snapshot_dir(cfg)
    manifest = read_manifest(snap / "manifest.txt")
    dist = np.load(snap / manifest["dist_file"])
    out = Path(cfg.outdir) / "data"
    out.mkdir(parents=True, exist_ok=True)
    train = sample_dataset(dist, cfg.train, cfg.seed, stream=0, source="train")
    test = sample_dataset(dist, cfg.test, cfg.seed, stream=1, source="test")
    save_samples(train, out / "train.samples")
    save_samples(test, out / "test.samples")
    print(f"sample: wrote {train.total} train and {test.total} test draws to {out}")
    return 0


def _write_loss_trace(path: Path, trial) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sweep", "loss", "wall_s"])
        for i, (value, wall) in enumerate(zip(trial.losses, trial.wall_times)):
            writer.writerow([i, repr(float(value)), repr(float(wall))])


def cmd_fit(cfg: ExperimentConfig, data) -> int:
    """Fit trains to a training dataset and keep the best trial."""
    data_path = Path(data) if data else Path(cfg.outdir) / "data" / "train.samples"
    samples = load_samples(data_path)
    result = fit(samples, cfg.fit_config(), jobs=cfg.jobs)
    out = Path(cfg.outdir) / "fit"
    out.mkdir(parents=True, exist_ok=True)
    masses = [trial.tt.total_mass() for trial in result.trials]
    for trial in result.trials:
        _write_loss_trace(out / f"trial_{trial.trial:03d}_loss.csv", trial)
    order = sorted(range(len(result.trials)), key=lambda i: result.trials[i].final_loss)
    with open(out / "trials.csv", "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "trial", "seed", "final_loss", "sweeps", "converged", "degenerate"])
        for rank, i in enumerate(order):
            trial = result.trials[i]
            degenerate = not (np.isfinite(masses[i]) and masses[i] > 0.0)
            writer.writerow(
                [
                    rank,
                    trial.trial,
                    trial.seed,
                    repr(trial.final_loss),
                    trial.sweeps_run,
                    trial.converged,
                    degenerate,
                ]
            )
    best = result.best
    save_tensor(out / "best.tt", best.tt)
    print(
        f"fit: best trial {best.trial} loss {best.final_loss:.6e} "
        f"after {best.sweeps_run} sweeps -> {out / 'best.tt'}"
    )
    best_mass = masses[result.best_index]
    if not (np.isfinite(best_mass) and best_mass > 0.0):
        raise DegenerateFitError(f"best trial has total mass {best_mass}")
    return 0


def _evaluate_tt(tt: TTDistribution, rho, dist, test: SampleSet, fq_max_l: int) -> dict:
    """Shared evaluation: normalize, invert, compare with the target."""
    start = time.perf_counter()
    povm = tetrahedral_povm()
    normalized = normalize_tt(tt)
    mpo = tt_to_mpo(normalized, povm)
    report = {
        "L": tt.length,
        "bond_dims": list(tt.bond_dims),
        "f_q": None,
        "i_q": None,
        "clipped_mass": None,
        "trace_deviation": None,
        "hermiticity_residual": None,
        "min_eigenvalue": None,
        "fq_omitted_reason": None,
    }
    if tt.length <= fq_max_l:
        rho_hat = mpo_to_dense(mpo)
        diag = diagnose(rho_hat, bond_dims=tt.bond_dims)
        fq = quantum_fidelity(rho_hat, rho)
        report.update(
            f_q=fq.fidelity,
            i_q=fq.infidelity,
            clipped_mass=fq.clipped_mass,
            trace_deviation=diag.trace_deviation,
            hermiticity_residual=diag.hermiticity_residual,
            min_eigenvalue=diag.min_eigenvalue,
        )
    else:
        report["fq_omitted_reason"] = (
            f"L={tt.length} exceeds the dense fidelity guard {fq_max_l}"
        )
    fc = classical_fidelity(normalized, dist, test)
    report["f_c"] = fc.fidelity
    report["i_c"] = fc.infidelity
    report["runtime_s"] = time.perf_counter() - start
    return report


def cmd_evaluate(cfg: ExperimentConfig, tt_path, snapshot, data) -> int:
    """Score a fitted train against the target snapshot on a test dataset."""
    tt_file = Path(tt_path) if tt_path else Path(cfg.outdir) / "fit" / "best.tt"
    snap = Path(snapshot) if snapshot else _snapshot_dir(cfg)
    test_file = Path(data) if data else Path(cfg.outdir) / "data" / "test.samples"
    tt = load_tensor(tt_file)
    if not isinstance(tt, TTDistribution):
        raise ValidationError(f"{tt_file} does not hold a tensor train")
    manifest = read_manifest(snap / "manifest.txt")
    rho = np.load(snap / manifest["rho_file"])
    dist = np.load(snap / manifest["dist_file"])
    test = load_samples(test_file)
    if not tt.length == int(manifest["L"]) == test.L:
        raise ValidationError(
            f"length mismatch: train has L={tt.length}, snapshot L={manifest['L']}, "
            f"test set L={test.L}"
        )
    report = _evaluate_tt(tt, rho, dist, test, cfg.fq_max_l)
    out = Path(cfg.outdir) / "report.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="ascii")
    shown = {k: report[k] for k in ("i_q", "i_c", "trace_deviation", "hermiticity_residual")}
    print(f"evaluate: {shown} -> {out}")
    return 0


# -- scans -------------------------------------------------------------------


_AXIS_FIELDS = [
    ("L", "scan_L"),
    ("p", "scan_p"),
    ("gamma", "scan_gamma"),
    ("bond_dim", "scan_bond_dim"),
    ("n", "scan_n"),
]


def _scan_grid(cfg: ExperimentConfig) -> list:
    axes = []
    for name, field_name in _AXIS_FIELDS:
        values = getattr(cfg, field_name)
        if values is None:
            continue
        if len(values) == 0:
            raise ValidationError(f"scan axis '{field_name}' is empty")
        axes.append((name, tuple(values)))
    if not axes and not cfg.min_n_search:
        raise ValidationError("scan requires at least one axis (or the minimum-N search)")
    names = [name for name, _ in axes]
    combos = itertools.product(*[values for _, values in axes]) if axes else [()]
    return [dict(zip(names, combo)) for combo in combos]


def _apply_overrides(cfg: ExperimentConfig, overrides: dict, seed: int) -> ExperimentConfig:
    updates = {"seed": seed}
    for key, value in overrides.items():
        if key == "n":
            updates["train"] = value
            updates["test"] = value
        else:
            updates[key] = value
    return replace(cfg, **updates)


def _run_point(args) -> dict:
    cfg, index, overrides, point_dir = args
    point_seed = cfg.seed + _POINT_SEED_STRIDE * (index + 1)
    point = _apply_overrides(cfg, overrides, point_seed)
    row = {
        "point": index,
        "L": point.L,
        "J": point.J,
        "gamma": point.gamma,
        "h": point.h,
        "p": point.p,
        "bond_dim": point.bond_dim,
        "n_train": point.train,
        "n_test": point.test,
        "trials": point.trials,
        "seed": point.seed,
        "status": "ok",
        "message": "",
        "min_n": None,
    }
    start = time.perf_counter()
    try:
        params = XxzParams(L=point.L, J=point.J, gamma=point.gamma, h=point.h, p=point.p)
        rho = synth_target(params)
        dist = exact_outcome_distribution(rho, tetrahedral_povm())
        if point.min_n_search:
            report, min_n, reached = _min_n_search(point, rho, dist)
            row["min_n"] = min_n
            if not reached:
                row["status"] = "threshold-not-reached"
        else:
            train = sample_dataset(dist, point.train, point.seed, stream=0, source="train")
            test = sample_dataset(dist, point.test, point.seed, stream=1, source="test")
            report = _fit_and_score(point, train, test, rho, dist)
        row.update(
            best_loss=report["best_loss"],
            f_q=report["f_q"],
            i_q=report["i_q"],
            f_c=report["f_c"],
            i_c=report["i_c"],
            trace_deviation=report["trace_deviation"],
            hermiticity_residual=report["hermiticity_residual"],
            min_eigenvalue=report["min_eigenvalue"],
            clipped_mass=report["clipped_mass"],
            bond_dims="x".join(str(d) for d in report["bond_dims"]),
        )
        point_dir.mkdir(parents=True, exist_ok=True)
        (point_dir / "report.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="ascii"
        )
    except TomoError as exc:
        row["status"] = "error"
        row["message"] = f"{type(exc).__name__}: {exc}"
    row["runtime_s"] = time.perf_counter() - start
    return row


def _fit_and_score(point: ExperimentConfig, train, test, rho, dist) -> dict:
    result = fit(train, point.fit_config(), jobs=1)
    report = _evaluate_tt(result.best.tt, rho, dist, test, point.fq_max_l)
    report["best_loss"] = result.best.final_loss
    report["best_trial"] = result.best.trial
    report["n_train"] = train.total
    report["n_test"] = test.total
    return report


def _min_n_search(point: ExperimentConfig, rho, dist):
    """Double the sample budget until the classical infidelity meets target."""
    n = point.n_start
    attempt = 0
    while True:
        train = sample_dataset(dist, n, point.seed + attempt, stream=0, source=f"train n={n}")
        test = sample_dataset(dist, n, point.seed + attempt, stream=1, source=f"test n={n}")
        report = _fit_and_score(point, train, test, rho, dist)
        if report["i_c"] <= point.ic_target:
            return report, n, True
        if n >= point.n_max:
            return report, None, False
        n *= 2
        attempt += 1


_SCAN_COLUMNS = [
    "point", "L", "J", "gamma", "h", "p", "bond_dim", "n_train", "n_test",
    "trials", "seed", "best_loss", "f_q", "i_q", "f_c", "i_c",
    "trace_deviation", "hermiticity_residual", "min_eigenvalue",
    "clipped_mass", "bond_dims", "min_n", "status", "message", "runtime_s",
]


def cmd_scan(cfg: ExperimentConfig) -> int:
    """Run the pipeline over a parameter grid, one CSV row per point.

    Grid points run independently (in processes when ``jobs > 1``); a failing
    point is recorded with its error and does not stop the scan.
    """
    grid = _scan_grid(cfg)
    scan_dir = Path(cfg.outdir) / "scan"
    scan_dir.mkdir(parents=True, exist_ok=True)
    tasks = [
        (cfg, index, overrides, scan_dir / f"point_{index:03d}")
        for index, overrides in enumerate(grid)
    ]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(_run_point, tasks))
    else:
        rows = [_run_point(task) for task in tasks]
    csv_path = Path(cfg.outdir) / "scan.csv"
    with open(csv_path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(_SCAN_COLUMNS)
        for row in rows:
            writer.writerow(
                ["" if row.get(col) is None else row.get(col) for col in _SCAN_COLUMNS]
            )
    failures = sum(row["status"] == "error" for row in rows)
    print(f"scan: {len(rows)} points ({failures} failed) -> {csv_path}")
    return 0


# -- argument parsing ---------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with the validation code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file")
    for name in _FIELD_PARSERS:
        flag = "--" + name.replace("_", "-")
        parser.add_argument(flag, dest=name, default=None, metavar="V")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ttomo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("synth", "synthesize the target state and exact distribution"),
        ("sample", "draw train/test datasets from a target snapshot"),
        ("fit", "fit tensor trains to a training dataset"),
        ("evaluate", "score a fitted train against the target"),
        ("scan", "run the pipeline over a parameter grid"),
    ]:
        cmd = sub.add_parser(name, help=help_text, parents=[], add_help=True)
        _add_config_flags(cmd)
        if name == "sample":
            cmd.add_argument("--snapshot", default=None, help="target snapshot directory")
        if name == "fit":
            cmd.add_argument("--data", default=None, help="training dataset file")
        if name == "evaluate":
            cmd.add_argument("--tt", default=None, help="fitted train file")
            cmd.add_argument("--snapshot", default=None, help="target snapshot directory")
            cmd.add_argument("--data", default=None, help="test dataset file")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        if args.command == "synth":
            return cmd_synth(cfg)
        if args.command == "sample":
            return cmd_sample(cfg, args.snapshot)
        if args.command == "fit":
            return cmd_fit(cfg, args.data)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.tt, args.snapshot, args.data)
        if args.command == "scan":
            return cmd_scan(cfg)
        raise ValidationError(f"unknown command {args.command}")
    except TomoError as exc:
        print(f"ttomo: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"ttomo: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
