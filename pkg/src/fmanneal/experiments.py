"""Experiment drivers: reproduce the benchmark studies as plot-ready CSV
files plus a manifest echoing the fully resolved configuration.

All drivers are deterministic per configuration; reruns yield
byte-identical data files.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bubble import AcousticDrive, MarmottantParams, integrate_marmottant
from .encoding import adjacency_pairs
from .engine import (
    Dataset,
    LoopConfig,
    SamplerSpec,
    StepFailure,
    init_dataset,
    fmqa_step,
    r_squared,
    r_squared_standard,
    run_trial,
    success_count,
)
from .fm import TrainConfig, init_params, predict_batch, train
from .objectives import ToyNorm, make_objective
from .samplers import predict_feasible_grid

__all__ = [
    "ConfigError",
    "SurfaceConfig",
    "BenchH2Config",
    "OptimizeConfig",
    "BubbleSimConfig",
    "run_surface",
    "run_bench_h2",
    "run_optimize",
    "run_simulate_bubble",
]


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


def _check_keys(doc: dict, allowed, context: str) -> None:
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {context} (allowed: {sorted(allowed)})")


def _build(cls, doc: dict, context: str):
    _check_keys(doc, cls.__dataclass_fields__, context)
    try:
        return cls(**doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class SurfaceConfig:
    """Surrogate-surface study on a 2-variable objective."""

    objective: str = "h1"
    lambda_sr: float = 0.1
    lambda_l2: float = 0.0
    learning_rate: float = 0.1
    n_updates: int = 3000
    init_scale: float = 0.1
    rank: int = 16
    n_init: int = 16
    n_steps: int = 16
    reads_per_step: int = 16
    beta: float = 20.0
    seed: int = 0
    warm_start: bool = False
    dump_steps: tuple = (1, 2, 8, 16)

    @classmethod
    def from_mapping(cls, doc: dict) -> "SurfaceConfig":
        return _build(cls, doc, "surface config")


@dataclass(frozen=True)
class BenchH2Config:
    """Generalization sweep: sample count x smoothing strength x rank."""

    n_samples: tuple = (10, 50, 100, 500, 1000)
    lambdas: tuple = (0.0, 0.1, 1.0, 10.0)
    ranks: tuple = (4, 16)
    n_test: int = 2000
    seeds: tuple = (0,)
    learning_rate: float = 0.1
    n_updates: int = 1000
    init_scale: float = 0.1
    standard_r2: bool = False

    @classmethod
    def from_mapping(cls, doc: dict) -> "BenchH2Config":
        return _build(cls, doc, "bench-h2 config")


@dataclass(frozen=True)
class OptimizeConfig:
    """Multi-trial optimization study with optional no-smoothing baseline."""

    objective: str = "h3"
    seeds: tuple = tuple(range(16))
    n_init: int = 16
    n_steps: int = 16
    reads_per_step: int = 16
    rank: int = 16
    lambda_sr: float = 10.0
    lambda_l2: float = 0.0
    learning_rate: float = 0.1
    n_updates: int = 1000
    init_scale: float = 0.1
    warm_start: bool = False
    sampler: str = "simulated_annealing"
    beta: float = 20.0
    sweeps: int = 1000
    beta_start: float | None = None
    beta_end: float | None = None
    alpha: float | None = None
    h_min: float = 0.0
    success_tolerance: float = 0.01
    compare_naive: bool = True

    @classmethod
    def from_mapping(cls, doc: dict) -> "OptimizeConfig":
        return _build(cls, doc, "optimize config")

    def loop_config(self, seed: int, lambda_sr: float) -> LoopConfig:
        return LoopConfig(
            n_init=self.n_init,
            n_steps=self.n_steps,
            reads_per_step=self.reads_per_step,
            rank=self.rank,
            sampler=SamplerSpec(
                kind=self.sampler,
                beta=self.beta,
                sweeps=self.sweeps,
                beta_start=self.beta_start,
                beta_end=self.beta_end,
            ),
            train=TrainConfig(
                learning_rate=self.learning_rate,
                n_updates=self.n_updates,
                lambda_sr=lambda_sr,
                lambda_l2=self.lambda_l2,
                init_scale=self.init_scale,
                seed=seed,
                warm_start=self.warm_start,
            ),
            alpha=self.alpha,
            seed=seed,
        )


@dataclass(frozen=True)
class BubbleSimConfig:
    """Single bubble-dynamics simulation."""

    amplitude: float = 25e3
    frequency: float = 1.5e6
    envelope_center: float = 5e-6
    envelope_width: float = 1.5e-6
    t_end: float = 10e-6
    n_out: int = 201
    rtol: float = 1e-8
    atol: float = 1e-12
    method: str = "adaptive"
    rk4_substeps: int = 50
    rho_l: float = 1e3
    kappa: float = 1.07
    c_l: float = 1500.0
    mu: float = 1e-3
    kappa_s: float = 6.0e-9
    p0: float = 1e5
    r0: float = 3.2e-6
    sigma0: float = 0.02
    chi: float = 2.5

    @classmethod
    def from_mapping(cls, doc: dict) -> "BubbleSimConfig":
        return _build(cls, doc, "simulate-bubble config")

    def params(self) -> MarmottantParams:
        return MarmottantParams(
            rho_l=self.rho_l,
            kappa=self.kappa,
            c_l=self.c_l,
            mu=self.mu,
            kappa_s=self.kappa_s,
            p0=self.p0,
            r0=self.r0,
            sigma0=self.sigma0,
            chi=self.chi,
        )

    def drive(self) -> AcousticDrive:
        return AcousticDrive(
            amplitude=self.amplitude,
            frequency=self.frequency,
            envelope_center=self.envelope_center,
            envelope_width=self.envelope_width,
        )


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _write_manifest(out_dir: Path, command: str, config, outputs: list[Path], t0: float, extra=None) -> Path:
    doc = {
        "command": command,
        "artifact_version": __version__,
        "config": asdict(config),
        "outputs": sorted(p.name for p in outputs),
        "wall_time_s": round(time.time() - t0, 3),
    }
    if extra:
        doc.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(doc, indent=1, default=str))
    return path


def run_surface(config: SurfaceConfig, out_dir) -> list[Path]:
    """Loop on a 2-variable objective, dumping the full surrogate grid,
    the true grid, and known/new evaluation points after selected steps."""
    t0 = time.time()
    objective = make_objective(config.objective)
    space = objective.space()
    if space.n_blocks != 2:
        raise ConfigError(f"surface study needs a 2-variable objective, {config.objective!r} has {space.n_blocks}")
    bad = [s for s in config.dump_steps if not 1 <= s <= config.n_steps]
    if bad:
        raise ConfigError(f"dump_steps {bad} outside [1, {config.n_steps}]")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []

    g1 = space.blocks[0].values()
    g2 = space.blocks[1].values()

    def grid_rows(grid):
        for i in range(space.blocks[0].count):
            for j in range(space.blocks[1].count):
                yield i, j, g1[i], g2[j], grid[i, j]

    true_grid = np.array(
        [[objective.evaluate((i, j)) for j in range(space.blocks[1].count)] for i in range(space.blocks[0].count)]
    )
    outputs.append(
        _write_csv(out_dir / "true_surface.csv", ["i", "j", "y1", "y2", "value"], grid_rows(true_grid))
    )

    loop = LoopConfig(
        n_init=config.n_init,
        n_steps=config.n_steps,
        reads_per_step=config.reads_per_step,
        rank=config.rank,
        sampler=SamplerSpec(kind="boltzmann", beta=config.beta),
        train=TrainConfig(
            learning_rate=config.learning_rate,
            n_updates=config.n_updates,
            lambda_sr=config.lambda_sr,
            lambda_l2=config.lambda_l2,
            init_scale=config.init_scale,
            seed=config.seed,
            warm_start=config.warm_start,
        ),
        seed=config.seed,
    )
    dataset = init_dataset(objective, loop.n_init, loop.seed)
    warm = None
    for step in range(1, loop.n_steps + 1):
        known = list(zip(dataset.points, dataset.values))
        dataset, record = fmqa_step(dataset, objective, loop, step, warm)
        warm = record.params
        if step in config.dump_steps:
            fm_grid = predict_feasible_grid(record.params, space)
            outputs.append(
                _write_csv(
                    out_dir / f"fm_surface_step{step:02d}.csv",
                    ["i", "j", "y1", "y2", "value"],
                    grid_rows(fm_grid),
                )
            )
            mse = float(((fm_grid - true_grid) ** 2).mean())
            point_rows = [
                ("known", p[0], p[1], g1[p[0]], g2[p[1]], v) for p, v in known
            ] + [
                ("new", p[0], p[1], g1[p[0]], g2[p[1]], v)
                for p, v in zip(record.points, record.values)
            ]
            outputs.append(
                _write_csv(
                    out_dir / f"points_step{step:02d}.csv",
                    ["kind", "i", "j", "y1", "y2", "value"],
                    point_rows,
                )
            )
            outputs.append(
                _write_csv(out_dir / f"mse_step{step:02d}.csv", ["step", "grid_mse"], [(step, mse)])
            )
    outputs.append(_write_manifest(out_dir, "surface", config, outputs, t0))
    return outputs


def run_bench_h2(config: BenchH2Config, out_dir) -> list[Path]:
    """Train/test generalization sweep on the interacting toy objective.

    Training sets are fixed per (seed, sample count) across smoothing
    strengths and ranks; the test set is fixed per seed.
    """
    t0 = time.time()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    objective = ToyNorm()
    space = objective.space()
    adjacency = adjacency_pairs(space)
    outputs = []
    summary_rows = []

    for seed in config.seeds:
        test = init_dataset(objective, config.n_test, seed=_stable_seed(seed, 0, 0))
        X_test, y_test = test.bit_matrix(), test.values_array()
        train_sets = {
            ns: init_dataset(objective, ns, seed=_stable_seed(seed, 1, ns))
            for ns in config.n_samples
        }
        for rank in config.ranks:
            for lam in config.lambdas:
                for ns in config.n_samples:
                    ds = train_sets[ns]
                    params0 = init_params(
                        space.n_bits, rank, config.init_scale, _stable_seed(seed, 2, ns, rank, lam)
                    )
                    cfg = TrainConfig(
                        learning_rate=config.learning_rate,
                        n_updates=config.n_updates,
                        lambda_sr=lam,
                        init_scale=config.init_scale,
                        seed=seed,
                    )
                    params, _ = train(params0, ds.bit_matrix(), ds.values_array(), cfg, adjacency)
                    preds = predict_batch(params, X_test)
                    r2 = r_squared(preds, y_test)
                    row = [seed, rank, lam, ns, r2]
                    if config.standard_r2:
                        row.append(r_squared_standard(preds, y_test))
                    summary_rows.append(row)
                    pair_name = f"pairs_seed{seed}_K{rank}_lam{_fmt(lam)}_Ns{ns}.csv"
                    outputs.append(
                        _write_csv(
                            out_dir / pair_name,
                            ["truth", "prediction"],
                            zip(y_test.tolist(), preds.tolist()),
                        )
                    )
    header = ["seed", "rank", "lambda_sr", "n_samples", "r2_paper"]
    if config.standard_r2:
        header.append("r2_standard")
    outputs.append(_write_csv(out_dir / "summary.csv", header, summary_rows))
    outputs.append(_write_manifest(out_dir, "bench-h2", config, outputs, t0))
    return outputs


def run_optimize(config: OptimizeConfig, out_dir) -> list[Path]:
    """Multi-trial loop study; optionally runs a no-smoothing baseline on
    the same protocol for comparison. Trial failures are recorded and the
    run continues."""
    t0 = time.time()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    objective = make_objective(config.objective)
    variants = [("fsr", config.lambda_sr)]
    if config.compare_naive and config.lambda_sr > 0:
        variants.append(("naive", 0.0))
    outputs = []
    failures = []
    counts_by_variant = {}

    for name, lam in variants:
        vdir = out_dir / name
        vdir.mkdir(parents=True, exist_ok=True)
        completed = []
        for seed in config.seeds:
            try:
                completed.append((seed, run_trial(objective, config.loop_config(seed, lam))))
            except StepFailure as exc:
                failures.append({"variant": name, "seed": seed, "error": str(exc)})
        trials = [t for _, t in completed]
        eval_rows = []
        best_rows = []
        for seed, trial in completed:
            best = trial.best_so_far()
            for rec in trial.records:
                for v in rec.values:
                    eval_rows.append((seed, rec.step, v))
            for step, b in enumerate(best):
                best_rows.append((seed, step, b))
        outputs.append(
            _write_csv(vdir / "evaluations.csv", ["trial_seed", "step", "value"], eval_rows)
        )
        outputs.append(
            _write_csv(vdir / "best_so_far.csv", ["trial_seed", "step", "best"], best_rows)
        )
        if trials:
            counts = success_count(trials, config.h_min, config.success_tolerance)
            counts_by_variant[name] = counts
            outputs.append(
                _write_csv(
                    vdir / "success_counts.csv",
                    ["step", "count"],
                    list(enumerate(counts.tolist())),
                )
            )
        for seed, trial in completed:
            trial.dataset.save(vdir / f"dataset_seed{seed}.json", seed=seed)
            outputs.append(vdir / f"dataset_seed{seed}.json")
    outputs.append(
        _write_manifest(out_dir, "optimize", config, outputs, t0, extra={"failures": failures})
    )
    return outputs


def run_simulate_bubble(config: BubbleSimConfig, out_dir) -> list[Path]:
    """Integrate the bubble model and emit the trajectory as CSV."""
    t0 = time.time()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    traj = integrate_marmottant(
        config.params(),
        config.drive(),
        t_end=config.t_end,
        n_out=config.n_out,
        rtol=config.rtol,
        atol=config.atol,
        method=config.method,
        rk4_substeps=config.rk4_substeps,
    )
    outputs = [
        _write_csv(
            Path(out_dir) / "trajectory.csv",
            ["t_us", "r_um"],
            zip(traj.times_us().tolist(), traj.radii_um().tolist()),
        )
    ]
    outputs.append(_write_manifest(out_dir, "simulate-bubble", config, outputs, t0))
    return outputs


def _stable_seed(*parts) -> int:
    """Deterministic 32-bit seed from a tuple of numbers (floats are keyed
    by their exact bit pattern)."""
    ints = []
    for p in parts:
        if isinstance(p, float):
            ints.append(int(np.float64(p).view(np.uint64)) & 0xFFFFFFFF)
            ints.append((int(np.float64(p).view(np.uint64)) >> 32) & 0xFFFFFFFF)
        else:
            ints.append(int(p) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(ints).generate_state(1)[0])
