"""Black-box optimization loop: train the surrogate, sample candidates,
evaluate the true objective, grow the dataset.

Also houses the dataset container, trial bookkeeping, success counting,
and the coefficient of determination used by the generalization study.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoding import GridBlock, GridSpace, adjacency_pairs, assemble_qubo
from .fm import FmParams, TrainConfig, init_params, train
from .objectives import Objective
from .samplers import AnnealSchedule, boltzmann_sample, default_schedule, simulated_anneal

__all__ = [
    "Dataset",
    "SamplerSpec",
    "LoopConfig",
    "StepRecord",
    "TrialResult",
    "StepFailure",
    "init_dataset",
    "fmqa_step",
    "run_trial",
    "success_count",
    "r_squared",
    "r_squared_standard",
]

SA_RETRY_ROUNDS = 3


class StepFailure(RuntimeError):
    """Sampler could not supply enough feasible candidates for a step."""

    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass
class Dataset:
    """Evaluated points (grid-index tuples, canonical form) with their true
    objective values; insertion order preserved. `steps` records the loop
    step at which each point was added."""

    space: GridSpace
    points: list[tuple[int, ...]] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    steps: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not (len(self.points) == len(self.values) == len(self.steps)):
            raise ValueError("points, values, and steps must have equal lengths")
        for p in self.points:
            for c, blk in zip(p, self.space.blocks, strict=True):
                if not 0 <= c < blk.count:
                    raise ValueError(f"point {p} infeasible for the space")

    def __len__(self) -> int:
        return len(self.points)

    def extended(self, points, values, step: int) -> "Dataset":
        return Dataset(
            self.space,
            self.points + [tuple(int(c) for c in p) for p in points],
            self.values + [float(v) for v in values],
            self.steps + [step] * len(points),
        )

    def bit_matrix(self) -> np.ndarray:
        X = np.zeros((len(self.points), self.space.n_bits))
        offsets = self.space.offsets
        for row, p in enumerate(self.points):
            for off, c in zip(offsets, p):
                X[row, off + c] = 1.0
        return X

    def values_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def best(self) -> tuple[tuple[int, ...], float]:
        k = int(np.argmin(self.values))
        return self.points[k], self.values[k]

    def to_json(self, seed: int | None = None) -> str:
        doc = {
            "space": [{"lo": b.lo, "hi": b.hi, "count": b.count} for b in self.space.blocks],
            "points": [list(p) for p in self.points],
            "values": self.values,
            "provenance": {"seed": seed, "steps": self.steps},
        }
        return json.dumps(doc, indent=1)

    def save(self, path, seed: int | None = None) -> None:
        Path(path).write_text(self.to_json(seed))

    @classmethod
    def from_json(cls, text: str) -> "Dataset":
        doc = json.loads(text)
        space = GridSpace(tuple(GridBlock(b["lo"], b["hi"], b["count"]) for b in doc["space"]))
        points = [tuple(int(c) for c in p) for p in doc["points"]]
        values = [float(v) for v in doc["values"]]
        steps = [int(s) for s in doc["provenance"]["steps"]]
        return cls(space, points, values, steps)

    @classmethod
    def load(cls, path) -> "Dataset":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class SamplerSpec:
    """Candidate sampler: exact Boltzmann draws over the feasible set, or
    simulated annealing on the assembled QUBO. beta_start/beta_end of None
    select the scale-relative defaults per assembled matrix."""

    kind: str = "boltzmann"
    beta: float = 20.0
    sweeps: int = 1000
    beta_start: float | None = None
    beta_end: float | None = None

    def __post_init__(self):
        if self.kind not in ("boltzmann", "simulated_annealing"):
            raise ValueError(f"unknown sampler kind {self.kind!r}")
        if self.kind == "boltzmann" and self.beta <= 0:
            raise ValueError("beta must be > 0")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")


@dataclass(frozen=True)
class LoopConfig:
    n_init: int = 16
    n_steps: int = 16
    reads_per_step: int = 16
    rank: int = 16
    sampler: SamplerSpec = field(default_factory=SamplerSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    alpha: float | None = None
    seed: int = 0

    def __post_init__(self):
        if min(self.n_init, self.n_steps, self.reads_per_step, self.rank) < 1:
            raise ValueError("all loop counts must be positive")


@dataclass
class StepRecord:
    """One loop step: the points/values it added, the trained surrogate,
    and the training-loss history (step 0 carries the initial sample)."""

    step: int
    points: list[tuple[int, ...]]
    values: list[float]
    params: FmParams | None = None
    losses: np.ndarray | None = None


@dataclass
class TrialResult:
    config: LoopConfig
    records: list[StepRecord]
    dataset: Dataset

    def best_so_far(self) -> np.ndarray:
        """Running minimum of evaluated values, one entry per step
        (index 0 = initial sample); non-increasing by construction."""
        out = np.empty(len(self.records))
        best = np.inf
        for i, rec in enumerate(self.records):
            best = min(best, min(rec.values))
            out[i] = best
        return out

    def loss_histories(self) -> list[np.ndarray]:
        return [r.losses for r in self.records if r.losses is not None]


def _derive_seed(seed: int, step: int, salt: int) -> int:
    return int(np.random.SeedSequence((seed, step, salt)).generate_state(1)[0])


def init_dataset(objective: Objective, n_init: int, seed: int = 0) -> Dataset:
    """n_init distinct index tuples drawn uniformly without replacement
    from the full grid, evaluated with the objective."""
    space = objective.space()
    total = space.n_points
    if not 1 <= n_init <= total:
        raise ValueError(f"n_init must be in [1, {total}], got {n_init}")
    rng = np.random.default_rng(seed)
    if total <= 10**6:
        flat = rng.permutation(total)[:n_init]
    else:
        chosen: list[int] = []
        seen: set[int] = set()
        while len(chosen) < n_init:
            k = int(rng.integers(total))
            if k not in seen:
                seen.add(k)
                chosen.append(k)
        flat = np.asarray(chosen)
    points = [tuple(int(c) for c in np.unravel_index(k, space.counts)) for k in flat]
    values = [objective.evaluate(p) for p in points]
    return Dataset(space, points, values, [0] * n_init)


def _sa_candidates(
    params: FmParams, space: GridSpace, config: LoopConfig, step: int
) -> list[tuple[int, ...]]:
    """Annealing reads decoded to index tuples; infeasible reads are
    discarded and re-sampled for up to SA_RETRY_ROUNDS extra rounds."""
    spec = config.sampler
    q = assemble_qubo(params, space, config.alpha)
    out: list[tuple[int, ...]] = []
    for round_idx in range(1 + SA_RETRY_ROUNDS):
        needed = config.reads_per_step - len(out)
        if needed == 0:
            break
        seed = _derive_seed(config.seed, step, 100 + round_idx)
        if spec.beta_start is None or spec.beta_end is None:
            schedule = default_schedule(q, sweeps=spec.sweeps, reads=needed, seed=seed)
        else:
            schedule = AnnealSchedule(spec.beta_start, spec.beta_end, spec.sweeps, needed, seed)
        samples = simulated_anneal(q, schedule)
        for x, _energy in samples.expanded():
            decoded = space.decode(x)
            if isinstance(decoded, tuple):
                out.append(decoded)
                if len(out) == config.reads_per_step:
                    break
    if len(out) < config.reads_per_step:
        raise StepFailure(
            step,
            f"only {len(out)} feasible annealer reads after {1 + SA_RETRY_ROUNDS} rounds",
        )
    return out


def fmqa_step(
    dataset: Dataset,
    objective: Objective,
    config: LoopConfig,
    step: int = 1,
    warm_params: FmParams | None = None,
) -> tuple[Dataset, StepRecord]:
    """One loop iteration: train the surrogate on the dataset, draw
    reads_per_step candidates from the sampler, evaluate the objective at
    every candidate (duplicates included, so the dataset always grows by
    exactly reads_per_step), and append the new pairs."""
    if len(dataset) == 0:
        raise ValueError("dataset must be non-empty")
    space = dataset.space
    if config.train.warm_start and warm_params is not None:
        params0 = warm_params
    else:
        params0 = init_params(
            space.n_bits, config.rank, config.train.init_scale, _derive_seed(config.seed, step, 1)
        )
    params, losses = train(
        params0, dataset.bit_matrix(), dataset.values_array(), config.train, adjacency_pairs(space)
    )
    if config.sampler.kind == "boltzmann":
        candidates = boltzmann_sample(
            params,
            space,
            config.sampler.beta,
            config.reads_per_step,
            _derive_seed(config.seed, step, 2),
        )
    else:
        candidates = _sa_candidates(params, space, config, step)
    new_values = [objective.evaluate(p) for p in candidates]
    grown = dataset.extended(candidates, new_values, step)
    return grown, StepRecord(step, [tuple(p) for p in candidates], new_values, params, losses)


def run_trial(objective: Objective, config: LoopConfig) -> TrialResult:
    """Initial sample plus n_steps loop iterations; deterministic per seed."""
    dataset = init_dataset(objective, config.n_init, config.seed)
    records = [StepRecord(0, list(dataset.points), list(dataset.values))]
    warm = None
    for step in range(1, config.n_steps + 1):
        dataset, record = fmqa_step(dataset, objective, config, step, warm)
        warm = record.params
        records.append(record)
    return TrialResult(config, records, dataset)


def success_count(trials: list[TrialResult], h_min: float, tol: float) -> np.ndarray:
    """Per step, the number of trials whose best-so-far is within tol of
    h_min; non-decreasing in the step index."""
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if not trials:
        raise ValueError("need at least one trial")
    n_steps = len(trials[0].records)
    if any(len(t.records) != n_steps for t in trials):
        raise ValueError("trials have mismatched step counts")
    counts = np.zeros(n_steps, dtype=np.int64)
    for t in trials:
        counts += t.best_so_far() <= h_min + tol
    return counts


def r_squared(predictions, truths) -> float:
    """Coefficient of determination with the denominator centering the
    *predictions* on their own mean:

        1 - sum (pred - truth)^2 / sum (pred - mean(pred))^2

    Constant predictions make the denominator vanish and are rejected. Can
    be negative for predictors worse than the prediction mean.
    """
    pred = np.asarray(predictions, dtype=np.float64)
    truth = np.asarray(truths, dtype=np.float64)
    if pred.shape != truth.shape or pred.ndim != 1 or pred.size == 0:
        raise ValueError("predictions and truths must be equal-length non-empty vectors")
    den = float(((pred - pred.mean()) ** 2).sum())
    if den == 0.0:
        raise ValueError("constant predictions: denominator is zero")
    num = float(((pred - truth) ** 2).sum())
    return 1.0 - num / den


def r_squared_standard(predictions, truths) -> float:
    """Conventional form: denominator centers the truths."""
    pred = np.asarray(predictions, dtype=np.float64)
    truth = np.asarray(truths, dtype=np.float64)
    if pred.shape != truth.shape or pred.ndim != 1 or pred.size == 0:
        raise ValueError("predictions and truths must be equal-length non-empty vectors")
    den = float(((truth - truth.mean()) ** 2).sum())
    if den == 0.0:
        raise ValueError("constant truths: denominator is zero")
    return 1.0 - float(((pred - truth) ** 2).sum()) / den
