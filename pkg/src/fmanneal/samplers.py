"""Samplers over QUBO / FM energies.

Three routes: an exhaustive brute-force oracle, an exact Boltzmann
sampler over the one-hot-feasible set (device-free stand-in for a
quantum annealer), and a Metropolis simulated-annealing QUBO sampler.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from numba import njit

from .encoding import GridSpace, QuboMatrix
from .fm import FmParams

__all__ = [
    "AnnealSchedule",
    "SampleSet",
    "default_schedule",
    "brute_force_min",
    "enumerate_feasible",
    "predict_feasible_grid",
    "boltzmann_sample",
    "simulated_anneal",
]

BRUTE_FORCE_MAX_BITS = 24
ENUMERATION_MAX_POINTS = 10**7


@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric inverse-temperature ramp for simulated annealing."""

    beta_start: float
    beta_end: float
    sweeps: int = 1000
    reads: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.beta_start <= 0:
            raise ValueError("beta_start must be > 0")
        if self.beta_end < self.beta_start:
            raise ValueError("beta_end must be >= beta_start")
        if self.sweeps < 1 or self.reads < 1:
            raise ValueError("sweeps and reads must be >= 1")

    def betas(self) -> np.ndarray:
        return np.geomspace(self.beta_start, self.beta_end, self.sweeps)


def default_schedule(
    q: QuboMatrix, sweeps: int = 1000, reads: int = 16, seed: int = 0
) -> AnnealSchedule:
    """Problem-adapted beta range in the style of production SA samplers:
    hot enough to accept the largest possible single-flip uphill move with
    probability 1/2, cold enough to accept a move of the smallest nonzero
    coefficient magnitude with probability 1/100. Mixed-scale matrices
    (e.g. a large one-hot penalty over small model couplings) then still
    sweep through the temperature window that resolves the small scale."""
    diag, coupling = q.fields()
    flip_max = float((np.abs(diag) + np.abs(coupling).sum(axis=1)).max())
    nz = np.abs(q.matrix[q.matrix != 0.0])
    flip_min = float(nz.min()) if nz.size else 1.0
    if flip_max <= 0.0:
        flip_max = 1.0
    beta_hot = np.log(2.0) / flip_max
    beta_cold = np.log(100.0) / flip_min
    if beta_cold <= beta_hot:
        beta_cold = 2.0 * beta_hot
    return AnnealSchedule(beta_hot, beta_cold, sweeps, reads, seed)


@dataclass(frozen=True)
class SampleSet:
    """Distinct sampled states sorted ascending by energy, with occurrence
    counts; energies are exact recomputations from the source matrix."""

    states: np.ndarray  # (k, n) uint8
    energies: np.ndarray  # (k,)
    counts: np.ndarray  # (k,)

    @classmethod
    def from_reads(cls, states: np.ndarray, energies: np.ndarray) -> "SampleSet":
        seen: dict[bytes, list] = {}
        for x, e in zip(states, energies):
            key = x.tobytes()
            if key in seen:
                seen[key][2] += 1
            else:
                seen[key] = [x, float(e), 1]
        rows = sorted(seen.values(), key=lambda r: (r[1], tuple(r[0])))
        return cls(
            np.array([r[0] for r in rows], dtype=np.uint8),
            np.array([r[1] for r in rows]),
            np.array([r[2] for r in rows], dtype=np.int64),
        )

    def __len__(self) -> int:
        return len(self.energies)

    def best(self) -> tuple[np.ndarray, float]:
        return self.states[0], float(self.energies[0])

    def expanded(self) -> Iterator[tuple[np.ndarray, float]]:
        """Each read with multiplicity, in ascending-energy order."""
        for x, e, c in zip(self.states, self.energies, self.counts):
            for _ in range(int(c)):
                yield x, float(e)


def brute_force_min(q: QuboMatrix) -> tuple[np.ndarray, float]:
    """Global minimizer over all 2^n assignments (n <= 24). Energy ties are
    broken toward the lowest value of the bit-vector read as an integer
    with bit 0 least significant."""
    if q.n > BRUTE_FORCE_MAX_BITS:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_BITS}, got {q.n}")
    n = q.n
    bit_id = np.arange(n, dtype=np.int64)
    best_energy = np.inf
    best_state = np.zeros(n, dtype=np.uint8)
    chunk = 1 << 16
    for lo in range(0, 1 << n, chunk):
        ints = np.arange(lo, min(lo + chunk, 1 << n), dtype=np.int64)
        X = ((ints[:, None] >> bit_id) & 1).astype(np.float64)
        e = q.energies(X)
        k = int(np.argmin(e))
        if e[k] < best_energy:
            best_energy = float(e[k])
            best_state = X[k].astype(np.uint8)
    return best_state, best_energy


def enumerate_feasible(space: GridSpace) -> Iterator[tuple[tuple[int, ...], np.ndarray]]:
    """Every one-hot-feasible (indices, bit-vector) in lexicographic index
    order; guarded against spaces larger than 10^7 points."""
    if space.n_points > ENUMERATION_MAX_POINTS:
        raise ValueError(f"feasible set too large to enumerate ({space.n_points} points)")
    for indices in itertools.product(*(range(c) for c in space.counts)):
        yield indices, space.encode(indices)


def predict_feasible_grid(params: FmParams, space: GridSpace) -> np.ndarray:
    """FM prediction at every feasible point, as an array shaped like the
    grid (C-order raveling matches lexicographic enumeration)."""
    if space.n_points > ENUMERATION_MAX_POINTS:
        raise ValueError(f"feasible set too large to enumerate ({space.n_points} points)")
    if params.n_bits != space.n_bits:
        raise ValueError(f"params have {params.n_bits} bits, space has {space.n_bits}")
    idx = np.indices(space.counts)
    bits = [idx[bi] + off for bi, off in enumerate(space.offsets)]
    out = np.full(space.counts, params.a)
    for bi in bits:
        out += params.b[bi]
    gram = params.v @ params.v.T
    for bi, bj in itertools.combinations(bits, 2):
        out += gram[bi, bj]
    return out


def boltzmann_sample(
    params: FmParams,
    space: GridSpace,
    beta: float,
    count: int,
    seed: int = 0,
) -> list[tuple[int, ...]]:
    """Draw `count` feasible points with probability proportional to
    exp(-beta * prediction); the normalization is exact (full enumeration).
    """
    if beta <= 0:
        raise ValueError("beta must be > 0")
    if count < 1:
        raise ValueError("count must be >= 1")
    energies = predict_feasible_grid(params, space).ravel()
    logp = -beta * (energies - energies.min())
    p = np.exp(logp)
    p /= p.sum()
    rng = np.random.default_rng(seed)
    flat = rng.choice(energies.size, size=count, p=p)
    per_block = np.unravel_index(flat, space.counts)
    return [tuple(int(v[i]) for v in per_block) for i in range(count)]


@njit(cache=True)
def _anneal_kernel(diag, coupling, betas, orders, uniforms, states):  # pragma: no cover
    reads, n = states.shape
    sweeps = betas.shape[0]
    for r in range(reads):
        x = states[r]
        f = np.zeros(n)
        for k in range(n):
            acc = 0.0
            for j in range(n):
                if x[j]:
                    acc += coupling[k, j]
            f[k] = acc
        for s in range(sweeps):
            beta = betas[s]
            for t in range(n):
                k = orders[r, s, t]
                sgn = 1.0 - 2.0 * x[k]
                delta = sgn * (diag[k] + f[k])
                if delta <= 0.0 or uniforms[r, s, t] < np.exp(-beta * delta):
                    x[k] = 1 - x[k]
                    for j in range(n):
                        f[j] += sgn * coupling[j, k]


def simulated_anneal(q: QuboMatrix, schedule: AnnealSchedule) -> SampleSet:
    """Metropolis single-bit-flip annealing.

    Each read starts from a uniform random assignment; every sweep visits
    all bits in a fresh random order at an inverse temperature interpolated
    geometrically from beta_start to beta_end. Bit flips use incremental
    local-field updates; reported energies are recomputed exactly from the
    matrix. Deterministic under a fixed schedule seed.
    """
    rng = np.random.default_rng(schedule.seed)
    reads, sweeps, n = schedule.reads, schedule.sweeps, q.n
    states = rng.integers(0, 2, size=(reads, n)).astype(np.uint8)
    orders = np.broadcast_to(np.arange(n, dtype=np.int64), (reads, sweeps, n)).copy()
    flat_orders = orders.reshape(reads * sweeps, n)
    rng.permuted(flat_orders, axis=1, out=flat_orders)
    uniforms = rng.random(size=(reads, sweeps, n))
    diag, coupling = q.fields()
    _anneal_kernel(diag, coupling, schedule.betas(), orders, uniforms, states)
    return SampleSet.from_reads(states, q.energies(states))
