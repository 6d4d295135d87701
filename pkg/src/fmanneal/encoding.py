"""Continuous grids, one-hot bit encoding, and QUBO assembly.

A GridSpace is an ordered list of uniform value grids ("blocks"), each
encoded one-hot into a contiguous bit range. A trained FM plus the
one-hot penalty assembles into an upper-triangular QuboMatrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fm import FmParams

__all__ = [
    "GridBlock",
    "GridSpace",
    "QuboMatrix",
    "InfeasibleReport",
    "penalty_qubo",
    "adjacency_pairs",
    "assemble_qubo",
    "default_alpha",
    "parse_qubo_text",
    "format_qubo_text",
]


@dataclass(frozen=True)
class GridBlock:
    """One continuous variable: `count` equally spaced values on [lo, hi]."""

    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"block requires lo < hi, got [{self.lo}, {self.hi}]")
        if self.count < 2:
            raise ValueError("block needs at least 2 grid values")

    def value(self, c: int) -> float:
        if not 0 <= c < self.count:
            raise IndexError(f"grid index {c} out of range [0, {self.count})")
        return self.lo + c * (self.hi - self.lo) / (self.count - 1)

    def values(self) -> np.ndarray:
        return self.lo + np.arange(self.count) * (self.hi - self.lo) / (self.count - 1)


@dataclass(frozen=True)
class GridSpace:
    """Ordered blocks laid out consecutively in a bit-vector."""

    blocks: tuple[GridBlock, ...]

    def __post_init__(self):
        blocks = tuple(
            b if isinstance(b, GridBlock) else GridBlock(*b) for b in self.blocks
        )
        if not blocks:
            raise ValueError("space needs at least one block")
        object.__setattr__(self, "blocks", blocks)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(b.count for b in self.blocks)

    @property
    def offsets(self) -> tuple[int, ...]:
        out, acc = [], 0
        for b in self.blocks:
            out.append(acc)
            acc += b.count
        return tuple(out)

    @property
    def n_bits(self) -> int:
        return sum(b.count for b in self.blocks)

    @property
    def n_points(self) -> int:
        return math.prod(self.counts)

    def value(self, block: int, c: int) -> float:
        """Grid value c of the given block: lo + c*(hi-lo)/(count-1)."""
        return self.blocks[block].value(c)

    def values(self, indices) -> tuple[float, ...]:
        """One grid value per block."""
        return tuple(b.value(c) for b, c in zip(self.blocks, indices, strict=True))

    def encode(self, indices) -> np.ndarray:
        """One-hot bit-vector with bit (block offset + index) set per block."""
        x = np.zeros(self.n_bits, dtype=np.uint8)
        for off, blk, c in zip(self.offsets, self.blocks, indices, strict=True):
            if not 0 <= c < blk.count:
                raise IndexError(f"grid index {c} out of range [0, {blk.count})")
            x[off + c] = 1
        return x

    def decode(self, x) -> "tuple[int, ...] | InfeasibleReport":
        """Indices per block, or a report of which blocks violate one-hot."""
        x = np.asarray(x)
        if x.shape != (self.n_bits,):
            raise ValueError(f"bit-vector length {x.shape} != ({self.n_bits},)")
        indices, violations = [], []
        for bi, (off, blk) in enumerate(zip(self.offsets, self.blocks)):
            hot = np.flatnonzero(x[off : off + blk.count])
            if hot.size != 1:
                violations.append((bi, int(hot.size)))
            else:
                indices.append(int(hot[0]))
        if violations:
            return InfeasibleReport(tuple(violations))
        return tuple(indices)

    def is_feasible(self, x) -> bool:
        return isinstance(self.decode(x), tuple)


@dataclass(frozen=True)
class InfeasibleReport:
    """Blocks violating one-hot, as (block index, number of bits set)."""

    violations: tuple[tuple[int, int], ...]

    def __str__(self) -> str:
        parts = [f"block {b} has {k} bits set" for b, k in self.violations]
        return "infeasible: " + ", ".join(parts)


class QuboMatrix:
    """Upper-triangular QUBO: energy(x) = offset + sum_{i<=j} Q_ij x_i x_j.

    Stored densely; mirror entries of symmetric input are folded into the
    upper triangle by summation.
    """

    def __init__(self, n: int, entries=None, offset: float = 0.0):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.n = n
        self.offset = float(offset)
        self._q = np.zeros((n, n))
        if entries is not None:
            items = entries.items() if hasattr(entries, "items") else entries
            for (i, j), val in items:
                if not (0 <= i < n and 0 <= j < n):
                    raise IndexError(f"index pair ({i}, {j}) out of range for n={n}")
                if i <= j:
                    self._q[i, j] += val
                else:
                    self._q[j, i] += val

    def coefficient(self, i: int, j: int) -> float:
        i, j = (i, j) if i <= j else (j, i)
        return float(self._q[i, j])

    @property
    def matrix(self) -> np.ndarray:
        """Dense upper-triangular coefficient matrix (read-only view)."""
        out = self._q.view()
        out.flags.writeable = False
        return out

    def items(self):
        """Nonzero (i, j, value) triples, row-major, i <= j."""
        ii, jj = np.nonzero(self._q)
        for i, j in zip(ii.tolist(), jj.tolist()):
            yield i, j, float(self._q[i, j])

    def energy(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise ValueError(f"bit-vector length {x.shape} != ({self.n},)")
        return self.offset + float(x @ self._q @ x)

    def energies(self, X: np.ndarray) -> np.ndarray:
        """Energy of each row of an (m, n) bit matrix."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n:
            raise ValueError(f"bit matrix shape {X.shape} incompatible with n={self.n}")
        return self.offset + ((X @ self._q) * X).sum(axis=1)

    def fields(self) -> tuple[np.ndarray, np.ndarray]:
        """(diagonal, symmetric zero-diagonal coupling matrix): the single-flip
        energy change at bit k is (1-2x_k)(diag_k + coupling[k] . x)."""
        diag = np.diag(self._q).copy()
        coup = self._q + self._q.T
        np.fill_diagonal(coup, 0.0)
        return diag, coup

    def scale(self) -> float:
        """Mean absolute nonzero coefficient (1.0 for an empty matrix)."""
        nz = np.abs(self._q[self._q != 0.0])
        return float(nz.mean()) if nz.size else 1.0


def penalty_qubo(space: GridSpace, alpha: float) -> QuboMatrix:
    """One-hot penalty alpha*[(sum_k x_k) - 1]^2 per block, expanded with
    x^2 = x: diagonal -alpha, within-block off-diagonal +2*alpha, offset
    +alpha per block. Zero on every feasible vector, positive otherwise.
    """
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    q = QuboMatrix(space.n_bits, offset=alpha * space.n_blocks)
    for off, blk in zip(space.offsets, space.blocks):
        for i in range(off, off + blk.count):
            q._q[i, i] -= alpha
            q._q[i, i + 1 : off + blk.count] += 2.0 * alpha
    return q


def adjacency_pairs(space: GridSpace) -> list[tuple[int, int]]:
    """All (i, i+1) bit pairs within each block; pairs never span blocks."""
    out = []
    for off, blk in zip(space.offsets, space.blocks):
        out.extend((i, i + 1) for i in range(off, off + blk.count - 1))
    return out


def default_alpha(params: FmParams, space: GridSpace) -> float:
    """Penalty strength 2 * max|FM coefficient| * largest block size,
    floored at 1.0 so an all-zero model still gets a working penalty."""
    gram = params.v @ params.v.T
    np.fill_diagonal(gram, 0.0)
    fm_max = max(float(np.abs(params.b).max()), float(np.abs(gram).max()))
    return max(2.0 * fm_max * max(space.counts), 1.0)


def assemble_qubo(params: FmParams, space: GridSpace, alpha: float | None = None) -> QuboMatrix:
    """FM energy plus one-hot penalty as a QUBO.

    Q_ii = b_i - alpha; Q_ij = <v_i, v_j> (+2*alpha within a block);
    offset = a + alpha * n_blocks. On every feasible vector the energy
    equals the FM prediction exactly. alpha=None applies default_alpha.
    """
    if params.n_bits != space.n_bits:
        raise ValueError(f"params have {params.n_bits} bits, space has {space.n_bits}")
    if alpha is None:
        alpha = default_alpha(params, space)
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    q = QuboMatrix(space.n_bits, offset=params.a + alpha * space.n_blocks)
    gram = params.v @ params.v.T
    q._q[:] = np.triu(gram, k=1)
    np.fill_diagonal(q._q, params.b - alpha)
    for off, blk in zip(space.offsets, space.blocks):
        hi = off + blk.count
        q._q[off:hi, off:hi][np.triu_indices(blk.count, k=1)] += 2.0 * alpha
    return q


def format_qubo_text(q: QuboMatrix) -> str:
    """Sparse text format: header `n offset`, then one `i j value` per line."""
    lines = [f"{q.n} {q.offset!r}"]
    lines.extend(f"{i} {j} {val!r}" for i, j, val in q.items())
    return "\n".join(lines) + "\n"


def parse_qubo_text(text: str) -> QuboMatrix:
    """Inverse of format_qubo_text; malformed input raises ValueError
    naming the offending line."""
    lines = text.splitlines()
    if not lines:
        raise ValueError("line 1: empty QUBO file")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError("line 1: expected header `n offset`")
    try:
        n, offset = int(head[0]), float(head[1])
    except ValueError:
        raise ValueError("line 1: expected integer n and real offset") from None
    q = QuboMatrix(n, offset=offset)
    for ln, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split()
        if len(parts) != 3:
            raise ValueError(f"line {ln}: expected `i j value`")
        try:
            i, j, val = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ValueError(f"line {ln}: expected two integers and a real") from None
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"line {ln}: index pair ({i}, {j}) out of range for n={n}")
        if i <= j:
            q._q[i, j] += val
        else:
            q._q[j, i] += val
    return q
