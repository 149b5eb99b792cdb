"""Counter-based sampling of random constraint matrices.

A disorder instance is an M x n matrix with i.i.d. entries, M = floor(alpha*n),
either standard gaussian or uniform sign ("rademacher") entries.  Entries are
produced by a counter-based generator (Philox) keyed as

    key     = (seed, stream)
    counter = (0, 0, row, 0)

so that entry (r, c) is a pure function of (seed, stream, r, c).  Two matrices
sampled with the same seed and stream but different shapes agree entry-by-entry
on the overlap of their index ranges.  That purity is what makes coupled
resampling and replica constructions reproducible without storing any state.

Stream conventions used elsewhere in the package:

    0        base sample
    1..T     replica samples for interpolation ensembles
    1 << 62  default stream for column resampling
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Philox
from scipy.special import ndtri

from .errors import DomainError, SizingError

__all__ = [
    "DisorderMatrix",
    "InterpolatedEnsemble",
    "RESAMPLE_STREAM",
    "correlated_pair",
    "dump_matrix",
    "interpolate",
    "load_matrix",
    "resample_columns",
    "sample_disorder",
    "sample_ensemble",
    "uniform_tau_grid",
]

_DISTS = ("gaussian", "rademacher")
_MASK64 = (1 << 64) - 1

#: Stream reserved for fresh columns drawn by :func:`resample_columns`.
RESAMPLE_STREAM = 1 << 62

_MAGIC = b"PDM1"
_HEADER = struct.Struct("<4sQQQQ")


def _floor_count(x: float, n: int) -> int:
    # floor(x*n) with a one-ulp guard so decimal inputs like 0.3 round the
    # intended way instead of tripping on binary representation slop.
    return int(math.floor(x * n + 1e-9))


@dataclass(frozen=True)
class DisorderMatrix:
    """An M x n constraint matrix together with its sampling provenance.

    ``rows == floor(alpha * cols)`` is enforced for the alpha recorded at
    construction.  ``entries`` is read-only; derived matrices (interpolation,
    resampling) are new objects.
    """

    rows: int
    cols: int
    entries: np.ndarray = field(repr=False)
    dist: str
    seed: int
    alpha: float
    stream: int = 0

    def __post_init__(self) -> None:
        if self.dist not in _DISTS:
            raise DomainError(f"unknown distribution {self.dist!r}")
        if self.rows < 1 or self.cols < 1:
            raise SizingError(f"degenerate shape {self.rows}x{self.cols}")
        if self.entries.shape != (self.rows, self.cols):
            raise SizingError(
                f"entries shape {self.entries.shape} does not match "
                f"{self.rows}x{self.cols}"
            )
        if self.rows != _floor_count(self.alpha, self.cols):
            raise SizingError(
                f"rows={self.rows} inconsistent with floor(alpha*cols)="
                f"{_floor_count(self.alpha, self.cols)}"
            )
        self.entries.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)


def _raw_row(seed: int, stream: int, row: int, count: int) -> np.ndarray:
    bg = Philox(
        key=np.array([seed & _MASK64, stream & _MASK64], dtype=np.uint64),
        counter=np.array([0, 0, row, 0], dtype=np.uint64),
    )
    return bg.random_raw(count)


def _transform(raw: np.ndarray, dist: str) -> np.ndarray:
    if dist == "gaussian":
        # Top 53 bits give an exactly representable uniform in the open
        # interval; the offset keeps ndtri away from both endpoints.
        u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        return ndtri(u)
    bit = (raw >> np.uint64(63)).astype(np.float64)
    return 1.0 - 2.0 * bit


def sample_disorder(
    n: int,
    alpha: float,
    dist: str = "gaussian",
    seed: int = 0,
    stream: int = 0,
) -> DisorderMatrix:
    """Sample an M x n disorder matrix with M = floor(alpha*n).

    Entry (r, c) depends only on (seed, stream, r, c), never on the matrix
    shape, so enlarging n or alpha extends a sample instead of reshuffling it.
    """
    if n < 1:
        raise SizingError(f"need at least one column, got n={n}")
    if dist not in _DISTS:
        raise DomainError(f"unknown distribution {dist!r}")
    if not (alpha > 0.0):
        raise DomainError(f"alpha must be positive, got {alpha}")
    m = _floor_count(alpha, n)
    if m < 1:
        raise SizingError(f"floor(alpha*n) = {m}, no rows to sample")
    entries = np.empty((m, n), dtype=np.float64)
    for r in range(m):
        entries[r] = _transform(_raw_row(seed, stream, r, n), dist)
    return DisorderMatrix(
        rows=m, cols=n, entries=entries, dist=dist, seed=seed,
        alpha=alpha, stream=stream,
    )


def interpolate(base: DisorderMatrix, replica: DisorderMatrix, tau: float) -> DisorderMatrix:
    """Rotate ``base`` toward an independent ``replica`` by angle ``tau``.

    Returns the matrix cos(tau)*base + sin(tau)*replica.  For independent
    gaussian inputs each entry stays exactly standard gaussian and the
    correlation with the base entry is cos(tau).  Sign matrices are rejected:
    a convex combination of signs is not a sign, so the ensemble would leave
    the rademacher family (couple sign disorder by resampling instead).
    """
    if base.dist != "gaussian" or replica.dist != "gaussian":
        raise DomainError("interpolation is only variance-preserving for gaussian disorder")
    if base.shape != replica.shape:
        raise SizingError(f"shape mismatch {base.shape} vs {replica.shape}")
    if not (0.0 <= tau <= math.pi / 2.0):
        raise DomainError(f"tau must lie in [0, pi/2], got {tau}")
    entries = math.cos(tau) * base.entries + math.sin(tau) * replica.entries
    return DisorderMatrix(
        rows=base.rows, cols=base.cols, entries=entries, dist="gaussian",
        seed=base.seed, alpha=base.alpha, stream=base.stream,
    )


def resample_columns(
    mat: DisorderMatrix,
    delta: float,
    seed: int,
    stream: int = RESAMPLE_STREAM,
) -> DisorderMatrix:
    """Redraw the last floor(delta*n) columns, keeping the prefix bit-identical.

    The fresh block is sampled from (seed, stream) with the same per-row
    counters as an ordinary sample, so fresh entry (r, c) is pure in
    (seed, stream, r, c) and independent of the original matrix.
    """
    if not (0.0 < delta < 0.5):
        raise DomainError(f"delta must lie in (0, 1/2), got {delta}")
    b = _floor_count(delta, mat.cols)
    if b < 1:
        raise SizingError(f"floor(delta*n) = {b}, nothing to resample")
    entries = mat.entries.copy()
    for r in range(mat.rows):
        fresh = _transform(_raw_row(seed, stream, r, mat.cols), mat.dist)
        entries[r, mat.cols - b:] = fresh[mat.cols - b:]
    return DisorderMatrix(
        rows=mat.rows, cols=mat.cols, entries=entries, dist=mat.dist,
        seed=mat.seed, alpha=mat.alpha, stream=mat.stream,
    )


def correlated_pair(
    n: int,
    alpha: float,
    rho: float,
    seed: int,
    streams: tuple[int, int] = (0, 1),
) -> tuple[DisorderMatrix, DisorderMatrix]:
    """Sample a pair of gaussian matrices with entrywise correlation ``rho``.

    Realized as a rotation by arccos(rho) of the base toward an independent
    replica, so rho=1 returns two bit-identical matrices and rho=0 two
    independent ones.
    """
    if not (0.0 <= rho <= 1.0):
        raise DomainError(f"rho must lie in [0, 1], got {rho}")
    base = sample_disorder(n, alpha, "gaussian", seed, stream=streams[0])
    replica = sample_disorder(n, alpha, "gaussian", seed, stream=streams[1])
    return base, interpolate(base, replica, math.acos(rho))


def uniform_tau_grid(q: int) -> tuple[float, ...]:
    """Angles k*pi/(2q) for k = 0..q."""
    if q < 1:
        raise DomainError(f"need at least one step, got q={q}")
    return tuple(k * math.pi / (2.0 * q) for k in range(q + 1))


@dataclass(frozen=True)
class InterpolatedEnsemble:
    """A base matrix, independent replicas, and a shared angle grid.

    ``instance(i, k)`` is the base rotated toward replica ``i`` by the k-th
    grid angle; at angle 0 every instance coincides with the base.
    """

    base: DisorderMatrix
    replicas: tuple[DisorderMatrix, ...]
    tau_grid: tuple[float, ...]

    def __post_init__(self) -> None:
        for rep in self.replicas:
            if rep.shape != self.base.shape:
                raise SizingError("replica shape differs from base")
            if rep.dist != self.base.dist:
                raise DomainError("replica distribution differs from base")
        if not self.tau_grid:
            raise DomainError("empty angle grid")
        prev = -1.0
        for tau in self.tau_grid:
            if not (0.0 <= tau <= math.pi / 2.0) or tau <= prev:
                raise DomainError("angle grid must increase strictly within [0, pi/2]")
            prev = tau

    @property
    def n_replicas(self) -> int:
        return len(self.replicas)

    def instance(self, i: int, k: int) -> DisorderMatrix:
        return interpolate(self.base, self.replicas[i], self.tau_grid[k])


def sample_ensemble(
    n: int,
    alpha: float,
    n_replicas: int,
    tau_grid: tuple[float, ...],
    seed: int,
    base_stream: int = 0,
) -> InterpolatedEnsemble:
    """Sample a base (stream ``base_stream``) and replicas (following streams)."""
    if n_replicas < 1:
        raise SizingError(f"need at least one replica, got {n_replicas}")
    base = sample_disorder(n, alpha, "gaussian", seed, stream=base_stream)
    replicas = tuple(
        sample_disorder(n, alpha, "gaussian", seed, stream=base_stream + 1 + i)
        for i in range(n_replicas)
    )
    return InterpolatedEnsemble(base=base, replicas=replicas, tau_grid=tuple(tau_grid))


def dump_matrix(mat: DisorderMatrix, path: str) -> None:
    """Write a matrix to ``path`` in a fixed little-endian binary layout.

    Header: magic ``PDM1``, then rows, cols, distribution tag (0 gaussian,
    1 rademacher), seed, all unsigned 64-bit; then the entries row-major as
    little-endian float64.
    """
    tag = _DISTS.index(mat.dist)
    header = _HEADER.pack(_MAGIC, mat.rows, mat.cols, tag, mat.seed & _MASK64)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(mat.entries, dtype="<f8").tobytes())


def load_matrix(path: str) -> DisorderMatrix:
    """Read a matrix written by :func:`dump_matrix`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise DomainError(f"{path}: truncated header")
    magic, rows, cols, tag, seed = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise DomainError(f"{path}: bad magic {magic!r}")
    if tag >= len(_DISTS):
        raise DomainError(f"{path}: unknown distribution tag {tag}")
    expected = _HEADER.size + 8 * rows * cols
    if len(blob) != expected:
        raise DomainError(f"{path}: expected {expected} bytes, found {len(blob)}")
    entries = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).astype(
        np.float64
    ).reshape(rows, cols)
    return DisorderMatrix(
        rows=rows, cols=cols, entries=entries, dist=_DISTS[tag],
        seed=seed, alpha=rows / cols,
    )
