"""Windows, norms, block schemes and exceedance-time bookkeeping.

Exceedances are strict (``> u``) everywhere and times inside a block are
1-based. Everything downstream works on the per-block summary
:class:`BlockStats`, which is what the compiled kernel produces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from clusterlab import kernels


class SchemeError(ValueError):
    pass


@dataclass(frozen=True)
class NormSpec:
    kind: str = "euclidean"

    def __post_init__(self):
        if self.kind not in ("euclidean", "sup", "l1"):
            raise ValueError(f"unknown norm {self.kind!r}")

    def __call__(self, values):
        v = np.asarray(values, dtype=np.float64)
        if v.ndim == 1:
            return np.abs(v)
        if self.kind == "euclidean":
            return np.sqrt(np.einsum("ij,ij->i", v, v))
        if self.kind == "sup":
            return np.abs(v).max(axis=1) if v.shape[1] else np.zeros(v.shape[0])
        return np.abs(v).sum(axis=1)


EUCLIDEAN = NormSpec("euclidean")


@dataclass(frozen=True)
class Window:
    """A finite stretch of d-dimensional observations, stored as (length, d)."""

    values: np.ndarray
    dim: int = field(default=1)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        if v.ndim != 2 or v.shape[1] < 1:
            raise ValueError("window values must be a (length, d) array with d >= 1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "dim", v.shape[1])

    @classmethod
    def from_norms(cls, norms):
        return cls(np.asarray(norms, dtype=np.float64).reshape(-1, 1))

    def __len__(self):
        return self.values.shape[0]

    def norms(self, norm: NormSpec = EUCLIDEAN) -> np.ndarray:
        if self.dim == 1:
            return np.abs(self.values[:, 0])
        return norm(self.values)


@dataclass(frozen=True)
class FixedLevel:
    u: float

    def __post_init__(self):
        if not self.u > 0:
            raise SchemeError("threshold level must be positive")


@dataclass(frozen=True)
class OrderStatistic:
    k: int

    def __post_init__(self):
        if int(self.k) < 1:
            raise SchemeError("order statistic index k must be >= 1")


Threshold = Union[FixedLevel, OrderStatistic]


@dataclass(frozen=True)
class BlockScheme:
    """Sample size, block size, threshold rule and exceedance probability.

    ``w_source`` records where ``w`` came from: ``"model"`` (closed form),
    ``"estimated"`` (Monte Carlo or k/n) or ``None`` when ``w`` is unset.
    """

    n: int
    r: int
    threshold: Threshold
    w: float | None = None
    w_source: str | None = None

    def __post_init__(self):
        if self.n < 1:
            raise SchemeError("n must be >= 1")
        if self.r < 1:
            raise SchemeError("block size r must be >= 1")
        if self.r > self.n:
            raise SchemeError("block larger than sample")
        if isinstance(self.threshold, OrderStatistic) and self.threshold.k >= self.n:
            raise SchemeError("order statistic index k must be < n")
        if self.w is not None:
            if not 0.0 < self.w < 1.0:
                raise SchemeError("w must lie in (0, 1)")
            if self.w_source is None:
                object.__setattr__(self, "w_source", "model")

    @property
    def m(self) -> int:
        return self.n // self.r


@dataclass(frozen=True)
class ExceedanceRecord:
    count: int
    times: tuple
    length: int
    has_exceedance: bool

    @classmethod
    def from_times(cls, times):
        times = tuple(int(t) for t in times)
        if times:
            return cls(len(times), times, times[-1] - times[0] + 1, True)
        return cls(0, (), 0, False)


@dataclass
class BlockStats:
    """Vectorised per-block summaries for m blocks of length r.

    ``csum`` (the sum of scaled norms between first and last exceedance) is
    ``None`` when the blocks were simulated as 0/1 patterns only.
    """

    r: int
    count: np.ndarray
    first: np.ndarray
    last: np.ndarray
    csum: np.ndarray | None = None

    def __len__(self):
        return self.count.shape[0]

    @property
    def has(self):
        return self.count > 0

    @property
    def length(self):
        return np.where(self.count > 0, self.last - self.first + 1, 0)

    def take(self, idx):
        return BlockStats(
            self.r,
            self.count[idx],
            self.first[idx],
            self.last[idx],
            None if self.csum is None else self.csum[idx],
        )

    @staticmethod
    def concat(parts, r=None):
        parts = list(parts)
        if not parts:
            z = np.zeros(0, dtype=np.int64)
            return BlockStats(r or 1, z, z.copy(), z.copy(), np.zeros(0))
        csum = None
        if all(p.csum is not None for p in parts):
            csum = np.concatenate([p.csum for p in parts])
        return BlockStats(
            parts[0].r,
            np.concatenate([p.count for p in parts]),
            np.concatenate([p.first for p in parts]),
            np.concatenate([p.last for p in parts]),
            csum,
        )


def block_stats(norms, r, u) -> BlockStats:
    """Summaries of consecutive blocks of length ``r`` of a norm sequence.

    A trailing remainder shorter than ``r`` is ignored.
    """
    x = np.ascontiguousarray(norms, dtype=np.float64)
    m = x.shape[0] // r
    count, first, last, csum = kernels.block_stats(x[: m * r], int(r), float(u))
    return BlockStats(int(r), count, first, last, csum)


def partition_blocks(series: Window, scheme: BlockScheme) -> list[Window]:
    r = scheme.r
    if r > len(series):
        raise SchemeError("block larger than sample")
    m = len(series) // r
    return [Window(series.values[j * r : (j + 1) * r]) for j in range(m)]


def resolve_threshold(series, scheme: BlockScheme, norm: NormSpec = EUCLIDEAN) -> float:
    """Level u for the scheme. OrderStatistic(k) gives the k-th largest norm."""
    th = scheme.threshold
    if isinstance(th, FixedLevel):
        return float(th.u)
    norms = _norms_of(series, norm)
    if th.k >= norms.shape[0]:
        raise SchemeError("order statistic index k must be < n")
    return float(np.partition(norms, norms.shape[0] - th.k)[norms.shape[0] - th.k])


def exceedance_record(block: Window, u: float, norm: NormSpec = EUCLIDEAN) -> ExceedanceRecord:
    if not u > 0:
        raise ValueError("threshold must be positive")
    times = np.flatnonzero(block.norms(norm) > u) + 1
    return ExceedanceRecord.from_times(times)


def scale_window(block: Window, u: float) -> Window:
    if not u > 0:
        raise ValueError("scaling level must be positive")
    return Window(block.values / u)


def _norms_of(series, norm=EUCLIDEAN):
    if isinstance(series, Window):
        return series.norms(norm)
    if hasattr(series, "norms"):
        return series.norms()
    return np.abs(np.asarray(series, dtype=np.float64)).ravel()
