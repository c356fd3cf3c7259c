"""Seedable stationary regularly varying series.

Three models are shipped, all driven by standard Pareto(alpha) innovations:

* ``iid_pareto``: X_t = Z_t.
* ``moving_max``: X_t = max_i a_i Z_{t-i}, i = 0..l (exactly l-dependent).
* ``ar1``: X_t = phi X_{t-1} + Z_t, 0 <= phi < 1.

Series are produced in fixed-size chunks whose random streams are keyed by
(seed, chunk index), so a series is a pure function of (model, n, seed)
whether it is materialised at once or streamed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy import optimize

from clusterlab import kernels
from clusterlab import rng as _rng
from clusterlab.core import BlockStats, ExceedanceRecord, block_stats

CHUNK = 1 << 20

KINDS = ("iid_pareto", "moving_max", "ar1")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorModel:
    kind: str
    alpha: float = 1.0
    weights: tuple = field(default=())
    phi: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelError(f"unknown model kind {self.kind!r}")
        if not self.alpha > 0:
            raise ModelError("alpha must be positive")
        if self.kind == "moving_max":
            a = tuple(float(x) for x in self.weights)
            if not a or any(x < 0 for x in a) or not any(x > 0 for x in a):
                raise ModelError("moving_max weights must be >= 0 and not all zero")
            object.__setattr__(self, "weights", a)
        if self.kind == "ar1" and not 0.0 <= self.phi < 1.0:
            raise ModelError("ar1 coefficient must lie in [0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorModel":
        d = dict(d)
        kind = d.pop("model")
        alpha = float(d.pop("alpha", 1.0))
        if kind == "moving_max":
            return cls(kind, alpha, weights=tuple(d.pop("weights")))
        if kind == "ar1":
            return cls(kind, alpha, phi=float(d.pop("phi")))
        return cls(kind, alpha)

    def to_dict(self) -> dict:
        out = {"model": self.kind, "alpha": self.alpha}
        if self.kind == "moving_max":
            out["weights"] = list(self.weights)
        elif self.kind == "ar1":
            out["phi"] = self.phi
        return out

    @property
    def dependence_range(self) -> int | None:
        if self.kind == "iid_pareto":
            return 0
        if self.kind == "moving_max":
            return len(self.weights) - 1
        return None

    @property
    def w_exact(self) -> bool:
        return self.kind != "ar1"

    def tail_prob(self, u: float) -> float:
        """P(X_0 > u); exact for iid and moving maxima, asymptotic for AR(1)."""
        a = self.alpha
        if self.kind == "iid_pareto":
            return 1.0 if u < 1 else u**-a
        if self.kind == "moving_max":
            logp = 0.0
            for c in self.weights:
                if c > 0:
                    q = min(1.0, (c / u) ** a)
                    if q >= 1.0:
                        return 1.0
                    logp += math.log1p(-q)
            return -math.expm1(logp)
        return u**-a / (1.0 - self.phi**a)

    def level_for(self, w: float) -> float:
        """Threshold u with tail_prob(u) = w."""
        if not 0 < w < 1:
            raise ModelError("w must lie in (0, 1)")
        a = self.alpha
        if self.kind == "iid_pareto":
            return w ** (-1.0 / a)
        if self.kind == "ar1":
            return (w * (1.0 - self.phi**a)) ** (-1.0 / a)
        s = sum(c**a for c in self.weights)
        guess = (w / s) ** (-1.0 / a)
        lo = max(self.weights) * (1 + 1e-12)
        hi = max(guess * 4.0, lo * 2.0)
        return optimize.brentq(lambda u: math.log(self.tail_prob(u)) - math.log(w), lo, hi, xtol=1e-14 * hi, rtol=1e-14)


def _burnin(model):
    return 10 * math.ceil(1.0 / (1.0 - model.phi))


@dataclass(frozen=True)
class SeriesHandle:
    """Lazily generated series; ``norms()`` materialises, ``chunks()`` streams."""

    model: GeneratorModel
    n: int
    seed: int
    rep: int = 0

    def chunks(self) -> Iterator[np.ndarray]:
        model, seed, rep = self.model, self.seed, self.rep
        a = model.alpha
        n_chunks = -(-self.n // CHUNK)
        if model.kind == "moving_max":
            w = np.asarray(model.weights)
            lag = w.shape[0] - 1
            carry = _rng.pareto(_rng.stream(seed, _rng.BURNIN, rep), a, lag)
        elif model.kind == "ar1":
            z0 = _rng.pareto(_rng.stream(seed, _rng.BURNIN, rep), a, _burnin(model))
            state = float(kernels.ar1_filter(z0, model.phi, 0.0)[-1])
        for c in range(n_chunks):
            size = min(CHUNK, self.n - c * CHUNK)
            z = _rng.pareto(_rng.stream(seed, _rng.SERIES, rep, c), a, size)
            if model.kind == "iid_pareto":
                yield z
            elif model.kind == "moving_max":
                full = np.concatenate([carry, z])
                yield kernels.moving_max(full, w)
                carry = full[full.shape[0] - lag :] if lag else carry
            else:
                x = kernels.ar1_filter(z, model.phi, state)
                state = float(x[-1])
                yield x

    def norms(self) -> np.ndarray:
        return np.concatenate(list(self.chunks())) if self.n else np.zeros(0)

    def __len__(self):
        return self.n

    def blocks(self, r: int) -> Iterator[np.ndarray]:
        """Stream whole blocks of length r as flat arrays (remainder dropped)."""
        buf = np.zeros(0)
        for chunk in self.chunks():
            buf = np.concatenate([buf, chunk]) if buf.shape[0] else chunk
            m = buf.shape[0] // r
            if m:
                yield buf[: m * r]
                buf = buf[m * r :]

    def block_stats(self, r: int, u: float) -> BlockStats:
        return BlockStats.concat((block_stats(b, r, u) for b in self.blocks(r)), r=r)


def generate(model: GeneratorModel, n: int, seed: int, rep: int = 0) -> SeriesHandle:
    if n < 1:
        raise ModelError("n must be >= 1")
    return SeriesHandle(model, int(n), int(seed), int(rep))


def sample_blocks(model: GeneratorModel, r: int, count: int, gen: np.random.Generator) -> np.ndarray:
    """``count`` independent stationary stretches of length r, shape (count, r)."""
    a = model.alpha
    if model.kind == "iid_pareto":
        return _rng.pareto(gen, a, (count, r))
    if model.kind == "moving_max":
        w = np.asarray(model.weights)
        lag = w.shape[0] - 1
        z = _rng.pareto(gen, a, (count, r + lag))
        out = w[0] * z[:, lag:]
        for i in range(1, lag + 1):
            np.maximum(out, w[i] * z[:, lag - i : lag - i + r], out=out)
        return out
    b = _burnin(model)
    z = _rng.pareto(gen, a, (count, r + b))
    from scipy.signal import lfilter

    return lfilter([1.0], [1.0, -model.phi], z, axis=1)[:, b:]


# --- iid exceedance patterns ------------------------------------------------


def _p_any(w, r):
    return -math.expm1(r * math.log1p(-w))


def iid_exceeding_stats(w: float, r: int, size: int, gen: np.random.Generator) -> BlockStats:
    """Exact draws of (N, t(1), t(N)) for iid Bernoulli(w) blocks given A.

    t(1) is a geometric variable truncated to 1..r; given t(1) the number of
    trailing non-exceedances is geometric truncated at r - t(1); the
    exceedances strictly between the first and the last are Binomial.
    """
    if not 0 < w < 1:
        raise ValueError("w must lie in (0, 1)")
    lw = math.log1p(-w)
    p_a = _p_any(w, r)
    u1 = gen.random(size)
    t1 = np.ceil(np.log1p(-u1 * p_a) / lw).astype(np.int64)
    np.clip(t1, 1, r, out=t1)
    rest = r - t1
    v = 1.0 - gen.random(size)
    g = np.floor(np.log(v) / lw).astype(np.int64)
    g = np.minimum(g, rest)
    tn = np.where(g < rest, r - g, t1)
    inner = np.maximum(tn - t1 - 1, 0)
    cnt = np.where(tn > t1, 2 + gen.binomial(inner, w), 1).astype(np.int64)
    return BlockStats(int(r), cnt, t1, tn, None)


def iid_block_stats(w: float, r: int, m: int, gen: np.random.Generator) -> BlockStats:
    """Pattern summaries of m iid Bernoulli(w) blocks of length r, in block order."""
    hit = gen.random(m) < _p_any(w, r)
    k = int(hit.sum())
    ex = iid_exceeding_stats(w, r, k, gen)
    z = np.zeros(m, dtype=np.int64)
    out = BlockStats(int(r), z, z.copy(), z.copy(), None)
    out.count[hit] = ex.count
    out.first[hit] = ex.first
    out.last[hit] = ex.last
    return out


def bernoulli_pattern_blocks(w: float, r: int, m: int, seed: int) -> list[ExceedanceRecord]:
    """m independent iid Bernoulli(w) exceedance patterns as records."""
    gen = _rng.stream(seed, _rng.BLOCKS)
    st = iid_block_stats(w, r, m, gen)
    out = []
    for c, f, l in zip(st.count, st.first, st.last):
        if c == 0:
            out.append(ExceedanceRecord.from_times(()))
        elif c == 1:
            out.append(ExceedanceRecord.from_times((f,)))
        else:
            mid = np.sort(gen.choice(np.arange(f + 1, l), size=c - 2, replace=False)) if c > 2 else ()
            out.append(ExceedanceRecord.from_times((f, *mid, l)))
    return out


# --- binary dump --------------------------------------------------------------

MAGIC = b"CLSERIES"


def dump_series(path, handle: SeriesHandle) -> None:
    """Header (magic, u32 length, JSON {model, n, seed, rep}) then float64 LE payload."""
    header = json.dumps(
        {"model": handle.model.to_dict(), "n": handle.n, "seed": handle.seed, "rep": handle.rep},
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header).to_bytes(4, "little"))
        fh.write(header)
        for chunk in handle.chunks():
            fh.write(np.ascontiguousarray(chunk, dtype="<f8").tobytes())


def load_series(path):
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not a series dump")
        size = int.from_bytes(fh.read(4), "little")
        header = json.loads(fh.read(size).decode("utf-8"))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.shape[0] != header["n"]:
        raise ValueError(f"{path}: payload has {data.shape[0]} values, header says {header['n']}")
    return header, data.astype(np.float64)


# --- block maxima route to the extremal index ---------------------------------


def block_maxima_theta_oracle(model: GeneratorModel, n: int, r: int, u: float, seed: int, batches: int = 100):
    """P(X*_{1,r} > u) / (r w) from one simulated path of length n.

    For models with a closed-form tail ``w`` is exact; otherwise it is the
    empirical exceedance rate of the same path. The standard error uses
    batch means over ``batches`` consecutive groups of blocks.
    """
    from clusterlab.estimators import MCEstimate

    m = n // r
    if m < batches:
        batches = max(1, m)
    hits = []
    exc = []
    handle = generate(model, m * r, seed)
    for flat in handle.blocks(r):
        hits.append(kernels.block_maxima(flat, r) > u)
        exc.append((flat.reshape(-1, r) > u).sum(axis=1))
    hit = np.concatenate(hits)
    ex = np.concatenate(exc).astype(np.float64)
    if not hit.any():
        raise ValueError("no block exceeded the threshold; lower u or raise n")
    edges = np.linspace(0, m, batches + 1).astype(int)
    hb = np.add.reduceat(hit.astype(np.float64), edges[:-1])
    eb = np.add.reduceat(ex, edges[:-1])
    sizes = np.diff(edges).astype(np.float64)
    if model.w_exact:
        w = model.tail_prob(u)
        value = hit.mean() / (r * w)
        per = hb / sizes / (r * w)
    else:
        w = ex.sum() / (m * r)
        value = hit.sum() / ex.sum()
        per = hb / np.maximum(eb, 1.0)
    se = per.std(ddof=1) / math.sqrt(batches) if batches > 1 else float("nan")
    est = MCEstimate(float(value), float(se), int(m), int(seed))
    est.extra = {"r_w": float(r * w), "w": float(w), "w_source": "model" if model.w_exact else "estimated", "n_exceeding_blocks": int(hit.sum())}
    return est
