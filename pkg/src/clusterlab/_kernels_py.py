"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np
from scipy.signal import lfilter


def block_stats(x, r, u):
    x = np.asarray(x, dtype=np.float64)
    m = x.shape[0] // r
    blocks = x[: m * r].reshape(m, r)
    mask = blocks > u
    count = mask.sum(axis=1).astype(np.int64)
    has = count > 0
    first = np.where(has, mask.argmax(axis=1) + 1, 0).astype(np.int64)
    last = np.where(has, r - mask[:, ::-1].argmax(axis=1), 0).astype(np.int64)
    # inclusive cluster sum via a left-padded running sum
    cs = np.zeros((m, r + 1))
    np.cumsum(blocks / u, axis=1, out=cs[:, 1:])
    rows = np.arange(m)
    csum = np.where(has, cs[rows, last] - cs[rows, np.maximum(first - 1, 0)], 0.0)
    return count, first, last, csum


def block_maxima(x, r):
    x = np.asarray(x, dtype=np.float64)
    m = x.shape[0] // r
    return x[: m * r].reshape(m, r).max(axis=1)


def ar1_filter(z, phi, x0):
    z = np.asarray(z, dtype=np.float64)
    out, _ = lfilter([1.0], [1.0, -phi], z, zi=[phi * x0])
    return out


def moving_max(z, a):
    z = np.asarray(z, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    l = a.shape[0] - 1
    n = z.shape[0] - l
    if n <= 0:
        return np.empty(0)
    out = a[0] * z[l:]
    for i in range(1, l + 1):
        np.maximum(out, a[i] * z[l - i : l - i + n], out=out)
    return out
