"""Population-moment helpers shared by feature computations."""
from __future__ import annotations

import numpy as np


def population_stats(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Mean, standard deviation, skewness and excess kurtosis along axis 0.

    All moments are population moments (divide by n). Degenerate columns
    (fewer than two samples, or zero second moment) get Sd = Sk = K = 0,
    which keeps downstream feature vectors finite and fixed-length.

    Args:
        x: array of shape (n,) or (n, d).

    Returns:
        Tuple (mean, sd, skewness, excess_kurtosis), each shaped like one
        row of ``x``.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    mean = x.mean(axis=0)
    d = x - mean
    d2 = d * d
    m2 = d2.mean(axis=0)
    m3 = (d2 * d).mean(axis=0)
    m4 = (d2 * d2).mean(axis=0)
    sd = np.sqrt(m2)
    ok = (m2 > 0.0) & (n >= 2)
    zero = np.zeros_like(mean)
    skew = np.divide(m3, m2**1.5, out=zero.copy(), where=ok)
    kurt = np.divide(m4, m2 * m2, out=zero.copy(), where=ok)
    kurt = kurt - np.where(ok, 3.0, 0.0)
    return mean, sd, skew, kurt
