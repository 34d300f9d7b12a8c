"""Bootstrap and hypothesis-testing machinery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from ..errors import ArgumentError


def bootstrap_std(metric_fn, preds, labels, b: int = 1000, seed: int = 0) -> dict:
    """Nonparametric bootstrap of a paired metric; returns mean and sample std."""
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if b < 1:
        raise ArgumentError("bootstrap needs B >= 1")
    if len(preds) != len(labels) or len(preds) == 0:
        raise ArgumentError("preds and labels must be equal-length and nonempty")
    rng = np.random.default_rng(seed)
    n = len(preds)
    values = np.empty(b, dtype=np.float64)
    for i in range(b):
        idx = rng.integers(0, n, size=n)
        values[i] = metric_fn(preds[idx], labels[idx])
    return {"mean": float(values.mean()),
            "std": float(values.std(ddof=1)) if b > 1 else 0.0}


def permutation_test_one_sided(scores_a, scores_b, n_perm: int = 10000,
                               seed: int = 0) -> float:
    """One-sided paired permutation test of mean(a - b) > 0.

    The null randomizes the pairing by flipping each pair's sign; the p-value
    uses the +1 smoothing convention so it is never exactly zero.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ArgumentError("scores must be equal-length 1-D arrays")
    if n_perm < 1:
        raise ArgumentError("need n_perm >= 1")
    d = a - b
    observed = d.mean()
    rng = np.random.default_rng(seed)
    signs = rng.integers(0, 2, size=(n_perm, len(d))) * 2 - 1
    perm_stats = (signs * d).mean(axis=1)
    count = int(np.sum(perm_stats >= observed))
    return float((1 + count) / (1 + n_perm))


@dataclass
class TTestResult:
    t: float
    p: float
    df: int
    degenerate: bool = False  # zero difference variance


def t_sf(t: float, df: int) -> float:
    """Upper-tail probability of Student's t via the incomplete beta relation."""
    x = df / (df + t * t)
    tail = 0.5 * special.betainc(df / 2.0, 0.5, x)
    return float(tail if t >= 0 else 1.0 - tail)


def paired_t_test_one_sided(a, b) -> TTestResult:
    """One-sided paired t-test of mean(a - b) > 0 with df = n - 1."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ArgumentError("need equal-length 1-D samples with n >= 2")
    d = a - b
    n = len(d)
    sd = d.std(ddof=1)
    if sd == 0:
        return TTestResult(t=float("nan"), p=float("nan"), df=n - 1, degenerate=True)
    t = float(d.mean() / (sd / np.sqrt(n)))
    return TTestResult(t=t, p=t_sf(t, n - 1), df=n - 1)
