"""Pearson correlation of clustering quality against benchmark scores.

The p-value uses the exact t-distribution with n-2 degrees of freedom
(regularized incomplete beta), which is the convention behind the
published correlation tables; the normal approximation would be off at
n = 12.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

ALPHA = 0.05

BRAINSCORE_METRICS = (
    "average_vision",
    "neural_vision",
    "behavior_vision",
    "V1",
    "V2",
    "V4",
    "IT",
)


@dataclass
class BrainScoreRecord:
    model: str
    average_vision: float
    neural_vision: float
    behavior_vision: float
    V1: float
    V2: float
    V4: float
    IT: float

    def metric(self, name: str) -> float:
        if name not in BRAINSCORE_METRICS:
            raise KeyError(f"unknown benchmark metric {name!r}")
        return float(getattr(self, name))


@dataclass
class CorrelationResult:
    metric: str
    r: float | None
    p: float | None
    n: int
    significant: bool
    undefined_variance: bool = False


def pearson_r(x, y) -> float:
    """Sample Pearson correlation coefficient."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"inputs must be equal-length 1-D, got {x.shape} and {y.shape}")
    if x.size < 3:
        raise ValueError("need at least 3 samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt((dx**2).sum())
    sy = np.sqrt((dy**2).sum())
    if sx == 0.0 or sy == 0.0:
        raise ValueError("zero variance in one of the inputs")
    r = float((dx * dy).sum() / (sx * sy))
    # guard against rounding pushing past the mathematical bound
    return min(1.0, max(-1.0, r))


def pearson_p(r: float, n: int) -> float:
    """Two-sided p-value for a sample correlation r with n observations.

    Uses t = r * sqrt((n-2) / (1-r^2)) against Student's t with n-2
    degrees of freedom; P(|T| > t) is the regularized incomplete beta
    I_{df/(df+t^2)}(df/2, 1/2).  Exact endpoints: |r| = 1 gives p = 0.
    """
    if not -1.0 <= r <= 1.0:
        raise ValueError(f"|r| must be <= 1, got {r}")
    if n < 3:
        raise ValueError("need n >= 3")
    if abs(r) == 1.0:
        return 0.0
    df = n - 2
    t2 = r * r * df / (1.0 - r * r)
    return float(betainc(df / 2.0, 0.5, df / (df + t2)))


def correlate_mi_brainscore(best_mi: dict, records: list[BrainScoreRecord]) -> list[CorrelationResult]:
    """Correlate per-model best MI with each benchmark metric.

    ``best_mi`` maps model name -> MI in bits.  Model sets must match
    exactly; models are processed in sorted-name order so results do
    not depend on input ordering.  Returns one result per metric, in
    the fixed metric order.  If the MI values (or a metric column) are
    constant, the result is flagged instead of producing a NaN.
    """
    by_model = {rec.model: rec for rec in records}
    if len(by_model) != len(records):
        raise ValueError("duplicate model in benchmark records")
    if set(best_mi) != set(by_model):
        missing = set(best_mi) ^ set(by_model)
        raise ValueError(f"model sets differ between MI and benchmark records: {sorted(missing)}")
    models = sorted(by_model)
    n = len(models)
    mi = np.array([best_mi[m] for m in models], dtype=np.float64)

    results = []
    for metric in BRAINSCORE_METRICS:
        scores = np.array([by_model[m].metric(metric) for m in models])
        try:
            r = pearson_r(mi, scores)
            p = pearson_p(r, n)
        except ValueError:
            results.append(
                CorrelationResult(metric=metric, r=None, p=None, n=n,
                                  significant=False, undefined_variance=True)
            )
            continue
        results.append(
            CorrelationResult(metric=metric, r=r, p=p, n=n, significant=p < ALPHA)
        )
    return results
