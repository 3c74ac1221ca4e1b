"""Entropy and mutual information between labelings.

Two estimators are provided.  The plug-in estimator is the entropy of
the empirical frequencies.  The NSB estimator is the Bayesian posterior
mean under a mixture of symmetric Dirichlet priors whose hyperprior is
flat in the a-priori expected entropy; it corrects the undersampling
bias that the plug-in estimator suffers when the sample size is not
much larger than the alphabet.

All entropies are in bits.  Mutual information is computed through the
three-entropy decomposition MI = H(X) + H(Y) - H(X, Y), with the joint
alphabet size taken as the product of the marginal alphabet sizes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import digamma, gammaln, polygamma

from texgram.errors import NumericalError

LN2 = float(np.log(2.0))

# Composite Gauss-Legendre rule used for the NSB hyperparameter integral.
_NSB_PANELS = 16
_NSB_ORDER = 32
_NSB_CHECK_PANELS = 8  # coarser rule used only as a convergence check


@dataclass
class ContingencyTable:
    """Joint counts of two labelings: counts[x, y] = |{i : x_i=x, y_i=y}|."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2:
            raise ValueError(f"contingency table must be 2-D, got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise ValueError("contingency counts must be nonnegative")

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def k_x(self) -> int:
        return self.counts.shape[0]

    @property
    def k_y(self) -> int:
        return self.counts.shape[1]


@dataclass
class EntropyEstimate:
    value: float  # bits
    method: str  # "plugin" or "nsb"
    posterior_sd: float | None = None  # bits, NSB only


def contingency_table(x_labels, y_labels, k_x=None, k_y=None) -> ContingencyTable:
    """Tabulate joint counts of two integer labelings of the same items."""
    x = np.asarray(x_labels, dtype=np.int64)
    y = np.asarray(y_labels, dtype=np.int64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"label arrays must be equal-length 1-D, got {x.shape} and {y.shape}")
    if x.size == 0:
        raise ValueError("empty labelings")
    if k_x is None:
        k_x = int(x.max()) + 1
    if k_y is None:
        k_y = int(y.max()) + 1
    if x.min() < 0 or x.max() >= k_x:
        raise ValueError(f"x labels outside [0, {k_x})")
    if y.min() < 0 or y.max() >= k_y:
        raise ValueError(f"y labels outside [0, {k_y})")
    flat = np.bincount(x * k_y + y, minlength=k_x * k_y)
    return ContingencyTable(counts=flat.reshape(k_x, k_y))


def plugin_entropy(counts) -> EntropyEstimate:
    """Entropy of the empirical distribution, -sum (c/n) log2 (c/n).

    Terms are summed in sorted-count order, so the result depends only
    on the multiset of counts; transposing or relabeling a contingency
    table changes the estimate by exactly nothing.
    """
    c = np.asarray(counts, dtype=np.float64).ravel()
    if np.any(c < 0):
        raise ValueError("counts must be nonnegative")
    n = c.sum()
    if n <= 0:
        raise ValueError("all-zero counts")
    p = np.sort(c[c > 0]) / n
    return EntropyEstimate(value=float(-(p * np.log2(p)).sum()), method="plugin")


# ---------------------------------------------------------------------------
# NSB estimator
# ---------------------------------------------------------------------------


def _multiplicities(counts, K):
    """Distinct count values and their multiplicities, zeros included."""
    c = np.asarray(counts, dtype=np.int64).ravel()
    if np.any(c < 0):
        raise ValueError("counts must be nonnegative")
    nz = c[c > 0]
    if nz.size == 0:
        raise ValueError("all-zero counts")
    if K < nz.size:
        raise ValueError(f"alphabet size {K} smaller than observed support {nz.size}")
    vals, mult = np.unique(nz, return_counts=True)
    if K > nz.size:
        vals = np.concatenate(([0], vals))
        mult = np.concatenate(([K - nz.size], mult))
    return vals.astype(np.float64), mult.astype(np.float64), float(c.sum())


def _xi(beta, K):
    """A-priori expected entropy (nats) of a symmetric Dirichlet(beta)."""
    return digamma(K * beta + 1.0) - digamma(beta + 1.0)


@lru_cache(maxsize=64)
def _xi_grid(K: int, panels: int, order: int):
    """Quadrature nodes/weights on xi in (0, ln K) and matching beta values.

    The map xi(beta) depends only on K, so the inverted beta grid is
    cached and shared by every estimate over the same alphabet.
    """
    nodes, weights = np.polynomial.legendre.leggauss(order)
    ln_k = np.log(K)
    edges = np.linspace(0.0, ln_k, panels + 1)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        xs.append(half * nodes + 0.5 * (hi + lo))
        ws.append(half * weights)
    xi_nodes = np.concatenate(xs)
    xi_weights = np.concatenate(ws)

    betas = np.empty_like(xi_nodes)
    for j, target in enumerate(xi_nodes):
        lo, hi = 1e-12, 1.0
        while _xi(hi, K) < target:
            hi *= 4.0
            if hi > 1e15:
                raise NumericalError(f"beta bracket exhausted for xi={target}, K={K}")
        betas[j] = brentq(lambda b: _xi(b, K) - target, lo, hi, xtol=1e-14, rtol=1e-14)
    return xi_nodes, xi_weights, betas


def _dirichlet_moments(vals, mult, N, K, betas):
    """Posterior mean and second moment of H (nats) per concentration value.

    Closed-form Dirichlet-posterior expressions, vectorized over the
    beta grid and grouped by count multiplicities so the cost is
    O(n_nodes * n_distinct_counts).
    """
    b = betas[:, None]  # (J, 1)
    alpha = vals[None, :] + b  # (J, U)
    A = N + K * betas  # (J,)
    Ac = A[:, None]

    t = digamma(alpha + 1.0) - digamma(Ac + 2.0)
    mean = digamma(A + 1.0) - ((mult[None, :] * alpha * digamma(alpha + 1.0)).sum(axis=1)) / A

    s1 = (mult[None, :] * alpha * t).sum(axis=1)
    s2 = (mult[None, :] * (alpha * t) ** 2).sum(axis=1)
    s0 = (mult[None, :] * alpha**2).sum(axis=1)
    tri_A2 = polygamma(1, A + 2.0)
    cross = (s1**2 - s2 - tri_A2 * (A**2 - s0)) / (A * (A + 1.0))

    u = digamma(alpha + 2.0) - digamma(Ac + 2.0)
    same_terms = alpha * (alpha + 1.0) * (u**2 + polygamma(1, alpha + 2.0) - tri_A2[:, None])
    same = (mult[None, :] * same_terms).sum(axis=1) / (A * (A + 1.0))

    return mean, cross + same


def _log_evidence(vals, mult, N, K, betas):
    """log p(counts | beta) up to a beta-independent constant."""
    b = betas[:, None]
    kappa = K * betas
    per_bin = (mult[None, :] * (gammaln(vals[None, :] + b) - gammaln(b))).sum(axis=1)
    return gammaln(kappa) - gammaln(N + kappa) + per_bin


def _nsb_integrate(vals, mult, N, K, panels):
    xi_nodes, xi_weights, betas = _xi_grid(K, panels, _NSB_ORDER)
    log_ev = _log_evidence(vals, mult, N, K, betas)
    log_ev = log_ev - log_ev.max()
    w = xi_weights * np.exp(log_ev)
    total = w.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise NumericalError(
            f"NSB evidence integral degenerate (total={total}, K={K}, N={N})"
        )
    mean_h, second_h = _dirichlet_moments(vals, mult, N, K, betas)
    h1 = float((w * mean_h).sum() / total)
    h2 = float((w * second_h).sum() / total)
    return h1, h2


def nsb_entropy(counts, alphabet_size: int) -> EntropyEstimate:
    """Posterior-mean entropy under the NSB mixture-of-Dirichlet prior.

    The hyperprior is flat in the a-priori expected entropy
    xi(beta) in (0, ln K); the integral over xi uses a composite
    Gauss-Legendre rule with evidence weights evaluated in log space.
    Returns the estimate in bits, with the posterior standard deviation.
    """
    K = int(alphabet_size)
    if K < 1:
        raise ValueError(f"alphabet size must be >= 1, got {K}")
    if K == 1:
        np.asarray(counts)  # still validate counts below
        _multiplicities(counts, 1)
        return EntropyEstimate(value=0.0, method="nsb", posterior_sd=0.0)
    vals, mult, N = _multiplicities(counts, K)

    h1, h2 = _nsb_integrate(vals, mult, N, K, _NSB_PANELS)
    h1_check, _ = _nsb_integrate(vals, mult, N, K, _NSB_CHECK_PANELS)
    if abs(h1 - h1_check) / LN2 > 5e-3:
        raise NumericalError(
            "NSB quadrature did not converge: "
            f"{h1 / LN2:.6f} vs {h1_check / LN2:.6f} bits at half resolution "
            f"(K={K}, N={N})"
        )

    var = max(h2 - h1 * h1, 0.0)
    return EntropyEstimate(
        value=h1 / LN2, method="nsb", posterior_sd=float(np.sqrt(var)) / LN2
    )


def mutual_information(table: ContingencyTable, method: str = "nsb", clamp: bool = False) -> EntropyEstimate:
    """MI between the two labelings of a contingency table, in bits.

    MI = H(X) + H(Y) - H(X, Y), each term estimated with the chosen
    method; the NSB joint entropy uses alphabet size k_x * k_y.  The
    estimate is reported unclamped unless ``clamp`` is set (NSB values
    can dip below zero on independent data).
    """
    if method not in ("plugin", "nsb"):
        raise ValueError(f"unknown method {method!r}")
    cx = table.counts.sum(axis=1)
    cy = table.counts.sum(axis=0)
    if method == "plugin":
        hx = plugin_entropy(cx)
        hy = plugin_entropy(cy)
        hxy = plugin_entropy(table.counts)
        sd = None
    else:
        hx = nsb_entropy(cx, table.k_x)
        hy = nsb_entropy(cy, table.k_y)
        hxy = nsb_entropy(table.counts, table.k_x * table.k_y)
        sd = float(
            np.sqrt(hx.posterior_sd**2 + hy.posterior_sd**2 + hxy.posterior_sd**2)
        )
    mi = hx.value + hy.value - hxy.value
    if clamp:
        mi = max(mi, 0.0)
    return EntropyEstimate(value=mi, method=method, posterior_sd=sd)
