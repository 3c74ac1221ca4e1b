"""L-BFGS with a strong Wolfe line search.

Classic limited-memory BFGS: two-loop recursion over the last
``history_size`` curvature pairs, initial Hessian scaling
gamma = s.y / y.y, and a bracket-and-zoom line search enforcing the
strong Wolfe conditions (sufficient decrease c1, curvature c2).  Every
accepted step therefore strictly decreases the objective, which is what
makes the loss trace of a synthesis run monotone.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from texgram.errors import NumericalError

_ALPHA_MAX = 1e10
_MAX_BRACKET = 20
_MAX_ZOOM = 30


@dataclass
class SynthesisConfig:
    """Optimizer settings shared by plain L-BFGS runs and texture synthesis."""

    seed: int = 0
    max_iterations: int = 1000
    history_size: int = 10
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    grad_tolerance: float = 1e-7
    layer_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if not 0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise ValueError(
                f"need 0 < c1 < c2 < 1, got c1={self.wolfe_c1}, c2={self.wolfe_c2}"
            )
        if self.history_size < 1:
            raise ValueError("history_size must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class LossReport:
    """Loss bookkeeping for an optimization run.

    ``trace`` holds the objective at the start plus every accepted
    iterate; ``per_layer`` holds the final per-tap loss terms (a single
    entry for objectives without layer structure) and sums to ``total``.
    """

    per_layer: list[float]
    total: float
    trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    stop_reason: str = ""
    per_layer_trace: list[list[float]] | None = None


def _cubic_min(a, fa, dfa, b, fb, dfb):
    """Minimizer of the cubic interpolant on [a, b]; None if degenerate."""
    d1 = dfa + dfb - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - dfa * dfb
    if disc < 0.0:
        return None
    d2 = np.sqrt(disc) * np.sign(b - a)
    denom = dfb - dfa + 2.0 * d2
    if denom == 0.0:
        return None
    x = b - (b - a) * (dfb + d2 - d1) / denom
    return x if np.isfinite(x) else None


def _zoom(phi, lo, f_lo, d_lo, hi, f_hi, d_hi, f0, d0, c1, c2):
    """Strong Wolfe zoom stage on a bracketing interval."""
    for _ in range(_MAX_ZOOM):
        width = hi - lo
        trial = _cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi)
        lo_b, hi_b = (lo, hi) if lo < hi else (hi, lo)
        margin = 0.1 * abs(width)
        if trial is None or not lo_b + margin <= trial <= hi_b - margin:
            trial = 0.5 * (lo + hi)
        f_t, d_t = phi(trial)
        if f_t > f0 + c1 * trial * d0 or f_t >= f_lo:
            hi, f_hi, d_hi = trial, f_t, d_t
        else:
            if abs(d_t) <= -c2 * d0:
                return trial, f_t, d_t, True
            if d_t * (hi - lo) >= 0.0:
                hi, f_hi, d_hi = lo, f_lo, d_lo
            lo, f_lo, d_lo = trial, f_t, d_t
        if abs(hi - lo) <= 1e-14 * max(1.0, abs(lo)):
            break
    # interval collapsed: fall back to the best sufficient-decrease point
    if f_lo < f0:
        return lo, f_lo, d_lo, True
    return lo, f_lo, d_lo, False


def _line_search(phi, f0, d0, alpha0, c1, c2):
    """Bracket + zoom search satisfying the strong Wolfe conditions.

    ``phi(alpha)`` returns (value, directional derivative).  Returns
    (alpha, value, derivative, ok).
    """
    alpha_prev, f_prev, d_prev = 0.0, f0, d0
    alpha = alpha0
    for it in range(_MAX_BRACKET):
        f_a, d_a = phi(alpha)
        if f_a > f0 + c1 * alpha * d0 or (it > 0 and f_a >= f_prev):
            return _zoom(phi, alpha_prev, f_prev, d_prev, alpha, f_a, d_a, f0, d0, c1, c2)
        if abs(d_a) <= -c2 * d0:
            return alpha, f_a, d_a, True
        if d_a >= 0.0:
            return _zoom(phi, alpha, f_a, d_a, alpha_prev, f_prev, d_prev, f0, d0, c1, c2)
        alpha_prev, f_prev, d_prev = alpha, f_a, d_a
        alpha = min(2.0 * alpha, _ALPHA_MAX)
        if alpha_prev >= _ALPHA_MAX:
            break
    return alpha_prev, f_prev, d_prev, False


def lbfgs_minimize(objective, x0, config: SynthesisConfig, on_accept=None):
    """Minimize ``objective`` starting from ``x0``.

    ``objective(x)`` must deterministically return ``(value, gradient)``
    with the gradient shaped like ``x``.  Stops when the max-norm of the
    gradient drops below ``config.grad_tolerance``, after
    ``config.max_iterations`` accepted steps, or when the line search
    cannot make progress (reported in the result, not raised).

    ``on_accept(iteration, x, value)``, when given, fires after every
    accepted step.  Returns ``(x, report)`` where ``report.trace``
    lists the objective value at the start and after each accepted step.
    """
    shape = np.shape(x0)
    x = np.asarray(x0, dtype=np.float64).ravel().copy()
    if not np.all(np.isfinite(x)):
        raise NumericalError("non-finite values in the initial iterate")

    def evaluate(z):
        value, grad = objective(z.reshape(shape))
        return float(value), np.asarray(grad, dtype=np.float64).ravel()

    f, g = evaluate(x)
    if not np.isfinite(f):
        raise NumericalError(f"objective is non-finite at the initial point ({f})")

    trace = [f]
    s_hist: deque = deque(maxlen=config.history_size)
    y_hist: deque = deque(maxlen=config.history_size)
    converged = bool(np.max(np.abs(g)) < config.grad_tolerance)
    stop_reason = "gradient tolerance reached" if converged else "max iterations"
    n_iter = 0

    while not converged and n_iter < config.max_iterations:
        # two-loop recursion for the search direction
        q = g.copy()
        alphas = []
        for s, y in zip(reversed(s_hist), reversed(y_hist)):
            a = (s @ q) / (y @ s)
            alphas.append(a)
            q -= a * y
        if s_hist:
            s, y = s_hist[-1], y_hist[-1]
            q *= (s @ y) / (y @ y)
        for (s, y), a in zip(zip(s_hist, y_hist), reversed(alphas)):
            b = (y @ q) / (y @ s)
            q += (a - b) * s
        p = -q

        d0 = g @ p
        if d0 >= 0.0:  # stale curvature produced a non-descent direction
            s_hist.clear()
            y_hist.clear()
            p = -g
            d0 = g @ p
            if d0 >= 0.0:
                stop_reason = "zero gradient direction"
                break

        def phi(alpha, _x=x, _p=p):
            value, grad = evaluate(_x + alpha * _p)
            phi.last = (value, grad)
            return value, float(grad @ _p)

        alpha0 = 1.0 if s_hist else min(1.0, 1.0 / max(np.abs(g).sum(), 1e-12))
        alpha, f_new, _, ok = _line_search(
            phi, f, d0, alpha0, config.wolfe_c1, config.wolfe_c2
        )
        if not ok or not np.isfinite(f_new) or f_new >= f:
            stop_reason = "line-search failure"
            break

        _, g_new = phi.last
        s = alpha * p
        y = g_new - g
        if (s @ y) > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)

        x = x + s
        f, g = f_new, g_new
        trace.append(f)
        n_iter += 1
        if on_accept is not None:
            on_accept(n_iter, x.reshape(shape), f)
        if np.max(np.abs(g)) < config.grad_tolerance:
            converged = True
            stop_reason = "gradient tolerance reached"

    report = LossReport(
        per_layer=[f],
        total=f,
        trace=trace,
        iterations=n_iter,
        converged=converged,
        stop_reason=stop_reason,
    )
    return x.reshape(shape), report
