"""Texture synthesis by Gram-loss minimization in pixel space.

The objective is a per-layer weighted sum of squared Frobenius
distances between the Gram matrices of the synthesized and exemplar
images, each layer divided by 4*M*N^2 (M spatial samples, N channels).
That divisor makes the expected unweighted loss of standardized random
activations equal across layers, so no layer dominates by size alone.
Optimization runs unconstrained in normalized pixel space with L-BFGS
from a seeded Gaussian start; clamping to a displayable range is an
export concern, not part of the objective.
"""

from __future__ import annotations

import csv

import numpy as np

from texgram.engine.graph import NetworkGraph, Session
from texgram.gram import gram_matrix
from texgram.optim import LossReport, SynthesisConfig, lbfgs_minimize

__all__ = [
    "SynthesisConfig",
    "LossReport",
    "layer_gram_loss",
    "gram_loss_and_gradient",
    "lbfgs_minimize",
    "synthesize_texture",
    "save_loss_trace_csv",
]


def layer_gram_loss(G_hat, G, M: int, N: int) -> float:
    """Squared Frobenius distance over the full N x N matrices, / 4MN^2."""
    G_hat = np.asarray(G_hat, dtype=np.float64)
    G = np.asarray(G, dtype=np.float64)
    if G_hat.shape != G.shape or G_hat.shape != (N, N):
        raise ValueError(
            f"Gram shapes {G_hat.shape} / {G.shape} do not match N={N}"
        )
    if M < 1:
        raise ValueError("M must be >= 1")
    diff = G_hat - G
    return float((diff * diff).sum() / (4.0 * M * N * N))


def _resolve_weights(weights, n_taps):
    if weights is None:
        return np.ones(n_taps)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n_taps,):
        raise ValueError(f"{w.size} layer weights for {n_taps} taps")
    return w


def gram_loss_and_gradient(net: NetworkGraph, image, targets, weights=None):
    """Total Gram loss against per-tap targets, plus its pixel gradient.

    For each tap with activations F (N x M) and Gram G_hat = F F^T, the
    layer term is w * ||G_hat - G||_F^2 / (4 M N^2); its adjoint seeds
    the tap gradient 2 * (w * (G_hat - G) / (2 M N^2)) @ F, which the
    engine then pushes back to the pixels.
    """
    session = Session(net)
    taps = session.forward(image)
    if len(targets) != len(taps):
        raise ValueError(f"{len(targets)} targets for {len(taps)} taps")
    w = _resolve_weights(weights, len(taps))

    per_layer = []
    tap_grads = []
    for fm, target, wl in zip(taps, targets, w):
        F = fm.data.astype(np.float64, copy=False)
        N, M = fm.channels, fm.samples
        target = np.asarray(target, dtype=np.float64)
        if target.shape != (N, N):
            raise ValueError(
                f"tap {fm.layer_name!r}: target Gram {target.shape} for {N} channels"
            )
        diff = gram_matrix(F) - target
        per_layer.append(wl * float((diff * diff).sum()) / (4.0 * M * N * N))
        tap_grads.append((wl / (M * N * N)) * (diff @ F))
    grad = session.backward(tap_grads)
    report = LossReport(per_layer=per_layer, total=float(sum(per_layer)))
    return report, grad


def _gaussian_init(shape, seed):
    # counter-based generator: identical streams on every platform
    return np.random.Generator(np.random.Philox(seed)).standard_normal(shape)


def synthesize_texture(net: NetworkGraph, exemplar, config: SynthesisConfig,
                       init_image=None):
    """Synthesize an image whose Gram statistics match the exemplar's.

    The exemplar must already be preprocessed to the network's input
    spec.  The start point is unit Gaussian noise drawn from a Philox
    stream seeded with ``config.seed`` (or ``init_image`` when given),
    so equal seed + config + exemplar reproduce the output bit-exactly.

    Returns ``(image, report)`` with the image in normalized space;
    ``report.trace`` holds the total loss at every accepted step and
    ``report.per_layer_trace`` the matching per-tap terms.
    """
    exemplar = np.asarray(exemplar, dtype=np.float64)
    targets = [gram_matrix(fm) for fm in Session(net).forward(exemplar)]

    if init_image is not None:
        x0 = np.asarray(init_image, dtype=np.float64)
        if x0.shape != exemplar.shape:
            raise ValueError(f"init image shape {x0.shape} != exemplar {exemplar.shape}")
    else:
        x0 = _gaussian_init(exemplar.shape, config.seed)

    def objective(x):
        rep, grad = gram_loss_and_gradient(net, x, targets, config.layer_weights)
        return rep.total, grad

    def per_layer_at(x):
        session = Session(net)
        taps = session.forward(x)
        w = _resolve_weights(config.layer_weights, len(taps))
        out = []
        for fm, target, wl in zip(taps, targets, w):
            out.append(wl * layer_gram_loss(
                gram_matrix(fm), target, fm.samples, fm.channels
            ))
        return out

    per_layer_trace = [per_layer_at(x0)]

    def on_accept(_iteration, x, _value):
        per_layer_trace.append(per_layer_at(x))

    result, run = lbfgs_minimize(objective, x0, config, on_accept=on_accept)
    final_layers = per_layer_trace[-1]
    report = LossReport(
        per_layer=final_layers,
        total=float(sum(final_layers)),
        trace=run.trace,
        iterations=run.iterations,
        converged=run.converged,
        stop_reason=run.stop_reason,
        per_layer_trace=per_layer_trace,
    )
    return result, report


def save_loss_trace_csv(path, report: LossReport) -> None:
    """Write (iteration, total, per_layer...) rows for every accepted step."""
    layers = report.per_layer_trace
    if layers is None:
        layers = [[t] for t in report.trace]
    n_layers = len(layers[0]) if layers else len(report.per_layer)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "total"] + [f"layer_{i + 1}" for i in range(n_layers)])
        for i, (total, per_layer) in enumerate(zip(report.trace, layers)):
            w.writerow([i, repr(float(total))] + [repr(float(v)) for v in per_layer])
