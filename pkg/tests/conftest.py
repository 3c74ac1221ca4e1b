"""Shared builders: toy networks, bundles and synthetic datasets."""

from __future__ import annotations

import numpy as np
import pytest
from PIL import Image

from texgram.engine.bundle import save_model_bundle
from texgram.engine.graph import InputSpec, LayerNode, NetworkGraph


def conv_node(name, inputs, weight, stride=(1, 1), padding=(1, 1), bias=None):
    return LayerNode(
        name,
        "conv2d",
        {"weight": weight.astype(np.float32), "bias": bias,
         "stride": stride, "padding": padding},
        inputs,
    )


def tiny_conv_relu_net(seed=0, cin=3, size=12, channels=(6, 8, 10), taps=None):
    """Small random conv/relu stack, one tap per relu unless overridden."""
    r = np.random.default_rng(seed)
    nodes = []
    prev, prev_c = "input", cin
    tap_names = []
    for i, c in enumerate(channels, start=1):
        w = (r.normal(size=(c, prev_c, 3, 3)) * (0.8 / np.sqrt(prev_c * 9))).astype(np.float32)
        nodes.append(conv_node(f"conv{i}", [prev], w))
        nodes.append(LayerNode(f"relu{i}", "relu", {}, [f"conv{i}"]))
        prev, prev_c = f"relu{i}", c
        tap_names.append(f"relu{i}")
    return NetworkGraph(
        nodes=nodes,
        input_spec=InputSpec(shape=(cin, size, size), mean=[0.0] * cin, std=[1.0] * cin),
        taps=list(taps) if taps is not None else tap_names,
        model_name=f"tiny{seed}",
    )


def five_tap_toy_net(seed=0, cin=3, size=32, name="toy"):
    """Three random conv blocks with pools, tapped at five distinct nodes."""
    r = np.random.default_rng(seed)
    w1 = (r.normal(size=(8, cin, 3, 3)) * 0.5).astype(np.float32)
    w2 = (r.normal(size=(12, 8, 3, 3)) * 0.3).astype(np.float32)
    w3 = (r.normal(size=(16, 12, 3, 3)) * 0.25).astype(np.float32)
    nodes = [
        conv_node("conv1", ["input"], w1),
        LayerNode("relu1", "relu", {}, ["conv1"]),
        LayerNode("pool1", "maxpool",
                  {"kernel": (2, 2), "stride": (2, 2), "padding": (0, 0)}, ["relu1"]),
        conv_node("conv2", ["pool1"], w2),
        LayerNode("relu2", "relu", {}, ["conv2"]),
        conv_node("conv3", ["relu2"], w3),
        LayerNode("relu3", "relu", {}, ["conv3"]),
    ]
    return NetworkGraph(
        nodes=nodes,
        input_spec=InputSpec(shape=(cin, size, size), mean=[0.5] * 3, std=[0.25] * 3),
        taps=["relu1", "pool1", "relu2", "conv3", "relu3"],
        model_name=name,
    )


def write_toy_bundle(path, seed=0, size=32, name="toy"):
    net = five_tap_toy_net(seed=seed, size=size, name=name)
    save_model_bundle(path, net)
    return net


def _save_gray_png(path, arr):
    img = np.clip(arr, 0.0, 1.0)
    rgb = np.stack([img] * 3, axis=-1)
    Image.fromarray((rgb * 255).astype(np.uint8)).save(path)


def make_mini_dataset(root, n_per_class=20, size=32, seed=100):
    """Three texture families with clearly distinct channel correlations.

    Horizontal stripes, vertical stripes, and band-limited blobs; phases
    and frequencies jitter per image so the families are nontrivial but
    separable from second-order feature statistics.
    """
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:size, 0:size]
    (root / "hstripes").mkdir(parents=True, exist_ok=True)
    (root / "vstripes").mkdir(parents=True, exist_ok=True)
    (root / "blobs").mkdir(parents=True, exist_ok=True)
    for i in range(n_per_class):
        f = rng.uniform(0.5, 0.8)
        ph = rng.uniform(0, 2 * np.pi)
        _save_gray_png(root / "hstripes" / f"hstripes_{i:03d}.png",
                       0.5 + 0.45 * np.sin(2 * np.pi * f * ys / 4 + ph))
    for i in range(n_per_class):
        f = rng.uniform(0.5, 0.8)
        ph = rng.uniform(0, 2 * np.pi)
        _save_gray_png(root / "vstripes" / f"vstripes_{i:03d}.png",
                       0.5 + 0.45 * np.sin(2 * np.pi * f * xs / 4 + ph))
    kernel = np.outer(np.hanning(7), np.hanning(7))
    kernel /= kernel.sum()
    for i in range(n_per_class):
        noise = rng.normal(size=(size, size))
        spectrum = np.fft.rfft2(noise) * np.fft.rfft2(kernel, s=(size, size))
        smooth = np.fft.irfft2(spectrum, s=(size, size))
        smooth = (smooth - smooth.min()) / (smooth.max() - smooth.min())
        _save_gray_png(root / "blobs" / f"blobs_{i:03d}.png", smooth)
    return root


@pytest.fixture
def mini_dataset(tmp_path):
    return make_mini_dataset(tmp_path / "data")
