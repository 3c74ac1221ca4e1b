"""Network graph representation and execution sessions.

A NetworkGraph is an immutable, topologically ordered list of nodes
plus an input spec and a list of tapped node names.  Execution state
(cached activations, pooling switches) lives in a Session so that one
graph can serve many images, one session per image.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from texgram.engine import ops
from texgram.errors import BundleError, NumericalError

INPUT_NAME = "input"

LAYER_KINDS = (
    "conv2d",
    "relu",
    "maxpool",
    "avgpool",
    "batchnorm-inference",
    "add",
    "concat",
)


@dataclass
class FeatureMap:
    """Activations of one tapped layer: channels x samples."""

    layer_name: str
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 2 or self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ValueError(
                f"feature map must be channels x samples with both >= 1, got {self.data.shape}"
            )

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def samples(self) -> int:
        return self.data.shape[1]


@dataclass
class InputSpec:
    shape: tuple[int, int, int]
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.shape = tuple(int(s) for s in self.shape)
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if len(self.shape) != 3:
            raise ValueError(f"input shape must be C x H x W, got {self.shape}")
        if self.mean.shape != (self.shape[0],) or self.std.shape != (self.shape[0],):
            raise ValueError("mean/std must have one entry per input channel")


@dataclass
class LayerNode:
    name: str
    kind: str
    params: dict
    inputs: list[str]


@dataclass
class NetworkGraph:
    nodes: list[LayerNode]
    input_spec: InputSpec
    taps: list[str]
    model_name: str = ""
    _by_name: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._by_name = {n.name: n for n in self.nodes}

    def node(self, name: str) -> LayerNode:
        return self._by_name[name]

    def validate(self) -> dict:
        """Structural checks plus shape inference; returns name -> (C, H, W)."""
        seen = {INPUT_NAME}
        for node in self.nodes:
            if node.name in seen:
                raise BundleError(f"duplicate or reserved node name {node.name!r}")
            if node.kind not in LAYER_KINDS:
                raise BundleError(f"unknown layer kind {node.kind!r} in node {node.name!r}")
            for ref in node.inputs:
                if ref not in seen:
                    raise BundleError(
                        f"node {node.name!r} references {ref!r} before definition "
                        "(dangling input or non-topological order)"
                    )
            seen.add(node.name)
        for tap in self.taps:
            if tap not in seen or tap == INPUT_NAME:
                raise BundleError(f"tap {tap!r} does not name a graph node")
        return infer_shapes(self)


def _pool_shape(shape, kernel, stride, padding, what):
    c, h, w = shape
    ho = (h + 2 * padding[0] - kernel[0]) // stride[0] + 1
    wo = (w + 2 * padding[1] - kernel[1]) // stride[1] + 1
    if ho <= 0 or wo <= 0:
        raise BundleError(f"{what}: nonpositive output extent {ho}x{wo}")
    return c, ho, wo


def infer_shapes(net: NetworkGraph) -> dict:
    """Propagate C x H x W shapes through the graph, validating params."""
    shapes = {INPUT_NAME: tuple(net.input_spec.shape)}
    for node in net.nodes:
        ins = [shapes[i] for i in node.inputs]
        p = node.params
        if node.kind == "conv2d":
            try:
                shapes[node.name] = ops.conv_output_shape(
                    ins[0], p["weight"].shape, p["stride"], p["padding"]
                )
            except ValueError as exc:
                raise BundleError(f"node {node.name!r}: {exc}") from exc
        elif node.kind in ("relu", "batchnorm-inference"):
            if node.kind == "batchnorm-inference" and p["gamma"].shape[0] != ins[0][0]:
                raise BundleError(
                    f"node {node.name!r}: {p['gamma'].shape[0]} norm channels "
                    f"for {ins[0][0]}-channel input"
                )
            shapes[node.name] = ins[0]
        elif node.kind in ("maxpool", "avgpool"):
            shapes[node.name] = _pool_shape(
                ins[0], p["kernel"], p["stride"], p["padding"], f"node {node.name!r}"
            )
        elif node.kind == "add":
            if len(ins) != 2 or ins[0] != ins[1]:
                raise BundleError(f"node {node.name!r}: add requires two equal shapes, got {ins}")
            shapes[node.name] = ins[0]
        elif node.kind == "concat":
            if len(ins) < 2 or any(s[1:] != ins[0][1:] for s in ins):
                raise BundleError(
                    f"node {node.name!r}: concat requires matching spatial extents, got {ins}"
                )
            shapes[node.name] = (sum(s[0] for s in ins),) + ins[0][1:]
    return shapes


def _ancestors_of_taps(net: NetworkGraph) -> set:
    needed = set(net.taps)
    for node in reversed(net.nodes):
        if node.name in needed:
            needed.update(i for i in node.inputs if i != INPUT_NAME)
    return needed


class Session:
    """Per-image forward/backward state over a shared immutable graph.

    Only nodes on a path from the input to a tap are executed; their
    activations are retained for the backward pass, everything else is
    skipped entirely.
    """

    def __init__(self, net: NetworkGraph):
        self.net = net
        self._needed = _ancestors_of_taps(net)
        self._acts = None
        self._switches = {}
        self._image = None

    def forward(self, image) -> list[FeatureMap]:
        image = np.asarray(image)
        if image.shape != tuple(self.net.input_spec.shape):
            raise ValueError(
                f"image shape {image.shape} does not match input spec "
                f"{tuple(self.net.input_spec.shape)}"
            )
        acts = {INPUT_NAME: image}
        self._switches = {}
        for node in self.net.nodes:
            if node.name not in self._needed:
                continue
            ins = [acts[i] for i in node.inputs]
            p = node.params
            if node.kind == "conv2d":
                out = ops.conv2d(ins[0], p["weight"], p.get("bias"), p["stride"], p["padding"])
            elif node.kind == "relu":
                out = ops.relu(ins[0])
            elif node.kind == "maxpool":
                out, sw = ops.maxpool(ins[0], p["kernel"], p["stride"], p["padding"])
                self._switches[node.name] = sw
            elif node.kind == "avgpool":
                out = ops.avgpool(ins[0], p["kernel"], p["stride"], p["padding"])
            elif node.kind == "batchnorm-inference":
                out = ops.batchnorm_inference(
                    ins[0], p["gamma"], p["beta"], p["mean"], p["var"], p["eps"]
                )
            elif node.kind == "add":
                out = (ins[0] + ins[1]).astype(ins[0].dtype)
            elif node.kind == "concat":
                out = np.concatenate(ins, axis=0)
            else:  # pragma: no cover - kinds validated at load
                raise BundleError(f"unknown layer kind {node.kind!r}")
            acts[node.name] = out
        self._acts = acts
        self._image = image
        taps = []
        for name in self.net.taps:
            a = acts[name]
            if not np.all(np.isfinite(a)):
                raise NumericalError(f"non-finite activation at tap {name!r}")
            taps.append(FeatureMap(layer_name=name, data=a.reshape(a.shape[0], -1)))
        return taps

    def tap_shapes(self) -> list[tuple]:
        shapes = infer_shapes(self.net)
        return [shapes[t] for t in self.net.taps]

    def backward(self, tap_grads) -> np.ndarray:
        """Pixel gradient of sum_taps <tap_grad, tap_activation>."""
        if self._acts is None:
            raise RuntimeError("backward called before forward on this session")
        acts = self._acts
        grads = {}
        if len(tap_grads) != len(self.net.taps):
            raise ValueError(
                f"{len(tap_grads)} tap gradients for {len(self.net.taps)} taps"
            )
        for name, g in zip(self.net.taps, tap_grads):
            g = np.asarray(getattr(g, "data", g))
            target = acts[name]
            if g.size != target.size:
                raise ValueError(
                    f"tap {name!r}: gradient has {g.size} values, activation has {target.size}"
                )
            g = g.reshape(target.shape)
            if name in grads:
                grads[name] = grads[name] + g
            else:
                grads[name] = g.copy()

        def accumulate(name, contribution):
            if name in grads:
                grads[name] = grads[name] + contribution
            else:
                grads[name] = contribution

        for node in reversed(self.net.nodes):
            if node.name not in grads:
                continue
            g = grads.pop(node.name)
            ins = [acts[i] for i in node.inputs]
            p = node.params
            if node.kind == "conv2d":
                dx, _, _ = ops.conv2d_backward(
                    g, ins[0], p["weight"], p["stride"], p["padding"], with_weight_grad=False
                )
                accumulate(node.inputs[0], dx)
            elif node.kind == "relu":
                accumulate(node.inputs[0], ops.relu_backward(g, acts[node.name]))
            elif node.kind == "maxpool":
                accumulate(
                    node.inputs[0],
                    ops.maxpool_backward(
                        g, self._switches[node.name], ins[0].shape,
                        p["kernel"], p["stride"], p["padding"],
                    ),
                )
            elif node.kind == "avgpool":
                accumulate(
                    node.inputs[0],
                    ops.avgpool_backward(g, ins[0].shape, p["kernel"], p["stride"], p["padding"]),
                )
            elif node.kind == "batchnorm-inference":
                accumulate(node.inputs[0], ops.batchnorm_backward(g, p["gamma"], p["var"], p["eps"]))
            elif node.kind == "add":
                accumulate(node.inputs[0], g)
                accumulate(node.inputs[1], g)
            elif node.kind == "concat":
                offset = 0
                for ref, x_in in zip(node.inputs, ins):
                    c = x_in.shape[0]
                    accumulate(ref, g[offset : offset + c])
                    offset += c
        return grads.get(INPUT_NAME, np.zeros_like(self._image))


def forward_with_taps(net: NetworkGraph, image) -> list[FeatureMap]:
    """One-shot deterministic forward pass returning the tapped activations."""
    return Session(net).forward(image)


def backward_to_input(net: NetworkGraph, image, tap_grads) -> np.ndarray:
    """One-shot pixel gradient: runs its own forward, then the adjoint pass."""
    session = Session(net)
    session.forward(image)
    return session.backward(tap_grads)
