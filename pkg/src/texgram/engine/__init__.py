"""Minimal differentiable CNN inference engine.

Supports the layer vocabulary needed by the texture pipeline's model
pool: conv2d, relu, maxpool, avgpool, inference-mode batch norm,
elementwise add and channel concat.  Networks load from a portable
weight-bundle directory; forward passes expose tapped activations and
gradients at the taps can be pushed back to the input pixels.
"""

from texgram.engine.graph import (
    FeatureMap,
    InputSpec,
    LayerNode,
    NetworkGraph,
    Session,
    backward_to_input,
    forward_with_taps,
    infer_shapes,
)
from texgram.engine.bundle import load_model_bundle, save_model_bundle
from texgram.engine.ops import conv2d, conv2d_backward

__all__ = [
    "FeatureMap",
    "InputSpec",
    "LayerNode",
    "NetworkGraph",
    "Session",
    "backward_to_input",
    "forward_with_taps",
    "infer_shapes",
    "load_model_bundle",
    "save_model_bundle",
    "conv2d",
    "conv2d_backward",
]
