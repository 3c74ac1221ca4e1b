"""Portable weight bundle: manifest.json plus raw float32 blobs.

A bundle directory contains a UTF-8 ``manifest.json`` describing the
graph (format_version, model_name, input_spec, nodes, taps) and one
headerless blob file per tensor holding little-endian 32-bit floats in
row-major order.  Blob byte length must equal 4 * prod(shape); sha256
checksums, when present in the manifest, are verified on load.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from texgram.engine.graph import InputSpec, LayerNode, NetworkGraph
from texgram.errors import BundleError

BUNDLE_FORMAT_VERSION = 1

_TENSOR_KEYS = {
    "conv2d": ("weight", "bias"),
    "batchnorm-inference": ("gamma", "beta", "mean", "var"),
}
_SHAPE_KEYS = {
    "conv2d": ("stride", "padding"),
    "maxpool": ("kernel", "stride", "padding"),
    "avgpool": ("kernel", "stride", "padding"),
}


def _load_blob(root: Path, ref: dict, context: str) -> np.ndarray:
    try:
        blob_name = ref["blob"]
        shape = tuple(int(s) for s in ref["shape"])
    except (KeyError, TypeError) as exc:
        raise BundleError(f"{context}: malformed blob reference {ref!r}") from exc
    path = root / blob_name
    if not path.is_file():
        raise BundleError(f"{context}: missing blob file {blob_name!r}")
    raw = path.read_bytes()
    expected = 4 * math.prod(shape)
    if len(raw) != expected:
        raise BundleError(
            f"{context}: shape mismatch for blob {blob_name!r}: "
            f"{len(raw)} bytes on disk, manifest shape {list(shape)} needs {expected}"
        )
    digest = ref.get("sha256")
    if digest is not None and hashlib.sha256(raw).hexdigest() != digest:
        raise BundleError(f"{context}: checksum mismatch for blob {blob_name!r}")
    arr = np.frombuffer(raw, dtype="<f4").reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise BundleError(f"{context}: non-finite values in blob {blob_name!r}")
    return arr.copy()


def load_model_bundle(path) -> NetworkGraph:
    """Load and validate a weight bundle directory into a NetworkGraph."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise BundleError(f"missing manifest: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise BundleError(f"corrupt manifest {manifest_path}: {exc}") from exc

    version = manifest.get("format_version")
    if version != BUNDLE_FORMAT_VERSION:
        raise BundleError(f"unsupported bundle format_version {version!r}")
    try:
        spec = manifest["input_spec"]
        input_spec = InputSpec(shape=spec["shape"], mean=spec["mean"], std=spec["std"])
        raw_nodes = manifest["nodes"]
        taps = list(manifest["taps"])
    except (KeyError, TypeError, ValueError) as exc:
        raise BundleError(f"corrupt manifest {manifest_path}: {exc}") from exc

    nodes = []
    for entry in raw_nodes:
        try:
            name, kind = entry["name"], entry["kind"]
            inputs = list(entry["inputs"])
            raw_params = dict(entry.get("params", {}))
        except (KeyError, TypeError) as exc:
            raise BundleError(f"malformed node entry {entry!r}") from exc
        context = f"node {name!r}"
        params = {}
        for key in _TENSOR_KEYS.get(kind, ()):
            ref = raw_params.get(key)
            if ref is None:
                if kind == "conv2d" and key == "bias":
                    params["bias"] = None
                    continue
                raise BundleError(f"{context}: missing tensor parameter {key!r}")
            params[key] = _load_blob(root, ref, context)
        for key in _SHAPE_KEYS.get(kind, ()):
            if key not in raw_params:
                raise BundleError(f"{context}: missing parameter {key!r}")
            params[key] = tuple(int(v) for v in raw_params[key])
        if kind == "batchnorm-inference":
            params["eps"] = float(raw_params.get("eps", 1e-5))
        nodes.append(LayerNode(name=name, kind=kind, params=params, inputs=inputs))

    net = NetworkGraph(
        nodes=nodes,
        input_spec=input_spec,
        taps=taps,
        model_name=str(manifest.get("model_name", root.name)),
    )
    net.validate()
    return net


def save_model_bundle(path, net: NetworkGraph) -> None:
    """Write a NetworkGraph as a bundle directory (with checksums)."""
    net.validate()
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for node in net.nodes:
        raw_params = {}
        for key in _SHAPE_KEYS.get(node.kind, ()):
            raw_params[key] = list(node.params[key])
        if node.kind == "batchnorm-inference":
            raw_params["eps"] = float(node.params["eps"])
        for key in _TENSOR_KEYS.get(node.kind, ()):
            tensor = node.params.get(key)
            if tensor is None:
                continue
            blob_name = f"{node.name}.{key}.bin"
            payload = np.ascontiguousarray(tensor, dtype="<f4").tobytes()
            (root / blob_name).write_bytes(payload)
            raw_params[key] = {
                "blob": blob_name,
                "shape": list(np.shape(tensor)),
                "sha256": hashlib.sha256(payload).hexdigest(),
            }
        entries.append(
            {"name": node.name, "kind": node.kind, "params": raw_params, "inputs": node.inputs}
        )
    manifest = {
        "format_version": BUNDLE_FORMAT_VERSION,
        "model_name": net.model_name,
        "input_spec": {
            "shape": list(net.input_spec.shape),
            "mean": [float(v) for v in net.input_spec.mean],
            "std": [float(v) for v in net.input_spec.std],
        },
        "nodes": entries,
        "taps": list(net.taps),
    }
    (root / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
