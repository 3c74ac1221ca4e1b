"""End-to-end orchestration of the texture analysis stages.

Stages: extract -> gram -> rdm -> cluster -> mi -> correlate, plus
synthesize and report.  Every stage writes its artifacts into a
content-addressed cache directory keyed by a hash of (stage, the
configuration that affects it, upstream keys), so reruns with
unchanged inputs are cache hits and produce byte-identical CSVs, and
any deleted downstream artifact is rebuilt exactly from upstream ones.
"""

from __future__ import annotations

import csv
import hashlib
import json
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from texgram import storage
from texgram.clustering import (
    cut_tree,
    save_assignment_csv,
    save_dendrogram_csv,
    ward_linkage,
)
from texgram.dataset import (
    DatasetIndex,
    export_image,
    ingest_brainscore_csv,
    ingest_dataset,
    packaged_brainscore_csv,
    preprocess_image,
)
from texgram.engine import Session, load_model_bundle
from texgram.errors import ConfigError, DataError
from texgram.gram import gram_matrix, gram_vectorize
from texgram.infotheory import contingency_table, mutual_information
from texgram.optim import SynthesisConfig
from texgram.rdm import RDM, compute_rdm, sort_by_class
from texgram.stats import (
    BRAINSCORE_METRICS,
    CorrelationResult,
    correlate_mi_brainscore,
)
from texgram.synthesis import save_loss_trace_csv, synthesize_texture

PIPELINE_VERSION = 1

STAGES = ("extract", "gram", "rdm", "cluster", "mi", "correlate", "synthesize", "report")

DISTANCE_VARIANTS = ("upper-tri", "full-frobenius")
MI_METHODS = ("plugin", "nsb")


@dataclass
class ModelSpec:
    name: str
    bundle: str
    taps: list[str] | None = None


@dataclass
class PipelineConfig:
    models: list[ModelSpec]
    dataset_root: str
    cache_dir: str
    out_dir: str
    distance: str = "upper-tri"
    standardize: bool = False
    mi_method: str = "nsb"
    k: int | None = None  # defaults to the number of dataset classes
    seed: int = 0
    workers: int = 1
    brainscore_csv: str | None = None
    synthesis_exemplars: list[str] = field(default_factory=list)
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)

    def __post_init__(self):
        if not self.models:
            raise ConfigError("config lists no models")
        names = [m.name for m in self.models]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate model names in config: {names}")
        if self.distance not in DISTANCE_VARIANTS:
            raise ConfigError(f"distance must be one of {DISTANCE_VARIANTS}, got {self.distance!r}")
        if self.mi_method not in MI_METHODS:
            raise ConfigError(f"mi_method must be one of {MI_METHODS}, got {self.mi_method!r}")
        if self.k is not None and self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


def load_config(path) -> PipelineConfig:
    """Read a JSON config file; relative paths resolve against its directory."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    base = path.parent

    def resolve(p):
        return str((base / p).resolve()) if p and not Path(p).is_absolute() else p

    try:
        models = [
            ModelSpec(
                name=m["name"],
                bundle=resolve(m["bundle"]),
                taps=m.get("taps"),
            )
            for m in raw["models"]
        ]
        syn_raw = dict(raw.get("synthesis", {}))
        exemplars = [resolve(p) for p in syn_raw.pop("exemplars", [])]
        synthesis = SynthesisConfig(**syn_raw)
        return PipelineConfig(
            models=models,
            dataset_root=resolve(raw["dataset_root"]),
            cache_dir=resolve(raw["cache_dir"]),
            out_dir=resolve(raw["out_dir"]),
            distance=raw.get("distance", "upper-tri"),
            standardize=bool(raw.get("standardize", False)),
            mi_method=raw.get("mi_method", "nsb"),
            k=raw.get("k"),
            seed=int(raw.get("seed", 0)),
            workers=int(raw.get("workers", 1)),
            brainscore_csv=resolve(raw.get("brainscore_csv")),
            synthesis_exemplars=exemplars,
            synthesis=synthesis,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad config {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# cache plumbing
# ---------------------------------------------------------------------------


def _hash_payload(payload) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def _file_sha(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _map_ordered(fn, items, workers):
    """Apply fn over items, preserving order regardless of scheduling."""
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


class _Run:
    """Shared state for one pipeline invocation: config, dataset, bundles."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.cache = Path(config.cache_dir)
        self.cache.mkdir(parents=True, exist_ok=True)
        self.index: DatasetIndex = ingest_dataset(config.dataset_root)
        self._dataset_fp = None
        self._nets = {}

    # -- fingerprints -------------------------------------------------

    def dataset_fingerprint(self) -> str:
        if self._dataset_fp is None:
            entries = [
                (item_id, _file_sha(path))
                for (path, _), item_id in zip(self.index.items, self.index.item_ids)
            ]
            self._dataset_fp = _hash_payload(entries)
        return self._dataset_fp

    def bundle_fingerprint(self, spec: ModelSpec) -> str:
        manifest = Path(spec.bundle) / "manifest.json"
        if not manifest.is_file():
            raise DataError(f"model {spec.name!r}: missing bundle manifest {manifest}")
        return _hash_payload(
            {"manifest": _file_sha(manifest), "taps": spec.taps}
        )

    def net(self, spec: ModelSpec):
        if spec.name not in self._nets:
            net = load_model_bundle(spec.bundle)
            if spec.taps:
                net.taps = list(spec.taps)
                net.validate()
            self._nets[spec.name] = net
        return self._nets[spec.name]

    # -- stage directories ---------------------------------------------

    def stage_dir(self, stage: str, payload) -> tuple[Path, bool]:
        """(directory, hit) for a content-addressed stage invocation."""
        key = _hash_payload({"stage": stage, "version": PIPELINE_VERSION, **payload})
        d = self.cache / f"{stage}-{key}"
        marker = d / "COMPLETE"
        if marker.is_file():
            return d, True
        if d.exists():  # stale or interrupted: reject and rebuild
            shutil.rmtree(d)
        d.mkdir(parents=True)
        return d, False

    @staticmethod
    def finish(d: Path):
        (d / "COMPLETE").write_text("ok\n", encoding="utf-8")


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------


def _stage_extract(run: _Run, spec: ModelSpec) -> Path:
    payload = {
        "model": spec.name,
        "bundle": run.bundle_fingerprint(spec),
        "dataset": run.dataset_fingerprint(),
    }
    d, hit = run.stage_dir("extract", payload)
    if hit:
        return d
    net = run.net(spec)
    taps = list(net.taps)

    def one(args):
        idx, (path, _cid) = args
        image = preprocess_image(path, net.input_spec)
        fmaps = Session(net).forward(image)
        for t, fm in enumerate(fmaps):
            storage.save_feature_map(d / f"img{idx:05d}_tap{t + 1}.fmap", fm.data)
        return idx

    _map_ordered(one, list(enumerate(run.index.items)), run.config.workers)
    (d / "index.json").write_text(
        json.dumps(
            {"model": spec.name, "taps": taps, "item_ids": run.index.item_ids},
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    run.finish(d)
    return d


def _stage_gram(run: _Run, spec: ModelSpec) -> Path:
    upstream = _stage_extract(run, spec)
    payload = {"model": spec.name, "extract": upstream.name}
    d, hit = run.stage_dir("gram", payload)
    if hit:
        return d
    meta = json.loads((upstream / "index.json").read_text(encoding="utf-8"))
    n_taps = len(meta["taps"])

    def one(idx):
        for t in range(1, n_taps + 1):
            F = storage.load_feature_map(upstream / f"img{idx:05d}_tap{t}.fmap")
            vec = gram_vectorize(gram_matrix(F))
            storage.save_gram_record(d / f"img{idx:05d}_tap{t}.gram", vec, F.shape[0])
        return idx

    _map_ordered(one, range(len(meta["item_ids"])), run.config.workers)
    shutil.copy(upstream / "index.json", d / "index.json")
    run.finish(d)
    return d


def _distance_vectors(vec_rows, n, variant, standardize):
    V = np.asarray(vec_rows, dtype=np.float64)
    if variant == "full-frobenius":
        # weight off-diagonal entries by sqrt(2) so distances equal the
        # Frobenius distance between the full symmetric matrices
        iu, ju = np.triu_indices(n)
        w = np.where(iu == ju, 1.0, np.sqrt(2.0))
        V = V * w
    if standardize:
        mu = V.mean(axis=1, keepdims=True)
        sd = V.std(axis=1, keepdims=True)
        sd[sd == 0.0] = 1.0
        V = (V - mu) / sd
    return V


def _tap_range(meta, layer):
    n = len(meta["taps"])
    if layer is None:
        return list(range(1, n + 1))
    if not 1 <= layer <= n:
        raise ConfigError(f"--layer {layer} out of range 1..{n}")
    return [layer]


def _stage_rdm(run: _Run, spec: ModelSpec, layer=None) -> Path:
    upstream = _stage_gram(run, spec)
    cfg = run.config
    payload = {
        "model": spec.name,
        "gram": upstream.name,
        "distance": cfg.distance,
        "standardize": cfg.standardize,
        "layer": layer,
    }
    d, hit = run.stage_dir("rdm", payload)
    if hit:
        return d
    meta = json.loads((upstream / "index.json").read_text(encoding="utf-8"))
    item_ids = meta["item_ids"]
    for t in _tap_range(meta, layer):
        rows = []
        n = None
        for idx in range(len(item_ids)):
            vec, n = storage.load_gram_record(upstream / f"img{idx:05d}_tap{t}.gram")
            rows.append(vec)
        V = _distance_vectors(rows, n, cfg.distance, cfg.standardize)
        rdm = compute_rdm(V, item_ids=item_ids)
        storage.save_rdm_file(
            d / f"layer{t}.rdm",
            rdm.values,
            {
                "model": spec.name,
                "layer": meta["taps"][t - 1],
                "layer_index": t,
                "item_ids": item_ids,
                "distance_variant": cfg.distance,
            },
        )
    shutil.copy(upstream / "index.json", d / "index.json")
    run.finish(d)
    return d


def _stage_cluster(run: _Run, spec: ModelSpec, layer=None) -> Path:
    upstream = _stage_rdm(run, spec, layer)
    k = run.config.k or len(run.index.class_names)
    payload = {"model": spec.name, "rdm": upstream.name, "k": k, "layer": layer}
    d, hit = run.stage_dir("cluster", payload)
    if hit:
        return d
    meta = json.loads((upstream / "index.json").read_text(encoding="utf-8"))
    for t in _tap_range(meta, layer):
        values, rmeta = storage.load_rdm_file(upstream / f"layer{t}.rdm")
        tree = ward_linkage(values)
        assignment = cut_tree(tree, k)
        save_dendrogram_csv(d / f"layer{t}_dendrogram.csv", tree)
        save_assignment_csv(d / f"layer{t}_assignment.csv", assignment, rmeta["item_ids"])
    shutil.copy(upstream / "index.json", d / "index.json")
    run.finish(d)
    return d


def _read_assignment(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        return np.array([int(row["cluster"]) for row in reader], dtype=np.int64)


def _stage_mi(run: _Run) -> Path:
    cluster_dirs = {m.name: _stage_cluster(run, m) for m in run.config.models}
    k = run.config.k or len(run.index.class_names)
    payload = {
        "clusters": {name: d.name for name, d in cluster_dirs.items()},
        "method": run.config.mi_method,
        "k": k,
    }
    d, hit = run.stage_dir("mi", payload)
    if hit:
        return d
    true_labels = run.index.labels
    n_classes = len(run.index.class_names)
    mi_rows = []
    best_rows = []
    for spec in run.config.models:
        cdir = cluster_dirs[spec.name]
        meta = json.loads((cdir / "index.json").read_text(encoding="utf-8"))
        per_layer = {}
        for t in range(1, len(meta["taps"]) + 1):
            found = _read_assignment(cdir / f"layer{t}_assignment.csv")
            table = contingency_table(true_labels, found, k_x=n_classes, k_y=k)
            for method in MI_METHODS:
                est = mutual_information(table, method=method)
                mi_rows.append(
                    [spec.name, t, method, _fmt(est.value), _fmt(est.posterior_sd)]
                )
                per_layer.setdefault(method, []).append(est.value)
        chosen = per_layer[run.config.mi_method]
        best_t = int(np.argmax(chosen)) + 1
        best_rows.append([spec.name, best_t, _fmt(chosen[best_t - 1])])
    _write_csv(
        d / "mi.csv",
        ["model", "layer_index", "method", "mi_bits", "posterior_sd"],
        mi_rows,
    )
    _write_csv(d / "best_mi.csv", ["model", "layer_index", "mi_bits"], best_rows)
    run.finish(d)
    return d


def _load_best_mi(mi_dir: Path) -> dict:
    with open(mi_dir / "best_mi.csv", "r", encoding="utf-8", newline="") as fh:
        return {row["model"]: float(row["mi_bits"]) for row in csv.DictReader(fh)}


def _brainscore_records(run: _Run):
    path = run.config.brainscore_csv or packaged_brainscore_csv()
    records = ingest_brainscore_csv(path)
    wanted = {m.name for m in run.config.models}
    by_model = {r.model: r for r in records}
    missing = sorted(wanted - set(by_model))
    if missing:
        raise DataError(f"benchmark CSV {path} lacks models: {missing}")
    return [by_model[name] for name in sorted(wanted)], str(path)


def _stage_correlate(run: _Run) -> Path:
    mi_dir = _stage_mi(run)
    records, bs_path = _brainscore_records(run)
    payload = {"mi": mi_dir.name, "brainscore": _file_sha(bs_path)}
    d, hit = run.stage_dir("correlate", payload)
    if hit:
        return d
    best = _load_best_mi(mi_dir)
    results = correlate_mi_brainscore(best, records)
    rows = [
        [res.metric, _fmt(res.r), _fmt(res.p), res.n,
         str(res.significant), str(res.undefined_variance)]
        for res in results
    ]
    _write_csv(
        d / "correlation.csv",
        ["metric", "r", "p", "n", "significant", "undefined_variance"],
        rows,
    )
    run.finish(d)
    return d


def _stage_synthesize(run: _Run) -> Path:
    cfg = run.config
    if not cfg.synthesis_exemplars:
        raise ConfigError("synthesize stage requires synthesis.exemplars in the config")
    payload = {
        "bundles": {m.name: run.bundle_fingerprint(m) for m in cfg.models},
        "exemplars": [_file_sha(p) for p in cfg.synthesis_exemplars],
        "synthesis": vars(cfg.synthesis).copy(),
        "seed": cfg.seed,
    }
    d, hit = run.stage_dir("synthesize", payload)
    if hit:
        return d
    for spec in cfg.models:
        net = run.net(spec)
        for ex_path in cfg.synthesis_exemplars:
            exemplar = preprocess_image(ex_path, net.input_spec).astype(np.float64)
            out, report = synthesize_texture(net, exemplar, cfg.synthesis)
            stem = f"{spec.name}_{Path(ex_path).stem}_seed{cfg.synthesis.seed}"
            export_image(d / f"{stem}.png", out, net.input_spec)
            save_loss_trace_csv(d / f"{stem}_trace.csv", report)
    run.finish(d)
    return d


def _stage_report(run: _Run, layer=None) -> Path:
    from texgram import figures  # deferred: pulls in matplotlib

    cfg = run.config
    rdm_dirs = {m.name: _stage_rdm(run, m) for m in cfg.models}
    mi_dir = _stage_mi(run)
    corr_dir = _stage_correlate(run)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    labels = run.index.labels
    # class-sorted distance heatmaps, one per model and tap
    for spec in cfg.models:
        rdir = rdm_dirs[spec.name]
        meta = json.loads((rdir / "index.json").read_text(encoding="utf-8"))
        for t in _tap_range(meta, layer):
            values, rmeta = storage.load_rdm_file(rdir / f"layer{t}.rdm")
            rdm = RDM(values=values, item_ids=rmeta["item_ids"])
            ordered = sort_by_class(rdm, labels)
            sorted_labels = labels[np.argsort(labels, kind="stable")]
            boundaries = np.flatnonzero(np.diff(sorted_labels)) + 1
            stem = f"rdm_{spec.name}_layer{t}"
            figures.save_heatmap_png(
                out / f"{stem}.png",
                ordered.values,
                title=f"{spec.name} tap {t}",
                boundaries=boundaries,
            )
            np.savetxt(out / f"{stem}.csv", ordered.values, fmt="%.9g", delimiter=",")

    # MI per layer: CSV carries both estimators, the figure follows the
    # configured method
    mi_table = {}
    with open(mi_dir / "mi.csv", "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["model"], int(row["layer_index"]))
            mi_table.setdefault(key, {})[row["method"]] = (
                row["mi_bits"], row["posterior_sd"]
            )
    mi_rows = []
    per_model = {}
    for spec in cfg.models:
        t = 1
        while (spec.name, t) in mi_table:
            cell = mi_table[(spec.name, t)]
            mi_rows.append(
                [spec.name, t, cell["plugin"][0], cell["nsb"][0], cell["nsb"][1]]
            )
            per_model.setdefault(spec.name, []).append(
                float(cell[cfg.mi_method][0])
            )
            t += 1
    _write_csv(
        out / "mi_per_layer.csv",
        ["model", "layer_index", "mi_plugin_bits", "mi_nsb_bits", "mi_nsb_sd"],
        mi_rows,
    )
    n_classes = len(run.index.class_names)
    figures.save_mi_lines_svg(
        out / "mi_per_layer.svg",
        per_model,
        ylabel=f"MI ({cfg.mi_method}, bits)",
        ceiling=float(np.log2(n_classes)),
    )

    # correlation table, scatter grid and its data twin
    shutil.copy(corr_dir / "correlation.csv", out / "correlation.csv")
    best = _load_best_mi(mi_dir)
    records, _ = _brainscore_records(run)
    with open(corr_dir / "correlation.csv", "r", encoding="utf-8", newline="") as fh:
        results = [
            CorrelationResult(
                metric=row["metric"],
                r=float(row["r"]) if row["r"] else None,
                p=float(row["p"]) if row["p"] else None,
                n=int(row["n"]),
                significant=row["significant"] == "True",
                undefined_variance=row["undefined_variance"] == "True",
            )
            for row in csv.DictReader(fh)
        ]
    scatter_rows = []
    by_model = {r.model: r for r in records}
    for name in sorted(best):
        rec = by_model[name]
        scatter_rows.append(
            [name, _fmt(best[name])] + [_fmt(rec.metric(m)) for m in BRAINSCORE_METRICS]
        )
    _write_csv(
        out / "correlation_scatter.csv",
        ["model", "best_mi_bits", *BRAINSCORE_METRICS],
        scatter_rows,
    )
    figures.save_correlation_grid_svg(out / "correlation_grid.svg", best, records, results)
    copy_best = out / "best_mi.csv"
    shutil.copy(mi_dir / "best_mi.csv", copy_best)
    return out


def run_stage(config: PipelineConfig, stage: str, model: str | None = None,
              layer: int | None = None) -> Path:
    """Run one pipeline stage (recomputing upstream artifacts as needed).

    ``model`` restricts the per-model stages to a single model from the
    config; ``layer`` (1-based tap index) restricts the rdm/cluster
    stages and the report heatmaps to one tap.  Aggregate stages (mi,
    correlate) always cover every configured model and tap.
    """
    if stage not in STAGES:
        raise ConfigError(f"unknown stage {stage!r}; expected one of {STAGES}")
    run = _Run(config)
    if model is not None:
        wanted = [m for m in config.models if m.name == model]
        if not wanted:
            raise ConfigError(f"model {model!r} not in config")
        per_model_specs = wanted
    else:
        per_model_specs = config.models

    if stage in ("extract", "gram"):
        fn = {"extract": _stage_extract, "gram": _stage_gram}[stage]
        last = None
        for spec in per_model_specs:
            last = fn(run, spec)
        return last
    if stage in ("rdm", "cluster"):
        fn = {"rdm": _stage_rdm, "cluster": _stage_cluster}[stage]
        last = None
        for spec in per_model_specs:
            last = fn(run, spec, layer)
        return last
    if stage == "mi":
        return _stage_mi(run)
    if stage == "correlate":
        return _stage_correlate(run)
    if stage == "synthesize":
        return _stage_synthesize(run)
    return _stage_report(run, layer)
