"""Configuration, end-to-end runs, manifests and run summaries.

Config files are flat ``key = value`` text with dotted keys and ``#``
comments. Any key can be overridden from the environment as
``ERT_<KEY>`` with dots written as double underscores, e.g.
``ERT_RUN__SEED=3`` overrides ``run.seed``. A run's manifest.json holds
the fully resolved flat config and is itself a valid config source.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from . import __version__, learners
from .data import DatasetHandle, block, load_dataset, load_labels
from .embeddings import EmbeddingStore, fixture_store_path, load_embeddings
from .encoder import EncoderOptions, encode_dataset
from .evaluation import LabelOracle, array_metrics, estimate_performance
from .learners import LearnerSpec
from .pairs import UNLABELED, EncodedPairs
from .seeding import derive_seed
from .synthetic import ShiftSpec, named_spec, generate_synthetic, split_pool
from .transfer import (SCENARIOS, ScenarioConfig, featurize_target, train_not, train_nvt, train_scenario1,
                       train_scenario2, train_scenario3)

logger = logging.getLogger(__name__)

ENV_PREFIX = "ERT_"
INPUT_KINDS = ("synthetic", "relations")


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


# ---------------------------------------------------------------- config text

def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def env_overrides(env: Mapping[str, str]) -> dict[str, str]:
    return {k[len(ENV_PREFIX):].lower().replace("__", "."): v for k, v in env.items() if k.startswith(ENV_PREFIX)}


def read_config_source(path: str | Path) -> dict[str, str]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        data = json.loads(text)
        flat = data.get("config", data)
        return {k: _format_value(v) for k, v in flat.items()}
    return parse_config_text(text)


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return ",".join(_format_value(x) for x in v)
    return str(v)


def _bool(s: str) -> bool:
    s = s.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _opt(conv):
    return lambda s: None if s.strip().lower() in ("", "none", "null") else conv(s)


def _number(s: str):
    try:
        return int(s)
    except ValueError:
        return float(s)


def _int_tuple(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in s.split(",") if x.strip())


# ---------------------------------------------------------------- config types

@dataclass(frozen=True)
class RelationSpec:
    """One dataset given as relation CSV files plus a labels CSV."""

    name: str
    left: str
    id_attribute: str = "id"
    right: str | None = None
    labels: str | None = None


@dataclass(frozen=True)
class PipelineConfig:
    scenario: str = "NoT"
    seed: int = 0
    out: str = "runs/default"
    input_kind: str = "synthetic"
    synth_generator: str = "covariate"
    synth_params: dict = field(default_factory=dict)
    sources: tuple[RelationSpec, ...] = ()
    target: RelationSpec | None = None
    embeddings: str | None = None
    encoder: EncoderOptions = field(default_factory=EncoderOptions)
    min_shared_tokens: int = 1
    max_stop_tokens: int = 20
    source_labeled_fraction: float = 1.0
    target_labeled_fraction: float = 0.1
    target_unlabeled_fraction: float = 0.2
    limited_threshold_fraction: float = 0.1
    learner: LearnerSpec = field(default_factory=LearnerSpec)
    max_imbalance_ratio: float = 10.0
    unlabeled_weight: float = 1.0
    source_budget: int | None = None
    target_budget: int | None = None
    baselines: bool = True
    eval_budget: int | None = None
    eval_strata: int = 5
    threshold: float = 0.5

    def validate(self, check_files: bool = True) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.input_kind not in INPUT_KINDS:
            raise ConfigError(f"input.kind must be one of {INPUT_KINDS}")
        for name in ("source_labeled_fraction", "limited_threshold_fraction"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in (0, 1]")
        for name in ("target_labeled_fraction", "target_unlabeled_fraction"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1)")
        if self.target_labeled_fraction + self.target_unlabeled_fraction >= 1.0:
            raise ConfigError("target labeled and unlabeled fractions leave no test pairs")
        needs_target_labels = self.scenario in ("NoT", "adequate_limited", "limited_limited")
        if self.scenario == "adequate_nothing" and self.target_labeled_fraction > 0:
            raise ConfigError("scenario adequate_nothing takes no target labels; set split.target_labeled_fraction = 0")
        if needs_target_labels and self.target_labeled_fraction == 0:
            raise ConfigError(f"scenario {self.scenario} needs target labels")
        if self.scenario in ("adequate_nothing", "limited_limited") and self.target_unlabeled_fraction == 0:
            raise ConfigError(f"scenario {self.scenario} needs unlabeled target pairs")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("eval.threshold must lie in (0, 1)")
        if self.input_kind == "synthetic":
            named_spec(self.synth_generator, self.seed, **self.synth_params)
        else:
            if self.target is None:
                raise ConfigError("relations input needs target.left")
            if self.scenario != "NoT" and not self.sources:
                raise ConfigError("relations input needs at least one source")
            if check_files:
                for rel in (self.target, *self.sources):
                    for p in (rel.left, rel.right, rel.labels):
                        if p is not None and not Path(p).exists():
                            raise ConfigError(f"{rel.name}: file not found: {p}")
            for rel in (self.target, *self.sources):
                if rel.labels is None:
                    raise ConfigError(f"{rel.name}: labels file required")
            if check_files and self.embeddings and not Path(self.embeddings).exists():
                raise ConfigError(f"embedding file not found: {self.embeddings}")

    def scenario_config(self) -> ScenarioConfig:
        return ScenarioConfig(scenario=self.scenario, max_imbalance_ratio=self.max_imbalance_ratio,
                              source_budget=self.source_budget, target_budget=self.target_budget,
                              unlabeled_weight=self.unlabeled_weight, seed=derive_seed(self.seed, "transfer"),
                              learner=self.learner)

    def to_flat(self) -> dict[str, str]:
        flat = {
            "run.scenario": self.scenario, "run.seed": self.seed, "run.out": self.out, "input.kind": self.input_kind,
            "synth.generator": self.synth_generator, "embeddings.path": self.embeddings,
            "encode.sif": self.encoder.sif, "encode.sif_a": self.encoder.sif_a, "encode.remove_pc": self.encoder.remove_pc,
            "encode.context_k": self.encoder.context_k, "encode.skip_unresolvable": self.encoder.skip_unresolvable,
            "block.min_shared_tokens": self.min_shared_tokens, "block.max_stop_tokens": self.max_stop_tokens,
            "split.source_labeled_fraction": self.source_labeled_fraction,
            "split.target_labeled_fraction": self.target_labeled_fraction,
            "split.target_unlabeled_fraction": self.target_unlabeled_fraction,
            "limited_threshold_fraction": self.limited_threshold_fraction,
            "transfer.max_imbalance_ratio": self.max_imbalance_ratio, "transfer.unlabeled_weight": self.unlabeled_weight,
            "transfer.source_budget": self.source_budget, "transfer.target_budget": self.target_budget,
            "eval.baselines": self.baselines, "eval.budget": self.eval_budget, "eval.strata": self.eval_strata,
            "eval.threshold": self.threshold,
        }
        for f in fields(LearnerSpec):
            v = getattr(self.learner, f.name)
            flat[f"learner.{f.name}"] = json.dumps(v) if isinstance(v, dict) else v
        for k, v in self.synth_params.items():
            flat[f"synth.{k}"] = v
        for rel, prefix in [(self.target, "target")] + [(s, f"source.{s.name}") for s in self.sources]:
            if rel is None:
                continue
            for attr in ("left", "right", "labels"):
                flat[f"{prefix}.{attr}"] = getattr(rel, attr)
            flat[f"{prefix}.id"] = rel.id_attribute
        if self.sources:
            flat["source.names"] = [s.name for s in self.sources]
        return {k: _format_value(v) for k, v in sorted(flat.items())}


_SHIFT_FIELDS = {f.name: f for f in fields(ShiftSpec)}
_SIMPLE = {
    "run.scenario": ("scenario", str), "run.seed": ("seed", int), "run.out": ("out", str),
    "input.kind": ("input_kind", str), "synth.generator": ("synth_generator", str),
    "embeddings.path": ("embeddings", _opt(str)),
    "block.min_shared_tokens": ("min_shared_tokens", int), "block.max_stop_tokens": ("max_stop_tokens", int),
    "split.source_labeled_fraction": ("source_labeled_fraction", float),
    "split.target_labeled_fraction": ("target_labeled_fraction", float),
    "split.target_unlabeled_fraction": ("target_unlabeled_fraction", float),
    "limited_threshold_fraction": ("limited_threshold_fraction", float),
    "transfer.max_imbalance_ratio": ("max_imbalance_ratio", float),
    "transfer.unlabeled_weight": ("unlabeled_weight", float),
    "transfer.source_budget": ("source_budget", _opt(int)), "transfer.target_budget": ("target_budget", _opt(int)),
    "eval.baselines": ("baselines", _bool), "eval.budget": ("eval_budget", _opt(int)),
    "eval.strata": ("eval_strata", int), "eval.threshold": ("threshold", float),
}
_ENCODER = {"encode.sif": ("sif", _bool), "encode.sif_a": ("sif_a", float), "encode.remove_pc": ("remove_pc", _bool),
            "encode.context_k": ("context_k", int), "encode.skip_unresolvable": ("skip_unresolvable", _bool)}
_LEARNER = {"kind": str, "l2": float, "max_epochs": int, "tol": float, "max_depth": int, "n_trees": int,
            "min_samples_split": int, "svm_smoothing": float, "seed": int,
            "max_features": lambda s: s if s == "sqrt" else _opt(int)(s),
            "class_weight": lambda s: (None if s.lower() in ("", "none", "null") else
                                       s if s == "balanced" else {int(k): float(v) for k, v in json.loads(s).items()})}


def _shift_value(name: str, s: str):
    if name == "flip":
        return _int_tuple(s)
    if name == "mean_offset":
        return tuple(float(x) for x in s.split(",")) if "," in s else float(s)
    if name == "target_dup_rate":
        return _opt(float)(s)
    return _number(s)


def config_from_flat(flat: Mapping[str, str]) -> PipelineConfig:
    kw: dict = {}
    enc: dict = {}
    lrn: dict = {}
    synth: dict = {}
    rels: dict[str, dict] = {}
    for key, value in flat.items():
        try:
            if key in _SIMPLE:
                name, conv = _SIMPLE[key]
                kw[name] = conv(value)
            elif key in _ENCODER:
                name, conv = _ENCODER[key]
                enc[name] = conv(value)
            elif key.startswith("learner."):
                name = key.split(".", 1)[1]
                if name not in _LEARNER:
                    raise ConfigError(f"unknown key {key!r}")
                lrn[name] = _LEARNER[name](value)
            elif key.startswith("synth."):
                name = key.split(".", 1)[1]
                if name not in _SHIFT_FIELDS or name == "seed":
                    raise ConfigError(f"unknown key {key!r}")
                synth[name] = _shift_value(name, value)
            elif key == "source.names":
                kw["_source_names"] = [x.strip() for x in value.split(",") if x.strip()]
            elif key.startswith("source.") or key.startswith("target."):
                parts = key.split(".")
                owner = "target" if parts[0] == "target" else ".".join(parts[:2])
                attr = parts[-1]
                if attr not in ("left", "right", "labels", "id") or len(parts) != (2 if owner == "target" else 3):
                    raise ConfigError(f"unknown key {key!r}")
                rels.setdefault(owner, {})[attr] = _opt(str)(value)
            else:
                raise ConfigError(f"unknown key {key!r}")
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r} ({exc})") from None

    def relation(owner: str, name: str) -> RelationSpec:
        d = rels.get(owner, {})
        if d.get("left") is None:
            raise ConfigError(f"{owner}.left is required")
        return RelationSpec(name, d["left"], d.get("id") or "id", d.get("right"), d.get("labels"))

    names = kw.pop("_source_names", None)
    if names is None:
        names = sorted({k.split(".")[1] for k in rels if k.startswith("source.")})
    sources = tuple(relation(f"source.{n}", n) for n in names)
    target = relation("target", "target") if "target" in rels else None
    return PipelineConfig(**kw, encoder=EncoderOptions(**enc), learner=LearnerSpec(**lrn), synth_params=synth,
                          sources=sources, target=target)


def load_config(path: str | Path | None = None, env: Mapping[str, str] | None = None,
                overrides: Mapping[str, str] | None = None, check_files: bool = True) -> PipelineConfig:
    """File values, then ``ERT_*`` environment values, then explicit overrides."""
    flat = read_config_source(path) if path is not None else {}
    flat.update(env_overrides(os.environ if env is None else env))
    flat.update({k: _format_value(v) for k, v in (overrides or {}).items()})
    cfg = config_from_flat(flat)
    cfg.validate(check_files)
    return cfg


# ---------------------------------------------------------------- run

@dataclass
class RunData:
    sources: list[EncodedPairs]
    source_unlabeled: list[EncodedPairs]
    target_labeled: EncodedPairs
    target_unlabeled: EncodedPairs
    target_test: EncodedPairs
    limited: dict


def _split_labeled(pool: EncodedPairs, fraction: float, seed: int) -> tuple[EncodedPairs, EncodedPairs]:
    if fraction >= 1.0:
        return pool, pool.take([])
    lab, _, rest = split_pool(pool, fraction, 0.0, seed)
    return lab, rest.without_labels()


def _synthetic_data(cfg: PipelineConfig) -> RunData:
    spec = named_spec(cfg.synth_generator, derive_seed(cfg.seed, "synth"), **cfg.synth_params)
    pools = generate_synthetic(spec)
    src_lab, src_unl = _split_labeled(pools.source, cfg.source_labeled_fraction, derive_seed(cfg.seed, "split/source"))
    tl, tu, test = split_pool(pools.target, cfg.target_labeled_fraction, cfg.target_unlabeled_fraction,
                              derive_seed(cfg.seed, "split/target"))
    return RunData([src_lab], [src_unl], tl, tu, test, {})


def _encode_relation(rel: RelationSpec, store: EmbeddingStore, cfg: PipelineConfig, corpora) -> EncodedPairs:
    left = load_dataset(rel.left, rel.id_attribute, f"{rel.name}-left")
    right = left if rel.right is None else load_dataset(rel.right, rel.id_attribute, f"{rel.name}-right")
    cands = block(left, right, cfg.min_shared_tokens, cfg.max_stop_tokens)
    labels = load_labels(rel.labels).as_dict() if rel.labels else None
    return encode_dataset(left, None if right is left else right, cands, store, options=cfg.encoder,
                          labels=labels, corpora=corpora, origin=rel.name)


def _relation_streams(rel: RelationSpec) -> list[list[str]]:
    left = load_dataset(rel.left, rel.id_attribute)
    streams = left.token_streams()
    if rel.right is not None:
        streams += load_dataset(rel.right, rel.id_attribute).token_streams()
    return streams


def _relations_data(cfg: PipelineConfig) -> RunData:
    store = load_embeddings(cfg.embeddings or fixture_store_path())
    rels = [cfg.target, *cfg.sources]
    # word frequencies and OOV contexts come from every dataset pooled
    corpora = [s for rel in rels for s in _relation_streams(rel)]
    target_all = _encode_relation(cfg.target, store, cfg, corpora)
    sources, source_unl, limited = [], [], {}
    for rel in cfg.sources:
        enc = _encode_relation(rel, store, cfg, corpora)
        lab, extra = _split_labeled(enc.take(np.flatnonzero(enc.labels != UNLABELED)), cfg.source_labeled_fraction,
                                    derive_seed(cfg.seed, f"split/{rel.name}"))
        sources.append(lab)
        parts = [enc.take(np.flatnonzero(enc.labels == UNLABELED)), extra]
        source_unl.append(EncodedPairs.concat(parts) if any(len(p) for p in parts) else extra)
        limited[rel.name] = len(lab) < cfg.limited_threshold_fraction * len(enc)
    lab_pool = target_all.take(np.flatnonzero(target_all.labels != UNLABELED))
    unl_pool = target_all.take(np.flatnonzero(target_all.labels == UNLABELED))
    tl, tu, test = split_pool(lab_pool, cfg.target_labeled_fraction, cfg.target_unlabeled_fraction,
                              derive_seed(cfg.seed, "split/target"))
    if len(unl_pool):
        tu = EncodedPairs.concat([tu, unl_pool]) if len(tu) else unl_pool
    limited["target"] = len(tl) < cfg.limited_threshold_fraction * len(target_all)
    return RunData(sources, source_unlabeled=source_unl, target_labeled=tl, target_unlabeled=tu, target_test=test,
                   limited=limited)


def _train(cfg: PipelineConfig, data: RunData, scenario: str):
    sc = replace(cfg.scenario_config(), scenario=scenario)
    spec = cfg.learner
    if scenario == "NoT":
        return train_not(data.target_labeled, spec)
    if scenario == "NvT":
        return train_nvt(data.sources, spec)
    if scenario == "adequate_nothing":
        pools = [(s, u if len(u) else None) for s, u in zip(data.sources, data.source_unlabeled)]
        return train_scenario1(pools, data.target_unlabeled, sc)
    tu = data.target_unlabeled if len(data.target_unlabeled) else None
    if scenario == "adequate_limited":
        return train_scenario2(data.sources, data.target_labeled, sc, target_unlabeled=tu)
    return train_scenario3(data.sources, data.target_labeled, tu, sc)


def _test_f1(model, test: EncodedPairs, threshold: float) -> dict:
    p = learners.predict_proba(model, featurize_target(model, test.X))
    return array_metrics(np.atleast_1d(p) >= threshold, test.labels).to_dict()


def _stage(name: str, fn, *args):
    try:
        return fn(*args)
    except Exception as exc:
        raise StageError(name, exc) from exc


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_pipeline(cfg: PipelineConfig, out: str | Path | None = None) -> dict:
    """Run the configured scenario end to end and write its artifacts to ``out``.

    Writes model.json, training_report.json, metrics.json and manifest.json;
    returns the metrics document.
    """
    cfg.validate()
    out = Path(out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    data = _stage("ingest", _synthetic_data if cfg.input_kind == "synthetic" else _relations_data, cfg)
    model = _stage("train", _train, cfg, data, cfg.scenario)
    metrics: dict = {"scenario": cfg.scenario, "test_pairs": len(data.target_test)}
    metrics["algorithm"] = _stage("evaluate", _test_f1, model, data.target_test, cfg.threshold)
    if cfg.baselines:
        baselines = {}
        if len(data.target_labeled) and len(np.unique(data.target_labeled.labels)) == 2:
            baselines["NoT"] = _stage("baseline/NoT", lambda: _test_f1(_train(cfg, data, "NoT"), data.target_test,
                                                                        cfg.threshold))
        if data.sources and any(len(s) for s in data.sources):
            baselines["NvT"] = _stage("baseline/NvT", lambda: _test_f1(_train(cfg, data, "NvT"), data.target_test,
                                                                        cfg.threshold))
        metrics["baselines"] = baselines
    if cfg.eval_budget:
        oracle = LabelOracle(dict(zip(data.target_test.keys(), data.target_test.labels.tolist())))
        est = _stage("estimate", estimate_performance, model, data.target_test.without_labels(), oracle,
                     min(cfg.eval_budget, len(data.target_test)), cfg.eval_strata, derive_seed(cfg.seed, "estimate"),
                     cfg.threshold, "neyman", lambda X: featurize_target(model, X))
        metrics["estimate"] = est.to_dict()
    if data.limited:
        metrics["limited"] = data.limited
    learners.save_model(model, out / "model.json")
    training = dict(model.meta.get("training", {}))
    training["learner"] = cfg.learner.to_dict()
    _dump(training, out / "training_report.json")
    _dump(metrics, out / "metrics.json")
    inputs = {}
    if cfg.input_kind == "relations":
        for rel in (cfg.target, *cfg.sources):
            for p in (rel.left, rel.right, rel.labels):
                if p is not None:
                    inputs[str(p)] = _sha256(p)
        inputs["embeddings"] = _sha256(cfg.embeddings or fixture_store_path())
    stages = ["synth", "split/source", "split/target", "transfer", "estimate"]
    manifest = {"version": __version__, "config": cfg.to_flat(), "inputs": inputs,
                "stage_seeds": {s: derive_seed(cfg.seed, s) for s in stages}}
    _dump(manifest, out / "manifest.json")
    return metrics


# ---------------------------------------------------------------- report

def summarize(metrics: Mapping) -> dict:
    """F1 of the configured algorithm and its deltas against each available baseline."""
    f1 = metrics["algorithm"]["f1"]
    deltas = {name: f1 - b["f1"] for name, b in sorted(metrics.get("baselines", {}).items())}
    return {"scenario": metrics["scenario"], "f1": f1,
            "baseline_f1": {k: v["f1"] for k, v in sorted(metrics.get("baselines", {}).items())},
            "delta_f1": deltas}


def format_summary(summary: Mapping) -> str:
    lines = [f"scenario {summary['scenario']}  F1 {summary['f1']:.4f}"]
    for name, d in summary["delta_f1"].items():
        lines.append(f"  vs {name:<4} F1 {summary['baseline_f1'][name]:.4f}  delta {d:+.4f}")
    return "\n".join(lines)


def report(run_dir: str | Path) -> dict:
    run_dir = Path(run_dir)
    metrics_path = run_dir / "metrics.json"
    if not metrics_path.exists():
        raise FileNotFoundError(f"no metrics.json in {run_dir}")
    summary = summarize(json.loads(metrics_path.read_text(encoding="utf-8")))
    _dump(summary, run_dir / "summary.json")
    return summary
