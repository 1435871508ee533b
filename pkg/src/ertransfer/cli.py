"""Command-line entry point: ``ertransfer <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, learners
from .data import block, load_dataset, load_labels
from .embeddings import fixture_store_path, load_embeddings
from .encoder import encode_dataset, options_dict
from .evaluation import LabelOracle, PromptOracle, estimate_performance
from .pairs import load_pairs, save_pairs
from .pipeline import (ConfigError, PipelineConfig, StageError, config_from_flat, env_overrides, format_summary,
                       load_config, read_config_source, report, run_pipeline)
from .seeding import derive_seed
from .selection import relatedness_gate, select_source
from .synthetic import GENERATORS, generate_synthetic, named_spec
from .transfer import SourcePool, featurize_target, train_not, train_nvt, train_scenario1, train_scenario2, \
    train_scenario3

log = logging.getLogger("ertransfer")

GLOBAL_DEFAULTS = {"config": None, "seed": None, "out": None, "verbose": False}


def _settings(args) -> PipelineConfig:
    """Config file plus environment, without cross-field checks (subcommands use only a subset)."""
    flat = read_config_source(args.config) if args.config else {}
    flat.update(env_overrides(os.environ))
    if args.seed is not None:
        flat["run.seed"] = str(args.seed)
    return config_from_flat(flat)


def _out_dir(args, cfg: PipelineConfig) -> Path:
    out = Path(args.out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _save_model(model, out: Path) -> None:
    learners.save_model(model, out / "model.json")
    _write_json(model.meta.get("training", {}), out / "training_report.json")
    log.info("wrote %s", out / "model.json")


# ---------------------------------------------------------------- subcommands

def cmd_encode(args, cfg):
    store = load_embeddings(args.embeddings or cfg.embeddings or fixture_store_path())
    left = load_dataset(args.left, args.id)
    right = load_dataset(args.right, args.id) if args.right else left
    cands = block(left, right, cfg.min_shared_tokens, cfg.max_stop_tokens)
    labels = load_labels(args.labels).as_dict() if args.labels else None
    pairs = encode_dataset(left, None if right is left else right, cands, store, options=cfg.encoder, labels=labels)
    out = _out_dir(args, cfg) / (args.name or "pairs.csv")
    save_pairs(pairs, out, {"encoder": options_dict(cfg.encoder), "candidates": len(cands)})
    log.info("encoded %d candidate pairs into %s", len(pairs), out)


def cmd_train_not(args, cfg):
    _save_model(train_not(load_pairs(args.target_labeled), cfg.learner), _out_dir(args, cfg))


def cmd_train_nvt(args, cfg):
    _save_model(train_nvt([load_pairs(p) for p in args.source], cfg.learner), _out_dir(args, cfg))


def _source_pools(args) -> list[SourcePool]:
    unl = args.source_unlabeled or []
    if unl and len(unl) != len(args.source):
        raise ConfigError("--source-unlabeled must be given once per --source")
    return [SourcePool(load_pairs(p), load_pairs(unl[i]) if unl else None) for i, p in enumerate(args.source)]


def cmd_train_s1(args, cfg):
    sc = replace(cfg.scenario_config(), scenario="adequate_nothing")
    _save_model(train_scenario1(_source_pools(args), load_pairs(args.target_unlabeled), sc), _out_dir(args, cfg))


def cmd_train_s2(args, cfg):
    sc = replace(cfg.scenario_config(), scenario="adequate_limited")
    tu = load_pairs(args.target_unlabeled) if args.target_unlabeled else None
    model = train_scenario2([load_pairs(p) for p in args.source], load_pairs(args.target_labeled), sc,
                            target_unlabeled=tu)
    _save_model(model, _out_dir(args, cfg))


def cmd_train_s3(args, cfg):
    sc = replace(cfg.scenario_config(), scenario="limited_limited")
    model = train_scenario3([load_pairs(p) for p in args.source], load_pairs(args.target_labeled),
                            load_pairs(args.target_unlabeled), sc)
    _save_model(model, _out_dir(args, cfg))


def cmd_relatedness(args, cfg):
    rep = relatedness_gate(load_pairs(args.source).X, load_pairs(args.target).X, runs=args.runs,
                           threshold=args.threshold, seed=derive_seed(cfg.seed, "relatedness"))
    _emit(rep.to_dict())


def cmd_select_source(args, cfg):
    cands = {}
    for item in args.candidate:
        name, sep, path = item.partition("=")
        if not sep:
            raise ConfigError(f"--candidate expects name=path, got {item!r}")
        cands[name] = load_pairs(path).X
    ranking = select_source(cands, load_pairs(args.target).X, seed=derive_seed(cfg.seed, "select-source"),
                            runs=args.runs)
    _emit(ranking.to_dict())


def cmd_estimate(args, cfg):
    model = learners.load_model(args.model)
    pool = load_pairs(args.pairs)
    oracle = LabelOracle.from_file(args.oracle) if args.oracle else PromptOracle(stdout=sys.stderr)
    res = estimate_performance(model, pool, oracle, args.budget, args.strata or cfg.eval_strata,
                               derive_seed(cfg.seed, "estimate"), cfg.threshold, args.allocation,
                               lambda X: featurize_target(model, X))
    doc = res.to_dict()
    if args.out:
        _write_json(doc, _out_dir(args, cfg) / "estimate.json")
    _emit(doc)


def cmd_synth(args, cfg):
    params = {}
    for item in args.param or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        params[f"synth.{key}"] = value
    synth = config_from_flat({"synth.generator": args.generator, **params}).synth_params
    spec = named_spec(args.generator, derive_seed(cfg.seed, "synth"), **synth)
    pools = generate_synthetic(spec)
    out = _out_dir(args, cfg)
    save_pairs(pools.source, out / "source.csv", {"shift": spec.to_dict()})
    save_pairs(pools.target, out / "target.csv", {"shift": spec.to_dict()})
    log.info("wrote %d source and %d target pairs to %s", len(pools.source), len(pools.target), out)


def cmd_report(args, cfg):
    summary = report(args.run_dir)
    if args.json:
        _emit(summary)
    else:
        sys.stdout.write(format_summary(summary) + "\n")


def cmd_run(args, cfg):
    overrides = {"run.seed": args.seed} if args.seed is not None else {}
    full = load_config(args.config, overrides=overrides)
    out = Path(args.out or full.out)
    run_pipeline(full, out)
    sys.stdout.write(format_summary(report(out)) + "\n")


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    # globals are accepted before or after the subcommand; SUPPRESS keeps one from clobbering the other
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="flat key = value config file (or a run's manifest.json)")
    common.add_argument("--seed", type=int, help="master seed (overrides run.seed)")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="ertransfer", parents=[common],
                                description="Transfer learning for entity resolution on similarity vectors.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_, description=help_)
        sp.set_defaults(func=fn)
        return sp

    sp = add("encode", cmd_encode, "block two relations and encode candidate pairs as similarity vectors")
    sp.add_argument("--left", required=True)
    sp.add_argument("--right", help="second relation (omit to deduplicate --left)")
    sp.add_argument("--id", default="id", help="id column")
    sp.add_argument("--labels", help="left_id,right_id,label CSV")
    sp.add_argument("--embeddings", help="word vector text file (default: bundled fixture)")
    sp.add_argument("--name", help="output file name inside --out (default pairs.csv)")

    sp = add("train-not", cmd_train_not, "train on target labels only")
    sp.add_argument("--target-labeled", required=True)
    sp = add("train-nvt", cmd_train_nvt, "train on pooled source labels only")
    sp.add_argument("--source", required=True, nargs="+")
    sp = add("train-s1", cmd_train_s1, "labeled sources, unlabeled target: instance weighting")
    sp.add_argument("--source", required=True, nargs="+")
    sp.add_argument("--source-unlabeled", nargs="+")
    sp.add_argument("--target-unlabeled", required=True)
    sp = add("train-s2", cmd_train_s2, "labeled sources, some target labels: feature augmentation")
    sp.add_argument("--source", required=True, nargs="+")
    sp.add_argument("--target-labeled", required=True)
    sp.add_argument("--target-unlabeled")
    sp = add("train-s3", cmd_train_s3, "few labels on both sides: augmentation plus unlabeled agreement rows")
    sp.add_argument("--source", required=True, nargs="+")
    sp.add_argument("--target-labeled", required=True)
    sp.add_argument("--target-unlabeled", required=True)

    sp = add("relatedness", cmd_relatedness, "mean held-out MCC of a source-vs-target separator")
    sp.add_argument("--source", required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument("--runs", type=int, default=10)
    sp.add_argument("--threshold", type=float, default=0.2)
    sp = add("select-source", cmd_select_source, "rank candidate sources by estimated domain distance")
    sp.add_argument("--candidate", required=True, nargs="+", metavar="NAME=PAIRS")
    sp.add_argument("--target", required=True)
    sp.add_argument("--runs", type=int, default=10)

    sp = add("estimate", cmd_estimate, "stratified-sampling estimate of precision, recall and F1")
    sp.add_argument("--model", required=True)
    sp.add_argument("--pairs", required=True, help="unlabeled target pairs to score")
    sp.add_argument("--oracle", help="labels CSV answering queries (default: ask on stdin)")
    sp.add_argument("--budget", type=int, required=True)
    sp.add_argument("--strata", type=int)
    sp.add_argument("--allocation", default="neyman", choices=("neyman", "proportional", "equal"))

    sp = add("synth", cmd_synth, "write synthetic source and target pair pools")
    sp.add_argument("--generator", default="covariate", choices=sorted(GENERATORS))
    sp.add_argument("--param", action="append", metavar="KEY=VALUE", help="shift parameter override")

    sp = add("report", cmd_report, "F1 deltas of a run against its baselines")
    sp.add_argument("run_dir")
    sp.add_argument("--json", action="store_true", help="machine-readable output")

    add("run", cmd_run, "run a configured scenario end to end")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in GLOBAL_DEFAULTS.items():
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _settings(args)
        args.func(args, cfg)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
