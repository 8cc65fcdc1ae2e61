"""Command-line pipeline: fabricate | train | predict | evaluate.

Configuration comes from a plain key=value file plus flag overrides (flags win); every
command writes its fully resolved configuration next to its primary output so runs are
reproducible from the artifacts alone.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, asdict, fields
from pathlib import Path

from joinscope.benchmark import write_benchmark
from joinscope.embedding import TrigramHashEmbedder, WordVectorEmbedder
from joinscope.fabricate import FabricationConfig, generate_training_set, save_examples, write_tables
from joinscope.model import TrainConfig, fit as fit_model, load_model, save_model
from joinscope.predict import (
    infer, load_ground_truth, mlp_baseline, pr_curve, best_f1, pr_auc,
    save_predictions, threshold_baseline, truth_node_pairs,
)
from joinscope.repo import load_repository
from joinscope.similarity import (
    ALL_SIGNALS, SignalType, compute_all_pairs,
    load_similarity_cache, save_similarity_cache,
)


@dataclass
class RunConfig:
    repository: str = ""
    truth: str = ""
    model: str = "model.npz"
    predictions: str = "predictions.csv"
    report: str = "report.json"
    out_dir: str = "fabricated"
    delimiter: str = ","
    seed: int = 0
    epochs: int = 30
    lr: float = 0.001
    loss_mode: str = "triplet"
    margin: float = 1.0
    hidden_dim: int = 256
    layers: int = 2
    k_candidates: str = "1,2,3,4,5"
    validation_fraction: float = 0.1
    p_fuzzy_pair: float = 0.5
    p_perturb_value: float = 0.3
    shared_cols_max: int = 4
    overlap_lo: float = 0.1
    overlap_hi: float = 0.7
    embedding_dim: int = 64
    embeddings: str = ""
    similarity_cache: str = ""
    profile_cache: str = ""
    signal: str = ""
    threads: int = 1


def load_config_file(path: str | Path) -> dict:
    known = {f.name for f in fields(RunConfig)}
    out = {}
    with open(path, encoding="utf-8") as f:
        for ln, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key=value")
            key, value = line.split("=", 1)
            key = key.strip()
            if key not in known:
                raise ValueError(f"{path}:{ln}: unknown config key {key!r}")
            out[key] = value.strip()
    return out


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Precedence: flags > config file > JOINSCOPE_SEED env var > defaults."""
    cfg = RunConfig()
    if "JOINSCOPE_SEED" in os.environ:
        cfg.seed = int(os.environ["JOINSCOPE_SEED"])
    if getattr(args, "config", None):
        for key, value in load_config_file(args.config).items():
            current = getattr(cfg, key)
            setattr(cfg, key, value if isinstance(current, str) else type(current)(value))
    for f in fields(RunConfig):
        flag_value = getattr(args, f.name, None)
        if flag_value is not None:
            setattr(cfg, f.name, flag_value)
    return cfg


def write_resolved_config(cfg: RunConfig, primary_output: str | Path) -> None:
    path = Path(str(primary_output) + ".config")
    lines = [f"{key}={value}" for key, value in sorted(asdict(cfg).items())]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _embedder(cfg: RunConfig):
    if cfg.embeddings:
        return WordVectorEmbedder.load(cfg.embeddings)
    return TrigramHashEmbedder(dim=cfg.embedding_dim)


def _fab_config(cfg: RunConfig) -> FabricationConfig:
    return FabricationConfig(
        shared_cols_max=cfg.shared_cols_max,
        overlap_fraction_range=(cfg.overlap_lo, cfg.overlap_hi),
        p_fuzzy_pair=cfg.p_fuzzy_pair,
        p_perturb_value=cfg.p_perturb_value,
        seed=cfg.seed,
    )


def _train_config(cfg: RunConfig) -> TrainConfig:
    return TrainConfig(
        epochs=cfg.epochs, lr=cfg.lr, validation_fraction=cfg.validation_fraction,
        k_candidates=tuple(int(k) for k in cfg.k_candidates.split(",")),
        seed=cfg.seed, loss_mode=cfg.loss_mode, margin=cfg.margin,
        hidden_dim=cfg.hidden_dim, layers=cfg.layers,
    )


def cmd_fabricate(cfg: RunConfig) -> int:
    repo = load_repository(cfg.repository, delimiter=cfg.delimiter)
    fab_repo, examples = generate_training_set(repo, _fab_config(cfg))
    out = Path(cfg.out_dir)
    write_tables(fab_repo, out)
    save_examples(fab_repo, examples, out / "examples.csv")
    write_resolved_config(cfg, out / "examples.csv")
    print(f"fabricated {len(fab_repo.tables)} tables, {len(examples)} examples -> {out}")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    repo = load_repository(cfg.repository, delimiter=cfg.delimiter)
    embedder = _embedder(cfg)
    fab_repo, examples = generate_training_set(repo, _fab_config(cfg))
    result = fit_model(fab_repo, examples, _train_config(cfg), embedder)
    save_model(result.model, cfg.model)
    write_resolved_config(cfg, cfg.model)
    print(f"trained model (k={result.k}) -> {cfg.model}")
    return 0


def cmd_predict(cfg: RunConfig) -> int:
    repo = load_repository(cfg.repository, delimiter=cfg.delimiter)
    model = load_model(cfg.model)
    embedder = _embedder(cfg)
    if cfg.similarity_cache and Path(cfg.similarity_cache).exists():
        records = load_similarity_cache(cfg.similarity_cache)
    else:
        records = compute_all_pairs(repo, embedder)
        if cfg.similarity_cache:
            save_similarity_cache(records, cfg.similarity_cache)
    preds = infer(model, repo, embedder, records=records)
    save_predictions(preds, repo, cfg.predictions)
    write_resolved_config(cfg, cfg.predictions)
    print(f"wrote {len(preds)} predictions -> {cfg.predictions}")
    return 0


def _curve_payload(curve) -> dict:
    return {
        "best_f1": best_f1(curve),
        "pr_auc": pr_auc(curve),
        "curve": [{"precision": p.precision, "recall": p.recall, "threshold": p.threshold}
                  for p in curve],
    }


def cmd_evaluate(cfg: RunConfig) -> int:
    repo = load_repository(cfg.repository, delimiter=cfg.delimiter)
    truth = load_ground_truth(cfg.truth)
    pairs = truth_node_pairs(truth, repo)
    embedder = _embedder(cfg)
    records = compute_all_pairs(repo, embedder)

    report: dict = {}
    if cfg.signal:
        signal = SignalType(cfg.signal)
        report["ablation"] = {signal.value: _curve_payload(threshold_baseline(records, signal, pairs))}
    else:
        model = load_model(cfg.model)
        preds = infer(model, repo, embedder, records=records)
        report["rgcn"] = _curve_payload(pr_curve(preds, pairs))
        report["ablation"] = {
            s.value: _curve_payload(threshold_baseline(records, s, pairs)) for s in ALL_SIGNALS
        }
        fab_repo, examples = generate_training_set(repo, _fab_config(cfg))
        fab_records = compute_all_pairs(fab_repo, embedder)
        report["mlp_baseline"] = _curve_payload(
            mlp_baseline(fab_records, examples, records, pairs,
                         epochs=cfg.epochs, seed=cfg.seed))

    with open(cfg.report, "w", encoding="utf-8") as f:
        json.dump(report, f, sort_keys=True, indent=2)
        f.write("\n")
    write_resolved_config(cfg, cfg.report)
    if "rgcn" in report:
        print(f"best_f1={report['rgcn']['best_f1']:.4f} pr_auc={report['rgcn']['pr_auc']:.4f} -> {cfg.report}")
    else:
        print(f"wrote single-signal report -> {cfg.report}")
    return 0


def cmd_benchmark(cfg: RunConfig) -> int:
    bench = write_benchmark(cfg.out_dir, seed=cfg.seed)
    print(f"wrote {len(bench.repo.tables)} benchmark tables -> {cfg.out_dir}")
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--repository", help="directory of CSV tables")
    p.add_argument("--delimiter")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--embeddings", help="word-vector text file (default: trigram hashing)")
    p.add_argument("--model")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="joinscope",
                                     description="Join discovery across tabular datasets")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fabricate", help="generate self-supervised training tables/examples")
    _add_common(p)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--p-fuzzy-pair", dest="p_fuzzy_pair", type=float)
    p.add_argument("--p-perturb-value", dest="p_perturb_value", type=float)

    p = sub.add_parser("train", help="fabricate, select k, and train the join prediction model")
    _add_common(p)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--loss-mode", dest="loss_mode", choices=["triplet", "cross_entropy"])
    p.add_argument("--margin", type=float)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--k-candidates", dest="k_candidates")
    p.add_argument("--p-fuzzy-pair", dest="p_fuzzy_pair", type=float)
    p.add_argument("--p-perturb-value", dest="p_perturb_value", type=float)

    p = sub.add_parser("predict", help="score cross-table column pairs with a trained model")
    _add_common(p)
    p.add_argument("--predictions")
    p.add_argument("--similarity-cache", dest="similarity_cache")
    p.add_argument("--profile-cache", dest="profile_cache")

    p = sub.add_parser("evaluate", help="PR curves, best F1/PR-AUC, ablations, baselines")
    _add_common(p)
    p.add_argument("--truth")
    p.add_argument("--report")
    p.add_argument("--signal", choices=[s.value for s in ALL_SIGNALS],
                   help="emit only this single-signal baseline")
    p.add_argument("--epochs", type=int)

    p = sub.add_parser("benchmark", help="write the bundled synthetic mini-benchmark")
    _add_common(p)
    p.add_argument("--out-dir", dest="out_dir")

    return parser


COMMANDS = {
    "fabricate": cmd_fabricate,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "benchmark": cmd_benchmark,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except Exception as e:  # diagnostics over tracebacks for CLI users
        print(f"joinscope {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
