"""Command-line pipeline: align, evaluate, induce, ablate.

Configuration comes from an optional ``key = value`` text file plus command
line flags; flags win. Exit statuses are disjoint: 0 success, 2 config
error, 3 non-convergence.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import embeddings as emb
from . import reporting
from .evaluator import bli_accuracy, unsupervised_criterion, word_similarity
from .initializer import InitConfig, build_initial_mapping
from .lexicon import RetrievalConfig, induce_dictionary, refine
from .mmd import KernelSpec, Projector, compress, fit_projector
from .trainer import TrainConfig, TrainHistory, TrainingDiverged, train

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NON_CONVERGENCE = 3

STATUS_SUCCESS = "success"
STATUS_NON_CONVERGENCE = "non-convergence"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    src_emb: str = ""
    tgt_emb: str = ""
    gold: str = ""
    sim_pairs: str = ""
    out: str = "run"
    seed: int = 0
    max_vocab: int = 200000
    normalize_steps: str = "unit,center,unit"  # "none" disables
    compress_dim: int = 50  # 0 = no compression
    # training
    batch_size: int = 1280
    beta: float = 0.01
    lr: float = 0.0003
    epochs: int = 20
    sample_vocab: int = 20000
    patience: int = 3
    # initialization
    vocab_cap: int = 4000
    # retrieval / refinement
    retrieval: str = "nn"  # evaluation retrieval
    csls_k: int = 10
    dict_vocab: int = 20000
    refine_iters: int = 5
    # ablation switches
    enable_init: bool = True
    enable_mmd: bool = True
    enable_refine: bool = True
    # convergence guard: criterion floor after max_epochs
    criterion_floor: float = 0.05

    def train_config(self) -> TrainConfig:
        return TrainConfig(batch_size=self.batch_size, beta=self.beta,
                           lr0=self.lr, max_epochs=self.epochs,
                           sample_vocab=self.sample_vocab, seed=self.seed,
                           patience=self.patience)

    def init_config(self) -> InitConfig:
        return InitConfig(vocab_cap=self.vocab_cap, csls_k=self.csls_k)

    def retrieval_config(self, method: str | None = None) -> RetrievalConfig:
        return RetrievalConfig(method=method or self.retrieval,
                               csls_k=self.csls_k, dict_vocab=self.dict_vocab,
                               refine_iters=self.refine_iters)


def load_config_file(path: str | Path) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (part.strip() for part in line.split("=", 1))
            values[key] = val
    return values


def build_run_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    fields = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    if getattr(args, "config", None):
        for key, raw in load_config_file(args.config).items():
            if key not in fields:
                raise ConfigError(f"unknown config key {key!r}")
            current = getattr(cfg, key)
            if isinstance(current, bool):
                setattr(cfg, key, raw.lower() in ("1", "true", "yes", "on"))
            else:
                setattr(cfg, key, type(current)(raw))
    for key in fields:
        override = getattr(args, key, None)
        if override is not None:
            setattr(cfg, key, override)
    return cfg


@dataclass
class PipelineResult:
    w: np.ndarray
    projector: Projector
    spec: KernelSpec
    history: TrainHistory | None
    stages: list[str]
    status: str
    criterion: float


def _load_space(path: str, max_vocab: int, steps: str) -> emb.EmbeddingSpace:
    if not path:
        raise ConfigError("embedding path not set")
    if not Path(path).exists():
        raise ConfigError(f"missing input file: {path}")
    space = emb.load_embeddings(path, max_vocab or None)
    if steps and steps != "none":
        space = emb.normalize(space, tuple(steps.split(",")))
    return space


def run_pipeline(src: emb.EmbeddingSpace, tgt: emb.EmbeddingSpace,
                 cfg: RunConfig, on_epoch=None) -> PipelineResult:
    """init -> MMD training -> refinement, honoring the ablation switches."""
    d = src.dim
    if tgt.dim != d:
        raise ConfigError(f"dimension mismatch: {d} vs {tgt.dim}")

    if cfg.compress_dim and cfg.compress_dim < d:
        projector = fit_projector(tgt, cfg.compress_dim)
    else:
        projector = Projector.identity(d)
    spec = KernelSpec.from_median_heuristic(
        compress(tgt.matrix, projector), seed=cfg.seed)

    stages: list[str] = []
    if cfg.enable_init:
        w = build_initial_mapping(src, tgt, cfg.init_config())
        stages.append("init")
    else:
        w = np.eye(d)
        log.warning("initialization disabled: starting from the identity")

    history: TrainHistory | None = None
    k_crit = min(10000, len(src), len(tgt))
    criterion = lambda m: unsupervised_criterion(m, src, tgt, k_crit)

    status = STATUS_SUCCESS
    if cfg.enable_mmd:
        try:
            w, history = train(src, tgt, w, projector, spec,
                               cfg.train_config(), criterion, on_epoch=on_epoch)
            stages.append("mmd")
        except TrainingDiverged as exc:
            log.error("training diverged: %s", exc)
            status = STATUS_NON_CONVERGENCE

    if status == STATUS_SUCCESS and cfg.enable_refine:
        w = refine(w, src, tgt, cfg.retrieval_config("csls"))
        stages.append("refine")

    crit = criterion(w)
    if status == STATUS_SUCCESS and crit < cfg.criterion_floor:
        log.error("validation criterion %.4f below floor %.4f: non-convergence",
                  crit, cfg.criterion_floor)
        status = STATUS_NON_CONVERGENCE

    return PipelineResult(w, projector, spec, history, stages, status, crit)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: Path, cfg: RunConfig, result: PipelineResult,
                    artifacts: list[Path]) -> None:
    manifest = {
        "config": dataclasses.asdict(cfg),
        "stages": result.stages,
        "status": result.status,
        "criterion": result.criterion,
        "artifacts": {p.name: _sha256(p) for p in artifacts},
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_align(cfg: RunConfig) -> int:
    src = _load_space(cfg.src_emb, cfg.max_vocab, cfg.normalize_steps)
    tgt = _load_space(cfg.tgt_emb, cfg.max_vocab, cfg.normalize_steps)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)

    def save_checkpoint(epoch: int, w: np.ndarray, crit: float) -> None:
        np.save(ckpt_dir / f"epoch_{epoch:03d}.npy", w)
        with open(ckpt_dir / f"epoch_{epoch:03d}.json", "w") as fh:
            json.dump({"epoch": epoch, "criterion": crit}, fh)

    result = run_pipeline(src, tgt, cfg, on_epoch=save_checkpoint)

    artifacts = []
    np.save(out / "W.npy", result.w)
    np.save(out / "projector.npy", result.projector.matrix)
    np.save(out / "projector_offset.npy", result.projector.offset)
    np.save(out / "bandwidths.npy", result.spec.bandwidths)
    artifacts += [out / "W.npy", out / "projector.npy",
                  out / "projector_offset.npy", out / "bandwidths.npy"]

    if result.history is not None:
        records = [{"step": i, "mmd2": v}
                   for i, v in enumerate(result.history.step_mmd2)]
        records += [{"epoch": e, "criterion": c, "defect": d}
                    for e, (c, d) in enumerate(zip(result.history.epoch_criterion,
                                                   result.history.epoch_defect))]
        reporting.write_records(records, out / "run_log.jsonl")
        reporting.plot_training_history(result.history, out / "training_curve.png")
        artifacts += [out / "run_log.jsonl", out / "training_curve.png"]

    _write_manifest(out, cfg, result, artifacts)
    print(f"status: {result.status}  criterion: {result.criterion:.4f}  "
          f"stages: {'+'.join(result.stages) or 'none'}")
    return EXIT_OK if result.status == STATUS_SUCCESS else EXIT_NON_CONVERGENCE


def _load_mapping(out: Path) -> np.ndarray:
    w_path = out / "W.npy"
    if not w_path.exists():
        raise ConfigError(f"no trained mapping at {w_path}; run 'align' first")
    return np.load(w_path)


def cmd_evaluate(cfg: RunConfig) -> int:
    src = _load_space(cfg.src_emb, cfg.max_vocab, cfg.normalize_steps)
    tgt = _load_space(cfg.tgt_emb, cfg.max_vocab, cfg.normalize_steps)
    out = Path(cfg.out)
    w = _load_mapping(out)

    if not cfg.gold:
        raise ConfigError("evaluate requires --gold")
    gold = emb.load_lexicon(cfg.gold)
    report = bli_accuracy(w, src, tgt, gold, cfg.retrieval_config())

    similarity = None
    if cfg.sim_pairs:
        similarity = word_similarity(w, src, tgt, _read_sim_pairs(cfg.sim_pairs))

    records = reporting.bli_records(report)
    if similarity is not None:
        records.append({"metric": "pearson_r", "value": similarity.pearson_r,
                        "bucket": "all"})
    reporting.write_records(records, out / "metrics.jsonl")
    table = reporting.bli_table(report, similarity)
    (out / "report.txt").write_text(table, encoding="utf-8")
    reporting.plot_bucket_accuracy(report, out / "bucket_accuracy.png")
    print(table, end="")
    return EXIT_OK


def _read_sim_pairs(path: str) -> list[tuple[str, str, float]]:
    """Three-column 'src tgt score' word-similarity file."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) != 3:
                if parts:
                    log.warning("malformed similarity line %r; skipped", line.rstrip())
                continue
            pairs.append((parts[0], parts[1], float(parts[2])))
    return pairs


def cmd_induce(cfg: RunConfig) -> int:
    src = _load_space(cfg.src_emb, cfg.max_vocab, cfg.normalize_steps)
    tgt = _load_space(cfg.tgt_emb, cfg.max_vocab, cfg.normalize_steps)
    out = Path(cfg.out)
    w = _load_mapping(out)
    pairs = induce_dictionary(w, src, tgt, cfg.retrieval_config("csls"))
    lex = emb.Lexicon([(src.vocab.words[i], tgt.vocab.words[j]) for i, j in pairs])
    emb.save_lexicon(lex, out / "induced_lexicon.txt")
    print(f"induced {len(lex)} pairs -> {out / 'induced_lexicon.txt'}")
    return EXIT_OK


ABLATION_VARIANTS = [
    ("full", {}),
    ("w/o MMD", {"enable_mmd": False}),
    ("w/o refinement", {"enable_refine": False}),
    ("w/o initialization", {"enable_init": False}),
]


def cmd_ablate(cfg: RunConfig) -> int:
    src = _load_space(cfg.src_emb, cfg.max_vocab, cfg.normalize_steps)
    tgt = _load_space(cfg.tgt_emb, cfg.max_vocab, cfg.normalize_steps)
    if not cfg.gold:
        raise ConfigError("ablate requires --gold")
    gold = emb.load_lexicon(cfg.gold)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)

    rows: list[tuple[str, float | None]] = []
    for name, overrides in ABLATION_VARIANTS:
        variant = dataclasses.replace(cfg, **overrides)
        result = run_pipeline(src, tgt, variant)
        if result.status != STATUS_SUCCESS:
            rows.append((name, None))
            continue
        report = bli_accuracy(result.w, src, tgt, gold, cfg.retrieval_config())
        rows.append((name, report.p_at_1))

    lines = ["variant\tp_at_1"]
    for name, value in rows:
        lines.append(f"{name}\t{'*' if value is None else f'{value:.4f}'}")
    table = "\n".join(lines) + "\n"
    (out / "ablation.tsv").write_text(table, encoding="utf-8")
    reporting.plot_ablation(rows, out / "ablation.png")
    print(table, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmdalign",
        description="Unsupervised cross-lingual embedding alignment by "
                    "kernel MMD matching")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("align", "learn the mapping"),
                           ("evaluate", "score a trained mapping"),
                           ("induce", "export an induced dictionary"),
                           ("ablate", "run the 4-variant ablation matrix")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--src-emb", dest="src_emb")
        p.add_argument("--tgt-emb", dest="tgt_emb")
        p.add_argument("--gold")
        p.add_argument("--sim-pairs", dest="sim_pairs")
        p.add_argument("--out")
        p.add_argument("--seed", type=int)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--beta", type=float)
        p.add_argument("--lr", type=float)
        p.add_argument("--epochs", type=int)
        p.add_argument("--max-vocab", dest="max_vocab", type=int)
        p.add_argument("--compress-dim", dest="compress_dim", type=int)
        p.add_argument("--sample-vocab", dest="sample_vocab", type=int)
        p.add_argument("--vocab-cap", dest="vocab_cap", type=int)
        p.add_argument("--dict-vocab", dest="dict_vocab", type=int)
        p.add_argument("--csls-k", dest="csls_k", type=int)
        p.add_argument("--refine-iters", dest="refine_iters", type=int)
        p.add_argument("--retrieval", choices=["nn", "csls"])
        p.add_argument("--criterion-floor", dest="criterion_floor", type=float)
        p.add_argument("--normalize", dest="normalize_steps",
                       help="comma-separated steps or 'none'")
        p.add_argument("--no-init", dest="enable_init", action="store_false",
                       default=None)
        p.add_argument("--no-mmd", dest="enable_mmd", action="store_false",
                       default=None)
        p.add_argument("--no-refine", dest="enable_refine", action="store_false",
                       default=None)
    return parser


COMMANDS = {
    "align": cmd_align,
    "evaluate": cmd_evaluate,
    "induce": cmd_induce,
    "ablate": cmd_ablate,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("MMDALIGN_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_run_config(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, emb.EmbeddingFormatError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
