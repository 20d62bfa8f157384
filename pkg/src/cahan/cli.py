"""Command-line entry point.

Experiments are described by a flat JSON file; flags only name paths and
the subcommand.  Every command that writes artifacts also writes the
effective configuration next to them.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 check failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import numcore as nc
from .corpus import (
    Batch,
    Document,
    build_vocab,
    documents_from_records,
    gen_redundancy_corpus,
    numericalize,
    read_jsonl,
    split_and_tokenize,
    tokenize_records,
    train_val_split,
    write_jsonl,
)
from .errors import CahanError, ContractError, DegenerateInputError, NonFiniteError
from .model import (
    ModelConfig,
    audit_matmuls,
    count_matmuls,
    encode_document,
    forward,
    init_params,
    load_checkpoint,
    published_variants,
    predict,
    save_checkpoint,
)
from .numcore import SeededRng
from .trainer import (
    CYCLE_EPOCHS,
    MAX_EPOCHS,
    PATIENCE,
    evaluate,
    lr_range_test,
    train,
    write_tsv,
)

log = logging.getLogger("cahan")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CHECK = 0, 2, 3, 4
GRAD_TOLERANCE = 1e-4
MAX_GRAD_CHECK_PARAMS = 10_000
SHADES = " .:#@"


class ConfigError(CahanError):
    """The run configuration is malformed."""


class DataError(CahanError):
    """Input data is missing or unusable."""


class CheckFailure(CahanError):
    """A self-check ran but did not pass."""


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    # model
    variant: str = "HAN"
    direction: str = "BI"
    aggregation: str = "SIGMA"
    gated: bool = False
    d: int = 100
    d_s: int = 50
    d_d: int = 50
    dropout_rate: float = 0.5
    trainable_embeddings: bool = True
    n_classes: int | None = None
    # schedule
    lr_min: float | None = None
    lr_max: float | None = None
    batch_size: int = 64
    cycle_epochs: int = CYCLE_EPOCHS
    max_epochs: int = MAX_EPOCHS
    patience: int = PATIENCE
    monitor: str = "val"
    range_test_iters: int = 100
    # data and output
    train_path: str | None = None
    val_path: str | None = None
    test_path: str | None = None
    min_count: int = 5
    out_dir: str = "runs/default"
    seed: int = 0

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path | None = None) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(raw) - set(known))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        for key, value in raw.items():
            _check_type(key, value, known[key].type)
        cfg = cls(**raw)
        if base_dir is not None:
            for key in ("train_path", "val_path", "test_path"):
                value = getattr(cfg, key)
                if value is not None and not Path(value).is_absolute():
                    setattr(cfg, key, str(base_dir / value))
        cfg.validate()
        return cfg

    def validate(self):
        if self.monitor not in ("val", "test"):
            raise ConfigError(f"monitor: must be 'val' or 'test', got {self.monitor!r}")
        if self.monitor == "test" and self.test_path is None:
            raise ConfigError("monitor: 'test' needs test_path")
        if (self.lr_min is None) != (self.lr_max is None):
            raise ConfigError("lr_min/lr_max: give both or neither (neither runs a range test)")
        if self.lr_min is not None and not 0 <= self.lr_min < self.lr_max:
            raise ConfigError(f"lr_min/lr_max: need 0 <= lr_min < lr_max, got {self.lr_min}, {self.lr_max}")
        for key in ("batch_size", "cycle_epochs", "max_epochs", "patience", "min_count"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key}: must be at least 1")
        if self.range_test_iters < 10:
            raise ConfigError("range_test_iters: must be at least 10")
        try:
            self.model_config(vocab_size=2, n_classes=self.n_classes or 2)
        except ContractError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def model_config(self, vocab_size: int, n_classes: int) -> ModelConfig:
        return ModelConfig(
            variant=self.variant,
            direction=self.direction,
            aggregation=self.aggregation,
            gated=self.gated,
            d=self.d,
            d_s=self.d_s,
            d_d=self.d_d,
            vocab_size=vocab_size,
            n_classes=n_classes,
            dropout_rate=self.dropout_rate,
            trainable_embeddings=self.trainable_embeddings,
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def _check_type(key, value, annotation):
    allow_none = "None" in str(annotation)
    if value is None:
        if allow_none:
            return
        raise ConfigError(f"{key}: may not be null")
    if "bool" in str(annotation):
        ok = isinstance(value, bool)
    elif "int" in str(annotation):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif "float" in str(annotation):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    else:
        ok = isinstance(value, str)
    if not ok:
        raise ConfigError(f"{key}: expected {annotation}, got {type(value).__name__} {value!r}")


def load_json(path, kind="config") -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"{kind} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def load_run_config(path) -> RunConfig:
    return RunConfig.from_dict(load_json(path), base_dir=Path(path).resolve().parent)


def resolve_out_dir(flag: str | None, configured: str | None) -> Path | None:
    """``--out`` beats the OUT_DIR environment variable, which beats the config."""
    chosen = flag or os.environ.get("OUT_DIR") or configured
    if chosen is None:
        return None
    out = Path(chosen)
    out.mkdir(parents=True, exist_ok=True)
    return out


def read_corpus(path) -> list[dict]:
    if path is None:
        raise DataError("no corpus path given")
    if not Path(path).is_file():
        raise DataError(f"corpus file not found: {path}")
    try:
        records = read_jsonl(path)
    except (ContractError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: {exc}") from None
    if not records:
        raise DataError(f"{path}: corpus is empty")
    return records


# ---------------------------------------------------------------------------
# train


def cmd_train(config_path, out_flag: str | None = None) -> dict:
    cfg = load_run_config(config_path)
    train_recs = read_corpus(cfg.train_path)
    if cfg.val_path is not None:
        val_recs = read_corpus(cfg.val_path)
    else:
        train_recs, val_recs = train_val_split(train_recs, SeededRng(cfg.seed).substream("split"))
        if not train_recs or not val_recs:
            raise DataError("corpus too small for a 90/10 train/validation split")
    test_recs = read_corpus(cfg.test_path) if cfg.test_path is not None else None

    try:
        vocab = build_vocab(tokenize_records(train_recs), min_count=cfg.min_count)
        labels = [r["label"] for recs in (train_recs, val_recs, test_recs or []) for r in recs]
        n_classes = cfg.n_classes or max(2, max(labels) + 1)
        if min(labels) < 0 or max(labels) >= n_classes:
            raise DataError(f"labels must lie in [0, {n_classes}); found {min(labels)}..{max(labels)}")
        tr = documents_from_records(train_recs, vocab)
        va = documents_from_records(val_recs, vocab)
        te = documents_from_records(test_recs, vocab) if test_recs else None
    except DegenerateInputError as exc:
        raise DataError(str(exc)) from None

    model_cfg = cfg.model_config(len(vocab), n_classes)
    out = resolve_out_dir(out_flag, cfg.out_dir)
    monitored = te if cfg.monitor == "test" else va

    effective = replace(cfg, n_classes=n_classes)
    if cfg.lr_min is None:
        rt = lr_range_test(model_cfg, tr, monitored, iters=cfg.range_test_iters, seed=cfg.seed, batch_size=cfg.batch_size)
        write_tsv(out / "range_test.tsv", rt.to_tsv())
        effective = replace(effective, lr_min=rt.lr_min, lr_max=rt.lr_max)
        log.info("range test suggests lr in [%.4g, %.4g]", rt.lr_min, rt.lr_max)
    (out / "config.json").write_text(effective.to_json(), encoding="utf-8")

    state = train(
        model_cfg,
        tr,
        monitored,
        seed=cfg.seed,
        lr_min=effective.lr_min,
        lr_max=effective.lr_max,
        batch_size=cfg.batch_size,
        cycle_epochs=cfg.cycle_epochs,
        max_epochs=cfg.max_epochs,
        patience=cfg.patience,
    )
    best = state.best_params or state.params
    extra = {"best_epoch": state.best_epoch, "best_monitored_loss": state.best_val_loss, "epochs_run": state.epoch}
    write_tsv(out / "history.tsv", state.history_tsv())
    save_checkpoint(out / "checkpoint.json", best, vocab=vocab.itos, extra=extra)
    vocab.to_tsv(out / "vocab.tsv")
    summary = dict(extra)
    summary["val_accuracy"] = evaluate(best, va)[1]
    if te is not None:
        summary["test_loss"], summary["test_accuracy"] = evaluate(best, te)
    (out / "metrics.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"{model_cfg.label}: best epoch {state.best_epoch} of {state.epoch}, artifacts in {out}")
    for key in ("val_accuracy", "test_accuracy"):
        if key in summary:
            print(f"{key}\t{summary[key]:.4f}")
    return summary


# ---------------------------------------------------------------------------
# eval


def _load_model(path):
    if not Path(path).is_file():
        raise DataError(f"checkpoint not found: {path}")
    try:
        params, itos, extra = load_checkpoint(path)
    except (ContractError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: unreadable checkpoint ({exc})") from None
    if itos is None:
        raise DataError(f"{path}: checkpoint has no vocabulary")
    from .corpus import Vocab

    return params, Vocab(itos, [0] * len(itos)), extra


def confusion_matrix(labels, predictions, n_classes: int) -> np.ndarray:
    m = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(m, (np.asarray(labels), np.asarray(predictions)), 1)
    return m


def confusion_tsv(m: np.ndarray) -> str:
    k = m.shape[0]
    lines = ["true\\pred\t" + "\t".join(str(j) for j in range(k))]
    lines += [f"{i}\t" + "\t".join(str(int(x)) for x in m[i]) for i in range(k)]
    return "\n".join(lines) + "\n"


def cmd_eval(checkpoint, corpus, out_flag: str | None = None, batch_size: int = 128) -> dict:
    params, vocab, _ = _load_model(checkpoint)
    records = read_corpus(corpus)
    n_classes = params.config.n_classes
    bad = [r["label"] for r in records if not 0 <= r["label"] < n_classes]
    if bad:
        raise DataError(f"{corpus}: label {bad[0]} outside the checkpoint's {n_classes} classes")
    try:
        docs = documents_from_records(records, vocab)
    except DegenerateInputError as exc:
        raise DataError(str(exc)) from None
    probs = predict(params, docs, batch_size=batch_size)
    labels = np.array([d.label for d in docs])
    preds = probs.argmax(axis=1)
    accuracy = float((preds == labels).mean())
    matrix = confusion_matrix(labels, preds, n_classes)
    out = resolve_out_dir(out_flag, None)
    if out is not None:
        write_tsv(out / "confusion.tsv", confusion_tsv(matrix))
    print(f"accuracy\t{accuracy:.4f}\t({int((preds == labels).sum())}/{len(docs)})")
    print(confusion_tsv(matrix), end="")
    return {"accuracy": accuracy, "confusion": matrix}


# ---------------------------------------------------------------------------
# inspect


def shade(weight: float, row_max: float) -> str:
    """Bucket a weight into five shades relative to the row maximum."""
    if row_max <= 0:
        return SHADES[0]
    k = min(int(weight / row_max * len(SHADES)), len(SHADES) - 1)
    return SHADES[k]


def inspect_document(params, vocab, text: str) -> dict:
    """Attention export with a fixed schema (see README)."""
    tokens = split_and_tokenize(text)
    doc = numericalize(tokens, vocab)
    trace = encode_document(doc, params)
    config = params.config
    sentences = []
    for i, toks in enumerate(tokens):
        entry = {
            "tokens": toks,
            "ids": doc.sentences[i],
            "word_attention": {s: trace.word_attention[s][i].tolist() for s in config.streams},
            "gates": {s: trace.gates[s][i].tolist() for s in config.streams} if config.gated else None,
            "context_norm": (
                {s: float(np.linalg.norm(trace.context_vectors[s][i])) for s in config.streams}
                if config.contextual
                else None
            ),
        }
        sentences.append(entry)
    return {
        "model": config.label,
        "config": config.to_dict(),
        "sentences": sentences,
        "sentence_attention": trace.sentence_attention.tolist(),
        "probabilities": trace.probabilities.tolist(),
        "prediction": trace.prediction,
    }


def render_heatmap(export: dict) -> str:
    lines = [f"{export['model']}  prediction {export['prediction']}  shades '{SHADES}' (relative to row max)"]
    sent_att = export["sentence_attention"]
    top = max(sent_att)
    for i, sent in enumerate(export["sentences"]):
        for stream, weights in sent["word_attention"].items():
            m = max(weights)
            words = " ".join(f"{shade(w, m)}{tok}" for w, tok in zip(weights, sent["tokens"]))
            lines.append(f"{i + 1:>3} {shade(sent_att[i], top)} {sent_att[i]:.3f} {stream:<3} | {words}")
    return "\n".join(lines) + "\n"


def cmd_inspect(checkpoint, text=None, corpus=None, index=0, out_flag=None, as_json=False) -> dict:
    params, vocab, _ = _load_model(checkpoint)
    if text is None:
        records = read_corpus(corpus)
        if not 0 <= index < len(records):
            raise DataError(f"{corpus}: index {index} out of range for {len(records)} documents")
        text = records[index]["text"]
    try:
        export = inspect_document(params, vocab, text)
    except DegenerateInputError as exc:
        raise DataError(str(exc)) from None
    heatmap = render_heatmap(export)
    out = resolve_out_dir(out_flag, None)
    if out is not None:
        (out / "inspect.json").write_text(json.dumps(export, indent=2) + "\n", encoding="utf-8")
        (out / "heatmap.txt").write_text(heatmap, encoding="utf-8")
    print(json.dumps(export, indent=2) if as_json else heatmap, end="\n" if as_json else "")
    return export


# ---------------------------------------------------------------------------
# range test


def cmd_range_test(config_path, out_flag=None):
    cfg = load_run_config(config_path)
    train_recs = read_corpus(cfg.train_path)
    if cfg.val_path is not None:
        val_recs = read_corpus(cfg.val_path)
    else:
        train_recs, val_recs = train_val_split(train_recs, SeededRng(cfg.seed).substream("split"))
    vocab = build_vocab(tokenize_records(train_recs), min_count=cfg.min_count)
    n_classes = cfg.n_classes or max(2, max(r["label"] for r in train_recs + val_recs) + 1)
    model_cfg = cfg.model_config(len(vocab), n_classes)
    result = lr_range_test(
        model_cfg,
        documents_from_records(train_recs, vocab),
        documents_from_records(val_recs, vocab),
        iters=cfg.range_test_iters,
        seed=cfg.seed,
        batch_size=cfg.batch_size,
    )
    out = resolve_out_dir(out_flag, cfg.out_dir)
    write_tsv(out / "range_test.tsv", result.to_tsv())
    (out / "config.json").write_text(cfg.to_json(), encoding="utf-8")
    print(f"suggested lr_min\t{result.lr_min!r}\nsuggested lr_max\t{result.lr_max!r}")
    if result.diverged_at is not None:
        print(f"loss diverged at iteration {result.diverged_at}")
    return result


# ---------------------------------------------------------------------------
# gen-data


@dataclass
class GenConfig:
    n_docs: int = 1000
    n_classes: int = 4
    sentences_min: int = 4
    sentences_max: int = 8
    noise_min: int = 1
    noise_max: int = 3
    n_topics: int | None = None
    balanced: bool = True
    split: list = field(default_factory=lambda: [0.8, 0.1, 0.1])
    seed: int = 0

    @classmethod
    def from_dict(cls, raw: dict) -> "GenConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(raw) - set(known))
        if unknown:
            raise ConfigError(f"unknown gen-data key(s): {', '.join(unknown)}")
        for key, value in raw.items():
            if key != "split":
                _check_type(key, value, known[key].type)
        cfg = cls(**raw)
        if len(cfg.split) != 3 or any(not isinstance(x, (int, float)) or x < 0 for x in cfg.split):
            raise ConfigError("split: expected three nonnegative fractions")
        if abs(sum(cfg.split) - 1.0) > 1e-9:
            raise ConfigError(f"split: fractions must sum to 1, got {sum(cfg.split)}")
        if cfg.n_docs < 1:
            raise ConfigError("n_docs: must be at least 1")
        return cfg

    def counts(self) -> list[int]:
        n_train = int(round(self.split[0] * self.n_docs))
        n_val = int(round(self.split[1] * self.n_docs))
        return [n_train, n_val, self.n_docs - n_train - n_val]


def cmd_gen_data(config_path=None, out_flag=None) -> dict:
    cfg = GenConfig.from_dict(load_json(config_path) if config_path else {})
    out = resolve_out_dir(out_flag, "data")
    manifest = {"generator": "redundancy", "params": asdict(cfg), "files": {}}
    for name, n in zip(("train", "val", "test"), cfg.counts()):
        try:
            records = gen_redundancy_corpus(
                n,
                cfg.n_classes,
                (cfg.sentences_min, cfg.sentences_max),
                seed=cfg.seed,
                n_topics=cfg.n_topics,
                noise_per_sentence=(cfg.noise_min, cfg.noise_max),
                balanced=cfg.balanced,
                stream=name,
            )
        except ContractError as exc:
            raise ConfigError(str(exc)) from None
        write_jsonl(out / f"{name}.jsonl", records)
        labels = [r["label"] for r in records]
        manifest["files"][name] = {
            "path": f"{name}.jsonl",
            "n_docs": n,
            "label_counts": [labels.count(k) for k in range(cfg.n_classes)],
        }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {' / '.join(str(c) for c in cfg.counts())} documents to {out}")
    return manifest


# ---------------------------------------------------------------------------
# count-matmuls


def matmul_table() -> list[tuple[str, int, int, int]]:
    base = count_matmuls(ModelConfig())
    rows = []
    for c in published_variants():
        n = count_matmuls(c)
        rows.append((c.label, n, n - base, audit_matmuls(c)))
    return rows


def cmd_count_matmuls() -> list:
    rows = matmul_table()
    print("variant\tmatmuls\tdelta\taudit")
    for label, n, delta, audit in rows:
        print(f"{label}\t{n}\t{delta:+d}\t{audit}")
    return rows


# ---------------------------------------------------------------------------
# grad-check

TOY_MODEL = {"d": 4, "d_s": 3, "d_d": 3, "vocab_size": 12, "n_classes": 3}
_MODEL_KEYS = {f.name for f in fields(ModelConfig)}


def toy_document(seed: int, n_sentences=3, n_words=4, vocab_size=12, n_classes=3) -> Document:
    rng = SeededRng(seed).substream("grad-check-doc")
    sentences = [[int(x) for x in rng.integers(2, vocab_size, n_words)] for _ in range(n_sentences)]
    return Document(sentences, int(rng.integers(0, n_classes)))


def grad_check_model(config: ModelConfig, seed: int = 0, eps: float = 1e-5) -> nc.GradCheckResult:
    """Finite-difference check of the full loss on the 3 x 4 toy document."""
    params = init_params(config, seed)
    if params.n_params >= MAX_GRAD_CHECK_PARAMS:
        raise ConfigError(f"grad-check needs fewer than {MAX_GRAD_CHECK_PARAMS} parameters, got {params.n_params}")
    doc = toy_document(seed, vocab_size=config.vocab_size, n_classes=config.n_classes)
    batch = Batch.from_documents([doc])

    def loss(tensors):
        out = forward(tensors, config, batch)
        return nc.cross_entropy(out.probabilities, batch.labels)

    return nc.grad_check(loss, params.arrays, eps=eps)


def cmd_grad_check(config_path=None, seed=0, all_variants=False) -> dict:
    raw = load_json(config_path) if config_path else {}
    unknown = sorted(set(raw) - _MODEL_KEYS)
    if unknown:
        raise ConfigError(f"unknown model key(s): {', '.join(unknown)}")
    try:
        base = ModelConfig(**{**TOY_MODEL, **raw})
    except (ContractError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    configs = published_variants(base) if all_variants else [base]
    results, failed = {}, []
    print("variant\tparameter\tmax_rel_error")
    for config in configs:
        try:
            res = grad_check_model(config, seed)
        except NonFiniteError as exc:
            raise CheckFailure(f"{config.label}: {exc}") from None
        results[config.label] = res
        for name, err in res.per_param.items():
            flag = "" if err < GRAD_TOLERANCE else "\tFAIL"
            print(f"{config.label}\t{name}\t{err:.3e}{flag}")
            if err >= GRAD_TOLERANCE:
                failed.append(f"{config.label}:{name}")
    worst = max(r.max_error for r in results.values())
    print(f"max\t{worst:.3e}\t{'PASS' if not failed else 'FAIL'}")
    if failed:
        raise CheckFailure(f"gradient check failed for {', '.join(failed)}")
    return results


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cahan", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a JSON run config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides OUT_DIR and the config)")

    p = sub.add_parser("eval", help="accuracy and confusion matrix of a checkpoint on a corpus")
    p.add_argument("checkpoint")
    p.add_argument("corpus")
    p.add_argument("--out")

    p = sub.add_parser("inspect", help="export attention weights for one document")
    p.add_argument("checkpoint")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--text")
    src.add_argument("--corpus")
    p.add_argument("--index", type=int, default=0, help="document index within --corpus")
    p.add_argument("--json", action="store_true", help="print the JSON export instead of the heatmap")
    p.add_argument("--out")

    p = sub.add_parser("range-test", help="learning-rate range test")
    p.add_argument("config")
    p.add_argument("--out")

    p = sub.add_parser("gen-data", help="write a synthetic redundancy corpus")
    p.add_argument("config", nargs="?")
    p.add_argument("--out")

    sub.add_parser("count-matmuls", help="matrix multiplication accounting per variant")

    p = sub.add_parser("grad-check", help="finite-difference gradient check on a toy model")
    p.add_argument("config", nargs="?", help="JSON object of model fields (toy dimensions by default)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--all", action="store_true", help="check every published variant")
    return parser


def run(args) -> None:
    if args.command == "train":
        cmd_train(args.config, args.out)
    elif args.command == "eval":
        cmd_eval(args.checkpoint, args.corpus, args.out)
    elif args.command == "inspect":
        cmd_inspect(args.checkpoint, args.text, args.corpus, args.index, args.out, args.json)
    elif args.command == "range-test":
        cmd_range_test(args.config, args.out)
    elif args.command == "gen-data":
        cmd_gen_data(args.config, args.out)
    elif args.command == "count-matmuls":
        cmd_count_matmuls()
    elif args.command == "grad-check":
        cmd_grad_check(args.config, args.seed, args.all)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, DegenerateInputError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CheckFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
