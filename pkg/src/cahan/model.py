"""HAN and the context-aware (CAHAN) family of document encoders.

Variants
--------
``HAN``        sentences encoded independently.
``CAHAN_SUM``  sentence attention sees the sum (``SIGMA``) or centroid
               (``MU``) of the sentence vectors already produced.
``CAHAN_RNN``  sentence attention sees the document GRU state after the
               neighbouring sentence.

``direction="BI"`` runs a second, right-to-left sentence stream with its own
attention parameters whose vectors feed the backward document GRU.  ``gated``
adds the per-word vector gate that mixes the annotation and context terms.

A batch is processed position-major: the sentence rows of a padded
B x N x T block are ordered ``i*B + b`` and the word-level stack is
time-major over those rows.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import numcore as nc
from .corpus import Batch, Document
from .errors import ContractError, DegenerateInputError
from .layers import (
    AttentionOutput,
    AttentionParams,
    GateParams,
    GruParams,
    attend,
    gru_step,
    params_from,
    run_bigru_stacked,
    run_gru,
)
from .numcore import SeededRng, Tensor

VARIANTS = ("HAN", "CAHAN_SUM", "CAHAN_RNN")
DIRECTIONS = ("LR", "BI")
AGGREGATIONS = ("SIGMA", "MU")

CHECKPOINT_FORMAT = "cahan-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "HAN"
    direction: str = "BI"
    aggregation: str = "SIGMA"
    gated: bool = False
    d: int = 100
    d_s: int = 50
    d_d: int = 50
    vocab_size: int = 2
    n_classes: int = 2
    dropout_rate: float = 0.5
    trainable_embeddings: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ContractError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.direction not in DIRECTIONS:
            raise ContractError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        if self.aggregation not in AGGREGATIONS:
            raise ContractError(f"aggregation must be one of {AGGREGATIONS}, got {self.aggregation!r}")
        if self.variant == "HAN" and self.gated:
            raise ContractError("HAN has no context, so it cannot be gated")
        for name in ("d", "d_s", "d_d", "vocab_size", "n_classes"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be positive")
        if self.n_classes < 2:
            raise ContractError("n_classes must be at least 2")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ContractError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")

    @property
    def contextual(self) -> bool:
        return self.variant != "HAN"

    @property
    def bidirectional(self) -> bool:
        return self.contextual and self.direction == "BI"

    @property
    def context_dim(self) -> int | None:
        if self.variant == "CAHAN_SUM":
            return 2 * self.d_s
        if self.variant == "CAHAN_RNN":
            return self.d_d
        return None

    @property
    def streams(self) -> tuple[str, ...]:
        return ("fwd", "bwd") if self.bidirectional else ("fwd",)

    @property
    def label(self) -> str:
        if self.variant == "HAN":
            return "HAN"
        parts = ["CAHAN", self.variant.split("_")[1], self.direction]
        if self.variant == "CAHAN_SUM":
            parts.append("Σ" if self.aggregation == "SIGMA" else "μ")
        name = "-".join(parts)
        return name + "+gate" if self.gated else name

    def to_dict(self) -> dict:
        return asdict(self)


def published_variants(base: ModelConfig | None = None) -> list[ModelConfig]:
    """The ten configurations compared in the results table."""
    base = base or ModelConfig()
    out = []
    for direction in ("BI", "LR"):
        for agg in ("SIGMA", "MU"):
            for gated in (False, True):
                out.append(replace(base, variant="CAHAN_SUM", direction=direction, aggregation=agg, gated=gated))
    out.append(replace(base, variant="CAHAN_RNN", direction="BI", aggregation="SIGMA", gated=False))
    out.append(replace(base, variant="HAN", direction="BI", aggregation="SIGMA", gated=False))
    return out


# ---------------------------------------------------------------------------
# parameters


def _gru_shapes(prefix, in_dim, hid):
    shapes = {}
    for g in ("z", "r", "h"):
        shapes[f"{prefix}.W_{g}"] = (hid, in_dim)
    for g in ("z", "r", "h"):
        shapes[f"{prefix}.U_{g}"] = (hid, hid)
    for g in ("z", "r", "h"):
        shapes[f"{prefix}.b_{g}"] = (1, hid)
    return shapes


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, int]]:
    """Every trainable tensor of ``config``, in a fixed order."""
    c = config
    k_s, k_d = 2 * c.d_s, 2 * c.d_d
    shapes = {"embeddings": (c.vocab_size, c.d)}
    shapes.update(_gru_shapes("sent_fwd", c.d, c.d_s))
    shapes.update(_gru_shapes("sent_bwd", c.d, c.d_s))
    for stream in c.streams:
        p = f"sent_att_{stream}"
        shapes[f"{p}.W_s"] = (k_s, k_s)
        shapes[f"{p}.b_s"] = (1, k_s)
        shapes[f"{p}.u_s"] = (1, k_s)
        if c.contextual:
            shapes[f"{p}.W_c"] = (k_s, c.context_dim)
    if c.gated:
        for stream in c.streams:
            p = f"sent_gate_{stream}"
            shapes[f"{p}.W_l1"] = (k_s, k_s)
            shapes[f"{p}.W_l2"] = (k_s, c.context_dim)
            shapes[f"{p}.b_l"] = (1, k_s)
    shapes.update(_gru_shapes("doc_fwd", k_s, c.d_d))
    shapes.update(_gru_shapes("doc_bwd", k_s, c.d_d))
    shapes["doc_att.W_s"] = (k_d, k_d)
    shapes["doc_att.b_s"] = (1, k_d)
    shapes["doc_att.u_s"] = (1, k_d)
    shapes["classifier.W"] = (c.n_classes, k_d)
    shapes["classifier.b"] = (1, c.n_classes)
    return shapes


_VARIANT_ONLY = (".W_c", "sent_gate_")


def _is_variant_only(name: str) -> bool:
    return any(tag in name for tag in _VARIANT_ONLY)


def _stream_key(name: str) -> str:
    # both directions' W_s/b_s/u_s start from the same draw as HAN's single set
    if name.startswith("sent_att_") and not name.endswith(".W_c"):
        return "sent_att." + name.split(".", 1)[1]
    return name


def _init_tensor(name: str, shape: tuple[int, int], rng: SeededRng) -> np.ndarray:
    leaf = name.rsplit(".", 1)[-1]
    if name == "embeddings":
        # unit variance per entry: a lookup table has no fan-in to scale by
        r = math.sqrt(3.0)
        return rng.uniform(-r, r, shape)
    if leaf.startswith("b"):
        return np.zeros(shape)
    if leaf == "u_s":
        return rng.uniform(-0.1, 0.1, shape)
    r = math.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-r, r, shape)


@dataclass
class ModelParams:
    config: ModelConfig
    arrays: dict[str, np.ndarray]

    def __getitem__(self, name):
        return self.arrays[name]

    def __iter__(self):
        return iter(self.arrays)

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self.arrays.values())

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.arrays.items()})

    def tensors(self, tape: nc.Tape | None = None) -> dict[str, Tensor]:
        if tape is None:
            return {k: Tensor(v) for k, v in self.arrays.items()}
        return tape.leaves_from(self.arrays)

    def validate(self):
        expected = param_shapes(self.config)
        if list(expected) != list(self.arrays):
            missing = set(expected) ^ set(self.arrays)
            raise ContractError(f"parameter set does not match config: {sorted(missing)}")
        for k, shape in expected.items():
            if self.arrays[k].shape != shape:
                raise ContractError(f"{k}: expected shape {shape}, got {self.arrays[k].shape}")
        return self


def init_params(config: ModelConfig, seed: int) -> ModelParams:
    """Deterministic initialisation with cross-variant sharing.

    Each tensor is drawn from its own substream keyed by name, so tensors that
    exist in several variants (embeddings, GRUs, attention W_s/b_s/u_s,
    document level, classifier) get identical values for the same seed and
    shape.  Context projections and gates come from a separate family of
    substreams.
    """
    root = SeededRng(seed)
    shared, extra = root.substream("shared"), root.substream("variant-only")
    arrays = {}
    for name, shape in param_shapes(config).items():
        base = extra if _is_variant_only(name) else shared
        arrays[name] = _init_tensor(name, shape, base.substream(_stream_key(name), *shape))
    return ModelParams(config, arrays)


# ---------------------------------------------------------------------------
# complexity accounting


def count_matmuls(config: ModelConfig) -> int:
    """Matrix multiplications per encoder pass under the published accounting.

    26 for HAN (13 per level); the context projection adds 1 (LR) or 2 (BI),
    gating adds 2 more (LR) or 4 (BI).
    """
    total = 26
    if not config.contextual:
        return total
    bi = config.direction == "BI"
    total += 2 if bi else 1
    if config.gated:
        total += 4 if bi else 2
    return total


def audit_matmuls(config: ModelConfig) -> int:
    """Distinct weight matrices the implementation multiplies by, both levels.

    Unlike :func:`count_matmuls` this counts the duplicated W_s of the
    bidirectional sentence stream, so BI variants come out one or two higher.
    """
    n = 0
    for name, shape in param_shapes(config).items():
        leaf = name.rsplit(".", 1)[-1]
        if name in ("embeddings", "classifier.W") or leaf.startswith("b") or leaf == "u_s":
            continue
        n += 1
    return n


# ---------------------------------------------------------------------------
# dropout


def dropout_mask(shape, rate: float, rng: SeededRng) -> np.ndarray:
    """Inverted-dropout multiplier: 0 with probability ``rate``, else 1/(1-rate)."""
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def apply_dropout(x: Tensor, rate: float, rng: SeededRng | None, training: bool) -> Tensor:
    if not 0.0 <= rate < 1.0:
        raise ContractError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    return nc.mul(x, Tensor(dropout_mask(x.shape, rate, rng)))


# ---------------------------------------------------------------------------
# context vectors


def compute_context_sum(sent_vectors, i: int, direction: str, aggregation: str) -> np.ndarray:
    """Summed or centroid context for the (0-based) sentence ``i``.

    ``fwd`` uses sentences before i, ``bwd`` those after it; the sum runs from
    the far end towards i.  With no terms the context is the zero vector.
    """
    vecs = [np.asarray(v.value if isinstance(v, Tensor) else v, dtype=float).reshape(1, -1) for v in sent_vectors]
    n = len(vecs)
    if not 0 <= i < n:
        raise ContractError(f"sentence index {i} out of range for {n} sentences")
    if direction == "fwd":
        terms = vecs[:i]
    elif direction == "bwd":
        terms = vecs[i + 1 :][::-1]
    else:
        raise ContractError(f"direction must be 'fwd' or 'bwd', got {direction!r}")
    total = np.zeros_like(vecs[0])
    for v in terms:
        total = total + v
    if aggregation == "MU" and terms:
        total = total * (1.0 / len(terms))
    elif aggregation not in AGGREGATIONS:
        raise ContractError(f"aggregation must be one of {AGGREGATIONS}")
    return total


# ---------------------------------------------------------------------------
# forward pass


@dataclass
class BatchOutput:
    logits: Tensor
    probabilities: Tensor
    word_attention: dict[str, list[np.ndarray]] = field(default_factory=dict)  # per position: B x T
    word_gates: dict[str, list[np.ndarray]] = field(default_factory=dict)  # per position: T*B x 2d_s
    sentence_vectors: dict[str, list[np.ndarray]] = field(default_factory=dict)  # per position: B x 2d_s
    context_vectors: dict[str, list[np.ndarray]] = field(default_factory=dict)  # per position: B x ctx
    sentence_attention: np.ndarray | None = None  # B x N


@dataclass
class ForwardTrace:
    word_attention: dict[str, list[np.ndarray]]  # stream -> per sentence: T_i weights
    sentence_attention: np.ndarray  # N
    sentence_vectors: dict[str, np.ndarray]  # stream -> N x 2d_s
    context_vectors: dict[str, np.ndarray]  # stream -> N x ctx (contextual variants)
    gates: dict[str, list[np.ndarray]]  # stream -> per sentence: T_i x 2d_s
    logits: np.ndarray
    probabilities: np.ndarray

    @property
    def prediction(self) -> int:
        return int(np.argmax(self.probabilities))


class _Streams:
    """Per-direction sentence attention parameters."""

    def __init__(self, tensors, config: ModelConfig):
        self.att = {s: params_from(AttentionParams, tensors, f"sent_att_{s}").validate() for s in config.streams}
        self.gate = (
            {s: params_from(GateParams, tensors, f"sent_gate_{s}") for s in config.streams} if config.gated else {}
        )


def _layout(batch: Batch):
    B, N, T = batch.tokens.shape
    ids = batch.tokens.transpose(2, 1, 0).reshape(-1)  # row t*R + i*B + b
    word_mask = batch.word_mask.transpose(1, 0, 2).reshape(N * B, T)  # row i*B + b
    real = batch.sentence_mask.T.reshape(-1)
    if (real & ~word_mask.any(axis=1)).any():
        raise DegenerateInputError("a real sentence has no tokens after masking")
    return B, N, T, ids, word_mask


def _rows_for_position(i: int, B: int, T: int, R: int) -> np.ndarray:
    return (np.arange(T)[:, None] * R + i * B + np.arange(B)[None, :]).reshape(-1)


def forward(
    tensors: dict[str, Tensor],
    config: ModelConfig,
    batch: Batch,
    training: bool = False,
    rng: SeededRng | None = None,
    trace: bool = False,
) -> BatchOutput:
    """Run the full encoder and classifier on a padded batch.

    ``tensors`` holds the parameters (tape leaves when gradients are wanted).
    With ``training`` dropout is applied using ``rng``.  With ``trace`` the
    intermediate attention weights, sentence and context vectors are copied
    out for inspection.
    """
    c = config
    if training and c.dropout_rate > 0 and rng is None:
        raise ContractError("training-mode dropout needs an rng")
    B, N, T, ids, word_mask = _layout(batch)
    R = N * B
    rate = c.dropout_rate

    def drop(x):
        return apply_dropout(x, rate, rng, training)

    out_trace = {"word_attention": {}, "word_gates": {}, "sentence_vectors": {}, "context_vectors": {}}

    emb = tensors["embeddings"]
    if not c.trainable_embeddings and emb.tape is not None:
        emb = Tensor(emb.value)
    words = drop(nc.take_rows(emb, ids))
    sent_fwd = params_from(GruParams, tensors, "sent_fwd").validate()
    sent_bwd = params_from(GruParams, tensors, "sent_bwd").validate()
    annotations = drop(run_bigru_stacked(words, R, sent_fwd, sent_bwd, word_mask))

    streams = _Streams(tensors, c)
    doc_fwd = params_from(GruParams, tensors, "doc_fwd").validate()
    doc_bwd = params_from(GruParams, tensors, "doc_bwd").validate()
    sent_mask = batch.sentence_mask  # B x N

    def record(stream, i, out: AttentionOutput, s: Tensor, ctx: Tensor | None):
        if not trace:
            return
        out_trace["word_attention"].setdefault(stream, [None] * N)[i] = out.weights.value
        out_trace["sentence_vectors"].setdefault(stream, [None] * N)[i] = s.value
        if ctx is not None:
            out_trace["context_vectors"].setdefault(stream, [None] * N)[i] = ctx.value
        if out.gates is not None:
            out_trace["word_gates"].setdefault(stream, [None] * N)[i] = out.gates.value

    def encode_at(stream, i, ctx):
        rows = _rows_for_position(i, B, T, R)
        out = attend(
            nc.take_rows(annotations, rows),
            B,
            word_mask[i * B : (i + 1) * B],
            streams.att[stream],
            context=ctx,
            gate=streams.gate.get(stream),
            allow_empty=True,
        )
        record(stream, i, out, out.pooled, ctx)
        return out.pooled

    if c.variant == "HAN":
        out = attend(annotations, R, word_mask, streams.att["fwd"], allow_empty=True)
        sentences = out.pooled  # N*B x 2d_s, position-major
        if trace:
            for i in range(N):
                record("fwd", i, _slice_output(out, i, B), nc.slice_rows(sentences, i * B, (i + 1) * B), None)
        inputs = drop(sentences)
        doc_f = run_gru(inputs, B, doc_fwd, sent_mask)
        doc_b = run_gru(inputs, B, doc_bwd, sent_mask, reverse=True)
    elif c.variant == "CAHAN_SUM":
        stacks = {}
        for stream in c.streams:
            positions = range(N) if stream == "fwd" else range(N - 1, -1, -1)
            counts = _neighbour_counts(sent_mask, stream)
            running = None
            vectors = [None] * N
            for i in positions:
                if running is None:
                    ctx = nc.zeros(B, 2 * c.d_s)
                elif c.aggregation == "MU":
                    ctx = nc.mul(running, Tensor(1.0 / np.maximum(counts[:, i : i + 1], 1)))
                else:
                    ctx = running
                s = encode_at(stream, i, ctx)
                vectors[i] = s
                running = s if running is None else nc.add(running, s)
            stacks[stream] = drop(nc.concat_rows(vectors))
        fwd_in = stacks["fwd"]
        bwd_in = stacks.get("bwd", fwd_in)
        doc_f = run_gru(fwd_in, B, doc_fwd, sent_mask)
        doc_b = run_gru(bwd_in, B, doc_bwd, sent_mask, reverse=True)
    else:
        doc_f, vectors_f = _recurrent_stream(encode_at, drop, doc_fwd, sent_mask, "fwd", B, N, c.d_d)
        if c.bidirectional:
            doc_b, _ = _recurrent_stream(encode_at, drop, doc_bwd, sent_mask, "bwd", B, N, c.d_d)
        else:
            doc_b = run_gru(drop(nc.concat_rows(vectors_f)), B, doc_bwd, sent_mask, reverse=True)

    sentence_annotations = drop(nc.concat_cols([nc.concat_rows(doc_f), nc.concat_rows(doc_b)]))
    doc_att = params_from(AttentionParams, tensors, "doc_att").validate()
    doc_out = attend(sentence_annotations, B, sent_mask, doc_att)
    doc_vec = drop(doc_out.pooled)
    logits = nc.add(nc.linear(doc_vec, tensors["classifier.W"]), tensors["classifier.b"])
    probs = nc.softmax(logits)
    return BatchOutput(
        logits=logits,
        probabilities=probs,
        sentence_attention=doc_out.weights.value if trace else None,
        **out_trace,
    )


def _slice_output(out: AttentionOutput, i: int, B: int) -> AttentionOutput:
    return AttentionOutput(
        weights=Tensor(out.weights.value[i * B : (i + 1) * B]),
        pooled=Tensor(out.pooled.value[i * B : (i + 1) * B]),
        alignments=Tensor(out.alignments.value[i * B : (i + 1) * B]),
    )


def _neighbour_counts(sent_mask: np.ndarray, stream: str) -> np.ndarray:
    """Number of real preceding (fwd) or following (bwd) sentences, B x N."""
    m = sent_mask.astype(np.int64)
    before = np.cumsum(m, axis=1) - m
    if stream == "fwd":
        return before
    return m.sum(axis=1, keepdims=True) - before - m


def _recurrent_stream(encode_at, drop, gru: GruParams, sent_mask, stream, B, N, d_d):
    """Interleave sentence encoding with one document GRU direction.

    The context of sentence i is the GRU state after the neighbouring
    sentence, so input projections cannot be precomputed here.
    """
    h = nc.zeros(B, d_d)
    states = [None] * N
    vectors = [None] * N
    positions = range(N) if stream == "fwd" else range(N - 1, -1, -1)
    for i in positions:
        s = encode_at(stream, i, h)
        vectors[i] = s
        new = gru_step(drop(s), h, gru)
        m = sent_mask[:, i]
        h = new if m.all() else nc.select(m, new, h)
        states[i] = h
    return states, vectors


# ---------------------------------------------------------------------------
# single-document entry points


def encode_document(doc: Document, params: ModelParams, config: ModelConfig | None = None) -> ForwardTrace:
    """Evaluation-mode forward pass on one document with full trace."""
    config = config or params.config
    batch = Batch.from_documents([doc])
    out = forward(params.tensors(), config, batch, trace=True)
    n = doc.n_sentences
    lengths = doc.lengths
    word_attention, gates, sent_vecs, ctx_vecs = {}, {}, {}, {}
    for stream, per_pos in out.word_attention.items():
        word_attention[stream] = [per_pos[i][0, : lengths[i]].copy() for i in range(n)]
        sent_vecs[stream] = np.vstack([out.sentence_vectors[stream][i] for i in range(n)])
        if stream in out.context_vectors:
            ctx_vecs[stream] = np.vstack([out.context_vectors[stream][i] for i in range(n)])
        if stream in out.word_gates:
            gates[stream] = [out.word_gates[stream][i][: lengths[i]].copy() for i in range(n)]
    return ForwardTrace(
        word_attention=word_attention,
        sentence_attention=out.sentence_attention[0, :n].copy(),
        sentence_vectors=sent_vecs,
        context_vectors=ctx_vecs,
        gates=gates,
        logits=out.logits.value[0].copy(),
        probabilities=out.probabilities.value[0].copy(),
    )


def encode_sentence(
    doc: Document,
    i: int,
    direction: str,
    params: ModelParams,
    config: ModelConfig | None = None,
    context=None,
) -> np.ndarray:
    """Sentence vector of sentence ``i`` on its own, given an explicit context.

    Runs the word-level GRU on that sentence alone and applies the attention
    of stream ``direction`` (``fwd``/``bwd``).  HAN takes no context.
    """
    config = config or params.config
    if not 0 <= i < doc.n_sentences:
        raise ContractError(f"sentence index {i} out of range")
    if direction not in config.streams:
        raise ContractError(f"{config.label} has no {direction!r} sentence stream")
    if config.contextual and context is None:
        context = np.zeros((1, config.context_dim))
    if not config.contextual and context is not None:
        raise ContractError("HAN sentence encoding takes no context")
    tensors = params.tensors()
    sent = doc.sentences[i]
    if not sent:
        raise DegenerateInputError("empty sentence")
    words = nc.take_rows(tensors["embeddings"], sent)
    mask = np.ones((1, len(sent)), dtype=bool)
    annotations = run_bigru_stacked(
        words,
        1,
        params_from(GruParams, tensors, "sent_fwd"),
        params_from(GruParams, tensors, "sent_bwd"),
        mask,
    )
    streams = _Streams(tensors, config)
    ctx = None if context is None else Tensor(np.asarray(context, dtype=float).reshape(1, -1))
    out = attend(annotations, 1, mask, streams.att[direction], context=ctx, gate=streams.gate.get(direction))
    return out.pooled.value[0].copy()


def predict(params: ModelParams, docs, batch_size: int = 64) -> np.ndarray:
    """Class probabilities for each document (evaluation mode), n x C."""
    from .corpus import make_batches

    probs = np.zeros((len(docs), params.config.n_classes))
    index = {id(d): k for k, d in enumerate(docs)}
    tensors = params.tensors()
    for batch in make_batches(docs, batch_size):
        out = forward(tensors, params.config, batch)
        for row, doc in enumerate(batch.docs):
            probs[index[id(doc)]] = out.probabilities.value[row]
    return probs


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, params: ModelParams, vocab: list[str] | None = None, extra: dict | None = None):
    """Write a JSON checkpoint: config, optional vocabulary, parameter values.

    Floats are written with ``repr`` precision so loading is bit-exact.
    """
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": params.config.to_dict(),
        "vocab": vocab,
        "extra": extra or {},
        "params": {
            name: {"shape": list(arr.shape), "values": arr.ravel().tolist()} for name, arr in params.arrays.items()
        },
    }
    Path(path).write_text(json.dumps(payload, separators=(",", ":")) + "\n", encoding="utf-8")


def load_checkpoint(path) -> tuple[ModelParams, list[str] | None, dict]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ContractError(f"{path}: not a checkpoint file")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ContractError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    config = ModelConfig(**payload["config"])
    arrays = {
        name: np.array(entry["values"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in payload["params"].items()
    }
    return ModelParams(config, arrays).validate(), payload.get("vocab"), payload.get("extra", {})
