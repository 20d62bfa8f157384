"""Text ingestion, vocabulary, bucketed batching and synthetic corpora."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError, DegenerateInputError
from .numcore import SeededRng

PAD, UNK = 0, 1
PAD_TOKEN, UNK_TOKEN = "<pad>", "<unk>"

_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")
_EDGE_PUNCT = re.compile(r"^[^\w]+|[^\w]+$")


def split_and_tokenize(text: str) -> list[list[str]]:
    """Split on ``.``/``!``/``?`` followed by whitespace, then into lowercase tokens.

    Tokens are whitespace-separated chunks with leading and trailing
    punctuation stripped; inner punctuation ("a.b") is kept.  Sentences
    that end up empty are dropped.
    """
    if not text or not text.strip():
        raise DegenerateInputError("empty text")
    sentences = []
    for chunk in _SENTENCE_END.split(text.strip()):
        tokens = []
        for raw in chunk.lower().split():
            tok = _EDGE_PUNCT.sub("", raw)
            if tok:
                tokens.append(tok)
        if tokens:
            sentences.append(tokens)
    if not sentences:
        raise DegenerateInputError(f"no tokens in text {text[:40]!r}")
    return sentences


@dataclass
class Vocab:
    itos: list[str]
    counts: list[int]
    min_count: int = 5
    stoi: dict[str, int] = field(init=False)

    def __post_init__(self):
        if self.itos[:2] != [PAD_TOKEN, UNK_TOKEN]:
            raise ContractError("vocabulary must start with the PAD and UNK entries")
        self.stoi = {tok: i for i, tok in enumerate(self.itos)}

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def id(self, token: str) -> int:
        return self.stoi.get(token, UNK)

    def token(self, idx: int) -> str:
        return self.itos[idx]

    def to_tsv(self, path):
        lines = ["token\tid\tcount"]
        lines += [f"{tok}\t{i}\t{c}" for i, (tok, c) in enumerate(zip(self.itos, self.counts))]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def build_vocab(corpus: Iterable[Sequence[Sequence[str]]], min_count: int = 5) -> Vocab:
    """Keep tokens seen at least ``min_count`` times.

    Ids are assigned by descending frequency, ties broken lexicographically,
    after the reserved PAD (0) and UNK (1) entries.
    """
    counts = Counter(tok for doc in corpus for sent in doc for tok in sent)
    kept = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    kept = [t for t in kept if t not in (PAD_TOKEN, UNK_TOKEN)]
    return Vocab(
        itos=[PAD_TOKEN, UNK_TOKEN] + kept,
        counts=[0, sum(c for t, c in counts.items() if c < min_count)] + [counts[t] for t in kept],
        min_count=min_count,
    )


@dataclass
class Document:
    sentences: list[list[int]]
    label: int | None = None

    def __post_init__(self):
        if not self.sentences:
            raise DegenerateInputError("a document needs at least one sentence")
        if any(len(s) == 0 for s in self.sentences):
            raise DegenerateInputError("a document sentence has no tokens")

    @property
    def lengths(self) -> list[int]:
        return [len(s) for s in self.sentences]

    @property
    def n_sentences(self) -> int:
        return len(self.sentences)


def numericalize(sentences: Sequence[Sequence[str]], vocab: Vocab, label: int | None = None) -> Document:
    return Document([[vocab.id(tok) for tok in sent] for sent in sentences], label)


def denumericalize(doc: Document, vocab: Vocab) -> list[list[str]]:
    return [[vocab.token(i) for i in sent] for sent in doc.sentences]


@dataclass
class Batch:
    """Zero-padded block of documents.

    ``tokens`` is B x N x T with PAD outside the masks; ``word_mask`` marks
    real tokens, ``sentence_mask`` (B x N) real sentences.
    """

    tokens: np.ndarray
    word_mask: np.ndarray
    sentence_mask: np.ndarray
    labels: np.ndarray
    docs: list[Document] = field(repr=False, default_factory=list)

    @property
    def size(self) -> int:
        return self.tokens.shape[0]

    @classmethod
    def from_documents(cls, docs: Sequence[Document], n_sentences: int | None = None, n_words: int | None = None):
        if not docs:
            raise DegenerateInputError("cannot batch zero documents")
        N = max(d.n_sentences for d in docs)
        T = max(max(d.lengths) for d in docs)
        N = max(N, n_sentences or 0)
        T = max(T, n_words or 0)
        B = len(docs)
        tokens = np.full((B, N, T), PAD, dtype=np.int64)
        word_mask = np.zeros((B, N, T), dtype=bool)
        sentence_mask = np.zeros((B, N), dtype=bool)
        for b, doc in enumerate(docs):
            sentence_mask[b, : doc.n_sentences] = True
            for i, sent in enumerate(doc.sentences):
                tokens[b, i, : len(sent)] = sent
                word_mask[b, i, : len(sent)] = True
        labels = np.array([-1 if d.label is None else d.label for d in docs], dtype=np.int64)
        return cls(tokens, word_mask, sentence_mask, labels, list(docs))


def make_batches(docs: Sequence[Document], batch_size: int, rng: SeededRng | None = None) -> list[Batch]:
    """Bucket documents by sentence count into padded batches.

    Documents are sorted by sentence count (stable), cut into consecutive
    groups of ``batch_size``, and, when ``rng`` is given, both the group order
    and the order inside each group are shuffled.
    """
    if batch_size < 1:
        raise ContractError("batch_size must be at least 1")
    order = sorted(range(len(docs)), key=lambda i: docs[i].n_sentences)
    groups = [order[k : k + batch_size] for k in range(0, len(order), batch_size)]
    if rng is not None:
        groups = [rng.shuffle(g) for g in groups]
        groups = rng.shuffle(groups)
    return [Batch.from_documents([docs[i] for i in g]) for g in groups]


def train_val_split(items: Sequence, rng: SeededRng, train_fraction: float = 0.9):
    """Seeded random split, 90/10 by default."""
    perm = rng.permutation(len(items))
    cut = int(round(train_fraction * len(items)))
    return [items[i] for i in perm[:cut]], [items[i] for i in perm[cut:]]


# ---------------------------------------------------------------------------
# JSON-lines corpora


def read_jsonl(path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            if not isinstance(rec.get("text"), str) or not isinstance(rec.get("label"), int):
                raise ContractError(f"{path}:{lineno}: records need an integer 'label' and a string 'text'")
            records.append(rec)
    return records


def write_jsonl(path, records: Iterable[dict]):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({"label": int(rec["label"]), "text": rec["text"]}) + "\n")


def tokenize_records(records: Sequence[dict]) -> list[list[list[str]]]:
    return [split_and_tokenize(r["text"]) for r in records]


def documents_from_records(records: Sequence[dict], vocab: Vocab) -> list[Document]:
    return [numericalize(split_and_tokenize(r["text"]), vocab, r["label"]) for r in records]


# ---------------------------------------------------------------------------
# synthetic redundancy corpus

DISTRACTOR = ("terrible", "value")
_TOPIC_WORDS = (
    "seafood", "scallops", "mussels", "entree", "appetizer", "dessert", "parking", "waiter",
    "music", "patio", "pasta", "coffee", "bread", "salad", "burger", "noodles",
)
_NOISE_WORDS = (
    "the", "was", "and", "we", "had", "really", "quite", "some", "there", "it",
    "our", "very", "a", "of", "too", "just", "also", "then", "on", "so",
)


def topic_inventory(n_topics: int) -> list[str]:
    words = list(_TOPIC_WORDS[:n_topics])
    words += [f"topic{k}" for k in range(len(words), n_topics)]
    return words


def gen_redundancy_corpus(
    n_docs: int,
    n_classes: int,
    sentences_per_doc: tuple[int, int] = (4, 8),
    seed: int = 0,
    n_topics: int | None = None,
    noise_per_sentence: tuple[int, int] = (1, 3),
    balanced: bool = True,
    stream: str = "redundancy-corpus",
) -> list[dict]:
    """Documents whose every sentence opens with the same distractor phrase.

    Each sentence is ``terrible value <topic> <noise...>``.  The label is the
    number of distinct topic words in the document minus one, clipped to
    ``[0, n_classes - 1]``.  With ``balanced`` the labels cycle through all
    classes (then get shuffled) and topics are drawn to realise each label;
    otherwise topics are drawn uniformly and the label follows.
    """
    lo, hi = sentences_per_doc
    if n_classes < 2:
        raise ContractError("need at least 2 classes")
    if lo < 1 or hi < lo:
        raise ContractError(f"bad sentence range {sentences_per_doc}")
    if hi < n_classes:
        raise ContractError(
            f"infeasible: at most {hi} sentences per document cannot carry {n_classes} distinct topics"
        )
    n_topics = n_classes if n_topics is None else n_topics
    if n_topics < n_classes:
        raise ContractError(f"need at least {n_classes} topics, got {n_topics}")
    topics = topic_inventory(n_topics)
    rng = SeededRng(seed).substream(stream)
    labels = [k % n_classes for k in range(n_docs)]
    labels = [labels[i] for i in rng.permutation(n_docs)] if balanced else labels

    records = []
    for k in range(n_docs):
        if balanced:
            label = labels[k]
            n_sent = int(rng.integers(max(lo, label + 1), hi + 1))
            chosen = rng.choice(n_topics, label + 1, replace=False)
            picks = list(chosen) + list(rng.choice(chosen, n_sent - len(chosen)))
            picks = [picks[i] for i in rng.permutation(n_sent)]
        else:
            n_sent = int(rng.integers(lo, hi + 1))
            picks = list(rng.choice(n_topics, n_sent))
            label = min(len(set(picks)) - 1, n_classes - 1)
        sentences = []
        for t in picks:
            n_noise = int(rng.integers(noise_per_sentence[0], noise_per_sentence[1] + 1))
            noise = [_NOISE_WORDS[j] for j in rng.choice(len(_NOISE_WORDS), n_noise)]
            sentences.append(" ".join([*DISTRACTOR, topics[int(t)], *noise]) + ".")
        records.append({"label": int(label), "text": " ".join(sentences)})
    return records
