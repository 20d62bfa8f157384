from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cahan import numcore as nc
from cahan.corpus import Batch, Document
from cahan.errors import ContractError, DegenerateInputError
from cahan.layers import AttentionParams, GruParams, attend, gru_step, params_from, run_gru
from cahan.model import (
    ModelConfig,
    apply_dropout,
    audit_matmuls,
    compute_context_sum,
    count_matmuls,
    encode_document,
    encode_sentence,
    forward,
    init_params,
    load_checkpoint,
    published_variants,
    param_shapes,
    predict,
    save_checkpoint,
)
from cahan.numcore import SeededRng, Tensor

from conftest import TOY, random_doc, toy_variants

HAN = TOY
SUM_LR = replace(TOY, variant="CAHAN_SUM", direction="LR")
UNGATED = [c for c in toy_variants() if not c.gated]


def test_config_validation():
    with pytest.raises(ContractError):
        ModelConfig(variant="LSTM")
    with pytest.raises(ContractError):
        ModelConfig(variant="HAN", gated=True)
    with pytest.raises(ContractError):
        ModelConfig(dropout_rate=1.0)
    assert ModelConfig().d_s == ModelConfig().d_d == 50
    assert replace(SUM_LR, gated=True).label == "CAHAN-SUM-LR-Σ+gate"


# ---------------------------------------------------------------------------
# context vectors


def test_context_sum_examples():
    s = [np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([5.0, 5.0])]
    np.testing.assert_array_equal(compute_context_sum(s, 0, "fwd", "SIGMA"), [[0.0, 0.0]])
    np.testing.assert_array_equal(compute_context_sum(s, 2, "fwd", "SIGMA"), [[1.0, 1.0]])
    np.testing.assert_array_equal(compute_context_sum(s, 2, "fwd", "MU"), [[0.5, 0.5]])
    np.testing.assert_array_equal(compute_context_sum(s, 2, "bwd", "MU"), [[0.0, 0.0]])
    np.testing.assert_array_equal(compute_context_sum(s, 0, "bwd", "SIGMA"), [[5.0, 6.0]])
    with pytest.raises(ContractError):
        compute_context_sum(s, 3, "fwd", "SIGMA")


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 8), st.sampled_from(["fwd", "bwd"]))
def test_centroid_bounded_and_sum_monotone(seed, n, direction):
    rng = np.random.default_rng(seed)
    vecs = list(rng.standard_normal((n, 3)) * rng.uniform(0.1, 10))
    bound = max(np.linalg.norm(v) for v in vecs)
    for i in range(n):
        assert np.linalg.norm(compute_context_sum(vecs, i, direction, "MU")) <= bound * (1 + 1e-12)
    positive = list(np.abs(rng.standard_normal((n, 3))))
    norms = [np.linalg.norm(compute_context_sum(positive, i, "fwd", "SIGMA")) for i in range(n)]
    assert all(b >= a for a, b in zip(norms, norms[1:]))


# ---------------------------------------------------------------------------
# parameters


def test_init_shares_common_tensors():
    han, cahan = init_params(HAN, 3), init_params(replace(TOY, variant="CAHAN_SUM", gated=True), 3)
    for name in han.arrays:
        if name.startswith("sent_att_fwd"):
            for stream in ("fwd", "bwd"):
                np.testing.assert_array_equal(han[name], cahan[name.replace("fwd", stream)])
        else:
            np.testing.assert_array_equal(han[name], cahan[name])
    assert "sent_att_fwd.W_c" in cahan.arrays and "sent_gate_bwd.W_l2" in cahan.arrays
    assert not np.array_equal(init_params(HAN, 3)["embeddings"], init_params(HAN, 4)["embeddings"])
    again = init_params(HAN, 3)
    for name in han.arrays:
        np.testing.assert_array_equal(han[name], again[name])


def test_param_sets_per_variant():
    assert "sent_att_bwd.W_s" not in param_shapes(HAN)
    assert "sent_att_bwd.W_s" not in param_shapes(SUM_LR)
    rnn = replace(TOY, variant="CAHAN_RNN")
    assert param_shapes(rnn)["sent_att_bwd.W_c"] == (2 * TOY.d_s, TOY.d_d)
    assert param_shapes(replace(TOY, variant="CAHAN_SUM"))["sent_att_fwd.W_c"] == (2 * TOY.d_s, 2 * TOY.d_s)


def test_count_matmuls_table():
    expected = {
        "HAN": 26,
        "CAHAN-SUM-BI-Σ": 28,
        "CAHAN-SUM-BI-μ": 28,
        "CAHAN-SUM-LR-Σ": 27,
        "CAHAN-SUM-LR-μ": 27,
        "CAHAN-SUM-BI-Σ+gate": 32,
        "CAHAN-SUM-BI-μ+gate": 32,
        "CAHAN-SUM-LR-Σ+gate": 29,
        "CAHAN-SUM-LR-μ+gate": 29,
        "CAHAN-RNN-BI": 28,
        "CAHAN-RNN-LR": 27,
    }
    got = {c.label: count_matmuls(c) for c in toy_variants()}
    assert got == expected


def test_audit_counts_duplicated_projection():
    assert audit_matmuls(HAN) == 26
    assert audit_matmuls(replace(TOY, variant="CAHAN_SUM")) == 29
    assert audit_matmuls(replace(TOY, variant="CAHAN_SUM", gated=True)) == 33
    assert audit_matmuls(SUM_LR) == count_matmuls(SUM_LR)


# ---------------------------------------------------------------------------
# dropout


def test_dropout_identity_cases():
    x = Tensor(np.arange(6.0).reshape(2, 3))
    assert apply_dropout(x, 0.5, SeededRng(0), training=False) is x
    assert apply_dropout(x, 0.0, SeededRng(0), training=True) is x
    with pytest.raises(ContractError):
        apply_dropout(x, 1.0, SeededRng(0), training=True)


def test_dropout_keep_fraction():
    out = apply_dropout(Tensor(np.ones((1, 100_000))), 0.5, SeededRng(0), training=True).value
    kept = out != 0
    assert abs(kept.mean() - 0.5) < 0.01
    np.testing.assert_array_equal(out[kept], 2.0)


# ---------------------------------------------------------------------------
# encoder behaviour


def test_single_sentence_han_and_sum_sentence_vectors_agree(rng):
    doc = random_doc(rng, n_sentences=1)
    a = encode_sentence(doc, 0, "fwd", init_params(HAN, 0))
    b = encode_sentence(doc, 0, "fwd", init_params(SUM_LR, 0))
    assert np.abs(a - b).max() <= 1e-15


@pytest.mark.parametrize("config", UNGATED, ids=lambda c: c.label)
def test_single_sentence_logits_match_han(config, rng):
    doc = random_doc(rng, n_sentences=1, ragged=True)
    han = encode_document(doc, init_params(HAN, 5)).logits
    other = encode_document(doc, init_params(config, 5)).logits
    assert np.abs(han - other).max() <= 1e-12


def test_repeated_sentences(rng):
    sent = [3, 4, 5, 6]
    doc = Document([list(sent) for _ in range(5)])
    han = encode_document(doc, init_params(HAN, 0)).sentence_vectors["fwd"]
    assert all(np.array_equal(han[0], v) for v in han)
    for config in (SUM_LR, replace(SUM_LR, aggregation="MU"), replace(TOY, variant="CAHAN_SUM")):
        for seed in range(5):
            vecs = encode_document(doc, init_params(config, seed)).sentence_vectors["fwd"]
            assert min(np.linalg.norm(v - vecs[0]) for v in vecs[1:]) > 1e-6


def test_probabilities_sum_to_one(rng):
    config = replace(TOY, n_classes=5, variant="CAHAN_RNN")
    trace = encode_document(random_doc(rng, n_sentences=4, ragged=True), init_params(config, 1))
    assert abs(trace.probabilities.sum() - 1) < 1e-12
    assert trace.probabilities.shape == (5,)


def test_rnn_lr_matches_hand_unrolled_oracle(rng):
    config = replace(TOY, variant="CAHAN_RNN", direction="LR")
    params = init_params(config, 2)
    doc = random_doc(rng, n_sentences=2)
    t = params.tensors()
    doc_fwd = params_from(GruParams, t, "doc_fwd")
    s1 = encode_sentence(doc, 0, "fwd", params, context=np.zeros(config.d_d))
    h1 = gru_step(Tensor(s1), nc.zeros(1, config.d_d), doc_fwd)
    s2 = encode_sentence(doc, 1, "fwd", params, context=h1.value)
    h2 = gru_step(Tensor(s2), h1, doc_fwd)
    back = run_gru(Tensor(np.vstack([s1, s2])), 1, params_from(GruParams, t, "doc_bwd"), np.ones((1, 2), bool), True)
    ann = nc.concat_cols([nc.concat_rows([h1, h2]), nc.concat_rows(back)])
    doc_vec = attend(ann, 1, np.ones((1, 2), bool), params_from(AttentionParams, t, "doc_att")).pooled
    logits = doc_vec.value @ params["classifier.W"].T + params["classifier.b"]

    trace = encode_document(doc, params)
    np.testing.assert_allclose(trace.sentence_vectors["fwd"], np.vstack([s1, s2]), rtol=0, atol=1e-15)
    np.testing.assert_allclose(trace.context_vectors["fwd"][1], h1.value[0], rtol=0, atol=1e-15)
    np.testing.assert_allclose(trace.logits, logits[0], rtol=0, atol=1e-15)


def test_sum_bi_contexts_follow_their_streams(rng):
    config = replace(TOY, variant="CAHAN_SUM", aggregation="MU")
    trace = encode_document(random_doc(rng, n_sentences=4), init_params(config, 0))
    for stream in ("fwd", "bwd"):
        vecs = trace.sentence_vectors[stream]
        for i in range(4):
            np.testing.assert_allclose(
                trace.context_vectors[stream][i], compute_context_sum(vecs, i, stream, "MU")[0], atol=1e-15
            )


def test_gates_are_traced_and_bounded(rng):
    config = replace(TOY, variant="CAHAN_SUM", gated=True)
    doc = random_doc(rng, n_sentences=3, ragged=True)
    trace = encode_document(doc, init_params(config, 0))
    for stream in ("fwd", "bwd"):
        for i, g in enumerate(trace.gates[stream]):
            assert g.shape == (doc.lengths[i], 2 * TOY.d_s)
            assert np.all((g > 0) & (g < 1))


@pytest.mark.parametrize("config", toy_variants(), ids=lambda c: c.label)
def test_batch_rows_match_single_documents(config):
    rng = np.random.default_rng(9)
    docs = [random_doc(rng, n_sentences=int(rng.integers(1, 5)), ragged=True, label=0) for _ in range(4)]
    params = init_params(config, 1)
    batched = forward(params.tensors(), config, Batch.from_documents(docs)).logits.value
    for row, doc in enumerate(docs):
        np.testing.assert_allclose(batched[row], encode_document(doc, params).logits, rtol=0, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    idx=st.integers(0, len(toy_variants()) - 1),
    extra_sentences=st.integers(0, 3),
    extra_words=st.integers(0, 5),
)
def test_padding_invariance(seed, idx, extra_sentences, extra_words):
    config = toy_variants()[idx]
    rng = np.random.default_rng(seed)
    doc = random_doc(rng, n_sentences=int(rng.integers(1, 4)), ragged=True)
    params = init_params(config, seed)
    tight = forward(params.tensors(), config, Batch.from_documents([doc])).logits.value
    n, t = doc.n_sentences + extra_sentences, max(doc.lengths) + extra_words
    loose = forward(params.tensors(), config, Batch.from_documents([doc], n, t)).logits.value
    assert np.abs(tight - loose).max() <= 1e-10


def test_empty_document_rejected():
    with pytest.raises(DegenerateInputError):
        Document([])


def test_model_gradient_with_dropout_active():
    config = replace(TOY, variant="CAHAN_SUM", aggregation="MU", gated=True)
    params = init_params(config, 0)
    rng = np.random.default_rng(0)
    batch = Batch.from_documents([random_doc(rng, label=2), random_doc(rng, n_sentences=2, ragged=True, label=0)])

    def loss(t):
        out = forward(t, config, batch, training=True, rng=SeededRng(4).substream("dropout"))
        return nc.cross_entropy(out.probabilities, batch.labels)

    assert nc.grad_check(loss, params.arrays).max_error < 1e-4


def test_frozen_embeddings_get_no_gradient(rng):
    config = replace(TOY, trainable_embeddings=False)
    params = init_params(config, 0)
    batch = Batch.from_documents([random_doc(rng, label=1)])
    tape = nc.Tape()
    out = forward(params.tensors(tape), config, batch)
    grads = nc.backward(tape, nc.cross_entropy(out.probabilities, batch.labels))
    np.testing.assert_array_equal(grads["embeddings"], 0.0)
    assert np.abs(grads["classifier.W"]).max() > 0


def test_checkpoint_round_trip(tmp_path, rng):
    config = replace(TOY, variant="CAHAN_RNN", gated=True)
    params = init_params(config, 8)
    params.arrays["embeddings"][2, 1] = 1 / 3
    path = tmp_path / "ck.json"
    save_checkpoint(path, params, vocab=["<pad>", "<unk>", "a"], extra={"epoch": 3})
    loaded, vocab, extra = load_checkpoint(path)
    assert loaded.config == config and vocab == ["<pad>", "<unk>", "a"] and extra == {"epoch": 3}
    for name in params.arrays:
        assert loaded[name].tobytes() == params[name].tobytes()
    doc = random_doc(rng)
    assert np.array_equal(predict(params, [doc]), predict(loaded, [doc]))


def test_checkpoint_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.json"
    path.write_text('{"format": "other"}')
    with pytest.raises(ContractError):
        load_checkpoint(path)


def test_published_variants_are_the_ten_table_rows():
    labels = [c.label for c in published_variants()]
    assert len(labels) == len(set(labels)) == 10
    assert "HAN" in labels and "CAHAN-RNN-BI" in labels
