import json
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest

from cahan import cli
from cahan.corpus import PAD_TOKEN, UNK_TOKEN, gen_redundancy_corpus, write_jsonl
from cahan.model import ModelConfig, init_params, save_checkpoint

WORDS = ["terrible", "value", "seafood", "parking", "music", "the", "was"]


def write(path, obj):
    path.write_text(json.dumps(obj))
    return path


def toy_run(tmp_path, **overrides):
    data = tmp_path / "data"
    if not data.exists():
        assert cli.main(["gen-data", str(write(tmp_path / "gen.json", {"n_docs": 120, "n_classes": 3, "sentences_min": 3, "sentences_max": 5})), "--out", str(data)]) == 0
    cfg = {
        "d": 8, "d_s": 4, "d_d": 4, "dropout_rate": 0.0, "lr_min": 0.05, "lr_max": 0.5,
        "batch_size": 16, "max_epochs": 2, "min_count": 1,
        "train_path": "data/train.jsonl", "val_path": "data/val.jsonl", "test_path": "data/test.jsonl",
    }
    cfg.update(overrides)
    return write(tmp_path / "run.json", cfg)


def toy_checkpoint(tmp_path, config: ModelConfig, seed=0):
    vocab = [PAD_TOKEN, UNK_TOKEN, *WORDS]
    params = init_params(replace(config, vocab_size=len(vocab)), seed)
    path = tmp_path / f"ck{seed}.json"
    save_checkpoint(path, params, vocab=vocab)
    return path


# ---------------------------------------------------------------------------
# count-matmuls


def test_count_matmuls_table(capsys):
    assert cli.main(["count-matmuls"]) == 0
    rows = {line.split("\t")[0]: line.split("\t")[1:] for line in capsys.readouterr().out.splitlines()[1:]}
    assert len(rows) == 10
    assert rows["HAN"] == ["26", "+0", "26"]
    assert rows["CAHAN-SUM-LR-Σ+gate"][:2] == ["29", "+3"]
    assert rows["CAHAN-SUM-BI-μ"][:2] == ["28", "+2"]
    assert rows["CAHAN-SUM-BI-Σ+gate"][:2] == ["32", "+6"]


# ---------------------------------------------------------------------------
# grad-check


@pytest.mark.parametrize(
    "model",
    [{}, {"variant": "CAHAN_SUM", "gated": True}, {"variant": "CAHAN_RNN"}],
    ids=["HAN", "CAHAN-SUM-BI+gate", "CAHAN-RNN-BI"],
)
def test_grad_check_passes(tmp_path, capsys, model):
    assert cli.main(["grad-check", str(write(tmp_path / "m.json", model))]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[-1].startswith("max\t") and out[-1].endswith("PASS")
    errors = [float(line.split("\t")[2]) for line in out[1:-1]]
    assert errors and max(errors) < 1e-4


def test_grad_check_rejects_large_models(tmp_path):
    assert cli.main(["grad-check", str(write(tmp_path / "m.json", {"d": 100, "d_s": 50, "d_d": 50}))]) == cli.EXIT_CONFIG
    assert cli.main(["grad-check", str(write(tmp_path / "m.json", {"lr": 1}))]) == cli.EXIT_CONFIG


def test_grad_check_failure_exit_code(monkeypatch):
    from cahan import numcore as nc

    monkeypatch.setattr(cli, "grad_check_model", lambda config, seed: nc.GradCheckResult(0.5, {"W": 0.5}))
    assert cli.main(["grad-check"]) == cli.EXIT_CHECK


# ---------------------------------------------------------------------------
# gen-data


def test_gen_data_splits_and_determinism(tmp_path):
    cfg = write(tmp_path / "g.json", {"n_docs": 100, "n_classes": 4, "seed": 7})
    assert cli.main(["gen-data", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["gen-data", str(cfg), "--out", str(tmp_path / "b")]) == 0
    for name, n in (("train", 80), ("val", 10), ("test", 10)):
        a = (tmp_path / "a" / f"{name}.jsonl").read_bytes()
        assert a == (tmp_path / "b" / f"{name}.jsonl").read_bytes()
        assert len(a.decode().splitlines()) == n
    texts = [set((tmp_path / "a" / f"{s}.jsonl").read_text().splitlines()) for s in ("train", "val", "test")]
    assert not (texts[0] & texts[1]) and not (texts[0] & texts[2])
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["params"]["seed"] == 7 and manifest["files"]["train"]["n_docs"] == 80


def test_gen_data_balanced_labels(tmp_path):
    cfg = write(tmp_path / "g.json", {"n_docs": 1000, "n_classes": 4})
    assert cli.main(["gen-data", str(cfg), "--out", str(tmp_path)]) == 0
    labels = Counter(json.loads(l)["label"] for l in (tmp_path / "train.jsonl").read_text().splitlines())
    assert all(abs(c / 800 - 0.25) <= 0.025 for c in labels.values())


def test_gen_data_infeasible(tmp_path, capsys):
    cfg = write(tmp_path / "g.json", {"n_classes": 6, "sentences_max": 4})
    assert cli.main(["gen-data", str(cfg), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert "infeasible" in capsys.readouterr().err


def test_out_dir_environment_override(tmp_path, monkeypatch):
    monkeypatch.setenv("OUT_DIR", str(tmp_path / "env"))
    assert cli.main(["gen-data", str(write(tmp_path / "g.json", {"n_docs": 10, "n_classes": 2}))]) == 0
    assert (tmp_path / "env" / "manifest.json").exists()


# ---------------------------------------------------------------------------
# train


def test_train_writes_artifacts(tmp_path):
    cfg = toy_run(tmp_path, variant="CAHAN_SUM", gated=True)
    assert cli.main(["train", str(cfg), "--out", str(tmp_path / "run")]) == 0
    run = tmp_path / "run"
    for name in ("checkpoint.json", "history.tsv", "vocab.tsv", "config.json", "metrics.json"):
        assert (run / name).exists()
    echoed = json.loads((run / "config.json").read_text())
    assert echoed["variant"] == "CAHAN_SUM" and echoed["n_classes"] == 3
    assert cli.RunConfig.from_dict(echoed).gated


def test_train_is_byte_reproducible(tmp_path):
    cfg = toy_run(tmp_path, variant="CAHAN_RNN", direction="LR", dropout_rate=0.3)
    for run in ("r1", "r2"):
        assert cli.main(["train", str(cfg), "--out", str(tmp_path / run)]) == 0
    for name in ("history.tsv", "checkpoint.json", "vocab.tsv"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()


def test_train_runs_range_test_without_bounds(tmp_path):
    cfg = toy_run(tmp_path, lr_min=None, lr_max=None, range_test_iters=12, max_epochs=1)
    assert cli.main(["train", str(cfg), "--out", str(tmp_path / "run")]) == 0
    echoed = json.loads((tmp_path / "run" / "config.json").read_text())
    assert echoed["lr_max"] == pytest.approx(10 * echoed["lr_min"])
    assert len((tmp_path / "run" / "range_test.tsv").read_text().splitlines()) == 13


def test_train_missing_corpus(tmp_path, capsys):
    cfg = write(tmp_path / "run.json", {"train_path": "nowhere.jsonl"})
    assert cli.main(["train", str(cfg)]) == cli.EXIT_DATA
    assert "nowhere.jsonl" in capsys.readouterr().err


@pytest.mark.parametrize(
    "bad, field",
    [({"colour": 1}, "colour"), ({"d": "big"}, "d"), ({"variant": "LSTM"}, "variant"), ({"lr_min": 0.1}, "lr_min"), ({"monitor": "test"}, "monitor")],
)
def test_train_config_errors(tmp_path, capsys, bad, field):
    assert cli.main(["train", str(write(tmp_path / "run.json", bad))]) == cli.EXIT_CONFIG
    assert field in capsys.readouterr().err


def test_range_test_command(tmp_path, capsys):
    cfg = toy_run(tmp_path, range_test_iters=15)
    assert cli.main(["range-test", str(cfg), "--out", str(tmp_path / "rt")]) == 0
    assert "suggested lr_max" in capsys.readouterr().out
    lines = (tmp_path / "rt" / "range_test.tsv").read_text().splitlines()
    assert lines[0] == "iter\tlr\tsmoothed_loss" and len(lines) == 16


# ---------------------------------------------------------------------------
# eval


def test_eval_untrained_is_near_chance(tmp_path, capsys):
    recs = gen_redundancy_corpus(400, 4, seed=2)
    write_jsonl(tmp_path / "c.jsonl", recs)
    ck = toy_checkpoint(tmp_path, ModelConfig(d=8, d_s=4, d_d=4, n_classes=4))
    assert cli.main(["eval", str(ck), str(tmp_path / "c.jsonl"), "--out", str(tmp_path / "ev")]) == 0
    acc = float(capsys.readouterr().out.split("\t")[1])
    assert abs(acc - 0.25) <= 0.1
    assert (tmp_path / "ev" / "confusion.tsv").read_text().startswith("true\\pred\t0\t1\t2\t3")


def test_eval_single_document(tmp_path):
    write_jsonl(tmp_path / "one.jsonl", [{"label": 1, "text": "terrible value seafood. the music was."}])
    ck = toy_checkpoint(tmp_path, ModelConfig(d=8, d_s=4, d_d=4, n_classes=3))
    result = cli.cmd_eval(ck, tmp_path / "one.jsonl")
    assert np.count_nonzero(result["confusion"]) == 1 and result["confusion"].sum() == 1


def test_eval_label_space_mismatch(tmp_path, capsys):
    write_jsonl(tmp_path / "c.jsonl", [{"label": 5, "text": "the music."}])
    ck = toy_checkpoint(tmp_path, ModelConfig(d=8, d_s=4, d_d=4, n_classes=3))
    assert cli.main(["eval", str(ck), str(tmp_path / "c.jsonl")]) == cli.EXIT_DATA
    assert "label 5" in capsys.readouterr().err


def test_eval_after_convergence_on_training_set(tmp_path):
    data = tmp_path / "data"
    data.mkdir()
    write_jsonl(data / "train.jsonl", gen_redundancy_corpus(200, 2, (2, 4), seed=0, stream="train"))
    write_jsonl(data / "val.jsonl", gen_redundancy_corpus(40, 2, (2, 4), seed=0, stream="val"))
    cfg = toy_run(tmp_path, d=16, d_s=8, d_d=8, max_epochs=20, test_path=None)
    assert cli.main(["train", str(cfg), "--out", str(tmp_path / "run")]) == 0
    result = cli.cmd_eval(tmp_path / "run" / "checkpoint.json", data / "train.jsonl")
    assert result["accuracy"] >= 0.95


# ---------------------------------------------------------------------------
# inspect

REPEATED = " ".join(["Terrible value seafood the music was."] * 4)


def test_inspect_schema_and_normalisation(tmp_path, capsys):
    ck = toy_checkpoint(tmp_path, ModelConfig(variant="CAHAN_SUM", gated=True, d=8, d_s=4, d_d=4, n_classes=3))
    assert cli.main(["inspect", str(ck), "--text", REPEATED, "--out", str(tmp_path / "ins")]) == 0
    heat = capsys.readouterr().out
    assert heat.count("| ") == 8 and "@" in heat
    export = json.loads((tmp_path / "ins" / "inspect.json").read_text())
    assert set(export) == {"model", "config", "sentences", "sentence_attention", "probabilities", "prediction"}
    assert set(export["sentences"][0]) == {"tokens", "ids", "word_attention", "gates", "context_norm"}
    assert abs(sum(export["sentence_attention"]) - 1) < 1e-9
    for sent in export["sentences"]:
        assert set(sent["word_attention"]) == {"fwd", "bwd"}
        for row in sent["word_attention"].values():
            assert abs(sum(row) - 1) < 1e-9
        assert len(sent["gates"]["fwd"]) == len(sent["tokens"])
    assert export["sentences"][0]["context_norm"]["fwd"] == 0.0


def test_inspect_han_rows_identical_on_repeated_sentences(tmp_path):
    ck = toy_checkpoint(tmp_path, ModelConfig(d=8, d_s=4, d_d=4, n_classes=3))
    export = cli.cmd_inspect(ck, text=REPEATED)
    rows = [s["word_attention"]["fwd"] for s in export["sentences"]]
    assert all(r == rows[0] for r in rows)
    assert export["sentences"][0]["gates"] is None and export["sentences"][0]["context_norm"] is None


def test_inspect_cahan_rows_differ_on_repeated_sentences(tmp_path):
    config = ModelConfig(variant="CAHAN_SUM", direction="LR", d=8, d_s=4, d_d=4, n_classes=3)
    for seed in range(5):
        export = cli.cmd_inspect(toy_checkpoint(tmp_path, config, seed), text=REPEATED)
        rows = np.array([s["word_attention"]["fwd"] for s in export["sentences"]])
        assert np.abs(rows[1:] - rows[0]).sum(axis=1).max() > 1e-6


def test_inspect_empty_document(tmp_path, capsys):
    ck = toy_checkpoint(tmp_path, ModelConfig(d=8, d_s=4, d_d=4, n_classes=3))
    assert cli.main(["inspect", str(ck), "--text", " ... "]) == cli.EXIT_DATA
    assert cli.main(["inspect", str(tmp_path / "missing.json"), "--text", "hi"]) == cli.EXIT_DATA


def test_shade_buckets():
    assert [cli.shade(w, 1.0) for w in (0.0, 0.19, 0.2, 0.5, 0.79, 0.8, 1.0)] == [" ", " ", ".", ":", "#", "@", "@"]
    assert cli.shade(0.3, 0.0) == " "
