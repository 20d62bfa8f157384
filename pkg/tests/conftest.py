import numpy as np
import pytest

from cahan.corpus import Document
from cahan.model import ModelConfig, published_variants

TOY = ModelConfig(d=4, d_s=3, d_d=3, vocab_size=12, n_classes=3, dropout_rate=0.5)


def toy_variants():
    """The ten published configurations plus the left-to-right recurrent one."""
    from dataclasses import replace

    return published_variants(TOY) + [replace(TOY, variant="CAHAN_RNN", direction="LR")]


def random_doc(rng, n_sentences=3, n_words=4, vocab_size=12, label=None, ragged=False):
    sentences = []
    for _ in range(n_sentences):
        length = int(rng.integers(1, n_words + 1)) if ragged else n_words
        sentences.append([int(x) for x in rng.integers(2, vocab_size, length)])
    return Document(sentences, label)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def toy_doc(rng):
    return random_doc(rng, label=1)


# acceptance criteria report: one line per criterion in the terminal summary
ACCEPTANCE: dict[str, str] = {}


def record(criterion: str, passed: bool, detail: str, expected_failure: bool = False) -> bool:
    status = "PASS" if passed else "FAIL"
    if expected_failure:
        status = "XPASS" if passed else "XFAIL"
    ACCEPTANCE[criterion] = f"criterion {criterion:<3} {status:<5} {detail}"
    print(ACCEPTANCE[criterion])
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        terminalreporter.write_line(ACCEPTANCE[key])
