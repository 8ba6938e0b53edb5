import pytest

from shredkit import corpus, synth
from shredkit.tokens import parse_stream

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def synth_pairs():
    return synth.make_corpus(songs_per_artist=8, seed=3)


@pytest.fixture(scope="session")
def synth_index(synth_pairs):
    return corpus.from_pairs(synth_pairs)


@pytest.fixture
def corpus_dir(tmp_path, synth_pairs):
    root = tmp_path / "corpus"
    synth.write_corpus(root, synth_pairs, synth.make_annotations(synth_pairs, 6, seed=1))
    return root


@pytest.fixture
def stream():
    def make(text):
        return parse_stream(text)
    return make
