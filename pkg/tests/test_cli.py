import json
import subprocess
import sys

import pytest

from shredkit.cli import main


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli") / "corpus"
    assert main(["synth", "--out", str(root), "--songs-per-artist", "6", "--annotations", "5", "--seed", "2"]) == 0
    return root


def test_synth_layout(small_corpus):
    files = sorted(small_corpus.rglob("*.tokens.txt"))
    assert len(files) == 24
    assert len(json.loads((small_corpus / "solos.json").read_text())) == 5


def test_validate_exit_codes(small_corpus, tmp_path, capsys):
    assert main(["validate", str(small_corpus)]) == 0
    bad = tmp_path / "bad.tokens.txt"
    bad.write_text("start nfx:bend wait:0 end\n")
    assert main(["validate", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "effect without note" in err and "zero wait" in err
    assert main(["validate", str(tmp_path / "missing.tokens.txt")]) == 2


def test_usage_errors_exit_2(capsys):
    assert main([]) == 2
    assert main(["analyze", "--corpus", "x"]) == 2
    assert main(["classify", "--corpus", "x", "--out", "y", "--split", "0.5,0.5"]) == 2


def test_domain_error_exit_1(tmp_path):
    (tmp_path / "empty").mkdir()
    assert main(["analyze", "--corpus", str(tmp_path / "empty"), "--out", str(tmp_path / "o")]) == 1


def test_analyze_outputs(small_corpus, tmp_path):
    out = tmp_path / "analysis"
    assert main(["analyze", "--corpus", str(small_corpus), "--out", str(out), "--emit-gnuplot"]) == 0
    for name in ("note_durations.csv", "techniques.csv", "pitch_classes.csv", "summary.csv",
                 "pce_sc_descriptive.csv", "kruskal_wallis.json", "manifest.json"):
        assert (out / name).is_file(), name
    kw = json.loads((out / "kruskal_wallis.json").read_text())
    assert kw["unit"] == "song"
    for test in kw["tests"].values():
        assert 0 <= test["p"] <= 1 and test["df"] == 3
    assert list(out.glob("*.gp"))


def test_extract_solos(small_corpus, tmp_path):
    out = tmp_path / "solos"
    assert main(["extract-solos", "--corpus", str(small_corpus), "--annotations",
                 str(small_corpus / "solos.json"), "--out", str(out)]) == 0
    summary = json.loads((out / "solo_summary.json").read_text())
    assert summary["extracted"] == 5 and summary["failed"] == []
    assert main(["validate", str(out)]) == 0


def test_generate_compare_classify(small_corpus, tmp_path):
    gen = tmp_path / "gen"
    assert main(["train-generate", "--corpus", str(small_corpus), "--out", str(gen), "--n", "3",
                 "--mode", "solo", "--prompt", "full", "--seed", "1"]) == 0
    assert len(list(gen.glob("*/S-FP/*.tokens.txt"))) == 12
    assert (gen / "models" / "stylelm-solo.json").is_file()
    assert main(["validate", str(gen)]) == 0

    cmp_out = tmp_path / "cmp"
    # only one of the four configurations exists yet
    assert main(["compare", "--corpus", str(small_corpus), "--generated", str(gen), "--out", str(cmp_out)]) == 1
    assert main(["train-generate", "--corpus", str(small_corpus), "--out", str(gen), "--n", "2", "--seed", "1"]) == 0
    assert main(["compare", "--corpus", str(small_corpus), "--generated", str(gen), "--out", str(cmp_out)]) == 0
    rows = (cmp_out / "kld_technique.csv").read_text().splitlines()
    assert len(rows) == 1 + 16
    header = (cmp_out / "kld_note_duration.csv").read_text().splitlines()[0]
    assert header.split(",")[:2] == ["artist", "configuration"]

    cls = tmp_path / "cls"
    assert main(["classify", "--corpus", str(small_corpus), "--generated", str(gen), "--out", str(cls)]) == 0
    acc = json.loads((cls / "accuracy.json").read_text())
    assert acc["split"]["train"] + acc["split"]["validation"] + acc["split"]["test"] == 24
    assert (cls / "score_table.csv").is_file()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "shredkit", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("shredkit ")
