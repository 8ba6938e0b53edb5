"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line; the lines are printed together at the
end of the pytest run (see conftest.py) and also echoed with ``-s``.
"""

import contextlib
import math
import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from oracles import brute_kruskal, brute_scale_consistency, smoothed_kld
from shredkit import synth
from shredkit.classify import evaluate, score_table, train_nb
from shredkit.cli import main
from shredkit.corpus import extract_solo, from_pairs, section_span, solo_view, split
from shredkit.musicology import PITCH_CLASSES, Distribution, pitch_class_entropy, scale_consistency
from shredkit.reports import kld_tables
from shredkit.stats import chi_square_sf, kld, kruskal_wallis
from shredkit.stylelm import CONFIGS, generate_corpus, parse_config_name, train_mode_models
from shredkit.tokens import Wait, canonical_whitespace, errors_only, parse_stream, parse_token, serialize, validate


@contextlib.contextmanager
def criterion(name):
    info = {}
    try:
        yield info
    except BaseException as exc:
        line = f"FAIL  {name}: {info.get('detail', '')} ({type(exc).__name__}: {exc})".replace("\n", " ")
        ACCEPTANCE_LINES.append(line)
        print(line)
        raise
    line = f"PASS  {name}: {info.get('detail', '')}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def _random_words(rng, n):
    frags = np.array(["wait", "note", "nfx", "bfx", "drums", "artist", "tempo", "downtune", "start",
                      "end", "new_measure", "distorted0", "bass", "s3", "s11", "f5", "f31", "0", "480",
                      "-1", "bend", "", "x", "07", "type1"])
    alphabet = np.array(list("abcdefghijklmnopqrstuvwxyz0123456789:_-!é"))
    words = []
    for i in range(n):
        if i % 2:
            k = rng.integers(1, 6)
            words.append(":".join(frags[rng.integers(0, len(frags), k)]))
        else:
            k = rng.integers(1, 16)
            words.append("".join(alphabet[rng.integers(0, len(alphabet), k)]))
    return words


def test_parser_round_trip():
    with criterion("parser round-trip") as info:
        corpus = synth.make_corpus(songs_per_artist=30, seed=11)
        texts = [serialize(s, sep="\n") + "\n" for _, _, s in corpus]
        words = _random_words(np.random.default_rng(0), 100_000)
        t0 = time.perf_counter()
        ok = sum(serialize(parse_stream(t)) == canonical_whitespace(t) for t in texts)
        for w in words:
            tok = parse_token(w)
            assert tok.text() == w
        elapsed = time.perf_counter() - t0
        info["detail"] = f"{ok}/{len(texts)} files identical, {len(words)} fuzz words total, {elapsed:.2f} s"
        assert len(texts) >= 100
        assert ok == len(texts)
        assert elapsed < 5.0


def test_metric_exactness():
    with criterion("metric exactness") as info:
        uniform = Distribution(PITCH_CLASSES, [1] * 12)
        single = Distribution(PITCH_CLASSES, [9] + [0] * 11)
        assert abs(pitch_class_entropy(uniform) - math.log2(12)) <= 1e-12
        assert pitch_class_entropy(single) == 0.0
        assert abs(scale_consistency(uniform).consistency - 7 / 12) <= 1e-12
        rng = np.random.default_rng(5)
        mismatches = 0
        for _ in range(1000):
            counts = rng.integers(0, 30, 12) * (rng.random(12) < 0.7)
            if counts.sum() == 0:
                counts[rng.integers(12)] = 1
            got = scale_consistency(Distribution(PITCH_CLASSES, counts))
            value, key = brute_scale_consistency(counts.tolist())
            mismatches += abs(got.consistency - value) > 1e-12 or got.best_scale != key
        info["detail"] = f"PCE/SC anchors exact, SC oracle mismatches {mismatches}/1000"
        assert mismatches == 0


def test_kld_suite():
    with criterion("KLD suite") as info:
        rng = np.random.default_rng(6)
        labels = [str(x) for x in range(8)]
        worst_identity = 0.0
        for _ in range(100):
            p = Distribution(labels, rng.integers(0, 20, 8) + 1)
            worst_identity = max(worst_identity, abs(kld(p, p, 1e-6)))
        negatives = 0
        worst_oracle = 0.0
        for i in range(10_000):
            pc = rng.integers(0, 6, 8) * (rng.random(8) < 0.6)
            qc = rng.integers(0, 6, 8) * (rng.random(8) < 0.6)
            pc[0] += pc.sum() == 0
            qc[1] += qc.sum() == 0
            value = kld(Distribution(labels, pc), Distribution(labels, qc), 1e-6)
            negatives += value < 0
            if i < 500:
                ref = smoothed_kld(dict(zip(labels, pc.tolist())), dict(zip(labels, qc.tolist())), 1e-6)
                worst_oracle = max(worst_oracle, abs(value - ref) / max(ref, 1e-12))
        example = kld(Distribution.from_mapping({"a": 3, "b": 1}), Distribution.from_mapping({"a": 1, "b": 1}), 1e-9)
        info["detail"] = (f"identity max {worst_identity:.1e}, negatives {negatives}/10000, "
                          f"oracle rel err {worst_oracle:.1e}, example {example:.6f} bits")
        assert worst_identity <= 1e-12
        assert negatives == 0
        assert worst_oracle < 1e-9
        assert abs(example - 0.18872) <= 1e-4


def test_kruskal_wallis():
    with criterion("Kruskal-Wallis") as info:
        fixture = kruskal_wallis([[1, 2, 3], [4, 5, 6], [7, 8, 9]]).H
        rng = np.random.default_rng(7)
        worst = 0.0
        done = 0
        while done < 500:
            k = int(rng.integers(2, 6))
            groups = [rng.integers(0, 5, int(rng.integers(1, 9))).tolist() for _ in range(k)]
            if len({v for g in groups for v in g}) < 2 or sum(map(len, groups)) < 3:
                continue
            h_ref, _ = brute_kruskal(groups)
            worst = max(worst, abs(kruskal_wallis(groups).H - h_ref))
            done += 1
        sf72 = chi_square_sf(7.2, 2)
        sf12 = chi_square_sf(12.848, 3)
        info["detail"] = (f"H={fixture:.12f}, tied oracle max err {worst:.1e} over 500, "
                          f"sf(7.2,2) err {abs(sf72 - math.exp(-3.6)):.1e}, sf(12.848,3)={sf12:.6f}")
        assert abs(fixture - 7.2) <= 1e-9
        assert worst <= 1e-9
        assert abs(sf72 - math.exp(-3.6)) <= 1e-10
        assert sf12 < 0.005


def test_solo_extraction():
    with criterion("solo extraction") as info:
        corpus = synth.make_corpus(songs_per_artist=10, seed=12)
        annotations = synth.make_annotations(corpus, 30, seed=12)
        streams = {p: s for p, _, s in corpus}
        sections = conserved = clean = 0
        for ann in annotations:
            song = streams[ann.song_path]
            for sec, solo in zip(ann.sections, extract_solo(song, ann)):
                lo, hi = section_span(song, sec.start_measure, sec.end_measure)
                sections += 1
                ticks = sum(t.ticks for t in song.body[lo:hi] if isinstance(t, Wait))
                conserved += sum(t.ticks for t in solo.body if isinstance(t, Wait)) == ticks
                clean += not errors_only(validate(solo))
        info["detail"] = (f"{len(annotations)} annotations, {sections} sections, "
                          f"ticks conserved {conserved}/{sections}, error-free {clean}/{sections}")
        assert len(annotations) == 30
        assert conserved == sections and clean == sections


def test_conditioning_end_to_end():
    with criterion("conditioning end-to-end") as info:
        t0 = time.perf_counter()
        index = from_pairs(synth.make_corpus(songs_per_artist=20, seed=21))
        artists = index.artists()
        models = train_mode_models(index)
        generated = {}
        for cfg in CONFIGS:
            mode, prompt = parse_config_name(cfg)
            for artist, streams in generate_corpus(models, index, mode, prompt, 20, seed=21).items():
                generated[(artist, cfg)] = streams
        tables = kld_tables(index, generated)
        diag = {}
        for name in ("note_duration", "technique"):
            diag[name] = sum(artists[int(np.argmin(row))] == a for (a, _), row in zip(tables["rows"], tables[name]))
        train, _, test = split(index, seed=21)
        model = train_nb(train, view=solo_view)
        accuracy = evaluate(model, test, view=solo_view).accuracy
        scores = score_table(model, generated, view=solo_view)
        hits = scores.diagonal_hits()
        elapsed = time.perf_counter() - t0
        info["detail"] = (f"KLD diagonal duration {diag['note_duration']}/16, technique {diag['technique']}/16, "
                          f"NB score diagonal {hits}/{len(scores.rows)}, held-out acc {accuracy:.3f}, {elapsed:.1f} s")
        assert len(tables["rows"]) == 16 and len(scores.rows) == 16
        assert diag["note_duration"] >= 14 and diag["technique"] >= 14
        assert hits >= 14
        assert accuracy >= 0.9
        assert elapsed < 60


def test_determinism(tmp_path, monkeypatch):
    with criterion("determinism") as info:
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
        corpus = tmp_path / "corpus"
        assert main(["synth", "--out", str(corpus), "--songs-per-artist", "8", "--seed", "4"]) == 0
        runs = []
        for k in range(2):
            out = tmp_path / f"run{k}"
            assert main(["report", "--corpus", str(corpus), "--out", str(out), "--n", "5", "--seed", "9"]) == 0
            files = sorted(p for p in out.rglob("*") if p.suffix in (".csv", ".json", ".txt"))
            runs.append({p.relative_to(out).as_posix(): p.read_bytes() for p in files})
        reports = [name for name in runs[0] if name.endswith((".csv", ".json"))]
        differing = [name for name in runs[0] if runs[0][name] != runs[1].get(name)]
        info["detail"] = (f"{len(reports)} CSV/JSON reports and {len(runs[0]) - len(reports)} token files, "
                          f"{len(differing)} differ")
        assert runs[0].keys() == runs[1].keys()
        assert len(reports) >= 10
        assert differing == []
