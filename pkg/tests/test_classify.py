import math

import numpy as np
import pytest

from oracles import nb_direct
from shredkit.classify import (
    NBModel,
    evaluate,
    feature_tokens,
    log_posterior,
    score_table,
    scores,
    train_feature_scorer,
    train_nb,
)
from shredkit.corpus import from_pairs, split
from shredkit.errors import EmptyAfterFiltering, EmptyConfiguration, SingleClass
from shredkit.tokens import parse_stream

TRAIN = [
    ("a/1", "a", "artist:a tempo:100 start distorted0:note:s1:f5 nfx:bend wait:480 distorted0:note:s1:f7 wait:480 end"),
    ("a/2", "a", "artist:a start distorted0:note:s1:f5 wait:480 distorted0:note:s1:f5 nfx:bend wait:960 end"),
    ("b/1", "b", "artist:b start distorted0:note:s3:f2 bfx:palm_mute wait:240 distorted0:note:s3:f2 wait:240 end"),
    ("b/2", "b", "artist:b start distorted0:note:s3:f4 wait:240 new_measure distorted0:note:s3:f2 wait:240 end"),
    ("b/3", "b", "artist:b start distorted0:note:s3:f2 bfx:palm_mute wait:240 end"),
]


@pytest.fixture(scope="module")
def toy():
    index = from_pairs([(p, a, parse_stream(t)) for p, a, t in TRAIN])
    return index, train_nb(index, alpha=1.0)


def test_feature_tokens_skip_control():
    s = parse_stream("artist:x tempo:90 start new_measure distorted0:note:s1:f0 nfx:vibrato wait:480 end")
    assert feature_tokens(s) == ["distorted0:note:s1:f0", "nfx:vibrato", "wait:480"]


def test_posterior_matches_direct_product(toy):
    index, model = toy
    docs = {}
    for e in index:
        docs.setdefault(e.artist_label, []).append(feature_tokens(e.stream))
    for text in ("start distorted0:note:s1:f5 wait:480 end",
                 "start distorted0:note:s3:f2 bfx:palm_mute wait:240 end",
                 "start distorted0:note:s1:f5 nfx:bend wait:240 drums:note:36 wait:120 end"):
        s = parse_stream(text)
        expected = nb_direct(docs, feature_tokens(s), 1.0)
        got = scores(model, s)
        for artist in ("a", "b"):
            assert got[artist] == pytest.approx(expected[artist], rel=1e-10)
        assert sum(got.values()) == pytest.approx(1.0, abs=1e-12)
        assert all(0 < v < 1 for v in got.values())


def test_laplace_smoothing_unseen_in_class(toy):
    index, model = toy
    j = model.index["nfx:bend"]
    b = model.artists.index("b")
    n_b = sum(len(feature_tokens(e.stream)) for e in index if e.artist_label == "b")
    assert (n_b, len(model.vocab)) == (12, 9)
    assert math.exp(model.log_lik[b, j]) == pytest.approx(1 / (n_b + len(model.vocab)), rel=1e-12)


def test_empty_after_filtering(toy):
    _, model = toy
    with pytest.raises(EmptyAfterFiltering):
        log_posterior(model, parse_stream("artist:a tempo:90 start new_measure end"))


def test_only_oov_gives_prior(toy):
    _, model = toy
    lp = log_posterior(model, parse_stream("start wait:7 end"))
    assert np.allclose(lp, model.log_prior)


def test_single_class_rejected():
    index = from_pairs([(p, "a", parse_stream(t)) for p, _, t in TRAIN])
    with pytest.raises(SingleClass):
        train_nb(index)
    with pytest.raises(ValueError):
        train_nb(index, alpha=0)


def test_json_round_trip(toy):
    index, model = toy
    back = NBModel.from_json(model.to_json())
    for e in index:
        assert np.allclose(log_posterior(back, e.stream), log_posterior(model, e.stream))


def test_evaluate_synthetic(synth_index):
    train, _, test = split(synth_index, seed=2)
    model = train_nb(train)
    ev = evaluate(model, test)
    assert ev.accuracy >= 0.9
    assert ev.confusion.sum() == len(test)
    assert np.trace(ev.confusion) == round(ev.accuracy * len(test))


def test_score_table_rows_and_argmax(synth_index):
    train, _, test = split(synth_index, seed=2)
    model = train_nb(train)
    generated = {}
    for e in test:
        generated.setdefault((e.artist_label, "S-FP"), []).append(e.stream)
    table = score_table(model, generated)
    assert [r[0] for r in table.rows] == sorted({a for a, _ in generated})
    assert np.allclose(table.values.sum(axis=1), 1.0)
    assert table.diagonal_hits() == len(table.rows)


def test_score_table_empty_configuration(toy):
    _, model = toy
    with pytest.raises(EmptyConfiguration):
        score_table(model, {("a", "S-FP"): [parse_stream("start new_measure end")]})


def test_feature_scorer_agrees_on_synthetic(synth_index):
    train, _, test = split(synth_index, seed=2)
    scorer = train_feature_scorer(train)
    hits = 0
    for e in test:
        s = scorer.scores(e.stream)
        assert sum(s.values()) == pytest.approx(1.0)
        hits += max(s, key=s.get) == e.artist_label
    assert hits / len(test) >= 0.75
