"""Multinomial naive Bayes guitarist classifier and score tables."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np

from . import kernels
from .corpus import CorpusIndex
from .errors import EmptyAfterFiltering, EmptyConfiguration, SingleClass
from .musicology import (
    note_duration_distribution,
    pitch_class_entropy,
    pitch_class_histogram,
    scale_consistency,
    technique_distribution,
)
from .stylelm import CONFIGS
from .tokens import BeatEffect, Note, NoteEffect, TokenStream, Wait, decode_events

FEATURE_TYPES = (Wait, Note, NoteEffect, BeatEffect)


def feature_tokens(stream: TokenStream) -> list:
    """Style-bearing tokens: waits, notes, nfx and bfx. Control tokens never count."""
    return [tok.text() for tok in stream.body if isinstance(tok, FEATURE_TYPES)]


@dataclass
class NBModel:
    artists: tuple
    vocab: tuple
    log_prior: np.ndarray
    log_lik: np.ndarray  # artists x vocab
    alpha: float

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.vocab)}

    def to_json(self) -> dict:
        return {
            "format": "shredkit.nb",
            "version": 1,
            "alpha": self.alpha,
            "artists": list(self.artists),
            "vocab": list(self.vocab),
            "log_prior": self.log_prior.tolist(),
            "log_lik": self.log_lik.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "NBModel":
        return cls(
            tuple(data["artists"]),
            tuple(data["vocab"]),
            np.array(data["log_prior"]),
            np.array(data["log_lik"]),
            data["alpha"],
        )


def train_nb(train_split: CorpusIndex, alpha: float = 1.0, view: Optional[Callable] = None) -> NBModel:
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    docs = {}
    for e in train_split:
        stream = view(e.stream) if view else e.stream
        docs.setdefault(e.artist_label, []).append(feature_tokens(stream))
    artists = tuple(sorted(docs))
    if len(artists) < 2:
        raise SingleClass(f"need at least two artists, got {list(artists)}")
    vocab = tuple(sorted({t for ds in docs.values() for d in ds for t in d}))
    index = {t: i for i, t in enumerate(vocab)}
    counts = np.zeros((len(artists), len(vocab)))
    n_docs = np.zeros(len(artists))
    for a, artist in enumerate(artists):
        n_docs[a] = len(docs[artist])
        for d in docs[artist]:
            for t in d:
                counts[a, index[t]] += 1
    log_prior = np.log(n_docs / n_docs.sum())
    smoothed = counts + alpha
    log_lik = np.log(smoothed) - np.log(smoothed.sum(axis=1, keepdims=True))
    return NBModel(artists, vocab, log_prior, log_lik, alpha)


def log_posterior(model: NBModel, stream: TokenStream) -> np.ndarray:
    feats = feature_tokens(stream)
    if not feats:
        raise EmptyAfterFiltering("stream has no style tokens after filtering")
    # out-of-vocabulary tokens carry no evidence and are skipped
    ids = [model.index[t] for t in feats if t in model.index]
    return kernels.nb_log_joint(np.array(ids, dtype=np.int64), model.log_lik, model.log_prior)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max())
    return z / z.sum()


def scores(model: NBModel, stream: TokenStream) -> dict:
    probs = _softmax(log_posterior(model, stream))
    return dict(zip(model.artists, probs.tolist()))


def score_vector(model: NBModel, stream: TokenStream) -> np.ndarray:
    return _softmax(log_posterior(model, stream))


@dataclass
class Evaluation:
    labels: tuple
    accuracy: float
    confusion: np.ndarray  # rows: true artist, columns: predicted
    predictions: list  # (path, true, predicted)

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "labels": list(self.labels),
            "confusion": self.confusion.astype(int).tolist(),
            "n": int(self.confusion.sum()),
        }


def evaluate(model: NBModel, test_split: CorpusIndex, view: Optional[Callable] = None) -> Evaluation:
    labels = model.artists
    pos = {a: i for i, a in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=np.int64)
    preds = []
    correct = 0
    for e in test_split:
        stream = view(e.stream) if view else e.stream
        pred = labels[int(np.argmax(log_posterior(model, stream)))]
        preds.append((e.path, e.artist_label, pred))
        correct += pred == e.artist_label
        if e.artist_label in pos:
            confusion[pos[e.artist_label], pos[pred]] += 1
    total = len(preds)
    return Evaluation(labels, correct / total if total else 0.0, confusion, preds)


@dataclass
class ScoreMatrix:
    rows: list  # (conditioned artist, configuration)
    columns: tuple  # artist score columns
    values: np.ndarray

    def row_argmax(self) -> list:
        return [self.columns[int(np.argmax(v))] for v in self.values]

    def diagonal_hits(self) -> int:
        return sum(best == artist for (artist, _), best in zip(self.rows, self.row_argmax()))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["artist", "configuration", *self.columns, "predicted"])
            for (artist, cfg), v, best in zip(self.rows, self.values, self.row_argmax()):
                w.writerow([artist, cfg, *(fmt(x) for x in v), best])


def fmt(x: float) -> str:
    return format(float(x), ".10g")


def score_table(model: NBModel, generated: Mapping, view: Optional[Callable] = None) -> ScoreMatrix:
    """Mean score vector per (conditioned artist, configuration)."""
    artists = sorted({a for a, _ in generated})
    rows, values = [], []
    for artist in artists:
        cfgs = [c for c in CONFIGS if (artist, c) in generated]
        cfgs += sorted(c for a, c in generated if a == artist and c not in CONFIGS)
        for cfg in cfgs:
            streams = generated[(artist, cfg)]
            vecs = []
            for s in streams:
                s = view(s) if view else s
                try:
                    vecs.append(score_vector(model, s))
                except EmptyAfterFiltering:
                    continue
            if not vecs:
                raise EmptyConfiguration(f"no scorable streams for {artist}/{cfg}")
            rows.append((artist, cfg))
            values.append(np.mean(vecs, axis=0))
    return ScoreMatrix(rows, model.artists, np.array(values))


# ------------------------------------------------ feature-vector cross-check


def feature_vector(stream: TokenStream, duration_labels) -> np.ndarray:
    """Duration bins, technique bins, PCE and SC for one stream."""
    timeline = decode_events(stream)
    dur = np.zeros(len(duration_labels))
    pce = sc = 0.0
    if timeline.pitched:
        d = note_duration_distribution(timeline)
        for label, p in zip(d.labels, d.probabilities()):
            if label in duration_labels:
                dur[duration_labels.index(label)] = p
        hist = pitch_class_histogram(timeline)
        pce = pitch_class_entropy(hist)
        sc = scale_consistency(hist).consistency
    tech = technique_distribution(stream)
    n_notes = max(len(timeline.pitched), 1)
    return np.concatenate([dur, tech.counts / n_notes, [pce, sc]])


@dataclass
class FeatureScorer:
    """Gaussian naive Bayes over musicology feature vectors."""

    artists: tuple
    duration_labels: tuple
    means: np.ndarray
    variances: np.ndarray
    log_prior: np.ndarray

    def scores(self, stream: TokenStream) -> dict:
        x = feature_vector(stream, list(self.duration_labels))
        ll = -0.5 * np.sum(np.log(2 * math.pi * self.variances) + (x - self.means) ** 2 / self.variances, axis=1)
        return dict(zip(self.artists, _softmax(ll + self.log_prior).tolist()))


def train_feature_scorer(train_split: CorpusIndex, view: Optional[Callable] = None, var_floor: float = 1e-4) -> FeatureScorer:
    streams = [(e.artist_label, view(e.stream) if view else e.stream) for e in train_split]
    artists = tuple(sorted({a for a, _ in streams}))
    if len(artists) < 2:
        raise SingleClass("need at least two artists")
    labels = set()
    for _, s in streams:
        tl = decode_events(s)
        if tl.pitched:
            labels.update(note_duration_distribution(tl).labels)
    duration_labels = tuple(sorted(labels, key=int))
    X = {a: [] for a in artists}
    for a, s in streams:
        X[a].append(feature_vector(s, list(duration_labels)))
    means = np.array([np.mean(X[a], axis=0) for a in artists])
    variances = np.array([np.var(X[a], axis=0) for a in artists]) + var_floor
    n = np.array([len(X[a]) for a in artists], dtype=float)
    return FeatureScorer(artists, duration_labels, means, variances, np.log(n / n.sum()))


def save_model(model: NBModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_json(), fh)
