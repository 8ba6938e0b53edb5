"""Guitarist-style features computed from token streams."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional

import numpy as np

from . import kernels
from .errors import EmptyHistogram, EmptyTimeline, NoPitchedEvents
from .tokens import EFFECT_TYPES, EventTimeline, Note, TokenStream

PITCH_CLASSES = ("C", "C#", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B")
TECHNIQUES = ("bend", "vibrato", "hammer", "slide", "tapping", "palm_mute")

MAJOR_STEPS = (0, 2, 4, 5, 7, 9, 11)
MINOR_STEPS = (0, 2, 3, 5, 7, 8, 10)  # natural minor
MODES = ("major", "minor")


class Distribution:
    """Categorical counts over ordered, unique labels."""

    __slots__ = ("labels", "counts")

    def __init__(self, labels: Iterable[str], counts: Iterable[float]):
        self.labels = tuple(str(label) for label in labels)
        self.counts = np.asarray(list(counts), dtype=np.float64)
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("distribution labels must be unique")
        if self.counts.shape != (len(self.labels),):
            raise ValueError("one count per label required")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, float]) -> "Distribution":
        return cls(mapping.keys(), mapping.values())

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    @property
    def degenerate(self) -> bool:
        return self.total == 0

    def probabilities(self) -> np.ndarray:
        total = self.total
        if total == 0:
            return np.zeros_like(self.counts)
        return self.counts / total

    def as_dict(self) -> dict:
        return {label: float(c) for label, c in zip(self.labels, self.counts)}

    def get(self, label: str, default: float = 0.0) -> float:
        try:
            return float(self.counts[self.labels.index(label)])
        except ValueError:
            return default

    def __add__(self, other: "Distribution") -> "Distribution":
        merged = self.as_dict()
        for label, c in zip(other.labels, other.counts):
            merged[label] = merged.get(label, 0.0) + float(c)
        labels = list(merged)
        if _all_numeric(labels):
            labels.sort(key=int)
        return Distribution(labels, (merged[k] for k in labels))

    def __eq__(self, other):
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.counts, other.counts)

    def __repr__(self):
        return f"Distribution({self.as_dict()!r})"


def _all_numeric(labels) -> bool:
    return bool(labels) and all(label.lstrip("-").isdigit() for label in labels)


def merge(dists: Iterable[Distribution]) -> Distribution:
    """Bin-wise count addition over any number of distributions."""
    out = None
    for d in dists:
        out = d if out is None else out + d
    return out if out is not None else Distribution((), ())


# ----------------------------------------------------------------- durations


def note_duration_distribution(timeline: EventTimeline) -> Distribution:
    events = timeline.pitched
    if not events:
        raise EmptyTimeline("timeline has no pitched events")
    counts = {}
    for ev in events:
        counts[ev.duration_ticks] = counts.get(ev.duration_ticks, 0) + 1
    ticks = sorted(counts)
    return Distribution((str(t) for t in ticks), (counts[t] for t in ticks))


# ----------------------------------------------------------------- techniques


def technique_of(effect_name: str) -> Optional[str]:
    for tech in TECHNIQUES:
        if effect_name.startswith(tech):
            return tech
    return None


def technique_distribution(stream: TokenStream) -> Distribution:
    """Count canonical techniques over nfx/bfx tokens, one count per token."""
    counts = dict.fromkeys(TECHNIQUES, 0)
    for tok in stream.body:
        if isinstance(tok, EFFECT_TYPES):
            tech = technique_of(tok.effect)
            if tech is not None:
                counts[tech] += 1
    return Distribution.from_mapping(counts)


# -------------------------------------------------------------- pitch classes


def pitch_class_histogram(timeline: EventTimeline) -> Distribution:
    events = timeline.pitched
    if not events:
        raise NoPitchedEvents("timeline has no pitched events")
    counts = np.zeros(12)
    for ev in events:
        counts[ev.midi_pitch % 12] += 1
    return Distribution(PITCH_CLASSES, counts)


def _histogram_counts(hist: Distribution) -> np.ndarray:
    counts = np.array([hist.get(pc) for pc in PITCH_CLASSES])
    if counts.sum() <= 0:
        raise EmptyHistogram("pitch-class histogram is empty")
    return counts


def pitch_class_entropy(hist: Distribution) -> float:
    """Shannon entropy of the pitch-class distribution, in bits."""
    counts = _histogram_counts(hist)
    p = counts[counts > 0] / counts.sum()
    h = -float(np.sum(p * np.log2(p)))
    return max(h, 0.0)


def scale_pitch_classes(root: int, mode: str) -> frozenset:
    steps = MAJOR_STEPS if mode == "major" else MINOR_STEPS
    return frozenset((root + s) % 12 for s in steps)


# candidate order doubles as the tie-break: lowest root first, major before minor
SCALES = tuple((root, mode) for root in range(12) for mode in MODES)
SCALE_MASKS = np.array(
    [[1.0 if pc in scale_pitch_classes(r, m) else 0.0 for pc in range(12)] for r, m in SCALES]
)


@dataclass(frozen=True)
class ScaleResult:
    consistency: float
    best_scale: tuple  # (root pitch class, mode)

    @property
    def root_name(self) -> str:
        return PITCH_CLASSES[self.best_scale[0]]


def scale_consistency(hist: Distribution) -> ScaleResult:
    counts = _histogram_counts(hist)
    inside = kernels.inscale_counts(counts, SCALE_MASKS)
    best = int(np.argmax(inside))  # first maximum wins
    return ScaleResult(float(inside[best] / counts.sum()), SCALES[best])


# -------------------------------------------------------------- corpus summary


@dataclass(frozen=True)
class ArtistSummary:
    artist: str
    avg_tempo: Optional[int]  # None when the artist has no songs
    num_notes: int
    num_fx: int
    num_songs: int


def corpus_summary(
    corpus,
    instruments: Optional[Callable[[str], bool]] = None,
    artists: Optional[Iterable[str]] = None,
) -> dict:
    """Per-artist average tempo, note-token count and nfx+bfx token count.

    ``corpus`` is an iterable of ``(artist, stream)`` pairs. ``instruments``
    optionally restricts which Note tokens are counted. ``artists`` forces
    rows for groups that may be empty.
    """
    tempos, notes, fx = {}, {}, {}
    for name in artists or ():
        tempos.setdefault(name, [])
    for artist, stream in corpus:
        tempos.setdefault(artist, []).append(stream.header.tempo)
        n = f = 0
        for tok in stream.body:
            if isinstance(tok, Note):
                if instruments is None or instruments(tok.instrument):
                    n += 1
            elif isinstance(tok, EFFECT_TYPES):
                f += 1
        notes[artist] = notes.get(artist, 0) + n
        fx[artist] = fx.get(artist, 0) + f
    out = {}
    for artist in sorted(tempos):
        values = tempos[artist]
        avg = math.floor(sum(values) / len(values) + 0.5) if values else None
        out[artist] = ArtistSummary(artist, avg, notes.get(artist, 0), fx.get(artist, 0), len(values))
    return out
