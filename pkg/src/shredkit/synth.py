"""Synthetic multi-instrument DadaGP songs with per-artist style signatures.

Used for fixtures, the acceptance run and demos. Each style differs in
rhythm cells (note durations), technique habits, scale and fret region,
so both the feature analysis and the classifier have something to find.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Section, SoloAnnotation, dump_annotations
from .tokens import (
    BeatEffect,
    Drums,
    Header,
    NewMeasure,
    Note,
    NoteEffect,
    TokenStream,
    Wait,
    tuning_for,
    write_stream,
)

QUARTER = 960
MEASURE = 4 * QUARTER
GUITAR = "distorted0"
BASS = "bass"


@dataclass(frozen=True)
class Style:
    name: str
    tempo: tuple  # (low, high) bpm
    downtune: int
    cells: dict  # rhythm cell (durations summing to a quarter) -> weight
    techniques: dict  # effect token text -> per-note probability
    scale: tuple  # pitch classes
    frets: tuple  # (low, high) fret window
    strings: tuple


STYLES = (
    Style(
        "style_a", (70, 100), 0,
        {(960,): 3, (480, 480): 4, (720, 240): 1},
        {"nfx:bend:type1": 0.30, "nfx:vibrato": 0.12, "bfx:palm_mute": 0.03},
        (4, 7, 9, 11, 2), (12, 17), (1, 2, 3),
    ),
    Style(
        "style_b", (95, 125), -1,
        {(240, 240, 240, 240): 4, (480, 240, 240): 2, (480, 480): 2},
        {"nfx:bend:type2": 0.18, "nfx:vibrato": 0.10, "nfx:slide:1": 0.10},
        (3, 6, 8, 10, 1), (3, 9), (2, 3, 4),
    ),
    Style(
        "style_c", (110, 150), 0,
        {(120,) * 8: 3, (240, 240, 240, 240): 2, (240, 240, 480): 1},
        {"nfx:tapping": 0.20, "nfx:hammer": 0.10, "nfx:palm_mute": 0.06},
        (0, 2, 4, 6, 7, 9, 11), (14, 22), (1, 2),
    ),
    Style(
        "style_d", (130, 170), -1,
        {(160,) * 6: 5, (240, 240, 240, 240): 1},
        {"nfx:hammer": 0.35, "nfx:slide:2": 0.06},
        (9, 11, 0, 2, 4, 5, 8), (5, 13), (3, 4, 5),
    ),
)


def _fret_choices(style: Style, downtune: int) -> list:
    tuning = tuning_for(GUITAR, downtune)
    out = []
    for s in style.strings:
        for f in range(style.frets[0], style.frets[1] + 1):
            pitch = tuning.open_string_midi[s] + downtune + f
            if pitch % 12 in style.scale:
                out.append((s, f))
    return out


def make_song(style: Style, rng: np.random.Generator, n_measures: int = 8) -> TokenStream:
    tempo = int(rng.integers(style.tempo[0], style.tempo[1] + 1))
    header = Header(style.name, style.downtune, tempo, ("artist", "downtune", "tempo"))
    positions = _fret_choices(style, style.downtune)
    cells = list(style.cells)
    weights = np.array([style.cells[c] for c in cells], dtype=float)
    weights /= weights.sum()
    bass_root = int(rng.integers(0, 5))
    body = []
    for _ in range(n_measures):
        body.append(NewMeasure())
        guitar_onsets = []
        t = 0
        for _q in range(4):
            cell = cells[int(rng.choice(len(cells), p=weights))]
            for d in cell:
                guitar_onsets.append(t)
                t += d
        bass_onsets = set(range(0, MEASURE, 2 * QUARTER))
        drum_onsets = set(range(0, MEASURE, QUARTER))
        onsets = sorted(set(guitar_onsets) | bass_onsets | drum_onsets)
        guitar = set(guitar_onsets)
        idx = int(rng.integers(len(positions)))
        for i, onset in enumerate(onsets):
            if onset in guitar:
                idx = int(np.clip(idx + rng.integers(-2, 3), 0, len(positions) - 1))
                s, f = positions[idx]
                body.append(Note(GUITAR, s, f))
                bfx = []
                for fx, p in style.techniques.items():
                    if rng.random() < p:
                        kind, _, rest = fx.partition(":")
                        name, *params = rest.split(":")
                        if kind == "nfx":
                            body.append(NoteEffect(name, tuple(params)))
                        else:
                            bfx.append(BeatEffect(name, tuple(params)))
                if onset in bass_onsets:
                    body.append(Note(BASS, 4 - bass_root % 2, bass_root))
                body.extend(bfx)
            elif onset in bass_onsets:
                body.append(Note(BASS, 4 - bass_root % 2, bass_root))
            if onset in drum_onsets:
                body.append(Drums("36" if onset % (2 * QUARTER) == 0 else "38"))
            nxt = onsets[i + 1] if i + 1 < len(onsets) else MEASURE
            body.append(Wait(nxt - onset))
    return TokenStream(header, tuple(body), True, True)


def make_corpus(songs_per_artist: int = 20, seed: int = 0, styles=STYLES, measures=(6, 10)) -> list:
    """``[(relative_path, artist, stream), ...]`` in path order."""
    rng = np.random.default_rng(seed)
    out = []
    for style in styles:
        for i in range(songs_per_artist):
            n = int(rng.integers(measures[0], measures[1] + 1))
            out.append((f"{style.name}/song{i:03d}.tokens.txt", style.name, make_song(style, rng, n)))
    return out


def make_annotations(corpus: list, n: int, seed: int = 0) -> list:
    """Random 1..4-measure solo sections on the guitar track of ``n`` songs."""
    from .corpus import count_measures

    rng = np.random.default_rng(seed)
    picks = rng.choice(len(corpus), size=min(n, len(corpus)), replace=False)
    out = []
    for k in sorted(int(p) for p in picks):
        path, _, stream = corpus[k]
        m = count_measures(stream)
        length = int(rng.integers(1, min(4, m) + 1))
        start = int(rng.integers(1, m - length + 2))
        out.append(SoloAnnotation(path, (Section(start, start + length - 1),), GUITAR))
    return out


def write_corpus(root, corpus: list, annotations=None) -> None:
    import json

    root = Path(root)
    for path, _, stream in corpus:
        dest = root / path
        dest.parent.mkdir(parents=True, exist_ok=True)
        write_stream(dest, stream)
    if annotations is not None:
        with open(root / "solos.json", "w", encoding="utf-8") as fh:
            json.dump(dump_annotations(annotations), fh, indent=2)
            fh.write("\n")
