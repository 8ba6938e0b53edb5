"""Corpus ingestion, artist control tokens, solo extraction and splits."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

import numpy as np

from .errors import (
    EmptyCorpus,
    InvalidArtistName,
    MeasureOutOfRange,
    MissingStart,
    NoMeasureTokens,
    TooFewSongs,
)
from .tokens import (
    BeatEffect,
    Drums,
    NewMeasure,
    Note,
    NoteEffect,
    Tempo,
    TokenStream,
    Wait,
    parse_stream,
)

log = logging.getLogger(__name__)

TOKEN_SUFFIX = ".tokens.txt"


@dataclass(frozen=True)
class CorpusEntry:
    path: str  # posix path relative to the corpus root
    artist_label: str
    stream: TokenStream
    warnings: tuple = ()


@dataclass(frozen=True)
class CorpusIndex:
    entries: tuple = ()
    root: Optional[str] = None

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def artists(self) -> list:
        return sorted({e.artist_label for e in self.entries})

    def by_artist(self) -> dict:
        out = {}
        for e in self.entries:
            out.setdefault(e.artist_label, []).append(e)
        return {k: out[k] for k in sorted(out)}

    def pairs(self) -> list:
        return [(e.artist_label, e.stream) for e in self.entries]

    def subset(self, entries: Iterable[CorpusEntry]) -> "CorpusIndex":
        return CorpusIndex(tuple(sorted(entries, key=lambda e: e.path)), self.root)

    def map_streams(self, fn) -> "CorpusIndex":
        return CorpusIndex(tuple(replace(e, stream=fn(e.stream)) for e in self.entries), self.root)


def _load_manifest(manifest) -> dict:
    if manifest is None:
        return {}
    if isinstance(manifest, Mapping):
        return dict(manifest)
    with open(manifest, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("manifest must be a JSON object mapping path -> artist label")
    return data


def ingest(root, manifest: Union[None, str, Path, Mapping] = None, strict: bool = False) -> CorpusIndex:
    """Load every ``*.tokens.txt`` under ``root``.

    The artist label is the first path component below ``root`` unless the
    manifest (path -> label, paths relative to root) says otherwise.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus root {root} is not a directory")
    labels = {str(Path(k).as_posix()): v for k, v in _load_manifest(manifest).items()}
    entries = []
    for path in sorted(root.rglob(f"*{TOKEN_SUFFIX}"), key=lambda p: p.relative_to(root).as_posix()):
        rel = path.relative_to(root).as_posix()
        label = labels.get(rel) or labels.get(str(path))
        if label is None:
            parts = path.relative_to(root).parts
            if len(parts) < 2:
                log.warning("skipping %s: no artist directory and no manifest label", rel)
                continue
            label = parts[0]
        try:
            text = path.read_text(encoding="utf-8")
            stream = parse_stream(text, strict=strict)
        except (OSError, UnicodeDecodeError, MissingStart) as exc:
            log.warning("skipping %s: %s", rel, exc)
            continue
        entries.append(CorpusEntry(rel, label, stream, stream.warnings))
    if not entries:
        raise EmptyCorpus(f"no token files found under {root}")
    return CorpusIndex(tuple(entries), str(root))


def from_pairs(pairs: Iterable[tuple]) -> CorpusIndex:
    """Build an in-memory corpus from ``(path, label, stream)`` triples."""
    entries = [CorpusEntry(p, label, s, s.warnings) for p, label, s in pairs]
    if not entries:
        raise EmptyCorpus("no entries")
    return CorpusIndex(tuple(sorted(entries, key=lambda e: e.path)))


# ------------------------------------------------------------------ injection


def check_artist_name(artist: str) -> str:
    if not artist or ":" in artist or any(ch.isspace() for ch in artist):
        raise InvalidArtistName(f"invalid artist name {artist!r}")
    return artist


def inject_artist_token(stream: TokenStream, artist: str) -> TokenStream:
    """Set the artist control token and move it to the front of the header."""
    check_artist_name(artist)
    header = stream.header
    present = ("artist",) + tuple(k for k in header.present if k != "artist")
    return replace(stream, header=replace(header, artist=artist, present=present))


# -------------------------------------------------------- instrument filtering


def primary_guitar(stream: TokenStream) -> Optional[str]:
    """Most frequent non-bass pitched instrument (ties: lexicographic)."""
    counts = {}
    for tok in stream.body:
        if isinstance(tok, Note) and not tok.instrument.startswith("bass"):
            counts[tok.instrument] = counts.get(tok.instrument, 0) + 1
    if not counts:
        return None
    return min(counts, key=lambda k: (-counts[k], k))


def filter_body(body, instrument: str) -> list:
    """Keep one instrument's notes plus structure; merge the leftover waits.

    Kept: target Note tokens, nfx attached to them, bfx of beats that still
    contain a target note, Wait/NewMeasure and mid-body Tempo tokens.
    Zero-tick waits are dropped; adjacent waits are summed.
    """
    out = []
    beat = []
    has_note = False

    def flush():
        nonlocal has_note
        deferred = []
        seen_note = False
        for tok in beat:
            if isinstance(tok, BeatEffect):
                if not has_note:
                    continue
                if not seen_note:
                    deferred.append(tok)
                    continue
            out.append(tok)
            if isinstance(tok, Note) and not seen_note:
                seen_note = True
                out.extend(deferred)
                deferred.clear()
        beat.clear()
        has_note = False

    attach = False
    for tok in body:
        if isinstance(tok, Wait):
            flush()
            attach = False
            if tok.ticks == 0:
                continue
            if out and isinstance(out[-1], Wait):
                out[-1] = Wait(out[-1].ticks + tok.ticks)
            else:
                out.append(tok)
        elif isinstance(tok, NewMeasure):
            flush()
            attach = False
            out.append(tok)
        elif isinstance(tok, Note):
            attach = tok.instrument == instrument
            if attach:
                beat.append(tok)
                has_note = True
        elif isinstance(tok, Drums):
            attach = False
        elif isinstance(tok, NoteEffect):
            if attach:
                beat.append(tok)
        elif isinstance(tok, (BeatEffect, Tempo)):
            beat.append(tok)
    flush()
    return out


def filter_instrument(stream: TokenStream, instrument: str) -> TokenStream:
    return stream.with_body(filter_body(stream.body, instrument))


def solo_view(stream: TokenStream, instrument: Optional[str] = None) -> TokenStream:
    """Single-guitar version of a song (the primary guitar unless given)."""
    instrument = instrument or primary_guitar(stream)
    if instrument is None:
        return stream.with_body(())
    return filter_instrument(stream, instrument)


# -------------------------------------------------------------- solo sections


def measure_spans(body) -> list:
    """Half-open body index ranges of each measure.

    Measure 1 starts at the first body token; each NewMeasure opens the next
    one, except a NewMeasure at body index 0, which opens measure 1 itself.
    """
    starts = [0] + [i for i, tok in enumerate(body) if isinstance(tok, NewMeasure) and i != 0]
    ends = starts[1:] + [len(body)]
    return list(zip(starts, ends))


def count_measures(stream: TokenStream) -> int:
    return len(measure_spans(stream.body))


@dataclass(frozen=True)
class Section:
    start_measure: int
    end_measure: int


@dataclass(frozen=True)
class SoloAnnotation:
    song_path: str
    sections: tuple = ()
    target_instrument: str = "distorted0"


def load_annotations(path) -> list:
    """Read the solo-annotation sidecar (a JSON list, or an object keyed by path)."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = [dict(v, song_path=k) for k, v in data.items()]
    out = []
    for rec in data:
        sections = tuple(Section(int(s["start_measure"]), int(s["end_measure"])) for s in rec["sections"])
        out.append(SoloAnnotation(rec["song_path"], sections, rec.get("target_instrument", "distorted0")))
    return out


def dump_annotations(annotations: Iterable[SoloAnnotation]) -> list:
    return [
        {
            "song_path": a.song_path,
            "target_instrument": a.target_instrument,
            "sections": [{"start_measure": s.start_measure, "end_measure": s.end_measure} for s in a.sections],
        }
        for a in annotations
    ]


def section_span(stream: TokenStream, start_measure: int, end_measure: int) -> tuple:
    """Body index range covering measures ``start_measure..end_measure`` (1-based, inclusive)."""
    if not any(isinstance(tok, NewMeasure) for tok in stream.body):
        raise NoMeasureTokens("stream has no new_measure tokens")
    spans = measure_spans(stream.body)
    if not 1 <= start_measure <= end_measure <= len(spans):
        raise MeasureOutOfRange(
            f"section {start_measure}..{end_measure} outside 1..{len(spans)}"
        )
    return spans[start_measure - 1][0], spans[end_measure - 1][1]


def extract_section(stream: TokenStream, start_measure: int, end_measure: int, instrument: str) -> TokenStream:
    lo, hi = section_span(stream, start_measure, end_measure)
    body = filter_body(stream.body[lo:hi], instrument)
    return TokenStream(header=stream.header, body=tuple(body), has_start=True, has_end=True)


def extract_solo(stream: TokenStream, annotation: SoloAnnotation) -> list:
    """One extracted single-instrument stream per annotated section."""
    return [
        extract_section(stream, s.start_measure, s.end_measure, annotation.target_instrument)
        for s in annotation.sections
    ]


# ---------------------------------------------------------------------- splits


def largest_remainder(n: int, ratios) -> list:
    raw = [n * r for r in ratios]
    base = [math.floor(x + 1e-9) for x in raw]
    leftover = n - sum(base)
    order = sorted(range(len(ratios)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:max(leftover, 0)]:
        base[i] += 1
    return base


def split(corpus: CorpusIndex, ratios=(0.55, 0.20, 0.25), seed: int = 0) -> tuple:
    """Stratified, seeded train/validation/test split."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    groups = corpus.by_artist()
    if all(r > 0 for r in ratios):
        small = [a for a, es in groups.items() if len(es) < 3]
        if small:
            raise TooFewSongs(f"artists with fewer than 3 songs: {small}")
    rng = np.random.default_rng(seed)
    parts = ([], [], [])
    for artist, entries in groups.items():
        entries = sorted(entries, key=lambda e: e.path)
        perm = rng.permutation(len(entries))
        counts = largest_remainder(len(entries), ratios)
        pos = 0
        for bucket, c in zip(parts, counts):
            bucket.extend(entries[i] for i in perm[pos:pos + c])
            pos += c
    return tuple(corpus.subset(p) for p in parts)
