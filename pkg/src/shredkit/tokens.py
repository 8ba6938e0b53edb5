"""DadaGP token grammar: parsing, serialization, validation and event decoding.

Token text is whitespace separated. Timing uses ``wait:<ticks>`` at 960 ticks
per quarter note; pitched notes are ``<instrument>:note:s<string>:f<fret>``.
Anything that matches no known spelling becomes :class:`Unknown` and is kept
byte-for-byte so streams always round-trip.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Union

from .errors import MissingStart, PitchOutOfRange, UnknownString

log = logging.getLogger(__name__)

TICKS_PER_QUARTER = 960

_INT = r"(?:0|[1-9][0-9]*)"
_POS = r"[1-9][0-9]*"
_ARTIST = re.compile(r"artist:([^:]+)")
_DOWNTUNE = re.compile(rf"downtune:(0|-{_POS})")
_TEMPO = re.compile(rf"tempo:({_POS})")
_WAIT = re.compile(rf"wait:({_INT})")
_DRUMS = re.compile(r"drums:note:(.+)")
_NOTE = re.compile(rf"([^:]+):note:s({_POS}):f({_INT})")

MAX_STRING = 10
MAX_FRET = 30


# --------------------------------------------------------------------- tokens


class Token:
    """Base for every token variant; ``text()`` gives the canonical spelling."""

    __slots__ = ()

    def text(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.text()


@dataclass(frozen=True)
class Artist(Token):
    name: str

    def text(self):
        return f"artist:{self.name}"


@dataclass(frozen=True)
class Downtune(Token):
    semitones: int

    def text(self):
        return f"downtune:{self.semitones}"


@dataclass(frozen=True)
class Tempo(Token):
    bpm: int

    def text(self):
        return f"tempo:{self.bpm}"


@dataclass(frozen=True)
class Start(Token):
    def text(self):
        return "start"


@dataclass(frozen=True)
class End(Token):
    def text(self):
        return "end"


@dataclass(frozen=True)
class NewMeasure(Token):
    def text(self):
        return "new_measure"


@dataclass(frozen=True)
class Note(Token):
    instrument: str
    string_num: int
    fret: int

    def text(self):
        return f"{self.instrument}:note:s{self.string_num}:f{self.fret}"


@dataclass(frozen=True)
class Drums(Token):
    note_type: str

    def text(self):
        return f"drums:note:{self.note_type}"


@dataclass(frozen=True)
class Wait(Token):
    ticks: int

    def text(self):
        return f"wait:{self.ticks}"


@dataclass(frozen=True)
class NoteEffect(Token):
    effect: str
    params: tuple = ()

    def text(self):
        return ":".join(("nfx", self.effect) + tuple(self.params))


@dataclass(frozen=True)
class BeatEffect(Token):
    effect: str
    params: tuple = ()

    def text(self):
        return ":".join(("bfx", self.effect) + tuple(self.params))


@dataclass(frozen=True)
class Unknown(Token):
    raw: str

    def text(self):
        return self.raw


AnyToken = Union[
    Artist, Downtune, Tempo, Start, End, NewMeasure, Note, Drums, Wait,
    NoteEffect, BeatEffect, Unknown,
]

HEADER_TYPES = (Artist, Downtune, Tempo)
EFFECT_TYPES = (NoteEffect, BeatEffect)
_SINGLETONS = {"start": Start(), "end": End(), "new_measure": NewMeasure()}


def parse_token(text: str) -> Token:
    """Parse a single whitespace-free word. Never raises."""
    single = _SINGLETONS.get(text)
    if single is not None:
        return single
    m = _WAIT.fullmatch(text)
    if m:
        return Wait(int(m.group(1)))
    m = _DRUMS.fullmatch(text)
    if m:
        return Drums(m.group(1))
    m = _NOTE.fullmatch(text)
    if m:
        s, f = int(m.group(2)), int(m.group(3))
        if s <= MAX_STRING and f <= MAX_FRET:
            return Note(m.group(1), s, f)
        return Unknown(text)
    if text.startswith(("nfx:", "bfx:")):
        parts = text.split(":")
        if parts[1]:
            cls = NoteEffect if parts[0] == "nfx" else BeatEffect
            return cls(parts[1], tuple(parts[2:]))
        return Unknown(text)
    m = _ARTIST.fullmatch(text)
    if m:
        return Artist(m.group(1))
    m = _DOWNTUNE.fullmatch(text)
    if m:
        return Downtune(int(m.group(1)))
    m = _TEMPO.fullmatch(text)
    if m:
        return Tempo(int(m.group(1)))
    return Unknown(text)


def is_beat_boundary(token: Token) -> bool:
    """Tokens that close a beat group for effect attachment purposes."""
    return isinstance(token, (Wait, NewMeasure, Start))


# --------------------------------------------------------------------- streams


@dataclass(frozen=True)
class Header:
    artist: Optional[str] = None
    downtune: int = 0
    tempo: int = 120
    # header keys in the order they appeared; absent keys are not serialized
    present: tuple = ()

    def tokens(self) -> list:
        values = {
            "artist": lambda: Artist(self.artist),
            "downtune": lambda: Downtune(self.downtune),
            "tempo": lambda: Tempo(self.tempo),
        }
        return [values[key]() for key in self.present]

    def with_value(self, key: str, value) -> "Header":
        present = self.present if key in self.present else self.present + (key,)
        return replace(self, present=present, **{key: value})


@dataclass(frozen=True)
class TokenStream:
    header: Header = field(default_factory=Header)
    body: tuple = ()
    has_start: bool = True
    has_end: bool = True
    # non-header tokens found before ``start``; kept so validate can flag them
    preamble: tuple = ()
    warnings: tuple = field(default=(), compare=False)

    @property
    def artist(self):
        return self.header.artist

    def tokens(self) -> list:
        """All tokens in serialization order."""
        out = self.header.tokens() + list(self.preamble)
        if self.has_start:
            out.append(Start())
        out.extend(self.body)
        if self.has_end:
            out.append(End())
        return out

    def body_offset(self) -> int:
        """Index of ``body[0]`` within :meth:`tokens`."""
        return len(self.header.present) + len(self.preamble) + int(self.has_start)

    def with_body(self, body) -> "TokenStream":
        return replace(self, body=tuple(body))


_HEADER_KEYS = {Artist: ("artist", "name"), Downtune: ("downtune", "semitones"), Tempo: ("tempo", "bpm")}


def _absorb_header(header: Header, tok: Token, warnings: list) -> Header:
    key, attr = _HEADER_KEYS[type(tok)]
    if key in header.present:
        warnings.append(f"duplicate header token {tok.text()!r}; last one wins")
    return header.with_value(key, getattr(tok, attr))


def parse_stream(text: str, strict: bool = False) -> TokenStream:
    """Parse whitespace-separated token text into a :class:`TokenStream`.

    Tokens after ``end`` are dropped with a warning. Without a ``start``
    token, ``strict`` raises :class:`MissingStart`; otherwise every header
    token feeds the header and everything else becomes the body.
    """
    toks = [parse_token(w) for w in text.split()]
    warnings = []
    header = Header()
    try:
        start_idx = toks.index(Start())
    except ValueError:
        start_idx = None

    if start_idx is None:
        if strict:
            raise MissingStart("no 'start' token in stream")
        if toks:
            warnings.append("missing start token")
        rest = toks
        preamble = []
        body_src = []
        for tok in rest:
            if isinstance(tok, HEADER_TYPES):
                header = _absorb_header(header, tok, warnings)
            else:
                body_src.append(tok)
        has_start = False
    else:
        preamble = []
        for tok in toks[:start_idx]:
            if isinstance(tok, HEADER_TYPES):
                header = _absorb_header(header, tok, warnings)
            else:
                preamble.append(tok)
        body_src = toks[start_idx + 1:]
        has_start = True

    try:
        end_idx = body_src.index(End())
    except ValueError:
        end_idx = None
    if end_idx is None:
        body, has_end = body_src, False
    else:
        body, has_end = body_src[:end_idx], True
        trailing = len(body_src) - end_idx - 1
        if trailing:
            warnings.append(f"{trailing} token(s) after end ignored")
    return TokenStream(
        header=header,
        body=tuple(body),
        has_start=has_start,
        has_end=has_end,
        preamble=tuple(preamble),
        warnings=tuple(warnings),
    )


def serialize(stream: TokenStream, sep: str = " ") -> str:
    return sep.join(tok.text() for tok in stream.tokens())


def canonical_whitespace(text: str) -> str:
    return " ".join(text.split())


def read_stream(path, strict: bool = False) -> TokenStream:
    with open(path, encoding="utf-8") as fh:
        return parse_stream(fh.read(), strict=strict)


def write_stream(path, stream: TokenStream) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize(stream, sep="\n"))
        fh.write("\n")


# ------------------------------------------------------------------ validation


@dataclass(frozen=True)
class Violation:
    index: int
    message: str
    severity: str = "error"  # or "warning"

    @property
    def is_error(self) -> bool:
        return self.severity == "error"


def validate(stream: TokenStream) -> list:
    """Return diagnostics for ``stream``; indices refer to ``stream.tokens()``."""
    out = []
    idx = len(stream.header.present)
    for tok in stream.preamble:
        if isinstance(tok, (Note, Drums)):
            out.append(Violation(idx, "note before start"))
        elif isinstance(tok, Unknown):
            out.append(Violation(idx, f"unknown token {tok.raw!r}", "warning"))
        idx += 1
    if not stream.has_start and stream.body:
        out.append(Violation(0, "missing start token", "warning"))

    idx = stream.body_offset()
    note_in_beat = False
    for tok in stream.body:
        if isinstance(tok, Wait):
            if tok.ticks == 0:
                out.append(Violation(idx, "zero wait"))
            note_in_beat = False
        elif isinstance(tok, (NewMeasure, Start)):
            note_in_beat = False
        elif isinstance(tok, (Note, Drums)):
            note_in_beat = True
        elif isinstance(tok, EFFECT_TYPES):
            if not note_in_beat:
                out.append(Violation(idx, "effect without note"))
        elif isinstance(tok, Unknown):
            out.append(Violation(idx, f"unknown token {tok.raw!r}", "warning"))
        idx += 1
    return out


def errors_only(violations) -> list:
    return [v for v in violations if v.is_error]


# ---------------------------------------------------------------------- tuning

GUITAR_OPEN = {1: 64, 2: 59, 3: 55, 4: 50, 5: 45, 6: 40, 7: 35}
BASS_OPEN = {1: 43, 2: 38, 3: 33, 4: 28}


@dataclass(frozen=True)
class Tuning:
    open_string_midi: Mapping[int, int]
    downtune_offset: int = 0

    @classmethod
    def guitar(cls, downtune: int = 0) -> "Tuning":
        return cls(dict(GUITAR_OPEN), downtune)

    @classmethod
    def bass(cls, downtune: int = 0) -> "Tuning":
        return cls(dict(BASS_OPEN), downtune)


def tuning_for(instrument: str, downtune: int = 0) -> Tuning:
    if instrument.startswith("bass"):
        return Tuning.bass(downtune)
    return Tuning.guitar(downtune)


def pitch_of(note: Note, tuning: Tuning) -> int:
    try:
        open_pitch = tuning.open_string_midi[note.string_num]
    except KeyError:
        raise UnknownString(
            f"string {note.string_num} not in tuning table {sorted(tuning.open_string_midi)}"
        ) from None
    pitch = open_pitch + tuning.downtune_offset + note.fret
    if not 0 <= pitch <= 127:
        raise PitchOutOfRange(f"{note.text()} resolves to MIDI {pitch}")
    return pitch


# -------------------------------------------------------------------- decoding


@dataclass(frozen=True)
class NoteEvent:
    instrument: str
    onset_tick: int
    midi_pitch: Optional[int]  # None for drums
    duration_ticks: int
    effects: tuple = ()


@dataclass(frozen=True)
class EventTimeline:
    events: tuple
    total_ticks: int

    @property
    def pitched(self) -> list:
        return [e for e in self.events if e.midi_pitch is not None]

    def __len__(self):
        return len(self.events)


def decode_events(stream: TokenStream, instrument_filter: Optional[str] = None) -> EventTimeline:
    """Replay the wait clock and resolve notes into timed events.

    Notes between two waits share an onset. A note's duration is the gap to
    its instrument's next note-bearing beat (or to the end of the stream);
    notes left with zero duration after the final wait are dropped. ``nfx``
    attaches to the latest note of the beat, ``bfx`` to every note of it.
    """
    downtune = stream.header.downtune
    tunings = {}
    clock = 0
    raw = []  # [instrument, onset, pitch, effects]
    beat, beat_fx = [], []
    last_note = None

    def close_beat():
        for ev in beat:
            ev[3].extend(beat_fx)
        beat.clear()
        beat_fx.clear()

    for tok in stream.body:
        if isinstance(tok, Note):
            last_note = None
            if instrument_filter is not None and tok.instrument != instrument_filter:
                continue
            tuning = tunings.get(tok.instrument)
            if tuning is None:
                tuning = tunings[tok.instrument] = tuning_for(tok.instrument, downtune)
            try:
                pitch = pitch_of(tok, tuning)
            except (UnknownString, PitchOutOfRange) as exc:
                log.debug("skipping note: %s", exc)
                continue
            ev = [tok.instrument, clock, pitch, []]
            raw.append(ev)
            beat.append(ev)
            last_note = ev
        elif isinstance(tok, Drums):
            last_note = None
            if instrument_filter is not None and instrument_filter != "drums":
                continue
            ev = ["drums", clock, None, []]
            raw.append(ev)
            beat.append(ev)
        elif isinstance(tok, NoteEffect):
            if last_note is not None:
                last_note[3].append(tok.effect)
        elif isinstance(tok, BeatEffect):
            beat_fx.append(tok.effect)
        elif isinstance(tok, Wait):
            close_beat()
            last_note = None
            clock += tok.ticks
        elif isinstance(tok, NewMeasure):
            close_beat()
            last_note = None
    close_beat()
    total = clock

    onsets = {}
    for instrument, onset, _, _ in raw:
        onsets.setdefault(instrument, set()).add(onset)
    next_onset = {}
    for instrument, ticks in onsets.items():
        ordered = sorted(ticks) + [total]
        next_onset[instrument] = {a: b for a, b in zip(ordered, ordered[1:])}

    events = []
    for instrument, onset, pitch, effects in raw:
        dur = next_onset[instrument][onset] - onset
        if dur <= 0:
            continue
        events.append(NoteEvent(instrument, onset, pitch, dur, tuple(effects)))
    events.sort(key=lambda e: (e.onset_tick, e.instrument, -1 if e.midi_pitch is None else e.midi_pitch))
    return EventTimeline(tuple(events), total)
