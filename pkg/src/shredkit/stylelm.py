"""Artist-conditioned n-gram token model with grammar-masked sampling.

Each component (global, and one per artist) scores a token by add-k
estimates at the longest context suffix where the token was observed,
multiplying by ``backoff`` for every level it has to drop, then
renormalizes. The conditioned distribution interpolates the artist
component with the global one by ``lam``.
"""

from __future__ import annotations

import json
import zlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .corpus import CorpusIndex, inject_artist_token, measure_spans, solo_view
from .errors import EmptyCorpus, TooShort, UnknownArtist
from .tokens import (
    EFFECT_TYPES,
    HEADER_TYPES,
    Drums,
    NewMeasure,
    Note,
    NoteEffect,
    Start,
    TokenStream,
    Wait,
    parse_token,
    serialize,
)

START, END, UNK = "start", "end", "<unk>"
GLOBAL = "global"
FORMAT_VERSION = 1

DEFAULT_ORDER = 4
DEFAULT_LAMBDA = 0.7
DEFAULT_ADD_K = 0.01
DEFAULT_BACKOFF = 0.4

SOLO_BUDGET = 256
MULTI_BUDGET = 2048
CONFIGS = ("M-FP", "M-EP", "S-FP", "S-EP")


class Vocab:
    """Token string <-> id bijection; reserved ids first, the rest sorted."""

    RESERVED = (START, END, UNK)

    def __init__(self, tokens):
        rest = sorted(set(tokens) - set(self.RESERVED))
        self.tokens = list(self.RESERVED) + rest
        self.index = {t: i for i, t in enumerate(self.tokens)}
        self.start_id, self.end_id, self.unk_id = 0, 1, 2
        kinds = [parse_token(t) for t in self.tokens]
        self.is_effect = np.array([isinstance(k, EFFECT_TYPES) for k in kinds])
        self.is_note = np.array([isinstance(k, (Note, Drums)) for k in kinds])
        self.is_wait = np.array([isinstance(k, Wait) and k.ticks > 0 for k in kinds])
        self.resets_beat = np.array([isinstance(k, (Wait, NewMeasure)) for k in kinds])
        banned = [
            isinstance(k, HEADER_TYPES + (Start,)) or (isinstance(k, Wait) and k.ticks == 0)
            for k in kinds
        ]
        banned[self.unk_id] = True
        self.banned = np.array(banned)

    def __len__(self):
        return len(self.tokens)

    def encode(self, words) -> list:
        return [self.index.get(w, self.unk_id) for w in words]


class CountTable:
    """Context -> next-token counts, packed as CSR rows for the kernels."""

    def __init__(self, counts: dict, vsize: int):
        self.raw = counts
        self.unigram = np.zeros(vsize)
        for tid, c in counts.get((), {}).items():
            self.unigram[tid] = c
        contexts = sorted(k for k in counts if k)
        self.rows = {ctx: i for i, ctx in enumerate(contexts)}
        indptr = [0]
        ids, vals, totals = [], [], []
        for ctx in contexts:
            nxt = counts[ctx]
            keys = sorted(nxt)
            ids.extend(keys)
            vals.extend(nxt[k] for k in keys)
            totals.append(sum(nxt.values()))
            indptr.append(len(ids))
        self.indptr = np.array(indptr, dtype=np.int64)
        self.ids = np.array(ids, dtype=np.int64)
        self.counts = np.array(vals, dtype=np.float64)
        self.totals = np.array(totals, dtype=np.float64)

    def row_path(self, context: tuple) -> np.ndarray:
        return np.array(
            [self.rows.get(context[len(context) - n:], -1) for n in range(1, len(context) + 1)],
            dtype=np.int64,
        )

    def scores(self, context: tuple, add_k: float, backoff: float) -> np.ndarray:
        return kernels.backoff_scores(
            self.unigram, add_k, self.row_path(context), self.indptr, self.ids,
            self.counts, self.totals, backoff,
        )


def count_ngrams(sequences, order: int) -> dict:
    """Counts of next tokens for every context of length 0..order-1."""
    counts = {}
    for seq in sequences:
        for i, tok in enumerate(seq):
            for n in range(0, min(order - 1, i) + 1):
                ctx = tuple(seq[i - n:i])
                bucket = counts.setdefault(ctx, Counter())
                bucket[tok] += 1
    return counts


def training_sequence(stream: TokenStream, artist: str) -> list:
    s = inject_artist_token(stream, artist)
    if not s.has_start or not s.has_end:
        s = TokenStream(s.header, s.body, True, True, s.preamble)
    return serialize(s).split()


@dataclass
class StyleLM:
    order: int
    lam: float
    add_k: float
    vocab: Vocab
    global_table: CountTable
    artist_tables: dict
    backoff: float = DEFAULT_BACKOFF
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def artists(self) -> list:
        return sorted(self.artist_tables)

    def _context(self, context) -> tuple:
        ids = self.vocab.encode(context) if context and isinstance(context[0], str) else list(context)
        keep = self.order - 1
        return tuple(ids[len(ids) - keep:]) if keep > 0 else ()

    def distribution(self, context, artist: str) -> np.ndarray:
        """Conditioned next-token distribution over the vocabulary (read-only)."""
        ctx = self._context(list(context))
        key = (ctx, artist)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        glob = self.global_table.scores(ctx, self.add_k, self.backoff)
        if artist == GLOBAL:
            dist = glob
        else:
            table = self.artist_tables.get(artist)
            if table is None:
                raise UnknownArtist(f"artist {artist!r} not in model {self.artists}")
            dist = self.lam * table.scores(ctx, self.add_k, self.backoff) + (1.0 - self.lam) * glob
        if len(self._cache) > 200_000:
            self._cache.clear()
        dist.setflags(write=False)
        self._cache[key] = dist
        return dist

    # ------------------------------------------------------------ persistence

    def to_json(self) -> dict:
        def dump(table):
            return {
                " ".join(self.vocab.tokens[i] for i in ctx): {
                    self.vocab.tokens[t]: c for t, c in sorted(nxt.items())
                }
                for ctx, nxt in sorted(table.raw.items())
            }

        return {
            "format": "shredkit.stylelm",
            "version": FORMAT_VERSION,
            "order": self.order,
            "lambda": self.lam,
            "add_k": self.add_k,
            "backoff": self.backoff,
            "vocab": self.vocab.tokens,
            "global": dump(self.global_table),
            "artists": {a: dump(self.artist_tables[a]) for a in self.artists},
        }

    @classmethod
    def from_json(cls, data: dict) -> "StyleLM":
        if data.get("format") != "shredkit.stylelm" or data.get("version") != FORMAT_VERSION:
            raise ValueError("not a shredkit StyleLM v1 document")
        vocab = Vocab(data["vocab"])

        def load(table):
            counts = {}
            for ctx, nxt in table.items():
                key = tuple(vocab.index[w] for w in ctx.split())
                counts[key] = Counter({vocab.index[t]: c for t, c in nxt.items()})
            return CountTable(counts, len(vocab))

        return cls(
            order=data["order"],
            lam=data["lambda"],
            add_k=data["add_k"],
            vocab=vocab,
            global_table=load(data["global"]),
            artist_tables={a: load(t) for a, t in data["artists"].items()},
            backoff=data["backoff"],
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "StyleLM":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def train(
    corpus: CorpusIndex,
    order: int = DEFAULT_ORDER,
    lam: float = DEFAULT_LAMBDA,
    add_k: float = DEFAULT_ADD_K,
    backoff: float = DEFAULT_BACKOFF,
) -> StyleLM:
    if len(corpus) == 0:
        raise EmptyCorpus("cannot train on an empty corpus")
    if order < 1:
        raise ValueError("order must be >= 1")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    if add_k <= 0:
        raise ValueError("add_k must be positive")
    words = {e.artist_label: [] for e in corpus}
    for e in corpus:
        words[e.artist_label].append(training_sequence(e.stream, e.artist_label))
    vocab = Vocab(w for seqs in words.values() for seq in seqs for w in seq)
    per_artist = {}
    glob = {}
    for artist in sorted(words):
        counts = count_ngrams([vocab.encode(s) for s in words[artist]], order)
        per_artist[artist] = CountTable(counts, len(vocab))
        for ctx, nxt in counts.items():
            glob.setdefault(ctx, Counter()).update(nxt)
    return StyleLM(order, lam, add_k, vocab, CountTable(glob, len(vocab)), per_artist, backoff)


def prob(model: StyleLM, context, token: str, artist: str) -> float:
    tid = model.vocab.index.get(token, model.vocab.unk_id)
    return float(model.distribution(context, artist)[tid])


# -------------------------------------------------------------------- sampling


@dataclass
class GrammarState:
    """Tracks whether the current beat already holds a note."""

    note_in_beat: bool = False

    def advance(self, vocab: Vocab, tid: int) -> None:
        if vocab.resets_beat[tid]:
            self.note_in_beat = False
        elif vocab.is_note[tid]:
            self.note_in_beat = True

    @classmethod
    def from_body(cls, body) -> "GrammarState":
        state = cls()
        for tok in body:
            if isinstance(tok, (Wait, NewMeasure)):
                state.note_in_beat = False
            elif isinstance(tok, (Note, Drums)):
                state.note_in_beat = True
        return state


def allowed_mask(vocab: Vocab, state: GrammarState) -> np.ndarray:
    allowed = ~vocab.banned
    if not state.note_in_beat:
        allowed = allowed & ~vocab.is_effect
    return allowed


def sample_next(
    model: StyleLM,
    context,
    artist: str,
    temperature: float = 1.0,
    top_k: Optional[int] = None,
    grammar_state: Optional[GrammarState] = None,
    rng: Optional[np.random.Generator] = None,
) -> str:
    return model.vocab.tokens[
        _sample_id(model, context, artist, temperature, top_k, grammar_state or GrammarState(), rng)
    ]


def next_token_probs(model, context, artist, temperature, top_k, state) -> np.ndarray:
    """Final sampling distribution after mask, temperature and top-k."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    vocab = model.vocab
    base = model.distribution(context, artist)
    p = np.where(allowed_mask(vocab, state), base, 0.0)
    if not p.any():
        p = np.where(vocab.is_wait, base, 0.0)
        if not p.any():
            p = vocab.is_wait.astype(np.float64)
        if not p.any():
            p = np.zeros(len(vocab))
            p[vocab.end_id] = 1.0
    nz = p > 0
    logits = np.full(p.shape, -np.inf)
    logits[nz] = np.log(p[nz]) / temperature
    logits -= logits[nz].max()
    w = np.exp(logits)
    if top_k is not None and 0 < top_k < int(nz.sum()):
        keep = np.argsort(-w, kind="stable")[:top_k]
        trimmed = np.zeros_like(w)
        trimmed[keep] = w[keep]
        w = trimmed
    return w / w.sum()


def _sample_id(model, context, artist, temperature, top_k, state, rng) -> int:
    if rng is None:
        rng = np.random.default_rng(0)
    w = next_token_probs(model, context, artist, temperature, top_k, state)
    cdf = np.cumsum(w)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    idx = min(idx, len(w) - 1)
    while w[idx] == 0:  # guard against landing on a zero-width bin at the cdf edge
        idx -= 1
    return idx


# --------------------------------------------------------------------- prompts


def make_prompt(song: TokenStream, kind: str, artist: str) -> TokenStream:
    """Full prompt: first two measures. Empty prompt: the first note and its wait."""
    if kind == "full":
        spans = measure_spans(song.body)
        if len(spans) < 2:
            raise TooShort(f"song has {len(spans)} measure(s); full prompt needs 2")
        body = song.body[: spans[1][1]]
    elif kind == "empty":
        body = []
        toks = song.body
        if toks and isinstance(toks[0], NewMeasure):
            body.append(toks[0])
        first = next((i for i, t in enumerate(toks) if isinstance(t, Note)), None)
        if first is None:
            raise TooShort("song has no note for an empty prompt")
        body.append(toks[first])
        j = first + 1
        while j < len(toks) and isinstance(toks[j], NoteEffect):
            body.append(toks[j])
            j += 1
        wait = next((t for t in toks[j:] if isinstance(t, Wait) and t.ticks > 0), None)
        if wait is not None:
            body.append(wait)
    else:
        raise ValueError(f"prompt kind must be 'full' or 'empty', not {kind!r}")
    prompt = TokenStream(song.header, tuple(body), has_start=True, has_end=False)
    return inject_artist_token(prompt, artist)


@dataclass(frozen=True)
class GenerationConfig:
    mode: str = "solo"  # multi | solo
    prompt_kind: str = "full"  # full | empty
    max_tokens: Optional[int] = None
    temperature: float = 1.0
    top_k: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("multi", "solo"):
            raise ValueError(f"mode must be 'multi' or 'solo', not {self.mode!r}")
        if self.prompt_kind not in ("full", "empty"):
            raise ValueError(f"prompt kind must be 'full' or 'empty', not {self.prompt_kind!r}")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")

    @property
    def budget(self) -> int:
        if self.max_tokens is not None:
            return self.max_tokens
        return SOLO_BUDGET if self.mode == "solo" else MULTI_BUDGET

    @property
    def name(self) -> str:
        return config_name(self.mode, self.prompt_kind)


def config_name(mode: str, prompt_kind: str) -> str:
    return f"{'M' if mode == 'multi' else 'S'}-{'FP' if prompt_kind == 'full' else 'EP'}"


def parse_config_name(name: str) -> tuple:
    m, p = name.split("-")
    return ("multi" if m == "M" else "solo"), ("full" if p == "FP" else "empty")


def generate(model: StyleLM, prompt: TokenStream, artist: str, config: GenerationConfig) -> TokenStream:
    """Extend ``prompt`` until ``end`` is sampled or the token budget is spent."""
    prompt = inject_artist_token(prompt, artist)
    open_prompt = TokenStream(prompt.header, prompt.body, True, False, prompt.preamble)
    context = model.vocab.encode(serialize(open_prompt).split())
    state = GrammarState.from_body(prompt.body)
    rng = np.random.default_rng(config.seed)
    keep = max(model.order - 1, 0)
    out = []
    for _ in range(config.budget):
        tid = _sample_id(model, context[len(context) - keep:] if keep else [], artist,
                         config.temperature, config.top_k, state, rng)
        if tid == model.vocab.end_id:
            break
        out.append(parse_token(model.vocab.tokens[tid]))
        context.append(tid)
        state.advance(model.vocab, tid)
    return TokenStream(prompt.header, tuple(prompt.body) + tuple(out), True, True, prompt.preamble)


def example_seed(seed: int, artist: str, config: str, index: int) -> int:
    ss = np.random.SeedSequence([seed, zlib.crc32(artist.encode()), zlib.crc32(config.encode()), index])
    return int(ss.generate_state(1)[0])


def generate_corpus(
    models: dict,
    corpus: CorpusIndex,
    mode: str,
    prompt_kind: str,
    n_examples: int,
    seed: int = 0,
    temperature: float = 1.0,
    top_k: Optional[int] = None,
    max_tokens: Optional[int] = None,
    artists=None,
) -> dict:
    """Generate ``n_examples`` streams per artist for one configuration.

    ``models`` maps mode ('multi'/'solo') to a trained StyleLM. Prompts cycle
    through the artist's songs in path order (solo mode uses each song's
    primary-guitar view). Returns ``{artist: [stream, ...]}``.
    """
    name = config_name(mode, prompt_kind)
    model = models[mode]
    groups = corpus.by_artist()
    out = {}
    for artist in artists or sorted(groups):
        prompts = []
        for entry in groups.get(artist, []):
            song = entry.stream if mode == "multi" else solo_view(entry.stream)
            try:
                prompts.append(make_prompt(song, prompt_kind, artist))
            except TooShort:
                continue
        if not prompts:
            raise TooShort(f"no song of {artist!r} can seed a {name} prompt")
        gens = []
        for i in range(n_examples):
            cfg = GenerationConfig(mode, prompt_kind, max_tokens, temperature, top_k,
                                   example_seed(seed, artist, name, i))
            gens.append(generate(model, prompts[i % len(prompts)], artist, cfg))
        out[artist] = gens
    return out


def train_mode_models(corpus: CorpusIndex, modes=("multi", "solo"), **kw) -> dict:
    """Multi-instrument model on full songs, solo model on guitar-only views."""
    models = {}
    if "multi" in modes:
        models["multi"] = train(corpus, **kw)
    if "solo" in modes:
        models["solo"] = train(corpus.map_streams(solo_view), **kw)
    return models
