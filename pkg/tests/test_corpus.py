import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from shredkit.corpus import (
    Section,
    SoloAnnotation,
    count_measures,
    extract_solo,
    filter_instrument,
    from_pairs,
    ingest,
    inject_artist_token,
    largest_remainder,
    load_annotations,
    measure_spans,
    primary_guitar,
    section_span,
    solo_view,
    split,
)
from shredkit.errors import (
    EmptyCorpus,
    InvalidArtistName,
    MeasureOutOfRange,
    NoMeasureTokens,
    TooFewSongs,
)
from shredkit.tokens import (
    Artist,
    BeatEffect,
    Note,
    NoteEffect,
    Wait,
    errors_only,
    parse_stream,
    serialize,
    validate,
)


def wait_ticks(body):
    return sum(t.ticks for t in body if isinstance(t, Wait))


# ------------------------------------------------------------------- ingestion


def test_ingest_directory_labels(corpus_dir, synth_pairs):
    index = ingest(corpus_dir)
    assert len(index) == len(synth_pairs)
    assert index.artists() == sorted({a for _, a, _ in synth_pairs})
    assert [e.path for e in index] == sorted(p for p, _, _ in synth_pairs)


def test_ingest_manifest_overrides(corpus_dir, synth_pairs):
    path = synth_pairs[0][0]
    index = ingest(corpus_dir, manifest={path: "someone_else"})
    assert {e.artist_label for e in index if e.path == path} == {"someone_else"}


def test_ingest_skips_unreadable_and_empty(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "a" / "bad.tokens.txt").write_bytes(b"\xff\xfe\x00bad")
    with pytest.raises(EmptyCorpus):
        ingest(tmp_path)
    (tmp_path / "a" / "ok.tokens.txt").write_text("start wait:480 end\n")
    assert [e.path for e in ingest(tmp_path)] == ["a/ok.tokens.txt"]


def test_ingest_missing_root(tmp_path):
    with pytest.raises(FileNotFoundError):
        ingest(tmp_path / "nope")


# ------------------------------------------------------------------- injection


def test_inject_artist_token_front_of_header():
    s = parse_stream("downtune:-1 tempo:120 start wait:480 end")
    out = inject_artist_token(s, "jimi_hendrix")
    assert serialize(out).startswith("artist:jimi_hendrix downtune:-1 tempo:120 start")
    assert out.tokens()[0] == Artist("jimi_hendrix")


def test_inject_replaces_existing_and_is_idempotent():
    s = parse_stream("tempo:100 artist:old start wait:480 end")
    once = inject_artist_token(s, "new")
    assert serialize(once) == "artist:new tempo:100 start wait:480 end"
    assert inject_artist_token(once, "new") == once
    assert sum(isinstance(t, Artist) for t in once.tokens()) == 1


@pytest.mark.parametrize("name", ["", "a:b", "two words", "tab\there"])
def test_invalid_artist_names(name):
    with pytest.raises(InvalidArtistName):
        inject_artist_token(parse_stream("start end"), name)


def test_injected_stream_round_trips():
    s = inject_artist_token(parse_stream("tempo:90 start distorted0:note:s1:f0 wait:480 end"), "x")
    assert parse_stream(serialize(s)) == s


# ------------------------------------------------------------------- filtering


MIXED = ("start new_measure distorted0:note:s1:f3 nfx:bend:type1 bass:note:s4:f0 nfx:slide:1 "
         "bfx:palm_mute wait:480 bass:note:s4:f2 bfx:tremolo wait:480 distorted1:note:s2:f5 "
         "wait:240 drums:note:36 wait:240 new_measure distorted0:note:s2:f7 wait:960 end")


def test_filter_keeps_only_target_notes_and_their_effects():
    out = filter_instrument(parse_stream(MIXED), "distorted0")
    assert serialize(out) == ("start new_measure distorted0:note:s1:f3 nfx:bend:type1 bfx:palm_mute "
                              "wait:1440 new_measure distorted0:note:s2:f7 wait:960 end")
    assert errors_only(validate(out)) == []


def test_filter_conserves_ticks():
    s = parse_stream(MIXED)
    for inst in ("distorted0", "distorted1", "bass", "nothing"):
        assert wait_ticks(filter_instrument(s, inst).body) == wait_ticks(s.body)


def test_primary_guitar_ignores_bass():
    s = parse_stream("start bass:note:s1:f0 bass:note:s2:f0 distorted1:note:s1:f0 wait:480 end")
    assert primary_guitar(s) == "distorted1"
    assert primary_guitar(parse_stream("start bass:note:s1:f0 wait:480 end")) is None


def test_solo_view_corpus_is_valid(synth_pairs):
    for _, _, s in synth_pairs:
        solo = solo_view(s)
        assert errors_only(validate(solo)) == []
        assert wait_ticks(solo.body) == wait_ticks(s.body)
        assert {t.instrument for t in solo.body if isinstance(t, Note)} == {primary_guitar(s)}


# -------------------------------------------------------------------- measures


def test_measure_spans_leading_new_measure():
    s = parse_stream("start new_measure wait:480 new_measure wait:480 new_measure wait:480 end")
    assert measure_spans(s.body) == [(0, 2), (2, 4), (4, 6)]
    assert count_measures(s) == 3


def test_measure_spans_without_leading_marker():
    s = parse_stream("start wait:480 new_measure wait:480 end")
    assert measure_spans(s.body) == [(0, 1), (1, 3)]


def test_section_span_errors():
    with pytest.raises(NoMeasureTokens):
        section_span(parse_stream("start wait:480 end"), 1, 1)
    s = parse_stream("start new_measure wait:480 new_measure wait:480 end")
    with pytest.raises(MeasureOutOfRange):
        section_span(s, 2, 3)
    with pytest.raises(MeasureOutOfRange):
        section_span(s, 2, 1)


def test_extract_solo_single_section():
    s = parse_stream(MIXED)
    (solo,) = extract_solo(s, SoloAnnotation("x", (Section(2, 2),), "distorted0"))
    assert serialize(solo) == "start new_measure distorted0:note:s2:f7 wait:960 end"


def test_extract_solo_multiple_sections_in_order():
    s = parse_stream(MIXED)
    out = extract_solo(s, SoloAnnotation("x", (Section(1, 1), Section(1, 2)), "distorted0"))
    assert len(out) == 2
    assert wait_ticks(out[0].body) == 1440 and wait_ticks(out[1].body) == 2400


def test_extract_solo_on_corpus(corpus_dir):
    index = ingest(corpus_dir)
    by_path = {e.path: e.stream for e in index}
    for ann in load_annotations(corpus_dir / "solos.json"):
        s = by_path[ann.song_path]
        for sec, solo in zip(ann.sections, extract_solo(s, ann)):
            lo, hi = section_span(s, sec.start_measure, sec.end_measure)
            assert wait_ticks(solo.body) == wait_ticks(s.body[lo:hi])
            assert errors_only(validate(solo)) == []
            assert {t.instrument for t in solo.body if isinstance(t, Note)} <= {ann.target_instrument}


def test_load_annotations_mapping_form(tmp_path):
    path = tmp_path / "a.json"
    path.write_text(json.dumps({"a/s.tokens.txt": {"sections": [{"start_measure": 1, "end_measure": 2}]}}))
    (ann,) = load_annotations(path)
    assert ann == SoloAnnotation("a/s.tokens.txt", (Section(1, 2),), "distorted0")


def test_effects_never_orphaned_after_filter():
    s = parse_stream("start distorted0:note:s1:f0 bass:note:s1:f0 nfx:vibrato bfx:palm_mute wait:480 "
                     "bass:note:s1:f1 bfx:palm_mute wait:480 end")
    out = filter_instrument(s, "distorted0")
    assert not any(isinstance(t, NoteEffect) for t in out.body)
    assert sum(isinstance(t, BeatEffect) for t in out.body) == 1


# ---------------------------------------------------------------------- splits


@given(st.integers(0, 500))
def test_largest_remainder_sums(n):
    counts = largest_remainder(n, (0.55, 0.20, 0.25))
    assert sum(counts) == n
    assert all(abs(c - n * r) < 1 for c, r in zip(counts, (0.55, 0.20, 0.25)))


def test_largest_remainder_ten_songs():
    assert largest_remainder(10, (0.55, 0.20, 0.25)) == [6, 2, 2]


def test_split_partition_and_stratification(synth_index):
    train, val, test = split(synth_index, seed=5)
    paths = [e.path for part in (train, val, test) for e in part]
    assert sorted(paths) == sorted(e.path for e in synth_index)
    assert len(set(paths)) == len(paths)
    for artist, entries in synth_index.by_artist().items():
        sizes = [sum(e.artist_label == artist for e in part) for part in (train, val, test)]
        assert sizes == largest_remainder(len(entries), (0.55, 0.20, 0.25))


def test_split_deterministic(synth_index):
    a = split(synth_index, seed=9)
    b = split(synth_index, seed=9)
    assert [[e.path for e in p] for p in a] == [[e.path for e in p] for p in b]


def test_split_too_few_songs(synth_pairs):
    small = from_pairs(synth_pairs[:2])
    with pytest.raises(TooFewSongs):
        split(small)


def test_split_rejects_bad_ratios(synth_index):
    with pytest.raises(ValueError):
        split(synth_index, ratios=(0.5, 0.5, 0.5))
