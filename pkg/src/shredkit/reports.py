"""Table building and deterministic CSV/JSON writers behind the CLI."""

from __future__ import annotations

import csv
import json
import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .corpus import CorpusIndex, solo_view
from .errors import DegenerateInput, ShredkitError
from .musicology import (
    PITCH_CLASSES,
    TECHNIQUES,
    Distribution,
    corpus_summary,
    merge,
    note_duration_distribution,
    pitch_class_entropy,
    pitch_class_histogram,
    scale_consistency,
    technique_distribution,
)
from .stats import DEFAULT_EPSILON, descriptive, kld, kruskal_wallis
from .stylelm import CONFIGS
from .tokens import decode_events, read_stream

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".10g")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, int, np.floating, np.integer)) and not isinstance(v, bool) else v for v in row])


def write_json(path, data) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the clock for reproducible runs
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    now = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return now.isoformat(timespec="seconds")


def write_manifest(out_dir, command: str, config: dict, seed, inputs) -> Path:
    out_dir = Path(out_dir)
    data = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": [str(p) for p in inputs],
        "tool_version": __version__,
        "timestamp": _timestamp(),
    }
    path = out_dir / MANIFEST
    write_json(path, data)
    return path


# -------------------------------------------------------------------- analysis


def song_features(stream, instrument: Optional[str] = None) -> Optional[dict]:
    """Per-song distributions and scalars on the guitar view; None if no notes."""
    view = solo_view(stream, instrument)
    timeline = decode_events(view)
    if not timeline.pitched:
        return None
    durations = note_duration_distribution(timeline)
    techniques = technique_distribution(view)
    hist = pitch_class_histogram(timeline)
    scale = scale_consistency(hist)
    n = len(timeline.pitched)
    mean_dur = sum(e.duration_ticks for e in timeline.pitched) / n
    return {
        "durations": durations,
        "techniques": techniques,
        "pitch_classes": hist,
        "pce": pitch_class_entropy(hist),
        "sc": scale.consistency,
        "best_scale": scale.best_scale,
        "num_events": n,
        "mean_duration": mean_dur,
        "technique_rate": techniques.total / n,
    }


KW_TESTS = (
    ("note_duration", "mean_duration", "mean inter-onset duration (ticks) per song"),
    ("technique", "technique_rate", "canonical technique tokens per note per song"),
    ("pce", "pce", "pitch class entropy (bits) per song"),
    ("sc", "sc", "scale consistency per song"),
)


def analyze_corpus(corpus: CorpusIndex, instrument: Optional[str] = None) -> dict:
    songs = []
    for e in corpus:
        feats = song_features(e.stream, instrument)
        if feats is None:
            log.warning("%s: no pitched guitar events; excluded from features", e.path)
            continue
        songs.append((e, feats))
    artists = corpus.artists()
    per_artist = {a: [f for e, f in songs if e.artist_label == a] for a in artists}

    def agg(key):
        return {a: merge(f[key] for f in fs) for a, fs in per_artist.items() if fs}

    summary = corpus_summary(
        ((e.artist_label, solo_view(e.stream, instrument)) for e in corpus),
        artists=artists,
    )
    groups = [a for a in artists if per_artist[a]]
    kw = {}
    for name, key, desc in KW_TESTS:
        if len(groups) < 2:
            kw[name] = {"skipped": "need >=2 groups", "song_value": desc}
            continue
        try:
            res = kruskal_wallis([[f[key] for f in per_artist[a]] for a in groups])
            kw[name] = dict(res.to_json(), song_value=desc, groups=groups)
        except DegenerateInput as exc:
            kw[name] = {"skipped": str(exc), "song_value": desc}
    return {
        "songs": songs,
        "durations": agg("durations"),
        "techniques": agg("techniques"),
        "pitch_classes": agg("pitch_classes"),
        "summary": summary,
        "kruskal_wallis": kw,
        "per_artist": per_artist,
    }


def _dist_rows(dists: dict):
    for artist, d in dists.items():
        for label, c, p in zip(d.labels, d.counts, d.probabilities()):
            yield [artist, label, float(c), float(p)]


def write_analysis(out_dir, result: dict, emit_gnuplot: bool = False) -> list:
    out = Path(out_dir)
    files = []

    def dist_csv(name, key, label_col):
        path = out / name
        write_csv(path, ["artist", label_col, "count", "probability"], _dist_rows(result[key]))
        files.append(path)

    dist_csv("note_durations.csv", "durations", "duration_ticks")
    dist_csv("techniques.csv", "techniques", "technique")
    dist_csv("pitch_classes.csv", "pitch_classes", "pitch_class")

    rows = []
    for e, f in result["songs"]:
        root, mode = f["best_scale"]
        rows.append([e.path, e.artist_label, f["num_events"], f["mean_duration"], f["technique_rate"],
                     f["pce"], f["sc"], PITCH_CLASSES[root], mode])
    write_csv(out / "songs.csv", ["path", "artist", "num_events", "mean_duration", "technique_rate",
                                  "pce", "sc", "best_root", "best_mode"], rows)
    files.append(out / "songs.csv")

    rows = []
    for artist, fs in result["per_artist"].items():
        for metric in ("pce", "sc"):
            if not fs:
                continue
            d = descriptive([f[metric] for f in fs])
            rows.append([artist, metric, d["n"], d["mean"], d["median"], d["min"], d["max"], d["std"]])
    write_csv(out / "pce_sc_descriptive.csv", ["artist", "metric", "n", "mean", "median", "min", "max", "std"], rows)
    files.append(out / "pce_sc_descriptive.csv")

    rows = [[s.artist, s.avg_tempo, s.num_notes, s.num_fx, s.num_songs] for s in result["summary"].values()]
    write_csv(out / "summary.csv", ["artist", "avg_tempo", "num_notes", "num_fx", "num_songs"], rows)
    files.append(out / "summary.csv")

    write_json(out / "kruskal_wallis.json", {
        "unit": "song",
        "technique_counting": "per token",
        "tests": result["kruskal_wallis"],
    })
    files.append(out / "kruskal_wallis.json")
    if emit_gnuplot:
        files.extend(write_gnuplot(out, ["note_durations.csv", "techniques.csv", "pitch_classes.csv"]))
    return files


def write_gnuplot(out: Path, csv_names) -> list:
    paths = []
    for name in csv_names:
        stem = name[:-4]
        path = out / f"{stem}.gp"
        path.write_text(
            "set datafile separator ','\n"
            "set style data histograms\n"
            "set style fill solid 0.8\n"
            f"set terminal pngcairo size 900,500\nset output '{stem}.png'\n"
            "set key outside\n"
            f"plot for [a in system(\"tail -n +2 {name} | cut -d, -f1 | sort -u\")] \\\n"
            f"  '< grep \"^'.a.',\" {name}' using 4:xtic(2) title a\n",
            encoding="utf-8",
        )
        paths.append(path)
    return paths


# ------------------------------------------------------------------ generated


def config_dir(root, artist: str, config: str) -> Path:
    return Path(root) / artist / config


def load_generated(root) -> dict:
    """``{(artist, config): [stream, ...]}`` from ``root/<artist>/<CONFIG>/*.tokens.txt``."""
    root = Path(root)
    out = {}
    for artist_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for cfg_dir in sorted(p for p in artist_dir.iterdir() if p.is_dir()):
            files = sorted(cfg_dir.glob("*.tokens.txt"))
            if files:
                out[(artist_dir.name, cfg_dir.name)] = [read_stream(f) for f in files]
    return out


def corpus_distributions(streams, instrument=None) -> tuple:
    durs, techs = [], []
    for s in streams:
        view = solo_view(s, instrument)
        tl = decode_events(view)
        if tl.pitched:
            durs.append(note_duration_distribution(tl))
        techs.append(technique_distribution(view))
    techs_merged = merge(techs) if techs else Distribution(TECHNIQUES, [0] * len(TECHNIQUES))
    return merge(durs), techs_merged


class MissingConfigurations(ShredkitError):
    pass


def kld_tables(groundtruth: CorpusIndex, generated: dict, epsilon: float = DEFAULT_EPSILON) -> dict:
    """Rows (artist, config) x groundtruth-artist columns of KL(generated || groundtruth)."""
    artists = groundtruth.artists()
    missing = [f"{a}/{c}" for a in artists for c in CONFIGS if (a, c) not in generated]
    if missing:
        raise MissingConfigurations(f"generated corpus lacks configurations: {', '.join(missing)}")
    gt = {a: corpus_distributions([e.stream for e in es]) for a, es in groundtruth.by_artist().items()}
    rows = [(a, c) for a in artists for c in CONFIGS]
    tables = {"note_duration": [], "technique": []}
    for a, c in rows:
        d, t = corpus_distributions(generated[(a, c)])
        tables["note_duration"].append([kld(d, gt[b][0], epsilon) for b in artists])
        tables["technique"].append([kld(t, gt[b][1], epsilon) for b in artists])
    return {"rows": rows, "columns": artists, **{k: np.array(v) for k, v in tables.items()}}


def write_kld_tables(out_dir, tables: dict, epsilon: float) -> list:
    out = Path(out_dir)
    files = []
    summary = {"direction": "KL(generated || groundtruth)", "epsilon": epsilon, "units": "bits", "diagonal_best": {}}
    for key, fname in (("note_duration", "kld_note_duration.csv"), ("technique", "kld_technique.csv")):
        m = tables[key]
        rows = []
        hits = 0
        for (artist, cfg), vals in zip(tables["rows"], m):
            best = tables["columns"][int(np.argmin(vals))]
            hits += best == artist
            rows.append([artist, cfg, *[float(v) for v in vals], best])
        write_csv(out / fname, ["artist", "configuration", *tables["columns"], "best"], rows)
        summary["diagonal_best"][key] = {"rows": len(rows), "diagonal": hits}
        files.append(out / fname)
    write_json(out / "kld_summary.json", summary)
    files.append(out / "kld_summary.json")
    return files
