"""Command-line entry point.

Exit codes: 0 success, 1 domain failure, 2 I/O or usage failure.
Verbosity comes from the ``SHREDKIT_LOG`` environment variable.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .classify import evaluate, score_table, train_feature_scorer, train_nb
from .corpus import extract_solo, ingest, load_annotations, solo_view, split
from .errors import EmptyCorpus, ShredkitError
from .reports import (
    analyze_corpus,
    config_dir,
    kld_tables,
    load_generated,
    write_analysis,
    write_csv,
    write_json,
    write_kld_tables,
    write_manifest,
)
from .stats import DEFAULT_EPSILON
from .stylelm import (
    CONFIGS,
    DEFAULT_ADD_K,
    DEFAULT_LAMBDA,
    DEFAULT_ORDER,
    MULTI_BUDGET,
    SOLO_BUDGET,
    config_name,
    generate_corpus,
    parse_config_name,
    train_mode_models,
)
from .tokens import errors_only, read_stream, validate, write_stream

log = logging.getLogger("shredkit")

DEFAULT_SPLIT = (0.55, 0.20, 0.25)


class UsageError(Exception):
    pass


def _setup_logging():
    level = os.environ.get("SHREDKIT_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -------------------------------------------------------------------- validate


def _token_files(paths):
    for p in paths:
        p = Path(p)
        if p.is_dir():
            yield from sorted(p.rglob("*.tokens.txt"))
        else:
            yield p


def cmd_validate(args) -> int:
    errors = unreadable = 0
    for path in _token_files(args.paths):
        try:
            stream = read_stream(path)
        except (OSError, UnicodeDecodeError) as exc:
            print(f"{path}: cannot read: {exc}", file=sys.stderr)
            unreadable += 1
            continue
        for v in validate(stream):
            tag = "" if v.is_error else "warning: "
            print(f"{path}:{v.index}: {tag}{v.message}", file=sys.stderr)
        errors += len(errors_only(validate(stream)))
    if unreadable:
        return 2
    return 1 if errors else 0


# --------------------------------------------------------------------- analyze


def cmd_analyze(args) -> int:
    corpus = ingest(args.corpus, manifest=args.manifest)
    out = _out_dir(args.out)
    result = analyze_corpus(corpus, instrument=args.instrument)
    write_analysis(out, result, emit_gnuplot=args.emit_gnuplot)
    write_manifest(out, "analyze", {
        "instrument": args.instrument or "primary guitar per song",
        "kw_unit": "song",
        "technique_counting": "per token",
        "ticks_per_quarter": 960,
    }, None, [args.corpus])
    return 0


# --------------------------------------------------------------------- compare


def cmd_compare(args) -> int:
    groundtruth = ingest(args.corpus, manifest=args.manifest)
    generated = load_generated(args.generated)
    if not generated:
        raise EmptyCorpus(f"no generated token files under {args.generated}")
    tables = kld_tables(groundtruth, generated, args.epsilon)
    out = _out_dir(args.out)
    write_kld_tables(out, tables, args.epsilon)
    write_manifest(out, "compare", {"epsilon": args.epsilon, "direction": "KL(generated || groundtruth)"},
                   None, [args.corpus, args.generated])
    return 0


# --------------------------------------------------------------- extract-solos


def cmd_extract_solos(args) -> int:
    root = Path(args.corpus)
    annotations = load_annotations(args.annotations)
    out = _out_dir(args.out)
    written, failed = [], []
    for ann in annotations:
        src = root / ann.song_path
        try:
            sections = extract_solo(read_stream(src), ann)
        except (OSError, ShredkitError) as exc:
            log.warning("%s: %s", ann.song_path, exc)
            failed.append({"song_path": ann.song_path, "reason": str(exc)})
            continue
        stem = ann.song_path[: -len(".tokens.txt")] if ann.song_path.endswith(".tokens.txt") else ann.song_path
        for k, (section, stream) in enumerate(zip(ann.sections, sections)):
            n_err = len(errors_only(validate(stream)))
            if n_err:
                log.warning("%s section %d: %d validation error(s)", ann.song_path, k, n_err)
            dest = out / f"{stem}.solo{k}.m{section.start_measure}-{section.end_measure}.tokens.txt"
            dest.parent.mkdir(parents=True, exist_ok=True)
            write_stream(dest, stream)
            written.append(dest.relative_to(out).as_posix())
    per_artist = {}
    for rel in written:
        artist = rel.split("/")[0] if "/" in rel else ""
        per_artist[artist] = per_artist.get(artist, 0) + 1
    write_json(out / "solo_summary.json", {
        "extracted": len(written),
        "failed": failed,
        "per_artist": per_artist,
        "files": sorted(written),
    })
    write_manifest(out, "extract-solos", {}, None, [args.corpus, args.annotations])
    if not written:
        log.error("no solo section could be extracted")
        return 1
    return 0


# -------------------------------------------------------------- train-generate


def _configs(mode, prompt):
    modes = [mode] if mode else ["multi", "solo"]
    prompts = [prompt] if prompt else ["full", "empty"]
    return [config_name(m, p) for m in modes for p in prompts]


def run_train_generate(corpus, out, configs, n, seed, order, lam, add_k, temperature, top_k):
    modes = sorted({parse_config_name(c)[0] for c in configs})
    models = train_mode_models(corpus, modes=modes, order=order, lam=lam, add_k=add_k)
    (out / "models").mkdir(exist_ok=True)
    for mode, model in models.items():
        model.save(out / "models" / f"stylelm-{mode}.json")
    count = 0
    for cfg in configs:
        mode, prompt_kind = parse_config_name(cfg)
        gens = generate_corpus(models, corpus, mode, prompt_kind, n, seed=seed,
                               temperature=temperature, top_k=top_k)
        for artist, streams in gens.items():
            d = config_dir(out, artist, cfg)
            d.mkdir(parents=True, exist_ok=True)
            for i, s in enumerate(streams):
                write_stream(d / f"{i:04d}.tokens.txt", s)
                count += 1
    return count


def cmd_train_generate(args) -> int:
    corpus = ingest(args.corpus, manifest=args.manifest)
    out = _out_dir(args.out)
    configs = _configs(args.mode, args.prompt)
    count = run_train_generate(corpus, out, configs, args.n, args.seed, args.order,
                               args.lam, args.add_k, args.temperature, args.top_k)
    write_manifest(out, "train-generate", {
        "configurations": configs,
        "n_examples": args.n,
        "order": args.order,
        "lambda": args.lam,
        "add_k": args.add_k,
        "backoff": 0.4,
        "temperature": args.temperature,
        "top_k": args.top_k,
        "budgets": {"solo": SOLO_BUDGET, "multi": MULTI_BUDGET},
        "empty_prompt_note": "first note of each prompt song",
        "files": count,
    }, args.seed, [args.corpus])
    return 0


# -------------------------------------------------------------------- classify


def run_classify(corpus, out, generated_root, alpha, seed, ratios):
    train_split, val_split, test_split = split(corpus, ratios, seed)
    model = train_nb(train_split, alpha, view=solo_view)
    test_eval = evaluate(model, test_split, view=solo_view) if len(test_split) else None
    val_eval = evaluate(model, val_split, view=solo_view) if len(val_split) else None
    report = {
        "split": {"ratios": list(ratios), "train": len(train_split), "validation": len(val_split),
                  "test": len(test_split)},
        "alpha": alpha,
        "view": "primary guitar per stream",
        "test": test_eval.to_json() if test_eval else None,
        "validation": val_eval.to_json() if val_eval else None,
    }
    try:
        fs = train_feature_scorer(train_split, view=solo_view)
        hits = sum(max(fs.scores(solo_view(e.stream)).items(), key=lambda kv: kv[1])[0] == e.artist_label
                   for e in test_split)
        report["feature_scorer_test_accuracy"] = hits / len(test_split) if len(test_split) else None
    except ShredkitError as exc:
        report["feature_scorer_test_accuracy"] = None
        log.warning("feature scorer skipped: %s", exc)
    write_json(out / "accuracy.json", report)
    if test_eval:
        labels = list(test_eval.labels)
        write_csv(out / "confusion.csv", ["true\\predicted", *labels],
                  [[a, *row] for a, row in zip(labels, test_eval.confusion.tolist())])
        write_csv(out / "predictions.csv", ["path", "true", "predicted"], test_eval.predictions)
    table = None
    if generated_root is not None:
        generated = load_generated(generated_root)
        if not generated:
            raise EmptyCorpus(f"no generated token files under {generated_root}")
        table = score_table(model, generated, view=solo_view)
        table.write_csv(out / "score_table.csv")
    return report, table


def cmd_classify(args) -> int:
    corpus = ingest(args.corpus, manifest=args.manifest)
    out = _out_dir(args.out)
    run_classify(corpus, out, args.generated, args.alpha, args.seed, tuple(args.split))
    write_manifest(out, "classify", {"alpha": args.alpha, "split": list(args.split), "view": "primary guitar"},
                   args.seed, [p for p in (args.corpus, args.generated) if p])
    return 0


# ---------------------------------------------------------------------- report


def cmd_report(args) -> int:
    """Full pipeline: analyze, generate all four configurations, compare, classify."""
    corpus = ingest(args.corpus, manifest=args.manifest)
    out = _out_dir(args.out)
    analysis = _out_dir(out / "analysis")
    write_analysis(analysis, analyze_corpus(corpus), emit_gnuplot=args.emit_gnuplot)
    write_manifest(analysis, "analyze", {"kw_unit": "song"}, None, [args.corpus])

    gen = _out_dir(out / "generated")
    run_train_generate(corpus, gen, list(CONFIGS), args.n, args.seed, args.order, args.lam,
                       args.add_k, args.temperature, args.top_k)
    write_manifest(gen, "train-generate", {"configurations": list(CONFIGS), "n_examples": args.n,
                                           "order": args.order, "lambda": args.lam, "add_k": args.add_k,
                                           "temperature": args.temperature, "top_k": args.top_k},
                   args.seed, [args.corpus])

    comp = _out_dir(out / "compare")
    write_kld_tables(comp, kld_tables(corpus, load_generated(gen), args.epsilon), args.epsilon)
    # generated inputs are named relative to the report root so manifests do not embed --out
    write_manifest(comp, "compare", {"epsilon": args.epsilon}, None, [args.corpus, "../generated"])

    cls = _out_dir(out / "classify")
    run_classify(corpus, cls, gen, args.alpha, args.seed, tuple(args.split))
    write_manifest(cls, "classify", {"alpha": args.alpha, "split": list(args.split)}, args.seed,
                   [args.corpus, "../generated"])
    write_manifest(out, "report", {"subdirectories": ["analysis", "generated", "compare", "classify"]},
                   args.seed, [args.corpus])
    return 0


# ----------------------------------------------------------------------- synth


def cmd_synth(args) -> int:
    from .synth import make_annotations, make_corpus, write_corpus

    corpus = make_corpus(args.songs_per_artist, args.seed)
    annotations = make_annotations(corpus, args.annotations, args.seed) if args.annotations else None
    out = _out_dir(args.out)
    write_corpus(out, corpus, annotations)
    return 0


# ---------------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _split_arg(text):
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated ratios")
    return parts


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="shredkit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"shredkit {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def corpus_opts(sp, out=True):
        sp.add_argument("--corpus", required=True, help="corpus root (artist/<song>.tokens.txt)")
        sp.add_argument("--manifest", help="JSON mapping relative path -> artist label")
        if out:
            sp.add_argument("--out", required=True, help="output directory")

    def lm_opts(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--n", type=int, default=20, help="examples per artist and configuration")
        sp.add_argument("--order", type=int, default=DEFAULT_ORDER)
        sp.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
        sp.add_argument("--add-k", dest="add_k", type=float, default=DEFAULT_ADD_K)
        sp.add_argument("--temperature", type=float, default=1.0)
        sp.add_argument("--top-k", dest="top_k", type=int, default=None)

    sp = sub.add_parser("validate", help="check token files against the grammar")
    sp.add_argument("paths", nargs="+")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("analyze", help="per-artist features, corpus summary and Kruskal-Wallis tests")
    corpus_opts(sp)
    sp.add_argument("--instrument", help="analyze this instrument instead of each song's primary guitar")
    sp.add_argument("--emit-gnuplot", action="store_true")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("compare", help="KLD matrices between generated and groundtruth corpora")
    corpus_opts(sp)
    sp.add_argument("--generated", required=True, help="root of <artist>/<CONFIG>/*.tokens.txt")
    sp.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("extract-solos", help="cut annotated solo sections into single-guitar files")
    corpus_opts(sp, out=False)
    sp.add_argument("--annotations", required=True, help="solo annotation JSON sidecar")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_extract_solos)

    sp = sub.add_parser("train-generate", help="train the style LM and generate conditioned songs")
    corpus_opts(sp)
    lm_opts(sp)
    sp.add_argument("--mode", choices=("multi", "solo"), help="default: both")
    sp.add_argument("--prompt", choices=("full", "empty"), help="default: both")
    sp.set_defaults(func=cmd_train_generate)

    sp = sub.add_parser("classify", help="train/evaluate the guitarist classifier; score generations")
    corpus_opts(sp)
    sp.add_argument("--generated", help="root of <artist>/<CONFIG>/*.tokens.txt to score")
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--split", type=_split_arg, default=list(DEFAULT_SPLIT), help="train,val,test ratios")
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("report", help="run analyze, train-generate, compare and classify end to end")
    corpus_opts(sp)
    lm_opts(sp)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    sp.add_argument("--split", type=_split_arg, default=list(DEFAULT_SPLIT))
    sp.add_argument("--emit-gnuplot", action="store_true")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("synth", help="write a synthetic four-style fixture corpus")
    sp.add_argument("--out", required=True)
    sp.add_argument("--songs-per-artist", type=int, default=20)
    sp.add_argument("--annotations", type=int, default=30, help="number of solo annotations (0: none)")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except ShredkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, UnicodeDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
