"""Command-line entry point.

Subcommands mirror the pipeline stages (net, text, analyze, synth) plus
`run` for the whole thing. Exit codes: 0 success, 1 usage error, 2 data
error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import io, netideo, pipeline, synth, textideo
from .analysis import correlate, fit_fixed_effects, group_means, group_sizes
from .errors import DataError, IdeoscaleError, NumericalError, PipelineStageError
from .netideo import ActiveUserFilter, EliteSelectionConfig
from .textideo import PhraseConfig, ScoringConfig
from .types import IdeologyEstimate, RowRoster

logger = logging.getLogger("ideoscale.cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, PipelineStageError):
        return _exit_code(exc.cause)
    if isinstance(exc, DataError):
        return EXIT_DATA
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ideoscale",
        description="Estimate account ideology from follow graphs and text, "
                    "and relate the two.")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log stage progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    net = sub.add_parser("net", help="network-based ideology").add_subparsers(
        dest="subcommand", required=True)
    p = net.add_parser("build-matrix", help="build the binary follow matrix")
    p.add_argument("--edges", required=True)
    p.add_argument("--registrations", required=True)
    p.add_argument("--journalists", required=True)
    p.add_argument("--anchors", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.02,
                   help="elite follow fraction threshold (default 0.02)")
    p.add_argument("--min-follows", type=int, default=3,
                   help="anchored follows needed to count as politically "
                        "active (default 3)")
    p.set_defaults(handler=_cmd_build_matrix)

    p = net.add_parser("embed", help="PPMI + truncated SVD embedding")
    p.add_argument("--matrix", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.5,
                   help="singular value weighting exponent (0, 0.5, or 1)")
    p.set_defaults(handler=_cmd_embed)

    p = net.add_parser("fit", help="fit the anchor projection model")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--anchors", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--linear", action="store_true",
                   help="plain least squares instead of splines")
    p.set_defaults(handler=_cmd_fit)

    p = net.add_parser("score", help="project rows onto the anchor scale")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--journalists", help="optional outlet labels to attach")
    p.add_argument("--registrations", help="optional party labels to attach")
    p.set_defaults(handler=_cmd_score)

    text = sub.add_parser("text", help="text-based ideology").add_subparsers(
        dest="subcommand", required=True)
    p = text.add_parser("extract-terms", help="candidate phrases from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-ngram", type=int, default=4)
    p.add_argument("--min-authors", type=int, default=2)
    p.set_defaults(handler=_cmd_extract_terms)

    p = text.add_parser("score-terms", help="smoothed log-odds term scores")
    p.add_argument("--corpus", required=True)
    p.add_argument("--terms", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="smoothing weight (default 1.0)")
    p.add_argument("--corrected-denominator", action="store_true",
                   help="per-party author-odds denominator instead of the "
                        "pooled form")
    p.set_defaults(handler=_cmd_score_terms)

    p = text.add_parser("build-lexicon", help="balanced lexicon from scores")
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--keep", help="curated keep-list file (one term per line)")
    p.add_argument("--per-side", type=int, default=57)
    p.add_argument("--top-n", type=int, default=100)
    p.set_defaults(handler=_cmd_build_lexicon)

    p = text.add_parser("score-authors", help="lexicon-based author scores")
    p.add_argument("--corpus", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-articles", type=int, default=10)
    p.add_argument("--min-words", type=int, default=200)
    p.set_defaults(handler=_cmd_score_authors)

    analyze = sub.add_parser("analyze", help="statistical reports").add_subparsers(
        dest="subcommand", required=True)
    p = analyze.add_parser("means", help="group means of scores")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--estimates", help="ideology estimate TSV")
    src.add_argument("--author-scores", help="author score TSV")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_means)

    p = analyze.add_parser("correlate", help="correlation over shared keys")
    p.add_argument("--x", required=True, help="keyed CSV (e.g. group means)")
    p.add_argument("--y", required=True, help="keyed CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=["pearson", "spearman", "both"],
                   default="both")
    p.set_defaults(handler=_cmd_correlate)

    p = analyze.add_parser("regress",
                           help="outcome on standardized predictor + outlet "
                                "fixed effects")
    p.add_argument("--outcome", required=True,
                   help="author score TSV (text ideology, with outlets)")
    p.add_argument("--predictor", required=True,
                   help="ideology estimate TSV (network ideology)")
    p.add_argument("--out", required=True)
    p.add_argument("--reference", help="reference outlet (default: largest)")
    p.add_argument("--figures", help="directory for SVG figures")
    p.set_defaults(handler=_cmd_regress)

    sy = sub.add_parser("synth", help="synthetic data with known truth").add_subparsers(
        dest="subcommand", required=True)
    p = sy.add_parser("network", help="follow graph, roster, anchors, truth")
    p.add_argument("--config", help="synth config JSON (flat, or a pipeline "
                                    "config with a 'synth' section)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_synth_network)

    p = sy.add_parser("corpus", help="slanted documents for known accounts")
    p.add_argument("--config", help="synth config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--truth", required=True, help="ground-truth ideology TSV")
    p.add_argument("--groups", required=True,
                   help="TSV of account and group label (party or outlet)")
    p.add_argument("--out", required=True, help="output corpus JSONL")
    p.set_defaults(handler=_cmd_synth_corpus)

    p = sub.add_parser("run", help="full pipeline into a report directory")
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--synth", action="store_true",
                   help="generate synthetic inputs instead of reading files")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(handler=_cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.handler(args)
    except IdeoscaleError as exc:
        print(f"ideoscale: error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    return EXIT_OK


# ---------------------------------------------------------------------------
# net
# ---------------------------------------------------------------------------

def _cmd_build_matrix(args):
    edges = io.load_edges(args.edges)
    registrations = io.load_registrations(args.registrations)
    journalists = io.load_journalists(args.journalists)
    anchors = io.load_anchors(args.anchors)
    active = netideo.filter_active_users(
        edges, registrations, anchors,
        ActiveUserFilter(min_congressional_follows=args.min_follows))
    roster = RowRoster(journalists=frozenset(journalists),
                       politically_active=frozenset(active))
    elites = netideo.select_elites(
        edges, roster, anchors,
        EliteSelectionConfig(follow_fraction_threshold=args.threshold))
    matrix = netideo.build_matrix(edges, roster, elites)
    io.write_matrix(args.out, matrix)
    print(f"matrix: {matrix.shape[0]} rows x {matrix.shape[1]} cols, "
          f"{len(matrix.cells)} cells -> {args.out}")


def _cmd_embed(args):
    matrix = io.load_matrix(args.matrix)
    space = netideo.embed_follow_matrix(matrix, args.k, args.seed, args.alpha)
    io.write_embeddings(args.out, space)
    print(f"embedded {len(space.row_vectors)} rows and "
          f"{len(space.col_vectors)} cols at k={args.k} -> {args.out}")


def _cmd_fit(args):
    space = io.load_embeddings(args.embeddings)
    anchors = io.load_anchors(args.anchors)
    model = netideo.fit_projection(space, anchors, linear=args.linear)
    netideo.write_model(args.out, model)
    print(f"projection fit: kind={model.kind} r_squared={model.fit_r_squared:.4f} "
          f"-> {args.out}")


def _cmd_score(args):
    space = io.load_embeddings(args.embeddings)
    model = netideo.load_model(args.model)
    groups: dict[str, str] = {}
    if args.journalists:
        groups.update({a: o for a, o in io.load_journalists(args.journalists).items()
                       if o is not None})
    if args.registrations:
        groups.update(io.load_registrations(args.registrations))
    estimates = netideo.project_rows(space, model, groups)
    io.write_estimates(args.out, estimates)
    print(f"scored {len(estimates)} rows -> {args.out}")


# ---------------------------------------------------------------------------
# text
# ---------------------------------------------------------------------------

def _cmd_extract_terms(args):
    corpus = io.load_corpus(args.corpus)
    terms = textideo.extract_phrases(
        corpus, PhraseConfig(max_ngram=args.max_ngram,
                             min_authors=args.min_authors))
    io.write_terms(args.out, sorted(terms))
    print(f"{len(terms)} candidate terms -> {args.out}")


def _cmd_score_terms(args):
    corpus = io.load_corpus(args.corpus)
    terms = io.load_terms(args.terms)
    table = textideo.score_terms(
        corpus, terms, ScoringConfig(lam=args.lam,
                                     corrected_denominator=args.corrected_denominator))
    io.write_term_scores(args.out, table)
    print(f"scored {len(table.entries)} terms "
          f"(|D|={table.setup.n_d}, |R|={table.setup.n_r}) -> {args.out}")


def _cmd_build_lexicon(args):
    table = io.load_term_scores(args.scores)
    keep = set(io.load_terms(args.keep)) if args.keep else None
    lexicon = textideo.build_lexicon(
        table, keep, ScoringConfig(top_n_per_side=args.top_n,
                                   lexicon_size_per_side=args.per_side))
    io.write_lexicon(args.out, lexicon)
    print(f"lexicon: {len(lexicon.left_terms)} left + "
          f"{len(lexicon.right_terms)} right -> {args.out}")


def _cmd_score_authors(args):
    corpus = io.load_corpus(args.corpus)
    lexicon = io.load_lexicon(args.lexicon)
    eligible = textideo.filter_authors(corpus, lexicon,
                                       args.min_articles, args.min_words)
    if not eligible:
        raise DataError("no authors pass the article thresholds")
    scores = textideo.score_authors(corpus, lexicon, eligible, args.min_words)
    io.write_author_scores(args.out, scores, textideo.author_groups(corpus))
    print(f"scored {len(scores)} authors -> {args.out}")


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def _cmd_means(args):
    if args.estimates:
        estimates = io.load_estimates(args.estimates)
    else:
        scores, groups = io.load_author_scores(args.author_scores)
        estimates = [IdeologyEstimate(account=s.author, score=s.score,
                                      source="text", group=groups.get(s.author))
                     for s in scores]
    means = group_means(estimates)
    io.write_group_means(args.out, means, group_sizes(estimates))
    print(f"{len(means)} group means -> {args.out}")


def _cmd_correlate(args):
    xs = io.load_keyed_csv(args.x)
    ys = io.load_keyed_csv(args.y)
    methods = ["pearson", "spearman"] if args.method == "both" else [args.method]
    rows = []
    for method in methods:
        coef, n = correlate(xs, ys, method)
        rows.append(("xy", method, coef, n))
        print(f"{method}: {coef:.4f} (n={n})")
    io.write_correlations(args.out, rows)


def _cmd_regress(args):
    scores, groups = io.load_author_scores(args.outcome)
    net = {e.account: e.score for e in io.load_estimates(args.predictor)}
    shared = sorted(s.author for s in scores
                    if s.author in net and s.author in groups)
    if not shared:
        raise DataError("no authors shared between outcome and predictor")
    outcome = {s.author: s.score for s in scores if s.author in set(shared)}
    predictor = {a: net[a] for a in shared}
    labels = {a: groups[a] for a in shared}
    reference = args.reference or pipeline._largest_group(labels)
    report = fit_fixed_effects(outcome, predictor, labels, reference,
                               predictor_name="network_score")
    io.write_regression_report(args.out, report)
    print(f"n={report.n} r_squared={report.r_squared:.4f} "
          f"reference={report.reference_group} -> {args.out}")
    if args.figures:
        from .figures import render_coefficients

        fig_dir = Path(args.figures)
        fig_dir.mkdir(parents=True, exist_ok=True)
        render_coefficients(report, fig_dir / "coefficients.svg")
        print(f"figures -> {fig_dir}")


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def _load_synth_config(args) -> synth.SynthConfig:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        if "synth" in raw:
            cfg = pipeline.config_from_dict(raw).synth
        else:
            cfg = synth.config_from_dict(raw)
    else:
        cfg = synth.SynthConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _cmd_synth_network(args):
    cfg = _load_synth_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    edges, roster, anchors, truth = synth.gen_network(cfg)
    outlets = synth.assign_outlets(roster.journalists, cfg.n_outlets)
    io.write_edges(out / "edges.tsv", edges)
    io.write_registrations(out / "registrations.tsv",
                           dict(roster.politically_active))
    io.write_journalists(out / "journalists.tsv", outlets)
    io.write_anchors(out / "anchors.csv", anchors)
    io.write_values(out / "truth.tsv", truth)
    print(f"{len(edges.edges)} edges, {len(roster)} rows, "
          f"{len(anchors.entries)} anchors -> {out}")


def _cmd_synth_corpus(args):
    cfg = _load_synth_config(args)
    truth = io.load_values(args.truth)
    groups_raw = io.load_journalists(args.groups)
    groups = {a: g for a, g in groups_raw.items() if g is not None}
    if not groups:
        raise DataError(f"{args.groups}: no accounts with group labels")
    docs = synth.gen_corpus(cfg, truth, groups)
    io.write_corpus(args.out, docs)
    print(f"{len(docs)} documents for {len(groups)} authors -> {args.out}")


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _cmd_run(args):
    cfg = pipeline.load_config(args.config) if args.config else pipeline.PipelineConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(
            cfg, seed=args.seed,
            synth=dataclasses.replace(cfg.synth, seed=args.seed))
    paths = pipeline.run_pipeline(cfg, args.out, use_synth=args.synth)
    for name in sorted(paths):
        print(f"{name}: {paths[name]}")


if __name__ == "__main__":
    sys.exit(main())
