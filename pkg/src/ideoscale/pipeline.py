"""End-to-end pipeline: network scores, lexicon, author scores, analyses.

Stages communicate only through files in the documented formats, so every
stage can be re-run individually through the CLI with identical results.
A lock file guards the output directory; an _INCOMPLETE sentinel marks
partial output until the run finishes.
"""
from __future__ import annotations

import dataclasses
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from . import io, netideo, synth, textideo
from .analysis import correlate, fit_fixed_effects, group_means, group_sizes
from .errors import DataError, PipelineStageError
from .figures import render_coefficients, render_outlet_scatter, render_separation
from .netideo import ActiveUserFilter, EliteSelectionConfig
from .synth import SynthConfig
from .textideo import PhraseConfig, ScoringConfig
from .types import IdeologyEstimate, RowRoster

logger = logging.getLogger("ideoscale.pipeline")

SENTINEL = "_INCOMPLETE"
LOCK = ".lock"

INPUT_KEYS = ("edges", "registrations", "journalists", "anchors",
              "statements", "articles", "keep")
REQUIRED_INPUTS = ("edges", "registrations", "journalists", "anchors",
                   "statements", "articles")


@dataclass(frozen=True)
class PipelineConfig:
    """Declarative configuration for a full run."""

    k: int = 5
    seed: int = 0
    alpha: float = 0.5
    linear_projection: bool = False
    elite: EliteSelectionConfig = field(default_factory=EliteSelectionConfig)
    active: ActiveUserFilter = field(default_factory=ActiveUserFilter)
    phrases: PhraseConfig = field(default_factory=PhraseConfig)
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    min_articles: int = 10
    min_words: int = 200
    reference_outlet: str | None = None
    synth: SynthConfig = field(default_factory=SynthConfig)
    inputs: dict | None = None

    def to_dict(self) -> dict:
        phrases = dataclasses.asdict(self.phrases)
        phrases["stopword_list"] = sorted(self.phrases.stopword_list)
        return {
            "k": self.k, "seed": self.seed, "alpha": self.alpha,
            "linear_projection": self.linear_projection,
            "elite": dataclasses.asdict(self.elite),
            "active": dataclasses.asdict(self.active),
            "phrases": phrases,
            "scoring": dataclasses.asdict(self.scoring),
            "min_articles": self.min_articles, "min_words": self.min_words,
            "reference_outlet": self.reference_outlet,
            "synth": dataclasses.asdict(self.synth),
            "inputs": dict(self.inputs) if self.inputs else None,
        }


def _section(cls, d: Mapping, name: str):
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise DataError(f"unknown {name} config keys: {unknown}")
    return cls(**d)


def config_from_dict(d: Mapping) -> PipelineConfig:
    """Parse a declarative config, rejecting unknown keys at every level."""
    top = {"k", "seed", "alpha", "linear_projection", "elite", "active",
           "phrases", "scoring", "min_articles", "min_words",
           "reference_outlet", "synth", "inputs"}
    unknown = sorted(set(d) - top)
    if unknown:
        raise DataError(f"unknown config keys: {unknown}")
    kwargs: dict = {k: d[k] for k in
                    ("k", "seed", "alpha", "linear_projection", "min_articles",
                     "min_words", "reference_outlet") if k in d}
    if "elite" in d:
        kwargs["elite"] = _section(EliteSelectionConfig, d["elite"], "elite")
    if "active" in d:
        kwargs["active"] = _section(ActiveUserFilter, d["active"], "active")
    if "phrases" in d:
        p = dict(d["phrases"])
        if "stopword_list" in p:
            p["stopword_list"] = frozenset(p["stopword_list"])
        kwargs["phrases"] = _section(PhraseConfig, p, "phrases")
    if "scoring" in d:
        kwargs["scoring"] = _section(ScoringConfig, d["scoring"], "scoring")
    if "synth" in d:
        kwargs["synth"] = synth.config_from_dict(d["synth"])
    if "inputs" in d and d["inputs"] is not None:
        inputs = dict(d["inputs"])
        unknown = sorted(set(inputs) - set(INPUT_KEYS))
        if unknown:
            raise DataError(f"unknown input keys: {unknown}")
        kwargs["inputs"] = inputs
    return PipelineConfig(**kwargs)


def load_config(path: str | Path) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            body = "".join(line for line in fh if not line.startswith("#"))
        return config_from_dict(json.loads(body))
    except FileNotFoundError:
        raise DataError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed JSON config: {exc}") from exc


def write_config(path: str | Path, cfg: PipelineConfig, digest: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(io.header_line(digest) + "\n")
        fh.write(json.dumps(cfg.to_dict(), sort_keys=True, indent=1) + "\n")


def _stage(name: str, fn, *args, **kwargs):
    logger.info("stage %s", name)
    try:
        return fn(*args, **kwargs)
    except PipelineStageError:
        raise
    except Exception as exc:
        raise PipelineStageError(name, exc) from exc


def run_pipeline(cfg: PipelineConfig, out_dir: str | Path,
                 use_synth: bool = False) -> dict[str, Path]:
    """Run every stage into ``out_dir``; returns the written file map."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lock = out / LOCK
    try:
        lock_fh = open(lock, "x")
    except FileExistsError:
        raise DataError(
            f"output directory {out} is locked by another run "
            f"(remove {lock} if that run is dead)") from None
    sentinel = out / SENTINEL
    sentinel.write_text("run in progress or aborted\n")
    try:
        paths = _run_stages(cfg, out, use_synth)
        sentinel.unlink()
        return paths
    finally:
        lock_fh.close()
        lock.unlink()


def _run_stages(cfg: PipelineConfig, out: Path, use_synth: bool) -> dict[str, Path]:
    digest = io.config_digest(cfg.to_dict())
    paths: dict[str, Path] = {"config": out / "config.json"}
    write_config(paths["config"], cfg, digest)

    if use_synth:
        paths.update({
            "edges": out / "edges.tsv",
            "registrations": out / "registrations.tsv",
            "journalists": out / "journalists.tsv",
            "anchors": out / "anchors.csv",
            "truth": out / "truth.tsv",
            "statements": out / "statements.jsonl",
            "articles": out / "articles.jsonl",
        })
        _stage("synth network", _synth_network, cfg, paths, digest)
        _stage("synth corpus", _synth_corpus, cfg, paths, digest)
        inputs = paths
    else:
        if not cfg.inputs:
            raise DataError("config has no inputs section and --synth not given")
        missing = [k for k in REQUIRED_INPUTS if k not in cfg.inputs]
        if missing:
            raise DataError(f"config inputs missing required keys: {missing}")
        inputs = {k: Path(v) for k, v in cfg.inputs.items()}

    paths["matrix"] = out / "matrix.tsv"
    _stage("net build-matrix", _net_build_matrix, cfg, inputs, paths, digest)
    paths["embeddings"] = out / "embeddings.tsv"
    _stage("net embed", _net_embed, cfg, paths, digest)
    paths["model"] = out / "model.json"
    _stage("net fit", _net_fit, cfg, inputs, paths, digest)
    paths["network_scores"] = out / "network_scores.tsv"
    _stage("net score", _net_score, cfg, inputs, paths, digest)

    paths["terms"] = out / "terms.tsv"
    _stage("text extract-terms", _text_extract, cfg, inputs, paths, digest)
    paths["term_scores"] = out / "term_scores.tsv"
    _stage("text score-terms", _text_score_terms, cfg, inputs, paths, digest)
    paths["lexicon"] = out / "lexicon.tsv"
    _stage("text build-lexicon", _text_build_lexicon, cfg, inputs, paths, digest)
    paths["author_scores"] = out / "author_scores.tsv"
    _stage("text score-authors", _text_score_authors, cfg, inputs, paths, digest)

    paths["network_means"] = out / "network_means.csv"
    paths["text_means"] = out / "text_means.csv"
    _stage("analyze means", _analyze_means, paths, digest)
    paths["correlations"] = out / "correlations.csv"
    _stage("analyze correlate", _analyze_correlate, paths, digest)
    paths["regression"] = out / "regression.csv"
    paths["scatter_fig"] = out / "scatter.svg"
    paths["coefficients_fig"] = out / "coefficients.svg"
    paths["separation_fig"] = out / "separation.svg"
    _stage("analyze regress", _analyze_regress, cfg, paths, digest)
    return paths


# ---------------------------------------------------------------------------
# stage bodies (file paths in, file paths out)
# ---------------------------------------------------------------------------

def _synth_network(cfg: PipelineConfig, paths: Mapping[str, Path], digest: str):
    edges, roster, anchors, truth = synth.gen_network(cfg.synth)
    outlets = synth.assign_outlets(roster.journalists, cfg.synth.n_outlets)
    io.write_edges(paths["edges"], edges, digest)
    io.write_registrations(paths["registrations"],
                           dict(roster.politically_active), digest)
    io.write_journalists(paths["journalists"], outlets, digest)
    io.write_anchors(paths["anchors"], anchors, digest)
    io.write_values(paths["truth"], truth, digest)


def _synth_corpus(cfg: PipelineConfig, paths: Mapping[str, Path], digest: str):
    # reads the network stage's files so the stage stays independently
    # re-runnable
    truth = io.load_values(paths["truth"])
    registrations = io.load_registrations(paths["registrations"])
    outlets = {a: o for a, o in io.load_journalists(paths["journalists"]).items()
               if o is not None}
    statements = synth.gen_corpus(cfg.synth, truth, registrations)
    articles = synth.gen_corpus(cfg.synth, truth, outlets)
    io.write_corpus(paths["statements"], statements, digest)
    io.write_corpus(paths["articles"], articles, digest)


def _load_roster(cfg: PipelineConfig, inputs: Mapping[str, Path]):
    edges = io.load_edges(inputs["edges"])
    registrations = io.load_registrations(inputs["registrations"])
    journalists = io.load_journalists(inputs["journalists"])
    anchors = io.load_anchors(inputs["anchors"])
    active = netideo.filter_active_users(edges, registrations, anchors, cfg.active)
    roster = RowRoster(journalists=frozenset(journalists),
                       politically_active=frozenset(active))
    return edges, roster, anchors, journalists


def _net_build_matrix(cfg: PipelineConfig, inputs: Mapping[str, Path],
                      paths: Mapping[str, Path], digest: str):
    edges, roster, anchors, _ = _load_roster(cfg, inputs)
    elites = netideo.select_elites(edges, roster, anchors, cfg.elite)
    matrix = netideo.build_matrix(edges, roster, elites)
    io.write_matrix(paths["matrix"], matrix, digest)


def _net_embed(cfg: PipelineConfig, paths: Mapping[str, Path], digest: str):
    matrix = io.load_matrix(paths["matrix"])
    space = netideo.embed_follow_matrix(matrix, cfg.k, cfg.seed, cfg.alpha)
    io.write_embeddings(paths["embeddings"], space, digest)


def _net_fit(cfg: PipelineConfig, inputs: Mapping[str, Path],
             paths: Mapping[str, Path], digest: str):
    space = io.load_embeddings(paths["embeddings"])
    anchors = io.load_anchors(inputs["anchors"])
    model = netideo.fit_projection(space, anchors, linear=cfg.linear_projection)
    netideo.write_model(paths["model"], model, digest)
    logger.info("projection fit: r_squared=%.4f penalty=%g",
                model.fit_r_squared, model.penalty_weight)


def _net_score(cfg: PipelineConfig, inputs: Mapping[str, Path],
               paths: Mapping[str, Path], digest: str):
    space = io.load_embeddings(paths["embeddings"])
    model = netideo.load_model(paths["model"])
    groups: dict[str, str] = dict(io.load_journalists(inputs["journalists"]))
    groups.update(io.load_registrations(inputs["registrations"]))
    estimates = netideo.project_rows(space, model, groups)
    io.write_estimates(paths["network_scores"], estimates, digest)


def _text_extract(cfg: PipelineConfig, inputs: Mapping[str, Path],
                  paths: Mapping[str, Path], digest: str):
    statements = io.load_corpus(inputs["statements"])
    terms = textideo.extract_phrases(statements, cfg.phrases)
    io.write_terms(paths["terms"], sorted(terms), digest)


def _text_score_terms(cfg: PipelineConfig, inputs: Mapping[str, Path],
                      paths: Mapping[str, Path], digest: str):
    statements = io.load_corpus(inputs["statements"])
    terms = io.load_terms(paths["terms"])
    table = textideo.score_terms(statements, terms, cfg.scoring)
    io.write_term_scores(paths["term_scores"], table, digest)


def _text_build_lexicon(cfg: PipelineConfig, inputs: Mapping[str, Path],
                        paths: Mapping[str, Path], digest: str):
    table = io.load_term_scores(paths["term_scores"])
    keep = None
    if inputs.get("keep"):
        keep = set(io.load_terms(inputs["keep"]))
    lexicon = textideo.build_lexicon(table, keep, cfg.scoring)
    io.write_lexicon(paths["lexicon"], lexicon, digest)


def _text_score_authors(cfg: PipelineConfig, inputs: Mapping[str, Path],
                        paths: Mapping[str, Path], digest: str):
    articles = io.load_corpus(inputs["articles"])
    lexicon = io.load_lexicon(paths["lexicon"])
    eligible = textideo.filter_authors(articles, lexicon,
                                       cfg.min_articles, cfg.min_words)
    if not eligible:
        raise DataError("no authors pass the article thresholds")
    scores = textideo.score_authors(articles, lexicon, eligible, cfg.min_words)
    groups = textideo.author_groups(articles)
    io.write_author_scores(paths["author_scores"], scores, groups, digest)


def _journalist_estimates(paths: Mapping[str, Path]) -> list[IdeologyEstimate]:
    estimates = io.load_estimates(paths["network_scores"])
    return [e for e in estimates if e.group and e.group not in ("D", "R")]


def _text_estimates(paths: Mapping[str, Path]) -> list[IdeologyEstimate]:
    scores, groups = io.load_author_scores(paths["author_scores"])
    return [IdeologyEstimate(account=s.author, score=s.score, source="text",
                             group=groups.get(s.author))
            for s in scores]


def _analyze_means(paths: Mapping[str, Path], digest: str):
    net = _journalist_estimates(paths)
    if not net:
        raise DataError("no outlet-labeled network estimates to aggregate")
    io.write_group_means(paths["network_means"], group_means(net),
                         group_sizes(net), digest)
    text = _text_estimates(paths)
    io.write_group_means(paths["text_means"], group_means(text),
                         group_sizes(text), digest)


def _analyze_correlate(paths: Mapping[str, Path], digest: str):
    net = io.load_keyed_csv(paths["network_means"])
    text = io.load_keyed_csv(paths["text_means"])
    rows = []
    for method in ("pearson", "spearman"):
        coef, n = correlate(net, text, method)
        rows.append(("outlet_means", method, coef, n))
    io.write_correlations(paths["correlations"], rows, digest)


def _analyze_regress(cfg: PipelineConfig, paths: Mapping[str, Path], digest: str):
    net = {e.account: e.score for e in io.load_estimates(paths["network_scores"])}
    scores, groups = io.load_author_scores(paths["author_scores"])
    shared = sorted(s.author for s in scores
                    if s.author in net and s.author in groups)
    if not shared:
        raise DataError("no authors with both text and network scores")
    outcome = {s.author: s.score for s in scores if s.author in set(shared)}
    predictor = {a: net[a] for a in shared}
    labels = {a: groups[a] for a in shared}
    reference = cfg.reference_outlet or _largest_group(labels)
    report = fit_fixed_effects(outcome, predictor, labels, reference,
                               predictor_name="network_score")
    io.write_regression_report(paths["regression"], report, digest)

    net_means = io.load_keyed_csv(paths["network_means"])
    text_means = io.load_keyed_csv(paths["text_means"])
    render_outlet_scatter(net_means, text_means, paths["scatter_fig"])
    render_coefficients(report, paths["coefficients_fig"])
    estimates = io.load_estimates(paths["network_scores"])
    dem = [e.score for e in estimates if e.group == "D"]
    rep = [e.score for e in estimates if e.group == "R"]
    if dem and rep:
        render_separation(dem, rep, paths["separation_fig"])
    else:
        logger.warning("skipping separation figure: no party-labeled estimates")


def _largest_group(labels: Mapping[str, str]) -> str:
    counts = Counter(labels.values())
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
