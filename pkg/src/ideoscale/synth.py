"""Synthetic data generators with known ground truth.

Every generator is a pure function of (config, seed): accounts get latent
ideologies on [-0.5, 0.5], follow probabilities decay with squared
ideological distance through a logistic link with log-normal popularity
offsets, and documents mix planted left/right/neutral term pools with the
polar share growing in |theta|. Recovery of the planted structure is the
package's substitute for unavailable real-world data.
"""
from __future__ import annotations

import dataclasses
import hashlib
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import expit

from .errors import DataError
from .types import AnchorTable, Document, FollowEdgeList, RowRoster

logger = logging.getLogger("ideoscale.synth")

WORKERS_ENV = "IDEOSCALE_WORKERS"

# substream tags keep the per-purpose generators independent
_TAG_THETA = 1
_TAG_POPULARITY = 2
_TAG_EDGES = 3
_TAG_DOCS = 4
_TAG_REGRESSION = 5

_SENTENCE_LEN = 12


@dataclass(frozen=True)
class SynthConfig:
    n_journalists: int = 50
    n_active_users: int = 200
    n_elites: int = 100
    n_anchored: int = 40
    k_true: int = 1
    follow_steepness: float = 10.0
    term_pool_size: int = 900
    docs_per_author: int = 10
    seed: int = 0
    # plumbing knobs beyond the core generative parameters
    n_outlets: int = 10
    tokens_per_doc: int = 240
    polar_rate: float = 0.35
    popularity_log_mean: float = -1.0
    popularity_log_sd: float = 1.0
    anchored_popularity_boost: float = 1.5

    def __post_init__(self):
        counts = {"n_journalists": self.n_journalists,
                  "n_active_users": self.n_active_users,
                  "n_elites": self.n_elites, "n_anchored": self.n_anchored,
                  "k_true": self.k_true, "term_pool_size": self.term_pool_size,
                  "docs_per_author": self.docs_per_author,
                  "n_outlets": self.n_outlets,
                  "tokens_per_doc": self.tokens_per_doc}
        for name, value in counts.items():
            if value <= 0:
                raise DataError(f"{name} must be positive: {value}")
        if self.n_anchored > self.n_elites:
            raise DataError(
                f"n_anchored={self.n_anchored} exceeds n_elites={self.n_elites}")
        if self.follow_steepness < 0:
            raise DataError("follow_steepness must be nonnegative")
        if not 0 <= self.polar_rate <= 1:
            raise DataError(f"polar_rate must be in [0, 1]: {self.polar_rate}")


def config_from_dict(d: Mapping) -> SynthConfig:
    allowed = {f.name for f in dataclasses.fields(SynthConfig)}
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise DataError(f"unknown synth config keys: {unknown}")
    return SynthConfig(**d)


def _rng(seed: int, tag: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed % 2**63, tag, index])


def _author_key(account: str) -> int:
    # stable across rosters and worker counts
    return int.from_bytes(hashlib.sha256(account.encode()).digest()[:8], "big")


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        logger.warning("ignoring non-integer %s=%r", WORKERS_ENV, raw)
        return 1


def _latents(cfg: SynthConfig, accounts: list[str]) -> np.ndarray:
    out = np.empty((len(accounts), cfg.k_true))
    for i, account in enumerate(accounts):
        rng = _rng(cfg.seed, _TAG_THETA, _author_key(account))
        out[i] = rng.uniform(-0.5, 0.5, cfg.k_true)
    return out


def gen_network(cfg: SynthConfig) -> tuple[FollowEdgeList, RowRoster, AnchorTable, dict[str, float]]:
    """Follow graph, roster, anchors, and the ground-truth ideology map.

    P(row i follows elite j) = logistic(-steepness * ||theta_i - theta_j||^2
    + popularity_j); the popularity offset is the log of a log-normal draw,
    anchored elites get a visibility boost. Anchored elites expose their
    true ideology (the first latent coordinate) as the anchor score; rows
    with negative ideology are registered D, the rest R.
    """
    journalists = [f"j{i:05d}" for i in range(cfg.n_journalists)]
    actives = [f"u{i:05d}" for i in range(cfg.n_active_users)]
    elites = [f"e{i:05d}" for i in range(cfg.n_elites)]
    rows = journalists + actives
    anchored = elites[:cfg.n_anchored]

    row_theta = _latents(cfg, rows)
    elite_theta = _latents(cfg, elites)
    popularity = np.empty(cfg.n_elites)
    for j, account in enumerate(elites):
        rng = _rng(cfg.seed, _TAG_POPULARITY, _author_key(account))
        popularity[j] = rng.normal(cfg.popularity_log_mean, cfg.popularity_log_sd)
    popularity[:cfg.n_anchored] += cfg.anchored_popularity_boost

    def row_edges(i: int) -> list[tuple[str, str]]:
        rng = _rng(cfg.seed, _TAG_EDGES, _author_key(rows[i]))
        sqdist = ((row_theta[i] - elite_theta) ** 2).sum(axis=1)
        prob = expit(-cfg.follow_steepness * sqdist + popularity)
        hits = np.flatnonzero(rng.random(cfg.n_elites) < prob)
        return [(rows[i], elites[j]) for j in hits]

    workers = _workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_row = list(pool.map(row_edges, range(len(rows))))
    else:
        per_row = [row_edges(i) for i in range(len(rows))]
    edges = [edge for chunk in per_row for edge in chunk]

    ideology = {a: float(row_theta[i, 0]) for i, a in enumerate(rows)}
    ideology.update({a: float(elite_theta[j, 0]) for j, a in enumerate(elites)})
    roster = RowRoster(
        journalists=frozenset(journalists),
        politically_active=frozenset(
            (a, "D" if ideology[a] < 0 else "R") for a in actives))
    anchors = AnchorTable(entries={a: ideology[a] for a in anchored})
    return FollowEdgeList(edges=tuple(edges)), roster, anchors, ideology


def _base26(i: int, width: int) -> str:
    letters = []
    for _ in range(width):
        letters.append(chr(ord("a") + i % 26))
        i //= 26
    return "".join(reversed(letters))


def term_pools(cfg: SynthConfig) -> tuple[list[str], list[str], list[str]]:
    """Planted vocabularies: (left, right, neutral), all tokenizer-safe."""
    n_side = cfg.term_pool_size // 3
    n_neutral = cfg.term_pool_size - 2 * n_side
    width = 3
    while 26 ** width < max(n_side, n_neutral):
        width += 1
    left = ["lean" + _base26(i, width) for i in range(n_side)]
    right = ["rite" + _base26(i, width) for i in range(n_side)]
    neutral = ["fill" + _base26(i, width) for i in range(n_neutral)]
    return left, right, neutral


def gen_corpus(cfg: SynthConfig, truth: Mapping[str, float],
               groups: Mapping[str, str]) -> list[Document]:
    """Documents for every account in ``groups``, slanted by its ideology.

    Each document mixes a polar pool with a neutral one: the polar token
    share is polar_rate * 2|theta|, and all polar tokens come from the
    pool matching theta's sign, so a planted left term is structurally
    absent from right-leaning authors' text (and vice versa). At theta = 0
    both polar rates are zero, hence equal. Deterministic per (cfg, seed);
    each author has an independent substream.
    """
    left, right, neutral = term_pools(cfg)
    left_arr = np.array(left)
    right_arr = np.array(right)
    neutral_arr = np.array(neutral)
    docs: list[Document] = []
    for author in sorted(groups):
        if author not in truth:
            raise DataError(f"no ground-truth ideology for author {author!r}")
        theta = truth[author]
        side_arr = left_arr if theta < 0 else right_arr
        p_polar = cfg.polar_rate * min(1.0, 2.0 * abs(theta))
        rng = _rng(cfg.seed, _TAG_DOCS, _author_key(author))
        for _ in range(cfg.docs_per_author):
            n_polar = int(rng.binomial(cfg.tokens_per_doc, p_polar))
            polar = side_arr[rng.integers(0, len(side_arr), n_polar)]
            filler = neutral_arr[rng.integers(0, len(neutral_arr),
                                              cfg.tokens_per_doc - n_polar)]
            tokens = np.concatenate([polar, filler])
            tokens = [str(t) for t in tokens[rng.permutation(len(tokens))]]
            segments = tuple(
                tuple(tokens[i:i + _SENTENCE_LEN])
                for i in range(0, len(tokens), _SENTENCE_LEN))
            docs.append(Document(author=author, group=groups[author],
                                 segments=segments))
    return docs


def assign_outlets(journalists, n_outlets: int) -> dict[str, str]:
    """Round-robin outlet labels over the sorted journalist list."""
    ordered = sorted(journalists)
    if n_outlets <= 0:
        raise DataError(f"n_outlets must be positive: {n_outlets}")
    return {a: f"out{i % n_outlets:02d}" for i, a in enumerate(ordered)}


def gen_regression(n: int = 648, n_outlets: int = 10, true_beta: float = 0.35,
                   noise_sd: float = 0.25, offset_sd: float = 0.3,
                   seed: int = 0) -> tuple[dict, dict, dict, float]:
    """Planted fixed-effects problem: (outcome, predictor, groups, beta).

    outcome = true_beta * standardized(predictor) + outlet offset + noise,
    with the predictor standardized to sd one half (the same scaling the
    fitter applies), so the fitted coefficient estimates true_beta.
    """
    if n < 2 * n_outlets:
        raise DataError(f"need at least {2 * n_outlets} observations for "
                        f"{n_outlets} outlets, got {n}")
    rng = _rng(seed, _TAG_REGRESSION)
    ids = [f"a{i:05d}" for i in range(n)]
    x = rng.normal(0.0, 1.0, n)
    offsets = rng.normal(0.0, offset_sd, n_outlets)
    noise = rng.normal(0.0, noise_sd, n)
    outlet_idx = np.arange(n) % n_outlets
    x_std = (x - x.mean()) / (2.0 * x.std(ddof=1))
    y = true_beta * x_std + offsets[outlet_idx] + noise
    outcome = {ids[i]: float(y[i]) for i in range(n)}
    predictor = {ids[i]: float(x[i]) for i in range(n)}
    groups = {ids[i]: f"out{outlet_idx[i]:02d}" for i in range(n)}
    return outcome, predictor, groups, true_beta
