"""Text-based ideology estimation.

Two halves. Lexicon construction: extract candidate phrases from a
party-labeled statement corpus, score each term by a smoothed log-odds
contrast of how many distinct authors per party use it, and curate the
extremes into a balanced left/right lexicon. Author scoring: count lexicon
term occurrences in each author's qualifying articles and take the
smoothed log-ratio of right to left counts.
"""
from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import DataError, NumericalError
from .types import PARTIES, AuthorScore, Document, Lexicon, TermScoreTable, TermScoringSetup

logger = logging.getLogger("ideoscale.textideo")

# Compact English function-word list. Boundary filtering only needs the
# high-frequency closed-class words; content words must never appear here.
STOPWORDS = frozenset("""
a about above after again against all am an and any are as at be because
been before being below between both but by could did do does doing down
during each few for from further had has have having he her here hers
herself him himself his how i if in into is it its itself just me more
most my myself no nor not now of off on once only or other our ours
ourselves out over own same she should so some such than that the their
theirs them themselves then there these they this those through to too
under until up very was we were what when where which while who whom why
will with you your yours yourself yourselves
""".split())


@dataclass(frozen=True)
class PhraseConfig:
    """Candidate-phrase extraction settings."""

    max_ngram: int = 4
    min_authors: int = 2
    stopword_list: frozenset[str] = STOPWORDS
    use_pos_patterns: bool = False

    def __post_init__(self):
        if self.max_ngram < 1:
            raise DataError(f"max_ngram must be >= 1: {self.max_ngram}")
        if self.min_authors < 1:
            raise DataError(f"min_authors must be >= 1: {self.min_authors}")


@dataclass(frozen=True)
class ScoringConfig:
    """Term scoring and lexicon sizing settings.

    ``lam`` is the additive smoothing weight in the log-odds score.
    ``corrected_denominator`` switches to the plain per-party author-odds
    form ln((y+lam)/(n-y+lam)) for sensitivity checks; the default keeps
    the (|T|-1)*lam pooled denominator.
    """

    lam: float = 1.0
    top_n_per_side: int = 100
    lexicon_size_per_side: int = 57
    corrected_denominator: bool = False
    allow_oversized_lexicon: bool = False

    def __post_init__(self):
        if self.lam <= 0:
            raise DataError(f"lambda must be positive: {self.lam}")
        if self.top_n_per_side < 1 or self.lexicon_size_per_side < 1:
            raise DataError("lexicon sizes must be positive")
        if (self.lexicon_size_per_side > self.top_n_per_side
                and not self.allow_oversized_lexicon):
            raise DataError(
                f"lexicon_size_per_side={self.lexicon_size_per_side} exceeds "
                f"top_n_per_side={self.top_n_per_side}; set allow_oversized_lexicon "
                "to override")


def extract_phrases(corpus: Sequence[Document],
                    cfg: PhraseConfig = PhraseConfig()) -> set[str]:
    """Candidate terms: 1..max_ngram grams within sentence segments.

    A term never starts or ends with a stopword (interior stopwords are
    fine: "waters of the united states" survives, "of the" does not),
    never crosses a segment boundary, and must be used by at least
    min_authors distinct authors.
    """
    if not corpus:
        raise DataError("cannot extract phrases from an empty corpus")
    if cfg.use_pos_patterns:
        raise NotImplementedError("POS-pattern extraction is a future-work slot")
    stop = cfg.stopword_list
    max_n = cfg.max_ngram

    docs_by_author: dict[str, list[Document]] = defaultdict(list)
    for doc in corpus:
        docs_by_author[doc.author].append(doc)

    support: Counter[str] = Counter()
    for author in sorted(docs_by_author):
        seen: set[str] = set()
        for doc in docs_by_author[author]:
            for seg in doc.segments:
                n_tokens = len(seg)
                for i in range(n_tokens):
                    if seg[i] in stop:
                        continue
                    for j in range(i + 1, min(i + max_n, n_tokens) + 1):
                        if seg[j - 1] in stop:
                            continue
                        seen.add(" ".join(seg[i:j]))
        support.update(seen)
    return {term for term, n in support.items() if n >= cfg.min_authors}


def _author_term_presence(docs: Iterable[Document], terms: set[str],
                          max_n: int) -> set[str]:
    """Terms (from the candidate set) this author uses at least once."""
    present: set[str] = set()
    for doc in docs:
        for seg in doc.segments:
            n_tokens = len(seg)
            for i in range(n_tokens):
                for j in range(i + 1, min(i + max_n, n_tokens) + 1):
                    gram = " ".join(seg[i:j])
                    if gram in terms:
                        present.add(gram)
    return present


def score_terms(corpus: Sequence[Document], terms: Iterable[str],
                cfg: ScoringConfig = ScoringConfig()) -> TermScoreTable:
    """Smoothed log-odds score per term from distinct-author usage counts.

    y_R (y_D) is the number of distinct R (D) authors whose documents
    contain the term at least once; frequency of use within an author is
    deliberately ignored. The score is

        s(t) = ln((y_R + lam) / (n_R + (n_T - 1) lam - y_R))
             - ln((y_D + lam) / (n_D + (n_T - 1) lam - y_D))

    with n_T the number of terms scored. Positive means right-leaning.
    """
    term_set = set(terms)
    if not term_set:
        raise DataError("no terms to score")
    docs_by_author: dict[str, list[Document]] = defaultdict(list)
    party_of: dict[str, str] = {}
    for doc in corpus:
        docs_by_author[doc.author].append(doc)
        prev = party_of.setdefault(doc.author, doc.group)
        if prev != doc.group:
            raise DataError(
                f"author {doc.author!r} appears under two groups: {prev!r}, {doc.group!r}")
    for author, party in party_of.items():
        if party not in PARTIES:
            raise DataError(f"author {author!r} has group {party!r}, expected one of {PARTIES}")
    n_by_party = Counter(party_of.values())
    for party in PARTIES:
        if n_by_party[party] == 0:
            raise DataError(f"no authors with party {party!r} in the corpus")

    max_n = max(len(t.split()) for t in term_set)
    y_d: Counter[str] = Counter()
    y_r: Counter[str] = Counter()
    for author in sorted(docs_by_author):
        present = _author_term_presence(docs_by_author[author], term_set, max_n)
        bucket = y_d if party_of[author] == "D" else y_r
        bucket.update(present)

    setup = TermScoringSetup(lam=cfg.lam, n_d=n_by_party["D"], n_r=n_by_party["R"],
                             n_terms=len(term_set))
    entries = {
        term: (term_score(y_r[term], y_d[term], setup,
                          corrected=cfg.corrected_denominator),
               y_d[term], y_r[term])
        for term in term_set
    }
    return TermScoreTable(entries=entries, setup=setup)


def term_score(y_r: int, y_d: int, setup: TermScoringSetup,
               corrected: bool = False) -> float:
    """Evaluate the log-odds contrast for one term's author counts."""
    lam = setup.lam
    if corrected:
        den_r = setup.n_r - y_r + lam
        den_d = setup.n_d - y_d + lam
    else:
        den_r = setup.n_r + (setup.n_terms - 1) * lam - y_r
        den_d = setup.n_d + (setup.n_terms - 1) * lam - y_d
    if den_r <= 0 or den_d <= 0:
        raise NumericalError(
            f"degenerate log-odds denominator (y_R={y_r}, y_D={y_d}, "
            f"n_R={setup.n_r}, n_D={setup.n_d}, n_T={setup.n_terms}, lambda={lam})")
    return math.log((y_r + lam) / den_r) - math.log((y_d + lam) / den_d)


def build_lexicon(table: TermScoreTable, curated_keep: set[str] | None = None,
                  cfg: ScoringConfig = ScoringConfig()) -> Lexicon:
    """Balanced lexicon from the scored-term extremes.

    Per side, rank by score (most negative first on the left, most
    positive first on the right; ties lexicographic), restrict to the
    curated keep-list when one is supplied, and take the first
    lexicon_size_per_side survivors. Terms past the top_n_per_side rank
    are eligible only as back-fill for curation losses.
    """
    if not table.entries:
        raise DataError("cannot build a lexicon from an empty score table")
    left_pool = sorted(
        ((score, term) for term, (score, _, _) in table.entries.items() if score < 0),
        key=lambda p: (p[0], p[1]))
    right_pool = sorted(
        ((score, term) for term, (score, _, _) in table.entries.items() if score > 0),
        key=lambda p: (-p[0], p[1]))

    def pick(pool: list, side: str) -> list[str]:
        ranked = [term for _, term in pool]
        if curated_keep is not None:
            ranked = [t for t in ranked if t in curated_keep]
        chosen = ranked[:cfg.lexicon_size_per_side]
        if len(chosen) < cfg.lexicon_size_per_side:
            raise DataError(
                f"{side} side has only {len(chosen)} eligible terms after "
                f"back-fill, need {cfg.lexicon_size_per_side} "
                f"({len(pool)} scored on that side)")
        return chosen

    left = pick(left_pool, "left")
    right = pick(right_pool, "right")
    return Lexicon(left_terms=frozenset(left), right_terms=frozenset(right))


def _qualifying(docs: Iterable[Document], min_words: int) -> list[Document]:
    return [d for d in docs if d.word_count > min_words]


def count_lexicon_terms(doc: Document, side_of: Mapping[str, str],
                        max_n: int) -> Counter:
    """Occurrences per lexicon side in one document.

    Matching is greedy longest-match, non-overlapping, left to right
    within each segment, so a phrase never also counts through its
    sub-phrases.
    """
    counts: Counter = Counter()
    for seg in doc.segments:
        n_tokens = len(seg)
        i = 0
        while i < n_tokens:
            for n in range(min(max_n, n_tokens - i), 0, -1):
                gram = " ".join(seg[i:i + n])
                side = side_of.get(gram)
                if side is not None:
                    counts[side] += 1
                    i += n
                    break
            else:
                i += 1
    return counts


def filter_authors(corpus: Sequence[Document], lexicon: Lexicon,
                   min_articles: int = 10, min_words: int = 200) -> set[str]:
    """Authors with enough long articles that use the lexicon at all.

    An article qualifies with strictly more than min_words words; an
    author needs at least min_articles qualifying articles and at least
    one lexicon-term occurrence within them.
    """
    side_of = _side_map(lexicon)
    max_n = _max_term_len(lexicon)
    docs_by_author: dict[str, list[Document]] = defaultdict(list)
    for doc in corpus:
        docs_by_author[doc.author].append(doc)
    eligible: set[str] = set()
    for author, docs in docs_by_author.items():
        qualifying = _qualifying(docs, min_words)
        if len(qualifying) < min_articles:
            continue
        if any(count_lexicon_terms(d, side_of, max_n).total() for d in qualifying):
            eligible.add(author)
    return eligible


def score_authors(corpus: Sequence[Document], lexicon: Lexicon,
                  eligible: set[str], min_words: int = 200) -> list[AuthorScore]:
    """Smoothed log-ratio of right to left lexicon use per eligible author.

    s(j) = ln((y_R + 1) / (y_L + 1)) over occurrence counts in the
    author's qualifying articles. Output sorted by author.
    """
    corpus_authors = {doc.author for doc in corpus}
    missing = eligible - corpus_authors
    if missing:
        raise DataError(
            f"eligible authors absent from the corpus: {sorted(missing)[:5]}")
    side_of = _side_map(lexicon)
    max_n = _max_term_len(lexicon)
    docs_by_author: dict[str, list[Document]] = defaultdict(list)
    for doc in corpus:
        if doc.author in eligible:
            docs_by_author[doc.author].append(doc)
    scores = []
    for author in sorted(eligible):
        qualifying = _qualifying(docs_by_author[author], min_words)
        y_r = y_l = 0
        for doc in qualifying:
            counts = count_lexicon_terms(doc, side_of, max_n)
            y_r += counts["right"]
            y_l += counts["left"]
        scores.append(AuthorScore(author=author, y_r=y_r, y_l=y_l,
                                  score=math.log((y_r + 1) / (y_l + 1)),
                                  n_articles_used=len(qualifying)))
    return scores


def author_groups(corpus: Sequence[Document]) -> dict[str, str]:
    """Most common group label per author, ties broken lexicographically."""
    tally: dict[str, Counter] = defaultdict(Counter)
    for doc in corpus:
        tally[doc.author][doc.group] += 1
    return {author: min(groups.items(), key=lambda kv: (-kv[1], kv[0]))[0]
            for author, groups in tally.items()}


def _side_map(lexicon: Lexicon) -> dict[str, str]:
    side_of = {t: "left" for t in lexicon.left_terms}
    side_of.update({t: "right" for t in lexicon.right_terms})
    if not side_of:
        raise DataError("empty lexicon")
    return side_of


def _max_term_len(lexicon: Lexicon) -> int:
    return max(len(t.split()) for t in lexicon.left_terms | lexicon.right_terms)
