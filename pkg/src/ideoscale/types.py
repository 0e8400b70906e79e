"""Shared domain types and the canonical text normalizer.

Every pipeline stage exchanges these types (or their file renderings, see
``ideoscale.io``). All of them are immutable after construction and safe to
share across concurrent readers.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .errors import DataError

# An account id is an opaque token: nonempty, no whitespace, compared by
# exact byte equality.
_ACCOUNT_RE = re.compile(r"^\S+$")

PARTIES = ("D", "R")


def check_account_id(account: str) -> str:
    if not isinstance(account, str) or not _ACCOUNT_RE.match(account):
        raise DataError(f"invalid account id: {account!r}")
    return account


# ---------------------------------------------------------------------------
# Tokenization
# ---------------------------------------------------------------------------

_APOSTROPHES = {"'", "’"}
_HYPHENS = {"-"}
_JOINERS = _APOSTROPHES | _HYPHENS


def tokenize_segments(text: str) -> tuple[tuple[str, ...], ...]:
    """Normalize raw text into punctuation-delimited token segments.

    The canonical normalizer: lowercase, split on non-alphanumeric
    boundaries, keep pure-alphabetic tokens plus tokens with internal
    apostrophes or hyphens. Whitespace only separates tokens; any other
    non-token character closes the current segment, and so does a
    discarded token (e.g. one containing digits), so multiword phrases
    never span punctuation.

    Returns a tuple of segments, each a nonempty tuple of tokens.
    Idempotent on its own output rendered back to text.
    """
    text = text.lower()
    segments: list[tuple[str, ...]] = []
    current: list[str] = []
    word: list[str] = []
    joiners = "".join(_JOINERS)

    def end_word() -> bool:
        # Close the pending word; False means a token was discarded.
        if not word:
            return True
        tok = "".join(word).strip(joiners)
        word.clear()
        if tok and all(c.isalpha() or c in _JOINERS for c in tok):
            current.append(tok)
            return True
        return False

    def end_segment() -> None:
        if current:
            segments.append(tuple(current))
            current.clear()

    n = len(text)
    for i, c in enumerate(text):
        if c.isalnum():
            word.append(c)
        elif c in _JOINERS and word and i + 1 < n and text[i + 1].isalnum():
            word.append(c)
        elif c.isspace():
            if not end_word():
                end_segment()
        else:
            end_word()
            end_segment()
    end_word()
    end_segment()
    return tuple(segments)


def tokenize(text: str) -> tuple[str, ...]:
    """Flat token stream (segments concatenated)."""
    return tuple(t for seg in tokenize_segments(text) for t in seg)


# ---------------------------------------------------------------------------
# Network-side types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FollowEdgeList:
    """Deduplicated directed follow edges (source follows target)."""

    edges: tuple[tuple[str, str], ...]
    n_duplicates_dropped: int = 0
    n_self_edges_dropped: int = 0

    def __post_init__(self):
        seen = set()
        for src, dst in self.edges:
            check_account_id(src)
            check_account_id(dst)
            if src == dst:
                raise DataError(f"self-edge not allowed: {src}")
            if (src, dst) in seen:
                raise DataError(f"duplicate edge: {src} -> {dst}")
            seen.add((src, dst))


@dataclass(frozen=True)
class AnchorTable:
    """Known ideology score per anchor account, on [-0.5, 0.5]."""

    entries: dict[str, float]
    n_translated: int = 0

    def __post_init__(self):
        for account, score in self.entries.items():
            check_account_id(account)
            if not -0.5 <= score <= 0.5:
                raise DataError(
                    f"anchor score for {account} outside [-0.5, 0.5]: {score}")

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class RowRoster:
    """The two disjoint sets of accounts forming matrix rows."""

    journalists: frozenset[str]
    politically_active: frozenset[tuple[str, str]]  # (account, party)

    def __post_init__(self):
        active_accounts = {a for a, _ in self.politically_active}
        if len(active_accounts) != len(self.politically_active):
            raise DataError("conflicting party labels for a politically-active account")
        overlap = self.journalists & active_accounts
        if overlap:
            raise DataError(
                f"journalist and politically-active sets overlap: {sorted(overlap)[:5]}")
        for account in self.journalists:
            check_account_id(account)
        for account, party in self.politically_active:
            check_account_id(account)
            if party not in PARTIES:
                raise DataError(f"party label for {account} must be one of {PARTIES}: {party!r}")

    def all_accounts(self) -> frozenset[str]:
        return self.journalists | {a for a, _ in self.politically_active}

    def party_of(self) -> dict[str, str]:
        return {a: p for a, p in self.politically_active}

    def __len__(self) -> int:
        return len(self.journalists) + len(self.politically_active)


@dataclass(frozen=True)
class FollowMatrix:
    """Sparse binary bipartite matrix: row accounts x elite columns.

    ``cells`` holds (i, j) index pairs of the 1-entries; absence encodes 0.
    """

    rows: tuple[str, ...]
    cols: tuple[str, ...]
    cells: frozenset[tuple[int, int]]

    def __post_init__(self):
        if len(set(self.rows)) != len(self.rows):
            raise DataError("duplicate row accounts")
        if len(set(self.cols)) != len(self.cols):
            raise DataError("duplicate column accounts")
        nr, nc = len(self.rows), len(self.cols)
        for i, j in self.cells:
            if not (0 <= i < nr and 0 <= j < nc):
                raise DataError(f"cell index out of range: ({i}, {j})")

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.rows), len(self.cols))


@dataclass(frozen=True)
class EmbeddingSpace:
    """k-dimensional row and column vectors sharing one latent space.

    Row/column vectors are the SVD factors weighted by ``sigma ** alpha``
    on each side, so both live in the same space; ``singular_values`` keeps
    the unweighted spectrum for reconstruction and diagnostics.
    """

    k: int
    row_vectors: dict[str, tuple[float, ...]]
    col_vectors: dict[str, tuple[float, ...]]
    singular_values: tuple[float, ...]
    alpha: float = 0.5

    def __post_init__(self):
        if self.k <= 0:
            raise DataError(f"k must be positive: {self.k}")
        if len(self.singular_values) != self.k:
            raise DataError("singular value count does not match k")
        sv = self.singular_values
        if any(s < 0 for s in sv) or any(sv[i] < sv[i + 1] - 1e-12 for i in range(len(sv) - 1)):
            raise DataError("singular values must be nonincreasing and nonnegative")
        for table in (self.row_vectors, self.col_vectors):
            for account, vec in table.items():
                if len(vec) != self.k:
                    raise DataError(f"vector for {account} has length {len(vec)}, expected {self.k}")


# ---------------------------------------------------------------------------
# Text-side types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Document:
    """One normalized document: author, group label, token segments.

    ``group`` is the party for statement corpora and the outlet for article
    corpora. Tokens are stored per punctuation-delimited segment so phrase
    operations never cross a boundary; ``tokens`` flattens them and
    ``word_count`` is its length.
    """

    author: str
    group: str
    segments: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        check_account_id(self.author)
        for seg in self.segments:
            if not seg:
                raise DataError("empty segment in document")
            for tok in seg:
                if not tok or tok != tok.lower():
                    raise DataError(f"token must be nonempty lowercase: {tok!r}")

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(t for seg in self.segments for t in seg)

    @property
    def word_count(self) -> int:
        return sum(len(seg) for seg in self.segments)

    @classmethod
    def from_text(cls, author: str, group: str, text: str) -> "Document":
        return cls(author=author, group=group, segments=tokenize_segments(text))

    def to_text(self) -> str:
        """Render back to normalized text (segments joined by periods)."""
        return ". ".join(" ".join(seg) for seg in self.segments)


@dataclass(frozen=True)
class TermScoringSetup:
    """Counts and smoothing constants a term score is computed from."""

    lam: float
    n_d: int
    n_r: int
    n_terms: int

    def __post_init__(self):
        if self.lam <= 0:
            raise DataError(f"lambda must be positive: {self.lam}")


@dataclass(frozen=True)
class TermScoreTable:
    """Scored terms: term -> (score, y_D, y_R) plus the scoring setup."""

    entries: dict[str, tuple[float, int, int]]  # term -> (score, y_D, y_R)
    setup: TermScoringSetup

    def __post_init__(self):
        for term, (score, y_d, y_r) in self.entries.items():
            if not 0 <= y_d <= self.setup.n_d:
                raise DataError(f"y_D for {term!r} outside [0, |D|]: {y_d}")
            if not 0 <= y_r <= self.setup.n_r:
                raise DataError(f"y_R for {term!r} outside [0, |R|]: {y_r}")

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class Lexicon:
    """Curated balanced sets of left- and right-leaning terms."""

    left_terms: frozenset[str]
    right_terms: frozenset[str]

    def __post_init__(self):
        if self.left_terms & self.right_terms:
            raise DataError("lexicon sides are not disjoint")

    @property
    def balanced(self) -> bool:
        return len(self.left_terms) == len(self.right_terms)


@dataclass(frozen=True)
class AuthorScore:
    """Per-author lexicon-count log-odds score over qualifying articles."""

    author: str
    y_r: int
    y_l: int
    score: float
    n_articles_used: int

    def __post_init__(self):
        if self.y_r < 0 or self.y_l < 0:
            raise DataError("term counts must be nonnegative")


@dataclass(frozen=True)
class IdeologyEstimate:
    """Scalar ideology score for one account, tagged by its source."""

    account: str
    score: float
    source: str  # "network" or "text"
    group: str | None = None

    def __post_init__(self):
        check_account_id(self.account)
        if self.source not in ("network", "text"):
            raise DataError(f"source must be 'network' or 'text': {self.source!r}")
        if not math.isfinite(self.score):
            raise DataError(f"score for {self.account} is not finite: {self.score}")
