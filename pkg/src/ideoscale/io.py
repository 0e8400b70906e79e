"""File formats for every pipeline stage.

All formats are line-oriented UTF-8: edges as TSV, anchors as CSV, corpora
as one-JSON-object-per-line records, lexicons as TSV. Every output file
begins with a comment line recording the tool version and a configuration
digest; numeric values are serialized with 9 significant digits.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import __version__
from .errors import DataError
from .types import (
    AnchorTable,
    AuthorScore,
    Document,
    EmbeddingSpace,
    FollowEdgeList,
    FollowMatrix,
    IdeologyEstimate,
    Lexicon,
    RowRoster,
    TermScoreTable,
    TermScoringSetup,
)

logger = logging.getLogger("ideoscale.io")

NO_DIGEST = "none"


def fmt(x: float) -> str:
    """Render a float with 9 significant digits (canonical output form)."""
    if x == 0:
        return "0"
    return f"{x:.9g}"


def config_digest(params: Mapping) -> str:
    """Stable short digest of a configuration mapping."""
    blob = json.dumps(params, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def header_line(digest: str = NO_DIGEST) -> str:
    return f"# ideoscale {__version__} config={digest}"


def _data_lines(path: Path) -> Iterable[tuple[int, str]]:
    """Yield (1-based line number, line) skipping comments and blank lines."""
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, line


def _require(path: Path) -> Path:
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    return path


# ---------------------------------------------------------------------------
# Edges (TSV: source <TAB> target)
# ---------------------------------------------------------------------------

def load_edges(path: str | Path) -> FollowEdgeList:
    """Read a follow edge list, deduplicating and dropping self-edges.

    Raises DataError naming the line number on any malformed line, and on
    an empty file.
    """
    path = _require(path)
    edges: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    n_dup = 0
    n_self = 0
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        if len(parts) != 2 or not all(p and not any(c.isspace() for c in p) for p in parts):
            raise DataError(f"{path}:{lineno}: malformed edge line: {line!r}")
        src, dst = parts
        if src == dst:
            n_self += 1
            continue
        if (src, dst) in seen:
            n_dup += 1
            continue
        seen.add((src, dst))
        edges.append((src, dst))
    if not edges and n_self == 0 and n_dup == 0:
        raise DataError(f"{path}: no edges")
    if n_self:
        logger.warning("%s: dropped %d self-edge(s)", path, n_self)
    if n_dup:
        logger.warning("%s: dropped %d duplicate edge(s)", path, n_dup)
    return FollowEdgeList(edges=tuple(edges), n_duplicates_dropped=n_dup,
                          n_self_edges_dropped=n_self)


def write_edges(path: str | Path, edges: FollowEdgeList, digest: str = NO_DIGEST) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header_line(digest) + "\n")
        for src, dst in edges.edges:
            fh.write(f"{src}\t{dst}\n")


# ---------------------------------------------------------------------------
# Anchors (CSV: account,score)
# ---------------------------------------------------------------------------

def load_anchors(path: str | Path, value_range: str = "auto") -> AnchorTable:
    """Read anchor scores, translating [0, 1] inputs onto [-0.5, 0.5].

    Range handling is file-level: if any score exceeds 0.5 the whole file
    is taken to be on [0, 1] and every score is shifted by -0.5 (the count
    is reported); if any score is negative the file is already centered.
    A file entirely within [0, 0.5] is ambiguous and kept as-is.
    ``value_range`` may force ``"zero-one"`` or ``"centered"``.
    """
    path = _require(path)
    entries: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        rows = list(reader)
    if not rows:
        raise DataError(f"{path}: empty anchors file")
    header = [c.strip().lower() for c in rows[0]]
    if header[:2] != ["account", "score"]:
        raise DataError(f"{path}: expected header 'account,score', got {rows[0]!r}")
    for idx, row in enumerate(rows[1:], start=2):
        if len(row) < 2:
            raise DataError(f"{path}:{idx}: malformed anchor row: {row!r}")
        account = row[0].strip()
        try:
            score = float(row[1])
        except ValueError as exc:
            raise DataError(f"{path}:{idx}: bad score {row[1]!r}") from exc
        if not -0.5 <= score <= 1.0:
            raise DataError(f"{path}:{idx}: score outside [-0.5, 1]: {score}")
        if account in entries:
            raise DataError(f"{path}:{idx}: duplicate anchor account {account!r}")
        entries[account] = score
    if not entries:
        raise DataError(f"{path}: no anchor entries")

    scores = entries.values()
    if value_range == "auto":
        if max(scores) > 0.5:
            value_range = "zero-one"
        elif min(scores) < 0:
            value_range = "centered"
        else:
            value_range = "centered"
            logger.info("%s: all scores within [0, 0.5]; keeping as centered", path)
    n_translated = 0
    if value_range == "zero-one":
        if min(scores) < 0:
            raise DataError(f"{path}: mixed score ranges (negative value in a [0, 1] file)")
        entries = {a: s - 0.5 for a, s in entries.items()}
        n_translated = len(entries)
        logger.info("%s: translated %d score(s) from [0, 1] to [-0.5, 0.5]",
                    path, n_translated)
    elif value_range == "centered":
        if max(scores) > 0.5:
            raise DataError(f"{path}: score above 0.5 in a centered file")
    else:
        raise DataError(f"unknown anchors range {value_range!r}")
    return AnchorTable(entries=entries, n_translated=n_translated)


def write_anchors(path: str | Path, anchors: AnchorTable, digest: str = NO_DIGEST) -> None:
    """Write anchors in the canonical centered form."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header_line(digest) + "\n")
        fh.write("account,score\n")
        for account in sorted(anchors.entries):
            fh.write(f"{account},{fmt(anchors.entries[account])}\n")


# ---------------------------------------------------------------------------
# Simple keyed TSVs: registrations, journalists, ground truth
# ---------------------------------------------------------------------------

def load_registrations(path: str | Path) -> dict[str, str]:
    """account <TAB> party (D or R)."""
    path = _require(path)
    out: dict[str, str] = {}
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise DataError(f"{path}:{lineno}: malformed registration line: {line!r}")
        if parts[0] in out:
            raise DataError(f"{path}:{lineno}: duplicate registration for {parts[0]!r}")
        out[parts[0]] = parts[1]
    return out


def write_registrations(path: str | Path, registrations: Mapping[str, str],
                        digest: str = NO_DIGEST) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header_line(digest) + "\n")
        for account in sorted(registrations):
            fh.write(f"{account}\t{registrations[account]}\n")


def load_journalists(path: str | Path) -> dict[str, str | None]:
    """account [<TAB> outlet]; returns account -> outlet (None if absent)."""
    path = _require(path)
    out: dict[str, str | None] = {}
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        if len(parts) not in (1, 2) or not parts[0]:
            raise DataError(f"{path}:{lineno}: malformed journalist line: {line!r}")
        if parts[0] in out:
            raise DataError(f"{path}:{lineno}: duplicate journalist {parts[0]!r}")
        out[parts[0]] = parts[1] if len(parts) == 2 and parts[1] else None
    return out


def write_journalists(path: str | Path, outlets: Mapping[str, str | None],
                      digest: str = NO_DIGEST) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header_line(digest) + "\n")
        for account in sorted(outlets):
            outlet = outlets[account]
            fh.write(f"{account}\t{outlet}\n" if outlet else f"{account}\n")


def load_values(path: str | Path) -> dict[str, float]:
    """key <TAB> value TSV (used for ground-truth tables)."""
    path = _require(path)
    out: dict[str, float] = {}
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: malformed value line: {line!r}")
        try:
            out[parts[0]] = float(parts[1])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad value {parts[1]!r}") from exc
    return out


def write_values(path: str | Path, values: Mapping[str, float],
                 digest: str = NO_DIGEST) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header_line(digest) + "\n")
        for key in sorted(values):
            fh.write(f"{key}\t{fmt(values[key])}\n")


def load_keyed_csv(path: str | Path) -> dict[str, float]:
    """First two columns of a CSV as key -> float, skipping a header row."""
    path = _require(path)
    out: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        for row in reader:
            if len(row) < 2:
                continue
            try:
                value = float(row[1])
            except ValueError:
                continue  # header row
            out[row[0]] = value
    if not out:
        raise DataError(f"{path}: no key,value rows found")
    return out


# ---------------------------------------------------------------------------
# Corpora (JSONL: {"author": ..., "group": ..., "text": ...})
# ---------------------------------------------------------------------------

def load_corpus(path: str | Path) -> list[Document]:
    path = _require(path)
    docs: list[Document] = []
    for lineno, line in _data_lines(path):
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if not isinstance(record, dict) or not {"author", "group", "text"} <= record.keys():
            raise DataError(f"{path}:{lineno}: record must have author, group, text")
        docs.append(Document.from_text(str(record["author"]), str(record["group"]),
                                       str(record["text"])))
    if not docs:
        raise DataError(f"{path}: empty corpus")
    return docs


def write_corpus(path: str | Path, docs: Sequence[Document], digest: str = NO_DIGEST) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header_line(digest) + "\n")
        for doc in docs:
            fh.write(json.dumps({"author": doc.author, "group": doc.group,
                                 "text": doc.to_text()},
                                sort_keys=True, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# Term score tables (TSV: term, score, y_D, y_R + scoring-setup echo)
# ---------------------------------------------------------------------------

def load_term_scores(path: str | Path) -> TermScoreTable:
    path = _require(path)
    setup = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# scoring "):
                fields = dict(part.split("=", 1) for part in line.split()[2:])
                setup = TermScoringSetup(lam=float(fields["lambda"]),
                                         n_d=int(fields["n_D"]),
                                         n_r=int(fields["n_R"]),
                                         n_terms=int(fields["n_T"]))
                break
    if setup is None:
        raise DataError(f"{path}: missing '# scoring ...' setup line")
    entries: dict[str, tuple[float, int, int]] = {}
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        if len(parts) != 4:
            raise DataError(f"{path}:{lineno}: malformed term score line: {line!r}")
        term, score, y_d, y_r = parts
        if term in entries:
            raise DataError(f"{path}:{lineno}: duplicate term {term!r}")
        try:
            entries[term] = (float(score), int(y_d), int(y_r))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad numeric field") from exc
    return TermScoreTable(entries=entries, setup=setup)


def write_term_scores(path: str | Path, table: TermScoreTable,
                      digest: str = NO_DIGEST) -> None:
    s = table.setup
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header_line(digest) + "\n")
        fh.write(f"# scoring lambda={fmt(s.lam)} n_D={s.n_d} n_R={s.n_r} n_T={s.n_terms}\n")
        for term in sorted(table.entries):
            score, y_d, y_r = table.entries[term]
            fh.write(f"{term}\t{fmt(score)}\t{y_d}\t{y_r}\n")


# ---------------------------------------------------------------------------
# Term sets and lexicons (TSV)
# ---------------------------------------------------------------------------

def load_terms(path: str | Path) -> set[str]:
    """One term per line (tokens space-joined)."""
    path = _require(path)
    return {line for _, line in _data_lines(path)}


def write_terms(path: str | Path, terms: Iterable[str], digest: str = NO_DIGEST) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header_line(digest) + "\n")
        for term in sorted(terms):
            fh.write(term + "\n")


def load_lexicon(path: str | Path) -> Lexicon:
    """TSV term <TAB> side (left|right); warns if sides are unbalanced."""
    path = _require(path)
    left: set[str] = set()
    right: set[str] = set()
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        if len(parts) != 2 or parts[1] not in ("left", "right"):
            raise DataError(f"{path}:{lineno}: malformed lexicon line: {line!r}")
        (left if parts[1] == "left" else right).add(parts[0])
    lexicon = Lexicon(left_terms=frozenset(left), right_terms=frozenset(right))
    if not lexicon.balanced:
        logger.warning("%s: unbalanced lexicon (%d left, %d right)",
                       path, len(left), len(right))
    return lexicon


def write_lexicon(path: str | Path, lexicon: Lexicon, digest: str = NO_DIGEST) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header_line(digest) + "\n")
        for term in sorted(lexicon.left_terms):
            fh.write(f"{term}\tleft\n")
        for term in sorted(lexicon.right_terms):
            fh.write(f"{term}\tright\n")


# ---------------------------------------------------------------------------
# Follow matrix (tagged TSV: R/C account rows, E i j cells)
# ---------------------------------------------------------------------------

def load_matrix(path: str | Path) -> FollowMatrix:
    path = _require(path)
    rows: list[str] = []
    cols: list[str] = []
    cells: set[tuple[int, int]] = set()
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        tag = parts[0]
        if tag == "R" and len(parts) == 2:
            rows.append(parts[1])
        elif tag == "C" and len(parts) == 2:
            cols.append(parts[1])
        elif tag == "E" and len(parts) == 3:
            try:
                cells.add((int(parts[1]), int(parts[2])))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad cell indices") from exc
        else:
            raise DataError(f"{path}:{lineno}: malformed matrix line: {line!r}")
    return FollowMatrix(rows=tuple(rows), cols=tuple(cols), cells=frozenset(cells))


def write_matrix(path: str | Path, matrix: FollowMatrix, digest: str = NO_DIGEST) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header_line(digest) + "\n")
        for account in matrix.rows:
            fh.write(f"R\t{account}\n")
        for account in matrix.cols:
            fh.write(f"C\t{account}\n")
        for i, j in sorted(matrix.cells):
            fh.write(f"E\t{i}\t{j}\n")


# ---------------------------------------------------------------------------
# Embeddings (tagged TSV: A alpha, S spectrum, R/C account vectors)
# ---------------------------------------------------------------------------

def load_embeddings(path: str | Path) -> EmbeddingSpace:
    path = _require(path)
    alpha = 0.5
    singular: tuple[float, ...] | None = None
    row_vectors: dict[str, tuple[float, ...]] = {}
    col_vectors: dict[str, tuple[float, ...]] = {}
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        tag = parts[0]
        try:
            if tag == "A" and len(parts) == 2:
                alpha = float(parts[1])
            elif tag == "S":
                singular = tuple(float(v) for v in parts[1:])
            elif tag in ("R", "C") and len(parts) >= 3:
                vec = tuple(float(v) for v in parts[2:])
                (row_vectors if tag == "R" else col_vectors)[parts[1]] = vec
            else:
                raise DataError(f"{path}:{lineno}: malformed embedding line: {line!r}")
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad numeric field") from exc
    if singular is None:
        raise DataError(f"{path}: missing singular-value line")
    return EmbeddingSpace(k=len(singular), row_vectors=row_vectors,
                          col_vectors=col_vectors, singular_values=singular,
                          alpha=alpha)


def write_embeddings(path: str | Path, space: EmbeddingSpace,
                     digest: str = NO_DIGEST) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header_line(digest) + "\n")
        fh.write(f"A\t{fmt(space.alpha)}\n")
        fh.write("S\t" + "\t".join(fmt(s) for s in space.singular_values) + "\n")
        for tag, table in (("R", space.row_vectors), ("C", space.col_vectors)):
            for account in sorted(table):
                vec = "\t".join(fmt(v) for v in table[account])
                fh.write(f"{tag}\t{account}\t{vec}\n")


# ---------------------------------------------------------------------------
# Ideology estimates (TSV: account, score, source, group)
# ---------------------------------------------------------------------------

def load_estimates(path: str | Path) -> list[IdeologyEstimate]:
    path = _require(path)
    out: list[IdeologyEstimate] = []
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        if len(parts) not in (3, 4):
            raise DataError(f"{path}:{lineno}: malformed estimate line: {line!r}")
        group = parts[3] if len(parts) == 4 and parts[3] else None
        try:
            out.append(IdeologyEstimate(account=parts[0], score=float(parts[1]),
                                        source=parts[2], group=group))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad score {parts[1]!r}") from exc
    if not out:
        raise DataError(f"{path}: no estimates")
    return out


def write_estimates(path: str | Path, estimates: Sequence[IdeologyEstimate],
                    digest: str = NO_DIGEST) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header_line(digest) + "\n")
        for est in estimates:
            group = est.group or ""
            fh.write(f"{est.account}\t{fmt(est.score)}\t{est.source}\t{group}\n")


# ---------------------------------------------------------------------------
# Author scores (TSV: author, score, y_R, y_L, n_articles_used, group)
# ---------------------------------------------------------------------------

def load_author_scores(path: str | Path) -> tuple[list[AuthorScore], dict[str, str]]:
    """Returns the scores plus any outlet labels stored alongside them."""
    path = _require(path)
    scores: list[AuthorScore] = []
    groups: dict[str, str] = {}
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        if len(parts) not in (5, 6):
            raise DataError(f"{path}:{lineno}: malformed author score line: {line!r}")
        try:
            scores.append(AuthorScore(author=parts[0], score=float(parts[1]),
                                      y_r=int(parts[2]), y_l=int(parts[3]),
                                      n_articles_used=int(parts[4])))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad numeric field") from exc
        if len(parts) == 6 and parts[5]:
            groups[parts[0]] = parts[5]
    return scores, groups


def write_author_scores(path: str | Path, scores: Sequence[AuthorScore],
                        groups: Mapping[str, str] | None = None,
                        digest: str = NO_DIGEST) -> None:
    groups = groups or {}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header_line(digest) + "\n")
        for s in scores:
            group = groups.get(s.author, "")
            fh.write(f"{s.author}\t{fmt(s.score)}\t{s.y_r}\t{s.y_l}"
                     f"\t{s.n_articles_used}\t{group}\n")


# ---------------------------------------------------------------------------
# Analysis outputs (CSV)
# ---------------------------------------------------------------------------

def write_group_means(path: str | Path, means: Mapping[str, float],
                      counts: Mapping[str, int] | None = None,
                      digest: str = NO_DIGEST) -> None:
    counts = counts or {}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header_line(digest) + "\n")
        fh.write("group,mean,n\n")
        for group in sorted(means):
            fh.write(f"{group},{fmt(means[group])},{counts.get(group, '')}\n")


def write_correlations(path: str | Path,
                       rows: Sequence[tuple[str, str, float, int]],
                       digest: str = NO_DIGEST) -> None:
    """Rows are (name, method, coefficient, n)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header_line(digest) + "\n")
        fh.write("name,method,coefficient,n\n")
        for name, method, coef, n in rows:
            fh.write(f"{name},{method},{fmt(coef)},{n}\n")


def write_regression_report(path: str | Path, report, digest: str = NO_DIGEST) -> None:
    """Full coefficient table; significance marked, nothing dropped."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header_line(digest) + "\n")
        fh.write(f"# r_squared={fmt(report.r_squared)} n={report.n}"
                 f" reference={report.reference_group}\n")
        fh.write("term,estimate,std_error,ci_low,ci_high,p_value,significant\n")
        for name in report.order:
            c = report.coefficients[name]
            sig = "yes" if c.p_value < 0.05 else "no"
            fh.write(f"{name},{fmt(c.estimate)},{fmt(c.std_error)},{fmt(c.ci_low)},"
                     f"{fmt(c.ci_high)},{fmt(c.p_value)},{sig}\n")


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
