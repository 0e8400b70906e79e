"""Network-based ideology estimation.

Pipeline: select the politically active row accounts and the elite columns,
build the binary follow matrix, re-weight it cellwise to positive pointwise
mutual information, factorize with a truncated SVD so rows and columns share
one latent space, fit an additive spline regression from the anchored
columns' embeddings to their known scores, and project every row onto the
same scale.
"""
from __future__ import annotations

import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from . import splines
from .errors import DataError, NumericalError
from .io import NO_DIGEST, _require, header_line
from .types import (
    PARTIES,
    AnchorTable,
    EmbeddingSpace,
    FollowEdgeList,
    FollowMatrix,
    IdeologyEstimate,
    RowRoster,
)

logger = logging.getLogger("ideoscale.netideo")

DENSE_FALLBACK_LIMIT = 500  # below this on both sides, use a full dense SVD
OVERSAMPLE = 10
POWER_ITERATIONS = 4


@dataclass(frozen=True)
class EliteSelectionConfig:
    """Which accounts become matrix columns."""

    follow_fraction_threshold: float = 0.02
    always_include_anchored: bool = True

    def __post_init__(self):
        if not 0 < self.follow_fraction_threshold <= 1:
            raise DataError(
                f"follow_fraction_threshold must be in (0, 1]: {self.follow_fraction_threshold}")


@dataclass(frozen=True)
class ActiveUserFilter:
    """Which registered accounts count as politically active rows."""

    min_congressional_follows: int = 3
    require_party: bool = True

    def __post_init__(self):
        if self.min_congressional_follows < 0:
            raise DataError("min_congressional_follows must be nonnegative")


def filter_active_users(edges: FollowEdgeList, registrations: Mapping[str, str],
                        anchors: AnchorTable,
                        f: ActiveUserFilter = ActiveUserFilter()) -> set[tuple[str, str]]:
    """Registered accounts that follow enough anchored (congressional) accounts.

    Returns (account, party) pairs. With ``require_party`` only D/R
    registrations qualify; anchored accounts stand in for congress.
    """
    anchored = set(anchors.entries)
    counts = Counter(src for src, dst in edges.edges if dst in anchored)
    selected: set[tuple[str, str]] = set()
    for account, party in registrations.items():
        if f.require_party and party not in PARTIES:
            continue
        if counts.get(account, 0) >= f.min_congressional_follows:
            selected.add((account, party))
    return selected


def select_elites(edges: FollowEdgeList, rows: RowRoster, anchors: AnchorTable,
                  cfg: EliteSelectionConfig = EliteSelectionConfig()) -> list[str]:
    """Columns: anchored accounts plus anyone followed by more than the
    threshold fraction of row accounts (strictly more; ties at the
    threshold are excluded).

    Order is deterministic: descending follower count, ties lexicographic.
    """
    row_accounts = rows.all_accounts()
    if not row_accounts:
        raise DataError("no rows: cannot select elites from an empty roster")
    counts = Counter(dst for src, dst in edges.edges if src in row_accounts)
    cut = cfg.follow_fraction_threshold * len(row_accounts)
    selected = {target for target, c in counts.items() if c > cut}
    if cfg.always_include_anchored:
        selected |= set(anchors.entries)
    if not selected:
        raise DataError("no columns: elite selection produced an empty set")
    return sorted(selected, key=lambda a: (-counts.get(a, 0), a))


def build_matrix(edges: FollowEdgeList, rows: RowRoster,
                 elites: Sequence[str]) -> FollowMatrix:
    """Binary follow matrix over the roster rows and the elite columns.

    Rows with zero elite follows carry no signal and are dropped (the count
    is reported).
    """
    if not elites:
        raise DataError("cannot build a matrix with no elite columns")
    col_index = {a: j for j, a in enumerate(elites)}
    if len(col_index) != len(elites):
        raise DataError("duplicate accounts in elite list")
    row_accounts = sorted(rows.all_accounts())
    follows: dict[str, set[int]] = defaultdict(set)
    row_set = set(row_accounts)
    for src, dst in edges.edges:
        if src in row_set and dst in col_index:
            follows[src].add(col_index[dst])
    kept = [a for a in row_accounts if follows.get(a)]
    n_dropped = len(row_accounts) - len(kept)
    if not kept:
        raise DataError("all rows dropped: no row account follows any elite")
    if n_dropped:
        logger.warning("dropped %d row(s) with zero elite follows", n_dropped)
    cells = {(i, j) for i, account in enumerate(kept) for j in follows[account]}
    return FollowMatrix(rows=tuple(kept), cols=tuple(elites), cells=frozenset(cells))


def matrix_to_sparse(matrix: FollowMatrix) -> sp.csr_matrix:
    if matrix.cells:
        ii, jj = zip(*sorted(matrix.cells))
    else:
        ii, jj = (), ()
    data = np.ones(len(ii))
    return sp.csr_matrix((data, (ii, jj)), shape=matrix.shape)


def ppmi_transform(matrix) -> sp.csr_matrix:
    """Positive pointwise mutual information, cellwise.

    Each nonzero cell becomes max(0, ln(x * S / (r_i * c_j))) with S the
    grand total, r_i the row sum and c_j the column sum; zero cells stay
    zero. Accepts a FollowMatrix, a dense array, or a scipy sparse matrix.
    """
    if isinstance(matrix, FollowMatrix):
        m = matrix_to_sparse(matrix)
    elif sp.issparse(matrix):
        m = matrix.tocsr().astype(float)
    else:
        m = sp.csr_matrix(np.asarray(matrix, dtype=float))
    total = m.sum()
    if total <= 0:
        raise DataError("PPMI undefined for an all-zero matrix")
    row_sums = np.asarray(m.sum(axis=1)).ravel()
    col_sums = np.asarray(m.sum(axis=0)).ravel()
    coo = m.tocoo()
    pmi = np.log(coo.data * total / (row_sums[coo.row] * col_sums[coo.col]))
    out = sp.csr_matrix((np.maximum(pmi, 0.0), (coo.row, coo.col)), shape=m.shape)
    out.eliminate_zeros()
    return out


def svd_truncated(a, k: int, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rank-k SVD factors (U, sigma, V) with a deterministic sign convention.

    Small matrices go through a full dense SVD; larger ones use randomized
    subspace iteration (Gaussian test matrix with oversampling, power
    iterations with QR re-orthogonalization). Deterministic for a fixed
    seed.
    """
    n_rows, n_cols = a.shape
    if k > min(n_rows, n_cols):
        raise NumericalError(
            f"k={k} exceeds min(matrix dimensions)={min(n_rows, n_cols)}")
    if n_rows < DENSE_FALLBACK_LIMIT and n_cols < DENSE_FALLBACK_LIMIT:
        dense = a.toarray() if sp.issparse(a) else np.asarray(a, dtype=float)
        u, s, vt = np.linalg.svd(dense, full_matrices=False)
    else:
        rng = np.random.default_rng(seed)
        omega = rng.standard_normal((n_cols, min(k + OVERSAMPLE, n_cols)))
        q, _ = np.linalg.qr(a @ omega)
        for _ in range(POWER_ITERATIONS):
            q, _ = np.linalg.qr(a.T @ q)
            q, _ = np.linalg.qr(a @ q)
        b = q.T @ a if not sp.issparse(a) else (a.T @ q).T
        ub, s, vt = np.linalg.svd(np.asarray(b), full_matrices=False)
        u = q @ ub
    u, s, vt = u[:, :k], s[:k], vt[:k]
    # sign convention: largest-magnitude entry of each left vector is positive
    for j in range(k):
        pivot = np.argmax(np.abs(u[:, j]))
        if u[pivot, j] < 0:
            u[:, j] = -u[:, j]
            vt[j] = -vt[j]
    return u, s, vt.T


def truncated_svd(matrix, k: int, seed: int, row_accounts: Sequence[str],
                  col_accounts: Sequence[str], alpha: float = 0.5) -> EmbeddingSpace:
    """Factorize and place rows and columns into one shared latent space.

    Both sides are weighted symmetrically by sigma**alpha (alpha in
    {0, 0.5, 1}; 0.5 by default), so row and column vectors are directly
    comparable and the projection model transfers from columns to rows.
    """
    if alpha not in (0.0, 0.5, 1.0):
        raise DataError(f"alpha must be one of 0, 0.5, 1: {alpha}")
    n_rows, n_cols = matrix.shape
    if len(row_accounts) != n_rows or len(col_accounts) != n_cols:
        raise DataError("account labels do not match matrix shape")
    u, s, v = svd_truncated(matrix, k, seed)
    weights = s ** alpha
    row_emb = u * weights
    col_emb = v * weights
    return EmbeddingSpace(
        k=k,
        row_vectors={a: tuple(row_emb[i]) for i, a in enumerate(row_accounts)},
        col_vectors={a: tuple(col_emb[j]) for j, a in enumerate(col_accounts)},
        singular_values=tuple(float(x) for x in s),
        alpha=alpha,
    )


def embed_follow_matrix(matrix: FollowMatrix, k: int, seed: int,
                        alpha: float = 0.5) -> EmbeddingSpace:
    """PPMI re-weighting followed by the truncated SVD, labels attached."""
    return truncated_svd(ppmi_transform(matrix), k, seed,
                         matrix.rows, matrix.cols, alpha=alpha)


# ---------------------------------------------------------------------------
# Projection model (additive penalized splines, or a linear fallback)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmoothTerm:
    """One fitted univariate spline: f(x) = B(clamp(x)) @ coef - offset."""

    knots: tuple[float, ...]
    coef: tuple[float, ...]
    offset: float

    def __call__(self, x) -> np.ndarray:
        b = splines.basis_matrix(np.asarray(self.knots), x)
        return b @ np.asarray(self.coef) - self.offset


@dataclass(frozen=True)
class ProjectionModel:
    """Maps a k-dimensional latent vector onto the anchor ideology scale.

    ``kind`` is "spline" (additive penalized splines, one per dimension;
    degenerate dimensions carry no smooth) or "linear" (plain least squares
    on the k dimensions, a debugging fallback).
    """

    kind: str
    k: int
    intercept: float
    smooths: tuple[SmoothTerm | None, ...]
    slopes: tuple[float, ...]
    penalty_weight: float
    fit_r_squared: float

    def predict(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.k:
            raise NumericalError(
                f"dimension mismatch: model has k={self.k}, input has {x.shape[1]}")
        out = np.full(x.shape[0], self.intercept)
        if self.kind == "linear":
            out = out + x @ np.asarray(self.slopes)
        else:
            for d, smooth in enumerate(self.smooths):
                if smooth is not None:
                    out = out + smooth(x[:, d])
        return out

    def to_dict(self) -> dict:
        def r9(v):
            return float(f"{v:.9g}")

        smooths = [
            None if s is None else {"knots": [r9(t) for t in s.knots],
                                    "coef": [r9(c) for c in s.coef],
                                    "offset": r9(s.offset)}
            for s in self.smooths
        ]
        return {"kind": self.kind, "k": self.k, "intercept": r9(self.intercept),
                "smooths": smooths, "slopes": [r9(b) for b in self.slopes],
                "penalty_weight": r9(self.penalty_weight),
                "fit_r_squared": r9(self.fit_r_squared)}

    @classmethod
    def from_dict(cls, d: dict) -> "ProjectionModel":
        smooths = tuple(
            None if s is None else SmoothTerm(knots=tuple(s["knots"]),
                                              coef=tuple(s["coef"]),
                                              offset=float(s["offset"]))
            for s in d["smooths"])
        return cls(kind=d["kind"], k=int(d["k"]), intercept=float(d["intercept"]),
                   smooths=smooths, slopes=tuple(float(b) for b in d["slopes"]),
                   penalty_weight=float(d["penalty_weight"]),
                   fit_r_squared=float(d["fit_r_squared"]))


def fit_projection(space: EmbeddingSpace, anchors: AnchorTable,
                   linear: bool = False) -> ProjectionModel:
    """Fit score ~ intercept + sum_d f_d(column embedding dim d) on the
    anchored columns.

    Each f_d is a penalized cubic B-spline (10 basis functions, evenly
    spaced interior knots, second-difference penalty); one shared penalty
    weight is chosen by GCV over a fixed log-spaced grid. Requires at least
    2*k anchored columns. Reports in-sample R^2, floored at 0 for the
    degenerate constant-anchor case.
    """
    anchored = sorted(a for a in space.col_vectors if a in anchors.entries)
    n, need = len(anchored), 2 * space.k
    if n < need:
        raise NumericalError(
            f"too few anchored columns to fit the projection: found {n}, need >= {need}")
    x = np.array([space.col_vectors[a] for a in anchored])
    y = np.array([anchors.entries[a] for a in anchored])

    if linear:
        design = np.column_stack([np.ones(n), x])
        beta, *_ = np.linalg.lstsq(design, y, rcond=None)
        fitted = design @ beta
        return ProjectionModel(
            kind="linear", k=space.k, intercept=float(beta[0]),
            smooths=(None,) * space.k, slopes=tuple(float(b) for b in beta[1:]),
            penalty_weight=0.0, fit_r_squared=_r_squared(y, fitted))

    nb = splines.N_BASIS
    blocks: list[np.ndarray] = []
    col_means: list[np.ndarray | None] = []
    knot_sets: list[np.ndarray | None] = []
    for d in range(space.k):
        xd = x[:, d]
        lo, hi = float(xd.min()), float(xd.max())
        if hi - lo < 1e-12:
            col_means.append(None)
            knot_sets.append(None)
            continue
        knots = splines.even_knots(lo, hi)
        b = splines.basis_matrix(knots, xd)
        means = b.mean(axis=0)
        blocks.append(b - means)
        col_means.append(means)
        knot_sets.append(knots)

    active = [d for d in range(space.k) if knot_sets[d] is not None]
    if not active:
        # every dimension degenerate: intercept-only model
        intercept = float(y.mean())
        return ProjectionModel(kind="spline", k=space.k, intercept=intercept,
                               smooths=(None,) * space.k, slopes=(),
                               penalty_weight=0.0,
                               fit_r_squared=_r_squared(y, np.full(n, intercept)))

    design = np.column_stack([np.ones(n)] + blocks)
    n_params = 1 + nb * len(active)
    penalty = np.zeros((n_params, n_params))
    block_pen = splines.second_difference_penalty(nb)
    for b_idx in range(len(active)):
        lo_i = 1 + b_idx * nb
        penalty[lo_i:lo_i + nb, lo_i:lo_i + nb] = block_pen

    beta, lam = splines.gcv_select(design, y, penalty)
    fitted = design @ beta

    smooths: list[SmoothTerm | None] = []
    cursor = 1
    for d in range(space.k):
        if knot_sets[d] is None:
            smooths.append(None)
            continue
        coef = beta[cursor:cursor + nb]
        offset = float(col_means[d] @ coef)
        smooths.append(SmoothTerm(knots=tuple(float(t) for t in knot_sets[d]),
                                  coef=tuple(float(c) for c in coef),
                                  offset=offset))
        cursor += nb

    return ProjectionModel(kind="spline", k=space.k, intercept=float(beta[0]),
                           smooths=tuple(smooths), slopes=(),
                           penalty_weight=lam, fit_r_squared=_r_squared(y, fitted))


def _r_squared(y: np.ndarray, fitted: np.ndarray) -> float:
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0:
        return 0.0
    ssr = float(np.sum((y - fitted) ** 2))
    return min(1.0, max(0.0, 1.0 - ssr / sst))


def project_rows(space: EmbeddingSpace, model: ProjectionModel,
                 groups: Mapping[str, str] | None = None) -> list[IdeologyEstimate]:
    """Score every row account by applying the fitted model to its vector."""
    if model.k != space.k:
        raise NumericalError(
            f"dimension mismatch: model k={model.k}, embedding k={space.k}")
    accounts = sorted(space.row_vectors)
    x = np.array([space.row_vectors[a] for a in accounts])
    scores = model.predict(x)
    groups = groups or {}
    return [IdeologyEstimate(account=a, score=float(s), source="network",
                             group=groups.get(a))
            for a, s in zip(accounts, scores)]


# ---------------------------------------------------------------------------
# Model file format (single JSON record behind the usual header comment)
# ---------------------------------------------------------------------------

def write_model(path: str | Path, model: ProjectionModel,
                digest: str = NO_DIGEST) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header_line(digest) + "\n")
        fh.write(json.dumps(model.to_dict(), sort_keys=True) + "\n")


def load_model(path: str | Path) -> ProjectionModel:
    path = _require(path)
    with open(path, encoding="utf-8") as fh:
        payload = [line for line in fh if line.strip() and not line.startswith("#")]
    if len(payload) != 1:
        raise DataError(f"{path}: expected exactly one model record")
    try:
        return ProjectionModel.from_dict(json.loads(payload[0]))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed model file: {exc}") from exc
