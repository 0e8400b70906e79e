"""Penalized cubic B-spline smoothing: basis construction, second-difference
penalties, and GCV-selected penalized least squares.

This is the machinery behind the additive projection model: each latent
dimension gets one univariate smooth, all sharing a single penalty weight
chosen by generalized cross-validation on a fixed log-spaced grid.
"""
from __future__ import annotations

import numpy as np
from scipy.interpolate import BSpline

from .errors import NumericalError

DEGREE = 3
N_BASIS = 10
LAMBDA_GRID = np.logspace(-4.0, 4.0, 20)


def even_knots(lo: float, hi: float, n_basis: int = N_BASIS,
               degree: int = DEGREE) -> np.ndarray:
    """Clamped knot vector with evenly spaced interior knots on [lo, hi].

    Yields exactly ``n_basis`` B-spline basis functions of the given degree.
    """
    if not hi > lo:
        raise NumericalError(f"knot range is degenerate: [{lo}, {hi}]")
    n_interior = n_basis - degree - 1
    if n_interior < 0:
        raise NumericalError(f"n_basis={n_basis} too small for degree {degree}")
    interior = np.linspace(lo, hi, n_interior + 2)[1:-1]
    return np.concatenate([[lo] * (degree + 1), interior, [hi] * (degree + 1)])


def basis_matrix(knots: np.ndarray, x: np.ndarray, degree: int = DEGREE) -> np.ndarray:
    """Evaluate the B-spline basis at x, clamping x into the knot range.

    Clamping makes evaluation outside the training range constant at the
    boundary value, which keeps projections of out-of-range points bounded.
    """
    x = np.clip(np.asarray(x, dtype=float), knots[0], knots[-1])
    return BSpline.design_matrix(x, knots, degree).toarray()


def second_difference_penalty(n_basis: int) -> np.ndarray:
    """Penalty matrix D2'D2 for second differences of the coefficients."""
    d2 = np.zeros((n_basis - 2, n_basis))
    for i in range(n_basis - 2):
        d2[i, i:i + 3] = (1.0, -2.0, 1.0)
    return d2.T @ d2


def penalized_lstsq(design: np.ndarray, y: np.ndarray, penalty: np.ndarray,
                    lam: float) -> tuple[np.ndarray, float]:
    """Solve min ||y - Xb||^2 + lam * b'Pb; returns (b, trace of hat matrix).

    Uses a minimum-norm solve so jointly unpenalized, unidentifiable
    directions (e.g. the within-block constant that centering removes) are
    pinned deterministically without affecting fitted values.
    """
    a = design.T @ design + lam * penalty
    z, *_ = np.linalg.lstsq(a, design.T, rcond=None)
    beta = z @ y
    edof = float(np.sum(design * z.T))
    return beta, edof


def gcv_select(design: np.ndarray, y: np.ndarray, penalty: np.ndarray,
               grid: np.ndarray = LAMBDA_GRID) -> tuple[np.ndarray, float]:
    """Pick the penalty weight minimizing GCV = n*SSR / (n - edof)^2.

    Returns (coefficients, chosen lambda). Grid entries with edof >= n are
    skipped; ties resolve to the smallest lambda.
    """
    n = len(y)
    best = None
    for lam in grid:
        beta, edof = penalized_lstsq(design, y, penalty, float(lam))
        if edof >= n:
            continue
        ssr = float(np.sum((y - design @ beta) ** 2))
        gcv = n * ssr / (n - edof) ** 2
        if best is None or gcv < best[0] - 1e-15:
            best = (gcv, beta, float(lam))
    if best is None:
        raise NumericalError("GCV grid exhausted: effective dof >= n at every penalty")
    return best[1], best[2]
