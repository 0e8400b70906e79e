"""Statistical analyses relating the two ideology estimates.

Group aggregation, correlations over shared keys, two-standard-deviation
predictor scaling, and an ordinary least squares regression of text
ideology on network ideology with per-outlet fixed effects.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
import scipy.stats

from .errors import DataError, NumericalError
from .types import IdeologyEstimate

logger = logging.getLogger("ideoscale.analysis")

Z_95 = 1.96  # two-sided 95% normal quantile, as conventionally rounded


@dataclass(frozen=True)
class Coefficient:
    estimate: float
    std_error: float
    ci_low: float
    ci_high: float
    p_value: float

    def __post_init__(self):
        if not self.ci_low <= self.estimate <= self.ci_high:
            raise NumericalError(
                f"confidence interval [{self.ci_low}, {self.ci_high}] does not "
                f"bracket the estimate {self.estimate}")


@dataclass(frozen=True)
class RegressionReport:
    order: tuple[str, ...]
    coefficients: dict[str, Coefficient]
    r_squared: float
    n: int
    reference_group: str

    def __post_init__(self):
        if set(self.order) != set(self.coefficients):
            raise NumericalError("coefficient order and table disagree")


def group_means(estimates: list[IdeologyEstimate]) -> dict[str, float]:
    """Arithmetic mean score per group label."""
    sums: Counter = Counter()
    counts: Counter = Counter()
    for est in estimates:
        if est.group is None:
            raise DataError(f"estimate for {est.account!r} carries no group label")
        sums[est.group] += est.score
        counts[est.group] += 1
    return {g: sums[g] / counts[g] for g in sums}


def group_sizes(estimates: list[IdeologyEstimate]) -> dict[str, int]:
    return dict(Counter(est.group for est in estimates))


def correlate(xs: dict, ys: dict, method: str = "pearson") -> tuple[float, int]:
    """Correlation over the key intersection; returns (coefficient, n)."""
    shared = sorted(set(xs) & set(ys))
    if len(shared) < 3:
        raise DataError(f"need at least 3 shared keys to correlate, found {len(shared)}")
    a = np.array([xs[k] for k in shared], dtype=float)
    b = np.array([ys[k] for k in shared], dtype=float)
    if method == "pearson":
        coef = scipy.stats.pearsonr(a, b).statistic
    elif method == "spearman":
        coef = scipy.stats.spearmanr(a, b).statistic
    else:
        raise DataError(f"unknown correlation method: {method!r}")
    return float(coef), len(shared)


def standardize_2sd(values) -> list[float]:
    """Center and divide by twice the sample standard deviation.

    The rescaled values have mean 0 and standard deviation one half, so a
    unit change in a standardized predictor reads as a low-vs-high (2 sd)
    contrast.
    """
    x = np.asarray(list(values), dtype=float)
    if x.size < 2:
        raise NumericalError(f"need at least 2 values to standardize, got {x.size}")
    sd = float(x.std(ddof=1))
    if sd == 0:
        raise NumericalError("zero variance: cannot standardize a constant input")
    return [float(v) for v in (x - x.mean()) / (2.0 * sd)]


def separation_auc(pos, neg) -> float:
    """Rank-based AUC: probability a positive-group score exceeds a
    negative-group one, ties counted half."""
    pos = np.asarray(list(pos), dtype=float)
    neg = np.asarray(list(neg), dtype=float)
    if pos.size == 0 or neg.size == 0:
        raise DataError("both groups must be nonempty for AUC")
    ranks = scipy.stats.rankdata(np.concatenate([pos, neg]))
    rank_sum = ranks[:pos.size].sum()
    u = rank_sum - pos.size * (pos.size + 1) / 2.0
    return float(u / (pos.size * neg.size))


def fit_fixed_effects(outcome: dict, predictor: dict, groups: dict,
                      reference: str,
                      predictor_name: str = "predictor") -> RegressionReport:
    """OLS of outcome on the 2-sd standardized predictor plus outlet
    indicators (reference outlet absorbed by the intercept).

    Classical homoskedastic standard errors, 95% CIs from normal
    quantiles, two-sided normal p-values. Groups with fewer than two
    members are dropped with a warning. Deterministic throughout.
    """
    if not (set(outcome) == set(predictor) == set(groups)):
        raise DataError(
            f"outcome, predictor and groups must share one key set "
            f"(sizes {len(outcome)}, {len(predictor)}, {len(groups)})")
    if reference not in set(groups.values()):
        raise DataError(f"reference group {reference!r} not present")

    sizes = Counter(groups.values())
    small = {g for g, c in sizes.items() if c < 2}
    if small:
        logger.warning("dropping %d group(s) with fewer than 2 members: %s",
                       len(small), sorted(small))
    keys = sorted(k for k in outcome if groups[k] not in small)
    if not keys:
        raise DataError("no observations left after dropping small groups")
    if reference in small:
        raise DataError(f"reference group {reference!r} has fewer than 2 members")

    y = np.array([outcome[k] for k in keys], dtype=float)
    x_std = np.array(standardize_2sd([predictor[k] for k in keys]))
    labels = [groups[k] for k in keys]
    other = sorted(set(labels) - {reference})
    names = ["intercept", predictor_name] + [f"outlet:{g}" for g in other]
    design = np.column_stack(
        [np.ones(len(keys)), x_std]
        + [np.array([1.0 if lab == g else 0.0 for lab in labels]) for g in other])

    n, p = design.shape
    if n <= p:
        raise NumericalError(f"too few observations ({n}) for {p} coefficients")
    _check_rank(design, names)

    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    fitted = design @ beta
    resid = y - fitted
    ssr = float(resid @ resid)
    sst = float(np.sum((y - y.mean()) ** 2))
    sigma2 = ssr / (n - p)
    cov = sigma2 * np.linalg.inv(design.T @ design)
    se = np.sqrt(np.diag(cov))

    coefficients = {}
    for name, b, s in zip(names, beta, se):
        z = b / s if s > 0 else math.inf
        coefficients[name] = Coefficient(
            estimate=float(b), std_error=float(s),
            ci_low=float(b - Z_95 * s), ci_high=float(b + Z_95 * s),
            p_value=float(math.erfc(abs(z) / math.sqrt(2.0))))
    r_squared = 1.0 - ssr / sst if sst > 0 else 0.0
    return RegressionReport(order=tuple(names), coefficients=coefficients,
                            r_squared=r_squared, n=n, reference_group=reference)


def _check_rank(design: np.ndarray, names: list[str]) -> None:
    """Raise with the offending column names when the design is singular."""
    u, s, vt = np.linalg.svd(design, full_matrices=False)
    tol = s[0] * max(design.shape) * np.finfo(float).eps
    if s[-1] > tol:
        return
    null = vt[-1]
    involved = [names[i] for i in np.flatnonzero(np.abs(null) > 1e-8)]
    raise NumericalError(f"rank-deficient design: collinear columns {involved}")
