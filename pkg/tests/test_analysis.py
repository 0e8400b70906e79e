"""Group statistics, correlations, 2-sd scaling, fixed-effects OLS."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ideoscale.analysis import (
    Coefficient,
    RegressionReport,
    correlate,
    fit_fixed_effects,
    group_means,
    group_sizes,
    separation_auc,
    standardize_2sd,
)
from ideoscale.errors import DataError, NumericalError
from ideoscale.synth import gen_regression
from ideoscale.types import IdeologyEstimate


def est(account, score, group):
    return IdeologyEstimate(account=account, score=score, source="network",
                            group=group)


# ---------------------------------------------------------------------------
# group means
# ---------------------------------------------------------------------------

def test_group_means_arithmetic():
    estimates = [est("a", 1.0, "g1"), est("b", 3.0, "g1"), est("c", -2.0, "g2")]
    means = group_means(estimates)
    assert means == {"g1": 2.0, "g2": -2.0}
    assert group_sizes(estimates) == {"g1": 2, "g2": 1}


def test_group_means_three_by_four_fixture():
    estimates = [est(f"a{g}{i}", float(g * 4 + i), f"g{g}")
                 for g in range(3) for i in range(4)]
    means = group_means(estimates)
    assert means == {"g0": 1.5, "g1": 5.5, "g2": 9.5}


def test_group_means_requires_group_labels():
    with pytest.raises(DataError, match="no group"):
        group_means([est("a", 1.0, None)])


# ---------------------------------------------------------------------------
# correlations
# ---------------------------------------------------------------------------

def test_correlate_perfect_affine():
    xs = {f"k{i}": float(i) for i in range(10)}
    ys = {k: 2 * v + 1 for k, v in xs.items()}
    coef, n = correlate(xs, ys)
    assert coef == pytest.approx(1.0, abs=1e-12)
    assert n == 10
    neg, _ = correlate(xs, {k: -v for k, v in xs.items()})
    assert neg == pytest.approx(-1.0, abs=1e-12)


def test_correlate_five_point_fixture():
    xs = {f"k{i}": float(x) for i, x in enumerate([1, 2, 3, 4, 5])}
    ys = {f"k{i}": float(y) for i, y in enumerate([2, 1, 4, 3, 5])}
    pearson, n = correlate(xs, ys, "pearson")
    spearman, _ = correlate(xs, ys, "spearman")
    assert n == 5
    assert pearson == pytest.approx(0.8, abs=1e-12)
    assert spearman == pytest.approx(0.8, abs=1e-12)


def test_correlate_uses_key_intersection_only():
    xs = {"a": 1.0, "b": 2.0, "c": 3.0, "only_x": 9.0}
    ys = {"a": 1.0, "b": 2.0, "c": 3.0, "only_y": -9.0}
    coef, n = correlate(xs, ys)
    assert n == 3
    assert coef == pytest.approx(1.0, abs=1e-12)


def test_correlate_too_few_shared_keys():
    with pytest.raises(DataError, match="at least 3"):
        correlate({"a": 1.0, "b": 2.0}, {"a": 1.0, "b": 2.0})


def test_correlate_unknown_method():
    xs = {f"k{i}": float(i) for i in range(5)}
    with pytest.raises(DataError, match="unknown correlation method"):
        correlate(xs, xs, "kendall")


@given(st.lists(st.tuples(st.integers(-50, 50), st.integers(-50, 50)),
                min_size=3, max_size=40))
@settings(max_examples=60, deadline=None)
def test_correlate_symmetry_and_affine_invariance(pairs):
    xs = {f"k{i}": float(p[0]) for i, p in enumerate(pairs)}
    ys = {f"k{i}": float(p[1]) for i, p in enumerate(pairs)}
    if len(set(xs.values())) < 2 or len(set(ys.values())) < 2:
        return  # correlation undefined for constant inputs
    r_xy, _ = correlate(xs, ys)
    r_yx, _ = correlate(ys, xs)
    assert r_xy == pytest.approx(r_yx, abs=1e-12)
    shifted = {k: 3.0 * v + 7.0 for k, v in ys.items()}
    r_aff, _ = correlate(xs, shifted)
    assert r_aff == pytest.approx(r_xy, abs=1e-12)


# ---------------------------------------------------------------------------
# 2-sd standardization
# ---------------------------------------------------------------------------

def test_standardize_two_point_values():
    lo, hi = standardize_2sd([0.0, 1.0])
    assert lo == pytest.approx(-0.35355339059327373, abs=1e-12)
    assert hi == pytest.approx(0.35355339059327373, abs=1e-12)


def test_standardize_moments_contract():
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.normal(size=rng.integers(2, 200)) * rng.uniform(0.1, 9)
        if np.std(x, ddof=1) == 0:
            continue
        z = np.array(standardize_2sd(x))
        assert abs(z.mean()) < 1e-12
        assert abs(z.std(ddof=1) - 0.5) < 1e-12


def test_standardize_idempotent():
    x = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0]
    once = standardize_2sd(x)
    twice = standardize_2sd(once)
    np.testing.assert_allclose(twice, once, atol=1e-14)


def test_standardize_rejects_degenerate_inputs():
    with pytest.raises(NumericalError, match="at least 2"):
        standardize_2sd([1.0])
    with pytest.raises(NumericalError, match="zero variance"):
        standardize_2sd([2.0, 2.0, 2.0])


# ---------------------------------------------------------------------------
# separation AUC
# ---------------------------------------------------------------------------

def test_separation_auc_extremes_and_ties():
    assert separation_auc([2.0, 3.0], [0.0, 1.0]) == 1.0
    assert separation_auc([0.0, 1.0], [2.0, 3.0]) == 0.0
    assert separation_auc([1.0, 1.0], [1.0, 1.0]) == 0.5
    with pytest.raises(DataError):
        separation_auc([], [1.0])


# ---------------------------------------------------------------------------
# fixed-effects regression
# ---------------------------------------------------------------------------

def test_fixed_effects_identity_outcome_has_unit_coefficient():
    # predictor sd is exactly 0.5, so the 2-sd standardized coefficient is 1
    predictor = {"a": 0.0, "b": 0.5, "c": 1.0}
    assert np.std(list(predictor.values()), ddof=1) == pytest.approx(0.5)
    groups = {k: "g" for k in predictor}
    report = fit_fixed_effects(predictor, predictor, groups, reference="g")
    coef = report.coefficients["predictor"]
    assert coef.estimate == pytest.approx(1.0, abs=1e-12)
    assert report.coefficients["intercept"].estimate == pytest.approx(0.5, abs=1e-12)
    assert report.r_squared == pytest.approx(1.0, abs=1e-12)
    assert report.order == ("intercept", "predictor")


def test_fixed_effects_identity_outcome_general_sd():
    rng = np.random.default_rng(1)
    predictor = {f"k{i:03d}": float(v) for i, v in enumerate(rng.normal(size=40))}
    groups = {k: ("ga" if i % 2 else "gb") for i, k in enumerate(sorted(predictor))}
    report = fit_fixed_effects(predictor, predictor, groups, reference="ga")
    sd = np.std(list(predictor.values()), ddof=1)
    assert report.coefficients["predictor"].estimate == pytest.approx(2 * sd, rel=1e-9)
    assert report.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fixed_effects_planted_slope_and_offsets():
    outcome, predictor, groups, beta = gen_regression(seed=0)
    report = fit_fixed_effects(outcome, predictor, groups, reference="out00",
                               predictor_name="network_score")
    coef = report.coefficients["network_score"]
    assert coef.estimate == pytest.approx(beta, abs=0.05)
    assert coef.ci_low > 0
    assert report.n == 648
    assert report.order[0] == "intercept"
    assert sum(1 for name in report.order if name.startswith("outlet:")) == 9


def test_fixed_effects_independent_outcome_ci_covers_zero():
    rng = np.random.default_rng(7)
    covered = 0
    for _ in range(100):
        keys = [f"k{i:04d}" for i in range(1000)]
        predictor = dict(zip(keys, rng.normal(size=1000)))
        outcome = dict(zip(keys, rng.normal(size=1000)))
        groups = {k: f"g{i % 4}" for i, k in enumerate(keys)}
        report = fit_fixed_effects(outcome, predictor, groups, reference="g0")
        c = report.coefficients["predictor"]
        covered += c.ci_low <= 0.0 <= c.ci_high
    assert covered >= 90


def test_fixed_effects_residuals_orthogonal_to_design():
    outcome, predictor, groups, _ = gen_regression(n=200, seed=3)
    report = fit_fixed_effects(outcome, predictor, groups, reference="out00")
    keys = sorted(outcome)
    y = np.array([outcome[k] for k in keys])
    x_std = np.array(standardize_2sd([predictor[k] for k in keys]))
    other = sorted(set(groups.values()) - {"out00"})
    design = np.column_stack([np.ones(len(keys)), x_std]
                             + [[1.0 if groups[k] == g else 0.0 for k in keys]
                                for g in other])
    beta = np.array([report.coefficients[name].estimate for name in report.order])
    resid = y - design @ beta
    assert np.abs(design.T @ resid).max() < 1e-8


def test_fixed_effects_reference_change_invariance():
    outcome, predictor, groups, _ = gen_regression(n=200, seed=5)
    rep_a = fit_fixed_effects(outcome, predictor, groups, reference="out00")
    rep_b = fit_fixed_effects(outcome, predictor, groups, reference="out03")
    assert rep_a.coefficients["predictor"].estimate == pytest.approx(
        rep_b.coefficients["predictor"].estimate, abs=1e-9)
    assert rep_a.r_squared == pytest.approx(rep_b.r_squared, abs=1e-12)

    def fitted(report, reference):
        keys = sorted(outcome)
        x_std = np.array(standardize_2sd([predictor[k] for k in keys]))
        vals = []
        for k, x in zip(keys, x_std):
            v = (report.coefficients["intercept"].estimate
                 + report.coefficients["predictor"].estimate * x)
            name = f"outlet:{groups[k]}"
            if name in report.coefficients:
                v += report.coefficients[name].estimate
            vals.append(v)
        return np.array(vals)

    np.testing.assert_allclose(fitted(rep_a, "out00"), fitted(rep_b, "out03"),
                               atol=1e-9)


def test_fixed_effects_detects_collinear_columns():
    # predictor constant within groups: x_std is a combination of the
    # intercept and the group indicator
    outcome = {"a": 1.0, "b": 2.0, "c": 3.0, "d": 4.0, "e": 2.0, "f": 1.0}
    predictor = {"a": 0.0, "b": 0.0, "c": 0.0, "d": 1.0, "e": 1.0, "f": 1.0}
    groups = {"a": "ga", "b": "ga", "c": "ga", "d": "gb", "e": "gb", "f": "gb"}
    with pytest.raises(NumericalError, match="rank-deficient") as exc:
        fit_fixed_effects(outcome, predictor, groups, reference="ga")
    assert "predictor" in str(exc.value)
    assert "outlet:gb" in str(exc.value)


def test_fixed_effects_key_set_mismatch():
    with pytest.raises(DataError, match="share one key set"):
        fit_fixed_effects({"a": 1.0}, {"a": 1.0, "b": 2.0}, {"a": "g"}, "g")


def test_fixed_effects_missing_reference():
    data = {f"k{i}": float(i) for i in range(6)}
    groups = {k: "ga" for k in data}
    with pytest.raises(DataError, match="not present"):
        fit_fixed_effects(data, data, groups, reference="ghost")


def test_fixed_effects_drops_singleton_groups(caplog):
    rng = np.random.default_rng(11)
    keys = [f"k{i}" for i in range(9)]
    outcome = {k: float(v) for k, v in zip(keys, rng.normal(size=9))}
    predictor = {k: float(v) for k, v in zip(keys, rng.normal(size=9))}
    groups = {k: ("ga" if i < 4 else "gb" if i < 8 else "lone")
              for i, k in enumerate(keys)}
    with caplog.at_level("WARNING", logger="ideoscale.analysis"):
        report = fit_fixed_effects(outcome, predictor, groups, reference="ga")
    assert report.n == 8
    assert "outlet:lone" not in report.order
    assert any("fewer than 2" in r.getMessage() for r in caplog.records)


def test_fixed_effects_singleton_reference_rejected():
    outcome = {"a": 1.0, "b": 2.0, "c": 3.0}
    groups = {"a": "ga", "b": "ga", "c": "lone"}
    with pytest.raises(DataError, match="fewer than 2"):
        fit_fixed_effects(outcome, outcome, groups, reference="lone")


def test_fixed_effects_too_few_observations():
    outcome = {"a": 1.0, "b": 2.0}
    groups = {"a": "g", "b": "g"}
    with pytest.raises(NumericalError, match="too few observations"):
        fit_fixed_effects(outcome, outcome, groups, reference="g")


def test_coefficient_ci_must_bracket_estimate():
    with pytest.raises(NumericalError, match="bracket"):
        Coefficient(estimate=1.0, std_error=0.1, ci_low=1.5, ci_high=2.0,
                    p_value=0.01)


def test_regression_report_order_must_match_table():
    c = Coefficient(estimate=0.0, std_error=1.0, ci_low=-1.96, ci_high=1.96,
                    p_value=1.0)
    with pytest.raises(NumericalError, match="disagree"):
        RegressionReport(order=("a",), coefficients={"b": c}, r_squared=0.0,
                         n=10, reference_group="g")
