import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hcrspread.basis import enumerate_basis
from hcrspread.errors import InsufficientDataError, InvalidDensityError, UnderdeterminedError
from hcrspread.evaluation import (
    EvalReport,
    cross_validate,
    log_likelihood,
    make_folds,
    sorted_density_curve,
)
from hcrspread.model import calibrate, density_at, fit, predict_raw
from hcrspread.normalize import normalize_columns

BX = enumerate_basis("B((2,2),3,2)")
BY = enumerate_basis("B((4),4,1)")


def test_folds_one_point_each():
    plan = make_folds(10, 10, seed=3)
    assert sorted(plan.assignment.tolist()) == list(range(10))


def test_fold_sizes_pigeonhole():
    assert sorted(make_folds(23, 10, 5).sizes().tolist()) == [2] * 7 + [3] * 3


@given(st.integers(2, 500), st.integers(2, 20), st.integers(0, 2**32 - 1))
def test_fold_balance_and_determinism(n, k, seed):
    if n < k:
        with pytest.raises(InsufficientDataError):
            make_folds(n, k, seed)
        return
    plan = make_folds(n, k, seed)
    sizes = plan.sizes()
    assert sizes.max() - sizes.min() <= 1 and sizes.sum() == n
    assert np.array_equal(plan.assignment, make_folds(n, k, seed).assignment)


def test_log_likelihood_examples():
    assert log_likelihood(np.ones(7)) == 0.0
    assert log_likelihood(np.full(4, math.e)) == pytest.approx(1.0)
    assert math.exp(1.2) == pytest.approx(3.3, abs=0.05)


def test_log_likelihood_rejects_nonpositive():
    with pytest.raises(InvalidDensityError):
        log_likelihood([1.0, 0.0])


@pytest.fixture
def small_data(rng):
    x = rng.random((300, 2))
    y = np.clip(0.6 * x[:, 0] + 0.4 * rng.random(300), 0, 1)
    return normalize_columns(x)[0], normalize_columns(y)[0][:, 0]


def test_cross_validate_matches_pointwise_loop(small_data):
    x, y = small_data
    folds = make_folds(len(y), 5, seed=11)
    report = cross_validate(x, y, BX, BY, folds, resolution=50, threshold=0.05)
    expected = np.empty(len(y))
    for f in range(5):
        test = folds.assignment == f
        model = fit(BX, BY, x[~test], y[~test])
        for i in np.flatnonzero(test):
            expected[i] = density_at(calibrate(predict_raw(model, x[i]), 50, 0.05), y[i])
    got = np.empty(len(y))
    got[report.index] = report.density
    np.testing.assert_allclose(got, expected, rtol=1e-12)
    assert report.log_likelihood == pytest.approx(np.mean(np.log(expected)), abs=1e-12)


def test_report_ordering_and_reproducibility(small_data):
    x, y = small_data
    folds = make_folds(len(y), 10, seed=2)
    a = cross_validate(x, y, BX, BY, folds)
    b = cross_validate(x, y, BX, BY, folds)
    assert np.all(np.diff(a.fold) >= 0)
    for f in range(10):
        assert np.all(np.diff(a.index[a.fold == f]) > 0)
    assert a.log_likelihood == b.log_likelihood
    assert np.array_equal(a.density, b.density)
    assert a.exp_ll == pytest.approx(math.exp(a.log_likelihood))


def test_log_likelihood_permutation_invariant(small_data, rng):
    x, y = small_data
    report = cross_validate(x, y, BX, BY, make_folds(len(y), 10, 0))
    assert log_likelihood(rng.permutation(report.density)) == pytest.approx(report.log_likelihood, abs=1e-14)


def test_post_calibration_lower_bound(small_data):
    x, y = small_data
    report = cross_validate(x, y, enumerate_basis("B((4,4),6,2)"), enumerate_basis("B((8),8,1)"),
                            make_folds(len(y), 10, 0), threshold=0.03)
    n_max = report.normalizers.max()
    assert np.all(report.density >= 0.03 / n_max * (1 - 1e-12))
    assert report.log_likelihood > math.log(0.03) - math.log(n_max)


@pytest.mark.slow
def test_independent_uniforms_near_zero(rng):
    n = 5000
    x, y = rng.random((n, 3)), rng.random(n)
    report = cross_validate(normalize_columns(x)[0], normalize_columns(y)[0][:, 0],
                            enumerate_basis("B((4,4,4),5,3)"), enumerate_basis("B((8),8,1)"),
                            make_folds(n, 10, 0))
    assert -0.10 <= report.log_likelihood <= 0.02


def test_deterministic_copy_scores_high(rng):
    n = 2000
    x = normalize_columns(rng.random((n, 2)))[0]
    report = cross_validate(x, x[:, 0], enumerate_basis("B((4,4),4,2)"), enumerate_basis("B((8),8,1)"),
                            make_folds(n, 10, 0))
    assert report.log_likelihood > 0.5


def test_underdetermined_split_reports_fold(rng):
    x, y = rng.random((40, 3)), rng.random(40)
    with pytest.raises(UnderdeterminedError, match="fold 0"):
        cross_validate(x, y, enumerate_basis("B((4,4,4),5,3)"), BY, make_folds(40, 10, 0))


def test_train_only_normalization(rng):
    n = 1000
    raw_x = rng.lognormal(size=(n, 2))
    raw_y = raw_x[:, 0] * rng.lognormal(sigma=0.3, size=n)
    folds = make_folds(n, 10, 4)
    local = cross_validate(raw_x, raw_y, BX, BY, folds, refit_edf=True)
    glob = cross_validate(normalize_columns(raw_x)[0], normalize_columns(raw_y)[0][:, 0], BX, BY, folds)
    assert np.all((local.y > 0) & (local.y < 1))
    assert local.log_likelihood == pytest.approx(glob.log_likelihood, abs=0.05)


def test_sorted_density_curve(small_data):
    x, y = small_data
    report = cross_validate(x, y, BX, BY, make_folds(len(y), 10, 0))
    curve = sorted_density_curve(report)
    dens = np.array([c[1] for c in curve])
    assert len(curve) == len(y)
    assert np.all(np.diff(dens) >= 0)
    assert np.mean(np.log(dens)) == pytest.approx(report.log_likelihood, abs=1e-12)
    assert sorted((d, f) for _, d, f in curve) == sorted(zip(report.density.tolist(), report.fold.tolist()))


def test_sorted_density_curve_flat():
    n = 5
    ones = np.ones(n)
    report = EvalReport(np.arange(n), np.zeros(n, int), ones * 0.5, ones, ones * 0.5, ones / 12, 0.0, 0, 2)
    assert [c[1] for c in sorted_density_curve(report)] == [1.0] * n


def test_report_csv_roundtrip(tmp_path, small_data):
    x, y = small_data
    report = cross_validate(x, y, BX, BY, make_folds(len(y), 10, 0))
    report.write_csv(tmp_path / "r.csv")
    back = EvalReport.read_csv(tmp_path / "r.csv")
    assert np.array_equal(back.density, report.density)
    assert back.log_likelihood == report.log_likelihood
    report.write_summary(tmp_path / "s.json")
    assert '"log_likelihood_2dp"' in (tmp_path / "s.json").read_text()
