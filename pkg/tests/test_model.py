import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate

from hcrspread.basis import BasisSet, design_matrix, enumerate_basis, legendre_eval
from hcrspread.errors import DimensionError, InsufficientDataError, SingularFitError, UnderdeterminedError
from hcrspread.model import (
    CalibratedDensity,
    HcrModel,
    RawDensity,
    calibrate,
    calibrate_many,
    density_at,
    density_expectation,
    density_modes,
    density_variance,
    estimate_moments,
    fit,
    load_model,
    predict_coefficients,
    predict_raw,
    save_model,
)
from hcrspread.synthetic import sample_conditional

B0 = BasisSet(1, ((0,),))
B01 = BasisSet(1, ((0,), (1,)))


def test_estimate_moments_examples(rng):
    assert estimate_moments(B0, rng.random(7)).tolist() == [1.0]
    np.testing.assert_allclose(estimate_moments(B01, [0.5, 0.5]), [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(estimate_moments(B01, [1.0]), [1.0, math.sqrt(3)])


def test_estimate_moments_empty():
    with pytest.raises(InsufficientDataError):
        estimate_moments(B01, np.empty((0, 1)))


def test_intercept_only_fit_equals_moment_averages(rng):
    x, y = rng.random((1000, 2)), rng.random(1000)
    by = enumerate_basis("B((6),6,1)")
    model = fit(BasisSet(2, ((0, 0),)), by, x, y)
    np.testing.assert_allclose(model.beta[:, 0], estimate_moments(by, y), atol=1e-10)


def test_normalization_row_fixed(rng):
    x, y = rng.random((300, 2)), rng.random(300)
    model = fit(enumerate_basis("B((2,2),3,2)"), enumerate_basis("B((4),4,1)"), x, y)
    expected = np.zeros(model.beta.shape[1])
    expected[0] = 1.0
    assert model.beta[0].tolist() == expected.tolist()


def test_independent_data_fits_near_zero(rng):
    n = 5000
    x, y = rng.random((n, 2)), rng.random(n)
    model = fit(enumerate_basis("B((2,2),3,2)"), enumerate_basis("B((4),4,1)"), x, y)
    assert np.all(np.abs(model.beta[1:, 1:]) < 5 / math.sqrt(n))
    np.testing.assert_allclose(model.beta[1:, 0], estimate_moments(enumerate_basis("B((4),4,1)"), y)[1:],
                               atol=5 / math.sqrt(n))


@pytest.mark.slow
def test_planted_first_moment_recovered(rng):
    n = 20000
    x, y = sample_conditional(rng, n, 1, [(0.5, 1, (1,))])
    model = fit(enumerate_basis("B((1),1,1)"), enumerate_basis("B((2),2,1)"), x, y)
    assert model.beta[1, 1] == pytest.approx(0.5, abs=5 / math.sqrt(n))
    assert abs(model.beta[2, 1]) < 5 / math.sqrt(n)


def test_fit_optimality(rng):
    x, y = rng.random((400, 2)), rng.random(400)
    bx = enumerate_basis("B((2,2),2,2)")
    model = fit(bx, enumerate_basis("B((3),3,1)"), x, y)
    M = design_matrix(bx, x)
    targets = design_matrix(model.basis_y, y)
    for j in range(1, len(model.basis_y)):
        base = np.sum((M @ model.beta[j] - targets[:, j]) ** 2)
        for k in range(len(bx)):
            for step in (1e-4, -1e-4):
                v = model.beta[j].copy()
                v[k] += step
                assert np.sum((M @ v - targets[:, j]) ** 2) >= base


def test_underdetermined(rng):
    with pytest.raises(UnderdeterminedError):
        fit(enumerate_basis("B((4,4,4),5,3)"), enumerate_basis("B((2),2,1)"), rng.random((20, 3)), rng.random(20))


def test_collinear_features(rng):
    col = rng.random(200)
    x = np.column_stack([col, col])
    bx, by = enumerate_basis("B((1,1),1,1)"), enumerate_basis("B((2),2,1)")
    y = rng.random(200)
    with pytest.raises(SingularFitError):
        fit(bx, by, x, y, allow_rank_deficient=False)
    model = fit(bx, by, x, y)
    assert model.rank == 2
    # minimum-norm solution splits the weight evenly between the duplicate columns
    np.testing.assert_allclose(model.beta[1:, 1], model.beta[1:, 2], atol=1e-10)


def test_fit_rejects_values_outside_unit_interval(rng):
    with pytest.raises(ValueError):
        fit(B01, B01, rng.random(50) + 1, rng.random(50))


def _model(beta, bx=None):
    bx = bx or enumerate_basis("B((1,1),1,2)")
    return HcrModel(bx, enumerate_basis(f"B(({len(beta) - 1}),{len(beta) - 1},1)"), np.array(beta, dtype=float))


def test_predict_raw_examples():
    bx = enumerate_basis("B((1,1),1,2)")  # (0,0), (1,0), (0,1)
    a = predict_raw(_model([[1, 0, 0], [0, 0, 0], [0, 0, 0]], bx), [0.3, 0.8]).coeffs
    np.testing.assert_allclose(a, [1, 0, 0])
    a = predict_raw(_model([[1, 0, 0], [1, 0, 0]], bx), [0.9, 0.1]).coeffs
    np.testing.assert_allclose(a, [1, 1])
    a = predict_raw(_model([[1, 0, 0], [0, 0.5, 0]], bx), [1.0, 0.2]).coeffs
    np.testing.assert_allclose(a, [1, 0.5 * math.sqrt(3)])


def test_predict_raw_dimension_mismatch():
    with pytest.raises(DimensionError):
        predict_raw(_model([[1, 0, 0], [0, 0, 0]]), [0.5])


@given(arrays(float, (3, 5), elements=st.floats(-2, 2)), arrays(float, (3, 5), elements=st.floats(-2, 2)),
       st.floats(-3, 3), arrays(float, 2, elements=st.floats(0, 1)))
@settings(max_examples=50)
def test_prediction_linear_in_beta(b1, b2, c, x):
    bx = enumerate_basis("B((2,1),2,2)")
    by = enumerate_basis("B((2),2,1)")
    for b in (b1, b2):
        b[0] = [1, 0, 0, 0, 0]
    mixed = b1 + c * b2
    mixed[0] = [1, 0, 0, 0, 0]
    pa, pb, pm = (predict_raw(HcrModel(bx, by, b), x).coeffs for b in (b1, b2, mixed))
    np.testing.assert_allclose(pm[1:], pa[1:] + c * pb[1:], atol=1e-9)


def test_calibrate_uniform():
    d = calibrate(RawDensity(np.array([1.0, 0.0, 0.0]), (0, 1, 2)))
    np.testing.assert_allclose(d.lattice, 1.0)
    assert d.resolution == 100


def test_calibrate_against_quadrature():
    raw = RawDensity(np.array([1.0, 1.2]), (0, 1))
    d = calibrate(raw, 100, 0.03)
    poly = lambda y: 1 + 1.2 * legendre_eval(1, y)
    root = 0.5 - 1 / (2 * 1.2 * math.sqrt(3))
    N = integrate.quad(lambda y: max(poly(y), 0.03), 0, 1, points=[root])[0]
    y = (np.arange(1, 101) - 0.5) / 100
    expected = np.maximum(poly(y), 0.03) / N
    # midpoint lattice vs exact normalizer differ only near the clipping kink
    np.testing.assert_allclose(d.lattice, expected, rtol=2e-3)
    np.testing.assert_allclose(d.lattice * d.normalizer, np.maximum(poly(y), 0.03), rtol=1e-12)


@given(arrays(float, (5, 6), elements=st.floats(-5, 5)), st.floats(1e-3, 0.5), st.integers(2, 300))
@settings(max_examples=60)
def test_calibrated_lattice_valid(coeffs, threshold, L):
    coeffs[:, 0] = 1.0
    lattices, norm = calibrate_many(coeffs, range(6), L, threshold)
    assert np.all(lattices > 0)
    assert np.all(lattices >= threshold / norm[:, None] * (1 - 1e-12))
    np.testing.assert_allclose(lattices.mean(axis=1), 1.0, atol=1e-12)


def test_calibration_idempotent_above_threshold():
    raw = RawDensity(np.array([1.0, 0.2, 0.1]), (0, 1, 2))
    d = calibrate(raw, 100, 0.03)
    samples = raw((np.arange(1, 101) - 0.5) / 100)
    np.testing.assert_allclose(d.lattice, samples / samples.mean(), rtol=1e-13)


def test_density_at_cells():
    lattice = np.arange(1, 101, dtype=float)
    assert density_at(lattice, 0.005) == 1.0
    assert density_at(lattice, 0.0) == 1.0
    assert density_at(lattice, 1.0) == 100.0
    assert density_at(lattice, 0.07) == 7.0
    assert density_at(CalibratedDensity(np.ones(100)), 0.37) == 1.0


def test_uniform_moments():
    L = 100
    d = CalibratedDensity(np.ones(L))
    assert density_expectation(d) == pytest.approx(0.5, abs=1e-15)
    assert abs(density_variance(d) - 1 / 12) <= 1 / (4 * L**2)


def test_point_mass_expectation():
    lattice = np.zeros(100)
    lattice[36] = 100.0
    assert density_expectation(lattice) == pytest.approx(0.365)
    assert density_variance(lattice) == pytest.approx(0.0, abs=1e-15)


def test_bimodal_modes():
    pos = (np.arange(1, 101) - 0.5) / 100
    lattice = 0.1 + np.exp(-((pos - 0.245) / 0.05) ** 2) + np.exp(-((pos - 0.745) / 0.05) ** 2)
    modes = density_modes(lattice / lattice.mean())
    assert [p for p, _ in modes] == pytest.approx([0.245, 0.745])


def test_modes_plateau_reports_lower_position():
    lattice = np.array([1.0, 2.0, 2.0, 1.0, 0.5, 0.5])
    assert [p for p, _ in density_modes(lattice)] == pytest.approx([1.5 / 6])
    assert density_modes(np.ones(10)) == []


def test_model_roundtrip_bit_identical(tmp_path, rng):
    x, y = rng.random((500, 3)), rng.random(500)
    model = fit(enumerate_basis("B((4,4,4),5,3)"), enumerate_basis("B((8),8,1)"), x, y,
                variable_names=("P", "V", "HL", "spread"))
    save_model(model, tmp_path / "m.json")
    loaded = load_model(tmp_path / "m.json")
    assert loaded.beta.tobytes() == model.beta.tobytes()
    assert loaded.basis_x.members == model.basis_x.members
    assert str(loaded.basis_x.spec) == "B((4,4,4),5,3)"
    assert loaded.variable_names == ("P", "V", "HL", "spread")
    np.testing.assert_array_equal(predict_coefficients(loaded, x[:5]), predict_coefficients(model, x[:5]))
