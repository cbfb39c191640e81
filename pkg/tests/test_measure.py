import json

import numpy as np
import pytest

import latentscale as ls
from helpers import random_measure

LOG_2PI = np.log(2.0 * np.pi)


def delta(loc, sigma=1.0):
    return ls.MixtureModel(sigma, ls.DiscreteMeasure(np.atleast_2d(loc).T if np.ndim(loc) == 1 and np.size(loc) == 1 else loc, [1.0]))


def test_log_density_standard_normal_mode():
    model = ls.MixtureModel(1.0, ls.DiscreteMeasure([[0.0]], [1.0]))
    assert ls.mixture_log_density(model, [0.0]) == pytest.approx(-0.5 * LOG_2PI, abs=1e-12)


def test_log_density_two_atom_closed_form():
    model = ls.MixtureModel(1.0, ls.DiscreteMeasure([[-1.0], [1.0]], [0.5, 0.5]))
    # 0.5 phi(1) + 0.5 phi(-1) = phi(1)
    expected = -0.5 * LOG_2PI - 0.5
    assert ls.mixture_log_density(model, [0.0]) == pytest.approx(expected, abs=1e-12)
    assert np.exp(expected) == pytest.approx(0.241971, abs=1e-6)


def test_log_density_bivariate_wide_kernel():
    model = ls.MixtureModel(2.0, ls.DiscreteMeasure([[0.0, 0.0]], [1.0]))
    assert ls.mixture_log_density(model, [0.0, 0.0]) == pytest.approx(-np.log(8.0 * np.pi), abs=1e-12)


def test_log_density_dimension_mismatch():
    model = ls.MixtureModel(1.0, ls.DiscreteMeasure([[0.0, 0.0]], [1.0]))
    with pytest.raises(ValueError, match="dimension"):
        ls.mixture_log_density(model, [0.0])


def test_log_density_no_underflow_deep_in_tail():
    model = ls.MixtureModel(0.01, ls.DiscreteMeasure([[0.0]], [1.0]))
    x = 40 * 0.01
    val = ls.mixture_log_density(model, [x])
    assert np.isfinite(val)
    assert val == pytest.approx(-800.0 - 0.5 * LOG_2PI - np.log(0.01), abs=1e-9)


def test_log_likelihood_single_point():
    model = ls.MixtureModel(1.0, ls.DiscreteMeasure([[0.0]], [1.0]))
    assert ls.log_likelihood(model, ls.Dataset([0.0])) == pytest.approx(-0.5 * LOG_2PI, abs=1e-12)


def test_log_likelihood_two_points_closed_form():
    model = ls.MixtureModel(1.0, ls.DiscreteMeasure([[0.0]], [1.0]))
    data = ls.Dataset([-1.0, 1.0])
    assert ls.log_likelihood(model, data) == pytest.approx(2 * (-0.5 * LOG_2PI - 0.5), abs=1e-12)
    assert ls.log_likelihood(model, data) == pytest.approx(-2.837877, abs=1e-6)


def test_log_likelihood_weight_renormalization_invariance():
    rng = np.random.default_rng(0)
    measure = random_measure(rng, d=2, m_max=5)
    data = ls.Dataset(rng.normal(size=(20, 2)))
    doubled = ls.DiscreteMeasure(measure.atoms, (2 * measure.weights) / (2 * measure.weights).sum())
    a = ls.log_likelihood(ls.MixtureModel(0.7, measure), data)
    b = ls.log_likelihood(ls.MixtureModel(0.7, doubled), data)
    assert a == pytest.approx(b, abs=1e-12)


def test_log_likelihood_additive_over_concatenation():
    rng = np.random.default_rng(1)
    measure = random_measure(rng, d=1, m_max=4)
    model = ls.MixtureModel(0.9, measure)
    xa, xb = rng.normal(size=12), rng.normal(size=7)
    total = ls.log_likelihood(model, ls.Dataset(np.concatenate([xa, xb])))
    parts = ls.log_likelihood(model, ls.Dataset(xa)) + ls.log_likelihood(model, ls.Dataset(xb))
    assert total == pytest.approx(parts, abs=1e-10)


def test_empty_dataset_rejected():
    with pytest.raises(ValueError):
        ls.Dataset(np.empty((0, 2)))


def test_non_finite_dataset_rejected():
    with pytest.raises(ValueError, match="finite"):
        ls.Dataset([0.0, np.nan])


def test_bounding_box_examples():
    box = ls.data_bounding_box(ls.Dataset([0.0, 10.0]), 0.1)
    assert box.lower[0] == pytest.approx(-1.0) and box.upper[0] == pytest.approx(11.0)
    box = ls.data_bounding_box(ls.Dataset([5.0]), 0.1)
    assert box.lower[0] == pytest.approx(4.9) and box.upper[0] == pytest.approx(5.1)
    box = ls.data_bounding_box(ls.Dataset([0.0, 10.0]), 0.0)
    assert box.lower[0] == 0.0 and box.upper[0] == 10.0


def test_bounding_box_rejects_negative_margin():
    with pytest.raises(ValueError):
        ls.data_bounding_box(ls.Dataset([0.0, 1.0]), -0.5)


def test_atom_permutation_invariance():
    rng = np.random.default_rng(2)
    measure = random_measure(rng, d=2, m_max=6)
    perm = rng.permutation(measure.m)
    permuted = ls.DiscreteMeasure(measure.atoms[perm], measure.weights[perm])
    x = rng.normal(size=(15, 2))
    a = ls.mixture_log_density(ls.MixtureModel(0.6, measure), x)
    b = ls.mixture_log_density(ls.MixtureModel(0.6, permuted), x)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_duplicate_atoms_merge_by_weight_sum():
    merged = ls.DiscreteMeasure.from_points([[0.0], [0.0], [1.0]], [0.25, 0.25, 0.5])
    assert merged.m == 2
    direct = ls.DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    x = np.linspace(-2, 3, 11)[:, None]
    np.testing.assert_allclose(
        ls.mixture_log_density(ls.MixtureModel(1.0, merged), x),
        ls.mixture_log_density(ls.MixtureModel(1.0, direct), x),
        atol=1e-12,
    )


def test_translation_equivariance():
    rng = np.random.default_rng(3)
    measure = random_measure(rng, d=2, m_max=5)
    x = rng.normal(size=(10, 2))
    v = np.array([13.5, -7.25])
    shifted = ls.DiscreteMeasure(measure.atoms + v, measure.weights)
    a = ls.mixture_log_density(ls.MixtureModel(0.8, measure), x)
    b = ls.mixture_log_density(ls.MixtureModel(0.8, shifted), x + v)
    np.testing.assert_allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_unit_mass_by_quadrature_1d(seed):
    rng = np.random.default_rng(seed)
    measure = random_measure(rng, d=1, m_max=6)
    sigma = float(rng.uniform(0.2, 2.0))
    model = ls.MixtureModel(sigma, measure)
    lo = measure.atoms.min() - 8 * sigma
    hi = measure.atoms.max() + 8 * sigma
    grid = np.arange(lo, hi + sigma / 50, sigma / 50)
    dens = np.exp(ls.mixture_log_density(model, grid[:, None]))
    assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-6)


def test_measure_invariants_enforced():
    with pytest.raises(ValueError, match="sum"):
        ls.DiscreteMeasure([[0.0]], [0.5])
    with pytest.raises(ValueError, match="distinct"):
        ls.DiscreteMeasure([[0.0], [0.0]], [0.5, 0.5])
    with pytest.raises(ValueError, match="nonnegative"):
        ls.DiscreteMeasure([[0.0], [1.0]], [1.5, -0.5])
    with pytest.raises(ValueError, match="sigma"):
        ls.MixtureModel(0.0, ls.DiscreteMeasure([[0.0]], [1.0]))


def test_mixture_json_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    model = ls.MixtureModel(0.35, random_measure(rng, d=2, m_max=4))
    path = tmp_path / "model.json"
    ls.save_mixture_json(model, path)
    back = ls.load_mixture_json(path)
    assert back.sigma == model.sigma
    np.testing.assert_array_equal(back.mixing.atoms, model.mixing.atoms)
    np.testing.assert_array_equal(back.mixing.weights, model.mixing.weights)
    obj = json.loads(path.read_text())
    assert set(obj) == {"sigma", "atoms", "weights"}
