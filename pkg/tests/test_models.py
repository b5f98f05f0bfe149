from math import comb

import numpy as np
import pytest

from pidesign.models import cube_moments, full_poly, mc_region_moments, moment_matrix


def test_graded_term_order():
    m = full_poly(2, 2)
    assert m.term_names() == ["1", "z1", "z2", "z1^2", "z1*z2", "z2^2"]
    assert m.m == comb(2 + 2, 2)
    m3 = full_poly(3, 5)
    assert m3.m == comb(5 + 3, 3) == 56
    assert m3.exponents.shape == (56, 5)
    degs = m3.exponents.sum(axis=1)
    assert np.all(np.diff(degs) >= 0)


def test_subset_factor_indexing():
    m = full_poly(2, 3, factor_idx=(0, 2, 3))
    Z = np.arange(20.0).reshape(4, 5)
    F = m.features(Z)
    direct = full_poly(2, 3).features(Z[:, [0, 2, 3]])
    assert np.array_equal(F, direct)
    with pytest.raises(ValueError):
        full_poly(2, 2, factor_idx=(1, 1))


def test_features_match_naive_evaluation():
    rng = np.random.default_rng(0)
    m = full_poly(3, 3)
    Z = rng.uniform(-1.5, 1.5, size=(50, 3))
    F = m.features(Z)
    naive = np.stack(
        [np.prod(Z ** e[None, :], axis=1) for e in m.exponents], axis=1
    )
    assert np.allclose(F, naive, rtol=1e-12, atol=1e-14)


def test_order_one_cube_moments_exact():
    m = full_poly(1, 3, map_kind="chi")
    M = cube_moments(m.exponents)
    assert np.array_equal(M, np.diag([1.0, 1 / 3, 1 / 3, 1 / 3]))


def test_cube_moments_match_mc_within_3_sigma():
    m = full_poly(2, 3, map_kind="chi")
    exact = cube_moments(m.exponents)
    rng = np.random.default_rng(1)
    Z = rng.uniform(-1.0, 1.0, size=(200_000, 3))
    F = m.features(Z)
    n = Z.shape[0]
    mc = (F.T @ F) / n
    # per-entry MC standard error from the sample variance of the products
    for i in range(m.m):
        for j in range(m.m):
            prod = F[:, i] * F[:, j]
            se = prod.std() / np.sqrt(n)
            assert abs(mc[i, j] - exact[i, j]) < max(3 * se, 1e-12)


def test_moment_matrix_region_mc(pump_region):
    m = full_poly(2, pump_region.q, map_kind="pi")
    M1 = moment_matrix(m, pump_region, n=5000, seed=9)
    M2 = moment_matrix(m, pump_region, n=5000, seed=9)
    assert np.array_equal(M1, M2)
    assert np.allclose(M1, M1.T)
    eig = np.linalg.eigvalsh(M1)
    assert eig.min() > 0
    # constant-term diagonal entry is an exact 1 under any sampling
    assert M1[0, 0] == pytest.approx(1.0)


def test_chi_model_uses_exact_moments(pump_region):
    m = full_poly(2, pump_region.p, map_kind="chi")
    assert np.array_equal(moment_matrix(m, pump_region), cube_moments(m.exponents))
    with pytest.raises(ValueError):
        mc_region_moments(m, pump_region, 100, 0)
