from math import comb

import numpy as np
import pytest

from pidesign.designs import Design, WeightedModel, coordinate_exchange
from pidesign.models import cube_moments, full_poly, moment_matrix
from pidesign.robustda import (
    compound_criterion,
    empirical_model,
    maximin_over_w,
    robust_exchange,
)


@pytest.fixture(scope="module")
def setup(pump_region):
    da_model = full_poly(2, pump_region.q, name="phi1", map_kind="pi")
    mhat = moment_matrix(da_model, pump_region, n=4000, seed=20)
    da = [WeightedModel(da_model, mhat, 1.0)]
    chi_model, chi_mhat = empirical_model(pump_region.p)
    chi = WeightedModel(chi_model, chi_mhat, 1.0)
    return pump_region, da, chi


def test_empirical_model_shape(pump_region):
    model, mhat = empirical_model(pump_region.p)
    assert model.map_kind == "chi"
    assert model.m == comb(pump_region.p + 2, 2)
    assert np.array_equal(mhat, cube_moments(model.exponents))


def test_compound_affine_in_w(setup):
    region, da, chi = setup
    rng = np.random.default_rng(21)
    design = Design(chi_log=region.box.sample_log(14, rng), region=region)
    refs = dict(ref_da=0.4, ref_chi=0.3)
    c0 = compound_criterion(design, 0.0, da, chi, **refs)
    c1 = compound_criterion(design, 1.0, da, chi, **refs)
    cm = compound_criterion(design, 0.5, da, chi, **refs)
    assert cm == pytest.approx(0.5 * (c0 + c1), abs=1e-14)
    with pytest.raises(ValueError):
        compound_criterion(design, 1.5, da, chi, **refs)


def test_robust_exchange_reproducible(setup):
    region, da, chi = setup
    kw = dict(seed=22, n_starts=2, max_sweeps=4)
    ref_da = coordinate_exchange(region, da, 12, **kw).value
    ref_chi = coordinate_exchange(region, [chi], 12, **kw).value
    a = robust_exchange(region, da, chi, 0.5, 12, ref_da, ref_chi, **kw)
    b = robust_exchange(region, da, chi, 0.5, 12, ref_da, ref_chi, **kw)
    assert np.array_equal(a.design.chi_log, b.design.chi_log)
    assert a.compound == pytest.approx(
        0.5 * a.e_da + 0.5 * a.e_chi, abs=1e-9
    )
    with pytest.raises(ValueError):
        robust_exchange(region, da, chi, -0.1, 12, ref_da, ref_chi, **kw)


def test_maximin_endpoints_recover_references(setup):
    region, da, chi = setup
    sw = maximin_over_w(
        region, da, chi, 14, grid=[0.0, 0.5, 1.0],
        seed=23, n_starts=2, max_sweeps=6,
    )
    # endpoint designs rediscover each reference optimum within 2%
    assert sw.efficiencies[-1, 0] > 0.98
    assert sw.efficiencies[0, 1] > 0.98
    k = sw.maximin_index
    assert sw.min_efficiency[k] == sw.min_efficiency.max()
    assert sw.maximin_weight == sw.grid[k]
    # the compound pick hedges at least as well as either endpoint
    assert sw.min_efficiency[k] >= sw.min_efficiency[0]
    assert sw.min_efficiency[k] >= sw.min_efficiency[-1]
    csv_text = sw.curve_csv()
    assert csv_text.splitlines()[0] == "w,e_da,e_chi"
    assert len(csv_text.splitlines()) == 4


def test_maximin_validation(setup):
    region, da, chi = setup
    with pytest.raises(ValueError):
        maximin_over_w(region, da, chi, 14, grid=[0.2, 1.4], seed=1)
