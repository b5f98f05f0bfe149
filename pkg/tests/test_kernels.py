import json
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.optimize import lsq_linear

from pidesign import kernels


def _random_bcls(rng, q, p):
    A = rng.standard_normal((q, p))
    b = rng.standard_normal(q) * 2.0
    lo = rng.uniform(-2.0, -0.5, p)
    hi = rng.uniform(0.5, 2.0, p)
    return A, b, lo, hi


def test_bcls_matches_scipy_objective():
    rng = np.random.default_rng(42)
    for _ in range(40):
        q = rng.integers(2, 6)
        p = rng.integers(2, 7)
        A, b, lo, hi = _random_bcls(rng, q, p)
        X = np.tile(0.5 * (lo + hi), (1, 1))
        kernels.bcls_batch(A, b[None, :], lo, hi, X)
        ours = np.sum((A @ X[0] - b) ** 2)
        ref = lsq_linear(A, b, bounds=(lo, hi), tol=1e-14)
        theirs = np.sum((A @ ref.x - b) ** 2)
        assert ours <= theirs + 1e-8 * max(1.0, theirs)


def test_bcls_respects_bounds_and_batch():
    rng = np.random.default_rng(3)
    A, _, lo, hi = _random_bcls(rng, 4, 5)
    B = rng.standard_normal((50, 4)) * 3.0
    X = np.tile(0.5 * (lo + hi), (50, 1))
    pg = kernels.bcls_batch(A, B, lo, hi, X)
    assert np.all(X >= lo - 1e-12) and np.all(X <= hi + 1e-12)
    assert pg.shape == (50,)
    # convex problem: projected gradient certifies the global minimum
    assert np.all(pg < kernels.PG_TOL)


def test_bcls_unconstrained_interior_solution():
    # wide bounds: solution must match plain least squares
    rng = np.random.default_rng(8)
    A = rng.standard_normal((6, 3))
    b = rng.standard_normal(6)
    lo, hi = np.full(3, -100.0), np.full(3, 100.0)
    X = np.zeros((1, 3))
    kernels.bcls_batch(A, b[None, :], lo, hi, X)
    xstar, *_ = np.linalg.lstsq(A, b, rcond=None)
    assert np.allclose(X[0], xstar, atol=1e-8)


def test_monomials_dual_paths_agree():
    rng = np.random.default_rng(11)
    Z = rng.uniform(-2.0, 2.0, size=(300, 4))
    E = rng.integers(0, 4, size=(25, 4))
    fast = kernels.monomials_batch(Z, E)
    plain = kernels._monomials_batch_np(Z, E.astype(np.int64))
    loop = kernels._monomials_batch_loop(Z, E.astype(np.int64))
    assert np.allclose(fast, plain, rtol=1e-12, atol=1e-12)
    assert np.allclose(loop, plain, rtol=1e-12, atol=1e-12)


def test_bcls_dual_paths_agree():
    rng = np.random.default_rng(12)
    A, _, lo, hi = _random_bcls(rng, 3, 4)
    B = rng.standard_normal((20, 3))
    X1 = np.tile(0.5 * (lo + hi), (20, 1))
    X2 = X1.copy()
    kernels.bcls_batch(A, B, lo, hi, X1)
    kernels._bcls_batch_np(A, B, lo, hi, X2, kernels.BCLS_MAXIT, kernels.PG_TOL)
    r1 = np.linalg.norm(X1 @ A.T - B, axis=1)
    r2 = np.linalg.norm(X2 @ A.T - B, axis=1)
    assert np.allclose(r1, r2, atol=1e-9)


_SUBPROC_SNIPPET = """
import json
import numpy as np
from pidesign import default_model, kernels, load_builtin
from pidesign.designs import WeightedModel, coordinate_exchange
from pidesign.geometry import region_for
from pidesign.models import full_poly, moment_matrix

region = region_for(default_model(load_builtin("mars")))
model = full_poly(2, region.q, name="m", map_kind="pi")
mhat = moment_matrix(model, region, n=2000, seed=5)
res = coordinate_exchange(region, [WeightedModel(model, mhat, 1.0)], 6,
                          seed=5, n_starts=2, max_sweeps=4)
print(json.dumps({
    "numba": kernels.USING_NUMBA,
    "value": res.value,
    "chi": res.design.chi_log.tolist(),
}))
"""


def _run_variant(disable: str) -> dict:
    env = dict(os.environ, PIDESIGN_DISABLE_NUMBA=disable)
    proc = subprocess.run(
        [sys.executable, "-c", _SUBPROC_SNIPPET],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(proc.stdout.strip().splitlines()[-1])


def test_env_flag_switches_backend_and_results_agree():
    on = _run_variant("0")
    off = _run_variant("1")
    assert off["numba"] is False
    try:
        import numba  # noqa: F401

        assert on["numba"] is True
    except ImportError:
        assert on["numba"] is False
    assert on["value"] == pytest.approx(off["value"], rel=1e-9)
    assert np.allclose(on["chi"], off["chi"], atol=1e-7)
