import random
from fractions import Fraction

import pytest

from pidesign import dimension, exactlin, load_builtin
from pidesign.dimension import (
    DAProblem,
    DimVector,
    Quantity,
    derive_model,
    predictor_matrix,
    reduce_responses,
    response_matrix,
    span_check,
    unit_rescale,
)

F = Fraction


def _vec(groups, names_order):
    """Exponent vectors of the groups re-ordered onto names_order."""
    out = []
    for g in groups:
        out.append([g.exponent_of(n) for n in names_order])
    return out


def test_mars_groups_span():
    m = derive_model(load_builtin("mars"))
    names = ("v", "d", "g", "rho", "m")
    got = _vec(m.predictor_groups + m.response_groups, names)
    want = [
        [0, 3, 0, 1, -1],              # d^3 rho / m
        [1, F(-1, 2), F(-1, 2), 0, 0], # v / sqrt(d g)
    ]
    assert exactlin.same_span(got, [[F(x) for x in r] for r in want])
    assert m.span_ok
    assert m.counts.n_groups == 1


def test_pump_groups_span():
    m = derive_model(load_builtin("pump"))
    names = ("gH", "bhp", "Q", "s", "D", "rho", "mu", "eps")
    got = _vec(m.predictor_groups + m.response_groups, names)
    want = [
        [0, 0, 1, -1, -3, 0, 0, 0],   # Q/(s D^3)
        [0, 0, 0, 1, 2, 1, -1, 0],    # rho s D^2 / mu
        [0, 0, 0, 0, -1, 0, 0, 1],    # eps/D
        [1, 0, 0, -2, -2, 0, 0, 0],   # gH/(s^2 D^2)
        [0, 1, 0, -3, -5, -1, 0, 0],  # bhp/(rho s^3 D^5)
    ]
    assert exactlin.same_span(got, [[F(x) for x in r] for r in want])
    # predictor groups alone span the predictor-only subspace
    pred = _vec(m.predictor_groups, names)
    assert exactlin.same_span(pred, [[F(x) for x in r] for r in want[:3]])
    assert len(m.predictor_groups) == 3
    assert len(m.response_groups) == 2


def test_heat_exchanger_counts():
    m = derive_model(load_builtin("heat_exchanger"))
    assert len(m.predictor_groups) == 5
    assert len(m.response_groups) == 2
    assert m.counts.rank_predictors == 4
    assert m.span_ok


def _mixed_problem():
    # three same-dimension-family responses over predictors that cannot
    # absorb their Theta content alone
    k = 3  # M, L, Theta
    q = [
        Quantity("Y1", DimVector((0, 0, 1)), "response"),
        Quantity("Y2", DimVector((0, 0, 1)), "response"),
        Quantity("Y3", DimVector((-1, 0, 1)), "response"),
        Quantity("x1", DimVector((1, 0, 0)), "predictor", range=(1.0, 2.0)),
        Quantity("x2", DimVector((0, 1, 0)), "predictor", range=(1.0, 2.0)),
    ]
    return DAProblem(base_dims=("M", "L", "Th"), quantities=tuple(q))


def test_response_combination_path():
    p = _mixed_problem()
    a, b = response_matrix(p), predictor_matrix(p)
    chk = span_check(a, b)
    assert not chk.subset
    assert set(chk.failing) == {"Y1", "Y2", "Y3"}

    red = reduce_responses(a, b)
    assert red.kept == ("Y1", "Y2", "Y3")
    assert red.counts.n_kept == 3
    assert red.counts.rank_predictors == 2
    assert red.counts.rank_augmented == 3
    assert red.counts.n_groups == 2

    m = derive_model(p)
    assert len(m.response_groups) == 2
    names = ("Y1", "Y2", "Y3", "x1", "x2")
    got = _vec(m.response_groups, names)
    want = [
        [1, -1, 0, 0, 0],   # Y1/Y2
        [1, 0, -1, -1, 0],  # Y1/(Y3 x1)
    ]
    assert got == [[F(x) for x in r] for r in want]


def test_unrepresentable_response_excluded():
    q = [
        Quantity("Y1", DimVector((0, 1)), "response"),
        Quantity("Y2", DimVector((1, 0)), "response"),
        Quantity("x1", DimVector((0, 1)), "predictor", range=(1.0, 2.0)),
    ]
    p = DAProblem(base_dims=("M", "L"), quantities=tuple(q))
    m = derive_model(p)
    assert [e[0] for e in m.excluded_responses] == ["Y2"]
    assert len(m.response_groups) == 1
    assert m.response_groups[0].exponent_of("Y1") == 1


def _random_problem(rng):
    k = rng.randint(2, 4)
    n_resp = rng.randint(1, 3)
    n_pred = rng.randint(2, 5)
    qs = []
    for i in range(n_resp):
        dims = tuple(F(rng.randint(-3, 3)) for _ in range(k))
        qs.append(Quantity(f"Y{i}", DimVector(dims), "response"))
    for i in range(n_pred):
        dims = tuple(F(rng.randint(-2, 2)) for _ in range(k))
        qs.append(Quantity(f"x{i}", DimVector(dims), "predictor", range=(1.0, 2.0)))
    return DAProblem(base_dims=tuple(f"D{j}" for j in range(k)), quantities=tuple(qs))


def test_counting_laws_random():
    rng = random.Random(77)
    checked = 0
    for _ in range(120):
        p = _random_problem(rng)
        b = predictor_matrix(p)
        try:
            m = derive_model(p)
        except ValueError:
            continue  # no usable responses
        checked += 1
        rank_b = exactlin.rank(b.rows())
        assert len(m.predictor_groups) == len(p.b_side) - rank_b
        c = m.counts
        assert len(m.response_groups) == c.n_kept - c.rank_augmented + c.rank_predictors
        # every produced group is exactly dimensionless by construction;
        # re-verify through the public formula pathway
        dims = {q.name: q.dim for q in p.quantities}
        for g in m.predictor_groups + m.response_groups:
            assert g.induced_dimension(dims, len(p.base_dims)).is_zero
    assert checked > 60


def test_unit_rescale_invariance():
    rng = random.Random(99)
    p = load_builtin("pump")
    m = derive_model(p)
    dims = {q.name: q.dim for q in p.quantities}
    for _ in range(20):
        values = {q.name: rng.uniform(0.5, 10.0) for q in p.quantities}
        scales = [rng.uniform(0.1, 10.0) for _ in p.base_dims]
        for g in m.predictor_groups + m.response_groups:
            before = 1.0
            after = 1.0
            for name, e in zip(g.names, g.exponents):
                before *= values[name] ** float(e)
                after *= unit_rescale(values[name], dims[name], scales) ** float(e)
            assert after == pytest.approx(before, rel=1e-9)


def test_unit_rescale_dimensional():
    # a pure length rescales inversely with the length unit factor
    d = DimVector((F(0), F(1), F(0)))
    assert unit_rescale(3.0, d, [1.0, 2.0, 1.0]) == pytest.approx(1.5)


def test_quantity_validation():
    with pytest.raises(ValueError):
        Quantity("x", DimVector((F(1),)), "predictor")  # missing range
    with pytest.raises(ValueError):
        Quantity("x", DimVector((F(1),)), "predictor", range=(-1.0, 2.0))
    with pytest.raises(ValueError):
        Quantity("c", DimVector((F(1),)), "constant")  # missing value
    with pytest.raises(ValueError):
        Quantity("x", DimVector((F(1),)), "wizard", range=(1.0, 2.0))


def test_problem_validation():
    q = Quantity("x", DimVector((F(1), F(0))), "predictor", range=(1.0, 2.0))
    with pytest.raises(ValueError):
        DAProblem(base_dims=("M",), quantities=(q,))  # dim length mismatch
    with pytest.raises(ValueError):
        DAProblem(base_dims=("M", "L"), quantities=(q, q))  # duplicate name
