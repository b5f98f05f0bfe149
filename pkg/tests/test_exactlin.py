import random
from fractions import Fraction

import pytest
import sympy

from pidesign import exactlin


def _random_matrix(rng, rows, cols, density=0.7):
    return [
        [
            Fraction(rng.randint(-4, 4), rng.choice((1, 1, 2, 3)))
            if rng.random() < density
            else Fraction(0)
            for _ in range(cols)
        ]
        for _ in range(rows)
    ]


def _sym(m):
    return sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in row] for row in m])


def test_rank_matches_sympy():
    rng = random.Random(20240)
    for _ in range(200):
        m = _random_matrix(rng, rng.randint(1, 5), rng.randint(1, 6))
        assert exactlin.rank(m) == _sym(m).rank()


def test_nullspace_is_exact_basis():
    rng = random.Random(20241)
    for _ in range(150):
        rows, cols = rng.randint(1, 4), rng.randint(1, 6)
        m = _random_matrix(rng, rows, cols)
        ns = exactlin.nullspace(m)
        assert len(ns) == cols - exactlin.rank(m)
        for v in ns:
            for row in m:
                assert sum(a * b for a, b in zip(row, v)) == 0
        if ns:
            assert exactlin.rank(ns) == len(ns)


def test_solve_consistent_and_inconsistent():
    rng = random.Random(20242)
    n_inconsistent = 0
    for _ in range(200):
        rows, cols = rng.randint(1, 4), rng.randint(1, 5)
        m = _random_matrix(rng, rows, cols)
        x0 = [Fraction(rng.randint(-3, 3), rng.choice((1, 2))) for _ in range(cols)]
        b = [sum(a * x for a, x in zip(row, x0)) for row in m]
        sol = exactlin.solve(m, b)
        assert sol is not None
        for row, bi in zip(m, b):
            assert sum(a * x for a, x in zip(row, sol)) == bi

        b2 = [Fraction(rng.randint(-3, 3)) for _ in range(rows)]
        sol2 = exactlin.solve(m, b2)
        aug = [row + [bi] for row, bi in zip(m, b2)]
        consistent = exactlin.rank(aug) == exactlin.rank(m)
        if consistent:
            assert sol2 is not None
        else:
            assert sol2 is None
            n_inconsistent += 1
    assert n_inconsistent > 10


def test_in_span_matches_rank_argument():
    rng = random.Random(20243)
    for _ in range(150):
        dim = rng.randint(2, 4)
        cols = [_random_matrix(rng, 1, dim)[0] for _ in range(rng.randint(1, 4))]
        v = _random_matrix(rng, 1, dim)[0]
        m = _sym([list(c) for c in cols]).T
        expected = m.rank() == m.row_join(_sym([v]).T).rank()
        assert exactlin.in_span(cols, v) == expected


def test_same_span():
    a = [[Fraction(1), Fraction(0)], [Fraction(0), Fraction(1)]]
    b = [[Fraction(1), Fraction(1)], [Fraction(1), Fraction(-1)]]
    c = [[Fraction(1), Fraction(1)]]
    assert exactlin.same_span(a, b)
    assert not exactlin.same_span(a, c)
    assert exactlin.same_span(c, [[Fraction(-2), Fraction(-2)]])


def test_canonicalize():
    v = [Fraction(0), Fraction(-1, 2), Fraction(3, 4)]
    cv = exactlin.canonicalize(v)
    assert cv == [Fraction(0), Fraction(2), Fraction(-3)]
    # scalar multiples collapse to the same representative
    w = [Fraction(-3) * x for x in v]
    assert exactlin.canonicalize(w) == cv
    with pytest.raises(ValueError):
        exactlin.canonicalize([Fraction(0), Fraction(0)])


def test_rref_shape_and_pivots():
    m = [
        [Fraction(0), Fraction(2), Fraction(4)],
        [Fraction(0), Fraction(1), Fraction(2)],
    ]
    r, pivots = exactlin.rref(m)
    assert pivots == [1]
    assert r[0] == [Fraction(0), Fraction(1), Fraction(2)]
