"""Exact linear algebra over the rationals.

Matrices are lists of rows, each row a list of ``fractions.Fraction``.
Everything here is exact: rank via fraction-free (Bareiss) elimination on
denominator-cleared integer rows, solves and nullspaces via Gauss-Jordan
over Fraction. Sizes are tiny (dimension matrices), so clarity wins over
asymptotics.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd, lcm


Row = list[Fraction]
Matrix = list[Row]


def as_fraction_matrix(rows) -> Matrix:
    return [[Fraction(x) for x in row] for row in rows]


def _integer_rows(m: Matrix) -> list[list[int]]:
    """Scale each row by the lcm of its denominators (rank-preserving)."""
    out = []
    for row in m:
        mult = lcm(*(f.denominator for f in row)) if row else 1
        out.append([int(f * mult) for f in row])
    return out


def rank(m: Matrix) -> int:
    """Exact rank by Bareiss fraction-free elimination."""
    if not m or not m[0]:
        return 0
    a = _integer_rows(m)
    n_rows, n_cols = len(a), len(a[0])
    prev = 1
    r = 0
    for c in range(n_cols):
        if r == n_rows:
            break
        pivot_row = next((i for i in range(r, n_rows) if a[i][c] != 0), None)
        if pivot_row is None:
            continue
        a[r], a[pivot_row] = a[pivot_row], a[r]
        for i in range(r + 1, n_rows):
            for j in range(c + 1, n_cols):
                a[i][j] = (a[r][c] * a[i][j] - a[i][c] * a[r][j]) // prev
            a[i][c] = 0
        prev = a[r][c]
        r += 1
    return r


def rref(m: Matrix) -> tuple[Matrix, list[int]]:
    """Reduced row echelon form; returns (rref_rows, pivot_columns)."""
    a = [row[:] for row in m]
    if not a or not a[0]:
        return a, []
    n_rows, n_cols = len(a), len(a[0])
    pivots: list[int] = []
    r = 0
    for c in range(n_cols):
        if r == n_rows:
            break
        pivot_row = next((i for i in range(r, n_rows) if a[i][c] != 0), None)
        if pivot_row is None:
            continue
        a[r], a[pivot_row] = a[pivot_row], a[r]
        inv = a[r][c]
        a[r] = [x / inv for x in a[r]]
        for i in range(n_rows):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    return a, pivots


def nullspace(m: Matrix) -> list[Row]:
    """Basis of {x : m @ x = 0}, one vector per free column of the RREF.

    Basis vector for free column f has a 1 at f and the negated RREF entries
    at the pivot columns; zero at other free columns.
    """
    if not m or not m[0]:
        return []
    n_cols = len(m[0])
    red, pivots = rref(m)
    free = [c for c in range(n_cols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * n_cols
        v[f] = Fraction(1)
        for i, p in enumerate(pivots):
            v[p] = -red[i][f]
        basis.append(v)
    return basis


def solve(m: Matrix, b: Row) -> Row | None:
    """A particular solution of m @ x = b, or None if inconsistent.

    Free variables are set to zero (minimum-support choice under the RREF
    pivot order).
    """
    if not m:
        return None
    n_cols = len(m[0])
    aug = [row + [bi] for row, bi in zip(m, b)]
    red, pivots = rref(aug)
    if n_cols in pivots:
        return None
    x = [Fraction(0)] * n_cols
    for i, p in enumerate(pivots):
        x[p] = red[i][n_cols]
    return x


def in_span(columns: list[Row], v: Row) -> bool:
    """True iff v is a rational combination of the given column vectors."""
    if not columns:
        return all(x == 0 for x in v)
    m = [[col[i] for col in columns] for i in range(len(v))]
    return solve(m, v) is not None


def same_span(rows_a: list[Row], rows_b: list[Row]) -> bool:
    """True iff the two row sets span the same rational subspace."""
    ra, rb = rank(rows_a), rank(rows_b)
    return ra == rb == rank(rows_a + rows_b)


def canonicalize(v: Row) -> Row:
    """Scale to coprime integers with the first nonzero entry positive."""
    nz = [f for f in v if f != 0]
    if not nz:
        raise ValueError("cannot canonicalize the zero vector")
    mult = lcm(*(f.denominator for f in nz))
    ints = [int(f * mult) for f in v]
    g = gcd(*(abs(i) for i in ints if i != 0))
    ints = [i // g for i in ints]
    first = next(i for i in ints if i != 0)
    if first < 0:
        ints = [-i for i in ints]
    return [Fraction(i) for i in ints]
