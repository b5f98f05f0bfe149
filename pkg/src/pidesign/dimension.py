"""Quantities, dimension matrices, and dimensionless-group derivation.

A problem declares k base dimensions and a list of named quantities, each
with an exact-rational dimension vector. Predictor groups solve B x = 0,
response transforms solve B y = -a; when some response dimension lies
outside span(B), responses are reduced to combinations that the predictors
can absorb. All exponent arithmetic is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from . import exactlin
from .exactlin import Matrix, Row

RESPONSE = "response"
PREDICTOR = "predictor"
CONSTANT = "constant"

_ROLES = (RESPONSE, PREDICTOR, CONSTANT)


@dataclass(frozen=True)
class DimVector:
    """Exponents of one quantity over the problem's base dimensions."""

    exponents: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "exponents", tuple(Fraction(e) for e in self.exponents)
        )

    def __len__(self) -> int:
        return len(self.exponents)

    def __add__(self, other: "DimVector") -> "DimVector":
        return DimVector(tuple(a + b for a, b in zip(self.exponents, other.exponents)))

    def __sub__(self, other: "DimVector") -> "DimVector":
        return DimVector(tuple(a - b for a, b in zip(self.exponents, other.exponents)))

    def scale(self, f) -> "DimVector":
        f = Fraction(f)
        return DimVector(tuple(f * e for e in self.exponents))

    @property
    def is_zero(self) -> bool:
        return all(e == 0 for e in self.exponents)

    @staticmethod
    def zero(k: int) -> "DimVector":
        return DimVector((Fraction(0),) * k)


@dataclass(frozen=True)
class Quantity:
    """A named variable: response, predictor (with range), or held constant."""

    name: str
    dim: DimVector
    role: str
    range: tuple[float, float] | None = None
    value: float | None = None

    def __post_init__(self):
        if self.role not in _ROLES:
            raise ValueError(f"{self.name}: unknown role {self.role!r}")
        if self.role == PREDICTOR:
            if self.range is None:
                raise ValueError(f"predictor {self.name} needs a range")
            lo, hi = self.range
            if not (0 < lo <= hi):
                raise ValueError(
                    f"predictor {self.name}: range must satisfy 0 < lo <= hi, got {self.range}"
                )
        if self.role == CONSTANT:
            if self.value is None or self.value <= 0:
                raise ValueError(f"held-constant {self.name} needs a positive value")


@dataclass(frozen=True)
class DAProblem:
    """Base dimensions plus the declared quantities, in declaration order."""

    base_dims: tuple[str, ...]
    quantities: tuple[Quantity, ...]
    name: str = ""
    ipsen_order: tuple[tuple[str, str], ...] | None = None
    response_factor_subsets: dict[str, tuple[int, ...]] | None = None

    def __post_init__(self):
        k = len(self.base_dims)
        seen = set()
        for q in self.quantities:
            if len(q.dim) != k:
                raise ValueError(
                    f"{q.name}: dimension vector has {len(q.dim)} entries, expected {k}"
                )
            if q.name in seen:
                raise ValueError(f"duplicate quantity name {q.name!r}")
            seen.add(q.name)

    @property
    def responses(self) -> tuple[Quantity, ...]:
        return tuple(q for q in self.quantities if q.role == RESPONSE)

    @property
    def predictors(self) -> tuple[Quantity, ...]:
        """Varying predictors only."""
        return tuple(q for q in self.quantities if q.role == PREDICTOR)

    @property
    def constants(self) -> tuple[Quantity, ...]:
        return tuple(q for q in self.quantities if q.role == CONSTANT)

    @property
    def b_side(self) -> tuple[Quantity, ...]:
        """Quantities forming the predictor dimension matrix.

        Held constants take part in group derivation like predictors; the
        design modules later treat them as fixed offsets.
        """
        return tuple(q for q in self.quantities if q.role != RESPONSE)

    def quantity(self, name: str) -> Quantity:
        for q in self.quantities:
            if q.name == name:
                return q
        raise KeyError(name)


@dataclass(frozen=True)
class DimensionMatrix:
    """k x m matrix whose columns are quantity dimension vectors."""

    columns: tuple[DimVector, ...]
    names: tuple[str, ...]
    tag: str = ""

    def __post_init__(self):
        if len(self.columns) != len(self.names):
            raise ValueError("one name per column required")

    @property
    def n_dims(self) -> int:
        return len(self.columns[0]) if self.columns else 0

    def rows(self) -> Matrix:
        k = self.n_dims
        return [[col.exponents[i] for col in self.columns] for i in range(k)]

    def column(self, j: int) -> Row:
        return list(self.columns[j].exponents)

    @staticmethod
    def from_quantities(quantities, tag: str = "") -> "DimensionMatrix":
        return DimensionMatrix(
            columns=tuple(q.dim for q in quantities),
            names=tuple(q.name for q in quantities),
            tag=tag,
        )


def predictor_matrix(problem: DAProblem) -> DimensionMatrix:
    return DimensionMatrix.from_quantities(problem.b_side, tag="B")


def response_matrix(problem: DAProblem) -> DimensionMatrix:
    return DimensionMatrix.from_quantities(problem.responses, tag="A")


@dataclass(frozen=True)
class PiGroup:
    """A dimensionless monomial in the problem's quantities.

    ``exponents`` is ordered like ``names`` (the quantities the group may
    involve). Induced dimension is exactly zero.
    """

    kind: str  # "predictor" or "response"
    exponents: tuple[Fraction, ...]
    names: tuple[str, ...]
    response_index: int | None = None

    def exponent_of(self, name: str) -> Fraction:
        try:
            return self.exponents[self.names.index(name)]
        except ValueError:
            return Fraction(0)

    @property
    def formula(self) -> str:
        return format_monomial(self.names, self.exponents)

    def induced_dimension(self, dims_by_name: dict[str, DimVector], k: int) -> DimVector:
        total = DimVector.zero(k)
        for name, e in zip(self.names, self.exponents):
            if e != 0:
                total = total + dims_by_name[name].scale(e)
        return total


def format_monomial(names, exponents) -> str:
    num, den = [], []
    for name, e in zip(names, exponents):
        if e == 0:
            continue
        mag = abs(e)
        part = name if mag == 1 else f"{name}^{mag}"
        (num if e > 0 else den).append(part)
    if not num and not den:
        return "1"
    top = "*".join(num) if num else "1"
    if not den:
        return top
    bottom = "*".join(den)
    if len(den) > 1:
        bottom = f"({bottom})"
    return f"{top}/{bottom}"


@dataclass(frozen=True)
class ReductionCounts:
    """Bookkeeping for the response-reduction path."""

    n_kept: int  # responses surviving exclusion (r1)
    n_outside_span: int  # kept responses with dimension outside span(B) (r2)
    n_groups: int  # dimensionless response groups (r3)
    rank_predictors: int  # rank(B)
    rank_augmented: int  # rank([A* B])


@dataclass(frozen=True)
class SpanCheck:
    subset: bool
    failing: tuple[str, ...]


@dataclass(frozen=True)
class ResponseReduction:
    kept: tuple[str, ...]
    excluded: tuple[tuple[str, str], ...]  # (name, reason)
    counts: ReductionCounts


@dataclass(frozen=True)
class DAModel:
    """Derived dimensionless model for a DAProblem."""

    problem: DAProblem
    predictor_groups: tuple[PiGroup, ...]
    response_groups: tuple[PiGroup, ...]
    excluded_responses: tuple[tuple[str, str], ...]
    counts: ReductionCounts
    span_ok: bool
    response_factor_subsets: dict[str, tuple[int, ...]] | None = None

    @property
    def n_factors(self) -> int:
        return len(self.predictor_groups)


def rank_exact(m: DimensionMatrix) -> int:
    if not m.columns:
        raise ValueError("empty dimension matrix")
    return exactlin.rank(m.rows())


def span_check(a: DimensionMatrix, b: DimensionMatrix) -> SpanCheck:
    """Columnwise test that every response dimension lies in span(B)."""
    b_cols = [b.column(j) for j in range(len(b.columns))]
    failing = tuple(
        a.names[j]
        for j in range(len(a.columns))
        if not exactlin.in_span(b_cols, a.column(j))
    )
    return SpanCheck(subset=not failing, failing=failing)


def reduce_responses(a: DimensionMatrix, b: DimensionMatrix) -> ResponseReduction:
    """Exclude responses that no response/predictor combination can absorb.

    A response is dropped when its dimension lies outside the span of the
    other responses together with the predictors. Exclusion is single-pass:
    if a kept response's membership certificate used column j, then column j
    itself is representable and never excluded, so no iteration is needed.
    """
    r = len(a.columns)
    b_cols = [b.column(j) for j in range(len(b.columns))]
    kept_idx, excluded = [], []
    for j in range(r):
        others = [a.column(i) for i in range(r) if i != j]
        if exactlin.in_span(others + b_cols, a.column(j)):
            kept_idx.append(j)
        else:
            excluded.append(
                (a.names[j], "dimension not representable by other responses and predictors")
            )
    if not kept_idx:
        raise ValueError("no usable responses: every response dimension is unrepresentable")

    rank_b = exactlin.rank(b.rows()) if b.columns else 0
    outside = [j for j in kept_idx if not exactlin.in_span(b_cols, a.column(j))]
    star_cols = tuple(a.columns[j] for j in outside)
    aug = DimensionMatrix(
        columns=star_cols + b.columns,
        names=tuple(a.names[j] for j in outside) + b.names,
        tag="C",
    )
    rank_c = exactlin.rank(aug.rows()) if aug.columns else 0
    n_kept = len(kept_idx)
    counts = ReductionCounts(
        n_kept=n_kept,
        n_outside_span=len(outside),
        n_groups=n_kept - rank_c + rank_b,
        rank_predictors=rank_b,
        rank_augmented=rank_c,
    )
    return ResponseReduction(
        kept=tuple(a.names[j] for j in kept_idx),
        excluded=tuple(excluded),
        counts=counts,
    )


def predictor_groups(b: DimensionMatrix) -> list[PiGroup]:
    """Nullspace basis of B as canonicalized dimensionless monomials."""
    basis = exactlin.nullspace(b.rows())
    return [
        PiGroup(kind="predictor", exponents=tuple(exactlin.canonicalize(v)), names=b.names)
        for v in basis
    ]


def response_groups_direct(a: DimensionMatrix, b: DimensionMatrix) -> list[PiGroup]:
    """One group per response: Y_i times the predictor monomial solving B y = -a_i.

    Requires every response dimension in span(B). Exponent on the response
    itself is exactly 1; the predictor part is the minimum-support solution
    (any other valid solution differs by a predictor group).
    """
    rows_b = b.rows()
    groups = []
    names = a.names + b.names
    for i in range(len(a.columns)):
        rhs = [-x for x in a.column(i)]
        y = exactlin.solve(rows_b, rhs)
        if y is None:
            raise ValueError(f"response {a.names[i]} cannot be made dimensionless")
        expo = [Fraction(0)] * len(a.columns)
        expo[i] = Fraction(1)
        groups.append(
            PiGroup(
                kind="response",
                exponents=tuple(expo + y),
                names=names,
                response_index=i,
            )
        )
    return groups


def response_groups_combined(
    a_kept: DimensionMatrix, b: DimensionMatrix, expected: int
) -> list[PiGroup]:
    """Dimensionless response groups on the reduced path.

    Works in the joint column space [kept responses | predictors]: nullspace
    vectors with nonzero response part are dimensionless monomials mixing
    responses and predictors. Greedy selection in nullspace-basis order keeps
    the first ``expected`` vectors with linearly independent response parts,
    which makes the choice deterministic.
    """
    n_resp = len(a_kept.columns)
    joint = DimensionMatrix(
        columns=a_kept.columns + b.columns,
        names=a_kept.names + b.names,
    )
    basis = exactlin.nullspace(joint.rows())
    chosen: list[Row] = []
    resp_parts: list[Row] = []
    for v in basis:
        part = v[:n_resp]
        if all(x == 0 for x in part):
            continue
        if exactlin.rank(resp_parts + [part]) > len(resp_parts):
            resp_parts.append(part)
            chosen.append(v)
        if len(chosen) == expected:
            break
    if len(chosen) != expected:
        raise ValueError(
            f"found {len(chosen)} independent response groups, expected {expected}"
        )
    groups = []
    for v in chosen:
        cv = exactlin.canonicalize(v)
        idx = next(i for i in range(n_resp) if cv[i] != 0)
        groups.append(
            PiGroup(kind="response", exponents=tuple(cv), names=joint.names, response_index=idx)
        )
    return groups


def derive_model(problem: DAProblem) -> DAModel:
    """Full derivation: predictor groups plus response groups on either path."""
    a = response_matrix(problem)
    b = predictor_matrix(problem)
    if not a.columns:
        raise ValueError("problem declares no responses")
    if not b.columns:
        raise ValueError("problem declares no predictors")

    pred = predictor_groups(b)
    check = span_check(a, b)
    if check.subset:
        resp = response_groups_direct(a, b)
        rank_b = exactlin.rank(b.rows())
        counts = ReductionCounts(
            n_kept=len(a.columns),
            n_outside_span=0,
            n_groups=len(a.columns),
            rank_predictors=rank_b,
            rank_augmented=rank_b,
        )
        excluded: tuple = ()
    else:
        reduction = reduce_responses(a, b)
        kept = DimensionMatrix(
            columns=tuple(problem.quantity(n).dim for n in reduction.kept),
            names=reduction.kept,
        )
        resp = response_groups_combined(kept, b, reduction.counts.n_groups)
        counts = reduction.counts
        excluded = reduction.excluded

    model = DAModel(
        problem=problem,
        predictor_groups=tuple(pred),
        response_groups=tuple(resp),
        excluded_responses=excluded,
        counts=counts,
        span_ok=check.subset,
        response_factor_subsets=problem.response_factor_subsets,
    )
    _assert_dimensionless(model)
    return model


def _assert_dimensionless(model: DAModel) -> None:
    dims = {q.name: q.dim for q in model.problem.quantities}
    k = len(model.problem.base_dims)
    for g in model.predictor_groups + model.response_groups:
        if not g.induced_dimension(dims, k).is_zero:
            raise AssertionError(f"group {g.formula} is not dimensionless")


def unit_rescale(value: float, dim: DimVector, scale_factors) -> float:
    """Value after rescaling each base unit by the given positive factor."""
    if len(scale_factors) != len(dim):
        raise ValueError("one scale factor per base dimension required")
    out = value
    for c, e in zip(scale_factors, dim.exponents):
        if c <= 0:
            raise ValueError(f"non-positive scale factor {c}")
        out *= float(c) ** float(-e)
    return out
