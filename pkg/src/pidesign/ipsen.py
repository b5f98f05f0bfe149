"""Stepwise derivation of dimensionless groups by repeated elimination.

Each step removes one base dimension from the working table by dividing
every entry through a chosen predictor's current expression; the chosen
predictor is consumed. What remains after all dimensions are gone is a
complete set of dimensionless groups, one per surviving quantity. The
step order controls which named groups come out, so problems may pin it.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction

from .dimension import (
    DAModel,
    DAProblem,
    DimVector,
    PiGroup,
    ReductionCounts,
    format_monomial,
    predictor_matrix,
    rank_exact,
    response_matrix,
    span_check,
)


@dataclass(frozen=True)
class IpsenEntry:
    """One working-table row: a monomial in the original quantities."""

    name: str
    role: str
    monomial: tuple[Fraction, ...]
    dim: DimVector

    def formula(self, names) -> str:
        return format_monomial(names, self.monomial)


@dataclass(frozen=True)
class IpsenStep:
    dimension: str
    eliminator: str
    eliminator_formula: str
    table: tuple[IpsenEntry, ...]


@dataclass(frozen=True)
class IpsenTableau:
    problem: DAProblem
    order: tuple[tuple[str, str], ...]
    steps: tuple[IpsenStep, ...]
    groups: tuple[PiGroup, ...]

    @property
    def response_groups(self) -> tuple[PiGroup, ...]:
        return tuple(g for g in self.groups if g.kind == "response")

    @property
    def predictor_groups(self) -> tuple[PiGroup, ...]:
        return tuple(g for g in self.groups if g.kind == "predictor")


def _default_order(problem: DAProblem) -> list[tuple[str, str]]:
    """First b-side quantity (declaration order) with leverage on each dimension."""
    entries = {q.name: list(q.dim.exponents) for q in problem.quantities}
    consumed: set[str] = set()
    order = []
    for i, dim_name in enumerate(problem.base_dims):
        if all(e[i] == 0 for e in entries.values()):
            continue
        pick = None
        for q in problem.b_side:
            if q.name not in consumed and entries[q.name][i] != 0:
                pick = q.name
                break
        if pick is None:
            raise ValueError(
                f"no predictor can eliminate dimension {dim_name!r}"
            )
        order.append((dim_name, pick))
        # update remaining entries to reflect the elimination
        piv = entries[pick]
        for name, e in entries.items():
            if name == pick:
                continue
            f = e[i] / piv[i]
            entries[name] = [a - f * b for a, b in zip(e, piv)]
        consumed.add(pick)
        del entries[pick]
    return order


def ipsen_derive(
    problem: DAProblem, order: tuple[tuple[str, str], ...] | None = None
) -> IpsenTableau:
    """Run the elimination and return the full step trace plus groups."""
    if order is None:
        order = problem.ipsen_order or tuple(_default_order(problem))
    names = tuple(q.name for q in problem.quantities)
    m = len(names)
    k = len(problem.base_dims)

    table: list[IpsenEntry] = []
    for j, q in enumerate(problem.quantities):
        mono = [Fraction(0)] * m
        mono[j] = Fraction(1)
        table.append(IpsenEntry(q.name, q.role, tuple(mono), q.dim))

    steps: list[IpsenStep] = []
    seen_dims: set[str] = set()
    for dim_name, var in order:
        if dim_name not in problem.base_dims:
            raise ValueError(f"unknown dimension {dim_name!r} in step order")
        if dim_name in seen_dims:
            raise ValueError(f"dimension {dim_name!r} eliminated twice")
        seen_dims.add(dim_name)
        i = problem.base_dims.index(dim_name)

        idx = next((t for t, e in enumerate(table) if e.name == var), None)
        if idx is None:
            raise ValueError(f"eliminator {var!r} missing or already consumed")
        piv = table[idx]
        if piv.role == "response":
            raise ValueError(f"cannot eliminate with response {var!r}")
        if piv.dim.exponents[i] == 0:
            raise ValueError(
                f"{var!r} has no {dim_name!r} content at this step"
            )

        new_table = []
        for e in table:
            if e.name == var:
                continue
            f = e.dim.exponents[i] / piv.dim.exponents[i]
            mono = tuple(a - f * b for a, b in zip(e.monomial, piv.monomial))
            new_table.append(IpsenEntry(e.name, e.role, mono, e.dim - piv.dim.scale(f)))
        table = new_table
        steps.append(
            IpsenStep(
                dimension=dim_name,
                eliminator=var,
                eliminator_formula=piv.formula(names),
                table=tuple(table),
            )
        )

    for e in table:
        if not e.dim.is_zero:
            raise ValueError(
                f"{e.name} still carries dimensions after elimination; "
                f"step order {order} is incomplete"
            )
    # responses first, then predictors, each in declaration order of the
    # surviving quantity the entry is built around
    ordered = sorted(table, key=lambda e: (e.role != "response", names.index(e.name)))
    groups = []
    for e in ordered:
        kind = "response" if e.role == "response" else "predictor"
        ridx = None
        if kind == "response":
            ridx = [q.name for q in problem.responses].index(e.name)
        groups.append(
            PiGroup(kind=kind, exponents=e.monomial, names=names, response_index=ridx)
        )
    return IpsenTableau(problem=problem, order=tuple(order), steps=tuple(steps), groups=tuple(groups))


def model_from_ipsen(problem: DAProblem, order=None) -> DAModel:
    """Package the elimination result as a model with count bookkeeping."""
    tab = ipsen_derive(problem, order=order)
    a = response_matrix(problem)
    b = predictor_matrix(problem)
    check = span_check(a, b)
    rank_b = rank_exact(b)
    counts = ReductionCounts(
        n_kept=len(a.columns),
        n_outside_span=len(check.failing),
        n_groups=len(tab.response_groups),
        rank_predictors=rank_b,
        rank_augmented=rank_b + len(check.failing),
    )
    return DAModel(
        problem=problem,
        predictor_groups=tab.predictor_groups,
        response_groups=tab.response_groups,
        excluded_responses=(),
        counts=counts,
        span_ok=check.subset,
        response_factor_subsets=problem.response_factor_subsets,
    )


def render_text(tab: IpsenTableau) -> str:
    """Human-readable trace, one block per elimination step."""
    names = tuple(q.name for q in tab.problem.quantities)
    out = io.StringIO()
    out.write(f"problem: {tab.problem.name or '(unnamed)'}\n")
    for n, step in enumerate(tab.steps, start=1):
        out.write(
            f"\nstep {n}: eliminate {step.dimension} using "
            f"{step.eliminator} = {step.eliminator_formula}\n"
        )
        width = max(len(e.name) for e in step.table)
        for e in step.table:
            dims = " ".join(
                f"{d}^{x}" for d, x in zip(tab.problem.base_dims, e.dim.exponents) if x != 0
            )
            out.write(f"  {e.name:<{width}}  {e.formula(names)}  [{dims or '1'}]\n")
    out.write("\ngroups:\n")
    for i, g in enumerate(tab.groups, start=1):
        out.write(f"  pi_{i} ({g.kind}): {g.formula}\n")
    return out.getvalue()


def render_csv(tab: IpsenTableau) -> str:
    """Machine-readable groups table: kind, formula, one exponent column per quantity."""
    names = tuple(q.name for q in tab.problem.quantities)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["group", "kind", "formula", *names])
    for i, g in enumerate(tab.groups, start=1):
        w.writerow([f"pi_{i}", g.kind, g.formula, *[str(e) for e in g.exponents]])
    return buf.getvalue()
