"""Problem definitions as JSON: loading, validation, and built-in fixtures.

A problem file declares base dimensions, quantities (name, dims, role,
range or value), and optionally a pinned elimination order plus per-response
factor subsets. Validation reports every field error at once, with paths
like ``quantities[3].range``.
"""

from __future__ import annotations

import json
from fractions import Fraction
from importlib import resources

from .dimension import CONSTANT, PREDICTOR, RESPONSE, DAProblem, DimVector, Quantity

_ROLES = (RESPONSE, PREDICTOR, CONSTANT)


class ProblemFormatError(ValueError):
    """Raised with one message per invalid field."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid problem definition:\n  " + "\n  ".join(self.errors))


def _parse_exponent(value, where: str, errors: list[str]) -> Fraction:
    if isinstance(value, bool):
        errors.append(f"{where}: expected a rational exponent, got a boolean")
        return Fraction(0)
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if value.is_integer():
            return Fraction(int(value))
        errors.append(
            f"{where}: non-integer float {value!r}; write rationals as strings like \"1/2\""
        )
        return Fraction(0)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError):
            errors.append(f"{where}: cannot parse {value!r} as a rational")
            return Fraction(0)
    errors.append(f"{where}: expected int or rational string, got {type(value).__name__}")
    return Fraction(0)


def _parse_quantity(d, base_dims, where: str, errors: list[str]) -> Quantity | None:
    if not isinstance(d, dict):
        errors.append(f"{where}: expected an object")
        return None
    known = {"name", "dims", "role", "range", "value"}
    for key in sorted(set(d) - known):
        errors.append(f"{where}.{key}: unknown field")

    name = d.get("name")
    if not isinstance(name, str) or not name:
        errors.append(f"{where}.name: required non-empty string")
        name = "?"

    dims = d.get("dims")
    exps = [Fraction(0)] * len(base_dims)
    if not isinstance(dims, dict):
        errors.append(f"{where}.dims: required object mapping dimension -> exponent")
    else:
        for dim_name, v in dims.items():
            if dim_name not in base_dims:
                errors.append(f"{where}.dims.{dim_name}: not a declared base dimension")
                continue
            exps[base_dims.index(dim_name)] = _parse_exponent(
                v, f"{where}.dims.{dim_name}", errors
            )

    role = d.get("role")
    if role not in _ROLES:
        errors.append(f"{where}.role: must be one of {', '.join(_ROLES)}")
        return None

    rng = d.get("range")
    val = d.get("value")
    if role == PREDICTOR:
        if (
            not isinstance(rng, (list, tuple))
            or len(rng) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in rng)
        ):
            errors.append(f"{where}.range: predictor requires [lo, hi] numbers")
            return None
        lo, hi = float(rng[0]), float(rng[1])
        if not (0 < lo <= hi):
            errors.append(f"{where}.range: need 0 < lo <= hi, got [{lo}, {hi}]")
            return None
        rng = (lo, hi)
    elif rng is not None:
        errors.append(f"{where}.range: only predictors take a range")
        rng = None

    if role == CONSTANT:
        if not isinstance(val, (int, float)) or isinstance(val, bool) or val <= 0:
            errors.append(f"{where}.value: held constant requires a positive number")
            return None
        val = float(val)
    elif val is not None:
        errors.append(f"{where}.value: only held constants take a value")
        val = None

    try:
        return Quantity(name=name, dim=DimVector(tuple(exps)), role=role, range=rng, value=val)
    except ValueError as e:
        errors.append(f"{where}: {e}")
        return None


def problem_from_dict(d: dict) -> DAProblem:
    errors: list[str] = []
    if not isinstance(d, dict):
        raise ProblemFormatError(["top level: expected an object"])
    known = {"name", "base_dims", "quantities", "ipsen_order", "response_factor_subsets"}
    for key in sorted(set(d) - known):
        errors.append(f"{key}: unknown field")

    base = d.get("base_dims")
    if (
        not isinstance(base, list)
        or not base
        or not all(isinstance(x, str) and x for x in base)
        or len(set(base)) != len(base)
    ):
        errors.append("base_dims: required list of distinct dimension names")
        base = []
    base = tuple(base)

    quantities = []
    qlist = d.get("quantities")
    if not isinstance(qlist, list) or not qlist:
        errors.append("quantities: required non-empty list")
        qlist = []
    for i, qd in enumerate(qlist):
        q = _parse_quantity(qd, base, f"quantities[{i}]", errors)
        if q is not None:
            quantities.append(q)

    order = d.get("ipsen_order")
    if order is not None:
        ok = isinstance(order, list) and all(
            isinstance(s, list) and len(s) == 2 and all(isinstance(x, str) for x in s)
            for s in order
        )
        if not ok:
            errors.append("ipsen_order: expected list of [dimension, quantity] pairs")
            order = None
        else:
            qnames = {q.name for q in quantities}
            for i, (dim_name, var) in enumerate(order):
                if dim_name not in base:
                    errors.append(f"ipsen_order[{i}]: unknown dimension {dim_name!r}")
                if var not in qnames:
                    errors.append(f"ipsen_order[{i}]: unknown quantity {var!r}")
            order = tuple((a, b) for a, b in order)

    subsets = d.get("response_factor_subsets")
    if subsets is not None:
        if not isinstance(subsets, dict):
            errors.append("response_factor_subsets: expected object mapping response -> indices")
            subsets = None
        else:
            rnames = {q.name for q in quantities if q.role == RESPONSE}
            parsed = {}
            for rname, idx in subsets.items():
                if rname not in rnames:
                    errors.append(f"response_factor_subsets.{rname}: not a response")
                    continue
                if (
                    not isinstance(idx, list)
                    or not idx
                    or not all(isinstance(x, int) and not isinstance(x, bool) and x >= 1 for x in idx)
                    or len(set(idx)) != len(idx)
                ):
                    errors.append(
                        f"response_factor_subsets.{rname}: expected distinct 1-based indices"
                    )
                    continue
                parsed[rname] = tuple(sorted(idx))
            subsets = parsed

    name = d.get("name", "")
    if not isinstance(name, str):
        errors.append("name: expected string")
        name = ""

    if errors:
        raise ProblemFormatError(errors)
    try:
        return DAProblem(
            base_dims=base,
            quantities=tuple(quantities),
            name=name,
            ipsen_order=order,
            response_factor_subsets=subsets,
        )
    except ValueError as e:
        raise ProblemFormatError([str(e)]) from None


def problem_to_dict(p: DAProblem) -> dict:
    def exp_out(e: Fraction):
        return int(e) if e.denominator == 1 else str(e)

    out: dict = {
        "name": p.name,
        "base_dims": list(p.base_dims),
        "quantities": [],
    }
    for q in p.quantities:
        qd: dict = {
            "name": q.name,
            "dims": {
                d: exp_out(e) for d, e in zip(p.base_dims, q.dim.exponents) if e != 0
            },
            "role": q.role,
        }
        if q.range is not None:
            qd["range"] = list(q.range)
        if q.value is not None:
            qd["value"] = q.value
        out["quantities"].append(qd)
    if p.ipsen_order is not None:
        out["ipsen_order"] = [list(s) for s in p.ipsen_order]
    if p.response_factor_subsets is not None:
        out["response_factor_subsets"] = {
            k: list(v) for k, v in p.response_factor_subsets.items()
        }
    return out


def load_problem(path) -> DAProblem:
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise ProblemFormatError([f"{path}: not valid JSON ({e})"]) from None
    return problem_from_dict(d)


def builtin_names() -> list[str]:
    root = resources.files("pidesign").joinpath("problems")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_builtin(name: str) -> DAProblem:
    root = resources.files("pidesign").joinpath("problems")
    path = root.joinpath(f"{name}.json")
    if not path.is_file():
        raise KeyError(f"no built-in problem {name!r}; have {', '.join(builtin_names())}")
    return problem_from_dict(json.loads(path.read_text(encoding="utf-8")))
