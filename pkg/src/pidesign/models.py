"""Polynomial response models on scaled factors and their moment matrices.

Bases are full polynomial: all monomials up to the given order, graded
ordering (total degree ascending, lexicographic within a degree). Moment
matrices come either from Monte Carlo draws on the dimensionless region or
in closed form for the uniform measure on the cube [-1, 1]^d, where
E[z^e] is 1/(e+1) for even e and 0 otherwise, coordinatewise.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb

import numpy as np

from . import kernels
from .geometry import PiRegion


@dataclass(frozen=True)
class PolynomialModel:
    """Full polynomial basis over a subset of the design factors.

    ``factor_idx`` selects columns of the factor matrix the model sees;
    ``map_kind`` says which scaled coordinates those are ("pi" for the
    dimensionless groups, "chi" for the natural factors).
    """

    name: str
    order: int
    factor_idx: tuple[int, ...]
    map_kind: str = "pi"

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("order must be nonnegative")
        if self.map_kind not in ("pi", "chi"):
            raise ValueError(f"unknown map kind {self.map_kind!r}")
        if len(set(self.factor_idx)) != len(self.factor_idx):
            raise ValueError("factor_idx entries must be distinct")

    @property
    def n_factors(self) -> int:
        return len(self.factor_idx)

    @property
    def m(self) -> int:
        return comb(self.n_factors + self.order, self.order)

    @property
    def exponents(self) -> np.ndarray:
        """m x n_factors exponent rows in graded order."""
        d = self.n_factors
        rows = []
        for deg in range(self.order + 1):
            for combo in combinations_with_replacement(range(d), deg):
                e = [0] * d
                for j in combo:
                    e[j] += 1
                rows.append(e)
        return np.array(rows, dtype=np.int64)

    def features(self, Z) -> np.ndarray:
        """Basis evaluation; Z columns are the full factor vector."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        sub = np.ascontiguousarray(Z[:, list(self.factor_idx)])
        return kernels.monomials_batch(sub, self.exponents)

    def term_names(self, factor_names=None) -> list[str]:
        labels = (
            [f"z{j + 1}" for j in self.factor_idx]
            if factor_names is None
            else [factor_names[j] for j in self.factor_idx]
        )
        out = []
        for row in self.exponents:
            parts = [
                lbl if e == 1 else f"{lbl}^{e}"
                for lbl, e in zip(labels, row)
                if e > 0
            ]
            out.append("1" if not parts else "*".join(parts))
        return out


def full_poly(order: int, n_factors: int, name: str = "", map_kind: str = "pi",
              factor_idx=None) -> PolynomialModel:
    idx = tuple(range(n_factors)) if factor_idx is None else tuple(factor_idx)
    return PolynomialModel(
        name=name or f"poly{order}", order=order, factor_idx=idx, map_kind=map_kind
    )


def cube_moments(exponents: np.ndarray) -> np.ndarray:
    """Exact moment matrix of the basis under uniform on [-1, 1]^d."""
    E = np.asarray(exponents, dtype=np.int64)
    S = E[:, None, :] + E[None, :, :]
    odd = np.any(S % 2 == 1, axis=2)
    vals = np.prod(1.0 / (S + 1.0), axis=2)
    vals[odd] = 0.0
    return vals


def mc_region_moments(
    model: PolynomialModel, region: PiRegion, n: int, seed
) -> np.ndarray:
    """Monte Carlo moment matrix under uniform on the scaled region."""
    if model.map_kind != "pi":
        raise ValueError("region moments apply to dimensionless-factor models")
    rng = np.random.default_rng(seed)
    Z, _, _ = region.sample_scaled(n, rng)
    F = model.features(Z)
    return (F.T @ F) / n


def moment_matrix(model: PolynomialModel, region: PiRegion, n: int = 50_000,
                  seed=20_25) -> np.ndarray:
    """Moment matrix for the model's own coordinate system."""
    if model.map_kind == "chi":
        return cube_moments(model.exponents)
    return mc_region_moments(model, region, n, seed)
