"""Compound designs hedging the reduced model against a factor-space model.

The compound criterion mixes two I-efficiencies: the reduced polynomial
model(s) on the scaled dimensionless region, and a full polynomial on the
natural factors scaled to their box. A maximin pass over the mixing weight
picks the design that protects both analyses at once.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .designs import (
    MAX_SWEEPS,
    MAXFUN,
    XATOL,
    Design,
    ExchangeResult,
    WeightedModel,
    _exchange_core,
    coordinate_exchange,
    criterion_imv,
    model_trace,
)
from .geometry import PiRegion
from .models import PolynomialModel, cube_moments, full_poly


def empirical_model(p: int, order: int = 2, name: str = "empirical"):
    """Full polynomial on the p natural factors plus its exact box moments."""
    model = full_poly(order, p, name=name, map_kind="chi")
    return model, cube_moments(model.exponents)


def compound_criterion(
    design: Design,
    w: float,
    da_wmodels,
    chi_wmodel: WeightedModel,
    ref_da: float,
    ref_chi: float,
) -> float:
    """w * E_da + (1 - w) * E_chi; a singular side contributes efficiency 0."""
    if not 0.0 <= w <= 1.0:
        raise ValueError("w must lie in [0, 1]")
    t_da = criterion_imv(design, da_wmodels).value
    e_da = ref_da / t_da if np.isfinite(t_da) and t_da > 0 else 0.0
    t_chi = model_trace(design, chi_wmodel)
    e_chi = ref_chi / t_chi if np.isfinite(t_chi) and t_chi > 0 else 0.0
    return w * e_da + (1.0 - w) * e_chi


@dataclass
class RobustExchangeResult:
    design: Design
    w: float
    compound: float
    e_da: float
    e_chi: float
    trace: list[float]
    start_values: list[float]
    best_start: int
    n_sweeps: int
    seed: object = None


def robust_exchange(
    region: PiRegion,
    da_wmodels,
    chi_wmodel: WeightedModel,
    w: float,
    n: int,
    ref_da: float,
    ref_chi: float,
    seed=0,
    n_starts: int = 5,
    max_sweeps: int = MAX_SWEEPS,
    xatol: float = XATOL,
    maxfun: int = MAXFUN,
) -> RobustExchangeResult:
    """Coordinate exchange maximizing the compound criterion at fixed w."""
    if not 0.0 <= w <= 1.0:
        raise ValueError("w must lie in [0, 1]")
    wmodels = list(da_wmodels) + [chi_wmodel]
    V, value, trace, s_best, sweeps, start_values = _exchange_core(
        region,
        wmodels,
        n,
        seed,
        n_starts,
        max_sweeps,
        xatol,
        maxfun,
        mode=1,
        w_comp=float(w),
        ref_da=float(ref_da),
        ref_chi=float(ref_chi),
    )
    design = Design(chi_log=V, region=region)
    t_da = criterion_imv(design, da_wmodels).value
    e_da = ref_da / t_da if np.isfinite(t_da) and t_da > 0 else 0.0
    t_chi = model_trace(design, chi_wmodel)
    e_chi = ref_chi / t_chi if np.isfinite(t_chi) and t_chi > 0 else 0.0
    return RobustExchangeResult(
        design=design,
        w=float(w),
        compound=-value,
        e_da=e_da,
        e_chi=e_chi,
        trace=[-t for t in trace],
        start_values=[-v for v in start_values],
        best_start=s_best,
        n_sweeps=sweeps,
        seed=seed,
    )


@dataclass
class RobustSweepResult:
    grid: np.ndarray
    designs: list[Design]
    efficiencies: np.ndarray  # n_w x 2 columns (E_da, E_chi)
    compound: np.ndarray
    maximin_weight: float
    maximin_index: int
    ref_da: float
    ref_chi: float
    ref_designs: tuple

    @property
    def min_efficiency(self) -> np.ndarray:
        return self.efficiencies.min(axis=1)

    def curve_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["w", "e_da", "e_chi"])
        for wi, (ea, ec) in zip(self.grid, self.efficiencies):
            w.writerow([f"{wi:.12g}", f"{ea:.12g}", f"{ec:.12g}"])
        return buf.getvalue()


def _robust_one(args):
    (region, da_wmodels, chi_wmodel, w, n, ref_da, ref_chi, seed,
     n_starts, max_sweeps) = args
    res = robust_exchange(
        region, da_wmodels, chi_wmodel, w, n, ref_da, ref_chi,
        seed=seed, n_starts=n_starts, max_sweeps=max_sweeps,
    )
    return res.design.chi_log, res.e_da, res.e_chi, res.compound


def maximin_over_w(
    region: PiRegion,
    da_wmodels,
    chi_wmodel: WeightedModel,
    n: int,
    grid=None,
    seed=0,
    n_starts: int = 5,
    max_sweeps: int = MAX_SWEEPS,
    jobs: int = 1,
) -> RobustSweepResult:
    """Full compound-weight curve with the maximin pick.

    Reference optima for both criteria are computed once up front and
    anchor every efficiency on the curve.
    """
    if grid is None:
        grid = np.linspace(0.0, 1.0, 21)
    grid = np.asarray(grid, dtype=float)
    if np.any((grid < 0) | (grid > 1)):
        raise ValueError("weights must lie in [0, 1]")

    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(2 + grid.size)
    ref_run_da = coordinate_exchange(
        region, da_wmodels, n, seed=children[0], n_starts=n_starts,
        max_sweeps=max_sweeps,
    )
    chi_only = WeightedModel(chi_wmodel.model, chi_wmodel.mhat, 1.0)
    ref_run_chi = coordinate_exchange(
        region, [chi_only], n, seed=children[1], n_starts=n_starts,
        max_sweeps=max_sweeps,
    )
    ref_da, ref_chi = ref_run_da.value, ref_run_chi.value

    tasks = [
        (region, da_wmodels, chi_wmodel, float(w), n, ref_da, ref_chi,
         children[2 + i], n_starts, max_sweeps)
        for i, w in enumerate(grid)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_robust_one, tasks))
    else:
        rows = [_robust_one(t) for t in tasks]

    designs = [Design(chi_log=r[0], region=region) for r in rows]
    eff = np.array([[r[1], r[2]] for r in rows])
    compound = np.array([r[3] for r in rows])
    k = int(np.argmax(eff.min(axis=1)))
    return RobustSweepResult(
        grid=grid,
        designs=designs,
        efficiencies=eff,
        compound=compound,
        maximin_weight=float(grid[k]),
        maximin_index=k,
        ref_da=ref_da,
        ref_chi=ref_chi,
        ref_designs=(ref_run_da.design, ref_run_chi.design),
    )
