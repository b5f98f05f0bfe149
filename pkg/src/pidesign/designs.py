"""Parametric optimal design on the dimensionless region by coordinate exchange.

Designs live in the log factor box; models see each run through the affine
group map (or the scaled natural factors for the robustness path). The
exchange criterion for several weighted response models is the weighted sum
of Tr[M_j(xi)^-1 Mhat_j], minimized; singular information gives +inf.

The search itself runs in the kernel layer: every (row, coordinate) pair is
line-searched over its interval, with rank-one updates giving trial values.
State is rebuilt from scratch at every sweep boundary so incremental drift
cannot accumulate.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import PiRegion
from .models import PolynomialModel

XATOL = 1e-6
MAXFUN = 100
MAX_SWEEPS = 30


@dataclass(frozen=True)
class WeightedModel:
    model: PolynomialModel
    mhat: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        m = self.model.m
        if self.mhat.shape != (m, m):
            raise ValueError(
                f"{self.model.name}: moment matrix is {self.mhat.shape}, expected ({m}, {m})"
            )
        if not (self.weight >= 0):
            raise ValueError("model weight must be nonnegative")


@dataclass
class Design:
    """n runs as log factor settings, tied to their region."""

    chi_log: np.ndarray
    region: PiRegion

    def __post_init__(self):
        self.chi_log = np.atleast_2d(np.asarray(self.chi_log, dtype=float))
        if self.chi_log.shape[1] != self.region.p:
            raise ValueError("design width disagrees with the region")

    @property
    def n(self) -> int:
        return self.chi_log.shape[0]

    @property
    def chi(self) -> np.ndarray:
        return np.exp(self.chi_log)

    @property
    def pi_log(self) -> np.ndarray:
        return self.region.map_log(self.chi_log)

    @property
    def z(self) -> np.ndarray:
        return self.region.map_scaled(self.chi_log)

    def to_csv(self) -> str:
        """Runnable settings: natural factors, held constants, group values."""
        pmap = self.region.map
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = (
            ["run"]
            + list(pmap.input_names)
            + list(pmap.const_names)
            + list(pmap.factor_names)
        )
        w.writerow(header)
        chi = self.chi
        pi = np.exp(self.pi_log)
        for i in range(self.n):
            row = [str(i + 1)]
            row += [f"{x:.12g}" for x in chi[i]]
            row += [f"{v:.12g}" for v in pmap.const_values]
            row += [f"{x:.12g}" for x in pi[i]]
            w.writerow(row)
        return buf.getvalue()


def model_coords(design_chi_log, region: PiRegion, map_kind: str) -> np.ndarray:
    V = np.atleast_2d(np.asarray(design_chi_log, dtype=float))
    if map_kind == "pi":
        return region.map_scaled(V)
    return (np.exp(V) - region.box.mid) / region.box.halfw


def information_matrix(design: Design, wm: WeightedModel) -> np.ndarray:
    Z = model_coords(design.chi_log, design.region, wm.model.map_kind)
    F = wm.model.features(Z)
    return F.T @ F


@dataclass
class CriterionReport:
    value: float
    traces: np.ndarray
    names: tuple[str, ...]
    weights: np.ndarray


def model_trace(design: Design, wm: WeightedModel) -> float:
    """Tr[M(xi)^-1 Mhat], +inf when the information matrix is singular."""
    M = information_matrix(design, wm)
    try:
        np.linalg.cholesky(M)
        Minv = np.linalg.solve(M, np.eye(M.shape[0]))
    except np.linalg.LinAlgError:
        return np.inf
    t = float(np.sum(Minv * wm.mhat))
    # both matrices are PSD, so a negative trace certifies a singular M
    # that slipped past the factorization
    if not np.isfinite(t) or t < 0.0:
        return np.inf
    return t


def criterion_imv(design: Design, wmodels) -> CriterionReport:
    traces = np.array([model_trace(design, wm) for wm in wmodels])
    wts = np.array([wm.weight for wm in wmodels])
    value = float(np.sum(np.where(wts > 0, wts * traces, 0.0)))
    if np.any(np.isinf(traces[wts > 0])):
        value = np.inf
    return CriterionReport(
        value=value,
        traces=traces,
        names=tuple(wm.model.name for wm in wmodels),
        weights=wts,
    )


def d_logdet(design: Design, wmodels) -> tuple[float, np.ndarray]:
    """Factorized log-determinant of the block information matrix.

    The joint matrix is block diagonal with blocks w_j M_j, so its
    log-determinant is sum_j (m_j log w_j + log|M_j|).
    """
    parts = []
    for wm in wmodels:
        M = information_matrix(design, wm)
        sign, ld = np.linalg.slogdet(M)
        if sign <= 0:
            parts.append(-np.inf)
        else:
            parts.append(wm.model.m * np.log(wm.weight) + ld)
    parts = np.array(parts)
    return float(parts.sum()), parts


def i_efficiency(test: Design, reference: Design, wm: WeightedModel) -> float:
    """Trace-criterion efficiency of ``test`` relative to ``reference``."""
    t_ref = model_trace(reference, wm)
    t_test = model_trace(test, wm)
    if not np.isfinite(t_test):
        return 0.0
    return t_ref / t_test


# ---------------------------------------------------------------------------
# packing for the sweep kernel


class _Pack:
    def __init__(self, region: PiRegion, wmodels):
        self.region = region
        self.wmodels = list(wmodels)
        q, p = region.q, region.p
        for wm in self.wmodels:
            width = q if wm.model.map_kind == "pi" else p
            bad = [j for j in wm.model.factor_idx if not 0 <= j < width]
            if bad:
                raise ValueError(f"{wm.model.name}: factor index out of range: {bad}")
            if wm.model.map_kind == "pi":
                dead = [
                    j for j in wm.model.factor_idx if region.degenerate[j]
                ]
                if dead:
                    raise ValueError(
                        f"{wm.model.name}: uses degenerate coordinates {dead}"
                    )
        R = len(self.wmodels)
        self.map_flag = np.array(
            [0 if wm.model.map_kind == "pi" else 1 for wm in self.wmodels],
            dtype=np.int64,
        )
        self.wts = np.array([wm.weight for wm in self.wmodels])
        self.m_arr = np.array([wm.model.m for wm in self.wmodels], dtype=np.int64)
        self.nf_arr = np.array(
            [wm.model.n_factors for wm in self.wmodels], dtype=np.int64
        )
        self.fac_off = np.zeros(R + 1, dtype=np.int64)
        self.exp_off = np.zeros(R + 1, dtype=np.int64)
        self.sq_off = np.zeros(R + 1, dtype=np.int64)
        self.m_off = np.zeros(R + 1, dtype=np.int64)
        for j, wm in enumerate(self.wmodels):
            self.fac_off[j + 1] = self.fac_off[j] + wm.model.n_factors
            self.exp_off[j + 1] = self.exp_off[j] + wm.model.m * wm.model.n_factors
            self.sq_off[j + 1] = self.sq_off[j] + wm.model.m ** 2
            self.m_off[j + 1] = self.m_off[j] + wm.model.m
        self.fac_flat = np.concatenate(
            [np.asarray(wm.model.factor_idx, dtype=np.int64) for wm in self.wmodels]
        )
        self.exp_flat = np.concatenate(
            [wm.model.exponents.ravel() for wm in self.wmodels]
        )
        self.mhat_flat = np.concatenate([wm.mhat.ravel() for wm in self.wmodels])
        nsq = int(self.sq_off[-1])
        self.m_flat = np.empty(nsq)
        self.minv_flat = np.empty(nsq)
        self.d_flat = np.empty(nsq)
        self.base_flat = np.empty(nsq)
        self.work_flat = np.empty(nsq)
        self.fold_flat = np.empty(int(self.m_off[-1]))
        mmax = int(self.m_arr.max())
        self.fbuf = np.empty(mmax)
        self.gbuf = np.empty(mmax)
        self.tvals = np.empty(R)
        self.t0 = np.empty(R)
        self.slow = np.zeros(R, dtype=np.int64)

    def fresh_state(self, V) -> bool:
        """Rebuild M, M^-1, and traces from scratch; False if singular."""
        for j, wm in enumerate(self.wmodels):
            Z = model_coords(V, self.region, wm.model.map_kind)
            F = wm.model.features(Z)
            M = F.T @ F
            m = wm.model.m
            o = self.sq_off[j]
            try:
                np.linalg.cholesky(M)
                Minv = np.linalg.solve(M, np.eye(m))
            except np.linalg.LinAlgError:
                return False
            if not np.all(np.isfinite(Minv)):
                return False
            self.m_flat[o:o + m * m] = M.ravel()
            self.minv_flat[o:o + m * m] = Minv.ravel()
            self.tvals[j] = np.sum(Minv * wm.mhat)
        return True

    def combine(self, mode, w_comp, ref_da, ref_chi, n_da) -> float:
        tv = self.tvals
        if mode == 0:
            return float(np.sum(self.wts * tv))
        da = float(np.sum(self.wts[:n_da] * tv[:n_da]))
        e_da = ref_da / da if np.isfinite(da) and da > 0 else 0.0
        tc = tv[n_da]
        e_chi = ref_chi / tc if np.isfinite(tc) and tc > 0 else 0.0
        return -(w_comp * e_da + (1.0 - w_comp) * e_chi)

    def sweep(self, V, mode, w_comp, ref_da, ref_chi, n_da, xatol, maxfun) -> int:
        box = self.region.box
        return kernels.exchange_sweep(
            V,
            box.log_lo,
            box.log_hi,
            self.region.U_s,
            self.region.c_s,
            box.mid,
            box.halfw,
            self.map_flag,
            self.wts,
            self.m_arr,
            self.nf_arr,
            self.fac_flat,
            self.fac_off,
            self.exp_flat,
            self.exp_off,
            self.sq_off,
            self.m_off,
            self.mhat_flat,
            self.m_flat,
            self.minv_flat,
            self.d_flat,
            self.base_flat,
            self.work_flat,
            self.fold_flat,
            self.fbuf,
            self.gbuf,
            self.tvals,
            self.t0,
            self.slow,
            mode,
            w_comp,
            ref_da,
            ref_chi,
            n_da,
            xatol,
            maxfun,
        )


@dataclass
class ExchangeResult:
    design: Design
    value: float
    trace: list[float]
    start_values: list[float]
    best_start: int
    n_sweeps: int
    seed: object = None


def _exchange_core(
    region,
    wmodels,
    n,
    seed,
    n_starts,
    max_sweeps,
    xatol,
    maxfun,
    mode=0,
    w_comp=0.0,
    ref_da=1.0,
    ref_chi=1.0,
):
    active = [wm for wm in wmodels if wm.weight > 0 or mode == 1]
    if not active:
        raise ValueError("no models with positive weight")
    for wm in active:
        if n < wm.model.m:
            raise ValueError(
                f"{wm.model.name}: n={n} runs cannot support m={wm.model.m} terms"
            )
    n_da = len(active) - 1 if mode == 1 else len(active)
    pack = _Pack(region, active)
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(n_starts)
    best = None
    start_values = []
    for s in range(n_starts):
        rng = np.random.default_rng(children[s])
        V = None
        for _ in range(8):
            cand = region.box.sample_log(n, rng)
            if pack.fresh_state(cand):
                V = cand
                break
        if V is None:
            raise RuntimeError(
                "could not find a nonsingular starting design; "
                "increase n or simplify the models"
            )
        trace = []
        sweeps = 0
        for _ in range(max_sweeps):
            if not pack.fresh_state(V):
                break
            accepted = pack.sweep(V, mode, w_comp, ref_da, ref_chi, n_da, xatol, maxfun)
            sweeps += 1
            trace.append(pack.combine(mode, w_comp, ref_da, ref_chi, n_da))
            if accepted == 0:
                break
        if not pack.fresh_state(V):
            value = np.inf
        else:
            value = pack.combine(mode, w_comp, ref_da, ref_chi, n_da)
        start_values.append(value)
        if best is None or value < best[1]:
            best = (V, value, trace, s, sweeps)
    V, value, trace, s_best, sweeps = best
    return V, value, trace, s_best, sweeps, start_values


def coordinate_exchange(
    region: PiRegion,
    wmodels,
    n: int,
    seed=0,
    n_starts: int = 10,
    max_sweeps: int = MAX_SWEEPS,
    xatol: float = XATOL,
    maxfun: int = MAXFUN,
) -> ExchangeResult:
    """Multi-start minimization of the weighted-trace criterion."""
    V, value, trace, s_best, sweeps, start_values = _exchange_core(
        region, wmodels, n, seed, n_starts, max_sweeps, xatol, maxfun
    )
    return ExchangeResult(
        design=Design(chi_log=V, region=region),
        value=value,
        trace=trace,
        start_values=start_values,
        best_start=s_best,
        n_sweeps=sweeps,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# weight sweep over two response models


@dataclass
class WeightSweepResult:
    grid: np.ndarray
    designs: list[Design]
    efficiencies: np.ndarray  # n_w x 2
    traces: np.ndarray        # n_w x 2
    ref_traces: np.ndarray    # per-model own-optimum traces
    maximin_weight: float
    maximin_index: int

    @property
    def min_efficiency(self) -> np.ndarray:
        return self.efficiencies.min(axis=1)


def _sweep_one(args):
    (region, models, mhats, n, w1, seed, n_starts, max_sweeps) = args
    wms = []
    if w1 > 0:
        wms.append(WeightedModel(models[0], mhats[0], w1))
    if w1 < 1:
        wms.append(WeightedModel(models[1], mhats[1], 1.0 - w1))
    res = coordinate_exchange(
        region, wms, n, seed=seed, n_starts=n_starts, max_sweeps=max_sweeps
    )
    return res.design.chi_log


def weight_sweep(
    region: PiRegion,
    models,
    mhats,
    n: int,
    grid=None,
    seed=0,
    n_starts: int = 5,
    max_sweeps: int = MAX_SWEEPS,
    jobs: int = 1,
) -> WeightSweepResult:
    """Trace efficiencies of compromise designs across the weight grid.

    Endpoint designs (weight 0 and 1) are each model's own optimum and
    anchor the efficiency scale.
    """
    if len(models) != 2 or len(mhats) != 2:
        raise ValueError("the weight sweep handles exactly two response models")
    if grid is None:
        grid = np.linspace(0.0, 1.0, 21)
    grid = np.unique(np.concatenate([[0.0, 1.0], np.asarray(grid, dtype=float)]))
    if np.any((grid < 0) | (grid > 1)):
        raise ValueError("weights must lie in [0, 1]")

    root = np.random.SeedSequence(seed)
    children = root.spawn(grid.size)
    tasks = [
        (region, models, mhats, n, float(w), children[i], n_starts, max_sweeps)
        for i, w in enumerate(grid)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            chis = list(ex.map(_sweep_one, tasks))
    else:
        chis = [_sweep_one(t) for t in tasks]
    designs = [Design(chi_log=c, region=region) for c in chis]

    wm_eval = [WeightedModel(m, h, 1.0) for m, h in zip(models, mhats)]
    traces = np.array(
        [[model_trace(d, wm) for wm in wm_eval] for d in designs]
    )
    i1 = int(np.argmax(grid))  # w1 = 1: model-0 optimum
    i0 = int(np.argmin(grid))  # w1 = 0: model-1 optimum
    ref = np.array([traces[i1, 0], traces[i0, 1]])
    eff = ref[None, :] / traces
    min_eff = eff.min(axis=1)
    k = int(np.argmax(min_eff))
    return WeightSweepResult(
        grid=grid,
        designs=designs,
        efficiencies=eff,
        traces=traces,
        ref_traces=ref,
        maximin_weight=float(grid[k]),
        maximin_index=k,
    )
