"""Factor boxes, the affine log map, and the induced dimensionless region.

Taking logs turns each dimensionless group into an affine function of the
log factor settings: log pi = U log v + c, with held constants folded into
the offset. The feasible region in group space is the image of the log
factor box under that map. Its bounding box is exact (the map is linear per
coordinate); membership and back-solving to factor settings reduce to a
box-constrained least-squares problem, convex, so a vanishing projected
gradient certifies the answer.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .dimension import DAModel

DEGENERATE_TOL = 1e-12
MEMBER_TOL = 1e-9


@dataclass(frozen=True)
class FactorBox:
    """Ranges of the varying predictors, all strictly positive."""

    names: tuple[str, ...]
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if lo.shape != hi.shape or lo.ndim != 1 or len(self.names) != lo.size:
            raise ValueError("names, lo, hi must align")
        if np.any(lo <= 0) or np.any(hi < lo):
            raise ValueError("factor ranges must satisfy 0 < lo <= hi")

    @property
    def p(self) -> int:
        return self.lo.size

    @property
    def log_lo(self) -> np.ndarray:
        return np.log(self.lo)

    @property
    def log_hi(self) -> np.ndarray:
        return np.log(self.hi)

    @property
    def log_mid(self) -> np.ndarray:
        return 0.5 * (self.log_lo + self.log_hi)

    @property
    def log_halfw(self) -> np.ndarray:
        return 0.5 * (self.log_hi - self.log_lo)

    @property
    def mid(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def halfw(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    def sample_log(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.log_lo, self.log_hi, size=(n, self.p))

    def contains_log(self, V, atol: float = 1e-12):
        V = np.atleast_2d(V)
        return np.all(
            (V >= self.log_lo - atol) & (V <= self.log_hi + atol), axis=1
        )


def factor_box(model: DAModel) -> FactorBox:
    pred = model.problem.predictors
    if not pred:
        raise ValueError("no varying predictors")
    return FactorBox(
        names=tuple(q.name for q in pred),
        lo=np.array([q.range[0] for q in pred]),
        hi=np.array([q.range[1] for q in pred]),
    )


@dataclass(frozen=True)
class LogPiMap:
    """log pi = U log v + c over the varying predictors."""

    U: np.ndarray
    c: np.ndarray
    factor_names: tuple[str, ...]
    formulas: tuple[str, ...]
    input_names: tuple[str, ...]
    const_names: tuple[str, ...]
    const_values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "U", np.asarray(self.U, dtype=float))
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float))

    @property
    def q(self) -> int:
        return self.U.shape[0]

    @property
    def p(self) -> int:
        return self.U.shape[1]

    def __call__(self, chi_log) -> np.ndarray:
        chi_log = np.atleast_2d(np.asarray(chi_log, dtype=float))
        return chi_log @ self.U.T + self.c


def log_pi_map(model: DAModel) -> LogPiMap:
    pred = model.problem.predictors
    consts = model.problem.constants
    pnames = tuple(q.name for q in pred)
    rows, offsets, formulas = [], [], []
    for g in model.predictor_groups:
        rows.append([float(g.exponent_of(nm)) for nm in pnames])
        off = 0.0
        for q in consts:
            e = g.exponent_of(q.name)
            if e != 0:
                off += float(e) * math.log(q.value)
        offsets.append(off)
        formulas.append(g.formula)
    return LogPiMap(
        U=np.array(rows, dtype=float),
        c=np.array(offsets, dtype=float),
        factor_names=tuple(f"pi_{i}" for i in range(1, len(rows) + 1)),
        formulas=tuple(formulas),
        input_names=pnames,
        const_names=tuple(q.name for q in consts),
        const_values=tuple(q.value for q in consts),
    )


@dataclass
class BacksolveResult:
    chi_log: np.ndarray
    resid: np.ndarray
    converged: np.ndarray

    @property
    def chi(self) -> np.ndarray:
        return np.exp(self.chi_log)


class PiRegion:
    """Image of the log factor box under the group map, with scaling caches."""

    def __init__(self, box: FactorBox, pmap: LogPiMap, tol: float = MEMBER_TOL,
                 backsolve_seed: int = 7):
        if pmap.p != box.p:
            raise ValueError("map and box disagree on the number of predictors")
        self.box = box
        self.map = pmap
        self.tol = tol
        self.backsolve_seed = backsolve_seed

        U, c = pmap.U, pmap.c
        self.center = U @ box.log_mid + c
        self.halfw = np.abs(U) @ box.log_halfw
        self.degenerate = self.halfw < DEGENERATE_TOL * np.maximum(1.0, np.abs(self.center))
        if np.any(self.degenerate):
            dead = [pmap.factor_names[i] for i in np.flatnonzero(self.degenerate)]
            warnings.warn(
                f"degenerate region coordinates (no variation): {', '.join(dead)}",
                stacklevel=2,
            )
        self._hw_eff = np.where(self.degenerate, 1.0, self.halfw)
        self.bound_lo = self.center - self.halfw
        self.bound_hi = self.center + self.halfw
        # scaled coordinates: bounding box maps onto [-1, 1]^q
        self.U_s = U / self._hw_eff[:, None]
        self.c_s = (c - self.center) / self._hw_eff
        self._pinv_s = np.linalg.pinv(self.U_s)

    @property
    def q(self) -> int:
        return self.map.q

    @property
    def p(self) -> int:
        return self.map.p

    def scale(self, Y) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        return (Y - self.center) / self._hw_eff

    def unscale(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return Z * self._hw_eff + self.center

    def map_log(self, chi_log) -> np.ndarray:
        return self.map(chi_log)

    def map_scaled(self, chi_log) -> np.ndarray:
        chi_log = np.atleast_2d(np.asarray(chi_log, dtype=float))
        return chi_log @ self.U_s.T + self.c_s

    def vertex_images(self) -> np.ndarray:
        """Group-space images of all factor-box corners (log coordinates)."""
        p = self.p
        if p > 16:
            raise ValueError(f"2^{p} corners is too many to enumerate")
        lo, hi = self.box.log_lo, self.box.log_hi
        idx = np.arange(2 ** p)[:, None]
        bits = (idx >> np.arange(p)[None, :]) & 1
        corners = np.where(bits == 1, hi, lo)
        return self.map(corners)

    def backsolve(self, Y, scaled: bool = False, max_starts: int = 5) -> BacksolveResult:
        """Factor settings whose image is nearest the requested group values.

        Convex least squares on the log box; a point converged in any round
        is at the global minimum, so only unconverged points get restarts.
        """
        Z = np.atleast_2d(np.asarray(Y, dtype=float))
        if not scaled:
            Z = self.scale(Z)
        b = Z - self.c_s
        lo, hi = self.box.log_lo, self.box.log_hi
        # start 1: clipped minimum-norm solution (exact for interior points)
        X = np.clip(b @ self._pinv_s.T, lo, hi)
        pg = kernels.bcls_batch(self.U_s, b, lo, hi, X)
        conv = pg < kernels.PG_TOL
        rng = np.random.default_rng(np.random.SeedSequence(self.backsolve_seed))
        resid = np.max(np.abs(X @ self.U_s.T - b), axis=1)
        for k in range(1, max_starts):
            if np.all(conv):
                break
            redo = np.flatnonzero(~conv)
            if k == 1:
                X2 = np.tile(self.box.log_mid, (redo.size, 1))
            else:
                X2 = rng.uniform(lo, hi, size=(redo.size, lo.size))
            pg2 = kernels.bcls_batch(self.U_s, b[redo], lo, hi, X2)
            r2 = np.max(np.abs(X2 @ self.U_s.T - b[redo]), axis=1)
            take = np.flatnonzero(r2 < resid[redo])
            X[redo[take]] = X2[take]
            resid[redo[take]] = r2[take]
            conv[redo] |= pg2 < kernels.PG_TOL
        return BacksolveResult(chi_log=X, resid=resid, converged=conv)

    def contains(self, Y, scaled: bool = False) -> np.ndarray:
        res = self.backsolve(Y, scaled=scaled)
        return res.resid <= self.tol

    def sample_scaled(
        self,
        n: int,
        rng: np.random.Generator,
        max_proposals: int = 1_000_000_000,
        batch: int = 16384,
    ):
        """Uniform draws from the region in scaled coordinates.

        Returns (points, n_proposed, n_accepted_total); raises if the
        proposal budget runs out before n points are accepted.
        """
        out = np.empty((n, self.q))
        got = 0
        proposed = 0
        while got < n:
            if proposed >= max_proposals:
                raise RuntimeError(
                    f"proposal budget exhausted: {got}/{n} accepted "
                    f"after {proposed} proposals"
                )
            take = min(batch, max_proposals - proposed)
            Z = rng.uniform(-1.0, 1.0, size=(take, self.q))
            if np.any(self.degenerate):
                Z[:, self.degenerate] = 0.0
            keep = np.flatnonzero(self.contains(Z, scaled=True))
            m = min(keep.size, n - got)
            if m < keep.size:
                # stop the proposal count at the one that filled the quota
                proposed += int(keep[m - 1]) + 1
            else:
                proposed += take
            out[got:got + m] = Z[keep[:m]]
            got += m
        return out, proposed, got

    def summary_text(self) -> str:
        out = io.StringIO()
        out.write(f"region: q={self.q} groups over p={self.p} predictors\n")
        for i in range(self.q):
            flag = "  [degenerate]" if self.degenerate[i] else ""
            out.write(
                f"  {self.map.factor_names[i]} = {self.map.formulas[i]}: "
                f"log range [{self.bound_lo[i]:.6g}, {self.bound_hi[i]:.6g}]"
                f"{flag}\n"
            )
        if self.map.const_names:
            held = ", ".join(
                f"{n}={v:g}" for n, v in zip(self.map.const_names, self.map.const_values)
            )
            out.write(f"  held constant: {held}\n")
        return out.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["factor", "formula", "log_lo", "log_hi", "degenerate"])
        for i in range(self.q):
            w.writerow(
                [
                    self.map.factor_names[i],
                    self.map.formulas[i],
                    repr(self.bound_lo[i]),
                    repr(self.bound_hi[i]),
                    int(self.degenerate[i]),
                ]
            )
        return buf.getvalue()


def region_for(model: DAModel, tol: float = MEMBER_TOL) -> PiRegion:
    return PiRegion(factor_box(model), log_pi_map(model), tol=tol)
