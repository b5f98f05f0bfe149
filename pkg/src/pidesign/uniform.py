"""Space-filling designs on the dimensionless region.

A uniform candidate cloud is drawn by rejection from the scaled bounding
box, then thinned to a design by Ward clustering with one representative
point per cluster (fast flexible filling).
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage

from .designs import Design, WeightedModel, i_efficiency
from .geometry import PiRegion

DEFAULT_CLOUD = 10_000


@dataclass(frozen=True)
class CandidateCloud:
    """Uniform sample of the region, kept in scaled coordinates."""

    region: PiRegion
    points: np.ndarray
    n_proposed: int
    seed: object

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def acceptance_rate(self) -> float:
        return self.n / self.n_proposed

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["point"] + [f"{n}_scaled" for n in self.region.map.factor_names])
        for i, row in enumerate(self.points):
            w.writerow([i + 1] + [f"{v:.12g}" for v in row])
        return buf.getvalue()


def rejection_sample(
    region: PiRegion,
    n: int = DEFAULT_CLOUD,
    seed=0,
    max_proposals: int = 1_000_000_000,
) -> CandidateCloud:
    """Draw exactly n uniform points from the region; deterministic per seed."""
    if n < 1:
        raise ValueError("need at least one point")
    rng = np.random.default_rng(seed)
    pts, proposed, _ = region.sample_scaled(n, rng, max_proposals=max_proposals)
    return CandidateCloud(region=region, points=pts, n_proposed=proposed, seed=seed)


@dataclass(frozen=True)
class FFFResult:
    design: Design
    cloud: CandidateCloud
    labels: np.ndarray
    reps_scaled: np.ndarray
    resid: np.ndarray
    representative: str

    @property
    def n(self) -> int:
        return self.reps_scaled.shape[0]


def _maxpro_refine(Z, member_idx, reps, max_passes: int = 10) -> None:
    """Coordinate descent on the maximum-projection criterion.

    Visits clusters in order and swaps each representative for the member
    that minimizes the summed product of inverse squared coordinate gaps
    to the other representatives. Pushes points apart in every 1-D
    projection, so representatives reach cluster edges instead of
    pooling at the middle. Deterministic: first minimum wins.
    """
    n = reps.shape[0]
    if n < 2:
        return
    for _ in range(max_passes):
        changed = False
        for j, idx in enumerate(member_idx):
            members = Z[idx]
            others = np.delete(reps, j, axis=0)
            diff = members[:, None, :] - others[None, :, :]
            with np.errstate(divide="ignore"):
                cost = (1.0 / (diff * diff)).prod(axis=2).sum(axis=1)
            pick = members[int(np.argmin(cost))]
            if not np.array_equal(pick, reps[j]):
                reps[j] = pick
                changed = True
        if not changed:
            break


def fff_select(cloud: CandidateCloud, n: int, representative: str = "centroid") -> FFFResult:
    """Thin the cloud to an n-point design, one Ward cluster per point.

    Cluster centroids stay inside the convex region; the "nearest" mode
    instead returns the cloud member closest to each centroid so that
    every design point is an actual candidate. The "maxpro" mode also
    picks one member per cluster but spreads the picks apart under the
    maximum-projection criterion, trading some local uniformity for
    boundary coverage. Factor settings come from the region backsolve
    and must meet the membership tolerance.
    """
    if representative not in ("centroid", "nearest", "maxpro"):
        raise ValueError(f"unknown representative mode {representative!r}")
    N = cloud.n
    if not 1 <= n <= N:
        raise ValueError(f"need 1 <= n <= {N}, got {n}")
    if 10 * n > N and n < N:
        warnings.warn(
            f"n={n} leaves fewer than 10 cloud points per cluster (N={N})",
            stacklevel=2,
        )
    Z = cloud.points
    if n == N:
        labels = np.arange(1, N + 1)
    else:
        labels = fcluster(linkage(Z, method="ward"), t=n, criterion="maxclust")
    k = int(labels.max())
    if k != n:
        raise RuntimeError(f"clustering produced {k} clusters, wanted {n}")
    member_idx = [np.flatnonzero(labels == j + 1) for j in range(n)]
    reps = np.empty((n, Z.shape[1]))
    for j, idx in enumerate(member_idx):
        members = Z[idx]
        c = members.mean(axis=0)
        if representative != "centroid":
            # argmin takes the first minimum: lowest cloud index wins ties
            c = members[np.argmin(((members - c) ** 2).sum(axis=1))]
        reps[j] = c
    if representative == "maxpro":
        _maxpro_refine(Z, member_idx, reps)
    region = cloud.region
    bs = region.backsolve(reps, scaled=True)
    if np.any(bs.resid > region.tol):
        worst = float(bs.resid.max())
        raise RuntimeError(
            f"backsolve residual {worst:g} exceeds tolerance {region.tol:g}"
        )
    design = Design(chi_log=bs.chi_log, region=region)
    return FFFResult(
        design=design,
        cloud=cloud,
        labels=labels,
        reps_scaled=reps,
        resid=bs.resid,
        representative=representative,
    )


def fff_design(
    region: PiRegion,
    n: int,
    n_candidates: int = DEFAULT_CLOUD,
    seed=0,
    representative: str = "centroid",
    max_proposals: int = 1_000_000_000,
) -> FFFResult:
    """Cloud generation plus selection in one deterministic call."""
    cloud = rejection_sample(region, n_candidates, seed=seed, max_proposals=max_proposals)
    return fff_select(cloud, n, representative=representative)


@dataclass(frozen=True)
class UniformReport:
    design: Design
    names: tuple
    efficiencies: np.ndarray
    acceptance_rate: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "i_efficiency"])
        for name, e in zip(self.names, self.efficiencies):
            w.writerow([name, f"{e:.12g}"])
        return buf.getvalue()


def uniform_vs_parametric_report(
    fff: FFFResult,
    references,
    wmodels,
) -> UniformReport:
    """Per-model I-efficiencies of the space-filling design.

    references holds each model's own optimal design (same run size), in
    the same order as wmodels.
    """
    if len(references) != len(wmodels):
        raise ValueError("one reference design per model is required")
    effs = np.array(
        [i_efficiency(fff.design, ref, wm) for ref, wm in zip(references, wmodels)]
    )
    return UniformReport(
        design=fff.design,
        names=tuple(wm.model.name for wm in wmodels),
        efficiencies=effs,
        acceptance_rate=fff.cloud.acceptance_rate,
    )
