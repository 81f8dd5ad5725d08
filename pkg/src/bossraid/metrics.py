"""Evaluation maths: win rates, generalisation score, controllability, diversity, occupancy.

Standard deviations are population SDs (divide by n) everywhere, including the
covariance behind the PCA, so that ``pca_sd ** 2`` is exactly the top
covariance eigenvalue.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .content import GEN_PARAMS, ParamBounds, ScenarioConfig, SkillSpec, scale_params
from .engine.core import EpisodeLog, play_batch


class ZeroPopulationMean(ValueError):
    pass


class EmptyInput(ValueError):
    pass


class EmptyAfterFilter(ValueError):
    pass


@dataclass(frozen=True)
class WinRateEstimate:
    mean: float
    sd: float
    n: int
    base_seed: int
    policy: str = "heuristic"

    @property
    def stderr(self) -> float:
        return self.sd / math.sqrt(self.n)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "sd": self.sd, "stderr": self.stderr, "n": self.n,
                "base_seed": self.base_seed, "policy": self.policy}


def estimate_win_rate(scenario: ScenarioConfig, policy: str, n: int, base_seed: int = 0) -> WinRateEstimate:
    """Play seeds ``base_seed .. base_seed + n - 1``; mean is wins / n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    wins = int(play_batch(scenario, policy, range(base_seed, base_seed + n)).wins.sum())
    p = wins / n
    return WinRateEstimate(p, math.sqrt(p * (1.0 - p)), n, base_seed, policy)


def adjusted_score(score_unseen: float, population_scores: Sequence[float]) -> float:
    """Score on unseen content relative to the mean score of a population trained on it."""
    if len(population_scores) == 0:
        raise ZeroPopulationMean("population is empty")
    mean = math.fsum(population_scores) / len(population_scores)
    if mean <= 0:
        raise ZeroPopulationMean(f"population mean must be > 0, got {mean}")
    return score_unseen / mean


@dataclass(frozen=True)
class ControllabilitySample:
    target: float
    measured: float
    skill: SkillSpec | None = None

    def __post_init__(self):
        for name in ("target", "measured"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @property
    def error(self) -> float:
        return abs(self.target - self.measured)


@dataclass(frozen=True)
class WinrateError:
    mean_abs_error: float
    sd: float
    total: float  # the unnormalised sum
    errors: tuple[float, ...]

    def to_dict(self) -> dict:
        return {"mean_abs_error": self.mean_abs_error, "sd": self.sd, "total": self.total,
                "n": len(self.errors)}


def winrate_error(samples: Sequence[ControllabilitySample]) -> WinrateError:
    if not samples:
        raise EmptyInput("winrate_error needs at least one sample")
    errs = np.array([s.error for s in samples])
    return WinrateError(float(errs.mean()), float(errs.std()), math.fsum(errs), tuple(errs.tolist()))


# --------------------------------------------------------------------------
# PCA


def jacobi_eigh(a: np.ndarray, tol: float = 1e-15, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a small symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues descending, eigenvectors as columns).
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    v = np.eye(n)
    scale = max(float(np.abs(a).max()), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(float((np.triu(a, 1) ** 2).sum()))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(a[p, q]) * 1e150 < abs(diff):
                    t = a[p, q] / diff  # small-angle limit; theta itself would overflow
                else:
                    theta = diff / (2.0 * a[p, q])
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def _fix_sign(vec: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    for x in vec:
        if abs(x) > eps:
            return vec if x > 0 else -vec
    return vec


@dataclass(frozen=True)
class PCAResult:
    components: np.ndarray  # (k, d), unit rows
    projections: np.ndarray  # (n, k)
    explained_variance: np.ndarray  # (k,)
    mean: np.ndarray
    degenerate: bool


def pca_project(matrix: np.ndarray, k: int = 1) -> PCAResult:
    """Top-``k`` principal components of the rows of ``matrix``.

    Each component's first non-negligible entry is positive. Data with zero
    covariance is reported as degenerate with all-zero projections; its
    components are then the leading coordinate axes.
    """
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need an n x d matrix with n >= 2")
    d = x.shape[1]
    if not 1 <= k <= d:
        raise ValueError(f"k must lie in 1..{d}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / x.shape[0]
    if not np.any(cov):
        return PCAResult(np.eye(d)[:k], np.zeros((x.shape[0], k)), np.zeros(k), mean, True)
    w, v = jacobi_eigh(cov)
    comps = np.array([_fix_sign(v[:, j]) for j in range(k)])
    comps /= np.linalg.norm(comps, axis=1, keepdims=True)
    return PCAResult(comps, xc @ comps.T, np.maximum(w[:k], 0.0), mean, False)


# --------------------------------------------------------------------------
# diversity


@dataclass(frozen=True)
class DiversityReport:
    retained: int
    retained_indices: tuple[int, ...]
    range_sd: float
    cool_sd: float
    cast_sd: float
    damage_sd: float
    pca_sd: float
    pca_component: tuple[float, ...]  # over (cool_time, range, coefficient, cast_time)
    scaled: np.ndarray  # retained samples, min-max scaled, GEN_PARAMS column order

    def to_dict(self) -> dict:
        return {
            "retained": self.retained,
            "range_sd": self.range_sd,
            "cool_sd": self.cool_sd,
            "cast_sd": self.cast_sd,
            "damage_sd": self.damage_sd,
            "pca_sd": self.pca_sd,
            "pca_component": dict(zip(GEN_PARAMS, self.pca_component)),
        }


def diversity_report(samples: Sequence[ControllabilitySample], bounds: ParamBounds,
                     threshold: float = 0.1) -> DiversityReport:
    """Spread of the skills whose measured win rate is within ``threshold`` of target."""
    keep = [i for i, s in enumerate(samples) if s.error < threshold]
    if not keep:
        raise EmptyAfterFilter(f"no sample has error < {threshold}")
    rows = []
    for i in keep:
        if samples[i].skill is None:
            raise ValueError(f"sample {i} carries no skill")
        rows.append(scale_params(samples[i].skill, bounds))
    m = np.array(rows, dtype=np.float64)
    sd = m.std(axis=0)
    col = dict(zip(GEN_PARAMS, sd.tolist()))
    if len(keep) >= 2:
        pca = pca_project(m, 1)
        comp = tuple(pca.components[0].tolist())
        pca_sd = math.sqrt(pca.explained_variance[0])
    else:
        comp, pca_sd = (1.0, 0.0, 0.0, 0.0), 0.0
    return DiversityReport(
        retained=len(keep), retained_indices=tuple(keep),
        range_sd=col["range"], cool_sd=col["cool_time"], cast_sd=col["cast_time"],
        damage_sd=col["coefficient"], pca_sd=pca_sd, pca_component=comp, scaled=m,
    )


# --------------------------------------------------------------------------
# occupancy


def cell_of(x: float, y: float, arena_radius: float, resolution: int) -> tuple[int, int]:
    """(row, col) of a position on a grid over the arena's bounding square; row follows y."""
    cx = int((x + arena_radius) / (2.0 * arena_radius) * resolution)
    cy = int((y + arena_radius) / (2.0 * arena_radius) * resolution)
    return min(max(cy, 0), resolution - 1), min(max(cx, 0), resolution - 1)


def occupancy_grid(logs: Sequence[EpisodeLog], resolution: int, arena_radius: float = 20.0) -> np.ndarray:
    """Mean per-episode count of living-player ticks in each cell."""
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    grid = np.zeros((resolution, resolution))
    if not logs:
        warnings.warn("occupancy_grid called with no episodes; returning zeros", stacklevel=2)
        return grid
    for log in logs:
        trace = log.position_trace.reshape(-1, 2)
        for x, y in trace[~np.isnan(trace[:, 0])]:
            grid[cell_of(x, y, arena_radius, resolution)] += 1.0
    return grid / len(logs)
