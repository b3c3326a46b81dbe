"""Mean-squared variations, noise variance and directional regularity.

For a direction ``u`` and spacing ``D`` the averaged squared increment

    theta_raw = mean_j mean_{t in T} (Y_j(t - D/2 u) - Y_j(t + D/2 u))^2

is computed with nearest-neighbour interpolation of every surface, then
denoised as ``theta_hat = theta_raw - 2 sigma_hat^2``.  The regularity along
``u`` follows from the log-ratio of ``theta_hat`` at ``2D`` and ``D``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from . import kernels
from .grid import FunctionalDataset, RegularGrid, nearest_indices

__all__ = [
    "Direction",
    "DirectionalVariogram",
    "RegularityEstimate",
    "TGridPolicy",
    "EmpiricalVariogram",
    "OracleVariogram",
    "as_variogram",
    "default_delta",
    "estimate_sigma_sq",
    "theta_hat",
    "h_hat_directional",
    "h_from_thetas",
    "h_min_hat",
    "theta_oracle_fbm_sum",
    "h_proxy_oracle",
]

TWO_PI = 2.0 * math.pi
H_FLOOR = 1e-3


@dataclass(frozen=True)
class Direction:
    beta: float

    def __post_init__(self):
        if not math.isfinite(self.beta):
            raise ValueError("direction angle must be finite")
        b = math.fmod(self.beta, TWO_PI)
        if b < 0:
            b += TWO_PI
        if b >= TWO_PI:  # fmod of a tiny negative can round up to 2pi
            b = 0.0
        object.__setattr__(self, "beta", b)

    @property
    def u(self) -> np.ndarray:
        return np.array([math.cos(self.beta), math.sin(self.beta)])

    @classmethod
    def e1(cls) -> "Direction":
        return cls(0.0)

    @classmethod
    def e2(cls) -> "Direction":
        return cls(math.pi / 2)


def _as_direction(d) -> Direction:
    return d if isinstance(d, Direction) else Direction(float(d))


@dataclass(frozen=True)
class DirectionalVariogram:
    direction: Direction
    delta: float
    theta_raw: float
    sigma_sq_hat: float
    theta_hat: float
    eval_count: int


@dataclass(frozen=True)
class RegularityEstimate:
    direction: Direction
    delta: float
    h_hat: float


def default_delta(m0: int) -> float:
    return m0 ** -0.25


# ---------------------------------------------------------------- noise level


def _nearest_distinct_neighbour(grid: RegularGrid) -> np.ndarray:
    # candidates at distance `spacing` in lexicographic order: (p-1,q), (p,q-1), (p,q+1)
    n = grid.side_count
    p, q = np.meshgrid(np.arange(1, n + 1), np.arange(1, n + 1), indexing="ij")
    p, q = p.ravel(), q.ravel()
    pn = np.where(p > 1, p - 1, p)
    qn = np.where(p > 1, q, np.where(q > 1, q - 1, q + 1))
    return grid.flat_index(pn, qn)


def estimate_sigma_sq(dataset: FunctionalDataset) -> float:
    """Noise variance from differences with each point's nearest distinct neighbour."""
    grid = dataset.grid
    if grid.m0 < 2:
        raise ValueError("need at least two grid points")
    nb = _nearest_distinct_neighbour(grid)
    own = np.arange(grid.m0)
    return 0.5 * kernels.mean_sq_diff(dataset.values, own, nb)


# ------------------------------------------------------------ averaging grid


@dataclass(frozen=True)
class TGridPolicy:
    """Averaging points for ``theta_hat``.

    A fixed low-discrepancy (Halton) sequence is mapped into the box of
    points whose probes ``t +- (reach/2) u`` stay at least one grid spacing
    inside the unit square.  Off-grid points keep the nearest-neighbour
    rounding of the two probes unsystematic.
    """

    cap: int = 2000

    def __post_init__(self):
        if self.cap < 1:
            raise ValueError("cap must be >= 1")

    def points(self, grid: RegularGrid, direction: Direction, reach: float) -> np.ndarray:
        u = np.abs(direction.u)
        margin = 0.5 * reach * u + grid.spacing
        lo, hi = margin, 1.0 - margin
        if np.any(hi < lo):
            raise ValueError(f"no admissible averaging points for reach {reach:g} along beta={direction.beta:g}")
        return lo + (hi - lo) * _halton(self.cap)


_HALTON_CACHE: dict[int, np.ndarray] = {}


def _halton(k: int) -> np.ndarray:
    pts = _HALTON_CACHE.get(k)
    if pts is None:
        # skip the origin, which every unscrambled Halton sequence starts with
        pts = qmc.Halton(d=2, scramble=False).random(k + 1)[1:]
        pts.setflags(write=False)
        _HALTON_CACHE[k] = pts
    return pts


# ---------------------------------------------------------- variogram sources


class EmpiricalVariogram:
    """Cached ``theta_hat`` evaluations for one dataset.

    ``tgrid`` is a :class:`TGridPolicy` or a fixed ``(K, 2)`` point array.
    """

    def __init__(self, dataset: FunctionalDataset, sigma_sq: float | None = None, tgrid=None):
        self.dataset = dataset
        self.sigma_sq = estimate_sigma_sq(dataset) if sigma_sq is None else float(sigma_sq)
        if tgrid is None:
            tgrid = TGridPolicy()
        if not isinstance(tgrid, TGridPolicy):
            tgrid = np.asarray(tgrid, dtype=float).reshape(-1, 2)
            if tgrid.shape[0] == 0:
                raise ValueError("empty averaging grid")
        self.tgrid = tgrid
        self._cache: dict[tuple, DirectionalVariogram] = {}

    @property
    def m0(self) -> int:
        return self.dataset.grid.m0

    def _tpoints(self, direction: Direction, reach: float) -> np.ndarray:
        if isinstance(self.tgrid, TGridPolicy):
            return self.tgrid.points(self.dataset.grid, direction, reach)
        return self.tgrid

    def variogram(self, direction, delta: float, reach: float | None = None) -> DirectionalVariogram:
        direction = _as_direction(direction)
        if not delta > 0:
            raise ValueError(f"delta must be > 0, got {delta}")
        reach = 2.0 * delta if reach is None else float(reach)
        key = (direction.beta, float(delta), reach)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        t = self._tpoints(direction, reach)
        half = 0.5 * delta * direction.u
        grid = self.dataset.grid
        ip = nearest_indices(grid, t + half)
        im = nearest_indices(grid, t - half)
        raw = kernels.mean_sq_diff(self.dataset.values, ip, im)
        out = DirectionalVariogram(direction, float(delta), raw, self.sigma_sq, raw - 2.0 * self.sigma_sq, len(t))
        self._cache[key] = out
        return out

    def theta(self, direction, delta: float, reach: float | None = None) -> float:
        return self.variogram(direction, delta, reach).theta_hat


class OracleVariogram:
    """Exact ``theta`` of the independent sum-of-fBms model."""

    sigma_sq = 0.0

    def __init__(self, alpha: float, h1: float, h2: float, m0: int = 51 * 51):
        self.alpha, self.h1, self.h2, self.m0 = alpha, h1, h2, m0

    def variogram(self, direction, delta: float, reach: float | None = None) -> DirectionalVariogram:
        direction = _as_direction(direction)
        th = theta_oracle_fbm_sum(self.alpha, self.h1, self.h2, direction, delta)
        return DirectionalVariogram(direction, float(delta), th, 0.0, th, 1)

    def theta(self, direction, delta: float, reach: float | None = None) -> float:
        return theta_oracle_fbm_sum(self.alpha, self.h1, self.h2, direction, delta)


def as_variogram(source, sigma_sq: float | None = None, tgrid=None):
    """Wrap a dataset as an :class:`EmpiricalVariogram`; pass variogram sources through."""
    if isinstance(source, FunctionalDataset):
        return EmpiricalVariogram(source, sigma_sq, tgrid)
    if hasattr(source, "theta"):
        return source
    raise TypeError(f"expected a FunctionalDataset or variogram source, got {type(source).__name__}")


# ------------------------------------------------------------ estimators


def theta_hat(dataset, direction, delta: float, tgrid=None, sigma_sq: float | None = None) -> DirectionalVariogram:
    """Denoised averaged squared increment along ``direction`` at spacing ``delta``."""
    return as_variogram(dataset, sigma_sq, tgrid).variogram(direction, delta)


def h_from_thetas(theta_d: float, theta_2d: float) -> float:
    """Log-ratio regularity with the fallback value 1 outside ``theta(2D) >= theta(D) > 0``."""
    if theta_2d >= theta_d > 0:
        return min(1.0, max(H_FLOOR, math.log(theta_2d / theta_d) / (2.0 * math.log(2.0))))
    return 1.0


def h_hat_directional(dataset, direction, delta: float, tgrid=None, sigma_sq: float | None = None) -> RegularityEstimate:
    src = as_variogram(dataset, sigma_sq, tgrid)
    direction = _as_direction(direction)
    # both spacings share the averaging points admissible for the larger probe
    t1 = src.theta(direction, delta, 2.0 * delta)
    t2 = src.theta(direction, 2.0 * delta, 2.0 * delta)
    return RegularityEstimate(direction, float(delta), h_from_thetas(t1, t2))


def h_min_hat(dataset, delta: float, tgrid=None, sigma_sq: float | None = None) -> float:
    """Minimum of the canonical-axis regularities.

    An axis contributes its log-ratio when both ``theta`` values are
    positive and 1 otherwise.  The result is kept in ``[H_FLOOR, 1]``.
    """
    src = as_variogram(dataset, sigma_sq, tgrid)
    vals = []
    for d in (Direction.e1(), Direction.e2()):
        a = src.theta(d, delta, 2.0 * delta)
        b = src.theta(d, 2.0 * delta, 2.0 * delta)
        if a > 0 and b > 0:
            vals.append(math.log(b / a) / (2.0 * math.log(2.0)))
        else:
            vals.append(1.0)
    return min(1.0, max(H_FLOOR, min(vals)))


# ------------------------------------------------------------------ oracles


def theta_oracle_fbm_sum(alpha: float, h1: float, h2: float, direction, delta: float) -> float:
    """``|<u,u1> D|^(2 h1) + |<u,u2> D|^(2 h2)`` for the sum of independent fBms."""
    b = _as_direction(direction).beta
    c = math.cos(b - alpha)
    s = math.sin(b - alpha)
    return abs(c * delta) ** (2.0 * h1) + abs(s * delta) ** (2.0 * h2)


def h_proxy_oracle(alpha: float, h1: float, h2: float, direction, delta: float) -> float:
    t1 = theta_oracle_fbm_sum(alpha, h1, h2, direction, delta)
    t2 = theta_oracle_fbm_sum(alpha, h1, h2, direction, 2.0 * delta)
    return math.log(t2 / t1) / (2.0 * math.log(2.0))
