"""One-dimensional Gaussian paths: fBm and fractional Ornstein-Uhlenbeck.

Both generators use circulant embedding (Davies-Harte / Wood-Chan) of a
stationary covariance sequence: the fractional Gaussian noise covariance for
fBm, and ``exp(-a |t - s|^rho)`` for fOU.  When the embedding is not
nonnegative definite after ``MAX_DOUBLINGS`` size doublings, a dense Cholesky
factorisation of the exact covariance is used instead.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import linalg

__all__ = [
    "PathKind",
    "PathSpec",
    "Path1D",
    "EmbeddingError",
    "simulate_fbm_path",
    "simulate_fou_path",
    "simulate_path",
    "extend_stationary_increments",
    "fgn_autocovariance",
    "TOL_EIG",
    "MAX_DOUBLINGS",
    "CHOLESKY_CAP",
]

TOL_EIG = -1e-10       # relative to the largest circulant eigenvalue
MAX_DOUBLINGS = 6
CHOLESKY_CAP = 4096


class PathKind(str, Enum):
    FBM = "fbm"
    FOU = "fou"


class EmbeddingError(RuntimeError):
    """Neither circulant embedding nor the Cholesky fallback is usable."""


@dataclass(frozen=True)
class PathSpec:
    kind: PathKind
    hurst: float
    n_points: int
    extent: float = 1.0
    scale_a: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", PathKind(self.kind))
        if not 0.0 < self.hurst < 1.0:
            raise ValueError(f"hurst must lie in (0, 1), got {self.hurst}")
        if int(self.n_points) != self.n_points or self.n_points < 1:
            raise ValueError(f"n_points must be a positive integer, got {self.n_points}")
        if not self.extent > 0:
            raise ValueError(f"extent must be > 0, got {self.extent}")
        if not self.scale_a > 0:
            raise ValueError(f"scale_a must be > 0, got {self.scale_a}")

    @property
    def step(self) -> float:
        return self.extent / self.n_points

    @property
    def rho(self) -> float:
        return 2.0 * self.hurst


@dataclass(frozen=True)
class Path1D:
    grid: np.ndarray
    values: np.ndarray
    kind: PathKind = PathKind.FBM

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape:
            raise ValueError("grid and values must be 1-D arrays of equal length")
        if g.size > 1 and np.any(np.diff(g) <= 0):
            raise ValueError("abscissae must be strictly increasing")
        g, v = g.copy(), v.copy()
        g.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "kind", PathKind(self.kind))

    @property
    def extent(self) -> float:
        return float(self.grid[-1])

    def lookup(self, x) -> np.ndarray:
        """Values at arbitrary abscissae by nearest-abscissa lookup.

        Negative abscissae use the pathwise convention ``B(-s) = -B(s)``.
        Assumes the path sits on an equally spaced grid starting at 0.
        """
        x = np.asarray(x, dtype=float)
        n = self.grid.size - 1
        step = self.grid[-1] / n
        k = np.floor(np.abs(x) / step + 0.5).astype(np.int64)
        k = np.clip(k, 0, n)
        vals = self.values[k]
        return np.where(x < 0, -vals, vals)


def fgn_autocovariance(hurst: float, n_lags: int) -> np.ndarray:
    """Autocovariance of unit-step fractional Gaussian noise at lags 0..n_lags."""
    k = np.arange(n_lags + 1, dtype=float)
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(k + 1) ** h2 - 2.0 * k**h2 + np.abs(k - 1) ** h2)


def _stationary_cov(kind: PathKind, hurst: float, a: float, step: float, n_lags: int) -> np.ndarray:
    if kind is PathKind.FBM:
        return fgn_autocovariance(hurst, n_lags)
    lags = np.arange(n_lags + 1, dtype=float) * step
    return np.exp(-a * lags ** (2.0 * hurst))


@lru_cache(maxsize=64)
def _circulant_eigs(kind: PathKind, hurst: float, a: float, step: float, n: int):
    """Eigenvalues of the smallest admissible circulant embedding, or None."""
    half = n
    for _ in range(MAX_DOUBLINGS + 1):
        c = _stationary_cov(kind, hurst, a, step, half)
        row = np.concatenate([c, c[-2:0:-1]])
        lam = np.fft.fft(row).real
        top = lam.max()
        if lam.min() >= TOL_EIG * top:
            lam = np.clip(lam, 0.0, None)
            lam.setflags(write=False)
            return lam
        half *= 2
    return None


def _circulant_sample(lam: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    m = lam.size
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    w = np.fft.fft(np.sqrt(lam / m) * z)
    return w.real[:n]


def _cholesky_sample(cov: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = cov.shape[0]
    if n > CHOLESKY_CAP:
        raise EmbeddingError(f"Cholesky fallback needs {n} points, cap is {CHOLESKY_CAP}")
    jitter = 0.0
    for _ in range(6):
        try:
            chol = linalg.cholesky(cov + jitter * np.eye(n), lower=True)
            break
        except linalg.LinAlgError:
            jitter = max(jitter * 10.0, 1e-12 * float(np.max(np.diag(cov))))
    else:
        raise EmbeddingError("covariance is not positive definite")
    return chol @ rng.standard_normal(n)


def _fbm_cov_matrix(spec: PathSpec) -> np.ndarray:
    t = np.arange(1, spec.n_points + 1) * spec.step
    h2 = spec.rho
    return 0.5 * (t[:, None] ** h2 + t[None, :] ** h2 - np.abs(t[:, None] - t[None, :]) ** h2)


def _fou_cov_matrix(spec: PathSpec) -> np.ndarray:
    t = np.arange(spec.n_points + 1) * spec.step
    return np.exp(-spec.scale_a * np.abs(t[:, None] - t[None, :]) ** spec.rho)


def simulate_fbm_path(spec: PathSpec, rng: np.random.Generator, backend: str = "circulant") -> Path1D:
    """Exact fBm sample on ``{k * extent / n_points : k = 0..n_points}``."""
    if spec.kind is not PathKind.FBM:
        raise ValueError("simulate_fbm_path requires kind='fbm'")
    n = spec.n_points
    grid = np.arange(n + 1) * spec.step
    lam = None
    if backend == "circulant":
        lam = _circulant_eigs(PathKind.FBM, spec.hurst, 1.0, 1.0, n)
        if lam is None:
            warnings.warn("circulant embedding failed, using Cholesky", RuntimeWarning, stacklevel=2)
    elif backend != "cholesky":
        raise ValueError(f"unknown backend {backend!r}")
    if lam is not None:
        incr = _circulant_sample(lam, n, rng) * spec.step**spec.hurst
        vals = np.concatenate([[0.0], np.cumsum(incr)])
    else:
        vals = np.concatenate([[0.0], _cholesky_sample(_fbm_cov_matrix(spec), rng)])
    return Path1D(grid, vals, PathKind.FBM)


def simulate_fou_path(spec: PathSpec, rng: np.random.Generator, backend: str = "circulant") -> Path1D:
    """Stationary path with covariance ``exp(-a |t - s|^rho)``, ``rho = 2 * hurst``."""
    if spec.kind is not PathKind.FOU:
        raise ValueError("simulate_fou_path requires kind='fou'")
    n = spec.n_points
    grid = np.arange(n + 1) * spec.step
    lam = None
    if backend == "circulant":
        lam = _circulant_eigs(PathKind.FOU, spec.hurst, spec.scale_a, spec.step, n)
        if lam is None:
            warnings.warn("circulant embedding failed, using Cholesky", RuntimeWarning, stacklevel=2)
    elif backend != "cholesky":
        raise ValueError(f"unknown backend {backend!r}")
    if lam is not None:
        vals = _circulant_sample(lam, n + 1, rng)
    else:
        vals = _cholesky_sample(_fou_cov_matrix(spec), rng)
    return Path1D(grid, vals, PathKind.FOU)


def simulate_path(spec: PathSpec, rng: np.random.Generator, backend: str = "circulant") -> Path1D:
    if spec.kind is PathKind.FBM:
        return simulate_fbm_path(spec, rng, backend)
    return simulate_fou_path(spec, rng, backend)


def extend_stationary_increments(path: Path1D, neg_abscissae) -> Path1D:
    """Prepend values at nonpositive abscissae using ``B(-s) = -B(s)``.

    Positive abscissae ``|s|`` are matched to the nearest grid point of
    ``path``.  ``s = 0`` coincides with the existing origin and is not
    duplicated.
    """
    s = np.unique(np.asarray(neg_abscissae, dtype=float).ravel())
    if s.size == 0:
        return path
    if np.any(s > 0):
        raise ValueError("neg_abscissae must be <= 0")
    if np.any(np.abs(s) > path.extent * (1 + 1e-12)):
        raise ValueError(f"|s| exceeds the path extent {path.extent}")
    s = s[s < 0]
    if s.size == 0:
        return path
    idx = np.clip(np.searchsorted(path.grid, -s), 1, path.grid.size - 1)
    left = path.grid[idx - 1]
    right = path.grid[idx]
    idx = np.where(np.abs(-s - left) <= np.abs(right + s), idx - 1, idx)
    neg_vals = -path.values[idx]
    return Path1D(np.concatenate([s, path.grid]), np.concatenate([neg_vals, path.values]), path.kind)
