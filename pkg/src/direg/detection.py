"""Anisotropy detection by thresholding the regularity gap.

The gap between the regularities along ``u(a)`` and ``u(a + pi/2)`` is
compared with ``tau = eps + exp(-(log M0) ** xi)``, where ``eps`` is the
average gap between pairs of orthogonal directions drawn away from ``a``.
Both pairs should share the minimal regularity, so ``eps`` measures the
estimation error floor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .angle import DeltaGrid
from .regularity import Direction, TGridPolicy, as_variogram, h_hat_directional

__all__ = [
    "DetectionConfig",
    "DetectionReport",
    "default_j_count",
    "sample_detection_angles",
    "h_check",
    "epsilon_floor_hat",
    "threshold_tau",
    "detect_anisotropy",
]

TWO_PI = 2.0 * math.pi


def default_j_count(n_surfaces: int, m0: int) -> int:
    return math.ceil((n_surfaces * m0) ** 0.25)


@dataclass(frozen=True)
class DetectionConfig:
    j_count: int | None = None     # None -> ceil((N M0)^(1/4))
    xi: float = 1.0 / 3.0
    delta_grid: DeltaGrid | None = None
    seed: int = 0
    tgrid_cap: int = 2000

    def __post_init__(self):
        if not 0.0 < self.xi < 1.0:
            raise ValueError(f"xi must lie in (0, 1), got {self.xi}")
        if self.j_count is not None and self.j_count < 1:
            raise ValueError("j_count must be >= 1")


@dataclass(frozen=True)
class DetectionReport:
    h_max_hat: float
    h_min_hat: float
    epsilon_floor: float
    tau: float
    is_anisotropic: bool
    betas: tuple
    alpha_hat_adj: float = float("nan")


def sample_detection_angles(alpha_hat_adj: float, j_count: int, rng: np.random.Generator):
    """``beta_j ~ U[a + pi/4, a + 3 pi/4]`` and ``beta_j + pi/2``, both mod ``2 pi``."""
    if j_count < 1:
        raise ValueError("j_count must be >= 1")
    b = rng.uniform(alpha_hat_adj + math.pi / 4, alpha_hat_adj + 3 * math.pi / 4, size=j_count)
    return np.mod(b, TWO_PI), np.mod(b + math.pi / 2, TWO_PI)


def h_check(source, beta: float, delta_grid: DeltaGrid) -> float:
    """Regularity along ``u(beta)`` averaged over the spacing grid."""
    d = Direction(beta)
    return float(np.mean([h_hat_directional(source, d, x).h_hat for x in delta_grid]))


def epsilon_floor_hat(source, betas, delta_grid: DeltaGrid, tgrid=None, sigma_sq: float | None = None) -> float:
    src = as_variogram(source, sigma_sq, tgrid)
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    if betas.size == 0:
        raise ValueError("need at least one angle")
    gaps = [abs(h_check(src, b, delta_grid) - h_check(src, b + math.pi / 2, delta_grid)) for b in betas]
    return float(np.mean(gaps))


def threshold_tau(epsilon: float, m0: int, xi: float = 1.0 / 3.0) -> float:
    return epsilon + math.exp(-(math.log(m0) ** xi))


def detect_anisotropy(source, alpha_hat_adj: float, config: DetectionConfig | None = None,
                      sigma_sq: float | None = None) -> DetectionReport:
    cfg = config or DetectionConfig()
    src = as_variogram(source, sigma_sq, TGridPolicy(cfg.tgrid_cap))
    m0 = src.m0
    dgrid = cfg.delta_grid or DeltaGrid.default(m0)
    j = cfg.j_count
    if j is None:
        n = src.dataset.n_surfaces if hasattr(src, "dataset") else 1
        j = default_j_count(n, m0)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    betas, _ = sample_detection_angles(alpha_hat_adj, j, rng)
    eps = epsilon_floor_hat(src, betas, dgrid)
    tau = threshold_tau(eps, m0, cfg.xi)
    h_hi = h_check(src, alpha_hat_adj, dgrid)
    h_lo = h_check(src, alpha_hat_adj + math.pi / 2, dgrid)
    return DetectionReport(
        h_max_hat=h_hi,
        h_min_hat=h_lo,
        epsilon_floor=eps,
        tau=tau,
        is_anisotropic=bool(abs(h_hi - h_lo) > tau),
        betas=tuple(float(b) for b in betas),
        alpha_hat_adj=float(alpha_hat_adj),
    )
