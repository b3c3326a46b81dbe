"""Anisotropic bivariate processes on a rotated basis.

``X(v) = f(B1(<v, u1>), B2(<v, u2>))`` with ``u1 = (cos a, sin a)``,
``u2 = (-sin a, cos a)`` and ``f`` either a sum or a product.  B1, B2 are
independent 1-D paths simulated on ``[0, |cos a| + sin a]``, which covers
the absolute value of every projection of ``(0, 1]^2``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .fbm import PathKind, PathSpec, simulate_path
from .grid import FunctionalDataset, RegularGrid

__all__ = [
    "AnisoSimConfig",
    "simulate_components",
    "simulate_clean",
    "simulate_anisotropic_dataset",
    "projection_extent",
]

_COMPOSITIONS = ("sum", "product")
_EXTENSIONS = ("reflect", "shift")


@dataclass(frozen=True)
class AnisoSimConfig:
    alpha: float
    h1: float = 0.8
    h2: float = 0.5
    composition: str = "sum"
    process_kind: str = "fbm"
    n_surfaces: int = 100
    side_count: int = 51
    noise_sd: float = 0.0
    seed: int = 0
    # path resolution relative to the grid side, and how negative
    # abscissae are produced ("reflect": B(-s) = -B(s); "shift": simulate
    # on [0, 2E] and recentre, exact stationary increments)
    oversample: int = 4
    extension: str = "reflect"
    scale_a: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.alpha < 2 * math.pi):
            raise ValueError(f"alpha must lie in [0, 2pi), got {self.alpha}")
        for name in ("h1", "h2"):
            h = getattr(self, name)
            if not 0.0 < h < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {h}")
        if self.composition not in _COMPOSITIONS:
            raise ValueError(f"composition must be one of {_COMPOSITIONS}")
        PathKind(self.process_kind)
        if self.extension not in _EXTENSIONS:
            raise ValueError(f"extension must be one of {_EXTENSIONS}")
        if self.n_surfaces < 1 or self.side_count < 2 or self.oversample < 1:
            raise ValueError("n_surfaces, side_count and oversample must be positive (side_count >= 2)")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")

    @property
    def reduced_alpha(self) -> float:
        return self.alpha - math.pi if self.alpha > math.pi else self.alpha

    def as_dict(self) -> dict:
        return asdict(self)


def projection_extent(alpha: float) -> float:
    return abs(math.cos(alpha)) + math.sin(alpha)


def _lookup_plan(x: np.ndarray, extent: float, n: int, shifted: bool):
    """Path indices and signs for nearest-abscissa evaluation at ``x``."""
    if shifted:
        # path lives on [0, 2E] with 2n steps; x -> x + E
        step = extent / n
        k = np.floor((x + extent) / step + 0.5).astype(np.int64)
        return np.clip(k, 0, 2 * n), np.ones_like(x), n
    step = extent / n
    k = np.floor(np.abs(x) / step + 0.5).astype(np.int64)
    return np.clip(k, 0, n), np.where(x < 0, -1.0, 1.0), None


def simulate_components(cfg: AnisoSimConfig, grid: RegularGrid | None = None):
    """Noiseless ``B1(<v,u1>)`` and ``B2(<v,u2>)`` as two ``(N, M0)`` arrays.

    Both compositions are built from these, so sum and product runs with the
    same seed share their underlying draws.
    """
    grid = grid or RegularGrid(cfg.side_count)
    a = cfg.reduced_alpha
    u1 = np.array([math.cos(a), math.sin(a)])
    u2 = np.array([-math.sin(a), math.cos(a)])
    pts = grid.points()
    x1, x2 = pts @ u1, pts @ u2
    extent = projection_extent(a)
    n = cfg.oversample * cfg.side_count
    kind = PathKind(cfg.process_kind)
    # stationary processes have no distinguished origin: always recentre
    shifted = cfg.extension == "shift" or kind is PathKind.FOU
    path_n = 2 * n if shifted else n
    path_extent = 2 * extent if shifted else extent
    spec1 = PathSpec(kind, cfg.h1, path_n, path_extent, cfg.scale_a)
    spec2 = PathSpec(kind, cfg.h2, path_n, path_extent, cfg.scale_a)
    k1, s1, c1 = _lookup_plan(x1, extent, n, shifted)
    k2, s2, c2 = _lookup_plan(x2, extent, n, shifted)

    path_ss = np.random.SeedSequence(cfg.seed).spawn(2)[0]
    out1 = np.empty((cfg.n_surfaces, grid.m0))
    out2 = np.empty((cfg.n_surfaces, grid.m0))
    for j, child in enumerate(path_ss.spawn(cfg.n_surfaces)):
        rng = np.random.default_rng(child)
        b1 = simulate_path(spec1, rng).values
        b2 = simulate_path(spec2, rng).values
        if shifted and kind is PathKind.FBM:
            b1 = b1 - b1[c1]
            b2 = b2 - b2[c2]
        out1[j] = s1 * b1[k1]
        out2[j] = s2 * b2[k2]
    return out1, out2


def simulate_clean(cfg: AnisoSimConfig, grid: RegularGrid | None = None) -> np.ndarray:
    c1, c2 = simulate_components(cfg, grid)
    return c1 + c2 if cfg.composition == "sum" else c1 * c2


def simulate_anisotropic_dataset(cfg: AnisoSimConfig, return_clean: bool = False):
    """Simulate ``cfg.n_surfaces`` noisy surfaces; deterministic given ``cfg.seed``."""
    grid = RegularGrid(cfg.side_count)
    clean = simulate_clean(cfg, grid)
    noisy = clean
    if cfg.noise_sd > 0:
        noise_ss = np.random.SeedSequence(cfg.seed).spawn(2)[1]
        noisy = clean + cfg.noise_sd * np.random.default_rng(noise_ss).standard_normal(clean.shape)
    ds = FunctionalDataset(grid, noisy, cfg.noise_sd, {"seed": cfg.seed, "generator": cfg.as_dict()})
    return (ds, clean) if return_clean else ds
