"""Estimation, identification and correction of the maximal-regularity angle.

Pipeline:

1. ``g_hat`` compares the variations along the canonical axes,
   ``(theta_e2 / theta_e1) ** (1 / (2 H_min))``.
2. ``gamma = arctan(g_hat)`` gives four candidate angles.  The candidate with
   the largest regularity summed over a grid of spacings wins.
3. A correction factor ``F`` removes the bias of the non-dominant term, and
   the winning inverse branch is applied once more to ``g_hat / F``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .grid import nearest_indices
from .regularity import (
    Direction,
    EmpiricalVariogram,
    TGridPolicy,
    as_variogram,
    default_delta,
    h_hat_directional,
    h_min_hat,
)

__all__ = [
    "DeltaGrid",
    "AngleConfig",
    "AngleEstimate",
    "Candidate",
    "g_hat",
    "candidate_angles",
    "candidate_set",
    "identify_alpha",
    "correction_factor",
    "apply_branch",
    "estimate_r_hat",
    "estimate_alpha_adjusted",
    "F_MIN",
    "F_MAX",
]

F_MIN, F_MAX = 1e-3, 1e3
HALF_PI = 0.5 * math.pi


def _mod_pi(x: float) -> float:
    y = math.fmod(x, math.pi)
    if y < 0:
        y += math.pi
    return 0.0 if y >= math.pi else y


@dataclass(frozen=True)
class DeltaGrid:
    values: tuple

    def __post_init__(self):
        v = tuple(float(x) for x in self.values)
        if not v:
            raise ValueError("empty delta grid")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("delta grid must be strictly increasing")
        if v[0] <= 0:
            raise ValueError("spacings must be positive")
        object.__setattr__(self, "values", v)

    @classmethod
    def default(cls, m0: int, k0: int = 15, upper: float = 0.4) -> "DeltaGrid":
        lo = default_delta(m0)
        if k0 == 1:
            return cls((lo,))
        return cls(tuple(np.linspace(lo, upper, k0)))

    def check_admissible(self, m0: int) -> None:
        floor = (2.0 * m0) ** -0.5
        if self.values[0] < floor:
            raise ValueError(f"smallest spacing {self.values[0]:g} is below (2 M0)^(-1/2) = {floor:g}")

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


@dataclass(frozen=True)
class AngleConfig:
    delta: float | None = None          # None -> M0^(-1/4)
    k0: int = 15
    delta_upper: float = 0.4
    tgrid_cap: int = 2000
    estimate_r: bool = False
    h_min_override: float | None = None

    def delta_for(self, m0: int) -> float:
        return default_delta(m0) if self.delta is None else float(self.delta)

    def grid_for(self, m0: int) -> DeltaGrid:
        return DeltaGrid.default(m0, self.k0, self.delta_upper)


@dataclass(frozen=True)
class Candidate:
    angle: float
    branch: str        # "tan" or "cot"
    reflected: bool    # angle = pi - arctan(g) or pi/2 + arctan(g)


@dataclass(frozen=True)
class AngleEstimate:
    g_hat: float
    h_min_hat: float
    gamma_hat: float
    candidates: tuple
    candidate_scores: tuple
    alpha_hat: float
    inverse_branch: str
    correction_F: float
    alpha_hat_adj: float
    reflected: bool = False
    h_max_hat: float = float("nan")
    g_hat_adj: float = float("nan")
    r_hat: float = 0.0
    delta: float = float("nan")
    flags: tuple = field(default_factory=tuple)


def g_hat(source, delta: float, tgrid=None, sigma_sq: float | None = None, h_min: float | None = None) -> float:
    """Guarded ratio ``(theta_e2 / theta_e1) ** (1 / (2 H_min))``."""
    src = as_variogram(source, sigma_sq, tgrid)
    t1 = src.theta(Direction.e1(), delta, 2.0 * delta)
    t2 = src.theta(Direction.e2(), delta, 2.0 * delta)
    num = t2 if t2 > 0 else 1.0
    den = t1 if t1 > 0 else 1.0
    hm = h_min_hat(src, delta) if h_min is None else h_min
    return (num / den) ** (1.0 / (2.0 * hm))


def candidate_set(gamma: float) -> list[Candidate]:
    """Distinct candidates, ascending, each tagged with its inverse branch.

    ``arccot(g) = pi/2 - arctan(g)``, so the four angles arctan, arccot and
    their reflections ``pi - .`` are exactly ``gamma``, ``pi/2 - gamma``,
    ``pi - gamma`` and ``pi/2 + gamma``.  Coincident angles keep the first
    tag in that order, so ``tan`` wins at ``gamma = pi/4``.
    """
    g = _mod_pi(gamma)
    if g > HALF_PI:
        g = math.pi - g
    raw = [
        Candidate(_mod_pi(g), "tan", False),
        Candidate(_mod_pi(math.pi - g), "tan", True),
        Candidate(_mod_pi(HALF_PI - g), "cot", False),
        Candidate(_mod_pi(HALF_PI + g), "cot", True),
    ]
    out: list[Candidate] = []
    for c in raw:
        if all(abs(c.angle - o.angle) > 1e-12 for o in out):
            out.append(c)
    return sorted(out, key=lambda c: c.angle)


def candidate_angles(gamma: float) -> tuple:
    return tuple(c.angle for c in candidate_set(gamma))


def identify_alpha(source, delta_grid: DeltaGrid, gamma: float, tgrid=None, sigma_sq: float | None = None):
    """Candidate with the largest regularity summed over ``delta_grid``.

    Returns ``(alpha_hat, scores)``; ``scores`` follows :func:`candidate_angles`.
    Ties go to the smallest angle.
    """
    src = as_variogram(source, sigma_sq, tgrid)
    cands = candidate_set(gamma)
    scores = tuple(
        float(sum(h_hat_directional(src, Direction(c.angle), d).h_hat for d in delta_grid)) for c in cands
    )
    best = 0
    for i in range(1, len(cands)):
        if scores[i] > scores[best]:
            best = i
    return cands[best].angle, scores


def _abs_trig(alpha: float):
    s, c = abs(math.sin(alpha)), abs(math.cos(alpha))
    if abs(s - c) <= 4 * np.finfo(float).eps:
        s = c
    return s, c


def correction_factor(alpha_hat: float, h_min_hat: float, h_max_hat: float, theta_min: float,
                      theta_max: float, delta: float, inverse_branch: str, r_hat: float = 0.0):
    """``F = ((1 + F_num) / (1 + F_denom)) ** (1 / (2 H_min))``, clamped to ``[F_MIN, F_MAX]``.

    ``theta_max`` is the variation along ``u(alpha_hat)`` and ``theta_min``
    along the orthogonal direction.  ``delta`` only enters through the
    thetas.  Returns ``(F, ok)``; ``ok`` is False when a theta is nonpositive
    and no correction was applied.
    """
    if inverse_branch not in ("tan", "cot"):
        raise ValueError(f"inverse_branch must be 'tan' or 'cot', got {inverse_branch!r}")
    if not (theta_min > 0 and theta_max > 0) or not (h_min_hat > 0):
        return 1.0, False
    s, c = _abs_trig(alpha_hat)
    # cot branch: the smooth direction dominates through sin on the first axis
    top_n, bot_n = (s, c) if inverse_branch == "cot" else (c, s)
    top_d, bot_d = bot_n, top_n
    ratio = theta_max / theta_min
    two_hb, two_hu = 2.0 * h_max_hat, 2.0 * h_min_hat
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        f_num = ratio * np.float64(top_n) ** two_hb / np.float64(bot_n) ** two_hu
        f_den = ratio * np.float64(top_d) ** two_hb / np.float64(bot_d) ** two_hu
        if r_hat:
            f_num = f_num + r_hat / (theta_min * np.float64(bot_n) ** two_hu)
            f_den = f_den + r_hat / (theta_min * np.float64(bot_d) ** two_hu)
        f = ((1.0 + f_num) / (1.0 + f_den)) ** (1.0 / two_hu)
    if not np.isfinite(f):
        f = F_MAX if f_num > f_den else F_MIN
    return float(min(F_MAX, max(F_MIN, f))), True


def apply_branch(g: float, branch: str, reflected: bool) -> float:
    """Invert ``g`` with the identified branch, result in ``[0, pi)``."""
    t = math.atan(g)
    if branch == "tan":
        a = math.pi - t if reflected else t
    else:
        a = HALF_PI + t if reflected else HALF_PI - t
    return _mod_pi(a)


def estimate_r_hat(src: EmpiricalVariogram, alpha_hat: float, delta: float) -> float:
    """Twice the cross moment of the two orthogonal legs of an ``e1`` step."""
    grid = src.dataset.grid
    u1 = np.array([math.cos(alpha_hat), math.sin(alpha_hat)])
    u2 = np.array([-math.sin(alpha_hat), math.cos(alpha_hat)])
    a1, a2 = math.cos(alpha_hat), -math.sin(alpha_hat)
    leg1 = 0.5 * a1 * delta * u1
    leg2 = 0.5 * a2 * delta * u2
    t = src._tpoints(Direction.e1(), 2.0 * delta)
    i0 = nearest_indices(grid, t - leg1 - leg2)
    i1 = nearest_indices(grid, t + leg1 - leg2)
    i2 = nearest_indices(grid, t + leg1 + leg2)
    cross = kernels.mean_cross_diff(src.dataset.values, i0, i1, i2)
    # E[(e0 - e1)(e1 - e2)] = -sigma^2 for distinct points
    return 2.0 * (cross + src.sigma_sq)


def estimate_alpha_adjusted(source, config: AngleConfig | None = None, sigma_sq: float | None = None) -> AngleEstimate:
    cfg = config or AngleConfig()
    src = as_variogram(source, sigma_sq, TGridPolicy(cfg.tgrid_cap))
    m0 = src.m0
    delta = cfg.delta_for(m0)
    dgrid = cfg.grid_for(m0)
    flags = []

    h_min = h_min_hat(src, delta) if cfg.h_min_override is None else float(cfg.h_min_override)
    g = g_hat(src, delta, h_min=h_min)
    gamma = math.atan(g)
    alpha_hat, scores = identify_alpha(src, dgrid, gamma)
    cands = candidate_set(gamma)
    win = next(c for c in cands if c.angle == alpha_hat)

    d_max = Direction(alpha_hat)
    d_min = Direction(alpha_hat + HALF_PI)
    theta_max = src.theta(d_max, delta, 2.0 * delta)
    theta_min = src.theta(d_min, delta, 2.0 * delta)
    h_max = h_hat_directional(src, d_max, delta).h_hat
    r_hat = 0.0
    if cfg.estimate_r and isinstance(src, EmpiricalVariogram):
        r_hat = estimate_r_hat(src, alpha_hat, delta)
    F, ok = correction_factor(alpha_hat, h_min, h_max, theta_min, theta_max, delta, win.branch, r_hat)
    if not ok:
        flags.append("correction_skipped")
    g_adj = g / F
    if math.isfinite(g_adj) and g_adj > 0:
        alpha_adj = apply_branch(g_adj, win.branch, win.reflected)
    else:
        alpha_adj = alpha_hat
        flags.append("adjusted_fallback")

    return AngleEstimate(
        g_hat=g,
        h_min_hat=h_min,
        gamma_hat=gamma,
        candidates=tuple(c.angle for c in cands),
        candidate_scores=scores,
        alpha_hat=alpha_hat,
        inverse_branch=win.branch,
        correction_F=F,
        alpha_hat_adj=alpha_adj,
        reflected=win.reflected,
        h_max_hat=h_max,
        g_hat_adj=g_adj,
        r_hat=r_hat,
        delta=delta,
        flags=tuple(flags),
    )
