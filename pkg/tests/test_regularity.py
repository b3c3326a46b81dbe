import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from direg.grid import FunctionalDataset, RegularGrid, nearest_indices
from direg.regularity import (
    Direction,
    EmpiricalVariogram,
    OracleVariogram,
    TGridPolicy,
    default_delta,
    estimate_sigma_sq,
    h_from_thetas,
    h_hat_directional,
    h_min_hat,
    h_proxy_oracle,
    theta_hat,
    theta_oracle_fbm_sum,
)
from direg.simulate import AnisoSimConfig, simulate_anisotropic_dataset

A = math.pi / 3


class PowerLaw:
    """Variogram source with theta = c * D^(2H) along every direction."""

    sigma_sq = 0.0
    m0 = 2601

    def __init__(self, h, c=1.0, h_by_axis=None):
        self.h, self.c, self.h_by_axis = h, c, h_by_axis or {}

    def theta(self, direction, delta, reach=None):
        h = self.h_by_axis.get(round(Direction(direction.beta if isinstance(direction, Direction) else direction).beta, 9), self.h)
        return self.c * delta ** (2 * h)


class Table:
    sigma_sq = 0.0
    m0 = 2601

    def __init__(self, fn):
        self.fn = fn

    def theta(self, direction, delta, reach=None):
        return self.fn(direction, delta)


def test_direction_normalised():
    assert Direction(-math.pi / 2).beta == pytest.approx(1.5 * math.pi)
    assert Direction(2 * math.pi).beta == 0.0
    assert np.allclose(Direction.e2().u, [0, 1], atol=1e-15)
    with pytest.raises(ValueError):
        Direction(float("inf"))


def test_default_delta():
    assert default_delta(2601) == pytest.approx(2601 ** -0.25)


# ---------------------------------------------------------------- sigma


def test_sigma_constant_surfaces():
    g = RegularGrid(11)
    ds = FunctionalDataset(g, np.outer(np.arange(4.0), np.ones(g.m0)))
    assert estimate_sigma_sq(ds) == 0.0


def test_sigma_pure_noise():
    g = RegularGrid(51)
    ds = FunctionalDataset(g, np.random.default_rng(0).normal(0, 0.5, (100, g.m0)))
    assert estimate_sigma_sq(ds) == pytest.approx(0.25, rel=0.05)


def test_sigma_linear_surface():
    # the first column has no left neighbour and pairs with a point on the
    # same t1 line, so only (n-1)/n of the differences equal one spacing
    g = RegularGrid(51)
    ds = FunctionalDataset(g, np.tile(g.points()[:, 0], (3, 1)))
    n = g.side_count
    assert estimate_sigma_sq(ds) == pytest.approx(g.spacing ** 2 * (n - 1) / (2 * n), rel=1e-12)


# ----------------------------------------------------------------- T grid


@pytest.mark.parametrize("beta", [0.0, 0.3, math.pi / 2, 2.0, 4.0])
@pytest.mark.parametrize("reach", [0.05, 0.4, 0.8])
def test_tgrid_probes_inside(beta, reach):
    g = RegularGrid(51)
    d = Direction(beta)
    t = TGridPolicy(500).points(g, d, reach)
    assert len(t) == 500
    for sign in (1, -1):
        q = t + sign * 0.5 * reach * d.u
        assert q.min() >= g.spacing - 1e-12 and q.max() <= 1 - g.spacing + 1e-12


def test_tgrid_too_wide():
    with pytest.raises(ValueError):
        TGridPolicy().points(RegularGrid(51), Direction(0.0), 1.0)


# ------------------------------------------------------------------ theta


def test_theta_constants_zero():
    g = RegularGrid(21)
    ds = FunctionalDataset(g, np.outer(np.arange(5.0), np.ones(g.m0)))
    assert theta_hat(ds, Direction(0.4), 0.1).theta_hat == 0.0


def test_theta_fixed_tgrid():
    g = RegularGrid(11)
    vals = np.random.default_rng(1).standard_normal((4, g.m0))
    t = np.array([[0.5, 0.5], [0.4, 0.6]])
    v = theta_hat(FunctionalDataset(g, vals), Direction(0.0), 0.2, tgrid=t, sigma_sq=0.0)
    ip = nearest_indices(g, t + [0.1, 0])
    im = nearest_indices(g, t - [0.1, 0])
    assert v.theta_raw == pytest.approx(np.mean((vals[:, ip] - vals[:, im]) ** 2))
    assert v.eval_count == 2


def test_theta_direction_symmetry(small_noisy):
    ds, _ = small_noisy
    src = EmpiricalVariogram(ds)
    for b in (0.0, 0.3, 1.1, 2.5):
        for d in (0.1, 0.2):
            assert src.theta(b, d) == src.theta(b + math.pi, d)


def test_theta_denoised(small_noisy):
    ds, _ = small_noisy
    src = EmpiricalVariogram(ds)
    v = src.variogram(Direction(0.2), 0.1)
    assert v.theta_hat == pytest.approx(v.theta_raw - 2 * src.sigma_sq)


def test_theta_oracle_values():
    assert theta_oracle_fbm_sum(A, 0.8, 0.5, Direction.e1(), 0.1) == pytest.approx(0.094880, abs=1e-4)
    assert theta_oracle_fbm_sum(A, 0.8, 0.5, Direction.e2(), 0.1) == pytest.approx(0.069965, abs=1e-4)
    assert theta_oracle_fbm_sum(A, 0.8, 0.5, Direction(A), 0.1) == pytest.approx(0.1 ** 1.6, rel=1e-12)
    q = math.pi / 4
    assert theta_oracle_fbm_sum(q, 0.8, 0.5, Direction.e1(), 0.07) == pytest.approx(
        theta_oracle_fbm_sum(q, 0.8, 0.5, Direction.e2(), 0.07), rel=1e-12)


def test_oracle_dataset_theta_axes(oracle_data):
    src = EmpiricalVariogram(oracle_data, sigma_sq=0.0)
    for d in (Direction.e1(), Direction.e2()):
        for delta in (0.05, 0.1):
            assert src.theta(d, delta) == pytest.approx(theta_oracle_fbm_sum(A, 0.8, 0.5, d, delta), rel=0.10)


# ---------------------------------------------------------------- H hat


def test_h_power_law_exact():
    src = OracleVariogram(0.0, 0.8, 0.5)
    assert h_hat_directional(src, Direction.e1(), 0.05).h_hat == pytest.approx(0.8, abs=1e-12)
    assert h_hat_directional(src, Direction.e2(), 0.05).h_hat == pytest.approx(0.5, abs=1e-12)


def test_h_guards():
    assert h_from_thetas(0.0, 1.0) == 1.0
    assert h_from_thetas(-1.0, 1.0) == 1.0
    assert h_from_thetas(0.5, 0.4) == 1.0
    assert h_from_thetas(1.0, 4.0) == pytest.approx(1.0)
    assert h_from_thetas(1.0, 1.0) == pytest.approx(1e-3)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.001, 0.2), st.floats(0.1, 10))
def test_h_power_law_property(h, delta, c):
    src = Table(lambda d, x: c * x ** (2 * h))
    assert h_hat_directional(src, 0.7, delta).h_hat == pytest.approx(h, abs=1e-9)
    assert h_min_hat(src, delta) == pytest.approx(h, abs=1e-9)


def test_h_min_constant_dataset():
    g = RegularGrid(11)
    ds = FunctionalDataset(g, np.ones((3, g.m0)))
    assert h_min_hat(ds, 0.1) == 1.0


def test_h_min_axis_guard():
    # e1 degenerate, e2 a clean power law
    src = Table(lambda d, x: 0.0 if d.beta == 0.0 else x ** 1.2)
    assert h_min_hat(src, 0.1) == pytest.approx(0.6)


@pytest.mark.slow
@pytest.mark.parametrize("h1", [0.5, 0.8])
def test_h_min_monte_carlo(h1):
    ds = simulate_anisotropic_dataset(AnisoSimConfig(alpha=0.0, h1=h1, h2=0.5, n_surfaces=200, side_count=101, seed=4))
    assert h_min_hat(ds, default_delta(ds.grid.m0)) == pytest.approx(0.5, abs=0.05)


def test_proxy_oracle():
    assert h_proxy_oracle(A, 0.8, 0.5, Direction(A + math.pi / 2), 0.05) == pytest.approx(0.5, abs=1e-12)
    assert h_proxy_oracle(A, 0.8, 0.5, Direction(A), 0.05) == pytest.approx(0.8, abs=1e-12)
    # dominant-term limit: the remainder ratio r = (c D)^1.6 / (s D) doubles
    # as r 2^0.6, so the proxy sits at 0.5 + log((1 + 2^0.6 r) / (1 + r)) / log 4
    delta = 1e-4
    r = (math.sqrt(0.5) * delta) ** 1.6 / (math.sqrt(0.5) * delta)
    exact = 0.5 + math.log((1 + 2 ** 0.6 * r) / (1 + r)) / math.log(4)
    got = h_proxy_oracle(math.pi / 4, 0.8, 0.5, Direction.e1(), delta)
    assert got == pytest.approx(exact, abs=1e-12)
    assert abs(got - 0.5) < 1.5e-3
    assert abs(h_proxy_oracle(math.pi / 4, 0.8, 0.5, Direction.e1(), 1e-8) - 0.5) < 1e-4


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, math.pi), st.floats(0.0, 2 * math.pi))
def test_proxy_dominance(alpha, beta):
    d = (beta - alpha) % math.pi
    if min(d, math.pi - d) < 1e-3:
        return
    assert h_proxy_oracle(alpha, 0.8, 0.5, beta, 0.05) < 0.8
    # the limit is reached at a speed set by |sin(beta - alpha)|
    far, near = h_proxy_oracle(alpha, 0.8, 0.5, beta, 1e-4), h_proxy_oracle(alpha, 0.8, 0.5, beta, 1e-8)
    assert abs(near - 0.5) <= abs(far - 0.5)
    if abs(math.sin(beta - alpha)) >= 0.2:
        assert far == pytest.approx(0.5, abs=1e-2)


def test_proxy_continuity():
    rng = np.random.default_rng(7)

    def ratios(k):
        b = rng.uniform(0, math.pi, size=(k, 2))
        out = []
        for b1, b2 in b:
            dh = abs(h_proxy_oracle(A, 0.8, 0.5, b1, 0.05) - h_proxy_oracle(A, 0.8, 0.5, b2, 0.05))
            out.append(dh / abs(b1 - b2) ** 1.0)
        return np.array(out)

    c_fit = ratios(100).max()
    assert np.isfinite(c_fit) and c_fit < 20
    assert ratios(100).max() <= 2 * c_fit
