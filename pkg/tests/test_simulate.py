import math

import numpy as np
import pytest

from direg.regularity import Direction, EmpiricalVariogram
from direg.simulate import (
    AnisoSimConfig,
    projection_extent,
    simulate_anisotropic_dataset,
    simulate_components,
)


def test_config_validation():
    with pytest.raises(ValueError):
        AnisoSimConfig(alpha=7.0)
    with pytest.raises(ValueError):
        AnisoSimConfig(alpha=0.1, h1=1.2)
    with pytest.raises(ValueError):
        AnisoSimConfig(alpha=0.1, composition="max")
    with pytest.raises(ValueError):
        AnisoSimConfig(alpha=0.1, noise_sd=-1)
    assert AnisoSimConfig(alpha=4 * math.pi / 3).reduced_alpha == pytest.approx(math.pi / 3)


@pytest.mark.parametrize("alpha", [0.0, 0.4, math.pi / 2, 2.5])
def test_projection_extent_covers_square(alpha):
    pts = np.random.default_rng(0).uniform(0, 1, size=(2000, 2))
    u1 = np.array([math.cos(alpha), math.sin(alpha)])
    u2 = np.array([-math.sin(alpha), math.cos(alpha)])
    e = projection_extent(alpha)
    assert np.abs(pts @ u1).max() <= e + 1e-12
    assert np.abs(pts @ u2).max() <= e + 1e-12


def test_deterministic_and_shape():
    cfg = AnisoSimConfig(alpha=0.7, n_surfaces=3, side_count=9, noise_sd=0.1, seed=5)
    a = simulate_anisotropic_dataset(cfg)
    b = simulate_anisotropic_dataset(cfg)
    assert a.values.shape == (3, 81)
    assert np.array_equal(a.values, b.values)
    assert a.meta["seed"] == 5


def test_noise_is_additive():
    cfg = AnisoSimConfig(alpha=0.7, n_surfaces=20, side_count=21, noise_sd=0.3, seed=5)
    ds, clean = simulate_anisotropic_dataset(cfg, return_clean=True)
    quiet = simulate_anisotropic_dataset(AnisoSimConfig(**{**cfg.as_dict(), "noise_sd": 0.0}))
    assert np.array_equal(clean, quiet.values)
    assert np.std(ds.values - clean) == pytest.approx(0.3, rel=0.05)


def test_product_equals_componentwise_product():
    base = dict(alpha=1.0, n_surfaces=4, side_count=11, seed=8)
    b1, b2 = simulate_components(AnisoSimConfig(**base))
    s = simulate_anisotropic_dataset(AnisoSimConfig(**base)).values
    p = simulate_anisotropic_dataset(AnisoSimConfig(**base, composition="product")).values
    assert np.array_equal(s, b1 + b2)
    assert np.array_equal(p, b1 * b2)


def test_fou_runs():
    ds = simulate_anisotropic_dataset(AnisoSimConfig(alpha=0.3, process_kind="fou", n_surfaces=2, side_count=11))
    assert np.all(np.isfinite(ds.values))


def _slope(src, direction, deltas=(0.05, 0.1, 0.2)):
    th = [src.theta(direction, d) for d in deltas]
    return np.polyfit(np.log(deltas), np.log(th), 1)[0]


@pytest.mark.slow
def test_isotropic_axis_slopes():
    ds = simulate_anisotropic_dataset(AnisoSimConfig(alpha=0.0, h1=0.5, h2=0.5, n_surfaces=200, side_count=51, seed=23))
    src = EmpiricalVariogram(ds, sigma_sq=0.0)
    assert _slope(src, Direction.e1()) == pytest.approx(1.0, abs=0.1)
    assert _slope(src, Direction.e2()) == pytest.approx(1.0, abs=0.1)


@pytest.mark.slow
def test_theta_along_max_direction():
    a = math.pi / 3
    ds = simulate_anisotropic_dataset(AnisoSimConfig(alpha=a, n_surfaces=200, side_count=101, seed=21))
    src = EmpiricalVariogram(ds, sigma_sq=0.0)
    assert src.theta(Direction(a), 0.1) == pytest.approx(0.1 ** 1.6, rel=0.10)
    assert _slope(src, Direction(a + math.pi / 2)) == pytest.approx(1.0, abs=0.15)


@pytest.mark.slow
def test_rotation_consistency():
    # rotated data along (u1, u2) against axis-aligned data along (e1, e2);
    # u1 is only compared at the widest spacing, where nearest-neighbour
    # rounding of the probes no longer leaks the rough component
    a = math.pi / 3
    rot = EmpiricalVariogram(simulate_anisotropic_dataset(
        AnisoSimConfig(alpha=a, n_surfaces=200, side_count=101, seed=21, extension="shift")), sigma_sq=0.0)
    ref = EmpiricalVariogram(simulate_anisotropic_dataset(
        AnisoSimConfig(alpha=0.0, n_surfaces=200, side_count=101, seed=22, extension="shift")), sigma_sq=0.0)
    for d in (0.05, 0.1, 0.2):
        assert rot.theta(Direction(a + math.pi / 2), d) == pytest.approx(ref.theta(Direction.e2(), d), rel=0.10)
    assert rot.theta(Direction(a), 0.2) == pytest.approx(ref.theta(Direction.e1(), 0.2), rel=0.10)
