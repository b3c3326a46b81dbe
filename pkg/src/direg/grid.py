"""Regular-grid bivariate functional data.

Surfaces are observed on the common design ``{(p/n, q/n) : 1 <= p, q <= n}``
with ``n = side_count``.  Values are stored row-major in lexicographic
``(t1, t2)`` order, i.e. flat index ``m = (p - 1) * n + (q - 1)``.
"""
from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

__all__ = [
    "RegularGrid",
    "Point2",
    "Surface",
    "FunctionalDataset",
    "build_grid",
    "nearest_index",
    "nearest_indices",
    "add_noise",
    "save_dataset",
    "load_dataset",
    "load_clean",
]


@dataclass(frozen=True)
class Point2:
    t1: float
    t2: float

    def __post_init__(self):
        if not (math.isfinite(self.t1) and math.isfinite(self.t2)):
            raise ValueError(f"non-finite point ({self.t1}, {self.t2})")

    def as_array(self) -> np.ndarray:
        return np.array([self.t1, self.t2])


@dataclass(frozen=True)
class RegularGrid:
    side_count: int

    def __post_init__(self):
        if isinstance(self.side_count, bool) or int(self.side_count) != self.side_count or self.side_count < 2:
            raise ValueError(f"side_count must be an integer >= 2, got {self.side_count!r}")

    @property
    def spacing(self) -> float:
        return 1.0 / self.side_count

    @property
    def m0(self) -> int:
        return self.side_count * self.side_count

    @property
    def axis(self) -> np.ndarray:
        """Coordinates ``p / n`` for ``p = 1..n``."""
        return np.arange(1, self.side_count + 1) / self.side_count

    def points(self) -> np.ndarray:
        """All grid points as an ``(M0, 2)`` array in lexicographic order."""
        a = self.axis
        t1, t2 = np.meshgrid(a, a, indexing="ij")
        return np.column_stack([t1.ravel(), t2.ravel()])

    def flat_index(self, p, q):
        """Flat index of 1-based coordinates ``(p, q)``."""
        return (np.asarray(p) - 1) * self.side_count + (np.asarray(q) - 1)


def build_grid(side_count: int) -> RegularGrid:
    grid = RegularGrid(side_count)
    return RegularGrid(int(side_count)) if not isinstance(side_count, int) else grid


def _axis_index(x: np.ndarray, n: int) -> np.ndarray:
    # exact half-way ties go to the lower index -> lexicographically smallest point
    p = np.ceil(np.asarray(x, dtype=float) * n - 0.5)
    return np.clip(p, 1, n).astype(np.int64)


def nearest_indices(grid: RegularGrid, pts) -> np.ndarray:
    """Vectorised :func:`nearest_index` for an ``(k, 2)`` array of points.

    On a product grid the Euclidean nearest neighbour separates per axis, so
    rounding each coordinate (ties downward) is exact, and clipping the axis
    index reproduces the nearest boundary point for out-of-domain queries.
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    n = grid.side_count
    return (_axis_index(pts[:, 0], n) - 1) * n + (_axis_index(pts[:, 1], n) - 1)


def nearest_index(grid: RegularGrid, q) -> int:
    """Index of the grid point closest to ``q`` (ties broken lexicographically)."""
    if isinstance(q, Point2):
        q = (q.t1, q.t2)
    t1, t2 = float(q[0]), float(q[1])
    if not (math.isfinite(t1) and math.isfinite(t2)):
        raise ValueError("query point must be finite")
    return int(nearest_indices(grid, [[t1, t2]])[0])


@dataclass(frozen=True)
class Surface:
    grid: RegularGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.m0,):
            raise ValueError(f"expected {self.grid.m0} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("surface values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def as_image(self) -> np.ndarray:
        """Values reshaped to ``(n, n)`` with axis 0 indexing ``t1``."""
        n = self.grid.side_count
        return self.values.reshape(n, n)


@dataclass(frozen=True)
class FunctionalDataset:
    """``N`` noisy surfaces sharing one regular grid.

    ``values`` is an ``(N, M0)`` array; row ``j`` is surface ``Y^(j)``.
    """

    grid: RegularGrid
    values: np.ndarray
    noise_sd: float = 0.0
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=float, ndmin=2)
        if v.ndim != 2 or v.shape[1] != self.grid.m0:
            raise ValueError(f"values must have shape (N, {self.grid.m0}), got {v.shape}")
        if v.shape[0] < 1:
            raise ValueError("a dataset needs at least one surface")
        if not np.all(np.isfinite(v)):
            raise ValueError("dataset values must be finite")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_surfaces(cls, surfaces, noise_sd=0.0, meta=None) -> "FunctionalDataset":
        surfaces = list(surfaces)
        if not surfaces:
            raise ValueError("a dataset needs at least one surface")
        grid = surfaces[0].grid
        if any(s.grid != grid for s in surfaces):
            raise ValueError("all surfaces must share the same grid")
        return cls(grid, np.stack([s.values for s in surfaces]), noise_sd, dict(meta or {}))

    @property
    def n_surfaces(self) -> int:
        return self.values.shape[0]

    @property
    def surfaces(self) -> list[Surface]:
        return [Surface(self.grid, row) for row in self.values]

    def surface(self, j: int) -> Surface:
        return Surface(self.grid, self.values[j])

    def subset(self, idx) -> "FunctionalDataset":
        return FunctionalDataset(self.grid, self.values[np.atleast_1d(idx)], self.noise_sd, dict(self.meta))


def add_noise(dataset: FunctionalDataset, sd: float, rng: np.random.Generator) -> FunctionalDataset:
    """Add i.i.d. ``N(0, sd^2)`` noise to every observation."""
    if sd < 0:
        raise ValueError(f"noise sd must be >= 0, got {sd}")
    noise = rng.standard_normal(dataset.values.shape)
    values = dataset.values + sd * noise if sd > 0 else dataset.values.copy()
    total_sd = math.hypot(dataset.noise_sd, sd)
    return FunctionalDataset(dataset.grid, values, total_sd, dict(dataset.meta))


# --------------------------------------------------------------------------
# on-disk format: <dir>/meta.json + surface_0000.csv (t1,t2,value) per surface


def _write_surface_csv(path: Path, pts: np.ndarray, values: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("t1,t2,value\n")
        for (t1, t2), v in zip(pts, values):
            fh.write(f"{float(t1)!r},{float(t2)!r},{float(v)!r}\n")


def save_dataset(dataset: FunctionalDataset, directory, clean=None) -> Path:
    """Write ``dataset`` to ``directory``; ``clean`` optionally holds noiseless values."""
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
        pts = dataset.grid.points()
        for j, row in enumerate(dataset.values):
            _write_surface_csv(d / f"surface_{j:04d}.csv", pts, row)
        if clean is not None:
            clean = np.asarray(clean, dtype=float).reshape(dataset.values.shape)
            for j, row in enumerate(clean):
                _write_surface_csv(d / f"clean_{j:04d}.csv", pts, row)
        meta = {
            "side_count": dataset.grid.side_count,
            "N": dataset.n_surfaces,
            "noise_sd": dataset.noise_sd,
            "seed": dataset.meta.get("seed"),
            "generator": dataset.meta.get("generator", {}),
            "has_clean": clean is not None,
        }
        fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
        os.replace(tmp, d / "meta.json")
    except OSError as exc:
        raise OSError(f"cannot write dataset to {d}: {exc}") from exc
    return d


def _read_surface_csv(path: Path, grid: RegularGrid) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows and rows[0][0].strip() == "t1":
        rows = rows[1:]
    try:
        arr = np.array(rows, dtype=float)
    except ValueError as exc:
        raise OSError(f"{path}: malformed surface file ({exc})") from exc
    if arr.shape != (grid.m0, 3):
        raise OSError(f"{path}: expected {grid.m0} rows of t1,t2,value")
    idx = nearest_indices(grid, arr[:, :2])
    out = np.empty(grid.m0)
    out[idx] = arr[:, 2]
    return out


def _read_meta(d: Path) -> dict:
    try:
        with open(d / "meta.json") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise OSError(f"{d}: missing meta.json") from exc
    except json.JSONDecodeError as exc:
        raise OSError(f"{d}/meta.json: malformed ({exc})") from exc


def load_dataset(directory) -> FunctionalDataset:
    d = Path(directory)
    meta = _read_meta(d)
    grid = RegularGrid(int(meta["side_count"]))
    n = int(meta["N"])
    try:
        values = np.stack([_read_surface_csv(d / f"surface_{j:04d}.csv", grid) for j in range(n)])
    except FileNotFoundError as exc:
        raise OSError(f"{d}: missing surface file ({exc.filename})") from exc
    extra = {"seed": meta.get("seed"), "generator": meta.get("generator", {})}
    return FunctionalDataset(grid, values, float(meta.get("noise_sd", 0.0)), extra)


def load_clean(directory):
    """Noiseless companion values saved alongside a dataset, or ``None``."""
    d = Path(directory)
    meta = _read_meta(d)
    if not meta.get("has_clean"):
        return None
    grid = RegularGrid(int(meta["side_count"]))
    return np.stack([_read_surface_csv(d / f"clean_{j:04d}.csv", grid) for j in range(int(meta["N"]))])
