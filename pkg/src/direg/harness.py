"""Configuration-driven Monte Carlo experiments with deterministic reports.

Every replication derives its seeds from ``(master_seed, rep_id, stage)``
alone, so results do not depend on the number of workers or on completion
order.  Reports are written atomically (temporary file + rename).
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from .angle import AngleConfig, estimate_alpha_adjusted
from .detection import DetectionConfig, detect_anisotropy
from .regularity import EmpiricalVariogram, TGridPolicy
from .simulate import AnisoSimConfig, simulate_anisotropic_dataset
from .smoothing import paired_relative_risk, simulate_online

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

__all__ = [
    "ConfigError",
    "EstimationConfig",
    "ExperimentConfig",
    "ReplicationRecord",
    "CSV_COLUMNS",
    "derive_seed",
    "load_config",
    "preset",
    "run_replication",
    "run_experiment",
    "summarize",
    "emit_report",
    "resolve_parallelism",
]

KINDS = ("angle", "detection", "smoothing")
CSV_COLUMNS = ("rep_id", "seed", "alpha_true", "alpha_hat", "alpha_hat_adj", "risk", "extra", "wall_seconds")
STAGE_SIM, STAGE_ONLINE, STAGE_DETECT = 0, 1, 2


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class EstimationConfig:
    delta: float | None = None      # None -> M0^(-1/4)
    k0: int = 15
    delta_upper: float = 0.4
    tgrid_cap: int = 2000
    estimate_r: bool = False
    xi: float = 1.0 / 3.0
    j_count: int | None = None
    bandwidth_rule: str = "rate"

    def angle_config(self) -> AngleConfig:
        return AngleConfig(self.delta, self.k0, self.delta_upper, self.tgrid_cap, self.estimate_r)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    sim: AnisoSimConfig
    estimation: EstimationConfig = field(default_factory=EstimationConfig)
    replications: int = 50
    master_seed: int = 0
    parallelism: int = 1
    out_path: str | None = None
    record_timing: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.estimation.bandwidth_rule not in ("bound", "rate"):
            raise ConfigError("bandwidth_rule must be 'bound' or 'rate'")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ReplicationRecord:
    rep_id: int
    seed: int
    alpha_true: float
    alpha_hat: float
    alpha_hat_adj: float
    risk: float
    extra: float
    wall_seconds: float = 0.0
    details: dict = field(default_factory=dict)


# ------------------------------------------------------------------- config


def _build(cls, data: dict, where: str):
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**data)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a table/object")
    data = dict(data)
    sim = data.pop("sim", None)
    if not isinstance(sim, dict):
        raise ConfigError("missing [sim] table")
    est = data.pop("estimation", {}) or {}
    if isinstance(est.get("delta"), str):
        if est["delta"] != "auto":
            raise ConfigError("estimation.delta must be 'auto' or a number")
        est = {**est, "delta": None}
    if isinstance(est.get("j_count"), str):
        est = {**est, "j_count": None}
    data["sim"] = _build(AnisoSimConfig, sim, "sim")
    data["estimation"] = _build(EstimationConfig, est, "estimation")
    return _build(ExperimentConfig, data, "experiment")


def read_config_file(path) -> dict:
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read config {p}: {exc}") from exc
    try:
        if p.suffix.lower() == ".toml":
            return tomllib.loads(raw.decode())
        return json.loads(raw)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    return config_from_dict(read_config_file(path))


def preset(kind: str, full: bool = False) -> ExperimentConfig:
    """Desk-scale defaults for each study (``full`` restores 400 replications)."""
    reps = 400 if full else 50
    if kind == "angle":
        sim = AnisoSimConfig(alpha=math.pi / 4, h1=0.8, h2=0.5, n_surfaces=100, side_count=51, noise_sd=0.1)
    elif kind == "detection":
        sim = AnisoSimConfig(alpha=math.pi / 3, h1=0.5, h2=0.5, n_surfaces=150, side_count=51, noise_sd=0.1)
    elif kind == "smoothing":
        sim = AnisoSimConfig(alpha=math.pi / 3, h1=0.8, h2=0.5, n_surfaces=150, side_count=101, noise_sd=0.05)
    else:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    return ExperimentConfig(kind=kind, sim=sim, replications=reps)


# -------------------------------------------------------------------- seeds


def derive_seed(master_seed: int, rep_id: int, stage: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=(rep_id, stage))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def resolve_parallelism(cfg: ExperimentConfig) -> int:
    env = os.environ.get("DIREG_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"DIREG_THREADS must be a positive integer, got {env!r}") from exc
        if n < 1:
            raise ConfigError("DIREG_THREADS must be >= 1")
        return n
    return cfg.parallelism


# ------------------------------------------------------------- replications


def _digest(a: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(a).tobytes()).hexdigest()[:16]


def run_replication(cfg: ExperimentConfig, rep_id: int) -> ReplicationRecord:
    t0 = time.perf_counter()
    seed = derive_seed(cfg.master_seed, rep_id, STAGE_SIM)
    sim = replace(cfg.sim, seed=seed)
    alpha_true = sim.reduced_alpha
    est_cfg = cfg.estimation
    ds = simulate_anisotropic_dataset(sim)
    src = EmpiricalVariogram(ds, tgrid=TGridPolicy(est_cfg.tgrid_cap))
    est = estimate_alpha_adjusted(src, est_cfg.angle_config())
    details: dict[str, Any] = {
        "g_hat": est.g_hat,
        "h_min_hat": est.h_min_hat,
        "correction_F": est.correction_F,
        "inverse_branch": est.inverse_branch,
        "flags": list(est.flags),
    }
    extra = float("nan")
    if cfg.kind == "angle":
        extra = est.correction_F
    elif cfg.kind == "detection":
        det_seed = derive_seed(cfg.master_seed, rep_id, STAGE_DETECT)
        rep = detect_anisotropy(src, est.alpha_hat_adj, DetectionConfig(est_cfg.j_count, est_cfg.xi, seed=det_seed,
                                                                       tgrid_cap=est_cfg.tgrid_cap))
        extra = 1.0 if rep.is_anisotropic else 0.0
        details.update(tau=rep.tau, epsilon_floor=rep.epsilon_floor, h_max_hat=rep.h_max_hat, h_min_hat_dir=rep.h_min_hat)
    else:
        online_cfg = replace(sim, seed=derive_seed(cfg.master_seed, rep_id, STAGE_ONLINE), n_surfaces=1)
        online = simulate_online(online_cfg)
        res = paired_relative_risk(ds, online, est_cfg.angle_config(), est_cfg.bandwidth_rule, alpha=est.alpha_hat_adj)
        extra = res["relative_risk"]
        details.update(
            risk_aniso=res["aniso"]["risk"],
            risk_iso=res["iso"]["risk"],
            bandwidths_aniso=[res["aniso"]["plan"].h1, res["aniso"]["plan"].h2],
            bandwidths_iso=[res["iso"]["plan"].h1, res["iso"]["plan"].h2],
            learning_sha256=_digest(ds.values),
        )
    wall = time.perf_counter() - t0 if cfg.record_timing else 0.0
    return ReplicationRecord(rep_id, seed, alpha_true, est.alpha_hat, est.alpha_hat_adj,
                             abs(est.alpha_hat_adj - alpha_true), extra, wall, details)


def _run_one(args):
    cfg, rep_id = args
    return run_replication(cfg, rep_id)


def run_experiment(cfg: ExperimentConfig, progress=None) -> list[ReplicationRecord]:
    """All replications, returned in ``rep_id`` order."""
    workers = min(resolve_parallelism(cfg), cfg.replications)
    jobs = [(cfg, r) for r in range(cfg.replications)]
    if workers == 1:
        records = []
        for job in jobs:
            records.append(_run_one(job))
            if progress:
                progress(len(records), cfg.replications)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, jobs, chunksize=1))
    return sorted(records, key=lambda r: r.rep_id)


# ------------------------------------------------------------------ reports


def summarize(records, cfg: ExperimentConfig | None = None) -> dict:
    risks = np.array([r.risk for r in records], dtype=float)
    extras = np.array([r.extra for r in records], dtype=float)
    q1, med, q3 = np.percentile(risks, [25, 50, 75])
    out = {
        "n": len(records),
        "risk_median": float(med),
        "risk_iqr": float(q3 - q1),
        "risk_q1": float(q1),
        "risk_q3": float(q3),
    }
    if np.all(np.isfinite(extras)):
        e1, em, e3 = np.percentile(extras, [25, 50, 75])
        out.update(extra_median=float(em), extra_iqr=float(e3 - e1), extra_mean=float(extras.mean()))
    if cfg is not None:
        out["kind"] = cfg.kind
        out["config"] = cfg.as_dict()
    return out


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return _jsonable(x.item())
    return x


def emit_report(records, fmt: str, path, cfg: ExperimentConfig | None = None) -> Path:
    """Write ``records`` as CSV (plus a ``.summary.json`` sidecar) or JSON."""
    records = list(records)
    if not records:
        raise ValueError("no records to report")
    path = Path(path)
    summary = summarize(records, cfg)
    if fmt == "csv":
        _atomic_write(path, records_to_csv(records))
        _atomic_write(path.with_name(path.name + ".summary.json"),
                      json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    elif fmt == "json":
        doc = {"records": [_jsonable(asdict(r)) for r in records], "summary": _jsonable(summary)}
        _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    return path


def read_csv_report(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        out.append({k: (int(v) if k in ("rep_id", "seed") else float(v)) for k, v in row.items()})
    return out
