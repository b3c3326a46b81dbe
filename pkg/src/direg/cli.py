"""Command-line entry point: ``direg <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

from .angle import AngleConfig, estimate_alpha_adjusted
from .detection import DetectionConfig, detect_anisotropy
from .grid import load_clean, load_dataset, save_dataset
from .harness import (
    KINDS,
    ConfigError,
    _atomic_write,
    _build,
    _jsonable,
    config_from_dict,
    emit_report,
    preset,
    read_config_file,
    run_experiment,
    summarize,
)
from .regularity import Direction, EmpiricalVariogram, default_delta, h_hat_directional
from .simulate import AnisoSimConfig, simulate_anisotropic_dataset
from .smoothing import empirical_risk, learn_plan, nw_smooth

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


def _write_json(doc: dict, out: str | None) -> None:
    text = json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"
    if out:
        _atomic_write(Path(out), text)
    else:
        sys.stdout.write(text)


def _delta_arg(s: str):
    if s == "auto":
        return None
    try:
        v = float(s)
    except ValueError as exc:
        raise ConfigError(f"--delta must be 'auto' or a number, got {s!r}") from exc
    if not v > 0:
        raise ConfigError("--delta must be positive")
    return v


def _auto_int(s: str):
    if s == "auto":
        return None
    try:
        return int(s)
    except ValueError as exc:
        raise ConfigError(f"expected 'auto' or an integer, got {s!r}") from exc


# ------------------------------------------------------------- subcommands


def cmd_simulate(args) -> int:
    data = read_config_file(args.config)
    if isinstance(data, dict) and isinstance(data.get("sim"), dict):
        data = data["sim"]
    cfg = _build(AnisoSimConfig, data, "sim")
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    ds, clean = simulate_anisotropic_dataset(cfg, return_clean=True)
    save_dataset(ds, args.out, clean=clean if args.with_clean else None)
    print(f"wrote {ds.n_surfaces} surfaces to {args.out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    ds = load_dataset(args.data)
    src = EmpiricalVariogram(ds)
    delta = _delta_arg(args.delta)
    if delta is None:
        delta = default_delta(ds.grid.m0)
    d = Direction(args.beta)
    est = h_hat_directional(src, d, delta)
    _write_json({
        "beta": d.beta,
        "delta": delta,
        "theta_hat": src.theta(d, delta),
        "theta_hat_2delta": src.theta(d, 2.0 * delta),
        "h_hat": est.h_hat,
        "sigma_sq_hat": src.sigma_sq,
    }, args.out)
    return EXIT_OK


def cmd_estimate_angle(args) -> int:
    ds = load_dataset(args.data)
    cfg = AngleConfig(delta=_delta_arg(args.delta), k0=args.k0, estimate_r=args.estimate_R)
    t0 = time.perf_counter()
    est = estimate_alpha_adjusted(ds, cfg)
    doc = asdict(est)
    doc["wall_seconds"] = time.perf_counter() - t0
    _write_json(doc, args.out)
    return EXIT_OK


def cmd_detect(args) -> int:
    ds = load_dataset(args.data)
    src = EmpiricalVariogram(ds)
    alpha = args.alpha
    if alpha is None:
        alpha = estimate_alpha_adjusted(src).alpha_hat_adj
    cfg = DetectionConfig(j_count=_auto_int(args.j), xi=args.xi, seed=args.seed)
    rep = detect_anisotropy(src, alpha, cfg)
    _write_json(asdict(rep), args.out)
    return EXIT_OK


def cmd_smooth(args) -> int:
    learn = load_dataset(args.learn)
    online = load_dataset(args.online)
    if online.grid != learn.grid:
        raise ConfigError("learning and online sets must share the grid")
    plan = learn_plan(learn, args.mode, bandwidth_rule=args.bandwidth_rule)
    obs = online.values[0]
    truth = None
    clean_path = Path(args.online) / "clean_0000.csv"
    if clean_path.exists():
        truth = load_clean(args.online)[0]
    fit = nw_smooth(plan, obs, online.grid.points())
    doc = {
        "mode": args.mode,
        "alpha": plan.alpha.alpha,
        "h1": plan.h1,
        "h2": plan.h2,
        "h1_reg": plan.h1_reg,
        "h2_reg": plan.h2_reg,
        "risk": empirical_risk(truth, fit) if truth is not None else None,
        "risk_vs_observed": empirical_risk(obs, fit),
    }
    _write_json(doc, args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.config:
        cfg = config_from_dict(read_config_file(args.config))
        if cfg.kind != args.kind:
            raise ConfigError(f"config kind {cfg.kind!r} does not match subcommand {args.kind!r}")
    else:
        cfg = preset(args.kind, full=args.full)
    if args.full:
        cfg = replace(cfg, replications=400)
    if args.replications is not None:
        cfg = replace(cfg, replications=args.replications)
    if args.master_seed is not None:
        cfg = replace(cfg, master_seed=args.master_seed)
    if args.parallelism is not None:
        cfg = replace(cfg, parallelism=args.parallelism)
    if args.timing:
        cfg = replace(cfg, record_timing=True)
    out = args.out or cfg.out_path or f"bench_{cfg.kind}.{args.format}"
    records = run_experiment(cfg)
    emit_report(records, args.format, out, cfg)
    s = summarize(records)
    line = f"{cfg.kind}: {s['n']} reps, median risk {s['risk_median']:.4f} (IQR {s['risk_iqr']:.4f})"
    if "extra_mean" in s:
        line += f", mean extra {s['extra_mean']:.4f}"
    print(line)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="direg", description="Directional regularity of surface data.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate an anisotropic dataset")
    s.add_argument("--config", required=True, help="TOML or JSON with AnisoSimConfig keys")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--with-clean", action="store_true", help="also write the noiseless surfaces")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("estimate", help="theta and H along one direction")
    s.add_argument("--data", required=True)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--delta", default="auto")
    s.add_argument("--out")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("estimate-angle", help="adjusted angle of maximal regularity")
    s.add_argument("--data", required=True)
    s.add_argument("--delta", default="auto")
    s.add_argument("--k0", type=int, default=15)
    s.add_argument("--estimate-R", dest="estimate_R", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_estimate_angle)

    s = sub.add_parser("detect", help="anisotropy detection")
    s.add_argument("--data", required=True)
    s.add_argument("--alpha", type=float, help="angle to test (default: estimated)")
    s.add_argument("--j", default="auto")
    s.add_argument("--xi", type=float, default=1.0 / 3.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("smooth", help="smooth an online surface with a learned plan")
    s.add_argument("--learn", required=True)
    s.add_argument("--online", required=True)
    s.add_argument("--mode", choices=("aniso", "iso"), default="aniso")
    s.add_argument("--bandwidth-rule", choices=("bound", "rate"), default="bound")
    s.add_argument("--out")
    s.set_defaults(func=cmd_smooth)

    s = sub.add_parser("bench", help="Monte Carlo study")
    s.add_argument("kind", choices=KINDS)
    s.add_argument("--config")
    s.add_argument("--out")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.add_argument("--full", action="store_true", help="400 replications")
    s.add_argument("--replications", type=int)
    s.add_argument("--master-seed", type=int)
    s.add_argument("--parallelism", type=int)
    s.add_argument("--timing", action="store_true", help="record wall_seconds (breaks byte-reproducibility)")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"direg: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"direg: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
