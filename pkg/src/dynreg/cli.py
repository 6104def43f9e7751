"""Command-line interface.

Subcommands:
  run            play seeded online runs, writing one CSV and one JSON
                 summary per seed
  bounds         evaluate the closed-form guarantees for the configured
                 setup, one JSON report per theorem
  verify-lemmas  sweep the numerical lemma checks (quick or full preset)

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numeric error. The output directory is DYNREG_OUT when set, else --out,
else the config's out_dir, else ./dynreg-out.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import backends
from .config import ExperimentConfig, load_config
from .lemmas import run_checks
from .meta import run_stream
from .numerics import ConfigError, NumericError, VerificationError
from .regret import (
    bound_expectation,
    bound_highprob,
    dlr_cumulative,
    slr_cumulative,
)
from .tasks import loss_constants

__all__ = ["main"]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _out_dir(cli_out, cfg: ExperimentConfig) -> Path:
    env = os.environ.get("DYNREG_OUT")
    chosen = env or cli_out or cfg.out_dir or "dynreg-out"
    path = Path(chosen)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _run_seed_job(payload) -> dict:
    """Run one seed end to end and write its artifacts (pool-friendly)."""
    raw_cfg, seed, out_dir = payload
    cfg = ExperimentConfig(raw=raw_cfg)
    t0 = time.perf_counter()
    stream = cfg.stream(seed)
    trace = run_stream(
        stream,
        cfg.horizon,
        cfg.inner(),
        cfg.optimizer(),
        seed=seed,
        x0=cfg.init_vector(),
    )
    w = cfg.window()
    dlr = dlr_cumulative(trace, w, cfg.alpha)
    slr = slr_cumulative(trace, w)
    grad_norm_sq = np.einsum("td,td->t", trace.grads, trace.grads)
    wall = time.perf_counter() - t0

    csv_path = Path(out_dir) / f"run_seed{seed}.csv"
    lines = ["t,loss,grad_norm_sq,dlr_cum,slr_cum,eta_t"]
    for i in range(trace.horizon):
        lines.append(
            ",".join(
                (
                    str(i + 1),
                    _fmt(trace.losses[i]),
                    _fmt(grad_norm_sq[i]),
                    _fmt(dlr.cumulative[i]),
                    _fmt(slr.cumulative[i]),
                    _fmt(trace.step_sizes[i]),
                )
            )
        )
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    summary = {
        "seed": seed,
        "horizon": cfg.horizon,
        "final_dlr": dlr.total,
        "final_slr": slr.total,
        "backend": trace.config.get("backend"),
        "wall_time_s": wall,
        "csv": csv_path.name,
        "config": cfg.snapshot(seed=seed),
    }
    json_path = Path(out_dir) / f"summary_seed{seed}.json"
    json_path.write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return {
        "seed": seed,
        "final_dlr": dlr.total,
        "final_slr": slr.total,
        "wall_time_s": wall,
        "csv": str(csv_path),
    }


def _cmd_run(args) -> int:
    cfg = load_config(args.config, args.set or ())
    if args.seed_list is not None:
        try:
            seeds = [int(s) for s in args.seed_list.split(",") if s.strip() != ""]
        except ValueError:
            raise ConfigError(f"--seed-list must be comma-separated integers, got {args.seed_list!r}")
        if not seeds or any(s < 0 for s in seeds):
            raise ConfigError("--seed-list must name at least one seed >= 0")
    elif args.seeds is not None:
        if args.seeds < 1:
            raise ConfigError(f"--seeds must be >= 1, got {args.seeds}")
        seeds = list(range(args.seeds))
    else:
        seeds = cfg.seeds
    out_dir = _out_dir(args.out, cfg)
    if args.jobs < 1:
        raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")

    payloads = [(cfg.raw, seed, str(out_dir)) for seed in seeds]
    if args.jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_seed_job, payloads))
    else:
        results = [_run_seed_job(p) for p in payloads]
    for res in results:
        print(
            f"seed {res['seed']}: dlr={res['final_dlr']:.6g} "
            f"slr={res['final_slr']:.6g} wall={res['wall_time_s']:.2f}s -> {res['csv']}"
        )
    return 0


def _cmd_bounds(args) -> int:
    cfg = load_config(args.config, args.set or ())
    out_dir = _out_dir(args.out, cfg)
    st = cfg.raw["stream"]
    constants = loss_constants(float(st["amplitude"]), float(st["freq_scale"]))
    opt = cfg.optimizer()
    noise = cfg.noise_model()
    theta = cfg.inner().theta
    for theorem in cfg.bounds_list():
        kind, _, tail = theorem.partition("-")
        fn = bound_expectation if tail == "expectation" else bound_highprob
        report = fn(
            kind,
            opt,
            noise,
            constants,
            theta,
            cfg.horizon,
            cfg.dim,
            cfg.delta,
            varsigma=cfg.varsigma,
        )
        record = report.to_record()
        record["config"] = cfg.snapshot()
        path = out_dir / f"bound_{theorem}.json"
        path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        extra = f"  warnings: {'; '.join(report.warnings)}" if report.warnings else ""
        print(f"{theorem}: rhs={report.rhs:.6g} -> {path}{extra}")
    return 0


def _cmd_verify_lemmas(args) -> int:
    cfg_sets = args.set or ()
    if args.config is not None or cfg_sets:
        # validate eagerly so a broken config still exits 2 here
        load_config(args.config, cfg_sets)
    out_dir_env = os.environ.get("DYNREG_OUT")
    out = Path(out_dir_env or args.out or "dynreg-out")
    out.mkdir(parents=True, exist_ok=True)
    results = run_checks(args.preset, corrupt=args.self_test_corrupt)
    artifact = {
        "preset": args.preset,
        "corrupt": args.self_test_corrupt,
        "results": [r.to_record() for r in results],
    }
    path = out / f"lemmas_{args.preset}.json"
    path.write_text(json.dumps(artifact, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    failed = []
    for res in results:
        status = "pass" if res.passed else f"FAIL ({len(res.violations)} violations)"
        print(
            f"lemma {res.lemma_id}: {status} "
            f"(grid {res.grid_size}, min margin {res.max_slack:.3g}, {res.elapsed_s:.2f}s)"
        )
        if not res.passed:
            failed.append(res.lemma_id)
    print(f"wrote {path}")
    if failed:
        raise VerificationError(f"lemma checks failed: {', '.join(failed)}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynreg",
        description="Online meta-learning runs, regret bounds, and lemma verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="path to a JSON experiment config")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="override one config entry (dotted path, JSON value); repeatable",
        )
        p.add_argument("--out", help="output directory (DYNREG_OUT overrides)")

    p_run = sub.add_parser("run", help="play seeded online runs")
    common(p_run)
    seeds_group = p_run.add_mutually_exclusive_group()
    seeds_group.add_argument("--seeds", type=int, help="run seeds 0..N-1")
    seeds_group.add_argument("--seed-list", help="comma-separated explicit seeds")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p_run.set_defaults(fn=_cmd_run)

    p_bounds = sub.add_parser("bounds", help="evaluate closed-form guarantees")
    common(p_bounds)
    p_bounds.set_defaults(fn=_cmd_bounds)

    p_ver = sub.add_parser("verify-lemmas", help="run the numerical lemma checks")
    common(p_ver)
    p_ver.add_argument(
        "--preset", choices=("quick", "full"), default="quick", help="check suite size"
    )
    p_ver.add_argument("--self-test-corrupt", metavar="LEMMA_ID", help=argparse.SUPPRESS)
    p_ver.set_defaults(fn=_cmd_verify_lemmas)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except VerificationError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
