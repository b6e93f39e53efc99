"""``pseudodp`` command line: synthesize, sweep, contraction, report.

Exit codes: 0 success, 2 usage or config error, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import config as cfgmod
from . import io
from .contraction import StudyConfig, run_study
from .errors import ConfigError, PseudoDPError
from .kernels import BACKEND
from .mechanisms import run_alpha_weighted, run_em_scalar, run_unweighted
from .models import make_backend
from .risk_weights import PDP_CAVEAT, WeightConfig, recommend_global_epsilon, safety_factor
from .utility import StatSpec, dedupe_grid, risk_utility_sweep, statistic_distribution

log = logging.getLogger("pseudodp")


def _outdir(args, cfg) -> Path:
    out = args.out or getattr(cfg, "output", None)
    if out is None:
        raise ConfigError("no output directory: pass --out DIR or set 'output' in the config")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args, schema):
    if args.config is None:
        raise ConfigError("--config PATH is required")
    path = Path(args.config)
    return cfgmod.parse(schema, cfgmod.load_mapping(path), base_dir=path.parent)


def build_report(release, cfg, model, input_hash: str) -> dict:
    lip = release.lipschitz
    alpha = release.weights.alpha
    resolved = cfgmod.resolved(cfg)
    return {
        "mechanism": release.mechanism.value,
        "seed": release.seed,
        "n": release.n,
        "m": release.m,
        "delta_local": lip.delta_local,
        "epsilon_per_db": lip.epsilon_per_db,
        "epsilon_total": lip.epsilon_total,
        "safety_factor": cfg.safety_factor or safety_factor(release.n),
        "recommended_global_epsilon": recommend_global_epsilon(lip, release.n, cfg.safety_factor),
        "delta_unweighted": release.delta_unweighted,
        "em_weight": release.em_weight,
        "weights": {
            "min": float(alpha.min()),
            "median": float(np.median(alpha)),
            "max": float(alpha.max()),
            "zeroed": int(np.count_nonzero(alpha == 0)),
        },
        "draw_indices": release.draw_indices,
        "posterior": release.posterior,
        "warnings": release.warnings,
        "caveat": PDP_CAVEAT,
        "config": resolved,
        "config_hash": io.config_hash(resolved),
        "input_sha256": input_hash,
        "model": model.describe(),
        "kernel_backend": BACKEND,
    }


def cmd_synthesize(args) -> int:
    cfg = _load(args, cfgmod.RunConfig)
    out = _outdir(args, cfg)
    table = io.read_table(cfg.input)
    data = io.dataset_from_table(table, cfg.response, cfg.model)
    model = make_backend(cfg.model, **cfg.backend_options())
    common = dict(S=cfg.S, m=cfg.m, seed=cfg.seed, burn_in=cfg.burn_in)
    if cfg.mechanism == "Unweighted":
        release = run_unweighted(data, model, **common)
    elif cfg.mechanism == "AlphaWeighted":
        release = run_alpha_weighted(
            data, model, WeightConfig(cfg.c, cfg.g, cfg.M), refit=cfg.refit, seed_policy=cfg.seed_policy, **common
        )
    else:
        release = run_em_scalar(
            data,
            model,
            cfg.epsilon_target,
            calibrate=cfg.calibrate,
            refit=cfg.refit,
            seed_policy=cfg.seed_policy,
            **common,
        )
    io.write_synthetic(out, table, cfg.response, release.databases, integer=(cfg.model == "poisson"))
    io.write_weights(out / "weights.csv", release)
    io.dump_json(out / "report.json", build_report(release, cfg, model, io.sha256_file(cfg.input)))
    log.info("wrote %d synthetic databases to %s", release.m, out)
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args, cfgmod.SweepConfig)
    out = _outdir(args, cfg)
    table = io.read_table(cfg.input)
    data = io.dataset_from_table(table, cfg.response, cfg.model)
    model = make_backend(cfg.model, **cfg.backend_options())
    stats = [StatSpec(s.kind, s.p, cfg.B) for s in cfg.stats]
    grid = dedupe_grid(cfg.grid)
    result = risk_utility_sweep(
        data, model, grid, cfg.S, cfg.m, cfg.seed, stats, cfg.burn_in, refit=cfg.refit, workers=args.workers
    )
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["c", "g", "delta", "epsilon_total", "stat", "abs_error"])
        for row in result.csv_rows():
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    violins = []
    for k, spec in enumerate(stats):
        # the confidential data's own bootstrap distribution, keyed apart from the release streams
        real = statistic_distribution(data.y, spec, cfg.seed, (k, 2**31))
        violins.append({"mechanism": "Data", "stat": spec.name, "values": real})
        for row in result.rows:
            if spec.name in row.barycenters:
                violins.append(
                    {
                        "mechanism": f"AlphaWeighted(c={row.c:g},g={row.g:g})",
                        "c": row.c,
                        "g": row.g,
                        "stat": spec.name,
                        "values": row.barycenters[spec.name],
                    }
                )
    io.dump_json(out / "violin.json", violins)
    failed = [r for r in result.rows if r.error]
    if failed:
        log.warning("%d of %d sweep cells failed", len(failed), len(result.rows))
    return 0


def _study_config(cfg: cfgmod.ContractionConfig) -> StudyConfig:
    return StudyConfig(
        ns=tuple(cfg.ns),
        R=cfg.R,
        mu=cfg.mu,
        M=cfg.M,
        mechanisms=tuple(cfg.mechanisms),
        seed=cfg.seed,
        S=cfg.S,
        a0=cfg.a0,
        b0=cfg.b0,
        refit=cfg.refit,
    )


def cmd_contraction(args) -> int:
    cfg = _load(args, cfgmod.ContractionConfig)
    out = _outdir(args, cfg)
    result = run_study(_study_config(cfg), workers=args.workers)
    with open(out / "study.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "mechanism", "replicate", "delta", "mu_mean"])
        for n, mech, r, d, mm in result.rows():
            w.writerow([n, mech, r, repr(d), repr(mm)])
    io.dump_json(out / "study_summary.json", result.summary_json())
    return 0


def cmd_report(args) -> int:
    target = Path(args.path or args.out or ".")
    if target.is_dir():
        target = target / "report.json"
    try:
        report = json.loads(target.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"{target}: cannot read report ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{target}: not a report file: {exc}") from exc
    w = report.get("weights", {})
    lines = [
        f"mechanism                  {report.get('mechanism')}",
        f"seed                       {report.get('seed')}",
        f"records / databases        {report.get('n')} / {report.get('m')}",
        f"delta_local                {report.get('delta_local')!r}",
        f"epsilon_per_db             {report.get('epsilon_per_db')!r}",
        f"epsilon_total              {report.get('epsilon_total')!r}",
        f"recommended_global_epsilon {report.get('recommended_global_epsilon')!r}",
        f"alpha min/median/max       {w.get('min')!r} / {w.get('median')!r} / {w.get('max')!r}",
        f"records with alpha = 0     {w.get('zeroed')}",
        f"config_hash                {report.get('config_hash')}",
    ]
    for msg in report.get("warnings", []):
        lines.append(f"warning: {msg}")
    lines.append(report.get("caveat", ""))
    print("\n".join(lines))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML or JSON run configuration")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides 'output' in the config)")
    common.add_argument(
        "--workers", type=int, default=os.cpu_count() or 1, metavar="N", help="parallel workers (default: all cores)"
    )
    p = argparse.ArgumentParser(prog="pseudodp", description="Risk-weighted pseudo-posterior synthetic data.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synthesize", parents=[common], help="fit, weight and release m synthetic databases")
    sub.add_parser("sweep", parents=[common], help="risk-utility sweep over a (c, g) grid")
    sub.add_parser("contraction", parents=[common], help="Monte Carlo Lipschitz contraction study")
    rp = sub.add_parser("report", parents=[common], help="print a release report")
    rp.add_argument("path", nargs="?", help="report.json or the directory holding it")
    return p


COMMANDS = {
    "synthesize": cmd_synthesize,
    "sweep": cmd_sweep,
    "contraction": cmd_contraction,
    "report": cmd_report,
}


def main(argv: Optional[list] = None) -> int:
    level = os.environ.get("PSEUDODP_LOG", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        print("pseudodp: error: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except PseudoDPError as exc:
        print(f"pseudodp: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
