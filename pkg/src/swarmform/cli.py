"""Command-line entry point: gen, run, sweep, eval, check-gradients.

Exit codes: 0 ok, 1 IO error, 2 usage or config error, 3 mission (or check) failure.
"""
from __future__ import annotations

import argparse
import csv
import glob
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .gradcheck import check_gradients
from .metrics import (RunEvaluation, evaluate_positions, evaluate_run, generate_scenarios, summarize,
                      write_table)
from .scenario import REGIMES, ConfigError, GenerationFailure, ScenarioConfig
from .sim import read_trace, run_scenario, write_planner_log, write_timing, write_trace, write_violations

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2, 3

log = logging.getLogger("swarmform")


class UsageError(Exception):
    pass


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(path, seed: int | None) -> ScenarioConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    cfg = ScenarioConfig.load(p)
    if seed is not None:
        cfg.seed = seed
    return cfg


def _finite(value):
    """NaN and infinities become null so the output stays strict JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_finite(v) for v in value]
    return value


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(_finite(data), indent=2, sort_keys=True, allow_nan=False) + "\n")


def _write_series(path: Path, ev: RunEvaluation) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RunEvaluation.SERIES_HEADER)
        w.writerows(ev.series_rows())


def execute(cfg: ScenarioConfig, out: Path, sample_period: float) -> tuple[bool, dict]:
    """Run one scenario and write its outputs into ``out``."""
    out = _out_dir(out)
    cfg.save(out / "config.json")
    result = run_scenario(cfg)
    ev = evaluate_run(result, cfg.spec(), sample_period)
    metrics = dict(result.summary(), **ev.means(), sample_period=sample_period,
                   note="e_dist is the aligned sum of squared errors (m^2); e_dist_rms is sqrt(e_dist / N) (m)")
    _write_json(out / "metrics.json", metrics)
    write_trace(result, out / "trace.csv")
    write_violations(result, out / "violations.csv")
    write_planner_log(result, out / "planner_log.csv")
    write_timing(result, out / "timing.json")
    _write_series(out / "series.csv", ev)
    return result.success, metrics


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    seed = args.seed_pos if args.seed_pos is not None else (args.seed or 0)
    out = _out_dir(args.out)
    for cfg in generate_scenarios(args.regime, args.count, seed):
        cfg.save(out / f"{cfg.name}.json")
    print(f"wrote {args.count} {args.regime} scenarios to {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    if not args.config:
        raise UsageError("run needs --config")
    cfg = _load(args.config, args.seed)
    ok, metrics = execute(cfg, Path(args.out), args.sample_period)
    print(f"{cfg.name}: {'success' if ok else 'failure'} ({metrics['reason']}), "
          f"e_dist={metrics['e_dist']:.4g} e_sim={metrics['e_sim']:.4g}")
    return EXIT_OK if ok else EXIT_FAILURE


def _regime_of(name: str) -> str:
    return name.rsplit("-", 1)[0] if "-" in name else name


def cmd_sweep(args) -> int:
    if not args.config:
        raise UsageError("sweep needs --config GLOB")
    paths = sorted(glob.glob(args.config))
    if not paths:
        raise UsageError(f"no scenario files match {args.config!r}")
    out = _out_dir(args.out)
    groups: dict[str, list] = {}
    for path in paths:
        cfg = _load(path, args.seed)
        try:
            result = run_scenario(cfg)
        except Exception as exc:  # a crashed run counts as a failure; the sweep continues
            log.error("%s crashed: %s", cfg.name, exc)
            groups.setdefault(_regime_of(cfg.name), []).append(
                RunEvaluation(cfg.name, False, np.empty(0), np.empty(0), np.empty(0), np.empty(0), n=cfg.n))
            continue
        ev = evaluate_run(result, cfg.spec(), args.sample_period)
        run_dir = _out_dir(out / cfg.name)
        _write_json(run_dir / "metrics.json", dict(result.summary(), **ev.means()))
        write_trace(result, run_dir / "trace.csv")
        write_violations(result, run_dir / "violations.csv")
        _write_series(run_dir / "series.csv", ev)
        groups.setdefault(_regime_of(cfg.name), []).append(ev)
        log.info("%s: %s", cfg.name, "success" if result.success else result.reason)
    summaries = [summarize(k, groups[k]) for k in sorted(groups)]
    write_table(summaries, out / "summary.csv")
    for s in summaries:
        print(f"{s.scenario}: success {s.success_rate:.1f}% ({s.successes}/{s.runs}), "
              f"e_dist={s.e_dist:.4g} e_sim={s.e_sim:.4g}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if not args.runs:
        raise UsageError("eval needs at least one run directory")
    out = _out_dir(args.out)
    groups: dict[str, list] = {}
    for run in args.runs:
        run = Path(run)
        cfg = _load(run / "config.json", None)
        times, pos, vertices = read_trace(run / "trace.csv")
        success = json.loads((run / "metrics.json").read_text())["success"]
        ev = evaluate_positions(times, pos, vertices, cfg.spec(), args.sample_period, cfg.name, success)
        _write_series(_out_dir(out / cfg.name) / "series.csv", ev)
        groups.setdefault(_regime_of(cfg.name), []).append(ev)
    summaries = [summarize(k, groups[k]) for k in sorted(groups)]
    write_table(summaries, out / "summary.csv")
    return EXIT_OK


def cmd_check_gradients(args) -> int:
    report = check_gradients(args.seed or 0, args.instances)
    text = report.text()
    print(text)
    if args.out:
        (_out_dir(args.out) / "gradcheck.txt").write_text(text + "\n")
    return EXIT_OK if report.ok else EXIT_FAILURE


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file (run) or glob (sweep)")
    common.add_argument("--seed", type=int, default=None, help="overrides every seed downstream")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--verbose", "-v", action="store_true")
    common.add_argument("--sample-period", type=float, default=0.1, help="metric sampling period (s)")

    p = argparse.ArgumentParser(prog="swarmform", description="Formation-aware swarm planning experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    g = sub.add_parser("gen", parents=[common], help="generate benchmark scenarios")
    g.add_argument("regime", choices=sorted(REGIMES))
    g.add_argument("count", type=int)
    g.add_argument("seed_pos", type=int, nargs="?", metavar="seed")
    g.set_defaults(func=cmd_gen)
    sub.add_parser("run", parents=[common], help="run one scenario").set_defaults(func=cmd_run)
    sub.add_parser("sweep", parents=[common], help="run many scenarios and tabulate").set_defaults(func=cmd_sweep)
    e = sub.add_parser("eval", parents=[common], help="recompute metrics from run directories")
    e.add_argument("runs", nargs="*")
    e.set_defaults(func=cmd_eval)
    c = sub.add_parser("check-gradients", parents=[common], help="finite-difference gradient suite")
    c.add_argument("--instances", type=int, default=100)
    c.set_defaults(func=cmd_check_gradients, out=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "count", 1) < 1:
            raise UsageError("count must be >= 1")
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GenerationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
