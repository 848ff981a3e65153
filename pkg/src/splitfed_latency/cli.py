"""Command-line entry point: ``splitfed-latency <subcommand> [flags]``.

Exit codes: 0 success, 1 runtime failure (bad config, infeasible instance,
I/O), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import tomli
import tomli_w

from .decision import Decision
from .delay import CSV_COLUMNS as DELAY_COLUMNS, phase_delays
from .event_sim import format_trace, simulate_timeline
from .experiments import SWEEP_PARAMS, emit_csv, run_sweep
from .optimizer import BASELINES, check_constraints, optimize_bcd, run_baseline
from .power import InfeasibleError
from .scenario import ConfigError, NetworkScenario, scenario_from_dict
from .toy_sfl import DivergenceError, ToyTask, calibrate_rank_profile


def bundled_config(name: str = "default.toml") -> Path:
    """Path of a config file shipped with the package."""
    return Path(str(resources.files("splitfed_latency") / "data" / name))


def _read_config(path: str | None) -> dict:
    path = Path(path) if path else bundled_config()
    try:
        return tomli.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from exc


def _settings(args) -> tuple[dict, int, float, int]:
    cfg = _read_config(args.config)
    exp = dict(cfg.get("experiment", {}))
    if args.seed is not None:
        exp["seed"] = args.seed
    cfg["experiment"] = exp
    eps = args.eps if args.eps is not None else float(exp.get("eps", 1e-3))
    max_iter = args.max_iter if args.max_iter is not None else int(exp.get("max_iter", 50))
    return cfg, int(exp.get("seed", 0)), eps, max_iter


def _scenario(args) -> tuple[NetworkScenario, int, float, int]:
    cfg, seed, eps, max_iter = _settings(args)
    return scenario_from_dict(cfg), seed, eps, max_iter


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {out}: {exc.strerror}") from exc


def format_report(s: NetworkScenario, d: Decision, title: str, objectives=None) -> str:
    """Human-readable summary of a decision: choices, per-client delays, trace."""
    b = phase_delays(s, d)
    lines = [f"# {title}",
             f"clients K={s.K}  subchannels M={s.M} N={s.N}  layers L={s.model.num_layers}",
             f"split={d.split}  rank={d.rank}  E={b.E}  I={b.I}",
             f"total_s={b.total!r}  t_local_s={b.t_local!r}",
             f"T1_s={b.T1!r}  T2_s={b.T2!r}  T3_s={b.T3!r}"]
    lists = d.assignment.index_lists()
    lines.append("client  main_subchannels  fed_subchannels")
    for k in range(s.K):
        lines.append(f"{k}  {lists['main'][k]}  {lists['fed'][k]}")
    lines.append(",".join(DELAY_COLUMNS))
    for row in b.csv_rows():
        lines.append(",".join(repr(float(v)) if isinstance(v, float) or hasattr(v, "dtype") else str(v)
                              for v in row))
    violations = check_constraints(s, d)
    lines.append("constraints: " + ("ok" if not violations else "; ".join(violations)))
    if objectives is not None:
        lines.append("trace: " + " ".join(repr(float(v)) for v in objectives))
    return "\n".join(lines) + "\n"


def _save_decision(d: Decision, path: str | None) -> None:
    if path:
        _write(json.dumps(d.to_dict(), indent=2) + "\n", path)


def cmd_optimize(args) -> int:
    s, _, eps, max_iter = _scenario(args)
    d, trace = optimize_bcd(s, eps, max_iter)
    report = format_report(s, d, "proposed (BCD)", trace.objectives)
    report += f"iterations={trace.iterations}  stop={trace.reason}\n"
    for w in trace.warnings:
        report += f"warning: {w}\n"
    sys.stdout.write(report)
    _save_decision(d, args.out)
    return 0


def cmd_baseline(args) -> int:
    s, seed, eps, max_iter = _scenario(args)
    d, _, iterations = run_baseline(s, args.which, seed, eps, max_iter)
    report = format_report(s, d, f"baseline {args.which}")
    report += f"iterations={iterations}\n"
    sys.stdout.write(report)
    _save_decision(d, args.out)
    return 0


def _parse_values(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty value list")
    return values


def cmd_sweep(args) -> int:
    cfg, seed, eps, max_iter = _settings(args)
    template = scenario_from_dict(cfg)
    # seeds are offsets from the configured seed so --seed shifts the whole batch
    seeds = range(seed, seed + args.seeds)
    rows = run_sweep(template, args.param, args.values, seeds, eps, max_iter, workers=args.jobs)
    emit_csv(rows, args.out or "-")
    return 0


def cmd_simulate(args) -> int:
    s, _, eps, max_iter = _scenario(args)
    if args.decision:
        try:
            d = Decision.from_dict(json.loads(Path(args.decision).read_text()))
        except OSError as exc:
            raise OSError(f"cannot read decision file {args.decision}: {exc.strerror}") from exc
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{args.decision}: malformed decision file: {exc}") from exc
    else:
        d, _ = optimize_bcd(s, eps, max_iter)
    log, total = simulate_timeline(s, d)
    _write(format_trace(log) + f"# total_s {total!r}\n", args.out)
    return 0


def cmd_calibrate(args) -> int:
    seed = 0 if args.seed is None else args.seed
    cal = calibrate_rank_profile(ToyTask(), args.candidates, args.target, seed,
                                 args.max_rounds, args.repeats)
    for r, why in sorted(cal.unreachable.items()):
        print(f"warning: rank {r} dropped: {why}", file=sys.stderr)
    if not cal.profile.candidates:
        raise RuntimeError("no candidate rank reached the target loss")
    _write(tomli_w.dumps({"lora": cal.profile.to_toml_table()}), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splitfed-latency",
                                description="Latency model and optimiser for split federated LoRA fine-tuning.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help):
        sp.add_argument("--config", metavar="PATH", help="TOML scenario (default: bundled defaults)")
        sp.add_argument("--seed", type=int, help="overrides [experiment].seed")
        sp.add_argument("--out", metavar="PATH", help=out_help)
        sp.add_argument("--eps", type=float, help="BCD stopping tolerance in seconds")
        sp.add_argument("--max-iter", type=int, help="BCD iteration cap")

    common(sub.add_parser("optimize", help="run BCD on one scenario"), "write the decision as JSON")
    b = sub.add_parser("baseline", help="evaluate one baseline")
    common(b, "write the decision as JSON")
    b.add_argument("--which", choices=BASELINES, required=True)
    sw = sub.add_parser("sweep", help="re-optimise all strategies over one parameter")
    common(sw, "CSV path (default stdout)")
    sw.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    sw.add_argument("--values", type=_parse_values, required=True,
                    help="comma-separated; pmax in dBm, bandwidth in Hz, fs in cycles/s")
    sw.add_argument("--seeds", type=int, default=1, help="number of sampled scenarios")
    sw.add_argument("--jobs", type=int, default=1, help="worker processes")
    sim = sub.add_parser("simulate", help="event-level trace of one decision")
    common(sim, "trace path (default stdout)")
    sim.add_argument("--decision", metavar="PATH", help="decision JSON (default: optimise first)")
    cal = sub.add_parser("calibrate", help="toy E(r) table as a [lora] TOML section")
    cal.add_argument("--seed", type=int)
    cal.add_argument("--out", metavar="PATH")
    cal.add_argument("--candidates", type=lambda t: [int(v) for v in _parse_values(t)],
                     default=[1, 2, 4, 6, 8])
    cal.add_argument("--target", type=float, default=0.1, help="target training loss")
    cal.add_argument("--max-rounds", type=int, default=3000)
    cal.add_argument("--repeats", type=int, default=5)
    return p


COMMANDS = {"optimize": cmd_optimize, "baseline": cmd_baseline, "sweep": cmd_sweep,
            "simulate": cmd_simulate, "calibrate": cmd_calibrate}


def run_command(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)     # exits with 2 on usage errors
    if getattr(args, "seeds", 1) < 1 or getattr(args, "jobs", 1) < 1:
        parser.error("--seeds and --jobs must be >= 1")
    if getattr(args, "max_iter", None) is not None and args.max_iter < 1:
        parser.error("--max-iter must be >= 1")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, InfeasibleError, DivergenceError, OSError, RuntimeError, ValueError) as exc:
        msg = " ".join(str(exc).split())
        print(f"splitfed-latency: error: {msg}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
