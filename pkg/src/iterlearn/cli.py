"""Command line entry point: ``iterlearn {run,sweep,baseline,until,plot}``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .config import ALIASES, config_keys, format_config, parse_config, parse_lines
from .engine import (
    RNG_ALGORITHM,
    STREAMS,
    ExperimentConfig,
    baseline_for,
    derive_seed,
    mean_generations,
    run_replicates,
    run_until_egood,
    sweep_bottleneck,
)
from .errors import ConfigError, IlmError
from .metrics import BaselineEstimate
from .plotting import plot_losses, plot_metrics, plot_sweep
from .records import (
    SCHEMA_VERSION,
    read_csv,
    read_manifest,
    write_csv,
    write_losses,
    write_manifest,
)

log = logging.getLogger("iterlearn")

RESULTS = "results.csv"
LOSSES = "losses.csv"


# -- argument plumbing -------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key=value config file")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    p.add_argument("--seed", help="master seed")
    p.add_argument("--workers", type=int, default=1, help="parallel replicate processes")
    p.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override any config key (repeatable)",
    )
    p.add_argument("-v", "--verbose", action="store_true")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    group = p.add_argument_group("config overrides")
    for key in config_keys():
        if key == "seed":
            continue
        group.add_argument("--" + key.replace("_", "-"), dest=f"cfg_{key}", metavar="V")
    group.add_argument("--lambda", dest="cfg_lam", metavar="V", help=argparse.SUPPRESS)


def _overrides(args) -> dict:
    values = {}
    for item in args.set:
        values.update(parse_lines([item], "--set"))
    for key in config_keys():
        v = getattr(args, f"cfg_{key}", None)
        if v is not None:
            values[key] = v
    if args.seed is not None:
        values["seed"] = args.seed
    return {ALIASES.get(k, k): v for k, v in values.items()}


def _config(args) -> ExperimentConfig:
    return parse_config(args.config, _overrides(args))


def _load_baseline(path, cfg: ExperimentConfig) -> BaselineEstimate:
    m = read_manifest(path)
    try:
        est = BaselineEstimate(
            float(m["x0"]), float(m["c0"]), float(m["s0"]), m["kind"],
            int(m["n"]), int(m["hidden"]), int(m["agents"]), int(m["pairs"]),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"baseline: {path} is not a baseline file ({exc})") from None
    if (est.kind, est.n, est.hidden) != (cfg.model, cfg.n, cfg.hidden):
        raise ConfigError(
            f"baseline: {path} is for {est.kind} n={est.n} hidden={est.hidden}, "
            f"not {cfg.model} n={cfg.n} hidden={cfg.hidden}"
        )
    return est


def _baseline(args, cfg) -> BaselineEstimate:
    if getattr(args, "baseline", None):
        return _load_baseline(args.baseline, cfg)
    return baseline_for(cfg)


def _manifest_head(cfg: ExperimentConfig, command: str) -> dict:
    entries = {
        "schema_version": SCHEMA_VERSION,
        "tool": "iterlearn",
        "tool_version": __version__,
        "command": command,
        "rng_algorithm": RNG_ALGORITHM,
        "master_seed": cfg.seed,
    }
    entries.update({f"config.{k}": v for k, v in cfg.to_dict().items()})
    return entries


def _baseline_entries(b: BaselineEstimate) -> dict:
    return {"baseline.x0": repr(b.x0), "baseline.c0": repr(b.c0), "baseline.s0": repr(b.s0),
            "baseline.agents": b.agents, "baseline.pairs": b.pairs}


def _seed_entries(cfg: ExperimentConfig) -> dict:
    entries = {"seed.baseline": derive_seed(cfg.seed, -1, "baseline")}
    for k in range(cfg.replicates):
        for tag in STREAMS:
            entries[f"seed.{k}.{tag}"] = derive_seed(cfg.seed, k, tag)
    return entries


def _stamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# -- subcommands -------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = _config(args)
    out: Path = args.out
    baseline = _baseline(args, cfg)
    started = _stamp()
    t0 = time.perf_counter()
    results = run_replicates(cfg, args.workers, baseline)
    records = sorted((r for res in results for r in res.records), key=lambda r: r.key)
    csv_path = write_csv(records, out / RESULTS, timings=args.timings)
    loss_path = write_losses(records, out / LOSSES)
    (out / "config.cfg").write_text(format_config(cfg), encoding="utf-8")
    # plots are rendered from the written files so that `plot` reproduces them exactly
    _render(csv_path, loss_path, out, cfg.loss_divisor, args.title)
    manifest = _manifest_head(cfg, "run")
    manifest.update(_baseline_entries(baseline))
    manifest.update(_seed_entries(cfg))
    failed = [res for res in results if res.error]
    for res in failed:
        manifest[f"error.{res.replicate}"] = res.error
    manifest["files"] = [RESULTS, LOSSES, "metrics.svg", "losses.svg", "config.cfg"]
    if args.timings:
        manifest.update(started_at=started, finished_at=_stamp(),
                        elapsed_s=f"{time.perf_counter() - t0:.3f}")
    write_manifest(out / "manifest.txt", manifest)
    for res in failed:
        print(f"error: replicate {res.replicate} aborted: {res.error}", file=sys.stderr)
    print(f"wrote {out}")
    return 1 if failed else 0


def _render(csv_path, loss_path, out: Path, divisor: float, title=None) -> list[Path]:
    records = read_csv(csv_path, loss_path)
    written = []
    if records:
        written.append(plot_metrics(records, out / "metrics.svg", title))
    if loss_path is not None and any(
        getattr(r, f"loss_{n}") is not None for r in records for n in ("dec", "enc", "auto")
    ):
        written.append(plot_losses(records, out / "losses.svg", divisor, title))
    return written


def cmd_plot(args) -> int:
    csv_path = Path(args.csv)
    loss_path = args.losses
    if loss_path is None and (csv_path.parent / LOSSES).exists():
        loss_path = csv_path.parent / LOSSES
    divisor = args.divisor
    if divisor is None:
        cfg_file = csv_path.parent / "config.cfg"
        divisor = parse_config(cfg_file).loss_divisor if cfg_file.exists() else 1.0
    written = _render(csv_path, loss_path, args.out, divisor, args.title)
    for p in written:
        print(f"wrote {p}")
    return 0


def cmd_baseline(args) -> int:
    cfg = _config(args)
    b = baseline_for(cfg)
    path = args.out / "baseline.txt"
    write_manifest(path, {
        "kind": b.kind, "n": b.n, "hidden": b.hidden, "seed": cfg.seed,
        "agents": b.agents, "pairs": b.pairs,
        "x0": repr(b.x0), "c0": repr(b.c0), "s0": repr(b.s0),
    })
    print(f"x0={b.x0:.6g} c0={b.c0:.6g} s0={b.s0:.6g}")
    print(f"wrote {path}")
    return 0


def cmd_until(args) -> int:
    cfg = _config(args)
    baseline = _baseline(args, cfg)
    results = run_until_egood(cfg, args.workers, baseline)
    rows = "".join(f"{k},{'' if g is None else g},{int(g is None)}\n" for k, g in enumerate(results))
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "until.csv").write_text("replicate,generations,capped\n" + rows, encoding="utf-8")
    mean = mean_generations(results, cfg.cap)
    manifest = _manifest_head(cfg, "until")
    manifest.update(_baseline_entries(baseline))
    manifest.update(_seed_entries(cfg))
    manifest.update(mean_generations=f"{mean:.6g}", capped=sum(g is None for g in results))
    write_manifest(args.out / "manifest.txt", manifest)
    print(f"mean generations to e-good: {mean:.6g} ({sum(g is None for g in results)} capped at {cfg.cap})")
    return 0


def _int_list(text: str) -> list[int]:
    """``4,5,6`` or ``4:9`` (end exclusive) or ``10:40:5``."""
    values: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            bits = [int(b) for b in part.split(":")]
            values.extend(range(*bits))
        elif part:
            values.append(int(part))
    return values


def cmd_sweep(args) -> int:
    template = _config(args)
    ns = _int_list(args.ns)
    bottlenecks = _int_list(args.bottlenecks)
    summary = sweep_bottleneck(ns, bottlenecks, template, args.auto_factor, args.workers)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    lines = ["n,bottleneck,replicates,capped,mean_generations,generations\n"]
    for p in summary.points:
        gens = ";".join("" if g is None else str(g) for g in p.results)
        lines.append(f"{p.n},{p.bottleneck},{len(p.results)},"
                     f"{sum(g is None for g in p.results)},{p.mean:.6g},{gens}\n")
    (out / "sweep.csv").write_text("".join(lines), encoding="utf-8")
    entries = _manifest_head(template, "sweep")
    entries.update({
        "ns": ns, "bottlenecks": bottlenecks, "auto_factor": args.auto_factor,
        "slope": f"{summary.slope:.6g}", "intercept": f"{summary.intercept:.6g}",
        "excluded": summary.excluded,
    })
    for n, b in summary.best.items():
        entries[f"best.{n}"] = b
        entries[f"best_mean.{n}"] = f"{summary.best_mean[n]:.6g}"
        entries[f"neighbour_mean.{n}"] = f"{summary.neighbour_mean[n]:.6g}"
    write_manifest(out / "summary.txt", entries)
    if summary.best:
        plot_sweep(summary.best, summary.slope, summary.intercept, out / "sweep.svg")
    print(f"slope={summary.slope:.6g} intercept={summary.intercept:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iterlearn", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("run", help="run replicates; write CSV, SVG plots and a manifest")
    _add_common(p)
    _add_config_flags(p)
    p.add_argument("--baseline", type=Path, help="reuse a baseline file from `baseline`")
    p.add_argument("--timings", action="store_true", help="record wall-clock times (breaks byte identity)")
    p.add_argument("--title")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="generations-to-e-good over a bottleneck grid")
    _add_common(p)
    _add_config_flags(p)
    p.add_argument("--ns", required=True, help="n values, e.g. 4,5,6 or 4:9")
    p.add_argument("--bottlenecks", required=True, help="bottleneck sizes, e.g. 4:60:2")
    p.add_argument("--auto-factor", type=int, default=3, help="|A| = factor * |B| (A-ILM only)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("baseline", help="estimate naive-agent metric baselines")
    _add_common(p)
    _add_config_flags(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("until", help="generations until corrected x, c, s all exceed lambda")
    _add_common(p)
    _add_config_flags(p)
    p.add_argument("--baseline", type=Path)
    p.set_defaults(func=cmd_until)

    p = sub.add_parser("plot", help="re-render SVG plots from a results CSV")
    p.add_argument("csv", type=Path)
    p.add_argument("--losses", type=Path, help="per-epoch loss CSV (default: sibling losses.csv)")
    p.add_argument("--out", type=Path, default=Path("."))
    p.add_argument("--divisor", type=float, help="autoencoder loss divisor (default: from config.cfg)")
    p.add_argument("--title")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (IlmError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
