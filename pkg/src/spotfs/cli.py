"""``sim run``: sweep schemes and SNRs, write the metrics CSV."""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys

from .errors import ConfigError
from .frame import SchemeId
from .harness import LinkConfig, config_from_dict, load_config, run_sweep
from .receiver import IterationPlan

EXIT_OK = 0
EXIT_CONFIG = 2


def _parse_snr(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError(f"--snr expects a comma-separated list of dB values, got {text!r}") from exc


def _parse_alpha(text: str):
    if text.strip().lower() == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"--alpha expects 'auto' or a number, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sim", description="OTFS pilot-scheme link simulator")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a Monte Carlo sweep")
    run.add_argument("--config", required=True, help="TOML file with link parameters")
    run.add_argument("--scheme", help="ep, sp or spN; comma-separate several")
    run.add_argument("--np", type=int, dest="n_pilots", help="pilot count for bare 'sp'")
    run.add_argument("--snr", help="comma-separated SNR list in dB")
    run.add_argument("--alpha", help="'auto' or a fixed pilot power ratio")
    run.add_argument("--plan", help="r_unc,r_cod")
    run.add_argument("--trials", type=int, help="frames per point (rounded up to whole code blocks)")
    run.add_argument("--seed", type=int)
    run.add_argument("--pcsi", action="store_true", default=None, help="bypass estimation with the true channel")
    run.add_argument("--out", help="CSV output path (stdout if omitted)")
    run.add_argument("--trace", help="JSONL receiver trace path")
    run.add_argument("--workers", type=int, help="worker processes")
    run.add_argument("-v", "--verbose", action="store_true")
    return p


def _schemes(args, cfg: LinkConfig) -> list[SchemeId]:
    if not args.scheme:
        s = cfg.scheme
        if args.n_pilots is not None and not s.is_ep:
            s = SchemeId.sp(args.n_pilots)
        return [s]
    default_np = args.n_pilots
    if default_np is None:
        default_np = 1 if cfg.scheme.is_ep else cfg.scheme.n_pilots
    out = []
    for token in args.scheme.split(","):
        s = SchemeId.parse(token)
        if token.strip().lower() == "sp":
            s = SchemeId.sp(default_np)
        out.append(s)
    return out


def resolve_config(args) -> tuple[LinkConfig, list[SchemeId]]:
    cfg = load_config(args.config)
    over: dict = {}
    if args.snr is not None:
        over["snr_grid"] = _parse_snr(args.snr)
    if args.alpha is not None:
        over["alpha"] = _parse_alpha(args.alpha)
    if args.plan is not None:
        over["plan"] = IterationPlan.parse(args.plan)
    for name in ("trials", "seed", "pcsi", "workers"):
        v = getattr(args, name)
        if v is not None:
            over[name] = v
    if over:
        cfg = config_from_dict(over, base=cfg)
    schemes = _schemes(args, cfg)
    for s in schemes:
        cfg.with_(scheme=s)  # validates pilot feasibility per scheme
    return cfg, schemes


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg, schemes = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    with contextlib.ExitStack() as stack:
        try:
            out = stack.enter_context(open(args.out, "w", encoding="utf-8", newline="")) if args.out else sys.stdout
            trace = stack.enter_context(open(args.trace, "w", encoding="utf-8", newline="")) if args.trace else None
        except OSError as exc:
            print(f"cannot open output: {exc}", file=sys.stderr)
            return 1
        try:
            run_sweep(cfg, schemes, out=out, trace_sink=trace)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
