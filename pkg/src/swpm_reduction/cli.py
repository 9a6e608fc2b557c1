"""Command line entry point: ``sample``, ``moments``, ``reduce`` and ``experiment``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from .distributions import DistParams, sample_dsmc_like, sample_swpm_like
from .ensemble import keys_up_to, moment, read_particles, tail_functional, write_particles
from .grouping import GroupingConfig, reduce_grouped
from .harness import (
    DEFAULT_GROUP_SIZE,
    config_as_dict,
    load_config,
    records_to_csv,
    run_experiment,
    summarize_errors,
    summary_to_csv,
    with_threads,
)
from .schemes import FixedSpeed, MinimalSpeed, SchemeConfig, reduce_with_report

log = logging.getLogger("swpm_reduction")


def _triple(text: str) -> tuple[float, float, float]:
    vals = [float(x) for x in text.split(",")]
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    return tuple(vals)


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _speed(text: str):
    if text.strip().lower() == "min":
        return MinimalSpeed()
    try:
        return FixedSpeed(float(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"speed must be 'min' or a number, got {text!r}")


def _write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_sample(args) -> int:
    params = DistParams(args.alpha, args.beta, args.vr)
    sampler = sample_swpm_like if args.mode == "swpm" else sample_dsmc_like
    write_particles(sampler(params, args.n, args.seed), args.out)
    return 0


def cmd_moments(args) -> int:
    e = read_particles(args.inp)
    payload = {
        "n_particles": len(e),
        "mass": e.mass,
        "moments": {k.label: moment(e, k) for k in keys_up_to(args.max_order)},
        "tails": {f"{r:g}": tail_functional(e, r) for r in args.tails},
    }
    _write_json(args.out, payload)
    return 0


def cmd_reduce(args) -> int:
    e = read_particles(args.inp)
    scheme = SchemeConfig(
        variant=args.scheme, delta=args.delta, gamma=args.gamma, l=args.l, speed=args.speed
    )
    if args.grouping == "rectbox":
        n_group = args.ngroup or DEFAULT_GROUP_SIZE[scheme.variant]
        gcfg = GroupingConfig(args.vr, n_group, scheme, seed=args.seed)
        out, rep = reduce_grouped(e, gcfg)
        report = {"grouping": rep.as_dict(with_groups=True)}
    else:
        out, rep = reduce_with_report(e, scheme)
        report = {"reduction": rep.as_dict()}
    report["scheme"] = {
        "variant": scheme.variant,
        "delta": scheme.delta,
        "gamma": scheme.gamma,
        "l": list(scheme.l),
        "speed": "min" if isinstance(scheme.speed, MinimalSpeed) else scheme.speed.s,
    }
    report["n_in"], report["n_out"] = len(e), len(out)
    write_particles(out, args.out)
    if args.report:
        _write_json(args.report, report)
    return 0


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    if args.threads is not None:
        cfg = with_threads(cfg, args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = run_experiment(cfg)
    (out / "records.csv").write_text(records_to_csv(records))
    (out / "summary.csv").write_text(summary_to_csv(summarize_errors(records)))
    _write_json(out / "report.json", {"config": config_as_dict(cfg), "records": [asdict(r) for r in records]})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swpm-reduce", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", help="draw a DSMC-like or SWPM-like ensemble")
    s.add_argument("--alpha", type=_triple, default=(0.0, 0.0, 0.0))
    s.add_argument("--beta", type=_triple, default=(0.0, 0.0, 0.0))
    s.add_argument("--vr", type=float, default=7.0)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--mode", choices=("dsmc", "swpm"), default="swpm")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    m = sub.add_parser("moments", help="moments and tail functionals of a particle file")
    m.add_argument("--in", dest="inp", required=True)
    m.add_argument("--max-order", type=int, default=5)
    m.add_argument("--tails", type=_floats, default=[1, 2, 3, 4, 5, 6])
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_moments)

    r = sub.add_parser("reduce", help="reduce a particle file")
    r.add_argument("--in", dest="inp", required=True)
    r.add_argument("--scheme", choices=("k1", "k2", "k2.5", "k3"), type=str.lower, required=True)
    r.add_argument("--grouping", choices=("none", "rectbox"), default="none")
    r.add_argument("--ngroup", type=int, default=None)
    r.add_argument("--vr", type=float, default=7.0)
    r.add_argument("--delta", type=float, default=2.0**0.5)
    r.add_argument("--gamma", type=float, default=3.0**0.5)
    r.add_argument("--l", type=_triple, default=(0.5, 0.5, 0.5))
    r.add_argument("--speed", type=_speed, default=MinimalSpeed())
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    r.add_argument("--report", default=None)
    r.set_defaults(func=cmd_reduce)

    x = sub.add_parser("experiment", help="run a batch experiment from a config file")
    x.add_argument("--config", required=True)
    x.add_argument("--out", required=True)
    x.add_argument("--threads", type=int, default=None)
    x.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
