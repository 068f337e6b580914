"""Command-line entry point: ``python -m safemix <command>``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .agent import RunTrace, Setup, run_episode
from .config import RunConfig
from .harness import add_standard_series, emit_plots, first_trigger_audit, run_sweep, trace_metrics, verify_bounds
from .novelty import PREDICATES, corollary_level, k_stop_upper, m_stop_lower, witnesses


def parse_seeds(text: str) -> list[int]:
    """``"30"`` means seeds 0..29; ``"3,5,8"`` and ``"10-19"`` list them."""
    text = text.strip()
    if "," not in text and "-" not in text:
        return list(range(int(text)))
    out = []
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return sorted(set(out))


def _out_dir(config: RunConfig, override: str | None) -> Path:
    return Path(override) if override else config.output_root() / config.name


def cmd_run(args) -> int:
    config = RunConfig.load(args.config)
    setup = Setup.build(config)
    trace = run_episode(config, args.seed, setup)
    out = _out_dir(config, args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"trace-{args.seed}.tsv"
    path.write_text(trace.to_text())
    metrics = trace_metrics(trace, setup)
    print(json.dumps(metrics, indent=1, sort_keys=True))
    print(f"trace written to {path}")
    return 0


def cmd_sweep(args) -> int:
    config = RunConfig.load(args.config)
    seeds = parse_seeds(args.seeds) if args.seeds else config.seeds
    out = _out_dir(config, args.out)
    summary = run_sweep(config, seeds, out)
    first = RunTrace.from_text((out / f"trace-{summary.seeds[0]}.tsv").read_text()) if summary.seeds else None
    add_standard_series(summary, first)
    (out / "summary.json").write_text(summary.to_text())
    emit_plots(summary, out / "plots")
    for k, v in summary.aggregate.items():
        print(f"{k:28s} mean {v['mean']:.6g} +- {v['half_width']:.3g}")
    print(f"summary written to {out / 'summary.json'}")
    return 0


def cmd_verify(args) -> int:
    config = RunConfig.load(args.config)
    seeds = parse_seeds(args.seeds) if args.seeds else None
    checks = verify_bounds(config, seeds)
    for c in checks:
        print(c.line())
    return 0 if all(c.passed for c in checks) else 1


def cmd_novelty(args) -> int:
    x = args.bits
    if set(x) - {"0", "1"}:
        print("bits must be a string of 0s and 1s", file=sys.stderr)
        return 2
    k = k_stop_upper(x, args.max_len, args.fuel)
    print(f"k_stop_upper  {k if k is not None else 'none within budget'}")
    print(f"m_stop_lower  {m_stop_lower(x, args.max_len, args.fuel)!r}")
    for p in witnesses(x, args.max_len, args.fuel):
        print(f"witness       {p}")
    return 0


def _read_predicates(path: str) -> list[str]:
    text = Path(path).read_text()
    if path.endswith(".toml"):
        from .config import tomllib

        return list(tomllib.loads(text)["predicates"])
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


def cmd_audit(args) -> int:
    config = RunConfig.load(args.config)
    preds = _read_predicates(args.predicates) if args.predicates else config.predicates
    seeds = parse_seeds(args.seeds) if args.seeds else None
    counts = first_trigger_audit(config, preds, seeds)
    ok = True
    for p, n in counts.items():
        level = corollary_level(PREDICATES[p])
        asserted = config.L >= level
        ok &= not (asserted and n > 0)
        note = "asserted zero" if asserted else f"recorded only (L < {level:g})"
        print(f"{p:18s} incidents {n:5d}  {note}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="safemix", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one seeded run; writes its trace")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="many seeds; writes traces, summary and plots")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds", help="count, list or range, e.g. 30 or 0,1,2 or 10-19")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify-bounds", help="empirical estimates next to the bounds")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("novelty", help="stopping complexity and mass of a bit string")
    p.add_argument("bits")
    p.add_argument("--max-len", type=int, default=16)
    p.add_argument("--fuel", type=int, default=10_000)
    p.set_defaults(func=cmd_novelty)

    p = sub.add_parser("audit", help="first occurrences of predicates caused by the optimizer")
    p.add_argument("--config", required=True)
    p.add_argument("--predicates", help="file with one predicate id per line, or TOML with a predicates list")
    p.add_argument("--seeds")
    p.set_defaults(func=cmd_audit)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
