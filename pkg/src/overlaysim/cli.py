"""Command line: ``overlaysim run`` sweeps a protocol, ``overlaysim verify`` runs acceptance suites."""
from __future__ import annotations

import argparse
import json
import sys

from .acceptance import SUITES, verify
from .harness import PROTOCOLS, ConfigError, ExperimentConfig, run_experiment, write_csv


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="overlaysim",
        description="Overlay construction simulator. 'run' sweeps a protocol and writes CSV; "
        "'verify' (or any use of --suite) runs an acceptance suite.",
    )
    p.add_argument("command", nargs="?", choices=("run", "verify"), default=None)
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--protocol", choices=PROTOCOLS)
    p.add_argument("--family", help="input graph family")
    p.add_argument("--sizes", type=_ints, help="comma separated node counts")
    p.add_argument("--seeds", help='comma separated seeds or "base:count"')
    p.add_argument("--b-bits", type=int, dest="b_bits", help="GOSSIP-reply message size in bits")
    p.add_argument("--gamma-factor", type=float, dest="gamma_factor", help="HYBRID global capacity factor")
    p.add_argument("--strict", action=argparse.BooleanOptionalAction, default=None,
                   help="raise on capacity overload (default) or drop messages")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--summary", help="write the JSON summary here")
    p.add_argument("--suite", help=f"acceptance suite: {', '.join(SUITES)}")
    return p


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    for name in ("protocol", "family", "sizes", "seeds", "b_bits", "gamma_factor", "strict", "out"):
        val = getattr(args, name)
        if val is not None:
            setattr(cfg, name, val)
    return cfg.validate()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "verify" or (args.command is None and args.suite):
        args.suite = args.suite or "all"
        if args.suite not in SUITES:
            parser.error(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
        results = verify(args.suite)
        failed = [c.cid for c in results if not c.passed]
        print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
        return 0 if not failed else 1
    try:
        cfg = _config(args)
    except (ConfigError, OSError, TypeError, KeyError, ValueError) as e:
        parser.error(str(e))
    records, summary = run_experiment(cfg)
    text = write_csv(records, cfg.out)
    if not cfg.out:
        sys.stdout.write(text)
    if args.summary:
        with open(args.summary, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
    for n, row in summary["sizes"].items():
        ratios = " ".join(f"{k}={v:.3f}" for k, v in row.items() if "per" in k)
        print(f"n={n} runs={row['runs']} success={row['success_rate']:.3f} {ratios}", file=sys.stderr)
    return 0 if summary["all_success"] else 1


if __name__ == "__main__":
    sys.exit(main())
