"""``volterra-lab`` command line front-end.

Exit codes: 0 ok, 2 config error, 3 numeric failure.
"""

import argparse
import json
import sys

from .errors import ConfigError, VolterraError
from .experiments import load_config, run

COMMANDS = {
    "simulate": "Simulate",
    "kg-eval": "KgEval",
    "integrate": "Integrate",
    "verify-ou": "VerifyOU",
    "chaos": "Chaos",
    "converge": "Converge",
    "check-integrability": "CheckIntegrability",
}


def build_parser():
    p = argparse.ArgumentParser(prog="volterra-lab", description="VMLV simulation and anticipative integrals")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--seed", type=int, default=None, help="overrides base_seed")
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--out", default=None, help="output directory")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(
            args.config, experiment=COMMANDS[args.command], base_seed=args.seed,
            workers=args.workers, out=args.out,
        )
        result = run(cfg)
    except ConfigError as exc:
        print(f"volterra-lab: config error: {exc}", file=sys.stderr)
        return 2
    except (VolterraError, ArithmeticError, ValueError) as exc:
        print(f"volterra-lab: numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(json.dumps(result.summary, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
