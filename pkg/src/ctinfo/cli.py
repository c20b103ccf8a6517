"""Command-line entry point: one subcommand per study.

Exit codes: 0 on success, 2 for configuration/parameter problems, 1 for
anything else. Failures print a machine-readable JSON object of the form
{"error": <category>, "message": <text>} on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dataio import emit, load_config
from .errors import CTInfoError, IoError, ParamError
from .studies import STUDY_NAMES, run_study

_USAGE_ERRORS = (ParamError, IoError)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctinfo",
        description=(
            "Information-budget studies for micro-CT pipelines: per-stage "
            "entropy, mutual information and KL reports on phantoms or "
            "user-supplied stacks."
        ),
    )
    sub = parser.add_subparsers(dest="study", required=True)
    for name in STUDY_NAMES:
        p = sub.add_parser(name, help=f"run the {name} study")
        p.add_argument("--config", type=Path, default=None, help="dataset config (JSON/YAML)")
        p.add_argument("--seed", type=int, default=None, help="study seed")
        p.add_argument("--out", type=Path, default=None, help="report path")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument(
            "--norm-scope",
            choices=("global", "per-image"),
            default=None,
            help="normalization scope where the study supports both",
        )
        p.add_argument(
            "--param",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a study parameter (repeatable)",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        params = {}
        for item in args.param:
            if "=" not in item:
                raise ParamError(f"--param expects KEY=VALUE, got {item!r}")
            key, _, value = item.partition("=")
            params[key] = _parse_value(value)
        if args.seed is not None:
            params["seed"] = args.seed
        if args.norm_scope is not None:
            params["norm_scope"] = args.norm_scope.replace("-", "_")
        dataset = load_config(args.config) if args.config else None
        report = run_study(args.study, params, dataset)
        out = args.out or Path(f"{args.study}_report.{args.format}")
        emit(report, args.format, out)
        print(f"{args.study}: wrote {out}")
        return 0
    except CTInfoError as exc:
        print(json.dumps({"error": exc.category, "message": str(exc)}), file=sys.stderr)
        return 2 if isinstance(exc, _USAGE_ERRORS) else 1
    except Exception as exc:  # noqa: BLE001 - surface as machine-readable
        print(json.dumps({"error": "InternalError", "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
