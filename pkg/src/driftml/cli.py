"""Command-line entry points: ``run``, ``gen-stream`` and ``report``.

Exit codes: 0 success, 1 config error, 2 runtime failure, 3 partial run
(a stage failed; the partial report is still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .errors import ConfigError, DriftMLError, SpecError, StageError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_PARTIAL = 0, 1, 2, 3


def _err(msg: str) -> None:
    print(f"driftml: error: {msg}", file=sys.stderr)


def cmd_run(args) -> int:
    from .pipeline import load_config, run_pipeline

    cfg = load_config(args.config, args.seed)
    out = args.out if args.out is not None else cfg.output_dir()
    try:
        report = run_pipeline(cfg, out_dir=out)
    except StageError as exc:
        _err(f"stage {exc.stage!r} failed: {exc.cause}")
        print(f"partial report written to {Path(out) / 'report.json'}", file=sys.stderr)
        return EXIT_PARTIAL
    print(f"run complete: {report.artifacts['report']}")
    return EXIT_OK


def cmd_gen_stream(args) -> int:
    from .stream import DriftStreamSpec, generate_stream, stream_to_dataset, write_csv

    path = Path(args.spec)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"stream spec not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse stream spec {path}: {exc}") from None
    try:
        spec = DriftStreamSpec.from_dict(raw)
        spec.validate()
    except SpecError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: invalid stream spec: {exc}") from None
    if spec.n_instances is None:
        raise ConfigError(f"{path}: n_instances is required to materialize a stream")
    write_csv(stream_to_dataset(generate_stream(spec)), args.out)
    print(f"wrote {spec.n_instances} instances to {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    from .pipeline import load_report, summary, summary_rows

    report = load_report(args.run)
    if args.format == "json":
        print(json.dumps(summary(report), indent=2, sort_keys=True))
    else:
        rows = summary_rows(report)
        keys: list[str] = []
        for r in rows:
            keys += [k for k in r if k not in keys]
        w = csv.DictWriter(sys.stdout, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return EXIT_PARTIAL if report.get("status") == "failed" else EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _err(message)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="driftml", description="Drift-adaptive AutoML pipeline")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="execute a pipeline config")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help="output directory (default: config or $DRIFTML_OUTPUT_DIR)")
    r.set_defaults(fn=cmd_run)
    g = sub.add_parser("gen-stream", help="materialize a synthetic drift stream as CSV")
    g.add_argument("--spec", required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_gen_stream)
    s = sub.add_parser("report", help="re-emit the summary of a finished run")
    s.add_argument("--run", required=True, help="run output directory")
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except (DriftMLError, OSError) as exc:
        _err(str(exc))
        return EXIT_RUNTIME
