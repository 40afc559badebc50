"""``evalkit`` command line.

Data goes to stdout (or report files); logs go to stderr. Exit codes:
0 ok, 1 usage or bad input, 2 schema violation, 3 every backend call
failed, 4 partial results (some metric failed).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import BackendError, EvalKitError, SchemaViolation

log = logging.getLogger("evalkit")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SCHEMA = 2
EXIT_BACKEND = 3
EXIT_PARTIAL = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=default(None), help="TOML or JSON run configuration")
    parser.add_argument("--seed", type=int, default=default(None), help="seed for mock backends (default 0)")
    parser.add_argument("--workers", type=int, default=default(None), help="clips evaluated in parallel")
    parser.add_argument("--log-level", default=default("WARNING"),
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="stderr log level")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="evalkit", description="Evaluate long-form speech synthesis output.")
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        _global_options(p, suppress=True)
        return p

    p = add("eval", "run all seven metrics over a manifest and write reports")
    p.add_argument("--manifest", required=True)
    p.add_argument("--audio-dir", required=True, help="directory holding <id>.wav files")
    p.add_argument("--report-dir", required=True)
    p.add_argument("--model", default="system", help="system label used in report rows")
    p.set_defaults(func=cmd_eval)

    p = add("validate", "check a test-case manifest")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_validate)

    p = add("report", "re-render a report from raw.json")
    p.add_argument("--from", dest="source", required=True, help="raw.json written by eval")
    p.add_argument("--format", choices=["json", "csv", "markdown"], default="markdown")
    p.add_argument("--group-by", default="model", help="comma-separated: model,scenario,challenge,language")
    p.set_defaults(func=cmd_report)

    p = add("stats", "agreement statistics (PLCC, SRCC, KRCC, QWK, MAE)")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--pairs", help="CSV with two score columns")
    src.add_argument("--raters", help="CSV item x rater matrix for leave-one-out correlation")
    p.add_argument("--x-col")
    p.add_argument("--y-col")
    p.set_defaults(func=cmd_stats)

    p = add("srmr", "print the SRMR of a WAV file")
    p.add_argument("wav")
    p.set_defaults(func=cmd_srmr)

    p = add("wer", "print WER (en) or CER (zh) between two text files")
    p.add_argument("--lang", required=True, choices=["zh", "en"])
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.set_defaults(func=cmd_wer)

    p = add("make-fixture", "write the bundled six-case synthetic benchmark")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_fixture)
    return parser


# ---------------------------------------------------------------------------
# commands


def _load_run_config(args):
    from .runner.config import EvalConfig, load_config

    config = load_config(args.config) if getattr(args, "config", None) else EvalConfig()
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "workers", None) is not None:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        config.workers = args.workers
    return config


def cmd_eval(args) -> int:
    from .backends import build_backends
    from .runner.evaluate import evaluate_all, total_backend_failure
    from .runner.manifest import load_manifest
    from .runner.report import emit_report

    cases = load_manifest(args.manifest)
    config = _load_run_config(args)
    audio_dir = Path(args.audio_dir)
    if not audio_dir.is_dir():
        raise UsageError(f"--audio-dir {audio_dir} is not a directory")
    backends = build_backends(config.backends, seed=config.seed, base_dir=config.base_dir)
    try:
        reports = evaluate_all(cases, audio_dir, backends, config, model=args.model)
        emit_report(reports, args.report_dir, config=config.public_dict(), provenance=backends.provenance())
    finally:
        backends.close()

    failed = sum(1 for r in reports for _ in r.failed_metrics)
    if total_backend_failure(reports):
        log.error("every backend-driven metric failed")
        return EXIT_BACKEND
    if failed:
        log.warning("%d metric value(s) failed across %d clip(s)", failed, len(reports))
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_validate(args) -> int:
    from .runner.manifest import load_manifest

    cases = load_manifest(args.manifest)
    print(f"{len(cases)} cases ok")
    return EXIT_OK


def cmd_report(args) -> int:
    from .runner.report import render, reports_from_raw

    raw = json.loads(Path(args.source).read_text(encoding="utf-8"))
    if not isinstance(raw, dict) or not isinstance(raw.get("clips"), list):
        raise SchemaViolation("expected a raw report object with a 'clips' list", "clips")
    group_by = tuple(g.strip() for g in args.group_by.split(",") if g.strip())
    try:
        reports = reports_from_raw(raw)
    except TypeError as exc:
        raise SchemaViolation(f"bad clip record ({exc})", "clips") from None
    sys.stdout.write(render(reports, args.format, group_by, raw.get("config"), raw.get("provenance")))
    return EXIT_OK


def cmd_stats(args) -> int:
    from .stats import STAT_NAMES, all_stats, format_table, leave_one_out_rater_corr, load_pairs_csv, \
        load_rater_matrix_csv

    if args.pairs:
        pairs = load_pairs_csv(args.pairs, args.x_col, args.y_col)
        sys.stdout.write(format_table([all_stats(pairs)], STAT_NAMES))
    else:
        rows = leave_one_out_rater_corr(load_rater_matrix_csv(args.raters))
        sys.stdout.write(format_table(rows, ("rater",) + STAT_NAMES))
    return EXIT_OK


def cmd_srmr(args) -> int:
    from .audio import load_wav
    from .srmr import srmr

    print(f"{srmr(load_wav(args.wav)):.4f}")
    return EXIT_OK


def cmd_wer(args) -> int:
    from .text import Transcript, text_error_rate

    ref = Path(args.ref).read_text(encoding="utf-8")
    hyp = Path(args.hyp).read_text(encoding="utf-8")
    print(f"{text_error_rate(Transcript(ref, args.lang), Transcript(hyp, args.lang)):.4f}")
    return EXIT_OK


def cmd_make_fixture(args) -> int:
    from .synth import make_mini_fixture

    out = make_mini_fixture(args.out, seed=getattr(args, "seed", None) or 0)
    print(out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    logging.basicConfig(level=getattr(args, "log_level", "WARNING"), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaViolation as exc:
        print(f"schema violation: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except BackendError as exc:
        print(f"backend failure ({exc.code}): {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except EvalKitError as exc:
        print(f"error ({exc.code}): {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
