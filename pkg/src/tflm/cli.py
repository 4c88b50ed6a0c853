"""Command-line entry point: ``tflm train | localize | evaluate | synth``.

Exit status is 0 on success, 2 for bad input or usage, 3 when an internal
consistency check fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import corpus as corpus_io
from .errors import TflmError
from .evaluation import (
    CDF_STEPS,
    cross_validate,
    export_cdf,
    localize,
    write_report,
)
from .learning import TrainingConfig, train
from .minic import parse_program
from .model import load_spec, save_spec, validate_spec
from .spectra import CoverageMatrix

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tflm", description="Learned fault localization over MiniC parse trees.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a model on an annotated corpus")
    t.add_argument("--manifest", required=True)
    t.add_argument("--k", type=int, default=1)
    t.add_argument("--iters", type=int, default=100)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--alpha", type=float, default=1.0, help="additive smoothing")
    t.add_argument("--out", required=True)

    loc = sub.add_parser("localize", help="rank the lines of one program")
    loc.add_argument("--model", required=True)
    loc.add_argument("--source", required=True)
    loc.add_argument("--coverage", required=True)

    e = sub.add_parser("evaluate", help="leave-one-version-out evaluation")
    e.add_argument("--manifest", required=True)
    e.add_argument("--k-min", type=int, default=1)
    e.add_argument("--k-max", type=int, default=4)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--iters", type=int, default=100)
    e.add_argument("--report", required=True)
    e.add_argument("--cdf", required=True)

    s = sub.add_parser("synth", help="sample a synthetic corpus from a generator model")
    s.add_argument("--generator", required=True, help="model file, or 'loop-context' for the built-in generator")
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--depth", type=int, default=40)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--min-buggy", type=int, default=1)
    s.add_argument("--out", required=True)
    return p


def cmd_train(args) -> int:
    entries = corpus_io.load_corpus(args.manifest)
    config = TrainingConfig(k=args.k, em_iterations=args.iters, seed=args.seed, smoothing_alpha=args.alpha)
    result = train(entries, config)
    validate_spec(result.spec)
    save_spec(result.spec, args.out)
    print(f"final log score {result.trace[-1]:.6f} after {len(result.trace)} iterations")
    return EXIT_OK


def cmd_localize(args) -> int:
    spec = load_spec(args.model)
    with open(args.source, encoding="utf-8") as fh:
        program = parse_program(fh.read(), spec.grammar)
    coverage = CoverageMatrix.load(args.coverage)
    coverage.check_lines(program.executable_lines)
    attrs = corpus_io.annotate(program, coverage, ())
    ranking = localize(spec, program, attrs)
    out = sys.stdout
    out.write("rank,line,score\n")
    for rank, (line, score) in enumerate(ranking.entries, 1):
        out.write(f"{rank},{line},{score!r}\n")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if not 1 <= args.k_min <= args.k_max:
        raise TflmError(f"bad k range [{args.k_min}, {args.k_max}]")
    entries = corpus_io.load_corpus(args.manifest)
    config = TrainingConfig(em_iterations=args.iters, seed=args.seed)
    report = cross_validate(entries, range(args.k_min, args.k_max + 1), config)
    write_report(report, args.report)
    columns = {m: export_cdf([getattr(f, m) for f in report.folds]) for m in ("tflm", "tarantula", "sbi")}
    with open(args.cdf, "w", encoding="utf-8") as fh:
        fh.write("threshold,tflm,tarantula,sbi\n")
        for i in range(CDF_STEPS + 1):
            t = columns["tflm"][i][0]
            fh.write(f"{t:.2f}," + ",".join(repr(columns[m][i][1]) for m in ("tflm", "tarantula", "sbi")) + "\n")
    for m in ("tflm", "tarantula", "sbi"):
        print(f"mean FS {m}: {report.mean(m):.4f}")
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.generator == "loop-context":
        gen = corpus_io.loop_context_generator()
    else:
        gen = load_spec(args.generator)
    synth = corpus_io.generate_synthetic_corpus(gen, args.count, args.depth, args.seed,
                                                min_buggy_lines=args.min_buggy, with_posteriors=False)
    manifest = corpus_io.write_corpus(synth.entries, args.out)
    print(f"wrote {len(synth.entries)} programs; manifest {manifest}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "localize": cmd_localize, "evaluate": cmd_evaluate, "synth": cmd_synth}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose or args.command == "train" else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (TflmError, OSError, SyntaxError, json.JSONDecodeError, KeyError) as exc:
        # MiniCSyntaxError is a TflmError and carries "line L, column C" in its message
        print(f"tflm {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (AssertionError, FloatingPointError) as exc:
        print(f"tflm {args.command}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
