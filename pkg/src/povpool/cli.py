"""Command line entry point: ``povpool <subcommand> ...``.

Exit codes: 0 success, 1 I/O, 2 bad parameter, 3 pipeline integrity.
Failures print one JSON object to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .errors import EXIT_IO, EXIT_PARAM, BadParameter, PovpoolError
from .interleave import (
    DEFAULT_M,
    DEFAULT_S_MAX,
    DEFAULT_SYS_TOKENS,
    BudgetParams,
    build_manifest,
    build_prompt,
    count_text_tokens,
    estimate_budget,
    load_counts_file,
    plan_subsample,
)
from .losses import DEFAULT_BETA, loss_report, read_records
from .metrics import evaluate_files, write_report
from .pipeline import RunConfig, cmd_pool, cmd_run, default_jobs, read_options
from .pooling import DEFAULT_ALPHA, DEFAULT_SIGMA, OPERATORS, read_pooling_record
from .subtitles import parse_srt, second_texts


def _add_pooling_args(p):
    p.add_argument("--source", required=True, help="frame directory (frame_%%06d.png) or .rgb24 stream with .json sidecar")
    p.add_argument("--fps", type=int, help="frames per second; required for image directories, read from the sidecar otherwise")
    p.add_argument("--operator", type=str.upper, choices=OPERATORS, default="BBLF", help="pooling operator (default: BBLF)")
    p.add_argument("--lambda", dest="lam", type=float, help="WAE recency rate, > 0 (default: 1/fps)")
    p.add_argument("--alpha", type=float, help=f"BBLF last-frame weight in [0, 1] (default: {DEFAULT_ALPHA})")
    p.add_argument("--sigma", type=float, help=f"BBLF blur sigma in pixels, > 0 (default: {DEFAULT_SIGMA})")
    p.add_argument("--jobs", type=int, default=None, help="worker threads for pooling (default: $POVPOOL_JOBS or 1)")


def _add_context_args(p):
    p.add_argument("--s-max", type=int, default=DEFAULT_S_MAX, help=f"cap on pooled seconds kept (default: {DEFAULT_S_MAX})")
    p.add_argument("--m", type=int, default=DEFAULT_M, help=f"visual tokens per image (default: {DEFAULT_M})")
    p.add_argument("--sys-tokens", type=int, default=DEFAULT_SYS_TOKENS, help=f"system + question tokens (default: {DEFAULT_SYS_TOKENS})")
    p.add_argument("--counts-file", help='JSON {"<second>": tokens} overriding whitespace token counts')
    p.add_argument("--mode", choices=("freeform", "mcq"), default="freeform", help="prompt mode (default: freeform)")
    p.add_argument("--options-file", help="answer options for mcq mode: one per line, or a JSON list")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="povpool", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pool", help="pool every second of a clip into one image")
    _add_pooling_args(p)
    p.add_argument("--out", required=True, help="output directory for pooled_%%04d.png and pooling.json")

    p = sub.add_parser("interleave", help="build manifest.json and prompt.txt from pooled images and subtitles")
    p.add_argument("--pooled", required=True, help="directory written by `pool`")
    p.add_argument("--subs", help="SubRip/WebVTT subtitle file (optional)")
    p.add_argument("--question", required=True)
    p.add_argument("--key-frame", help="image reference for the key frame of the question")
    p.add_argument("--out", help="output directory (default: the pooled directory)")
    _add_context_args(p)

    p = sub.add_parser("budget", help="estimate pooled vs unpooled context length")
    p.add_argument("--seconds", type=int, required=True, help="clip length S in whole seconds")
    p.add_argument("--fps", type=int, default=24, help="raw frame rate for the unpooled estimate (default: 24)")
    p.add_argument("--text-per-second", type=int, default=0, help="subtitle tokens per kept second when no counts file is given")
    p.add_argument("--s-max", type=int, default=DEFAULT_S_MAX, help=f"cap on pooled seconds kept (default: {DEFAULT_S_MAX})")
    p.add_argument("--m", type=int, default=DEFAULT_M, help=f"visual tokens per image (default: {DEFAULT_M})")
    p.add_argument("--sys-tokens", type=int, default=DEFAULT_SYS_TOKENS, help=f"system + question tokens (default: {DEFAULT_SYS_TOKENS})")
    p.add_argument("--counts-file", help='JSON {"<second>": tokens}')
    p.add_argument("--out", help="also write the report to this JSON file")

    p = sub.add_parser("eval-metrics", help="score predictions against references")
    p.add_argument("--pred", required=True, help="JSONL {id, reasoning, answer}")
    p.add_argument("--ref", required=True, help="JSONL {id, reasoning, answer}")
    p.add_argument("--embeds", help="JSONL {id, pred_vec, ref_vec, pred_vec_r, ref_vec_r}")
    p.add_argument("--mode", choices=("freeform", "mcq"), default="freeform", help="mcq scores option-letter accuracy only")
    p.add_argument("--out", default="report.json", help="report path (default: report.json)")

    p = sub.add_parser("losses", help="evaluate SFT or DPO loss on log-prob records")
    p.add_argument("--kind", choices=("sft", "dpo"), required=True)
    p.add_argument("--input", required=True, help="JSONL records: {id, logp} for sft; {id, policy_pos, policy_neg, ref_pos, ref_neg[, beta]} for dpo")
    p.add_argument("--beta", type=float, help=f"DPO beta, overrides per-record values (default: record value or {DEFAULT_BETA})")
    p.add_argument("--per-record", action="store_true", help="include the per-record breakdown")
    p.add_argument("--out", help="also write the JSON result to this file")

    p = sub.add_parser("run", help="pool, align, interleave and budget in one go")
    _add_pooling_args(p)
    p.add_argument("--subs", help="SubRip/WebVTT subtitle file; missing file means empty subtitles")
    p.add_argument("--question", required=True)
    p.add_argument("--key-second", type=int, help="second at which the question was asked; its last raw frame becomes the key frame")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="reserved; the pipeline has no randomness")
    _add_context_args(p)
    return parser


def _jobs(args) -> int:
    return args.jobs if args.jobs is not None else default_jobs()


def _options(args) -> tuple:
    if args.mode == "mcq":
        if not args.options_file:
            raise BadParameter("--mode mcq needs --options-file")
        return tuple(read_options(args.options_file))
    return ()


def _emit(obj, out=None):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    print(text)


def _run_pool(args):
    cfg = RunConfig(source=args.source, out_dir=args.out, operator=args.operator, fps=args.fps,
                    lam=args.lam, alpha=args.alpha, sigma=args.sigma, jobs=_jobs(args))
    _emit(cmd_pool(cfg))


def _run_interleave(args):
    pooled_dir = Path(args.pooled)
    out = Path(args.out) if args.out else pooled_dir
    out.mkdir(parents=True, exist_ok=True)
    record = read_pooling_record(pooled_dir)
    available = dict(zip(record["seconds"], record["images"]))
    S = max(available, default=0)
    plan = plan_subsample(S, args.s_max)
    refs = {s: os.path.relpath(pooled_dir / name, out) for s, name in available.items()}
    cues = parse_srt(args.subs) if args.subs else []
    texts = second_texts(cues, plan.indices)
    manifest = build_manifest(plan, texts, refs, question=args.question, key_frame=args.key_frame,
                              pooling=record["spec"], options=_options(args))
    manifest.save(out / "manifest.json")
    (out / "prompt.txt").write_text(build_prompt(manifest), encoding="utf-8")
    counts = load_counts_file(args.counts_file) if args.counts_file else {
        s: count_text_tokens(t.text) for s, t in texts.items()}
    budget = estimate_budget(plan, BudgetParams(args.m, args.sys_tokens, counts), fps=record["spec"]["fps"])
    _emit({"manifest": str(out / "manifest.json"), "entries": plan.K, "budget": budget.to_dict()})


def _run_budget(args):
    plan = plan_subsample(args.seconds, args.s_max)
    counts = load_counts_file(args.counts_file) if args.counts_file else {}
    params = BudgetParams(args.m, args.sys_tokens, counts, default_text=args.text_per_second)
    report = estimate_budget(plan, params, fps=args.fps)
    _emit(report.to_dict(), args.out)


def _run_eval(args):
    report = evaluate_files(args.pred, args.ref, args.embeds, mode=args.mode)
    write_report(report, args.out)
    print(json.dumps(report.get("mean", report), indent=2, sort_keys=True))


def _run_losses(args):
    report = loss_report(args.kind, read_records(args.input), beta=args.beta)
    if not args.per_record:
        report.pop("records")
    _emit(report, args.out)


def _run_run(args):
    cfg = RunConfig(
        source=args.source, out_dir=args.out, operator=args.operator, fps=args.fps,
        lam=args.lam, alpha=args.alpha, sigma=args.sigma, subs=args.subs,
        question=args.question, key_second=args.key_second, s_max=args.s_max, m=args.m,
        sys_tokens=args.sys_tokens, counts_file=args.counts_file, mode=args.mode,
        options=_options(args), jobs=_jobs(args), seed=args.seed,
    )
    run = cmd_run(cfg)
    _emit({"out": args.out, "entries": run["plan"]["K"], "budget": run["budget"]})


COMMANDS = {
    "pool": _run_pool,
    "interleave": _run_interleave,
    "budget": _run_budget,
    "eval-metrics": _run_eval,
    "losses": _run_losses,
    "run": _run_run,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except PovpoolError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": EXIT_IO}), file=sys.stderr)
        return EXIT_IO
    except (KeyError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": EXIT_PARAM}), file=sys.stderr)
        return EXIT_PARAM
    return 0


if __name__ == "__main__":
    sys.exit(main())
