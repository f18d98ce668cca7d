"""End-to-end orchestration: ingest -> pool -> align -> interleave -> budget."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__
from .errors import BadParameter, PromptError
from .frames import ClipMeta, iter_windows, open_frame_source, probe_source
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
from .pooling import OPERATORS, POOLED_NAME, PoolingSpec, key_frame, pool_windows, save_png, write_pooled
from .subtitles import parse_srt, second_texts

log = logging.getLogger(__name__)

KEY_FRAME_NAME = "key_frame.png"


def default_jobs() -> int:
    env = os.environ.get("POVPOOL_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise BadParameter(f"POVPOOL_JOBS must be an integer, got {env!r}") from None
    return 1


@dataclass(frozen=True)
class RunConfig:
    source: str
    out_dir: str
    operator: str = "BBLF"
    fps: int | None = None  # required for image directories
    lam: float | None = None
    alpha: float | None = None
    sigma: float | None = None
    subs: str | None = None
    question: str = ""
    key_second: int | None = None
    s_max: int = DEFAULT_S_MAX
    m: int = DEFAULT_M
    sys_tokens: int = DEFAULT_SYS_TOKENS
    counts_file: str | None = None
    mode: str = "freeform"
    options: tuple = ()
    jobs: int = 1
    seed: int | None = None  # reserved, nothing here is random

    def __post_init__(self):
        # pooling parameters are checked before any I/O; fps-dependent checks follow in PoolingSpec
        op = self.operator.upper()
        if op not in OPERATORS:
            raise BadParameter(f"unknown operator {self.operator!r}; choose from {OPERATORS}")
        if self.lam is not None and (op != "WAE" or not self.lam > 0):
            raise BadParameter(f"lambda must be > 0 and only given for WAE, got {self.lam} for {op}")
        if self.alpha is not None and (op != "BBLF" or not 0.0 <= self.alpha <= 1.0):
            raise BadParameter(f"alpha must lie in [0, 1] and only be given for BBLF, got {self.alpha} for {op}")
        if self.sigma is not None and (op != "BBLF" or not self.sigma > 0):
            raise BadParameter(f"sigma must be > 0 and only given for BBLF, got {self.sigma} for {op}")
        if self.fps is not None and self.fps < 1:
            raise BadParameter(f"fps must be >= 1, got {self.fps}")
        if self.mode not in ("freeform", "mcq"):
            raise BadParameter(f"mode must be freeform or mcq, got {self.mode!r}")
        if self.mode == "mcq" and not self.options:
            raise BadParameter("mcq mode needs options")
        if self.s_max < 1:
            raise BadParameter(f"s_max must be >= 1, got {self.s_max}")
        if self.jobs < 1:
            raise BadParameter(f"jobs must be >= 1, got {self.jobs}")
        if self.key_second is not None and self.key_second < 1:
            raise BadParameter(f"key second must be >= 1, got {self.key_second}")


def load_clip(source, fps=None):
    meta = probe_source(source, fps)
    return meta, open_frame_source(source, meta)


def pooling_spec(config: RunConfig, meta: ClipMeta) -> PoolingSpec:
    return PoolingSpec.with_defaults(config.operator, meta.fps, lam=config.lam, alpha=config.alpha, sigma=config.sigma)


def cmd_pool(config: RunConfig, seconds=None) -> dict:
    """Pool every second (or only ``seconds``) of the source into ``out_dir``."""
    meta, stream = load_clip(config.source, config.fps)
    spec = pooling_spec(config, meta)
    wanted = None if seconds is None else set(seconds)
    selected = [w for w in iter_windows(stream, meta) if wanted is None or w.second_index in wanted]
    pooled = pool_windows(selected, spec, jobs=config.jobs)
    write_pooled(config.out_dir, pooled, spec)
    return {
        "meta": {"fps": meta.fps, "total_frames": meta.total_frames, "seconds": meta.seconds,
                 "dropped_trailing_frames": meta.trailing_frames},
        "pooling": spec.to_dict(),
        "pooled_seconds": [p.second_index for p in pooled],
    }


def read_options(path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    if str(path).endswith(".json"):
        opts = json.loads(text)
    else:
        opts = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not opts:
        raise PromptError(f"{path}: no options found")
    return [str(o) for o in opts]


def cmd_run(config: RunConfig) -> dict:
    """Run the whole pipeline and write manifest.json, prompt.txt, budget.json, run.json."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not config.question.strip():
        raise PromptError("question is empty")

    meta, stream = load_clip(config.source, config.fps)
    spec = pooling_spec(config, meta)
    plan = plan_subsample(meta.seconds, config.s_max)
    wanted = set(plan.indices)
    if config.key_second is not None and config.key_second > meta.seconds:
        raise BadParameter(f"key second {config.key_second} beyond clip length {meta.seconds}")

    selected, key = [], None
    for w in iter_windows(stream, meta):
        if w.second_index in wanted:
            selected.append(w)
        if w.second_index == config.key_second:
            key = key_frame(w)
    pooled = pool_windows(selected, spec, jobs=config.jobs)
    write_pooled(out, pooled, spec)
    pooled_refs = {p.second_index: POOLED_NAME.format(p.second_index) for p in pooled}

    key_ref = None
    if key is not None:
        save_png(key.pixels, out / KEY_FRAME_NAME)
        key_ref = KEY_FRAME_NAME

    subs_missing = config.subs is None or not Path(config.subs).exists()
    if config.subs is not None and subs_missing:
        log.warning("subtitle file %s not found; using empty subtitles", config.subs)
    cues = [] if subs_missing else parse_srt(config.subs)
    texts = second_texts(cues, plan.indices)

    manifest = build_manifest(
        plan,
        texts,
        pooled_refs,
        question=config.question,
        key_frame=key_ref,
        pooling=spec.to_dict(),
        options=config.options,
    )
    manifest.save(out / "manifest.json")
    (out / "prompt.txt").write_text(build_prompt(manifest), encoding="utf-8")

    if config.counts_file:
        counts = load_counts_file(config.counts_file)
        counts_source = "file"
    else:
        counts = {s: count_text_tokens(t.text) for s, t in texts.items()}
        counts_source = "whitespace"
    budget = estimate_budget(plan, BudgetParams(config.m, config.sys_tokens, counts), fps=meta.fps)
    (out / "budget.json").write_text(json.dumps(budget.to_dict(), indent=2, sort_keys=True) + "\n")

    run = {
        "version": __version__,
        "config": asdict(config),
        "resolved": {
            "pooling": spec.to_dict(),
            "rounding": "half-to-even",
            "blur": {"radius": "ceil(3*sigma)", "border": "reflect"},
            "subsample_rule": "midpoint: s_k = floor((k - 1/2) * S / K) + 1",
            "text_counts": counts_source,
        },
        "meta": {"fps": meta.fps, "total_frames": meta.total_frames, "seconds": meta.seconds,
                 "dropped_trailing_frames": meta.trailing_frames},
        "plan": plan.to_dict(),
        "subtitles_missing": subs_missing,
        "subtitle_cues": len(cues),
        "key_frame": key_ref,
        "budget": budget.to_dict(),
        "artifacts": ["manifest.json", "prompt.txt", "budget.json", "pooling.json"]
        + [pooled_refs[s] for s in plan.indices]
        + ([KEY_FRAME_NAME] if key_ref else []),
    }
    (out / "run.json").write_text(json.dumps(run, indent=2, sort_keys=True) + "\n")
    return run
