"""Context capping, interleaved manifests, prompt scaffolds and token budgets."""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .errors import BadParameter, IncompletePipeline, PromptError
from .pooling import POOLED_NAME

DEFAULT_S_MAX = 60
DEFAULT_M = 256
DEFAULT_SYS_TOKENS = 128

REASONING_MARKER = "Reasoning:"
ANSWER_MARKER = "Final Answer:"

SYSTEM_PROMPT = (
    "You are given a video as a sequence of seconds. Each second is one pooled image "
    "that summarizes the motion within it, preceded by the subtitles spoken during "
    "that second. Answer the question using only this context. First explain your "
    "evidence after 'Reasoning:', then give a short answer after 'Final Answer:'."
)
KEY_FRAME_INSTRUCTION = (
    "The key frame image at the end of this block is the raw frame at the exact "
    "moment the question was asked."
)
MCQ_INSTRUCTION = (
    "The question comes with lettered options. After 'Final Answer:' reply with the "
    "letter of the single correct option."
)

KEY_FRAME_SLOT = 0


def placeholder(k: int) -> str:
    return f"<image:{k}>"


@dataclass(frozen=True)
class SubsamplePlan:
    S: int
    s_max: int
    indices: tuple

    @property
    def K(self) -> int:
        return len(self.indices)

    def to_dict(self) -> dict:
        return {"S": self.S, "s_max": self.s_max, "K": self.K, "rule": "midpoint", "indices": list(self.indices)}


def plan_subsample(S: int, s_max: int = DEFAULT_S_MAX) -> SubsamplePlan:
    """Pick K = min(S, s_max) seconds at stratum midpoints.

    s_k = floor((k - 1/2) * S / K) + 1 for k = 1..K, the identity when S <= s_max.
    """
    if S < 0:
        raise BadParameter(f"S must be >= 0, got {S}")
    if s_max < 1:
        raise BadParameter(f"s_max must be >= 1, got {s_max}")
    K = min(S, s_max)
    # exact integer form of floor((2k - 1) * S / (2K))
    idx = tuple(min(S, max(1, ((2 * k - 1) * S) // (2 * K) + 1)) for k in range(1, K + 1))
    return SubsamplePlan(S, s_max, idx)


@dataclass(frozen=True)
class ManifestEntry:
    second: int
    text: str
    image: str


@dataclass(frozen=True)
class InterleavedManifest:
    question: str
    entries: tuple = ()
    key_frame: str | None = None
    system_prompt: str = SYSTEM_PROMPT
    pooling: dict = field(default_factory=dict)
    options: tuple = ()
    plan: dict | None = None

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "options", tuple(self.options))
        secs = [e.second for e in self.entries]
        if any(b <= a for a, b in zip(secs, secs[1:])):
            raise IncompletePipeline(f"manifest seconds must strictly increase, got {secs}")

    @property
    def mode(self) -> str:
        return "mcq" if self.options else "freeform"

    def to_dict(self) -> dict:
        d = {
            "question": self.question,
            "system_prompt": self.system_prompt,
            "key_frame": self.key_frame,
            "pooling": dict(self.pooling),
            "entries": [{"second": e.second, "text": e.text, "image": e.image} for e in self.entries],
        }
        if self.options:
            d["options"] = list(self.options)
        if self.plan is not None:
            d["plan"] = dict(self.plan)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> "InterleavedManifest":
        return cls(
            question=d["question"],
            entries=tuple(ManifestEntry(int(e["second"]), e["text"], e["image"]) for e in d["entries"]),
            key_frame=d.get("key_frame"),
            system_prompt=d.get("system_prompt", SYSTEM_PROMPT),
            pooling=d.get("pooling", {}),
            options=tuple(d.get("options", ())),
            plan=d.get("plan"),
        )

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "InterleavedManifest":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _text_of(t) -> str:
    return t if isinstance(t, str) else t.text


def build_manifest(
    plan: SubsamplePlan,
    texts: Mapping,
    pooled: Mapping[int, str],
    question: str,
    key_frame: str | None = None,
    pooling: Mapping | None = None,
    options: Sequence[str] = (),
    system_prompt: str = SYSTEM_PROMPT,
) -> InterleavedManifest:
    """Assemble [U_s1, I_s1, ..., U_sK, I_sK] for the planned seconds.

    ``texts`` maps second -> str or SecondText; ``pooled`` maps second ->
    image reference (a path relative to the manifest).
    """
    entries = []
    for s in plan.indices:
        if s not in pooled:
            raise IncompletePipeline(f"no pooled image for planned second {s}")
        if s not in texts:
            raise IncompletePipeline(f"no subtitle text for planned second {s}")
        entries.append(ManifestEntry(s, _text_of(texts[s]), str(pooled[s])))
    sys_prompt = system_prompt
    if key_frame is not None:
        sys_prompt += " " + KEY_FRAME_INSTRUCTION
    if options:
        sys_prompt += " " + MCQ_INSTRUCTION
    return InterleavedManifest(
        question=question,
        entries=tuple(entries),
        key_frame=key_frame,
        system_prompt=sys_prompt,
        pooling=dict(pooling or {}),
        options=tuple(options),
        plan=plan.to_dict(),
    )


def option_labels(n: int) -> list[str]:
    if n > len(string.ascii_lowercase):
        raise PromptError(f"at most 26 options are supported, got {n}")
    return list(string.ascii_lowercase[:n])


def build_prompt(manifest: InterleavedManifest) -> str:
    """Render the manifest as prompt text with ``<image:k>`` placeholders.

    Layout: system block (key frame ``<image:0>`` last), question, optional
    lettered options, then one ``[t=s] text`` line and one placeholder per
    second, then the two elicitors.
    """
    if not manifest.question or not manifest.question.strip():
        raise PromptError("question is empty")
    lines = ["<SYS>", manifest.system_prompt]
    if manifest.key_frame is not None:
        lines.append(f"Key frame: {placeholder(KEY_FRAME_SLOT)}")
    lines += ["</SYS>", f"Question: {manifest.question.strip()}"]
    if manifest.options:
        lines.append("Options:")
        for lab, opt in zip(option_labels(len(manifest.options)), manifest.options):
            lines.append(f"({lab}) {opt}")
    for k, e in enumerate(manifest.entries, start=1):
        lines.append(f"[t={e.second}s] {e.text}".rstrip())
        lines.append(placeholder(k))
    lines += [REASONING_MARKER, ANSWER_MARKER]
    return "\n".join(lines) + "\n"


def prompt_images(manifest: InterleavedManifest) -> list[str]:
    """Image references in placeholder order: key frame (if any), then seconds."""
    refs = [manifest.key_frame] if manifest.key_frame is not None else []
    return refs + [e.image for e in manifest.entries]


def count_text_tokens(text: str) -> int:
    """Whitespace token count, a stand-in for the model tokenizer."""
    return len(text.split())


def load_counts_file(path) -> dict[int, int]:
    """Per-second token counts from JSON ``{"<second>": count, ...}``."""
    with open(path) as fh:
        raw = json.load(fh)
    return {int(k): int(v) for k, v in raw.items()}


@dataclass(frozen=True)
class BudgetParams:
    m: int = DEFAULT_M
    n_sys_q: int = DEFAULT_SYS_TOKENS
    text_counts: Mapping[int, int] = field(default_factory=dict)
    default_text: int = 0  # tokens for seconds absent from text_counts

    def __post_init__(self):
        if self.m < 1:
            raise BadParameter(f"m must be >= 1, got {self.m}")
        if self.n_sys_q < 0:
            raise BadParameter(f"n_sys_q must be >= 0, got {self.n_sys_q}")
        if self.default_text < 0 or any(v < 0 for v in self.text_counts.values()):
            raise BadParameter("text token counts must be >= 0")

    def text_for(self, s: int) -> int:
        return self.text_counts.get(s, self.default_text)


@dataclass(frozen=True)
class BudgetReport:
    K: int
    fps: int
    m: int
    n_sys_q: int
    text_tokens: int
    pooled: int
    unpooled: int

    @property
    def ratio(self) -> float:
        return self.unpooled / self.pooled if self.pooled else float("inf")

    @property
    def ratio_label(self) -> str:
        return f"~{round(self.ratio)}x"

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "fps": self.fps,
            "m": self.m,
            "n_sys_q": self.n_sys_q,
            "text_tokens": self.text_tokens,
            "pooled": self.pooled,
            "unpooled": self.unpooled,
            "ratio": self.ratio,
            "ratio_label": self.ratio_label,
        }


def estimate_budget(plan: SubsamplePlan, params: BudgetParams, fps: int = 24) -> BudgetReport:
    """N_ctx = n_sys_q + sum_k(|u_k| + m) pooled, versus K*f*m images unpooled."""
    if fps < 1:
        raise BadParameter(f"fps must be >= 1, got {fps}")
    text = sum(params.text_for(s) for s in plan.indices)
    K = plan.K
    pooled = params.n_sys_q + text + K * params.m
    unpooled = params.n_sys_q + text + K * fps * params.m
    return BudgetReport(K, fps, params.m, params.n_sys_q, text, pooled, unpooled)


def pooled_image_name(s: int) -> str:
    return POOLED_NAME.format(s)
