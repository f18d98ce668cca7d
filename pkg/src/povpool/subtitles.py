"""SubRip / WebVTT parsing and per-second subtitle collection."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import BadParameter, ParseError

log = logging.getLogger(__name__)

# hh:mm:ss,mmm (SRT) or [hh:]mm:ss.mmm (VTT)
_TS = r"(?:(\d+):)?(\d{1,2}):(\d{2})[,.](\d{1,3})"
_TIMING_RE = re.compile(rf"^\s*{_TS}\s*-->\s*{_TS}(?:\s.*)?$")
_TAG_RE = re.compile(r"<[^>]*>|\{[^}]*\}")
_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class SubtitleCue:
    start_s: float
    end_s: float
    text: str

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise BadParameter(f"cue must have start < end, got [{self.start_s}, {self.end_s})")
        if not self.text.strip():
            raise BadParameter("cue text is empty")

    def overlaps(self, lo: float, hi: float) -> bool:
        """Half-open [start, end) intersects half-open [lo, hi)."""
        return max(self.start_s, lo) < min(self.end_s, hi)


@dataclass(frozen=True)
class SecondText:
    second_index: int
    text: str


def clean_text(lines: Iterable[str]) -> str:
    joined = " ".join(lines)
    return _WS_RE.sub(" ", _TAG_RE.sub("", joined)).strip()


def _to_seconds(groups, lineno: int) -> float:
    h, m, s, ms = groups
    m, s = int(m), int(s)
    if m >= 60 or s >= 60:
        raise ParseError(f"timestamp field out of range ({m:02d}:{s:02d})", lineno)
    millis = int(ms.ljust(3, "0"))
    total_ms = ((int(h or 0) * 60 + m) * 60 + s) * 1000 + millis
    return total_ms / 1000.0


def parse_srt_text(text: str) -> list[SubtitleCue]:
    """Parse SubRip (or WebVTT) text into cues sorted by start time.

    Sorting is stable, so cues with equal start keep file order.
    """
    if text.startswith("\ufeff"):
        text = text[1:]
    lines = text.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    is_vtt = bool(lines) and lines[0].strip().startswith("WEBVTT")

    cues = []
    last_index = None
    i = 1 if is_vtt else 0
    n = len(lines)
    while i < n:
        if not lines[i].strip():
            i += 1
            continue
        # one block runs to the next blank line
        start = i
        block = []
        while i < n and lines[i].strip():
            block.append((i + 1, lines[i]))
            i += 1
        timing_pos = next((k for k, (_, ln) in enumerate(block) if "-->" in ln), None)
        if timing_pos is None:
            if is_vtt:
                continue  # NOTE/STYLE/REGION blocks
            raise ParseError("cue block without a timing line", start + 1)
        lineno, timing = block[timing_pos]
        m = _TIMING_RE.match(timing)
        if not m:
            raise ParseError(f"malformed timestamp {timing.strip()!r}", lineno)
        if not is_vtt and timing_pos == 1:
            head = block[0][1].strip()
            if head.isdigit():
                idx = int(head)
                if last_index is not None and idx <= last_index:
                    log.warning("line %d: cue index %d out of order after %d", block[0][0], idx, last_index)
                last_index = idx
        a = _to_seconds(m.groups()[:4], lineno)
        b = _to_seconds(m.groups()[4:], lineno)
        body = clean_text(ln for _, ln in block[timing_pos + 1:])
        if not body:
            log.warning("line %d: cue has no text after cleaning, skipped", lineno)
            continue
        if not a < b:
            log.warning("line %d: cue has non-positive duration, skipped", lineno)
            continue
        cues.append(SubtitleCue(a, b, body))

    cues.sort(key=lambda c: c.start_s)
    return cues


def parse_srt(path) -> list[SubtitleCue]:
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not valid UTF-8 ({exc.reason})") from exc
    return parse_srt_text(text)


def format_timestamp(seconds: float) -> str:
    total_ms = int(round(seconds * 1000))
    h, rem = divmod(total_ms, 3_600_000)
    m, rem = divmod(rem, 60_000)
    s, ms = divmod(rem, 1000)
    return f"{h:02d}:{m:02d}:{s:02d},{ms:03d}"


def format_srt(cues: Sequence[SubtitleCue]) -> str:
    out = []
    for i, c in enumerate(cues, start=1):
        out.append(f"{i}\n{format_timestamp(c.start_s)} --> {format_timestamp(c.end_s)}\n{c.text}\n")
    return "\n".join(out)


def second_text(cues: Sequence[SubtitleCue], s: int) -> SecondText:
    """Chronological, space-joined text of every cue overlapping [s-1, s)."""
    if s < 1:
        raise BadParameter(f"second index must be >= 1, got {s}")
    hits = [c for c in cues if c.overlaps(s - 1, s)]
    hits.sort(key=lambda c: c.start_s)  # stable: ties keep list order
    return SecondText(s, " ".join(c.text for c in hits))


def second_texts(cues: Sequence[SubtitleCue], seconds: Iterable[int]) -> dict[int, SecondText]:
    ordered = sorted(cues, key=lambda c: c.start_s)
    return {s: second_text(ordered, s) for s in seconds}
