"""Frame sources and 1 Hz windowing.

Two source layouts are supported:

* a directory of ``frame_%06d.png`` files numbered from 000001, and
* a raw ``<name>.rgb24`` stream with a ``<name>.json`` sidecar holding
  ``width``, ``height``, ``fps`` and ``frames``.

Second ``s`` (1-based) owns frames ``(s-1)*f + 1 .. s*f``; anything past
``floor(T/f) * f`` is dropped.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
from PIL import Image

from .errors import DimensionMismatch, MetaMissing, SourceGap, TruncatedClip, BadParameter

log = logging.getLogger(__name__)

FRAME_NAME = "frame_{:06d}.png"
_FRAME_RE = re.compile(r"^frame_(\d{6})\.png$")


@dataclass(frozen=True)
class Frame:
    index: int
    pixels: np.ndarray  # (H, W, 3) uint8, read-only
    timestamp_s: float = 0.0

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8 or px.ndim != 3 or px.shape[2] != 3:
            raise DimensionMismatch(
                f"frame {self.index}: expected (H, W, 3) uint8, got {px.shape} {px.dtype}"
            )
        if self.index < 1:
            raise BadParameter(f"frame index must be >= 1, got {self.index}")
        if px.flags.writeable:
            px = px.copy()
            px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def to_float(self) -> np.ndarray:
        """Pixels as float64 in [0, 1]."""
        return self.pixels.astype(np.float64) / 255.0


@dataclass(frozen=True)
class ClipMeta:
    fps: int
    total_frames: int

    def __post_init__(self):
        if int(self.fps) != self.fps or self.fps <= 0:
            raise BadParameter(f"fps must be a positive integer, got {self.fps}")
        if self.total_frames < 0:
            raise BadParameter(f"total_frames must be >= 0, got {self.total_frames}")

    @property
    def seconds(self) -> int:
        return self.total_frames // self.fps

    @property
    def trailing_frames(self) -> int:
        """Frames past the last full second; these are dropped."""
        return self.total_frames - self.seconds * self.fps


@dataclass(frozen=True)
class SecondWindow:
    second_index: int
    frames: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        idx = [fr.index for fr in self.frames]
        if idx and idx != list(range(idx[0], idx[0] + len(idx))):
            raise SourceGap(f"second {self.second_index}: non-contiguous frame indices {idx}")

    @property
    def fps(self) -> int:
        return len(self.frames)

    @property
    def shape(self):
        return self.frames[0].pixels.shape

    def stack(self) -> np.ndarray:
        """(f, H, W, 3) float64 stack in [0, 1]."""
        return np.stack([fr.pixels for fr in self.frames]).astype(np.float64) / 255.0


def _sidecar_for(path: Path) -> Path:
    return path.with_suffix(".json")


def probe_source(path, fps: int | None = None) -> ClipMeta:
    """Build the ClipMeta for a source.

    Raw streams carry fps in their sidecar; image directories need ``fps``.
    """
    path = Path(path)
    if path.is_dir():
        if fps is None:
            raise MetaMissing(f"{path}: image directories need an explicit fps")
        names = _numbered_frames(path)
        return ClipMeta(fps=int(fps), total_frames=len(names))
    side = _read_sidecar(path)
    if fps is not None and int(fps) != side["fps"]:
        raise BadParameter(f"{path}: fps {fps} disagrees with sidecar fps {side['fps']}")
    return ClipMeta(fps=side["fps"], total_frames=side["frames"])


def _numbered_frames(path: Path) -> list[Path]:
    found = {}
    for p in path.iterdir():
        m = _FRAME_RE.match(p.name)
        if m:
            found[int(m.group(1))] = p
    n = len(found)
    missing = sorted(set(range(1, n + 1)) - set(found))
    if missing:
        raise SourceGap(f"{path}: frame numbering has a gap at {FRAME_NAME.format(missing[0])}")
    return [found[i] for i in range(1, n + 1)]


def _read_sidecar(path: Path) -> dict:
    side = _sidecar_for(path)
    if not side.exists():
        raise MetaMissing(f"{path}: sidecar {side.name} not found")
    with open(side) as fh:
        data = json.load(fh)
    for key in ("width", "height", "fps", "frames"):
        if key not in data:
            raise MetaMissing(f"{side}: missing key {key!r}")
    return {k: int(data[k]) for k in ("width", "height", "fps", "frames")}


def open_frame_source(path, meta: ClipMeta) -> Iterator[Frame]:
    """Yield frames of ``path`` in index order, at most ``meta.total_frames``."""
    path = Path(path)
    if path.is_dir():
        yield from _iter_png_dir(path, meta)
    else:
        yield from _iter_raw(path, meta)


def _iter_png_dir(path: Path, meta: ClipMeta) -> Iterator[Frame]:
    names = _numbered_frames(path)[: meta.total_frames]
    shape = None
    for i, p in enumerate(names, start=1):
        with Image.open(p) as im:
            px = np.asarray(im.convert("RGB"), dtype=np.uint8)
        if shape is None:
            shape = px.shape
        elif px.shape != shape:
            raise DimensionMismatch(f"{p.name}: size {px.shape[1]}x{px.shape[0]} != {shape[1]}x{shape[0]}")
        yield Frame(index=i, pixels=px, timestamp_s=(i - 1) / meta.fps)


def _iter_raw(path: Path, meta: ClipMeta) -> Iterator[Frame]:
    side = _read_sidecar(path)
    w, h = side["width"], side["height"]
    frame_bytes = w * h * 3
    size = path.stat().st_size
    if frame_bytes == 0 or size % frame_bytes:
        raise DimensionMismatch(
            f"{path}: {size} bytes is not a whole number of {w}x{h} RGB24 frames"
        )
    available = size // frame_bytes
    if available < side["frames"]:
        raise TruncatedClip(f"{path}: sidecar declares {side['frames']} frames, file holds {available}")
    n = min(meta.total_frames, side["frames"])
    with open(path, "rb") as fh:
        for i in range(1, n + 1):
            buf = fh.read(frame_bytes)
            px = np.frombuffer(buf, dtype=np.uint8).reshape(h, w, 3)
            yield Frame(index=i, pixels=px, timestamp_s=(i - 1) / meta.fps)


def iter_windows(stream: Iterable[Frame], meta: ClipMeta) -> Iterator[SecondWindow]:
    f, S = meta.fps, meta.seconds
    it = iter(stream)
    shape = None
    for s in range(1, S + 1):
        frames = []
        for _ in range(f):
            try:
                fr = next(it)
            except StopIteration:
                raise TruncatedClip(
                    f"stream ended inside second {s}: need {S * f} frames for {S} seconds"
                ) from None
            if shape is None:
                shape = fr.pixels.shape
            elif fr.pixels.shape != shape:
                raise DimensionMismatch(f"frame {fr.index}: shape {fr.pixels.shape} != {shape}")
            frames.append(fr)
        expected = (s - 1) * f + 1
        if frames[0].index != expected:
            raise SourceGap(f"second {s} starts at frame {frames[0].index}, expected {expected}")
        yield SecondWindow(second_index=s, frames=tuple(frames))
    if meta.trailing_frames:
        log.warning("dropping %d trailing frame(s) past second %d", meta.trailing_frames, S)


def windows(stream: Iterable[Frame], meta: ClipMeta) -> list[SecondWindow]:
    """Partition a frame stream into ``meta.seconds`` full windows."""
    return list(iter_windows(stream, meta))


def write_raw_clip(path, frames: np.ndarray, fps: int) -> Path:
    """Write an (T, H, W, 3) uint8 array as ``.rgb24`` plus sidecar."""
    path = Path(path)
    frames = np.ascontiguousarray(frames, dtype=np.uint8)
    if frames.ndim != 4 or frames.shape[3] != 3:
        raise DimensionMismatch(f"expected (T, H, W, 3), got {frames.shape}")
    T, h, w, _ = frames.shape
    path.write_bytes(frames.tobytes())
    side = {"width": int(w), "height": int(h), "fps": int(fps), "frames": int(T)}
    _sidecar_for(path).write_text(json.dumps(side, sort_keys=True) + "\n")
    return path


def write_png_dir(path, frames: np.ndarray) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for i, px in enumerate(np.asarray(frames, dtype=np.uint8), start=1):
        Image.fromarray(px, "RGB").save(path / FRAME_NAME.format(i))
    return path
