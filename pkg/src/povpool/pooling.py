"""Per-second temporal pooling.

Four operators collapse a one-second window of frames into one image:

    WA    uniform average
    WAE   exponential recency weights exp(lam * (tau - s*f)), normalized
    WAR   linear ramp weights k / (f(f+1)/2)
    BBLF  alpha * last_frame + (1 - alpha) * blur_sigma(uniform average)

All arithmetic runs in float64 on [0, 1] pixels and is rounded half-to-even
to 8 bits exactly once, at the end.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image
from scipy.ndimage import correlate1d

from .errors import BadParameter, EmptyWindow, WeightMismatch
from .frames import Frame, SecondWindow

OPERATORS = ("WA", "WAE", "WAR", "BBLF")

DEFAULT_ALPHA = 0.5
DEFAULT_SIGMA = 2.0

POOLED_NAME = "pooled_{:04d}.png"


@dataclass(frozen=True)
class PoolingSpec:
    operator: str
    fps: int
    lam: float | None = None
    alpha: float | None = None
    sigma: float | None = None

    def __post_init__(self):
        if self.operator not in OPERATORS:
            raise BadParameter(f"unknown operator {self.operator!r}; choose from {OPERATORS}")
        if int(self.fps) != self.fps or self.fps < 1:
            raise BadParameter(f"fps must be a positive integer, got {self.fps}")
        wae = self.operator == "WAE"
        bblf = self.operator == "BBLF"
        if (self.lam is not None) != wae:
            raise BadParameter("lambda is required for WAE and only for WAE")
        if ((self.alpha is not None) or (self.sigma is not None)) != bblf:
            raise BadParameter("alpha and sigma are required for BBLF and only for BBLF")
        if bblf and (self.alpha is None or self.sigma is None):
            raise BadParameter("BBLF needs both alpha and sigma")
        if wae and not self.lam > 0:
            raise BadParameter(f"lambda must be > 0, got {self.lam}")
        if bblf:
            if not 0.0 <= self.alpha <= 1.0:
                raise BadParameter(f"alpha must lie in [0, 1], got {self.alpha}")
            if not self.sigma > 0:
                raise BadParameter(f"sigma must be > 0, got {self.sigma}")

    @classmethod
    def with_defaults(cls, operator, fps, lam=None, alpha=None, sigma=None):
        """Fill unset parameters: lambda = 1/f, alpha = 0.5, sigma = 2.0."""
        operator = operator.upper()
        if operator == "WAE":
            return cls(operator, fps, lam=1.0 / fps if lam is None else lam)
        if operator == "BBLF":
            return cls(
                operator,
                fps,
                alpha=DEFAULT_ALPHA if alpha is None else alpha,
                sigma=DEFAULT_SIGMA if sigma is None else sigma,
            )
        return cls(operator, fps)

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass(frozen=True)
class PooledFrame:
    second_index: int
    pixels: np.ndarray  # (H, W, 3) uint8
    spec: PoolingSpec | None = None

    @property
    def shape(self):
        return self.pixels.shape


def uniform_weights(f: int) -> np.ndarray:
    if f < 1:
        raise EmptyWindow("window has no frames")
    return np.full(f, 1.0 / f)


def exp_weights(f: int, lam: float) -> np.ndarray:
    if f < 1:
        raise EmptyWindow("window has no frames")
    if not lam > 0:
        raise BadParameter(f"lambda must be > 0, got {lam}")
    # offsets tau - s*f run from -(f-1) to 0; max exponent is 0, so no overflow
    d = np.arange(-(f - 1), 1, dtype=np.float64)
    w = np.exp(lam * d)
    return w / w.sum()


def ramp_weights(f: int) -> np.ndarray:
    if f < 1:
        raise EmptyWindow("window has no frames")
    k = np.arange(1, f + 1, dtype=np.float64)
    return k / (f * (f + 1) / 2)


def weights_for(spec: PoolingSpec, f: int | None = None) -> np.ndarray:
    f = spec.fps if f is None else f
    if spec.operator == "WAE":
        return exp_weights(f, spec.lam)
    if spec.operator == "WAR":
        return ramp_weights(f)
    return uniform_weights(f)


_TIE_TOL = 1e-9


def quantize(image: np.ndarray) -> np.ndarray:
    """[0, 1] reals to uint8, round half to even.

    Values within ``_TIE_TOL`` levels of a half-level are snapped onto it first,
    so an exact 8-bit tie such as 127.5 is not decided by float noise from the
    division by 255.
    """
    y = np.asarray(image, dtype=np.float64) * 255.0
    halves = np.rint(y * 2.0)
    y = np.where(np.abs(y * 2.0 - halves) < 2 * _TIE_TOL, halves / 2.0, y)
    return np.clip(np.rint(y), 0, 255).astype(np.uint8)


def average_real(window: SecondWindow, w) -> np.ndarray:
    """Weighted average of the window in [0, 1] reals, before rounding."""
    w = np.asarray(w, dtype=np.float64)
    if len(window.frames) == 0:
        raise EmptyWindow(f"second {window.second_index} has no frames")
    if w.shape != (len(window.frames),):
        raise WeightMismatch(f"{w.size} weights for {len(window.frames)} frames")
    return np.tensordot(w, window.stack(), axes=1)


def weighted_average(window: SecondWindow, w, spec: PoolingSpec | None = None) -> PooledFrame:
    return PooledFrame(window.second_index, quantize(average_real(window, w)), spec)


def gaussian_kernel(sigma: float) -> np.ndarray:
    if not sigma > 0:
        raise BadParameter(f"sigma must be > 0, got {sigma}")
    r = math.ceil(3 * sigma)
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur over the two spatial axes.

    ``image`` is (H, W) or (H, W, C) real valued; the result has the same
    shape and dtype float64. Borders are handled by half-sample symmetric
    reflection, which keeps total mass unchanged.
    """
    k = gaussian_kernel(sigma)
    out = np.asarray(image, dtype=np.float64)
    out = correlate1d(out, k, axis=0, mode="reflect")
    out = correlate1d(out, k, axis=1, mode="reflect")
    return out


def key_frame(window: SecondWindow) -> Frame:
    """The last frame of the second (index s*f), unchanged."""
    if not window.frames:
        raise EmptyWindow(f"second {window.second_index} has no frames")
    return window.frames[-1]


def blend_blur_real(window: SecondWindow, spec: PoolingSpec) -> np.ndarray:
    if spec.operator != "BBLF":
        raise BadParameter(f"blend_blur_last_frame needs a BBLF spec, got {spec.operator}")
    mean = average_real(window, uniform_weights(len(window.frames)))
    last = key_frame(window).to_float()
    a = spec.alpha
    return a * last + (1.0 - a) * gaussian_blur(mean, spec.sigma)


def blend_blur_last_frame(window: SecondWindow, spec: PoolingSpec) -> PooledFrame:
    return PooledFrame(window.second_index, quantize(blend_blur_real(window, spec)), spec)


def pool_second(window: SecondWindow, spec: PoolingSpec) -> PooledFrame:
    if spec.operator == "BBLF":
        return blend_blur_last_frame(window, spec)
    return weighted_average(window, weights_for(spec, len(window.frames)), spec)


def pool_windows(windows: Iterable[SecondWindow], spec: PoolingSpec, jobs: int = 1) -> list[PooledFrame]:
    """Pool each window; results come back in input order."""
    windows = list(windows)
    if jobs <= 1 or len(windows) < 2:
        return [pool_second(w, spec) for w in windows]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(lambda w: pool_second(w, spec), windows))


def save_png(pixels: np.ndarray, path) -> Path:
    path = Path(path)
    Image.fromarray(np.asarray(pixels, dtype=np.uint8), "RGB").save(path, format="PNG")
    return path


def write_pooled(out_dir, pooled: Sequence[PooledFrame], spec: PoolingSpec) -> list[Path]:
    """Write ``pooled_%04d.png`` per second plus a ``pooling.json`` record."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [save_png(p.pixels, out_dir / POOLED_NAME.format(p.second_index)) for p in pooled]
    record = {
        "spec": spec.to_dict(),
        "seconds": [p.second_index for p in pooled],
        "images": [p.name for p in paths],
        "rounding": "half-to-even",
        "blur": {"radius": "ceil(3*sigma)", "border": "reflect"},
    }
    (out_dir / "pooling.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return paths


def read_pooling_record(out_dir) -> dict:
    with open(Path(out_dir) / "pooling.json") as fh:
        return json.load(fh)
