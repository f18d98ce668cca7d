"""Regenerate the bundled 10 s test clip under tests/data/clip10/.

A bright square slides left to right over a slow color gradient, 24 fps,
16x12 pixels, plus three trailing frames that do not make a full second.
"""

import argparse
from pathlib import Path

import numpy as np

from povpool.frames import write_raw_clip

SRT = """\
1
00:00:00,500 --> 00:00:02,000
<i>Where did</i> the ball go?

2
00:00:01,800 --> 00:00:03,200
It rolled under
the red car.

3
00:00:05,000 --> 00:00:09,500
{\\an8}Then the dog chased it all the way down the street.
"""


def make_frames(seconds=10, fps=24, width=16, height=12, trailing=3):
    T = seconds * fps + trailing
    yy, xx = np.mgrid[0:height, 0:width]
    frames = np.empty((T, height, width, 3), dtype=np.uint8)
    for t in range(T):
        bg = (xx * 8 + t) % 256
        frames[t, ..., 0] = bg
        frames[t, ..., 1] = (yy * 16) % 256
        frames[t, ..., 2] = 40
        x0 = (t // 4) % (width - 3)
        frames[t, 4:8, x0:x0 + 3] = (250, 250, 20)
    return frames


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests" / "data" / "clip10"))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_raw_clip(out / "clip.rgb24", make_frames(), fps=24)
    (out / "clip.srt").write_text(SRT, encoding="utf-8")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
