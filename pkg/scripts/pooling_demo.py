"""Pool one second of a clip with every operator and save a side-by-side strip.

Defaults to the bundled test clip. The strip shows, left to right: the last
raw frame, then WA, WAE, WAR and BBLF.
"""

import argparse
from pathlib import Path

import numpy as np

from povpool.frames import iter_windows
from povpool.pipeline import load_clip
from povpool.pooling import OPERATORS, PoolingSpec, key_frame, pool_second, save_png

CLIP = Path(__file__).resolve().parents[1] / "tests" / "data" / "clip10" / "clip.rgb24"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--source", default=str(CLIP))
    ap.add_argument("--fps", type=int, help="needed for frame directories")
    ap.add_argument("--second", type=int, default=3)
    ap.add_argument("--scale", type=int, default=8, help="nearest-neighbour upscale for viewing")
    ap.add_argument("--out", default="pooling_strip.png")
    args = ap.parse_args()

    meta, stream = load_clip(args.source, args.fps)
    win = next(w for w in iter_windows(stream, meta) if w.second_index == args.second)
    tiles = [key_frame(win).pixels]
    for op in OPERATORS:
        spec = PoolingSpec.with_defaults(op, meta.fps)
        tiles.append(pool_second(win, spec).pixels)
        print(f"{op:5s} {spec.to_dict()}")
    gap = np.full((tiles[0].shape[0], 1, 3), 255, np.uint8)
    strip = np.concatenate([t for tile in tiles for t in (tile, gap)][:-1], axis=1)
    strip = strip.repeat(args.scale, axis=0).repeat(args.scale, axis=1)
    save_png(strip, args.out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
