import json

import numpy as np
import pytest

from povpool.errors import DimensionMismatch, MetaMissing, SourceGap, TruncatedClip
from povpool.frames import (
    ClipMeta,
    Frame,
    open_frame_source,
    probe_source,
    windows,
    write_png_dir,
    write_raw_clip,
)


def _frames(T, h=3, w=4, seed=0):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, (T, h, w, 3), dtype=np.uint8)


def test_png_directory_48_frames(tmp_path):
    arr = _frames(48)
    write_png_dir(tmp_path / "d", arr)
    meta = probe_source(tmp_path / "d", fps=24)
    assert meta.seconds == 2
    frames = list(open_frame_source(tmp_path / "d", meta))
    assert len(frames) == 48
    assert [f.index for f in frames] == list(range(1, 49))
    np.testing.assert_array_equal(frames[10].pixels, arr[10])


def test_raw_stream_1440_frames_gives_60_windows(tmp_path):
    path = write_raw_clip(tmp_path / "c.rgb24", np.zeros((1440, 2, 2, 3), np.uint8), fps=24)
    meta = probe_source(path)
    assert (meta.fps, meta.total_frames, meta.seconds) == (24, 1440, 60)
    assert len(windows(open_frame_source(path, meta), meta)) == 60


def test_trailing_frame_dropped(tmp_path):
    path = write_raw_clip(tmp_path / "c.rgb24", _frames(25), fps=24)
    meta = probe_source(path)
    ws = windows(open_frame_source(path, meta), meta)
    assert meta.seconds == 1 and meta.trailing_frames == 1
    assert len(ws) == 1
    assert [f.index for f in ws[0].frames] == list(range(1, 25))


def test_window_ranges():
    meta = ClipMeta(24, 48)
    stream = (Frame(i, np.zeros((1, 1, 3), np.uint8)) for i in range(1, 49))
    ws = windows(stream, meta)
    assert [(w.frames[0].index, w.frames[-1].index) for w in ws] == [(1, 24), (25, 48)]


def test_300_second_clip():
    meta = ClipMeta(24, 300 * 24)
    px = np.zeros((1, 1, 3), np.uint8)
    stream = (Frame(i, px) for i in range(1, meta.total_frames + 1))
    assert len(windows(stream, meta)) == 300


def test_empty_clip():
    assert windows(iter(()), ClipMeta(24, 0)) == []


def test_truncated_stream():
    meta = ClipMeta(2, 6)
    stream = (Frame(i, np.zeros((1, 1, 3), np.uint8)) for i in range(1, 5))
    with pytest.raises(TruncatedClip):
        windows(stream, meta)


def test_gap_in_numbering(tmp_path):
    write_png_dir(tmp_path, _frames(3))
    (tmp_path / "frame_000002.png").unlink()
    with pytest.raises(SourceGap):
        probe_source(tmp_path, fps=1)


def test_dimension_mismatch_across_pngs(tmp_path):
    write_png_dir(tmp_path, _frames(2))
    write_png_dir(tmp_path / "x", _frames(1, h=5))
    (tmp_path / "x" / "frame_000001.png").rename(tmp_path / "frame_000003.png")
    meta = probe_source(tmp_path, fps=1)
    with pytest.raises(DimensionMismatch):
        list(open_frame_source(tmp_path, meta))


def test_raw_without_sidecar(tmp_path):
    (tmp_path / "c.rgb24").write_bytes(b"\0" * 12)
    with pytest.raises(MetaMissing):
        probe_source(tmp_path / "c.rgb24")


def test_raw_partial_trailing_bytes_rejected(tmp_path):
    path = write_raw_clip(tmp_path / "c.rgb24", _frames(2), fps=1)
    with open(path, "ab") as fh:
        fh.write(b"\1\2")
    meta = probe_source(path)
    with pytest.raises(DimensionMismatch):
        list(open_frame_source(path, meta))


def test_sidecar_declares_more_than_file(tmp_path):
    path = write_raw_clip(tmp_path / "c.rgb24", _frames(2), fps=1)
    side = json.loads(path.with_suffix(".json").read_text())
    side["frames"] = 5
    path.with_suffix(".json").write_text(json.dumps(side))
    meta = probe_source(path)
    with pytest.raises(TruncatedClip):
        list(open_frame_source(path, meta))


def test_frame_is_immutable():
    px = np.zeros((2, 2, 3), np.uint8)
    fr = Frame(1, px)
    px[0, 0, 0] = 9
    assert fr.pixels[0, 0, 0] == 0
    with pytest.raises(ValueError):
        fr.pixels[0, 0, 0] = 1
    assert fr.pixels.size == fr.width * fr.height * 3


def test_partition_property():
    f, T = 5, 23
    meta = ClipMeta(f, T)
    stream = (Frame(i, np.zeros((1, 1, 3), np.uint8)) for i in range(1, T + 1))
    seen = [fr.index for w in windows(stream, meta) for fr in w.frames]
    assert seen == list(range(1, meta.seconds * f + 1))


def test_ingest_deterministic(clip10):
    meta = probe_source(clip10 / "clip.rgb24")
    a = b"".join(f.pixels.tobytes() for f in open_frame_source(clip10 / "clip.rgb24", meta))
    b = b"".join(f.pixels.tobytes() for f in open_frame_source(clip10 / "clip.rgb24", meta))
    assert a == b
