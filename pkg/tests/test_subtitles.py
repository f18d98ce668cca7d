import logging

import pytest
from hypothesis import given
from hypothesis import strategies as st

from povpool.errors import ParseError
from povpool.subtitles import (
    SubtitleCue,
    format_srt,
    parse_srt,
    parse_srt_text,
    second_text,
)


def test_single_cue():
    cues = parse_srt_text("1\n00:00:01,000 --> 00:00:02,500\nHello\n")
    assert cues == [SubtitleCue(1.0, 2.5, "Hello")]


def test_empty_file(tmp_path):
    p = tmp_path / "e.srt"
    p.write_text("")
    assert parse_srt(p) == []


def test_overlapping_cues_kept_and_sorted():
    text = (
        "1\n00:00:03,000 --> 00:00:05,000\nlater\n\n"
        "2\n00:00:01,000 --> 00:00:04,000\nearlier\n"
    )
    assert [c.text for c in parse_srt_text(text)] == ["earlier", "later"]


def test_tags_and_multiline(tmp_path):
    p = tmp_path / "t.srt"
    p.write_bytes(
        "\ufeff1\r\n00:00:00,000 --> 00:00:01,000\r\n<i>Hi</i> {\\an8}there\r\n  second   line\r\n".encode("utf-8")
    )
    assert parse_srt(p) == [SubtitleCue(0.0, 1.0, "Hi there second line")]


def test_malformed_timestamp_reports_line():
    text = "1\n00:00:01,000 --> 00:00:02,500\nok\n\n2\n00:00:0x,000 --> 00:00:04,000\nbad\n"
    with pytest.raises(ParseError) as info:
        parse_srt_text(text)
    assert info.value.line == 6


def test_out_of_order_index_warns(caplog):
    text = "2\n00:00:01,000 --> 00:00:02,000\na\n\n1\n00:00:03,000 --> 00:00:04,000\nb\n"
    with caplog.at_level(logging.WARNING):
        cues = parse_srt_text(text)
    assert len(cues) == 2
    assert "out of order" in caplog.text


def test_webvtt():
    text = "WEBVTT\n\nNOTE a comment\n\n00:01.500 --> 00:03.000 align:start\nvtt cue\n\nid2\n00:00:04.000 --> 00:00:05.000\nnext\n"
    assert parse_srt_text(text) == [SubtitleCue(1.5, 3.0, "vtt cue"), SubtitleCue(4.0, 5.0, "next")]


def test_second_text_examples():
    cue = [SubtitleCue(1.0, 2.5, "Hello")]
    assert second_text(cue, 2).text == "Hello"
    assert second_text(cue, 4).text == ""
    # starts exactly where second 1 ends
    assert second_text(cue, 1).text == ""
    assert second_text(cue, 3).text == "Hello"
    two = [SubtitleCue(0.5, 0.9, "B"), SubtitleCue(0.2, 0.8, "A")]
    assert second_text(two, 1).text == "A B"


def test_half_open_boundaries():
    cues = [SubtitleCue(2.0, 3.0, "x")]
    assert second_text(cues, 2).text == ""
    assert second_text(cues, 3).text == "x"
    assert second_text(cues, 4).text == ""


def test_long_cue_repeats_once_per_second():
    cues = [SubtitleCue(0.0, 10.0, "long")]
    assert [second_text(cues, s).text for s in (1, 5, 10)] == ["long"] * 3


def test_ties_keep_file_order():
    cues = [SubtitleCue(1.0, 2.0, "first"), SubtitleCue(1.0, 1.5, "second")]
    assert second_text(cues, 2).text == "first second"


_times = st.integers(0, 20_000)


@st.composite
def cue_lists(draw):
    n = draw(st.integers(0, 8))
    out = []
    for i in range(n):
        a = draw(_times)
        b = draw(st.integers(a + 1, a + 8000))
        out.append(SubtitleCue(a / 1000, b / 1000, f"cue {i} <b>x</b>"))
    return out


@given(cue_lists())
def test_roundtrip_idempotent(cues):
    once = parse_srt_text(format_srt(cues))
    twice = parse_srt_text(format_srt(once))
    assert once == twice
    expected = sorted((SubtitleCue(c.start_s, c.end_s, c.text.replace("<b>", "").replace("</b>", "")) for c in cues),
                      key=lambda c: c.start_s)
    assert once == expected


@given(cue_lists(), st.integers(1, 30))
def test_coverage_and_order(cues, s):
    got = second_text(cues, s).text
    hits = [c for c in cues if c.start_s < s and c.end_s > s - 1]
    hits.sort(key=lambda c: c.start_s)
    assert got == " ".join(c.text for c in hits)
