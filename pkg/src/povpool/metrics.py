"""Answer and rationale scoring: token F1, BLEU, ROUGE-L, embedding cosine.

Text is normalized once before scoring: lowercase, punctuation removed,
whitespace collapsed, no stemming. When both sides are empty every lexical
metric is 1.0; when exactly one side is empty it is 0.0.
"""

from __future__ import annotations

import json
import math
import re
import string
from collections import Counter
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimMismatch, ZeroVector

_PUNCT = str.maketrans({c: " " for c in string.punctuation})
_MARKER_R = re.compile(r"reasoning\s*:", re.IGNORECASE)
_MARKER_A = re.compile(r"final\s+answer\s*:", re.IGNORECASE)


def normalize(text: str) -> str:
    return " ".join(text.lower().translate(_PUNCT).split())


def tokens(text: str) -> list[str]:
    return normalize(text).split()


@dataclass(frozen=True)
class TwoTurnOutput:
    reasoning: str
    answer: str
    well_formed: bool = True


def split_two_turn(raw: str) -> TwoTurnOutput:
    """Split a response at its last ``Final Answer:`` marker.

    The reasoning span starts after the last ``Reasoning:`` marker that
    precedes that answer marker. Without an answer marker the whole string is
    the answer and ``well_formed`` is False.
    """
    answers = list(_MARKER_A.finditer(raw))
    if not answers:
        return TwoTurnOutput("", raw.strip(), well_formed=False)
    a = answers[-1]
    answer = raw[a.end():].strip()
    head = raw[: a.start()]
    reasons = list(_MARKER_R.finditer(head))
    if not reasons:
        return TwoTurnOutput(head.strip(), answer, well_formed=False)
    return TwoTurnOutput(head[reasons[-1].end():].strip(), answer)


def _empty_case(p: Sequence, r: Sequence):
    if not p and not r:
        return 1.0
    if not p or not r:
        return 0.0
    return None


def token_f1(pred: str, ref: str) -> float:
    p, r = tokens(pred), tokens(ref)
    early = _empty_case(p, r)
    if early is not None:
        return early
    common = sum((Counter(p) & Counter(r)).values())
    if common == 0:
        return 0.0
    precision = common / len(p)
    recall = common / len(r)
    return 2 * precision * recall / (precision + recall)


def _ngrams(toks: Sequence[str], n: int) -> Counter:
    return Counter(tuple(toks[i:i + n]) for i in range(len(toks) - n + 1))


def modified_precisions(pred: Sequence[str], ref: Sequence[str], max_n: int) -> list[tuple[int, int, int]]:
    """(clipped matches, candidate n-gram count, reference n-gram count) for n = 1..max_n."""
    out = []
    for n in range(1, max_n + 1):
        cand = _ngrams(pred, n)
        refc = _ngrams(ref, n)
        match = sum(min(c, refc[g]) for g, c in cand.items())
        out.append((match, max(len(pred) - n + 1, 0), max(len(ref) - n + 1, 0)))
    return out


def brevity_penalty(c: int, r: int) -> float:
    if c == 0:
        return 0.0
    return 1.0 if c >= r else math.exp(1.0 - r / c)


def bleu(pred: str, ref: str, max_n: int = 4) -> float:
    """Sentence BLEU with uniform weights and brevity penalty.

    A zero n-gram precision is replaced by 1 / (2c), c the candidate length.
    An order that neither side is long enough to contain counts as 1, so
    identical short strings still score 1.0.
    """
    if max_n < 1:
        raise ValueError(f"max_n must be >= 1, got {max_n}")
    p, r = tokens(pred), tokens(ref)
    early = _empty_case(p, r)
    if early is not None:
        return early
    c = len(p)
    log_sum = 0.0
    for match, total, ref_total in modified_precisions(p, r, max_n):
        if total == 0 and ref_total == 0:
            continue
        prec = match / total if match else 1.0 / (2 * c)
        log_sum += math.log(prec)
    return brevity_penalty(c, len(r)) * math.exp(log_sum / max_n)


def lcs_length(a: Sequence, b: Sequence) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(pred: str, ref: str) -> float:
    p, r = tokens(pred), tokens(ref)
    early = _empty_case(p, r)
    if early is not None:
        return early
    lcs = lcs_length(p, r)
    if lcs == 0:
        return 0.0
    prec, rec = lcs / len(p), lcs / len(r)
    return 2 * prec * rec / (prec + rec)


def embed_cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape or u.size == 0:
        raise DimMismatch(f"vector dimensions differ or are empty: {u.size} vs {v.size}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ZeroVector("cosine is undefined for a zero vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


@dataclass(frozen=True)
class MetricReport:
    f1: float
    bleu1: float
    bleu4_bp: float
    rouge_l: float
    rouge_l_r: float
    embed_cos: float | None = None
    embed_cos_r: float | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass(frozen=True)
class EmbedPair:
    pred_vec: Sequence[float]
    ref_vec: Sequence[float]
    pred_vec_r: Sequence[float] | None = None
    ref_vec_r: Sequence[float] | None = None


def score_record(pred: TwoTurnOutput, ref: TwoTurnOutput, embeds: EmbedPair | None = None) -> MetricReport:
    cos = cos_r = None
    if embeds is not None:
        cos = embed_cosine(embeds.pred_vec, embeds.ref_vec)
        if embeds.pred_vec_r is not None and embeds.ref_vec_r is not None:
            cos_r = embed_cosine(embeds.pred_vec_r, embeds.ref_vec_r)
    return MetricReport(
        f1=token_f1(pred.answer, ref.answer),
        bleu1=bleu(pred.answer, ref.answer, 1),
        bleu4_bp=bleu(pred.answer, ref.answer, 4),
        rouge_l=rouge_l(pred.answer, ref.answer),
        rouge_l_r=rouge_l(pred.reasoning, ref.reasoning),
        embed_cos=cos,
        embed_cos_r=cos_r,
    )


def average_reports(reports: Sequence[MetricReport]) -> dict:
    """Field-wise mean in input order; embedding fields average over records that have them."""
    out = {}
    for f in fields(MetricReport):
        vals = [getattr(r, f.name) for r in reports if getattr(r, f.name) is not None]
        if vals:
            out[f.name] = math.fsum(vals) / len(vals)
    out["n"] = len(reports)
    return out


_OPTION_RE = re.compile(r"^\s*\(?([a-z])\)?(?:[\s.:)]|$)", re.IGNORECASE)


def option_letter(answer: str) -> str | None:
    m = _OPTION_RE.match(answer)
    return m.group(1).lower() if m else None


def mcq_accuracy(preds: Sequence[str], refs: Sequence[str]) -> float:
    """Share of answers whose leading option letter equals the reference letter."""
    if len(preds) != len(refs):
        raise DimMismatch(f"{len(preds)} predictions for {len(refs)} references")
    if not preds:
        return 0.0
    hits = sum(1 for p, r in zip(preds, refs) if option_letter(p) is not None and option_letter(p) == option_letter(r))
    return hits / len(preds)


def read_jsonl(path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def _output_of(row: Mapping) -> TwoTurnOutput:
    if "answer" in row:
        return TwoTurnOutput(row.get("reasoning", "") or "", row["answer"] or "")
    return split_two_turn(row.get("raw", ""))


def evaluate(pred_rows: Iterable[Mapping], ref_rows: Iterable[Mapping], embed_rows: Iterable[Mapping] = (), mode: str = "freeform") -> dict:
    """Score predictions against references matched by ``id``."""
    refs = {r["id"]: r for r in ref_rows}
    embeds = {e["id"]: e for e in embed_rows}
    preds = list(pred_rows)
    missing = [p["id"] for p in preds if p["id"] not in refs]
    if missing:
        raise DimMismatch(f"predictions without references: {missing[:5]}")

    if mode == "mcq":
        acc = mcq_accuracy([_output_of(p).answer for p in preds], [_output_of(refs[p["id"]]).answer for p in preds])
        return {"mode": "mcq", "n": len(preds), "accuracy": acc}

    per = []
    for p in preds:
        e = embeds.get(p["id"])
        pair = None
        if e is not None:
            pair = EmbedPair(e["pred_vec"], e["ref_vec"], e.get("pred_vec_r"), e.get("ref_vec_r"))
        rep = score_record(_output_of(p), _output_of(refs[p["id"]]), pair)
        per.append((p["id"], rep))
    summary = average_reports([rep for _, rep in per])
    records = [{"id": rid, **rep.to_dict()} for rid, rep in per]
    return {
        "mode": "freeform",
        "normalization": "lower+strip-punct+collapse-ws",
        "bleu_smoothing": "epsilon 1/(2c)",
        "mean": summary,
        "records": records,
    }


def evaluate_files(pred_path, ref_path, embeds_path=None, mode: str = "freeform") -> dict:
    embeds = read_jsonl(embeds_path) if embeds_path else ()
    return evaluate(read_jsonl(pred_path), read_jsonl(ref_path), embeds, mode=mode)


def write_report(report: Mapping, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return path
