"""Desk-scale numerics for SFT, DPO and the low-rank adapter update.

Inputs are per-token log-probabilities that some model produced; no model is
run here. Everything is float64.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import BadParameter, EmptyBatch, EmptySequence, ShapeError

DEFAULT_BETA = 0.1


@dataclass(frozen=True)
class TokenLogProbs:
    logp: tuple

    def __post_init__(self):
        vals = tuple(float(x) for x in self.logp)
        if any(not (v <= 0.0) for v in vals):
            raise BadParameter("token log-probabilities must be <= 0")
        object.__setattr__(self, "logp", vals)

    def __len__(self):
        return len(self.logp)


def _tlp(x) -> TokenLogProbs:
    return x if isinstance(x, TokenLogProbs) else TokenLogProbs(tuple(x))


@dataclass(frozen=True)
class PreferenceRecord:
    policy_pos: TokenLogProbs
    policy_neg: TokenLogProbs
    ref_pos: TokenLogProbs
    ref_neg: TokenLogProbs
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        for name in ("policy_pos", "policy_neg", "ref_pos", "ref_neg"):
            object.__setattr__(self, name, _tlp(getattr(self, name)))
        if not self.beta > 0:
            raise BadParameter(f"beta must be > 0, got {self.beta}")


def seq_loglik(t) -> float:
    t = _tlp(t)
    if len(t) == 0:
        raise EmptySequence("sequence has no tokens")
    return math.fsum(t.logp)


def sft_loss(batch: Sequence) -> float:
    """Batch mean of per-sequence summed negative log-likelihood."""
    if len(batch) == 0:
        raise EmptyBatch("SFT batch is empty")
    return -math.fsum(seq_loglik(t) for t in batch) / len(batch)


def dpo_delta(rec: PreferenceRecord) -> float:
    return (seq_loglik(rec.policy_pos) - seq_loglik(rec.policy_neg)) - (
        seq_loglik(rec.ref_pos) - seq_loglik(rec.ref_neg)
    )


def softplus(x: float) -> float:
    """log(1 + e^x) without overflow."""
    return max(x, 0.0) + math.log1p(math.exp(-abs(x)))


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def dpo_record_loss(rec: PreferenceRecord) -> float:
    # -log sigmoid(z) == softplus(-z)
    return softplus(-rec.beta * dpo_delta(rec))


def dpo_loss(batch: Sequence[PreferenceRecord]) -> float:
    if len(batch) == 0:
        raise EmptyBatch("DPO batch is empty")
    return math.fsum(dpo_record_loss(r) for r in batch) / len(batch)


# -- gradients ---------------------------------------------------------------

def sft_grad(batch: Sequence) -> list[np.ndarray]:
    """d sft_loss / d logp for every token: -1/B everywhere."""
    B = len(batch)
    if B == 0:
        raise EmptyBatch("SFT batch is empty")
    return [np.full(len(_tlp(t)), -1.0 / B) for t in batch]


def dpo_grad(batch: Sequence[PreferenceRecord]) -> list[dict]:
    """d dpo_loss / d logp per record, keyed by sequence name.

    With z = beta * delta, d(-log sigmoid z)/d delta = -beta * sigmoid(-z).
    Reference entries get gradients too, but they are frozen and never updated.
    """
    B = len(batch)
    if B == 0:
        raise EmptyBatch("DPO batch is empty")
    out = []
    for r in batch:
        g = -r.beta * sigmoid(-r.beta * dpo_delta(r)) / B
        out.append({
            "policy_pos": np.full(len(r.policy_pos), g),
            "policy_neg": np.full(len(r.policy_neg), -g),
            "ref_pos": np.full(len(r.ref_pos), -g),
            "ref_neg": np.full(len(r.ref_neg), g),
        })
    return out


_TRAINABLE = ("policy_pos", "policy_neg")
_ALL = ("policy_pos", "policy_neg", "ref_pos", "ref_neg")


def _flatten(kind: str, item, names) -> tuple[np.ndarray, Callable]:
    """Flat vector of one batch item's differentiated entries, plus its inverse."""
    if kind == "sft":
        return np.array(_tlp(item).logp), _raw_tlp
    chunks = [np.array(getattr(item, n).logp) for n in names]
    sizes = [c.size for c in chunks]

    def rebuild(vec):
        fields = {n: getattr(item, n) for n in _ALL}
        for name, part in zip(names, np.split(vec, np.cumsum(sizes)[:-1])):
            fields[name] = _raw_tlp(part)
        return _raw_pref(fields, item.beta)

    return np.concatenate(chunks), rebuild


def _raw_tlp(values) -> TokenLogProbs:
    # finite-difference probes may step a 0.0 entry above zero; skip the <= 0 check
    t = object.__new__(TokenLogProbs)
    object.__setattr__(t, "logp", tuple(float(v) for v in values))
    return t


def _raw_pref(fields: dict, beta: float) -> PreferenceRecord:
    r = object.__new__(PreferenceRecord)
    for k, v in fields.items():
        object.__setattr__(r, k, v)
    object.__setattr__(r, "beta", beta)
    return r


def grad_check(kind: str, inputs, eps: float = 1e-6, wrt: str = "policy") -> float:
    """Max relative error between analytic gradients and central differences.

    ``kind`` is ``"sft"`` or ``"dpo"``. For DPO, ``wrt="policy"`` checks the
    trainable policy entries only; ``wrt="all"`` includes the frozen reference.
    """
    if not 1e-8 <= eps <= 1e-3:
        raise BadParameter(f"eps must lie in [1e-8, 1e-3], got {eps}")
    if kind == "sft":
        loss, names = sft_loss, None
        analytic = np.concatenate(sft_grad(inputs))
    elif kind == "dpo":
        loss = dpo_loss
        names = _TRAINABLE if wrt == "policy" else _ALL
        analytic = np.concatenate([g[n] for g in dpo_grad(inputs) for n in names])
    else:
        raise BadParameter(f"unknown loss kind {kind!r}")

    # The batch loss is a mean of per-item terms, so each entry is differenced
    # through its own item's term. Differencing the whole sum would bury small
    # per-item slopes under the rounding of the total.
    B = len(inputs)
    numeric = []
    for item in inputs:
        x0, rebuild = _flatten(kind, item, names)
        for j in range(x0.size):
            xp = x0.copy()
            xm = x0.copy()
            xp[j] += eps
            xm[j] -= eps
            numeric.append((loss([rebuild(xp)]) - loss([rebuild(xm)])) / (2 * eps * B))
    numeric = np.array(numeric)

    denom = np.maximum(np.abs(analytic), np.abs(numeric))
    diff = np.abs(analytic - numeric)
    rel = np.divide(diff, denom, out=np.zeros_like(diff), where=denom > 0)
    return float(rel.max()) if rel.size else 0.0


# -- low-rank update ---------------------------------------------------------

@dataclass(frozen=True)
class LowRankUpdate:
    A: np.ndarray  # (r, d_in)
    B: np.ndarray  # (d_out, r)
    alpha: float
    r: int

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64)
        B = np.asarray(self.B, dtype=np.float64)
        if A.ndim != 2 or B.ndim != 2:
            raise ShapeError(f"A and B must be matrices, got {A.shape} and {B.shape}")
        if self.r < 1 or A.shape[0] != self.r or B.shape[1] != self.r:
            raise ShapeError(f"rank {self.r} inconsistent with A {A.shape} and B {B.shape}")
        d_out, d_in = B.shape[0], A.shape[1]
        if self.r > min(d_in, d_out):
            raise ShapeError(f"rank {self.r} exceeds min(d_in={d_in}, d_out={d_out})")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def scale(self) -> float:
        return self.alpha / self.r


def lowrank_delta(u: LowRankUpdate) -> np.ndarray:
    """(alpha / r) * B @ A, shape (d_out, d_in)."""
    return u.scale * (u.B @ u.A)


def adapted_weight(W, u: LowRankUpdate) -> np.ndarray:
    """Frozen base plus the low-rank correction; W itself is never modified."""
    W = np.asarray(W, dtype=np.float64)
    delta = lowrank_delta(u)
    if W.shape != delta.shape:
        raise ShapeError(f"base {W.shape} does not match update {delta.shape}")
    return W + delta


def numeric_rank(M, rtol: float = 1e-10) -> int:
    s = np.linalg.svd(np.asarray(M, dtype=np.float64), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


# -- record I/O --------------------------------------------------------------

def sft_from_row(row: dict) -> TokenLogProbs:
    return TokenLogProbs(tuple(row["logp"]))


def dpo_from_row(row: dict, beta: float | None = None) -> PreferenceRecord:
    b = beta if beta is not None else row.get("beta", DEFAULT_BETA)
    return PreferenceRecord(
        TokenLogProbs(tuple(row["policy_pos"])),
        TokenLogProbs(tuple(row["policy_neg"])),
        TokenLogProbs(tuple(row["ref_pos"])),
        TokenLogProbs(tuple(row["ref_neg"])),
        beta=float(b),
    )


def loss_report(kind: str, rows: Sequence[dict], beta: float | None = None) -> dict:
    """Scalar loss plus a per-record breakdown for a list of JSON rows."""
    ids = [row.get("id", i) for i, row in enumerate(rows)]
    if kind == "sft":
        batch = [sft_from_row(r) for r in rows]
        total = sft_loss(batch)
        per = [{"id": i, "nll": -seq_loglik(t)} for i, t in zip(ids, batch)]
    elif kind == "dpo":
        batch = [dpo_from_row(r, beta) for r in rows]
        total = dpo_loss(batch)
        per = [
            {"id": i, "delta": dpo_delta(r), "beta": r.beta, "loss": dpo_record_loss(r)}
            for i, r in zip(ids, batch)
        ]
    else:
        raise BadParameter(f"unknown loss kind {kind!r}")
    return {"kind": kind, "n": len(rows), "loss": total, "records": per}


def read_records(path) -> list[dict]:
    rows = []
    with open(Path(path), encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows
