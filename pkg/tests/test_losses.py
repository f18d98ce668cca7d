import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from povpool.errors import BadParameter, EmptyBatch, EmptySequence, ShapeError
from povpool.losses import (
    LowRankUpdate,
    PreferenceRecord,
    TokenLogProbs,
    adapted_weight,
    dpo_delta,
    dpo_grad,
    dpo_loss,
    dpo_record_loss,
    grad_check,
    loss_report,
    lowrank_delta,
    numeric_rank,
    seq_loglik,
    sft_grad,
    sft_loss,
    softplus,
)


def T(*xs):
    return TokenLogProbs(tuple(xs))


def rec(pp, pn, rp, rn, beta=0.1):
    return PreferenceRecord(T(*pp), T(*pn), T(*rp), T(*rn), beta)


def random_records(n, seed=0, beta=0.5):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        seqs = [tuple(-rng.exponential(0.7, rng.integers(1, 6))) for _ in range(4)]
        out.append(PreferenceRecord(*(TokenLogProbs(s) for s in seqs), beta=beta))
    return out


# -- sequence log-likelihood / SFT ---------------------------------------------

def test_seq_loglik():
    assert seq_loglik(T(-1, -2, -3)) == -6
    assert seq_loglik(T(-0.5)) == -0.5
    assert seq_loglik(T(*[math.log(1 / 4)] * 3)) == pytest.approx(-4.1588830833596715, abs=1e-12)
    with pytest.raises(EmptySequence):
        seq_loglik(T())


def test_logp_must_be_nonpositive():
    with pytest.raises(BadParameter):
        T(-1.0, 0.2)


def test_sft_loss():
    assert sft_loss([T(-1, -1)]) == 2.0
    assert sft_loss([T(0.0, 0.0)]) == 0.0
    assert sft_loss([T(-1, -2, -3), T(-2)]) == 4.0
    with pytest.raises(EmptyBatch):
        sft_loss([])


# -- DPO ---------------------------------------------------------------------

def test_delta_zero_when_policy_is_reference():
    r = rec([-1, -2], [-3], [-1, -2], [-3])
    assert dpo_delta(r) == 0.0
    assert dpo_loss([r]) == pytest.approx(math.log(2), abs=1e-15)


def test_delta_one_nat():
    assert dpo_delta(rec([-1], [-3], [-2], [-3])) == 1.0


def test_delta_antisymmetric():
    r = rec([-1, -0.2], [-3], [-2], [-0.5, -0.5])
    s = PreferenceRecord(r.policy_neg, r.policy_pos, r.ref_neg, r.ref_pos, r.beta)
    assert dpo_delta(s) == -dpo_delta(r)


def test_dpo_loss_values():
    # beta * delta = 10
    r = rec([-1], [-11], [-1], [-1], beta=1.0)
    assert dpo_loss([r]) == pytest.approx(4.539889921686465e-05, rel=1e-12)
    # beta * delta = -30
    r = rec([-31], [-1], [-1], [-1], beta=1.0)
    assert dpo_loss([r]) == pytest.approx(30.000000000000092, rel=1e-14)


def test_dpo_loss_stable_extremes():
    for z in (700.0, -700.0, 1e6, -1e6):
        assert math.isfinite(softplus(-z))
    big = rec([-1], [-701], [-1], [-1], beta=1.0)
    small = rec([-701], [-1], [-1], [-1], beta=1.0)
    assert math.isfinite(dpo_loss([big])) and dpo_loss([big]) >= 0
    assert dpo_loss([small]) == pytest.approx(700.0)


@given(st.floats(-50, 50), st.floats(0.01, 5))
def test_dpo_monotone(delta, beta):
    def loss(d, b):
        return dpo_record_loss(rec([min(d, 0.0)], [min(-d, 0.0)], [-0.0], [-0.0], beta=b))

    assert loss(delta + 0.5, beta) < loss(delta, beta) or loss(delta, beta) == 0.0
    if delta < -1e-6:
        assert loss(delta, beta * 1.5) > loss(delta, beta)
    elif delta > 1e-6:
        assert loss(delta, beta * 1.5) <= loss(delta, beta)


@given(st.floats(-20, 20))
def test_reference_shift_invariance(c):
    r = rec([-1, -2], [-0.5], [-3], [-1])
    c = -abs(c)
    shifted = rec([-1, -2], [-0.5], [-3, c], [-1, c])
    assert dpo_delta(shifted) == pytest.approx(dpo_delta(r), abs=1e-12)


# -- gradients ---------------------------------------------------------------

def test_sft_grad_values():
    batch = [T(-1, -2), T(-0.5)]
    for g in sft_grad(batch):
        assert np.all(g == -0.5)
    assert grad_check("sft", batch, eps=1e-6) < 1e-6


def test_dpo_grad_formula():
    batch = random_records(3, seed=1)
    g = dpo_grad(batch)
    for r, gr in zip(batch, g):
        z = r.beta * dpo_delta(r)
        expected = -r.beta * (1 / (1 + math.exp(z))) / len(batch)
        np.testing.assert_allclose(gr["policy_pos"], expected, rtol=1e-14)
        np.testing.assert_allclose(gr["policy_neg"], -expected, rtol=1e-14)
    assert grad_check("dpo", batch, eps=1e-6) < 1e-5
    assert grad_check("dpo", batch, eps=1e-6, wrt="all") < 1e-5


def test_frozen_reference_direction_has_zero_slope():
    batch = random_records(2, seed=2)
    g = dpo_grad(batch)
    # moving every ref_pos and ref_neg token of a record by the same total leaves delta unchanged
    for gr, r in zip(g, batch):
        slope = gr["ref_pos"].sum() / len(r.ref_pos) + gr["ref_neg"].sum() / len(r.ref_neg)
        assert slope == pytest.approx(0.0, abs=1e-15)


def test_grad_check_eps_domain():
    with pytest.raises(BadParameter):
        grad_check("sft", [T(-1)], eps=1e-2)


# -- low-rank update -----------------------------------------------------------

def test_lowrank_zero_B():
    u = LowRankUpdate(np.ones((2, 5)), np.zeros((4, 2)), alpha=16, r=2)
    assert np.all(lowrank_delta(u) == 0)


def test_lowrank_outer_product():
    u = LowRankUpdate(np.array([[0.0, 1.0]]), np.array([[1.0], [0.0]]), alpha=1, r=1)
    assert lowrank_delta(u).tolist() == [[0.0, 1.0], [0.0, 0.0]]


def test_lowrank_scale_32_32():
    rng = np.random.default_rng(0)
    A, B = rng.normal(size=(32, 64)), rng.normal(size=(48, 32))
    u = LowRankUpdate(A, B, alpha=32, r=32)
    assert u.scale == 1.0
    np.testing.assert_array_equal(lowrank_delta(u), B @ A)


def test_lowrank_shape_errors():
    with pytest.raises(ShapeError):
        LowRankUpdate(np.ones((2, 3)), np.ones((4, 3)), alpha=1, r=2)
    with pytest.raises(ShapeError):
        LowRankUpdate(np.ones((3, 2)), np.ones((4, 3)), alpha=1, r=3)


@pytest.mark.parametrize("r", [1, 2, 4])
def test_lowrank_rank_bound(r):
    rng = np.random.default_rng(r)
    u = LowRankUpdate(rng.normal(size=(r, 12)), rng.normal(size=(9, r)), alpha=8, r=r)
    assert numeric_rank(lowrank_delta(u)) <= r


def test_adapted_weight_leaves_base_untouched():
    W = np.eye(3)
    u = LowRankUpdate(np.ones((1, 3)), np.ones((3, 1)), alpha=2, r=1)
    out = adapted_weight(W, u)
    assert np.all(W == np.eye(3))
    np.testing.assert_array_equal(out, np.eye(3) + 2 * np.ones((3, 3)))


# -- record I/O --------------------------------------------------------------

def test_loss_report_rows():
    rows = [{"id": "a", "logp": [-1, -1]}, {"id": "b", "logp": [-2]}]
    rep = loss_report("sft", rows)
    assert rep["loss"] == 2.0 and [r["nll"] for r in rep["records"]] == [2.0, 2.0]
    rows = [{"id": 1, "policy_pos": [-1], "policy_neg": [-1], "ref_pos": [-1], "ref_neg": [-1]}]
    assert loss_report("dpo", rows, beta=0.3)["loss"] == pytest.approx(math.log(2))


def test_grad_check_catches_wrong_gradient(monkeypatch):
    import povpool.losses as L

    real = L.dpo_grad
    monkeypatch.setattr(L, "dpo_grad", lambda b: [{k: 1.01 * v for k, v in g.items()} for g in real(b)])
    assert grad_check("dpo", random_records(2, seed=3)) > 5e-3
