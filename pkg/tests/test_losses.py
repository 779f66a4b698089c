"""Loss functions and the stratified split."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poseattn.autodiff import Parameter, Tensor
from poseattn.training import (
    bce_attention,
    bce_class,
    joint_loss,
    stratified_split,
)

F64 = np.float64


# --- bce_class ---

def test_perfect_prediction_is_almost_free():
    loss = bce_class(np.array([1.0 - 1e-7], dtype=F64), [1.0])
    assert 0.0 <= float(loss.data) <= 1e-6


def test_coin_flip_prediction_costs_ln2():
    for y in ([0.0], [1.0]):
        loss = bce_class(np.array([0.5], dtype=F64), y)
        assert abs(float(loss.data) - math.log(2.0)) < 1e-12


def test_confident_wrong_prediction_hits_the_clamp():
    loss = bce_class(np.array([0.0], dtype=F64), [1.0])
    assert abs(float(loss.data) - (-math.log(1e-7))) < 1e-9
    assert abs(float(loss.data) - 16.1181) < 1e-4


def test_batch_mean_hand_oracle():
    loss = bce_class(np.array([0.8, 0.3], dtype=F64), [1.0, 0.0])
    expected = (-math.log(0.8) - math.log(0.7)) / 2.0
    assert abs(float(loss.data) - expected) < 1e-12


def test_custom_epsilon_controls_the_clamp():
    loss = bce_class(np.array([0.0], dtype=F64), [1.0], epsilon=1e-3)
    assert abs(float(loss.data) - (-math.log(1e-3))) < 1e-12


def test_empty_batch_rejected():
    with pytest.raises(ValueError, match="at least one"):
        bce_class(np.zeros(0, dtype=F64), [])


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError, match="shape"):
        bce_class(np.array([0.5, 0.5], dtype=F64), [1.0])


def test_non_binary_labels_rejected():
    with pytest.raises(ValueError, match="0 and 1"):
        bce_class(np.array([0.5], dtype=F64), [0.7])


def test_gradient_is_prediction_minus_label():
    # through a sigmoid the BCE gradient w.r.t. the logit is p - y
    z = Parameter(np.zeros(3, dtype=F64), name="z")
    p = z.sigmoid()
    loss = bce_class(p, [1.0, 0.0, 1.0])
    loss.backward()
    np.testing.assert_allclose(z.grad, (0.5 - np.array([1.0, 0.0, 1.0])) / 3.0,
                               rtol=0, atol=1e-9)


@given(st.lists(st.tuples(st.floats(0.01, 0.99), st.sampled_from([0.0, 1.0])),
                min_size=1, max_size=16))
@settings(max_examples=100, deadline=None)
def test_bce_class_matches_definition(pairs):
    p = np.array([a for a, _ in pairs], dtype=F64)
    y = [b for _, b in pairs]
    loss = float(bce_class(p, y).data)
    expected = np.mean([-(yi * math.log(pi) + (1 - yi) * math.log(1 - pi))
                        for pi, yi in zip(p, y)])
    assert loss >= 0.0
    assert abs(loss - expected) < 1e-10


# --- bce_attention ---

def grid(values):
    return np.array(values, dtype=F64)


def test_perfect_mask_is_almost_free():
    gt = np.array([[1.0, 0.0], [0.0, 1.0]], dtype=np.float32)
    loss = bce_attention(grid([gt]), [gt])
    assert 0.0 <= float(loss.data) <= 1e-6


def test_uniform_half_mask_costs_ln2():
    gt = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=np.float32)
    loss = bce_attention(np.full((1, 2, 2), 0.5, dtype=F64), [gt])
    assert abs(float(loss.data) - math.log(2.0)) < 1e-12


def test_two_by_two_hand_oracle():
    gt = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=np.float32)
    pred = grid([[[0.9, 0.1], [0.1, 0.1]]])
    loss = bce_attention(pred, [gt])
    # every cell contributes -ln(0.9): the hit directly, the misses via 1-0.1
    assert abs(float(loss.data) - (-math.log(0.9))) < 1e-12
    assert abs(float(loss.data) - 0.10536) < 1e-5


def test_channel_axis_is_accepted():
    gt = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=np.float32)
    flat = bce_attention(np.full((1, 2, 2), 0.5, dtype=F64), [gt])
    chan = bce_attention(np.full((1, 1, 2, 2), 0.5, dtype=F64), [gt])
    assert float(flat.data) == float(chan.data)


def test_absent_ground_truth_is_skipped():
    gt = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=np.float32)
    pred = grid([[[0.9, 0.1], [0.1, 0.1]], [[0.5, 0.5], [0.5, 0.5]]])
    loss = bce_attention(pred, [gt, None])
    solo = bce_attention(pred[:1], [gt])
    assert float(loss.data) == float(solo.data)


def test_all_absent_gives_constant_zero():
    pred = Parameter(np.full((2, 2, 2), 0.5, dtype=F64), name="m")
    loss = bce_attention(pred, [None, None])
    assert float(loss.data) == 0.0
    assert not loss.requires_grad


def test_absent_samples_receive_no_gradient():
    pred = Parameter(np.full((2, 2, 2), 0.4, dtype=F64), name="m")
    gt = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=np.float32)
    loss = bce_attention(pred, [gt, None])
    loss.backward()
    assert np.any(pred.grad[0] != 0.0)
    np.testing.assert_array_equal(pred.grad[1], np.zeros((2, 2)))


def test_grid_mismatch_rejected():
    with pytest.raises(ValueError, match="grid"):
        bce_attention(np.full((1, 2, 2), 0.5), [np.zeros((3, 3), dtype=np.float32)])


def test_count_mismatch_rejected():
    with pytest.raises(ValueError, match="entries"):
        bce_attention(np.full((2, 2, 2), 0.5), [np.zeros((2, 2), dtype=np.float32)])


def test_non_binary_ground_truth_rejected():
    with pytest.raises(ValueError, match="0 and 1"):
        bce_attention(np.full((1, 2, 2), 0.5), [np.full((2, 2), 0.3, dtype=np.float32)])


# --- joint_loss ---

def test_joint_loss_boundaries_and_midpoint():
    assert joint_loss(2.0, 4.0, 1.0) == 2.0
    assert joint_loss(2.0, 4.0, 0.0) == 4.0
    assert joint_loss(2.0, 4.0, 0.5) == 3.0


@pytest.mark.parametrize("lam", [-0.1, 1.1, 2.0])
def test_joint_loss_lambda_out_of_range(lam):
    with pytest.raises(ValueError, match="lambda"):
        joint_loss(2.0, 4.0, lam)


def test_joint_loss_keeps_the_graph():
    a = Parameter(np.array(2.0), name="a")
    b = Parameter(np.array(4.0), name="b")
    out = joint_loss(a, b, 0.25)
    out.backward()
    assert float(out.data) == 0.25 * 2.0 + 0.75 * 4.0
    assert float(a.grad) == 0.25
    assert float(b.grad) == 0.75


# --- stratified_split ---

def toy_samples(n_pos, n_neg):
    return [(f"p{i}", 1) for i in range(n_pos)] + [(f"n{i}", 0) for i in range(n_neg)]


def test_small_balanced_split_counts():
    train, val, test = stratified_split(toy_samples(10, 10), (0.5, 0.25, 0.25), seed=0)
    assert (len(train), len(val), len(test)) == (10, 6, 4)
    for part in (train, val, test):
        pos = sum(1 for s in part if s[1] == 1)
        assert abs(pos - len(part) / 2) <= 0.5  # stays balanced within one sample


def test_split_is_a_partition():
    samples = toy_samples(23, 11)
    train, val, test = stratified_split(samples, (0.6, 0.2, 0.2), seed=3)
    combined = sorted(s[0] for s in train + val + test)
    assert combined == sorted(s[0] for s in samples)


def test_same_seed_reproduces_the_split():
    samples = toy_samples(40, 13)
    a = stratified_split(samples, (0.7, 0.15, 0.15), seed=9)
    b = stratified_split(samples, (0.7, 0.15, 0.15), seed=9)
    assert a == b


def test_different_seed_usually_changes_membership():
    samples = toy_samples(40, 13)
    a = stratified_split(samples, (0.7, 0.15, 0.15), seed=1)
    b = stratified_split(samples, (0.7, 0.15, 0.15), seed=2)
    assert a != b


def test_published_helmet_shape_is_reproduced_closely():
    # 13481 positives + 4170 negatives at ratios (0.696, 0.149, 0.155):
    # largest-remainder apportionment lands within 2 of 12286/2628/2737
    samples = toy_samples(13481, 4170)
    train, val, test = stratified_split(samples, (0.696, 0.149, 0.155), seed=0)
    assert (len(train), len(val), len(test)) == (12285, 2630, 2736)
    for got, published in zip((len(train), len(val), len(test)), (12286, 2628, 2737)):
        assert abs(got - published) <= 2
    for part in (train, val, test):
        ratio = sum(1 for s in part if s[1] == 1) / len(part)
        assert abs(ratio - 13481 / 17651) < 0.01  # roughly 3:1 everywhere


def test_ratios_must_sum_to_one():
    with pytest.raises(ValueError, match="sum"):
        stratified_split(toy_samples(5, 5), (0.5, 0.2, 0.2), seed=0)


def test_ratios_must_be_positive():
    with pytest.raises(ValueError, match="positive"):
        stratified_split(toy_samples(5, 5), (1.0, 0.0, 0.0), seed=0)


def test_tiny_class_rejected():
    with pytest.raises(ValueError, match="at least 3"):
        stratified_split(toy_samples(10, 2), (0.5, 0.25, 0.25), seed=0)


@given(st.integers(3, 60), st.integers(3, 60),
       st.tuples(st.integers(1, 8), st.integers(1, 8), st.integers(1, 8)),
       st.integers(0, 10_000))
@settings(max_examples=150, deadline=None)
def test_every_subset_tracks_the_class_ratio(n_pos, n_neg, weights, seed):
    total = sum(weights)
    ratios = tuple(w / total for w in weights)
    samples = toy_samples(n_pos, n_neg)
    parts = stratified_split(samples, ratios, seed=seed)
    assert sum(len(p) for p in parts) == n_pos + n_neg
    for part, r in zip(parts, ratios):
        pos = sum(1 for s in part if s[1] == 1)
        neg = len(part) - pos
        assert abs(pos - r * n_pos) < 1.0
        assert abs(neg - r * n_neg) < 1.0
