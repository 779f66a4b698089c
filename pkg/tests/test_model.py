"""Classifier architecture contracts: shapes, variants, the attention gate."""

import numpy as np
import pytest

from poseattn.autodiff import Parameter, Tensor, channel_reduce
from poseattn.model import (
    ATTENTION_GRID,
    INPUT_SHAPE,
    VARIANTS,
    ClassifierModel,
    SamBlock,
    classify_crop,
)


def random_image(seed=0, batch=None):
    rng = np.random.default_rng(seed)
    shape = INPUT_SHAPE if batch is None else (batch,) + INPUT_SHAPE
    return Tensor(rng.uniform(0, 1, shape).astype(np.float32))


def test_variant_tuple():
    assert VARIANTS == ("plain", "sam", "super_sam")


def test_unknown_variant_rejected():
    with pytest.raises(ValueError, match="variant"):
        ClassifierModel.initialize("resnet", seed=0)


def test_forward_single_shapes():
    model = ClassifierModel.initialize("sam", seed=0)
    prob, mask = model.forward(random_image())
    assert prob.shape == ()
    assert mask.shape == (1,) + ATTENTION_GRID


def test_forward_batched_shapes():
    model = ClassifierModel.initialize("super_sam", seed=0)
    prob, mask = model.forward(random_image(batch=5))
    assert prob.shape == (5,)
    assert mask.shape == (5, 1) + ATTENTION_GRID


def test_plain_variant_has_no_mask():
    model = ClassifierModel.initialize("plain", seed=0)
    prob, mask = model.forward(random_image())
    assert mask is None
    assert model.sam is None


def test_probability_strictly_inside_unit_interval():
    for variant in VARIANTS:
        model = ClassifierModel.initialize(variant, seed=3)
        prob, _ = model.forward(random_image(seed=4))
        assert 0.0 < float(prob.data) < 1.0


def test_mask_values_strictly_inside_unit_interval():
    model = ClassifierModel.initialize("sam", seed=5)
    _, mask = model.forward(random_image(seed=6))
    assert np.all(mask.data > 0.0) and np.all(mask.data < 1.0)


def test_zero_image_stays_finite():
    model = ClassifierModel.initialize("super_sam", seed=7)
    prob, mask = model.forward(Tensor(np.zeros(INPUT_SHAPE, dtype=np.float32)))
    assert np.isfinite(prob.data)
    assert np.all(np.isfinite(mask.data))


def test_wrong_geometry_rejected():
    model = ClassifierModel.initialize("plain", seed=0)
    with pytest.raises(ValueError, match="3, 64, 64"):
        model.forward(Tensor(np.zeros((3, 32, 32), dtype=np.float32)))


def test_same_seed_same_weights():
    a = ClassifierModel.initialize("super_sam", seed=11)
    b = ClassifierModel.initialize("super_sam", seed=11)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert pa.name == pb.name
        np.testing.assert_array_equal(pa.data, pb.data)


def test_two_forward_calls_bit_identical():
    model = ClassifierModel.initialize("sam", seed=12)
    img = random_image(seed=13)
    p1, m1 = model.forward(img)
    p2, m2 = model.forward(img)
    assert float(p1.data) == float(p2.data)
    np.testing.assert_array_equal(m1.data, m2.data)


def test_sam_and_super_sam_share_architecture():
    # equal seeds draw equal weights, so forward outputs must be bit-identical:
    # the variants differ only in how they are trained
    img = random_image(seed=14)
    sam = ClassifierModel.initialize("sam", seed=15)
    sup = ClassifierModel.initialize("super_sam", seed=15)
    ps, ms = sam.forward(img)
    pu, mu = sup.forward(img)
    assert float(ps.data) == float(pu.data)
    np.testing.assert_array_equal(ms.data, mu.data)


def test_parameter_names_and_shapes():
    model = ClassifierModel.initialize("super_sam", seed=0)
    shapes = {p.name: p.data.shape for p in model.parameters()}
    assert shapes == {
        "conv1.weight": (8, 3, 3, 3), "conv1.bias": (8,),
        "conv2.weight": (16, 8, 3, 3), "conv2.bias": (16,),
        "conv3.weight": (32, 16, 3, 3), "conv3.bias": (32,),
        "sam.conv7.weight": (1, 2, 7, 7), "sam.conv7.bias": (1,),
        "head.weight": (1, 32), "head.bias": (1,),
    }
    plain = ClassifierModel.initialize("plain", seed=0)
    assert "sam.conv7.weight" not in plain.param_dict()


def test_conv_biases_start_at_zero():
    model = ClassifierModel.initialize("sam", seed=1)
    for name, p in model.param_dict().items():
        if name.endswith(".bias"):
            np.testing.assert_array_equal(p.data, np.zeros_like(p.data))


def test_init_bound_follows_fan_in():
    model = ClassifierModel.initialize("plain", seed=2)
    w1 = model.param_dict()["conv1.weight"].data
    bound = np.sqrt(6.0 / (3 * 9))
    assert np.all(np.abs(w1) <= bound)
    assert np.abs(w1).max() > 0.5 * bound  # actually spreads over the range


def test_sam_zero_weights_gate_is_half():
    rng = np.random.default_rng(16)
    block = SamBlock(Parameter(np.zeros((1, 2, 7, 7), dtype=np.float32), name="w"),
                     Parameter(np.zeros(1, dtype=np.float32), name="b"))
    features = Tensor(rng.uniform(-1, 1, (32, 8, 8)).astype(np.float32))
    gated, mask = block.forward(features)
    np.testing.assert_array_equal(mask.data, np.full((1, 8, 8), 0.5))
    np.testing.assert_allclose(gated.data, 0.5 * features.data, rtol=1e-6)


def test_sam_constant_features_make_identical_reductions():
    features = Tensor(np.full((32, 8, 8), 1.5, dtype=np.float32))
    mx = channel_reduce(features, "max")
    mn = channel_reduce(features, "mean")
    np.testing.assert_array_equal(mx.data, mn.data)


def test_classify_crop_matches_forward():
    model = ClassifierModel.initialize("super_sam", seed=17)
    img = np.random.default_rng(18).uniform(0, 1, INPUT_SHAPE).astype(np.float32)
    prob, mask = classify_crop(model, img)
    ref_prob, ref_mask = model.forward(Tensor(img))
    assert prob == float(ref_prob.data)
    assert mask.shape == ATTENTION_GRID
    np.testing.assert_array_equal(mask, ref_mask.data.reshape(ATTENTION_GRID))


def test_classify_crop_plain_returns_no_mask():
    model = ClassifierModel.initialize("plain", seed=19)
    prob, mask = classify_crop(model, np.zeros(INPUT_SHAPE, dtype=np.float32))
    assert isinstance(prob, float)
    assert mask is None


def test_classify_crop_rejects_batches():
    model = ClassifierModel.initialize("plain", seed=20)
    with pytest.raises(ValueError):
        classify_crop(model, np.zeros((2,) + INPUT_SHAPE, dtype=np.float32))


def test_batched_forward_matches_single_forward():
    model = ClassifierModel.initialize("sam", seed=21)
    imgs = np.random.default_rng(22).uniform(0, 1, (4,) + INPUT_SHAPE).astype(np.float32)
    probs, masks = model.forward(Tensor(imgs))
    for n in range(4):
        p, m = model.forward(Tensor(imgs[n]))
        np.testing.assert_allclose(probs.data[n], p.data, rtol=2e-5)
        np.testing.assert_allclose(masks.data[n], m.data, rtol=2e-5, atol=1e-6)
