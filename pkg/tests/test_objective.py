import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgesr import functional as F
from edgesr.config import TrainConfig, from_pairs
from edgesr.objective import (
    PRESETS,
    FeatureExtractor,
    LossWeights,
    adversarial_loss_discriminator,
    adversarial_loss_generator,
    perceptual_loss,
    pixel_loss,
    total_loss,
)
from edgesr.tensor import Tensor, backward, precision


def leaf(a):
    return Tensor(np.asarray(a), requires_grad=True)


# pixel ------------------------------------------------------------------------------


def test_pixel_loss_values(rng):
    hr = rng.random((2, 3, 4, 4)).astype(np.float32)
    assert pixel_loss(Tensor(hr), Tensor(hr)).item() == 0.0
    with precision(np.float64):
        hr64 = hr.astype(np.float64)
        assert pixel_loss(Tensor(hr64 + 0.1), Tensor(hr64)).item() == pytest.approx(0.01, abs=1e-12)


def test_pixel_loss_gradient_is_analytic(rng):
    with precision(np.float64):
        sr, hr = leaf(rng.random((2, 3, 5, 5))), Tensor(rng.random((2, 3, 5, 5)))
        backward(pixel_loss(sr, hr))
    np.testing.assert_allclose(sr.grad, 2 * (sr.data - hr.data) / sr.data.size, atol=1e-6)


def test_pixel_loss_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        pixel_loss(Tensor(np.zeros((1, 3, 4, 4))), Tensor(np.zeros((1, 3, 4, 5))))


# perceptual -------------------------------------------------------------------------


def test_extractor_is_deterministic_and_frozen(rng):
    a, b = FeatureExtractor(3), FeatureExtractor(3)
    x = Tensor(rng.random((1, 3, 32, 32)))
    assert a.features(x).data.tobytes() == b.features(x).data.tobytes()
    assert not any(w.requires_grad for w in a.weight_arrays() if hasattr(w, "requires_grad"))
    assert list(a.parameters()) == []
    c = FeatureExtractor(4)
    assert not np.array_equal(a.weight_arrays()[0], c.weight_arrays()[0])
    assert a.features(x).shape == (1, 64, 2, 2)


def test_perceptual_loss_zero_and_symmetric(rng):
    ex = FeatureExtractor(0)
    with precision(np.float64):
        x, y = Tensor(rng.random((2, 3, 16, 16))), Tensor(rng.random((2, 3, 16, 16)))
        assert perceptual_loss(ex, x, x).item() == 0.0
        assert perceptual_loss(ex, x, y).item() == perceptual_loss(ex, y, x).item()
        assert perceptual_loss(ex, x, y).item() > 0


def test_perceptual_normalization_is_feature_mse(rng):
    ex = FeatureExtractor(0)
    with precision(np.float64):
        x, y = Tensor(rng.random((1, 3, 32, 32))), Tensor(rng.random((1, 3, 32, 32)))
        fx, fy = ex.features(x).data, ex.features(y).data
        expected = ((fx - fy) ** 2).sum() / fx[0].size
        assert perceptual_loss(ex, x, y).item() == pytest.approx(expected, rel=1e-12)


def test_perceptual_gradient_reaches_sr_only(rng):
    ex = FeatureExtractor(0)
    with precision(np.float64):
        sr, hr = leaf(rng.random((1, 3, 16, 16))), Tensor(rng.random((1, 3, 16, 16)))
        before = [w.copy() for w in ex.weight_arrays()]
        backward(perceptual_loss(ex, sr, hr))
    assert sr.grad is not None and np.abs(sr.grad).max() > 0
    assert hr.grad is None
    for w0, w in zip(before, ex.weight_arrays()):
        np.testing.assert_array_equal(w0, w)


# adversarial ------------------------------------------------------------------------


def test_generator_adversarial_examples():
    assert adversarial_loss_generator(Tensor(np.zeros((4, 1)))).item() == pytest.approx(math.log(2), abs=1e-6)
    big = adversarial_loss_generator(Tensor(np.full((2, 1), 50.0))).item()
    assert 0.0 <= big < 1e-12
    assert math.isfinite(adversarial_loss_generator(Tensor(np.full((2, 1), -200.0))).item())


def test_generator_adversarial_matches_naive_form():
    with precision(np.float64):
        x = np.linspace(-20, 20, 401).reshape(-1, 1)
        ours = adversarial_loss_generator(Tensor(x)).item()
    naive = np.mean(-np.log(1.0 / (1.0 + np.exp(-x))))
    assert abs(ours - naive) < 1e-6
    for v in (-20.0, -3.0, 0.5, 7.0, 20.0):
        with precision(np.float64):
            one = adversarial_loss_generator(Tensor(np.array([[v]]))).item()
        assert abs(one + math.log(1 / (1 + math.exp(-v)))) < 1e-6


def test_discriminator_adversarial_examples():
    z = Tensor(np.zeros((3, 1)))
    assert adversarial_loss_discriminator(z, z).item() == pytest.approx(math.log(2), abs=1e-6)
    sep = adversarial_loss_discriminator(Tensor(np.full((2, 1), 50.0)), Tensor(np.full((2, 1), -50.0)))
    assert sep.item() < 1e-12


def test_discriminator_adversarial_hand_computed_2_plus_2():
    real, fake = [1.2, -0.4], [0.3, -2.0]

    def sig(v):
        return 1 / (1 + math.exp(-v))

    hand = 0.5 * (-(math.log(sig(real[0])) + math.log(sig(real[1]))) / 2
                  - (math.log(1 - sig(fake[0])) + math.log(1 - sig(fake[1]))) / 2)
    with precision(np.float64):
        got = adversarial_loss_discriminator(Tensor(np.array(real).reshape(2, 1)),
                                             Tensor(np.array(fake).reshape(2, 1))).item()
    assert got == pytest.approx(hand, abs=1e-12)


# total ------------------------------------------------------------------------------


def test_total_loss_fixed_preset_example():
    perc, adv = PRESETS["fixed"]
    with precision(np.float64):
        out = total_loss(LossWeights(1.0, perc, adv), Tensor(1.0), Tensor(1.0), Tensor(1.0)).item()
    assert out == pytest.approx(1.011, abs=1e-12)


def test_pretrain_weights_ignore_adversarial():
    w = TrainConfig().weights_for_epoch(0)
    assert w == LossWeights(1.0, 1e-4, 0.0)
    a = total_loss(w, Tensor(0.3), Tensor(2.0), Tensor(5.0)).item()
    b = total_loss(w, Tensor(0.3), Tensor(2.0), Tensor(500.0)).item()
    assert a == b


def test_zero_weights_give_pixel_loss():
    with precision(np.float64):
        assert total_loss(LossWeights(1.0, 0.0, 0.0), Tensor(0.37), Tensor(9.0), Tensor(9.0)).item() == 0.37


def test_negative_weight_rejected():
    with pytest.raises(ValueError):
        LossWeights(1.0, -1e-4, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=3, max_size=3), st.lists(st.floats(0, 1), min_size=3, max_size=3),
       st.floats(0, 4))
def test_total_loss_linear_in_each_component(losses, weights, k):
    w = LossWeights(*weights)
    with precision(np.float64):
        base = total_loss(w, *(Tensor(v) for v in losses)).item()
        for i in range(3):
            scaled = list(losses)
            scaled[i] *= k
            got = total_loss(w, *(Tensor(v) for v in scaled)).item()
            assert got == pytest.approx(base + weights[i] * losses[i] * (k - 1), abs=1e-9)


def test_total_gradient_is_weighted_sum_of_component_gradients(rng):
    ex = FeatureExtractor(0)
    w = LossWeights(1.0, 1e-3, 1e-2)
    with precision(np.float64):
        hr = Tensor(rng.random((2, 3, 16, 16)))
        logits_w = rng.standard_normal((1, 3 * 16 * 16)) * 0.05
        x0 = rng.random((2, 3, 16, 16))

        def parts(sr):
            logits = Tensor(logits_w)
            flat = sr.reshape(2, -1)
            adv = adversarial_loss_generator(F.linear(flat, logits))
            return pixel_loss(sr, hr), perceptual_loss(ex, sr, hr), adv

        grads = []
        for i in range(3):
            sr = leaf(x0)
            backward(parts(sr)[i])
            grads.append(sr.grad)
        sr = leaf(x0)
        backward(total_loss(w, *parts(sr)))
    expected = grads[0] * w.pixel + grads[1] * w.perceptual + grads[2] * w.adversarial
    np.testing.assert_allclose(sr.grad, expected, atol=1e-6)


def test_presets_selectable_from_config():
    staged = from_pairs({"loss.preset": "staged"})
    fixed = from_pairs({"loss.preset": "fixed"})
    assert (staged.loss.lambda_perc_full, staged.loss.lambda_adv_full) == (1e-4, 1e-3)
    assert (fixed.loss.lambda_perc_full, fixed.loss.lambda_adv_full) == (1e-3, 1e-2)
    assert fixed.weights_for_epoch(fixed.epochs_pretrain) == LossWeights(1.0, 1e-3, 1e-2)
