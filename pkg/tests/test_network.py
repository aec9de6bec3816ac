import numpy as np
import pytest

from edgesr import functional as F
from edgesr.gradcheck import run_suite
from edgesr.network import (
    ArchConfig,
    Discriminator,
    Generator,
    HybridEdgeResBlock,
    NeaBlock,
    count_params,
    discriminator_forward,
    generator_forward,
    hybrid_forward,
    init_params,
    nea_forward,
)
from edgesr.objective import pixel_loss
from edgesr.tensor import Tensor, backward, no_grad, precision


def edges(rng, n, h, w):
    return Tensor((rng.random((n, 1, h, w)) < 0.25).astype(np.float32))


# closed-form parameter counts ---------------------------------------------------------


def encoder_count(ce):
    return (9 * ce + ce) + ce + (ce * ce + ce)


def nea_count(c, ce):
    film = 2 * c * ce + 2 * c
    spatial = (ce * ce + ce) + ce + (9 * ce + 1)
    fusion = 2 * c * c + c
    return film + spatial + fusion


def hybrid_count(c, ce, attention=True):
    return 2 * (9 * c * c + c) + c + (2 * nea_count(c, ce) if attention else 0)


def generator_count(c, ce, b, scale, attention=True):
    stages = {2: [2], 3: [3], 4: [2, 2]}[scale]
    total = encoder_count(ce) if attention else 0
    total += (243 * c + c) + c
    total += b * hybrid_count(c, ce, attention)
    total += (9 * c * c + c) + 2 * c
    for r in stages:
        total += (9 * c * c * r * r + c * r * r) + c
    total += 243 * c + 3
    return total


def discriminator_count(arch):
    total, cin = 0, 3
    for i in range(arch.d_blocks):
        cout = min(arch.d_base * 2 ** (i // 2), arch.d_max)
        total += 9 * cin * cout + cout + (2 * cout if i > 0 else 0)
        cin = cout
    return total + cin + 1


@pytest.mark.parametrize("scale", [2, 3, 4])
def test_desk_config_parameter_count(scale):
    arch = ArchConfig()
    assert (arch.channels, arch.edge_channels, arch.blocks) == (64, 32, 8)
    params = init_params(0, scale, arch)
    assert count_params(params.generator) == generator_count(64, 32, 8, scale)
    assert count_params(params.discriminator) == discriminator_count(arch)
    assert count_params(params) == generator_count(64, 32, 8, scale) + discriminator_count(arch)


def test_ablation_count_difference_is_nea_total():
    full = Generator(4, ArchConfig(), np.random.default_rng(0))
    plain = Generator(4, ArchConfig(edge_attention=False), np.random.default_rng(0))
    assert count_params(full) - count_params(plain) == encoder_count(32) + 2 * 8 * nea_count(64, 32)
    assert count_params(plain) == generator_count(64, 32, 8, 4, attention=False)


# init ------------------------------------------------------------------------------


def test_init_is_deterministic_and_film_is_zero():
    a, b = init_params(5, 4, ArchConfig(channels=8, edge_channels=4, blocks=2, d_base=8, d_blocks=3)), \
        init_params(5, 4, ArchConfig(channels=8, edge_channels=4, blocks=2, d_base=8, d_blocks=3))
    for (ka, va), (kb, vb) in zip(a.generator.state_dict().items(), b.generator.state_dict().items()):
        assert ka == kb and va.tobytes() == vb.tobytes()
    for name, p in a.generator.named_parameters():
        if "film_proj" in name:
            assert not np.any(p.data)
        if name.endswith("alpha"):
            assert np.all(p.data == np.float32(0.25))
    c = init_params(6, 4, ArchConfig(channels=8, edge_channels=4, blocks=2, d_base=8, d_blocks=3))
    assert any(not np.array_equal(x, y) for x, y in zip(a.generator.state_dict().values(),
                                                          c.generator.state_dict().values()))


def test_first_forward_has_zero_gamma_beta(rng):
    block = NeaBlock(8, 4, rng)
    parts = block.parts(Tensor(rng.standard_normal((2, 8, 6, 6))), edges(rng, 2, 6, 6))
    assert not np.any(parts["gamma"].data) and not np.any(parts["beta"].data)
    assert parts["gamma"].shape == (2, 8, 1, 1)
    assert parts["attention"].shape == (2, 1, 6, 6)
    assert np.all((parts["attention"].data > 0) & (parts["attention"].data < 1))


# NEA analytic reductions ----------------------------------------------------------------


def test_zero_edges_and_zero_film_give_plain_bn(rng):
    block = NeaBlock(6, 4, rng)
    parts = block.parts(Tensor(rng.standard_normal((3, 6, 5, 5))), Tensor(np.zeros((3, 1, 5, 5))))
    np.testing.assert_array_equal(parts["x_norm"].data, parts["bn"].data)


def forced_identity_block(rng, c=6, ce=4):
    block = NeaBlock(c, ce, rng)
    block.spatial_conv3.weight.data[:] = 0.0
    block.spatial_conv3.bias.data[:] = 20.0
    w = np.zeros((c, 2 * c, 1, 1), dtype=np.float32)
    for i in range(c):
        w[i, i] = 0.5
        w[i, c + i] = 0.5
    block.fusion.weight.data = w
    block.fusion.bias.data[:] = 0.0
    return block


@pytest.mark.parametrize("mode", ["train", "eval"])
def test_forced_identity_reduction(rng, mode):
    block = forced_identity_block(rng)
    if mode == "eval":
        block.bn.running_mean[:] = rng.standard_normal(6)
        block.bn.running_var[:] = rng.uniform(0.5, 2.0, 6)
    x = Tensor(rng.standard_normal((2, 6, 7, 7)))
    e = edges(rng, 2, 7, 7)
    bn_state = (block.bn.running_mean.copy(), block.bn.running_var.copy())
    out = nea_forward(block, x, e, mode)
    bn = F.batch_norm(x, *bn_state, train=(mode == "train")).data
    np.testing.assert_allclose(out.data, (x.data + bn) / 2 + x.data, atol=1e-5)


def test_edges_resized_to_feature_size(rng):
    block = NeaBlock(4, 3, rng)
    out = block(Tensor(rng.standard_normal((1, 4, 8, 8))), edges(rng, 1, 4, 4))
    assert out.shape == (1, 4, 8, 8)


def test_channel_mismatch_is_error(rng):
    with pytest.raises(ValueError, match="channels"):
        NeaBlock(4, 3, rng)(Tensor(np.zeros((1, 5, 4, 4))), Tensor(np.zeros((1, 1, 4, 4))))


# hybrid block ---------------------------------------------------------------------------


def test_hybrid_zeroed_branch_is_identity(rng):
    block = HybridEdgeResBlock(6, 4, rng)
    for name, p in block.named_parameters():
        if name.startswith(("conv1", "conv2")) or ".fusion." in f".{name}":
            p.data[:] = 0.0
    x = Tensor(rng.standard_normal((2, 6, 5, 5)))
    np.testing.assert_array_equal(hybrid_forward(block, x, edges(rng, 2, 5, 5)).data, x.data)


@pytest.mark.parametrize("c", [16, 64])
@pytest.mark.parametrize("hw", [8, 32])
def test_hybrid_shape_contract(rng, c, hw):
    block = HybridEdgeResBlock(c, 8, rng)
    x = Tensor(rng.standard_normal((2, c, hw, hw)))
    assert hybrid_forward(block, x, edges(rng, 2, hw, hw)).shape == x.shape


def test_hybrid_gradcheck_on_1x8x8x8():
    from edgesr.gradcheck import check_gradients, projected_loss

    rng = np.random.default_rng(3)
    with precision(np.float64):
        block = HybridEdgeResBlock(8, 4, rng).astype(np.float64)
        for _, p in block.named_parameters():
            if not np.any(p.data):
                p.data = rng.uniform(-0.3, 0.3, p.shape)
        x = Tensor(rng.standard_normal((1, 8, 8, 8)), requires_grad=True)
        e = Tensor((rng.random((1, 1, 8, 8)) < 0.3).astype(np.float64))
        w = rng.standard_normal((1, 8, 8, 8))
        results = check_gradients(lambda: projected_loss(hybrid_forward(block, x, e), w),
                                  {"x": x, **dict(block.named_parameters())}, rng, max_per_tensor=16)
    assert all(r.ok for r in results), [str(r) for r in results if not r.ok]


# generator ---------------------------------------------------------------------------


def small_arch(**kw):
    base = dict(channels=8, edge_channels=4, blocks=2, d_base=8, d_max=32, d_blocks=4)
    base.update(kw)
    return ArchConfig(**base)


@pytest.mark.parametrize("scale", [2, 3, 4])
def test_generator_output_size(rng, scale):
    g = Generator(scale, small_arch(), rng)
    out = generator_forward(g, Tensor(rng.random((1, 3, 32, 32))), edges(rng, 1, 32, 32), "eval")
    assert out.shape == (1, 3, 32 * scale, 32 * scale)


def test_generator_bad_scale_and_edge_shape(rng):
    with pytest.raises(ValueError, match="scale"):
        Generator(8, small_arch(), rng)
    g = Generator(2, small_arch(), rng)
    with pytest.raises(ValueError, match="edge"):
        g(Tensor(np.zeros((1, 3, 8, 8))), Tensor(np.zeros((1, 1, 4, 4))))


def test_generator_eval_is_deterministic(rng):
    g = Generator(4, small_arch(), rng)
    lr, e = Tensor(rng.random((2, 3, 12, 12))), edges(rng, 2, 12, 12)
    a = generator_forward(g, lr, e, "eval").data
    b = generator_forward(g, lr, e, "eval").data
    assert a.tobytes() == b.tobytes()


def test_generator_edge_conditioning_is_live(rng):
    g = Generator(2, small_arch(), rng)
    for name, p in g.named_parameters():
        if "film_proj" in name:
            p.data = rng.uniform(-0.5, 0.5, p.shape).astype(np.float32)
    lr = Tensor(rng.random((1, 3, 10, 10)))
    e1 = edges(rng, 1, 10, 10)
    e2 = Tensor(1.0 - e1.data)
    with no_grad():
        diff = np.abs(g(lr, e1, train=False).data - g(lr, e2, train=False).data).max()
    assert diff > 0


def test_generator_single_step_descends():
    rng = np.random.default_rng(11)
    with precision(np.float64):
        g = Generator(2, small_arch(), rng).astype(np.float64)
        lr, hr = Tensor(rng.random((2, 3, 8, 8))), Tensor(rng.random((2, 3, 16, 16)))
        e = Tensor((rng.random((2, 1, 8, 8)) < 0.3).astype(np.float64))
        before = pixel_loss(g(lr, e), hr)
        backward(before)
        for _, p in g.named_parameters():
            p.data = p.data - 1e-5 * p.grad
        with no_grad():
            after = pixel_loss(g(lr, e), hr)
    assert after.item() < before.item()


def test_no_edge_attention_generator_runs_without_edges(rng):
    g = Generator(4, small_arch(edge_attention=False), rng)
    assert g(Tensor(rng.random((1, 3, 8, 8))), None).shape == (1, 3, 32, 32)


# discriminator ------------------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 4])
def test_discriminator_shape_and_determinism(rng, n):
    d = Discriminator(small_arch(), rng)
    x = Tensor(rng.random((n, 3, 32, 32)))
    a = discriminator_forward(d, x, "eval")
    assert a.shape == (n, 1)
    assert a.data.tobytes() == discriminator_forward(d, x, "eval").data.tobytes()


def test_discriminator_undersized_input(rng):
    d = Discriminator(small_arch(), rng)
    with pytest.raises(ValueError, match="minimum"):
        d(Tensor(np.zeros((1, 3, 16, 32))))


def test_discriminator_channel_schedule():
    d = Discriminator(ArchConfig(), np.random.default_rng(0))
    widths = [c.weight.shape[0] for c in d.convs]
    assert widths == [64, 64, 128, 128, 256, 256, 512, 512]
    assert [c.stride for c in d.convs] == [1, 2, 1, 2, 1, 2, 1, 2]


# gradient suites on three seeds ---------------------------------------------------------


@pytest.mark.parametrize("suite", ["nea", "hybrid", "generator", "discriminator"])
def test_block_gradient_suites(suite):
    results = run_suite(suite, seeds=(0, 1, 2))
    assert all(r.ok for r in results), [str(r) for r in results if not r.ok]
