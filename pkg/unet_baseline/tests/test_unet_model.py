"""Architecture tests: shapes, normalization, parameter accounting."""

import pytest
import torch

from unet_baseline import UNetConfig, build_unet

TINY = UNetConfig(input_size=(32, 32), base_filters=4)


def test_config_rejects_indivisible_input_size():
    with pytest.raises(ValueError, match="divisible"):
        UNetConfig(input_size=(100, 96))


def test_config_rejects_single_class():
    with pytest.raises(ValueError, match="class_count"):
        UNetConfig(class_count=1)


def test_config_rejects_nonpositive_learning_rate():
    with pytest.raises(ValueError, match="learning_rate"):
        UNetConfig(learning_rate=0.0)


def test_config_filter_progression():
    config = UNetConfig()
    assert config.encoder_filters == (64, 128, 256, 512)
    assert config.bridge_filters == 1024


def test_output_shape_and_softmax_normalization():
    net = build_unet(TINY)
    probs = net(torch.rand(2, 3, 32, 32))
    assert probs.shape == (2, 2, 32, 32)
    sums = probs.sum(dim=1)
    assert torch.allclose(sums, torch.ones_like(sums), atol=1e-5)


def test_forward_rejects_wrong_channel_count():
    net = build_unet(TINY)
    with pytest.raises(ValueError, match="shape"):
        net(torch.rand(1, 1, 32, 32))


def test_forward_rejects_indivisible_spatial_dims():
    net = build_unet(TINY)
    with pytest.raises(ValueError, match="divisible"):
        net(torch.rand(1, 3, 30, 30))


def _conv_params(k, cin, cout):
    return k * k * cin * cout + cout


def expected_parameter_count(config):
    """Closed-form parameter count of the stated layer stack."""
    filters = list(config.encoder_filters)
    total = 0
    cin = config.in_channels
    for f in filters:
        total += _conv_params(3, cin, f) + _conv_params(3, f, f)
        cin = f
    bridge = config.bridge_filters
    total += _conv_params(3, filters[-1], bridge) + _conv_params(3, bridge, bridge)
    cin = bridge
    for f in reversed(filters):
        total += _conv_params(2, cin, f)
        total += _conv_params(3, 2 * f, f) + _conv_params(3, f, f)
        cin = f
    total += _conv_params(1, filters[0], config.class_count)
    return total


@pytest.mark.parametrize("config", [TINY, UNetConfig()], ids=["tiny", "default"])
def test_parameter_count_matches_hand_count(config):
    net = build_unet(config)
    assert sum(p.numel() for p in net.parameters()) == expected_parameter_count(config)


def test_skip_connections_match_mirror_encoder_channels():
    net = build_unet(TINY)
    depth = TINY.depth
    for i, decoder in enumerate(net.decoders):
        mirror = net.encoders[depth - 1 - i]
        encoder_out = mirror.block[2].out_channels
        assert decoder.block[0].in_channels == 2 * encoder_out


def test_build_is_deterministic_for_a_seed():
    a = build_unet(TINY).state_dict()
    b = build_unet(TINY).state_dict()
    assert a.keys() == b.keys()
    for key in a:
        assert torch.equal(a[key], b[key])


def test_build_ignores_ambient_rng_state():
    torch.manual_seed(123)
    a = build_unet(TINY).state_dict()
    torch.manual_seed(456)
    b = build_unet(TINY).state_dict()
    assert all(torch.equal(a[k], b[k]) for k in a)
