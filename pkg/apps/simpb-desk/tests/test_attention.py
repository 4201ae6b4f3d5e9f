import numpy as np
import pytest

from simpb_desk.application.allocation import MappingMatrix
from simpb_desk.application.attention import (
    AttentionConfig,
    DeformableCrossAttention,
    GroupCrossAttention,
    GroupMask,
    GroupSelfAttention,
    TemporalCrossAttention,
    group_self_attention,
)
from simpb_desk.application.tensor import ParameterStore, Tensor
from simpb_desk.exceptions import ConfigError, UsageError

C = 8


@pytest.fixture
def store() -> ParameterStore:
    return ParameterStore(np.random.default_rng(0))


@pytest.fixture
def cfg() -> AttentionConfig:
    return AttentionConfig(embed_dims=C, num_heads=2, num_points=3, stride=4)


def test_group_mask_blocks():
    mask = GroupMask.from_group_sizes([2, 0, 1])
    assert mask.size == 3
    assert mask.group_sizes == (2, 0, 1)
    np.testing.assert_array_equal(mask.values[:2, :2], np.zeros((2, 2)))
    assert mask.values[2, 2] == 0.0
    assert np.all(np.isneginf(mask.values[:2, 2]))
    assert np.all(np.isneginf(mask.values[2, :2]))


def test_attention_config_rejects_uneven_heads():
    with pytest.raises(ConfigError):
        AttentionConfig(embed_dims=10, num_heads=4)


class TestGroupSelfAttention:
    def test_groups_do_not_interact(self, store, cfg, rng):
        layer = GroupSelfAttention(store, "gsa", cfg)
        mask = GroupMask.from_group_sizes([3, 2])
        q = rng.normal(size=(5, C))
        out = layer(Tensor(q), mask).values
        perturbed = q.copy()
        perturbed[3:] += rng.normal(size=(2, C))
        out_perturbed = layer(Tensor(perturbed), mask).values
        np.testing.assert_allclose(out[:3], out_perturbed[:3], atol=1e-12)
        assert not np.allclose(out[3:], out_perturbed[3:])

    def test_equals_per_group_attention(self, store, cfg, rng):
        layer = GroupSelfAttention(store, "gsa", cfg)
        q = rng.normal(size=(5, C))
        joint = group_self_attention(Tensor(q), GroupMask.from_group_sizes([3, 2]), layer).values
        first = layer(Tensor(q[:3]), GroupMask.from_group_sizes([3])).values
        second = layer(Tensor(q[3:]), GroupMask.from_group_sizes([2])).values
        np.testing.assert_allclose(joint, np.concatenate([first, second]), atol=1e-12)

    @pytest.mark.parametrize("order", [[2, 0, 1, 3, 4], [1, 0, 2, 4, 3], [0, 1, 2, 4, 3]])
    def test_permuting_within_a_group_permutes_outputs(self, store, cfg, rng, order):
        layer = GroupSelfAttention(store, "gsa", cfg)
        mask = GroupMask.from_group_sizes([3, 2])
        q = rng.normal(size=(5, C))
        pos = rng.normal(size=(5, C))
        out = layer(Tensor(q), mask, Tensor(pos)).values
        permuted = layer(Tensor(q[order]), mask, Tensor(pos[order])).values
        np.testing.assert_allclose(permuted, out[order], atol=1e-12)

    def test_mask_size_mismatch(self, store, cfg, rng):
        layer = GroupSelfAttention(store, "gsa", cfg)
        with pytest.raises(UsageError):
            layer(Tensor(rng.normal(size=(4, C))), GroupMask.from_group_sizes([2, 1]))

    def test_empty_queries(self, store, cfg):
        layer = GroupSelfAttention(store, "gsa", cfg)
        out = layer(Tensor(np.zeros((0, C))), GroupMask.from_group_sizes([0, 0]))
        assert out.shape == (0, C)


class TestDeformableCrossAttention:
    def test_untrained_layer_samples_reference_cell(self, store, cfg, rng):
        layer = DeformableCrossAttention(store, "dca", cfg)
        featmap = Tensor(rng.normal(size=(4, 6, C)))
        # pixel centre of cell (row 2, col 3) with stride 4
        refs = np.array([[3.5 * 4, 2.5 * 4]])
        sampled = layer.sample(Tensor(rng.normal(size=(1, C))), refs, np.array([0, 1]), [featmap])
        expected = layer.value_proj(featmap).values[2, 3]
        np.testing.assert_allclose(sampled.values[0], expected, atol=1e-12)

    def test_missing_feature_map(self, store, cfg, rng):
        layer = DeformableCrossAttention(store, "dca", cfg)
        with pytest.raises(UsageError):
            layer(Tensor(rng.normal(size=(1, C))), np.array([[4.0, 4.0]]), np.array([0, 0, 1]), [None, None])

    def test_queries_read_only_their_camera(self, store, cfg, rng):
        layer = GroupCrossAttention(store, "gca", cfg)
        mapping = MappingMatrix.from_groups(2, [np.array([0, 1]), np.array([1])])
        q = Tensor(rng.normal(size=(3, C)))
        refs = np.array([[6.0, 6.0], [10.0, 3.0], [7.0, 5.0]])
        maps = [Tensor(rng.normal(size=(3, 4, C))), Tensor(rng.normal(size=(3, 4, C)))]
        out = layer.forward_groups(q, refs, maps, mapping).values
        maps[1] = Tensor(rng.normal(size=(3, 4, C)))
        out_changed = layer.forward_groups(q, refs, maps, mapping).values
        # column 0 lives in camera 0, columns 1 and 2 in camera 1
        np.testing.assert_allclose(out[0], out_changed[0], atol=1e-12)
        assert not np.allclose(out[1:], out_changed[1:])

    def test_mapping_width_must_match(self, store, cfg, rng):
        layer = GroupCrossAttention(store, "gca", cfg)
        mapping = MappingMatrix.from_groups(1, [np.array([0])])
        with pytest.raises(UsageError):
            layer.forward_groups(Tensor(rng.normal(size=(2, C))), np.zeros((2, 2)), [None], mapping)


class TestTemporalCrossAttention:
    def test_empty_memory_is_identity(self, store, cfg, rng):
        layer = TemporalCrossAttention(store, "tca", cfg)
        q = Tensor(rng.normal(size=(4, C)))
        assert layer(q, None) is q
        assert layer(q, Tensor(np.zeros((0, C)))) is q

    def test_memory_updates_queries(self, store, cfg, rng):
        layer = TemporalCrossAttention(store, "tca", cfg)
        q = Tensor(rng.normal(size=(4, C)))
        out = layer(q, Tensor(rng.normal(size=(3, C))))
        assert out.shape == (4, C)
        assert not np.allclose(out.values, q.values)
