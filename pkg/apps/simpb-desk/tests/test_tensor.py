import numpy as np
import pytest

from simpb_desk.application.tensor import (
    FeedForward,
    LayerNorm,
    MultiHeadAttention,
    ParameterStore,
    Tape,
    Tensor,
    backward,
    bilinear_sample,
    finite_diff_check,
    layer_norm,
    linear,
    masked_softmax,
    matmul,
    ops,
)
from simpb_desk.exceptions import ContractError, ShapeError, UsageError


def param(values) -> Tensor:
    return Tensor(values, requires_grad=True)


def square_sum(t: Tensor) -> Tensor:
    return ops.sum(ops.mul(t, t))


class TestMatmul:
    def test_identity(self, rng):
        a = rng.normal(size=(3, 3))
        assert np.array_equal(matmul(Tensor(np.eye(3)), Tensor(a)).values, a)

    def test_hand_example(self):
        out = matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[1.0], [1.0]]))
        assert out.values.tolist() == [[3.0], [7.0]]

    def test_triple_loop_oracle(self, rng):
        a, b = rng.normal(size=(4, 5)), rng.normal(size=(5, 3))
        expected = np.zeros((4, 3))
        for i in range(4):
            for j in range(3):
                for k in range(5):
                    expected[i, j] += a[i, k] * b[k, j]
        np.testing.assert_allclose(matmul(Tensor(a), Tensor(b)).values, expected, atol=1e-12)

    def test_batched_leading_dims(self, rng):
        a, b = rng.normal(size=(2, 3, 4)), rng.normal(size=(4, 5))
        np.testing.assert_allclose(matmul(Tensor(a), Tensor(b)).values, a @ b, atol=1e-12)

    def test_shape_error_names_both_shapes(self):
        with pytest.raises(ShapeError) as info:
            matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))))
        assert "(2, 3)" in str(info.value) and "(4, 2)" in str(info.value)

    def test_gradients(self, rng):
        b = Tensor(rng.normal(size=(3, 2)))
        assert finite_diff_check(lambda x: ops.sum(matmul(x, b)), Tensor(rng.normal(size=(4, 3)))) < 1e-6


class TestMaskedSoftmax:
    def test_masked_entry_is_exactly_zero(self):
        out = masked_softmax(Tensor([0.0, 0.0, 0.0]), np.array([0.0, -np.inf, 0.0]))
        assert out.values.tolist() == [0.5, 0.0, 0.5]

    def test_uniform(self):
        out = masked_softmax(Tensor([2.0, 2.0, 2.0, 2.0]), np.zeros(4))
        np.testing.assert_allclose(out.values, [0.25] * 4, atol=1e-15)

    def test_random_matches_direct_formula(self, rng):
        logits = rng.normal(size=(5, 6)) * 10
        mask = np.where(rng.random((5, 6)) < 0.3, -np.inf, 0.0)
        mask[:, 0] = 0.0
        out = masked_softmax(Tensor(logits), mask).values
        e = np.where(np.isfinite(mask), np.exp(np.longdouble(logits)), 0.0)
        expected = (e / e.sum(axis=-1, keepdims=True)).astype(np.float64)
        np.testing.assert_allclose(out, expected, atol=1e-12)
        np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-9)
        assert np.all(out[~np.isfinite(mask)] == 0.0)

    def test_fully_masked_row_is_a_contract_error(self):
        with pytest.raises(ContractError):
            masked_softmax(Tensor([[1.0, 2.0]]), np.array([[-np.inf, -np.inf]]))

    def test_mask_shared_across_heads(self, rng):
        logits = rng.normal(size=(2, 3, 3))
        mask = np.array([[0.0, -np.inf, 0.0]] * 3)
        out = masked_softmax(Tensor(logits), mask).values
        assert np.all(out[..., 1] == 0.0)

    def test_gradient(self, rng):
        w = Tensor(rng.normal(size=4))
        mask = np.array([0.0, -np.inf, 0.0, 0.0])
        err = finite_diff_check(lambda x: ops.sum(ops.mul(masked_softmax(x, mask), w)), Tensor(rng.normal(size=4)))
        assert err < 1e-4


class TestLinear:
    def test_identity_weight(self, rng):
        x = rng.normal(size=(3, 4))
        out = linear(Tensor(x), Tensor(np.eye(4)), Tensor(np.zeros(4)))
        np.testing.assert_array_equal(out.values, x)

    def test_zero_input_gives_bias(self):
        bias = np.array([1.0, -2.0])
        out = linear(Tensor(np.zeros((3, 4))), Tensor(np.ones((4, 2))), Tensor(bias))
        np.testing.assert_array_equal(out.values, np.tile(bias, (3, 1)))

    def test_matches_matmul_plus_add(self, rng):
        x, w, b = Tensor(rng.normal(size=(5, 3))), Tensor(rng.normal(size=(3, 2))), Tensor(rng.normal(size=2))
        np.testing.assert_allclose(linear(x, w, b).values, ops.add(matmul(x, w), b).values, atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            linear(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))))


class TestBilinearSample:
    def test_lattice_point(self, rng):
        fmap = rng.normal(size=(4, 5, 3))
        out = bilinear_sample(Tensor(fmap), np.array([[2.0, 1.0]]))
        np.testing.assert_allclose(out.values[0], fmap[1, 2], atol=1e-15)

    def test_midpoint_is_average(self, rng):
        fmap = rng.normal(size=(4, 5, 3))
        out = bilinear_sample(Tensor(fmap), np.array([[2.5, 1.0]]))
        np.testing.assert_allclose(out.values[0], (fmap[1, 2] + fmap[1, 3]) / 2, atol=1e-12)

    def test_four_corner_oracle(self, rng):
        fmap = rng.normal(size=(4, 5, 2))
        u, v = 1.3, 2.6
        expected = (
            fmap[2, 1] * 0.7 * 0.4 + fmap[2, 2] * 0.3 * 0.4 + fmap[3, 1] * 0.7 * 0.6 + fmap[3, 2] * 0.3 * 0.6
        )
        np.testing.assert_allclose(bilinear_sample(Tensor(fmap), np.array([[u, v]])).values[0], expected, atol=1e-12)

    def test_far_outside_is_zero(self, rng):
        fmap = rng.normal(size=(4, 5, 2))
        out = bilinear_sample(Tensor(fmap), np.array([[-1.5, 1.0], [7.0, 2.0], [2.0, 9.0]]))
        assert np.all(out.values == 0.0)

    def test_one_cell_outside_is_zero(self, rng):
        fmap = rng.normal(size=(4, 5, 2))
        out = bilinear_sample(Tensor(fmap), np.array([[-1.0, 1.0], [5.0, 2.0], [2.0, -1.0], [3.0, 4.0]]))
        assert np.all(out.values == 0.0)

    def test_border_band_fades_to_zero(self, rng):
        fmap = rng.normal(size=(4, 5, 2))
        out = bilinear_sample(Tensor(fmap), np.array([[-0.5, 1.0], [4.25, 2.0]]))
        np.testing.assert_allclose(out.values[0], 0.5 * fmap[1, 0], atol=1e-15)
        np.testing.assert_allclose(out.values[1], 0.75 * fmap[2, 4], atol=1e-15)

    def test_linear_in_featmap(self, rng):
        a, b = rng.normal(size=(3, 4, 2)), rng.normal(size=(3, 4, 2))
        pts = rng.uniform(-1, 4, size=(6, 2))
        combined = bilinear_sample(Tensor(2.0 * a - 0.5 * b), pts).values
        separate = 2.0 * bilinear_sample(Tensor(a), pts).values - 0.5 * bilinear_sample(Tensor(b), pts).values
        np.testing.assert_allclose(combined, separate, atol=1e-12)

    def test_gradients_to_featmap_and_points(self, rng):
        fmap = Tensor(rng.normal(size=(3, 4, 2)))
        pts = rng.uniform(0.1, 2.0, size=(3, 2)) + 0.05
        assert finite_diff_check(lambda f: ops.sum(bilinear_sample(f, pts)), fmap) < 1e-6
        assert finite_diff_check(lambda p: square_sum(bilinear_sample(fmap, p)), Tensor(pts)) < 1e-4


class TestBackward:
    def test_sum_gives_ones(self, rng):
        x = param(rng.normal(size=(2, 3)))
        with Tape():
            loss = ops.sum(x)
        backward(loss)
        np.testing.assert_array_equal(x.grad, np.ones((2, 3)))

    def test_half_squared_norm(self, rng):
        x = param(rng.normal(size=5))
        with Tape():
            loss = ops.mul(ops.sum(ops.mul(x, x)), 0.5)
        backward(loss)
        np.testing.assert_allclose(x.grad, x.values, atol=1e-15)

    def test_non_scalar_loss(self):
        x = param(np.ones(3))
        with Tape():
            y = ops.mul(x, 2.0)
        with pytest.raises(UsageError):
            backward(y)

    def test_reverse_order_of_recording(self):
        x = param(np.array([1.0, 2.0]))
        with Tape() as tape:
            a = ops.mul(x, 3.0)
            b = ops.add(a, x)
            loss = ops.sum(b)
        assert tape.nodes == [a, b, loss]
        tape.backward(loss)
        np.testing.assert_array_equal(x.grad, [4.0, 4.0])

    def test_ops_outside_tape_are_not_recorded(self):
        x = param(np.ones(2))
        y = ops.sum(ops.mul(x, 2.0))
        with pytest.raises(UsageError):
            backward(y)

    def test_forward_is_deterministic(self, rng):
        store = ParameterStore(np.random.default_rng(0))
        attn = MultiHeadAttention(store, "attn", 8, 2)
        x = Tensor(rng.normal(size=(5, 8)))
        assert np.array_equal(attn(x, x, x).values, attn(x, x, x).values)


class TestFiniteDiffCheck:
    def test_sum_is_exact(self, rng):
        assert finite_diff_check(ops.sum, Tensor(rng.normal(size=(3, 3)))) < 1e-10

    def test_restores_values(self, rng):
        values = rng.normal(size=4)
        x = Tensor(values.copy())
        finite_diff_check(lambda t: ops.sum(ops.exp(t)), x)
        np.testing.assert_array_equal(x.values, values)

    @pytest.mark.parametrize(
        "fn",
        [
            lambda x: ops.sum(ops.sigmoid(x)),
            lambda x: ops.sum(ops.log(ops.add(ops.mul(x, x), 1.0))),
            lambda x: ops.sum(ops.div(x, ops.add(ops.abs(x), 2.0))),
            lambda x: ops.sum(ops.mul(layer_norm(x), np.arange(4.0))),
            lambda x: ops.mean(ops.power(ops.softmax(x), 2.0)),
            lambda x: ops.sum(ops.mul(ops.transpose(x, (1, 0)), np.arange(12.0).reshape(4, 3) / 7.0)),
            lambda x: ops.sum(ops.gather_rows(x, np.array([2, 0, 2]))),
            lambda x: square_sum(ops.segment_sum(x, np.array([1, 1, 0]), 2)),
        ],
    )
    def test_primitives(self, rng, fn):
        assert finite_diff_check(fn, Tensor(rng.normal(size=(3, 4)))) < 1e-4

    def test_attention_block(self, rng):
        store = ParameterStore(np.random.default_rng(3))
        norm = LayerNorm(store, "norm", 8)
        attn = MultiHeadAttention(store, "attn", 8, 2)
        ffn = FeedForward(store, "ffn", 8, 16)
        mask = np.array([[0.0, 0.0, -np.inf], [0.0, 0.0, -np.inf], [-np.inf, -np.inf, 0.0]])

        def block(x):
            h = norm(x)
            return square_sum(ffn(ops.add(x, attn(h, h, h, mask))))

        assert finite_diff_check(block, Tensor(rng.normal(size=(3, 8)))) < 1e-4


def test_suffix_broadcast_only():
    ops.add(Tensor(np.zeros((2, 3))), Tensor(np.ones(3)))
    with pytest.raises(ShapeError):
        ops.add(Tensor(np.zeros((2, 3))), Tensor(np.ones((2, 1))))


def test_parameter_store_is_seeded():
    a = ParameterStore(np.random.default_rng(5)).create("w", (3, 4))
    b = ParameterStore(np.random.default_rng(5)).create("w", (3, 4))
    assert np.array_equal(a.values, b.values)
    store = ParameterStore(np.random.default_rng(5))
    store.create("w", (2,))
    with pytest.raises(UsageError):
        store.create("w", (2,))
