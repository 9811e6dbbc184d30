import numpy as np
import pytest

from modir import autodiff as ad
from modir.autodiff import Tensor

from helpers import finite_difference, grad_of, rel_err


def check_grad(build, param, h=1e-5, tol=1e-5):
    """Compare tape gradient of build() (a scalar) against central differences."""
    (g,) = grad_of(build, [param])

    def value():
        ad.reset_tape()
        return float(build().data)

    fd = finite_difference(value, param.data, h=h)
    assert rel_err(g, fd) <= tol, f"gradient mismatch: {rel_err(g, fd)}"


class TestArithmetic:
    def test_mean_of_vector(self):
        ad.reset_tape()
        assert ad.reduce_mean(Tensor([1.0, 2.0, 3.0])).item() == 2.0

    def test_diff_definition(self):
        ad.reset_tape()
        out = ad.diff(Tensor([1.0, 3.0, 6.0]), axis=0)
        np.testing.assert_array_equal(out.data, [2.0, 3.0])

    def test_mean_square_gradient_is_2x_over_n(self, rng):
        x = Tensor(rng.standard_normal(7), requires_grad=True)
        (g,) = grad_of(lambda: ad.reduce_mean(ad.square(x)), [x])
        np.testing.assert_allclose(g, 2.0 * x.data / 7.0, rtol=1e-12)
        check_grad(lambda: ad.reduce_mean(ad.square(x)), x)

    def test_division_by_zero_propagates_inf_and_flags_tape(self):
        ad.reset_tape()
        x = Tensor([1.0, 2.0], requires_grad=True)
        out = ad.div(x, Tensor([1.0, 0.0]))
        assert np.isinf(out.data[1])
        assert not ad.tape_healthy()
        ad.reset_tape()
        assert ad.tape_healthy()

    def test_broadcasting_grad(self, rng):
        a = Tensor(rng.standard_normal((2, 3, 4)), requires_grad=True)
        b = Tensor(rng.standard_normal((1, 3, 1)), requires_grad=True)
        check_grad(lambda: ad.reduce_sum(ad.mul(a, b)), a)
        check_grad(lambda: ad.reduce_mean(ad.add(a, ad.square(b))), b)

    def test_reductions_with_axis(self, rng):
        x = Tensor(rng.standard_normal((3, 4, 5)), requires_grad=True)
        check_grad(lambda: ad.reduce_sum(ad.square(ad.reduce_mean(x, axis=(1, 2)))), x)

    def test_concat_transpose_getitem(self, rng):
        a = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
        b = Tensor(rng.standard_normal((2, 2)), requires_grad=True)

        def build():
            c = ad.concat([a, b], axis=1)
            t = ad.transpose(c, (1, 0))
            return ad.reduce_sum(ad.square(t[1:4, :]))

        check_grad(build, a)
        check_grad(build, b)

    def test_expand_heads_sums_backward(self, rng):
        x = Tensor(rng.standard_normal((1, 2, 3)), requires_grad=True)
        check_grad(lambda: ad.reduce_sum(ad.square(ad.expand_heads(x, 5))), x)


class TestLeakyRelu:
    def test_definition(self):
        ad.reset_tape()
        out = ad.leaky_relu(Tensor([-1.0, 0.0, 2.0]), slope=0.2)
        np.testing.assert_allclose(out.data, [-0.2, 0.0, 2.0])

    def test_zero_slope_is_relu(self):
        ad.reset_tape()
        out = ad.leaky_relu(Tensor([-3.0, 4.0]), slope=0.0)
        np.testing.assert_array_equal(out.data, [0.0, 4.0])

    def test_gradient_away_from_kink(self, rng):
        x = rng.standard_normal(64)
        x[np.abs(x) < 1e-2] += 0.1  # keep clear of the kink for finite differences
        t = Tensor(x, requires_grad=True)
        check_grad(lambda: ad.reduce_sum(ad.square(ad.leaky_relu(t, 0.2))), t, tol=1e-6)

    def test_slope_validation(self):
        with pytest.raises(ValueError):
            ad.leaky_relu(Tensor([1.0]), slope=1.5)


class TestConv2d:
    def test_identity_kernel(self, rng):
        ad.reset_tape()
        x = Tensor(rng.random((1, 1, 3, 3)))
        k = Tensor([[[[1.0]]]])
        out = ad.conv2d(x, k, stride=1, padding=0)
        np.testing.assert_array_equal(out.data, x.data)

    def test_ones_kernel_sums_window(self):
        ad.reset_tape()
        x = Tensor(np.ones((1, 1, 4, 4)))
        k = Tensor(np.ones((1, 1, 3, 3)))
        out = ad.conv2d(x, k)
        assert out.shape == (1, 1, 2, 2)
        np.testing.assert_array_equal(out.data, np.full((1, 1, 2, 2), 9.0))

    def test_channel_mismatch_raises(self):
        with pytest.raises(ad.ShapeError):
            ad.conv2d(Tensor(np.zeros((1, 2, 5, 5))), Tensor(np.zeros((1, 3, 3, 3))))

    def test_output_extent_with_stride_and_padding(self, rng):
        ad.reset_tape()
        x = Tensor(rng.random((2, 3, 9, 11)))
        k = Tensor(rng.random((4, 3, 3, 3)))
        out = ad.conv2d(x, k, stride=2, padding=1)
        assert out.shape == (2, 4, 5, 6)

    def test_kernel_gradient_matches_finite_differences(self, rng):
        x = Tensor(rng.random((1, 1, 5, 5)))
        k = Tensor(rng.standard_normal((1, 1, 3, 3)), requires_grad=True)
        check_grad(lambda: ad.reduce_sum(ad.conv2d(x, k)), k, tol=1e-6)

    def test_input_gradient_matches_finite_differences(self, rng):
        x = Tensor(rng.random((2, 2, 6, 6)), requires_grad=True)
        k = Tensor(rng.standard_normal((3, 2, 3, 3)))
        check_grad(lambda: ad.reduce_sum(ad.square(ad.conv2d(x, k, stride=2, padding=1))), x)

    def test_heads_variant_matches_per_head_conv(self, rng):
        ad.reset_tape()
        x = Tensor(rng.random((3, 2, 6, 6)))
        k = Tensor(rng.standard_normal((3, 4, 2, 3, 3)))
        out = ad.conv2d_heads(x, k, stride=1, padding=1)
        for i in range(3):
            single = ad.conv2d(Tensor(x.data[i : i + 1]), Tensor(k.data[i]), stride=1, padding=1)
            np.testing.assert_allclose(out.data[i], single.data[0], rtol=1e-12)

    def test_heads_variant_gradients(self, rng):
        x = Tensor(rng.random((2, 2, 5, 5)), requires_grad=True)
        k = Tensor(rng.standard_normal((2, 3, 2, 3, 3)), requires_grad=True)
        check_grad(lambda: ad.reduce_mean(ad.square(ad.conv2d_heads(x, k, padding=1))), x)
        check_grad(lambda: ad.reduce_mean(ad.square(ad.conv2d_heads(x, k, padding=1))), k)

    def test_same_size_path_matches_im2col_path(self, rng):
        # stride-1 same-pad uses shifted matmuls; cross-check against the
        # generic path by embedding it in a padded stride-1 call
        x = rng.random((2, 3, 8, 8))
        k = rng.standard_normal((4, 3, 3, 3))
        ad.reset_tape()
        fast = ad.conv2d(Tensor(x), Tensor(k), stride=1, padding=1)
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        slow = ad.conv2d(Tensor(xp), Tensor(k), stride=1, padding=0)
        np.testing.assert_allclose(fast.data, slow.data, atol=1e-12)

    def test_one_by_one_kernel_gradients(self, rng):
        x = Tensor(rng.random((2, 3, 4, 4)), requires_grad=True)
        k = Tensor(rng.standard_normal((2, 3, 1, 1)), requires_grad=True)
        check_grad(lambda: ad.reduce_sum(ad.square(ad.conv2d(x, k))), x)
        check_grad(lambda: ad.reduce_sum(ad.square(ad.conv2d(x, k))), k)


class TestWindowSum:
    def test_matches_ones_kernel_conv(self, rng):
        ad.reset_tape()
        x = Tensor(rng.random((2, 3, 12, 12)))
        ws = ad.window_sum(x, 5)
        for c in range(3):
            ref = ad.conv2d(
                Tensor(x.data[:, c : c + 1]), Tensor(np.ones((1, 1, 5, 5))), stride=1, padding=0
            )
            np.testing.assert_allclose(ws.data[:, c : c + 1], ref.data, atol=1e-9)

    def test_gradient(self, rng):
        x = Tensor(rng.random((1, 2, 9, 9)), requires_grad=True)
        check_grad(lambda: ad.reduce_mean(ad.square(ad.window_sum(x, 3))), x)

    def test_even_window_rejected(self):
        with pytest.raises(ValueError):
            ad.window_sum(Tensor(np.zeros((1, 1, 4, 4))), 4)


class TestUpsampleBilinear:
    def test_factor_one_is_identity(self, rng):
        ad.reset_tape()
        x = Tensor(rng.random((1, 2, 4, 4)))
        np.testing.assert_array_equal(ad.upsample_bilinear(x, 1).data, x.data)

    def test_constant_stays_constant(self):
        ad.reset_tape()
        x = Tensor(np.full((1, 1, 3, 5), 0.7))
        out = ad.upsample_bilinear(x, 3)
        assert out.shape == (1, 1, 9, 15)
        np.testing.assert_allclose(out.data, 0.7, rtol=1e-12)

    def test_two_by_two_against_sampling_formula(self):
        ad.reset_tape()
        x = Tensor(np.array([[0.0, 1.0], [2.0, 3.0]])[None, None])
        out = ad.upsample_bilinear(x, 2).data[0, 0]
        # direct evaluation: sample centers at (i + 0.5)/2 - 0.5, clamped
        expected = np.empty((4, 4))
        src = np.clip((np.arange(4) + 0.5) / 2 - 0.5, 0.0, 1.0)
        for i, sy in enumerate(src):
            for j, sx in enumerate(src):
                y0, x0 = int(np.floor(sy)), int(np.floor(sx))
                y0, x0 = min(y0, 0), min(x0, 0)
                fy, fx = sy - y0, sx - x0
                v = x.data[0, 0]
                expected[i, j] = (
                    (1 - fy) * ((1 - fx) * v[y0, x0] + fx * v[y0, x0 + 1])
                    + fy * ((1 - fx) * v[y0 + 1, x0] + fx * v[y0 + 1, x0 + 1])
                )
        np.testing.assert_allclose(out, expected, rtol=1e-12)

    def test_gradient(self, rng):
        x = Tensor(rng.random((1, 2, 3, 4)), requires_grad=True)
        check_grad(lambda: ad.reduce_sum(ad.square(ad.upsample_bilinear(x, 2))), x, tol=1e-6)


class TestGridSample:
    def test_identity_grid_returns_input(self, rng):
        ad.reset_tape()
        x = Tensor(rng.random((1, 2, 5, 7)))
        out = ad.grid_sample(x, ad.identity_grid(5, 7))
        np.testing.assert_allclose(out.data, x.data, rtol=1e-12)

    def test_integer_shift_with_border_clamp(self, rng):
        ad.reset_tape()
        x = Tensor(rng.random((1, 1, 4, 4)))
        grid = ad.identity_grid(4, 4)
        grid.data[..., 0] += 1.0
        out = ad.grid_sample(x, grid).data[0, 0]
        np.testing.assert_allclose(out[:, :-1], x.data[0, 0, :, 1:], rtol=1e-12)
        np.testing.assert_allclose(out[:, -1], x.data[0, 0, :, -1], rtol=1e-12)

    def test_coords_gradient_interior(self, rng):
        x = Tensor(rng.random((1, 2, 8, 8)))
        coords = ad.identity_grid(6, 6)
        coords.data += 1.0 + rng.random((1, 6, 6, 2)) * 0.4  # interior, non-integer
        coords.requires_grad = True
        check_grad(lambda: ad.reduce_sum(ad.grid_sample(x, coords)), coords, tol=1e-5)

    def test_image_gradient(self, rng):
        x = Tensor(rng.random((2, 1, 6, 6)), requires_grad=True)
        coords = ad.identity_grid(5, 5, n=2)
        coords.data += rng.random((2, 5, 5, 2)) * 0.3 + 0.2
        check_grad(lambda: ad.reduce_sum(ad.square(ad.grid_sample(x, coords))), x)


class TestBackward:
    def test_sum_gradient_is_ones(self):
        x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        (g,) = grad_of(lambda: ad.reduce_sum(x), [x])
        np.testing.assert_array_equal(g, np.ones(3))

    def test_backward_from_non_scalar_raises(self):
        ad.reset_tape()
        x = Tensor([1.0, 2.0], requires_grad=True)
        y = ad.square(x)
        with pytest.raises(ValueError):
            ad.backward(y)

    def test_linearity_of_weighted_losses(self, rng):
        x = Tensor(rng.standard_normal(9), requires_grad=True)
        w1, w2 = 0.3, 1.7

        def l1():
            return ad.reduce_mean(ad.square(x))

        def l2():
            return ad.reduce_mean(ad.square(ad.sub(x, 1.0)))

        (g1,) = grad_of(l1, [x])
        (g2,) = grad_of(l2, [x])
        (g,) = grad_of(lambda: ad.add(ad.mul(l1(), w1), ad.mul(l2(), w2)), [x])
        np.testing.assert_allclose(g, w1 * g1 + w2 * g2, rtol=1e-12)

    def test_repeated_backward_accumulates(self):
        x = Tensor([1.0, 1.0], requires_grad=True)
        ad.reset_tape()
        loss = ad.reduce_sum(x)
        ad.backward(loss)
        ad.backward(loss)
        np.testing.assert_array_equal(x.grad, [2.0, 2.0])

    def test_micro_model_gradient_vs_finite_differences(self, rng):
        # conv -> leaky-relu -> upsample -> grid_sample -> mean pipeline
        k = Tensor(rng.standard_normal((1, 1, 3, 3)) * 0.5, requires_grad=True)
        b = Tensor(rng.standard_normal(1), requires_grad=True)
        img = Tensor(rng.random((1, 1, 6, 6)))
        coords = ad.identity_grid(6, 6)
        coords.data += 0.3

        def build():
            h = ad.conv2d(img, k, stride=1, padding=1)
            h = ad.leaky_relu(ad.add(h, b), 0.2)
            h = ad.upsample_bilinear(h, 2)
            h = ad.grid_sample(h, ad.identity_grid(12, 12))
            return ad.reduce_mean(ad.square(h))

        check_grad(build, k)
        check_grad(build, b)

    def test_determinism_bit_identical(self, rng):
        data = rng.standard_normal((1, 2, 8, 8))
        kdata = rng.standard_normal((2, 2, 3, 3))

        def run():
            x = Tensor(data.copy(), requires_grad=True)
            k = Tensor(kdata.copy(), requires_grad=True)
            ad.reset_tape()
            loss = ad.reduce_mean(ad.square(ad.leaky_relu(ad.conv2d(x, k, padding=1), 0.2)))
            ad.backward(loss)
            return loss.data.copy(), x.grad.copy(), k.grad.copy()

        la, xa, ka = run()
        lb, xb, kb = run()
        assert np.array_equal(la, lb) and np.array_equal(xa, xb) and np.array_equal(ka, kb)
