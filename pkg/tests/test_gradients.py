"""Finite-difference checks for every layer's backward pass.

All checks run in double precision with central differences at step 1e-5 and
require relative error < 1e-4, per the gradient-suite acceptance bar.
"""

import numpy as np
import pytest

from conekpr.nn import functional as F
from conekpr.nn.gradcheck import check_gradient, numeric_gradient, relative_error

STEP = 1e-5
TOL = 1e-4


def scalar_loss(out, probe):
    return float((out * probe).sum())


class TestConvGradients:
    @pytest.mark.parametrize("shape,c_out,k,stride,padding", [
        ((1, 4, 4), 2, 3, 1, 1),
        ((2, 5, 5), 3, 3, 2, 1),
        ((3, 6, 6), 2, 1, 1, 0),
        ((2, 7, 5), 2, 3, 2, 0),
    ])
    def test_conv2d_all_inputs(self, shape, c_out, k, stride, padding):
        rng = np.random.default_rng(hash((shape, c_out, k, stride, padding)) % 2**32)
        x = rng.standard_normal(shape)
        w = rng.standard_normal((c_out, shape[0], k, k))
        b = rng.standard_normal(c_out)
        out, ctx = F.conv2d_forward(x, w, b, stride, padding)
        probe = rng.standard_normal(out.shape)
        dx, dw, db = F.conv2d_backward(ctx, probe)

        check_gradient(lambda v: scalar_loss(F.conv2d(v, w, b, stride, padding), probe),
                       dx, x, STEP, TOL)
        check_gradient(lambda v: scalar_loss(F.conv2d(x, v, b, stride, padding), probe),
                       dw, w, STEP, TOL)
        check_gradient(lambda v: scalar_loss(F.conv2d(x, w, v, stride, padding), probe),
                       db, b, STEP, TOL)

    def test_conv2d_sum_of_random_input(self):
        rng = np.random.default_rng(77)
        x = rng.standard_normal((1, 4, 4))
        w = rng.standard_normal((2, 1, 3, 3))
        b = rng.standard_normal(2)
        out, ctx = F.conv2d_forward(x, w, b, 1, 1)
        dx, _, _ = F.conv2d_backward(ctx, np.ones_like(out))
        num = numeric_gradient(lambda v: float(F.conv2d(v, w, b, 1, 1).sum()), x, STEP)
        assert relative_error(dx, num) < TOL


class TestTransposedConvGradients:
    @pytest.mark.parametrize("shape,c_out,k,stride,padding", [
        ((2, 3, 3), 3, 2, 2, 0),
        ((1, 4, 4), 2, 3, 1, 1),
        ((2, 3, 4), 2, 4, 2, 1),
    ])
    def test_all_inputs(self, shape, c_out, k, stride, padding):
        rng = np.random.default_rng(hash(("t", shape, c_out, k)) % 2**32)
        x = rng.standard_normal(shape)
        w = rng.standard_normal((shape[0], c_out, k, k))
        b = rng.standard_normal(c_out)
        out, ctx = F.transposed_conv2d_forward(x, w, b, stride, padding)
        probe = rng.standard_normal(out.shape)
        dx, dw, db = F.transposed_conv2d_backward(ctx, probe)

        check_gradient(lambda v: scalar_loss(F.transposed_conv2d(v, w, b, stride, padding), probe),
                       dx, x, STEP, TOL)
        check_gradient(lambda v: scalar_loss(F.transposed_conv2d(x, v, b, stride, padding), probe),
                       dw, w, STEP, TOL)
        check_gradient(lambda v: scalar_loss(F.transposed_conv2d(x, w, v, stride, padding), probe),
                       db, b, STEP, TOL)


class TestBatchNormGradients:
    def test_train_mode_all_inputs(self):
        rng = np.random.default_rng(13)
        x = rng.standard_normal((4, 2, 3, 3))
        gamma = rng.standard_normal(2) + 1.5
        beta = rng.standard_normal(2)
        probe = rng.standard_normal(x.shape)

        def run(xv, gv, bv):
            rm, rv = np.zeros(2), np.ones(2)
            out = F.batchnorm(xv, gv, bv, rm, rv, train=True)
            return scalar_loss(out, probe)

        rm, rv = np.zeros(2), np.ones(2)
        out, ctx = F.batchnorm_forward(x, gamma, beta, rm, rv, train=True)
        dx, dgamma, dbeta = F.batchnorm_backward(ctx, probe)
        check_gradient(lambda v: run(v, gamma, beta), dx, x, STEP, TOL)
        check_gradient(lambda v: run(x, v, beta), dgamma, gamma, STEP, TOL)
        check_gradient(lambda v: run(x, gamma, v), dbeta, beta, STEP, TOL)

    def test_eval_mode_input_grad(self):
        rng = np.random.default_rng(14)
        x = rng.standard_normal((2, 3, 2, 2))
        gamma = rng.standard_normal(3)
        beta = rng.standard_normal(3)
        rm = rng.standard_normal(3)
        rv = rng.random(3) + 0.5
        out, ctx = F.batchnorm_forward(x, gamma, beta, rm, rv, train=False)
        probe = rng.standard_normal(out.shape)
        dx, _, _ = F.batchnorm_backward(ctx, probe)
        check_gradient(
            lambda v: scalar_loss(F.batchnorm(v, gamma, beta, rm.copy(), rv.copy(), False), probe),
            dx, x, STEP, TOL)


class TestElementwiseGradients:
    def test_relu(self):
        rng = np.random.default_rng(15)
        x = rng.standard_normal((3, 5, 5)) + 0.1  # keep clear of the kink
        x[np.abs(x) < 1e-3] = 0.5
        out, mask = F.relu_forward(x)
        probe = rng.standard_normal(out.shape)
        dx = F.relu_backward(mask, probe)
        check_gradient(lambda v: scalar_loss(F.relu(v), probe), dx, x, STEP, TOL)

    def test_dropout_fixed_mask(self):
        rng = np.random.default_rng(16)
        x = rng.standard_normal((4, 6))
        out, mask = F.dropout_forward(x, 0.4, train=True, seed=5)
        probe = rng.standard_normal(out.shape)
        dx = F.dropout_backward(mask, probe)
        check_gradient(lambda v: scalar_loss(v * mask, probe), dx, x, STEP, TOL)

    def test_upsample2x(self):
        rng = np.random.default_rng(17)
        x = rng.standard_normal((2, 3, 4))
        out, ctx = F.upsample2x_forward(x)
        probe = rng.standard_normal(out.shape)
        dx = F.upsample2x_backward(ctx, probe)
        check_gradient(lambda v: scalar_loss(F.upsample2x(v), probe), dx, x, STEP, TOL)

    def test_linear_all_inputs(self):
        rng = np.random.default_rng(18)
        x = rng.standard_normal((3, 7))
        w = rng.standard_normal((4, 7))
        b = rng.standard_normal(4)
        out, ctx = F.linear_forward(x, w, b)
        probe = rng.standard_normal(out.shape)
        dx, dw, db = F.linear_backward(ctx, probe)
        check_gradient(lambda v: scalar_loss(F.linear(v, w, b), probe), dx, x, STEP, TOL)
        check_gradient(lambda v: scalar_loss(F.linear(x, v, b), probe), dw, w, STEP, TOL)
        check_gradient(lambda v: scalar_loss(F.linear(x, w, v), probe), db, b, STEP, TOL)

    def test_spatial_softmax(self):
        rng = np.random.default_rng(19)
        x = rng.standard_normal((2, 4, 5))
        out, ctx = F.spatial_softmax_forward(x)
        probe = rng.standard_normal(out.shape)
        dx = F.spatial_softmax_backward(ctx, probe)
        check_gradient(lambda v: scalar_loss(F.spatial_softmax(v), probe), dx, x, STEP, TOL)

    def test_soft_argmax_through_softmax(self):
        rng = np.random.default_rng(20)
        x = rng.standard_normal((1, 5, 6))
        probe = rng.standard_normal(2)

        def run(v):
            p = F.spatial_softmax(v)
            xy = F.soft_argmax(p[0], validate=False)
            return float((xy * probe).sum())

        p, ctx = F.spatial_softmax_forward(x)
        dcoords = probe
        dp = F.soft_argmax_backward(p[0].shape, dcoords)
        dx = F.spatial_softmax_backward(ctx, dp[None])
        check_gradient(run, dx, x, STEP, TOL)


class TestGlobalPoolGradients:
    def test_global_avg_pool(self):
        rng = np.random.default_rng(21)
        x = rng.standard_normal((2, 3, 4, 4))
        out, ctx = F.global_avg_pool_forward(x)
        probe = rng.standard_normal(out.shape)
        dx = F.global_avg_pool_backward(ctx, probe)

        def run(v):
            o, _ = F.global_avg_pool_forward(v)
            return scalar_loss(o, probe)

        check_gradient(run, dx, x, STEP, TOL)
