"""Stateful layer modules wrapping the functional ops.

A module owns its parameters, caches the forward context, and exposes
``backward(grad) -> grad_input`` which accumulates parameter gradients.
Training runs own their model exclusively, so a single cached context per
module is enough.

Modules taking a `layout` argument run either the channels-first reference
path ("nchw") or the channels-last compute core ("nhwc"); the models use
"nhwc" throughout for speed.
"""

from __future__ import annotations

import numpy as np

from . import functional as F
from .tensor import Tensor, fan_in_uniform, ones, zeros


class Module:
    def parameters(self):
        """Yield (name, Tensor) pairs for all trainable parameters."""
        return iter(())

    def buffers(self):
        """Yield (name, ndarray) pairs for non-trainable state (running stats)."""
        return iter(())

    def zero_grad(self):
        for _, p in self.parameters():
            p.zero_grad()


class Conv2d(Module):
    def __init__(self, c_in, c_out, kernel, stride=1, padding=0, rng=None,
                 dtype=np.float32, layout="nchw"):
        self.stride = stride
        self.padding = padding
        self.layout = layout
        rng = rng or np.random.default_rng(0)
        fan_in = c_in * kernel * kernel
        # one canonical weight layout per module so checkpoints are stable
        shape = (c_out, c_in, kernel, kernel) if layout == "nchw" \
            else (kernel, kernel, c_in, c_out)
        self.weight = fan_in_uniform(rng, shape, fan_in, dtype)
        self.bias = fan_in_uniform(rng, (c_out,), fan_in, dtype)
        self._ctx = None

    def forward(self, x, train=False):
        fwd = F.conv2d_forward if self.layout == "nchw" else F.conv2d_nhwc_forward
        out, self._ctx = fwd(x, self.weight.data, self.bias.data, self.stride, self.padding)
        return out

    def backward(self, grad_out):
        bwd = F.conv2d_backward if self.layout == "nchw" else F.conv2d_nhwc_backward
        dx, dw, db = bwd(self._ctx, grad_out)
        self.weight.accumulate_grad(dw)
        self.bias.accumulate_grad(db)
        self._ctx = None
        return dx

    def parameters(self):
        yield "weight", self.weight
        yield "bias", self.bias


class ConvTranspose2d(Module):
    def __init__(self, c_in, c_out, kernel, stride=1, padding=0, rng=None,
                 dtype=np.float32, layout="nchw"):
        self.stride = stride
        self.padding = padding
        self.layout = layout
        rng = rng or np.random.default_rng(0)
        fan_in = c_in * kernel * kernel
        shape = (c_in, c_out, kernel, kernel) if layout == "nchw" \
            else (kernel, kernel, c_out, c_in)
        self.weight = fan_in_uniform(rng, shape, fan_in, dtype)
        self.bias = fan_in_uniform(rng, (c_out,), fan_in, dtype)
        self._ctx = None

    def forward(self, x, train=False):
        fwd = F.transposed_conv2d_forward if self.layout == "nchw" \
            else F.transposed_conv2d_nhwc_forward
        out, self._ctx = fwd(x, self.weight.data, self.bias.data, self.stride, self.padding)
        return out

    def backward(self, grad_out):
        bwd = F.transposed_conv2d_backward if self.layout == "nchw" \
            else F.transposed_conv2d_nhwc_backward
        dx, dw, db = bwd(self._ctx, grad_out)
        self.weight.accumulate_grad(dw)
        self.bias.accumulate_grad(db)
        self._ctx = None
        return dx

    def parameters(self):
        yield "weight", self.weight
        yield "bias", self.bias


class BatchNorm2d(Module):
    def __init__(self, channels, momentum=0.1, eps=1e-5, dtype=np.float32, layout="nchw"):
        self.gamma = ones((channels,), dtype)
        self.beta = zeros((channels,), dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.momentum = momentum
        self.eps = eps
        self.layout = layout
        self._ctx = None

    def forward(self, x, train=False):
        fwd = F.batchnorm_forward if self.layout == "nchw" else F.batchnorm_nhwc_forward
        out, self._ctx = fwd(x, self.gamma.data, self.beta.data,
                             self.running_mean, self.running_var,
                             train, self.momentum, self.eps)
        return out

    def backward(self, grad_out):
        dx, dgamma, dbeta = F.batchnorm_backward(self._ctx, grad_out)
        self.gamma.accumulate_grad(dgamma)
        self.beta.accumulate_grad(dbeta)
        self._ctx = None
        return dx

    def parameters(self):
        yield "gamma", self.gamma
        yield "beta", self.beta

    def buffers(self):
        yield "running_mean", self.running_mean
        yield "running_var", self.running_var


class ReLU(Module):
    def __init__(self):
        self._mask = None

    def forward(self, x, train=False):
        out, self._mask = F.relu_forward(x)
        return out

    def backward(self, grad_out):
        dx = F.relu_backward(self._mask, grad_out)
        self._mask = None
        return dx


class Dropout(Module):
    def __init__(self, rate):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self._mask = None

    def forward(self, x, train=False, rng=None):
        out, self._mask = F.dropout_forward(x, self.rate, train, rng=rng)
        return out

    def backward(self, grad_out):
        dx = F.dropout_backward(self._mask, grad_out)
        self._mask = None
        return dx


class Upsample2x(Module):
    def __init__(self, layout="nchw"):
        self.channel_axis = 1 if layout == "nchw" else 3
        self._ctx = None

    def forward(self, x, train=False):
        out, self._ctx = F.upsample2x_forward(x, channel_axis=self.channel_axis)
        return out

    def backward(self, grad_out):
        return F.upsample2x_backward(self._ctx, grad_out)


class Linear(Module):
    def __init__(self, n_in, n_out, rng=None, dtype=np.float32):
        rng = rng or np.random.default_rng(0)
        self.weight = fan_in_uniform(rng, (n_out, n_in), n_in, dtype)
        self.bias = fan_in_uniform(rng, (n_out,), n_in, dtype)
        self._ctx = None

    def forward(self, x, train=False):
        out, self._ctx = F.linear_forward(x, self.weight.data, self.bias.data)
        return out

    def backward(self, grad_out):
        dx, dw, db = F.linear_backward(self._ctx, grad_out)
        self.weight.accumulate_grad(dw)
        self.bias.accumulate_grad(db)
        self._ctx = None
        return dx

    def parameters(self):
        yield "weight", self.weight
        yield "bias", self.bias


class SpatialSoftmax(Module):
    def __init__(self, layout="nchw"):
        self.layout = layout
        self._ctx = None

    def forward(self, x, train=False):
        fwd = F.spatial_softmax_forward if self.layout == "nchw" \
            else F.spatial_softmax_nhwc_forward
        out, self._ctx = fwd(x)
        return out

    def backward(self, grad_out):
        dx = F.spatial_softmax_backward(self._ctx, grad_out)
        self._ctx = None
        return dx


def named_parameters(module_pairs):
    """Flatten [(prefix, module), ...] into dotted (name, Tensor) pairs."""
    for prefix, mod in module_pairs:
        for name, p in mod.parameters():
            yield f"{prefix}.{name}", p


def named_buffers(module_pairs):
    for prefix, mod in module_pairs:
        for name, b in mod.buffers():
            yield f"{prefix}.{name}", b
