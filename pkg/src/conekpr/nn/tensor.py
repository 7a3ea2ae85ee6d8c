"""Dense tensor container used for model parameters and buffers.

Activations flow through the layer functions as plain numpy arrays; `Tensor`
wraps a value array together with an optional gradient buffer of the same
length, which is all the fixed layer set needs.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Raised when an operation receives arrays of incompatible shapes."""


class Tensor:
    """A shaped array of real values with an optional gradient buffer."""

    __slots__ = ("data", "grad")

    def __init__(self, data, dtype=None):
        self.data = np.asarray(data, dtype=dtype)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def values(self):
        """Flat row-major view of the values."""
        return self.data.reshape(-1)

    def zero_grad(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        else:
            self.grad.fill(0.0)

    def accumulate_grad(self, g):
        g = np.asarray(g)
        if g.shape != self.data.shape:
            raise ShapeError(
                f"gradient shape {g.shape} does not match value shape {self.data.shape}"
            )
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad += g

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.data)))

    def copy(self) -> "Tensor":
        t = Tensor(self.data.copy())
        if self.grad is not None:
            t.grad = self.grad.copy()
        return t

    def __repr__(self):
        return f"Tensor(shape={tuple(self.shape)}, dtype={self.data.dtype})"


Parameter = Tensor


def fan_in_uniform(rng: np.random.Generator, shape, fan_in: int, dtype=np.float32) -> Tensor:
    """Fan-in-scaled uniform initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    if fan_in <= 0:
        raise ValueError(f"fan_in must be positive, got {fan_in}")
    limit = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-limit, limit, size=shape).astype(dtype))


def zeros(shape, dtype=np.float32) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype))


def ones(shape, dtype=np.float32) -> Tensor:
    return Tensor(np.ones(shape, dtype=dtype))
