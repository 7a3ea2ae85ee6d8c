"""Composite blocks shared by the keypoint networks."""

from __future__ import annotations

import numpy as np

from ..nn import functional as F
from ..nn.layers import BatchNorm2d, Conv2d, ConvTranspose2d, Dropout, Module, ReLU, Upsample2x


class ConvBlock(Module):
    """Two 3x3 convs, each with batch norm and ReLU; optional trailing dropout.

    The first conv carries the stride (2 for encoder downsampling, 1
    elsewhere); padding 1 keeps sizes on the expected grid.
    """

    def __init__(self, c_in, c_out, stride=1, dropout=None, rng=None, dtype=np.float32,
                 layout="nchw"):
        self.conv1 = Conv2d(c_in, c_out, 3, stride=stride, padding=1, rng=rng, dtype=dtype,
                            layout=layout)
        self.bn1 = BatchNorm2d(c_out, dtype=dtype, layout=layout)
        self.relu1 = ReLU()
        self.conv2 = Conv2d(c_out, c_out, 3, stride=1, padding=1, rng=rng, dtype=dtype,
                            layout=layout)
        self.bn2 = BatchNorm2d(c_out, dtype=dtype, layout=layout)
        self.relu2 = ReLU()
        self.dropout = Dropout(dropout) if dropout else None

    def forward(self, x, train=False, rng=None):
        out = self.relu1.forward(self.bn1.forward(self.conv1.forward(x), train))
        out = self.relu2.forward(self.bn2.forward(self.conv2.forward(out), train))
        if self.dropout is not None:
            out = self.dropout.forward(out, train=train, rng=rng)
        return out

    def backward(self, grad):
        if self.dropout is not None:
            grad = self.dropout.backward(grad)
        grad = self.conv2.backward(self.bn2.backward(self.relu2.backward(grad)))
        grad = self.conv1.backward(self.bn1.backward(self.relu1.backward(grad)))
        return grad

    def submodules(self):
        mods = [("conv1", self.conv1), ("bn1", self.bn1), ("conv2", self.conv2),
                ("bn2", self.bn2)]
        return mods

    def parameters(self):
        for name, mod in self.submodules():
            for pname, p in mod.parameters():
                yield f"{name}.{pname}", p

    def buffers(self):
        for name, mod in self.submodules():
            for bname, b in mod.buffers():
                yield f"{name}.{bname}", b


class DecoderStage(Module):
    """Upsample 2x, halve channels, concatenate the skip, then a conv block.

    `upsample="nearest"` (default) is nearest-neighbor followed by a stride-1
    3x3 conv; `upsample="transposed"` swaps in a 2x2 stride-2 transposed conv.
    """

    def __init__(self, c_in, c_skip, c_out, upsample="nearest", rng=None, dtype=np.float32,
                 layout="nchw"):
        self.c_out = c_out
        self.channel_axis = 1 if layout == "nchw" else 3
        if upsample == "nearest":
            self.up = Upsample2x(layout=layout)
            self.proj = Conv2d(c_in, c_out, 3, stride=1, padding=1, rng=rng, dtype=dtype,
                               layout=layout)
        elif upsample == "transposed":
            self.up = None
            self.proj = ConvTranspose2d(c_in, c_out, 2, stride=2, padding=0, rng=rng,
                                        dtype=dtype, layout=layout)
        else:
            raise ValueError(f"unknown upsample mode '{upsample}'")
        self.bn = BatchNorm2d(c_out, dtype=dtype, layout=layout)
        self.relu = ReLU()
        self.block = ConvBlock(c_out + c_skip, c_out, stride=1, rng=rng, dtype=dtype,
                               layout=layout)

    def forward(self, x, skip, train=False):
        u = self.up.forward(x) if self.up is not None else x
        u = self.proj.forward(u)
        u = self.relu.forward(self.bn.forward(u, train))
        ax = self.channel_axis
        spatial = (1, 2) if ax == 3 else (-2, -1)
        if tuple(u.shape[s] for s in spatial) != tuple(skip.shape[s] for s in spatial):
            raise ValueError(
                f"decoder level size {u.shape} does not match skip {skip.shape}"
            )
        cat = np.concatenate([u, skip], axis=ax)
        return self.block.forward(cat, train=train)

    def backward(self, grad):
        dcat = self.block.backward(grad)
        ax = self.channel_axis if dcat.ndim == 4 else self.channel_axis - 1
        sl_u = [slice(None)] * dcat.ndim
        sl_s = [slice(None)] * dcat.ndim
        sl_u[ax] = slice(None, self.c_out)
        sl_s[ax] = slice(self.c_out, None)
        du = dcat[tuple(sl_u)]
        dskip = np.ascontiguousarray(dcat[tuple(sl_s)])
        du = self.proj.backward(self.bn.backward(self.relu.backward(du)))
        if self.up is not None:
            du = self.up.backward(du)
        return du, dskip

    def submodules(self):
        return [("proj", self.proj), ("bn", self.bn), ("block", self.block)]

    def parameters(self):
        for name, mod in self.submodules():
            for pname, p in mod.parameters():
                yield f"{name}.{pname}", p

    def buffers(self):
        for name, mod in self.submodules():
            for bname, b in mod.buffers():
                yield f"{name}.{bname}", b


class ResidualBlock(Module):
    """conv-bn-relu-conv-bn with an additive shortcut and a trailing ReLU.

    The shortcut is the identity when shapes allow, otherwise a strided 1x1
    projection with its own batch norm.
    """

    def __init__(self, c_in, c_out, stride=1, rng=None, dtype=np.float32, layout="nchw"):
        self.conv1 = Conv2d(c_in, c_out, 3, stride=stride, padding=1, rng=rng, dtype=dtype,
                            layout=layout)
        self.bn1 = BatchNorm2d(c_out, dtype=dtype, layout=layout)
        self.relu1 = ReLU()
        self.conv2 = Conv2d(c_out, c_out, 3, stride=1, padding=1, rng=rng, dtype=dtype,
                            layout=layout)
        self.bn2 = BatchNorm2d(c_out, dtype=dtype, layout=layout)
        self.relu_out = ReLU()
        if c_in == c_out and stride == 1:
            self.shortcut_conv = None
            self.shortcut_bn = None
        else:
            self.shortcut_conv = Conv2d(c_in, c_out, 1, stride=stride, padding=0,
                                        rng=rng, dtype=dtype, layout=layout)
            self.shortcut_bn = BatchNorm2d(c_out, dtype=dtype, layout=layout)

    def forward(self, x, train=False):
        branch = self.relu1.forward(self.bn1.forward(self.conv1.forward(x), train))
        branch = self.bn2.forward(self.conv2.forward(branch), train)
        if self.shortcut_conv is not None:
            short = self.shortcut_bn.forward(self.shortcut_conv.forward(x), train)
        else:
            short = x
        return self.relu_out.forward(branch + short)

    def backward(self, grad):
        grad = self.relu_out.backward(grad)
        dbranch = self.conv1.backward(self.bn1.backward(self.relu1.backward(
            self.conv2.backward(self.bn2.backward(grad)))))
        if self.shortcut_conv is not None:
            dshort = self.shortcut_conv.backward(self.shortcut_bn.backward(grad))
        else:
            dshort = grad
        return dbranch + dshort

    def submodules(self):
        mods = [("conv1", self.conv1), ("bn1", self.bn1), ("conv2", self.conv2),
                ("bn2", self.bn2)]
        if self.shortcut_conv is not None:
            mods += [("shortcut_conv", self.shortcut_conv), ("shortcut_bn", self.shortcut_bn)]
        return mods

    def parameters(self):
        for name, mod in self.submodules():
            for pname, p in mod.parameters():
                yield f"{name}.{pname}", p

    def buffers(self):
        for name, mod in self.submodules():
            for bname, b in mod.buffers():
                yield f"{name}.{bname}", b
