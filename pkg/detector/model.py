import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Tuple

import gin
import torch

from .exceptions import InputTooShort, ShapeMismatch
from .layers import (
    EVAL,
    TRAIN,
    Activation,
    BatchNorm2d,
    BidirectionalGRU,
    Conv2d,
    Layer,
    Linear,
    MaxPool2d,
    Sequential,
)

"""
SpecRNet: LFCC map (B, 1, 80, N) -> fake probability (B,)

pre_norm (BN + SELU) -> 3 x (ResBlock -> FMS attention)
-> BN + SELU -> 2 bidirectional GRUs -> fc1 -> fc2 -> sigmoid

Main entry points: build(), SpecRNet.forward(), SpecRNet.backward(),
count_parameters()
"""

EXPECTED_PARAMETERS = 277963
MIN_FRAMES = 64  # six floor-halvings of the time axis must leave >= 1
FMS_MODES = ("scale_add", "scale")
SUMMARIES = ("final_states", "last_step")


@gin.configurable
@dataclass(frozen=True)
class SpecRNetConfig:
    input_channels: int = 1
    block_channels: Tuple[int, int, int] = (20, 64, 64)
    gru_hidden: int = 64
    fc_hidden: int = 128
    leaky_slope: float = 0.3
    input_coeffs: int = 80
    fms_mode: str = "scale_add"
    summary: str = "final_states"

    def __post_init__(self):
        if self.fms_mode not in FMS_MODES:
            raise ValueError(f"fms_mode must be one of {FMS_MODES}")
        if self.summary not in SUMMARIES:
            raise ValueError(f"summary must be one of {SUMMARIES}")
        if self.input_coeffs // 64 != 1:
            raise ValueError("the frequency axis must pool down to exactly 1")

    def to_vector(self):
        """flat float list stored in weight containers"""
        return [
            self.input_channels,
            *self.block_channels,
            self.gru_hidden,
            self.fc_hidden,
            self.leaky_slope,
            self.input_coeffs,
            FMS_MODES.index(self.fms_mode),
            SUMMARIES.index(self.summary),
        ]

    @classmethod
    def from_vector(cls, values):
        values = [float(v) for v in values]
        if len(values) != 10:
            raise ShapeMismatch(f"config vector of length {len(values)}")
        return cls(
            input_channels=int(values[0]),
            block_channels=tuple(int(v) for v in values[1:4]),
            gru_hidden=int(values[4]),
            fc_hidden=int(values[5]),
            leaky_slope=round(values[6], 6),
            input_coeffs=int(values[7]),
            fms_mode=FMS_MODES[int(values[8])],
            summary=SUMMARIES[int(values[9])],
        )


class ResBlock(Layer):
    """Two 3x3 convolutions with a skip path

    main: [BN -> LeakyReLU] (not on the first block) -> conv1 -> BN
            -> LeakyReLU -> conv2
    identity: 1x1 convolution when channel counts differ, else pass-through
    """

    def __init__(self, name, in_channels, out_channels, first, slope, generator, dtype):
        super().__init__()
        layers = []
        if not first:
            layers += [
                BatchNorm2d(f"{name}.bn1", in_channels, dtype=dtype),
                Activation("leaky_relu", slope),
            ]
        self.conv1 = Conv2d(f"{name}.conv1", in_channels, out_channels, 3, generator, dtype)
        layers += [
            self.conv1,
            BatchNorm2d(f"{name}.bn" if first else f"{name}.bn2", out_channels, dtype=dtype),
            Activation("leaky_relu", slope),
        ]
        self.conv2 = Conv2d(f"{name}.conv2", out_channels, out_channels, 3, generator, dtype)
        layers.append(self.conv2)
        self.main = Sequential(*layers)
        self.identity = (
            Conv2d(f"{name}.identity_conv", in_channels, out_channels, 1, generator, dtype)
            if in_channels != out_channels else None
        )
        self._children = [self.main] + ([self.identity] if self.identity else [])

    def forward(self, x, mode=TRAIN):
        out = self.main.forward(x, mode)
        skip = self.identity.forward(x, mode) if self.identity else x
        return out + skip

    def backward(self, grad):
        grad_x = self.main.backward(grad)
        return grad_x + (self.identity.backward(grad) if self.identity else grad)


class FmsAttention(Layer):
    """maxpool -> per-channel sigmoid gate from the pooled map -> maxpool

    s = sigmoid(fc(mean over H, W)); y = y * s + s ("scale_add") or y * s
    """

    def __init__(self, name, channels, generator, dtype, mode="scale_add"):
        super().__init__()
        self.add = mode == "scale_add"
        self.pool_in = MaxPool2d()
        self.fc = Linear(f"{name}.fc", channels, channels, generator, dtype)
        self.gate = Activation("sigmoid")
        self.pool_out = MaxPool2d()
        self._children = [self.pool_in, self.fc, self.gate, self.pool_out]

    def forward(self, x, mode=TRAIN):
        pooled = self.pool_in.forward(x, mode)
        s = self.gate.forward(self.fc.forward(pooled.mean(dim=(2, 3)), mode), mode)
        s_map = s[:, :, None, None]
        scaled = pooled * s_map + s_map if self.add else pooled * s_map
        self._record(mode, pooled, s_map)
        return self.pool_out.forward(scaled, mode)

    def backward(self, grad):
        pooled, s_map = self._recorded()
        grad_scaled = self.pool_out.backward(grad)
        grad_s = (grad_scaled * pooled).sum(dim=(2, 3))
        if self.add:
            grad_s = grad_s + grad_scaled.sum(dim=(2, 3))
        grad_mean = self.fc.backward(self.gate.backward(grad_s))
        area = pooled.shape[2] * pooled.shape[3]
        grad_pooled = grad_scaled * s_map + grad_mean[:, :, None, None] / area
        return self.pool_in.backward(grad_pooled)


class SpecRNet(Layer):
    """Full detector; the named components are the model's children"""

    def __init__(self, cfg=None, seed=0, dtype=torch.float32):
        super().__init__()
        cfg = cfg or SpecRNetConfig()
        self.cfg = cfg
        gen = torch.Generator().manual_seed(seed)
        c1, c2, c3 = cfg.block_channels
        hidden = cfg.gru_hidden
        self.components = OrderedDict(
            pre_norm=Sequential(
                BatchNorm2d("pre_norm", cfg.input_channels, dtype=dtype), Activation("selu")
            ),
            block1=ResBlock("block1", cfg.input_channels, c1, True, cfg.leaky_slope, gen, dtype),
            fms1=FmsAttention("fms1", c1, gen, dtype, cfg.fms_mode),
            block2=ResBlock("block2", c1, c2, False, cfg.leaky_slope, gen, dtype),
            fms2=FmsAttention("fms2", c2, gen, dtype, cfg.fms_mode),
            block3=ResBlock("block3", c2, c3, False, cfg.leaky_slope, gen, dtype),
            fms3=FmsAttention("fms3", c3, gen, dtype, cfg.fms_mode),
            pre_recurrent_norm=Sequential(
                BatchNorm2d("pre_recurrent_norm", c3, dtype=dtype), Activation("selu")
            ),
            gru1=BidirectionalGRU("gru1", c3, hidden, gen, dtype),
            gru2=BidirectionalGRU("gru2", 2 * hidden, hidden, gen, dtype),
            fc1=Linear("fc1", 2 * hidden, cfg.fc_hidden, gen, dtype),
            fc2=Linear("fc2", cfg.fc_hidden, 1, gen, dtype),
        )
        self.sigmoid = Activation("sigmoid")
        self._children = list(self.components.values()) + [self.sigmoid]
        self.trace = OrderedDict()  # output shape of each component, last forward

    @property
    def dtype(self):
        return next(self.parameters()).value.dtype

    def named_parameters(self):
        """OrderedDict {name: Parameter}, running statistics included"""
        return OrderedDict((p.name, p) for p in self.parameters())

    def forward(self, features, mode=TRAIN):
        """Fake probabilities of a batch of LFCC maps

        features (float tensor): (B, 1, n_coeffs, N), N >= 64
        mode (str): "train" (batch statistics), "eval" (running ones, nothing
            kept for backward) or "eval_grad" (running ones, backward allowed)

        Returns:
            (float tensor): (B,) scores in [0, 1]
        """
        cfg = self.cfg
        if features.dim() != 4 or tuple(features.shape[1:3]) != (
            cfg.input_channels, cfg.input_coeffs
        ):
            raise ShapeMismatch(
                f"expected (B, {cfg.input_channels}, {cfg.input_coeffs}, N), "
                f"got {tuple(features.shape)}"
            )
        if features.shape[3] < MIN_FRAMES:
            raise InputTooShort(f"{features.shape[3]} frames < {MIN_FRAMES}")
        features = features.to(self.dtype)
        self.trace.clear()
        comps = self.components
        x = features
        for name in list(comps)[:8]:
            x = comps[name].forward(x, mode)
            self.trace[name] = tuple(x.shape)
        self._record(mode, tuple(x.shape))
        seq = x.squeeze(2).transpose(1, 2)  # (B, T, C)
        seq = comps["gru1"].forward(seq, mode)
        self.trace["gru1"] = tuple(seq.shape)
        seq = comps["gru2"].forward(seq, mode)
        self.trace["gru2"] = tuple(seq.shape)
        summary = self._summarize(seq)
        self.trace["summary"] = tuple(summary.shape)
        out = comps["fc2"].forward(comps["fc1"].forward(summary, mode), mode)
        scores = self.sigmoid.forward(out, mode).reshape(-1)
        self.trace["scores"] = tuple(scores.shape)
        return scores

    def _summarize(self, seq):
        hidden = self.cfg.gru_hidden
        if self.cfg.summary == "last_step":
            return seq[:, -1, :]
        # forward state after the last step, backward state after reading t=0
        return torch.cat([seq[:, -1, :hidden], seq[:, 0, hidden:]], dim=1)

    def _summarize_backward(self, grad, length):
        hidden = self.cfg.gru_hidden
        grad_seq = grad.new_zeros(grad.shape[0], length, 2 * hidden)
        if self.cfg.summary == "last_step":
            grad_seq[:, -1, :] = grad
        else:
            grad_seq[:, -1, :hidden] += grad[:, :hidden]
            grad_seq[:, 0, hidden:] += grad[:, hidden:]
        return grad_seq

    def backward(self, grad):
        """Accumulates dL/dparam given dL/dscores (B,)

        Returns:
            (float tensor): dL/dfeatures
        """
        (conv_shape,) = self._recorded()
        comps = self.components
        grad = self.sigmoid.backward(grad.reshape(-1, 1).to(self.dtype))
        grad = comps["fc1"].backward(comps["fc2"].backward(grad))
        grad = self._summarize_backward(grad, conv_shape[3])
        grad = comps["gru1"].backward(comps["gru2"].backward(grad))
        grad = grad.transpose(1, 2).unsqueeze(2)
        for name in reversed(list(comps)[:8]):
            grad = comps[name].backward(grad)
        return grad


def build(cfg=None, seed=0, dtype=torch.float32):
    """Fresh SpecRNet, deterministic given -seed"""
    model = SpecRNet(cfg, seed, dtype)
    logging.debug(f"SpecRNet built (seed {seed}): {count_parameters(model)} parameters")
    return model


def count_parameters(model):
    """number of trainable scalars (running statistics excluded)"""
    return sum(p.size for p in model.trainable_parameters())


def component_counts(model):
    """OrderedDict {component name: trainable parameter count}"""
    return OrderedDict(
        (name, count_parameters(comp)) for name, comp in model.components.items()
    )


def score_batch(model, features):
    """eval-mode scores without touching gradients"""
    with torch.no_grad():
        return model.forward(torch.as_tensor(features), EVAL)
