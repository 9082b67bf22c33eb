import copy
import math
from dataclasses import dataclass, field

import gin
import torch
import torch.nn.functional as F
from torch.nn import grad as conv_grad

from .exceptions import (
    DegenerateBatch,
    NoForwardRecorded,
    OutputEmpty,
    ShapeMismatch,
)

"""
Small dense-tensor network engine used by "model.py"

Each layer records what its backward formula needs during a "train" or
"eval_grad" forward() ("eval" records nothing),
and backward(grad) accumulates dL/dparam into Parameter.grad and returns
dL/dinput. torch tensors are the array type; autograd is never used.

Organisation:
- functional forward ops: conv2d, activation, maxpool2d, linear,
    gru_bidirectional
- Layer classes wrapping them with parameters and analytic backward
- BatchNorm2d holds its running statistics (non-trainable Parameters)

Notations:
- B, C, H, W : batch, channels, height (coefficients), width (frames)
- T, I, H : sequence length, GRU input size, GRU hidden size
"""

TRAIN, EVAL = "train", "eval"
# running statistics like EVAL, forward values kept for a backward pass
EVAL_GRAD = "eval_grad"
SELU_LAMBDA = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772


@dataclass
class Parameter:
    """Named tensor with its gradient accumulator"""

    name: str
    value: torch.Tensor
    trainable: bool = True
    grad: torch.Tensor = field(default=None, repr=False)

    def __post_init__(self):
        if self.grad is None:
            self.grad = torch.zeros_like(self.value)

    def zero_grad(self):
        self.grad.zero_()

    @property
    def size(self):
        return self.value.numel()


def _check(condition, msg):
    if not condition:
        raise ShapeMismatch(msg)


def _uniform(shape, bound, generator, dtype):
    """uniform(-bound, bound) tensor drawn from -generator"""
    return (torch.rand(shape, generator=generator, dtype=dtype) * 2 - 1) * bound


# ------------ functional forward ops ------------
def conv2d(x, weight, bias):
    """Stride-1 cross-correlation keeping H, W (padding k // 2), k in {1, 3}

    x (tensor): (B, C_in, H, W)
    weight (tensor): (C_out, C_in, k, k)
    bias (tensor): (C_out,)
    """
    _check(x.dim() == 4, f"conv2d expects (B, C, H, W), got {tuple(x.shape)}")
    _check(
        weight.shape[-1] in (1, 3) and weight.shape[1] == x.shape[1],
        f"conv2d weight {tuple(weight.shape)} vs input {tuple(x.shape)}",
    )
    return F.conv2d(x, weight, bias, stride=1, padding=weight.shape[-1] // 2)


def activation(x, kind, slope=0.3):
    """Elementwise selu, leaky_relu(slope) or sigmoid"""
    if kind == "selu":
        return SELU_LAMBDA * torch.where(x > 0, x, SELU_ALPHA * torch.expm1(x))
    if kind == "leaky_relu":
        return torch.where(x > 0, x, slope * x)
    if kind == "sigmoid":
        return torch.sigmoid(x)
    raise ValueError(f"unknown activation {kind}")


def maxpool2d(x, kernel=2):
    """Non-overlapping max pooling, trailing odd row/column dropped"""
    _check(x.dim() == 4, f"maxpool2d expects (B, C, H, W), got {tuple(x.shape)}")
    if x.shape[2] // kernel == 0 or x.shape[3] // kernel == 0:
        raise OutputEmpty(f"pooling {tuple(x.shape)} by {kernel} leaves nothing")
    return F.max_pool2d(x, kernel)


def linear(x, weight, bias):
    """x @ weight.T + bias, x (B, I), weight (O, I)"""
    _check(
        x.dim() == 2 and x.shape[1] == weight.shape[1],
        f"linear weight {tuple(weight.shape)} vs input {tuple(x.shape)}",
    )
    return F.linear(x, weight, bias)


def _gru_scan(x, w_ih, w_hh, b_ih, b_hh, reverse):
    """One GRU direction from h_0 = 0, gates ordered (r, z, n)

    Returns:
        (tensor): (B, T, H) hidden states, indexed by time step
        (list): per step (t, h_prev, r, z, n, hidden part of n) for backward
    """
    batch, length, _ = x.shape
    hidden = w_hh.shape[1]
    gates_x = F.linear(x, w_ih, b_ih)
    h = x.new_zeros(batch, hidden)
    outputs = x.new_empty(batch, length, hidden)
    steps = []
    for t in reversed(range(length)) if reverse else range(length):
        x_r, x_z, x_n = gates_x[:, t].chunk(3, dim=1)
        h_r, h_z, h_n = F.linear(h, w_hh, b_hh).chunk(3, dim=1)
        r = torch.sigmoid(x_r + h_r)
        z = torch.sigmoid(x_z + h_z)
        n = torch.tanh(x_n + r * h_n)
        steps.append((t, h, r, z, n, h_n))
        h = (1 - z) * n + z * h
        outputs[:, t] = h
    return outputs, steps


def gru_bidirectional(x, weights):
    """Bidirectional GRU over (B, T, I), output (B, T, 2H)

    weights (dict): {"forward"/"backward": (w_ih, w_hh, b_ih, b_hh)}
    """
    _check(x.dim() == 3 and x.shape[1] >= 1, f"GRU expects (B, T>=1, I), got {tuple(x.shape)}")
    outs = [
        _gru_scan(x, *weights[direction], reverse=direction == "backward")[0]
        for direction in ("forward", "backward")
    ]
    return torch.cat(outs, dim=2)


# ------------ layers ------------
class Layer:
    """Base class: parameters, children, forward record"""

    def __init__(self):
        self._params = []
        self._children = []
        self._saved = None

    def parameters(self):
        """all Parameters (trainable and running statistics), in order"""
        yield from self._params
        for child in self._children:
            yield from child.parameters()

    def trainable_parameters(self):
        return (p for p in self.parameters() if p.trainable)

    def zero_grad(self):
        for param in self.parameters():
            param.zero_grad()

    def clear(self):
        """drops recorded forward values"""
        self._saved = None
        for child in self._children:
            child.clear()

    def to(self, dtype):
        """copy of the layer with every tensor cast to -dtype"""
        self.clear()
        clone = copy.deepcopy(self)
        for param in clone.parameters():
            param.value = param.value.to(dtype)
            param.grad = param.grad.to(dtype)
        return clone

    def _record(self, mode, *values):
        """keeps -values for backward(); an EVAL forward keeps nothing"""
        self._saved = None if mode == EVAL else values

    def _recorded(self):
        if self._saved is None:
            raise NoForwardRecorded(
                f"{type(self).__name__}: backward without a train or eval_grad forward"
            )
        return self._saved

    def forward(self, x, mode=TRAIN):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError


class Sequential(Layer):
    def __init__(self, *layers):
        super().__init__()
        self._children = list(layers)

    def forward(self, x, mode=TRAIN):
        for layer in self._children:
            x = layer.forward(x, mode)
        return x

    def backward(self, grad):
        for layer in reversed(self._children):
            grad = layer.backward(grad)
        return grad


class Conv2d(Layer):
    def __init__(self, name, in_channels, out_channels, kernel_size, generator,
                 dtype=torch.float32):
        super().__init__()
        bound = 1 / math.sqrt(in_channels * kernel_size ** 2)
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        self.weight = Parameter(f"{name}.weight", _uniform(shape, bound, generator, dtype))
        self.bias = Parameter(f"{name}.bias", torch.zeros(out_channels, dtype=dtype))
        self._params = [self.weight, self.bias]

    def forward(self, x, mode=TRAIN):
        self._record(mode, x)
        return conv2d(x, self.weight.value, self.bias.value)

    def backward(self, grad):
        (x,) = self._recorded()
        weight = self.weight.value
        padding = weight.shape[-1] // 2
        self.weight.grad += conv_grad.conv2d_weight(x, weight.shape, grad, padding=padding)
        self.bias.grad += grad.sum(dim=(0, 2, 3))
        return conv_grad.conv2d_input(x.shape, weight, grad, padding=padding)


@gin.configurable
class BatchNorm2d(Layer):
    """Per-channel batch normalization with affine gamma, beta

    train mode normalizes with the biased batch variance and moves the
    running statistics (unbiased variance); eval mode only reads them.
    """

    def __init__(self, name, channels, eps=1e-5, momentum=0.1, dtype=torch.float32):
        super().__init__()
        self.eps = eps
        self.momentum = momentum
        self.gamma = Parameter(f"{name}.gamma", torch.ones(channels, dtype=dtype))
        self.beta = Parameter(f"{name}.beta", torch.zeros(channels, dtype=dtype))
        self.running_mean = Parameter(
            f"{name}.running_mean", torch.zeros(channels, dtype=dtype), trainable=False
        )
        self.running_var = Parameter(
            f"{name}.running_var", torch.ones(channels, dtype=dtype), trainable=False
        )
        self._params = [self.gamma, self.beta, self.running_mean, self.running_var]

    def forward(self, x, mode=TRAIN):
        _check(
            x.dim() == 4 and x.shape[1] == self.gamma.size,
            f"batchnorm over {self.gamma.size} channels got {tuple(x.shape)}",
        )
        if mode == TRAIN:
            count = x.numel() // x.shape[1]
            if count < 2:
                raise DegenerateBatch(f"{tuple(x.shape)}: one value per channel")
            mean = x.mean(dim=(0, 2, 3))
            var = x.var(dim=(0, 2, 3), unbiased=False)
            self.running_mean.value.mul_(1 - self.momentum).add_(self.momentum * mean)
            self.running_var.value.mul_(1 - self.momentum).add_(
                self.momentum * var * count / (count - 1)
            )
        else:
            mean, var = self.running_mean.value, self.running_var.value
        inv_std = torch.rsqrt(var + self.eps)[None, :, None, None]
        x_hat = (x - mean[None, :, None, None]) * inv_std
        self._record(mode, x_hat, inv_std, mode)
        return self.gamma.value[None, :, None, None] * x_hat + self.beta.value[None, :, None, None]

    def backward(self, grad):
        x_hat, inv_std, mode = self._recorded()
        dims = (0, 2, 3)
        self.gamma.grad += (grad * x_hat).sum(dim=dims)
        self.beta.grad += grad.sum(dim=dims)
        grad_hat = grad * self.gamma.value[None, :, None, None]
        if mode != TRAIN:
            return grad_hat * inv_std
        count = grad.numel() // grad.shape[1]
        return (inv_std / count) * (
            count * grad_hat
            - grad_hat.sum(dim=dims, keepdim=True)
            - x_hat * (grad_hat * x_hat).sum(dim=dims, keepdim=True)
        )


class Activation(Layer):
    def __init__(self, kind, slope=0.3):
        super().__init__()
        self.kind = kind
        self.slope = slope

    def forward(self, x, mode=TRAIN):
        out = activation(x, self.kind, self.slope)
        self._record(mode, x, out)
        return out

    def backward(self, grad):
        x, out = self._recorded()
        if self.kind == "selu":
            # for x <= 0: d/dx = lambda * alpha * e^x = out + lambda * alpha
            return grad * torch.where(x > 0, torch.full_like(x, SELU_LAMBDA),
                                      out + SELU_LAMBDA * SELU_ALPHA)
        if self.kind == "leaky_relu":
            return grad * torch.where(x > 0, torch.ones_like(x), torch.full_like(x, self.slope))
        return grad * out * (1 - out)


class MaxPool2d(Layer):
    """2x2 max pooling; backward routes to the first maximum in scan order"""

    def __init__(self, kernel=2):
        super().__init__()
        self.kernel = kernel

    def forward(self, x, mode=TRAIN):
        maxpool2d(x, self.kernel)  # shape checks
        out, idxs = F.max_pool2d(x, self.kernel, return_indices=True)
        self._record(mode, idxs, x.shape)
        return out

    def backward(self, grad):
        idxs, shape = self._recorded()
        batch, channels, height, width = shape
        grad_in = grad.new_zeros(batch, channels, height * width)
        grad_in.scatter_add_(2, idxs.flatten(2), grad.flatten(2))
        return grad_in.view(shape)


class Linear(Layer):
    def __init__(self, name, in_features, out_features, generator, dtype=torch.float32):
        super().__init__()
        bound = 1 / math.sqrt(in_features)
        self.weight = Parameter(
            f"{name}.weight", _uniform((out_features, in_features), bound, generator, dtype)
        )
        self.bias = Parameter(f"{name}.bias", torch.zeros(out_features, dtype=dtype))
        self._params = [self.weight, self.bias]

    def forward(self, x, mode=TRAIN):
        self._record(mode, x)
        return linear(x, self.weight.value, self.bias.value)

    def backward(self, grad):
        (x,) = self._recorded()
        self.weight.grad += grad.T @ x
        self.bias.grad += grad.sum(dim=0)
        return grad @ self.weight.value


class BidirectionalGRU(Layer):
    """GRU read in both directions with separate input and hidden biases

    Per direction: weight_ih (3H, I), weight_hh (3H, H), bias_ih (3H,),
    bias_hh (3H,), so 3 * (I*H + H*H + 2H) parameters.
    """

    directions = ("forward", "backward")

    def __init__(self, name, input_size, hidden_size, generator, dtype=torch.float32):
        super().__init__()
        self.hidden_size = hidden_size
        bound = 1 / math.sqrt(hidden_size)
        self.weights = {}
        for direction in self.directions:
            prefix = f"{name}.{direction}"
            self.weights[direction] = (
                Parameter(f"{prefix}.weight_ih",
                          _uniform((3 * hidden_size, input_size), bound, generator, dtype)),
                Parameter(f"{prefix}.weight_hh",
                          _uniform((3 * hidden_size, hidden_size), bound, generator, dtype)),
                Parameter(f"{prefix}.bias_ih", torch.zeros(3 * hidden_size, dtype=dtype)),
                Parameter(f"{prefix}.bias_hh", torch.zeros(3 * hidden_size, dtype=dtype)),
            )
            self._params += list(self.weights[direction])

    def forward(self, x, mode=TRAIN):
        _check(
            x.dim() == 3 and x.shape[1] >= 1
            and x.shape[2] == self.weights["forward"][0].value.shape[1],
            f"GRU input {tuple(x.shape)}",
        )
        outs, records = [], []
        for direction in self.directions:
            values = [p.value for p in self.weights[direction]]
            out, steps = _gru_scan(x, *values, reverse=direction == "backward")
            outs.append(out)
            records.append(steps)
        self._record(mode, x, records)
        return torch.cat(outs, dim=2)

    def backward(self, grad):
        x, records = self._recorded()
        hidden = self.hidden_size
        grad_x = torch.zeros_like(x)
        for idx, (direction, steps) in enumerate(zip(self.directions, records)):
            w_ih, w_hh, b_ih, b_hh = self.weights[direction]
            grad_out = grad[:, :, idx * hidden: (idx + 1) * hidden]
            grad_gates_x = x.new_zeros(x.shape[0], x.shape[1], 3 * hidden)
            grad_h = x.new_zeros(x.shape[0], hidden)
            for t, h_prev, r, z, n, h_n in reversed(steps):
                grad_h = grad_h + grad_out[:, t]
                grad_n = grad_h * (1 - z) * (1 - n * n)
                grad_z = grad_h * (h_prev - n) * z * (1 - z)
                grad_r = grad_n * h_n * r * (1 - r)
                grad_gates_x[:, t] = torch.cat([grad_r, grad_z, grad_n], dim=1)
                grad_gates_h = torch.cat([grad_r, grad_z, grad_n * r], dim=1)
                w_hh.grad += grad_gates_h.T @ h_prev
                b_hh.grad += grad_gates_h.sum(dim=0)
                grad_h = grad_h * z + grad_gates_h @ w_hh.value
            flat_gates = grad_gates_x.reshape(-1, 3 * hidden)
            w_ih.grad += flat_gates.T @ x.reshape(-1, x.shape[2])
            b_ih.grad += flat_gates.sum(dim=0)
            grad_x += grad_gates_x @ w_ih.value
        return grad_x
