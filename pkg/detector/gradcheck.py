import torch

from .layers import EVAL, EVAL_GRAD
from .losses import bce_loss

"""
Finite-difference checks of the analytic backward passes

Analytic gradients are computed in the layer's own dtype, central finite
differences always on a float64 copy.
"""

REL_FLOOR = 1e-3


def relative_error(analytic, numeric, floor=REL_FLOOR):
    """|a - n| / max(|a|, |n|, floor), elementwise"""
    analytic, numeric = analytic.double(), numeric.double()
    scale = torch.maximum(analytic.abs(), numeric.abs()).clamp(min=floor)
    return (analytic - numeric).abs() / scale


def _recording(mode):
    """the mode an analytic forward runs in so that backward() can follow"""
    return EVAL_GRAD if mode == EVAL else mode


def _sample_indices(numel, nb_samples, generator):
    if nb_samples is None or nb_samples >= numel:
        return torch.arange(numel)
    return torch.randperm(numel, generator=generator)[:nb_samples]


def _central_difference(loss_fn, tensor, idxs, eps):
    """central differences of loss_fn() wrt the flat entries -idxs of -tensor"""
    flat = tensor.view(-1)
    numeric = torch.zeros(len(idxs), dtype=torch.float64)
    for pos, idx in enumerate(idxs.tolist()):
        orig = flat[idx].item()
        flat[idx] = orig + eps
        loss_plus = loss_fn()
        flat[idx] = orig - eps
        loss_minus = loss_fn()
        flat[idx] = orig
        numeric[pos] = (loss_plus - loss_minus) / (2 * eps)
    return numeric


def check_layer(layer, x, mode=EVAL, eps=1e-6, nb_samples=None, seed=0):
    """Max relative error of a layer's parameter and input gradients

    The loss is sum(forward(x) * w) for a fixed random w, so every output
    element gets a distinct upstream gradient.

    Returns:
        (dict): {parameter name or "input": max relative error}
    """
    gen = torch.Generator().manual_seed(seed)
    out = layer.forward(x, _recording(mode))
    weights = torch.randn(out.shape, generator=gen, dtype=torch.float64)
    layer.zero_grad()
    grad_x = layer.backward(weights.to(out.dtype))
    analytic = {p.name: p.grad.clone() for p in layer.trainable_parameters()}

    layer64 = layer.to(torch.float64)
    x64 = x.double().clone()

    def loss_fn():
        return float((layer64.forward(x64, mode) * weights).sum())

    errors = {}
    for param in layer64.trainable_parameters():
        idxs = _sample_indices(param.size, nb_samples, gen)
        numeric = _central_difference(loss_fn, param.value, idxs, eps)
        errors[param.name] = float(
            relative_error(analytic[param.name].reshape(-1)[idxs], numeric).max()
        )
    idxs = _sample_indices(x64.numel(), nb_samples, gen)
    numeric = _central_difference(loss_fn, x64, idxs, eps)
    errors["input"] = float(relative_error(grad_x.reshape(-1)[idxs], numeric).max())
    return errors


def check_model(model, features, labels, mode=EVAL, eps=1e-6, nb_samples=4, seed=0):
    """Max relative error per parameter of the full model under BCE loss

    nb_samples entries are drawn per parameter tensor (None: all of them).

    Returns:
        (dict): {parameter name: max relative error}
    """
    gen = torch.Generator().manual_seed(seed)
    model64 = model.to(torch.float64)
    labels = torch.as_tensor(labels, dtype=torch.float64)

    model.zero_grad()
    scores = model.forward(features, _recording(mode))
    _, grad = bce_loss(scores, labels)
    model.backward(grad)
    analytic = {p.name: p.grad.clone() for p in model.trainable_parameters()}

    features64 = features.double()

    def loss_fn():
        return bce_loss(model64.forward(features64, mode), labels)[0]

    errors = {}
    for param in model64.trainable_parameters():
        idxs = _sample_indices(param.size, nb_samples, gen)
        numeric = _central_difference(loss_fn, param.value, idxs, eps)
        errors[param.name] = float(
            relative_error(analytic[param.name].reshape(-1)[idxs], numeric).max()
        )
    return errors
