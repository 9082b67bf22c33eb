import torch

"""
Losses used in "trainer.py"
"""

PROBA_CLAMP = 1e-7


def bce_loss(scores, labels):
    """Binary cross-entropy of sigmoid scores, with its gradient

    Scores are clamped to [1e-7, 1 - 1e-7] before the log; the gradient
    is the analytic one evaluated at the clamped point.

    Args:
        scores (float tensor): (B,) predicted fake probabilities
        labels (float tensor): (B,) 0 bonafide, 1 fake

    Returns:
        (float): mean loss
        (float tensor): (B,) dL/dscores
    """
    labels = labels.to(scores.dtype)
    clamped = scores.clamp(PROBA_CLAMP, 1 - PROBA_CLAMP)
    p64, y64 = clamped.double(), labels.double()
    loss = -(y64 * torch.log(p64) + (1 - y64) * torch.log1p(-p64)).mean()
    grad = (-(labels / clamped) + (1 - labels) / (1 - clamped)) / scores.shape[0]
    return float(loss), grad
