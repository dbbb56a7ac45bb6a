"""Central finite-difference verification of analytic gradients.

The check projects a module's output onto a fixed random direction to get a
scalar objective, takes its analytic gradient through backward(), and
compares every parameter and input coordinate against (f(t+h) - f(t-h)) /
2h. Run modules in float64; float32 rounding would drown the signal.
"""

import numpy as np

from .layers import softmax_xent


def _relative_error(analytic, numeric, floor=1e-6):
    denom = max(abs(analytic), abs(numeric), floor)
    return abs(analytic - numeric) / denom


def grad_check(module, x, step=1e-3, train=True, rng=None,
               exclude_input=None):
    """Max relative error over all parameters and the input.

    exclude_input: optional boolean mask of input coordinates to skip
    (non-differentiable points, e.g. ReLU at exactly zero).
    """
    rng = rng or np.random.default_rng(0)
    x = np.asarray(x, dtype=np.float64)
    y = module.forward(x, train=train)
    projection = rng.standard_normal(y.shape)
    dx = module.backward(projection)
    worst = 0.0

    def objective():
        return float((module.forward(x, train=train) * projection).sum())

    for param, grad in zip(module.params(), module.grads()):
        flat_p = param.reshape(-1)
        flat_g = grad.reshape(-1)
        for i in range(flat_p.size):
            keep = flat_p[i]
            flat_p[i] = keep + step
            plus = objective()
            flat_p[i] = keep - step
            minus = objective()
            flat_p[i] = keep
            numeric = (plus - minus) / (2 * step)
            worst = max(worst, _relative_error(flat_g[i], numeric))

    flat_x = x.reshape(-1)
    flat_dx = dx.reshape(-1)
    mask = (np.zeros(flat_x.size, dtype=bool) if exclude_input is None
            else np.asarray(exclude_input).reshape(-1))
    for i in range(flat_x.size):
        if mask[i]:
            continue
        keep = flat_x[i]
        flat_x[i] = keep + step
        plus = objective()
        flat_x[i] = keep - step
        minus = objective()
        flat_x[i] = keep
        numeric = (plus - minus) / (2 * step)
        worst = max(worst, _relative_error(flat_dx[i], numeric))
    return worst


def check_softmax_xent(logits, targets, step=1e-3, class_weights=None):
    """Max relative error of softmax cross-entropy's dlogits."""
    logits = np.asarray(logits, dtype=np.float64)
    _, dlogits = softmax_xent(logits, targets, class_weights)
    flat = logits.reshape(-1)
    flat_d = dlogits.reshape(-1)
    worst = 0.0
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + step
        plus, _ = softmax_xent(logits, targets, class_weights)
        flat[i] = keep - step
        minus, _ = softmax_xent(logits, targets, class_weights)
        flat[i] = keep
        numeric = (plus - minus) / (2 * step)
        worst = max(worst, _relative_error(flat_d[i], numeric))
    return worst
