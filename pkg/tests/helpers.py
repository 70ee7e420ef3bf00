"""Shared test utilities: finite differences and a shrunken network."""
import numpy as np

from cs_emg import nn

SHRUNK = dict(input_depths=(3, 2), channel_mask=(True, True), conv_widths=(4, 3, 4, 3, 4), dense_widths=(8, 4, 2))


def shrunken_model(seed=0, **overrides):
    return nn.GridNet(nn.Architecture(**{**SHRUNK, **overrides}), seed=seed)


def shrunken_batch(seed=1, batch=3, depths=(3, 2)):
    rng = np.random.default_rng(seed)
    grids = [rng.normal(size=(batch, 6, 7, d)) for d in depths]
    labels = np.zeros((batch, 2))
    labels[np.arange(batch), np.arange(batch) % 2] = 1.0
    return grids, labels


def numeric_grad(f, x, h=1e-5):
    """Central differences of scalar f() with respect to array x, perturbed in place."""
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + h
        fp = f()
        x[idx] = old - h
        fm = f()
        x[idx] = old
        g[idx] = (fp - fm) / (2 * h)
    return g


def grad_mismatches(analytic, numeric, rel=1e-4, floor=1e-7):
    """Indices where |a - n| > max(rel * max(|a|, |n|), floor)."""
    err = np.abs(analytic - numeric)
    tol = np.maximum(rel * np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.argwhere(err > tol)


def model_gradcheck(model, grids, labels, alpha, h=1e-5):
    """Compare backward() with central differences for every parameter entry.

    Returns (entries checked, list of (name, index, analytic, numeric) failures).
    """
    def total():
        probs, _ = nn.model_forward(model, grids, "train")
        return nn.compute_loss(probs, labels, model, alpha).total

    probs, trace = nn.model_forward(model, grids, "train")
    grads = nn.backward(trace, labels, alpha)
    checked, failures = 0, []
    for name, p in model.params.items():
        num = numeric_grad(total, p, h)
        checked += p.size
        for idx in grad_mismatches(grads[name], num):
            idx = tuple(idx)
            failures.append((name, idx, grads[name][idx], num[idx]))
    return checked, failures
