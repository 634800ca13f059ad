"""Central finite-difference oracle for gradient checks.

The numeric side only ever calls the forward computation, so it stays
independent of the backward code it certifies.
"""
import numpy as np


def numeric_grad(f, array: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """d f() / d array by central differences, mutating array in place."""
    grad = np.zeros_like(array)
    flat = array.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        plus = f()
        flat[i] = orig - step
        minus = f()
        flat[i] = orig
        gflat[i] = (plus - minus) / (2.0 * step)
    return grad


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    diff = np.linalg.norm((analytic - numeric).ravel())
    scale = np.linalg.norm(analytic.ravel()) + np.linalg.norm(numeric.ravel())
    return diff / max(scale, 1e-12)


def check_grads(loss_fn, params, step: float = 1e-5, tol: float = 1e-4, atol: float = 1e-6) -> dict:
    """Backward pass vs finite differences for every parameter.

    ``loss_fn`` must rebuild the graph and return the scalar loss Tensor.
    Returns the per-parameter relative errors after asserting the bound.
    Parameters whose analytic and numeric gradients are both below ``atol``
    count as matching: the gradient is zero to finite-difference resolution.
    """
    for p in params:
        p.grad = None
    loss = loss_fn()
    loss.backward()
    analytic = {p.name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data)) for p in params}
    errors = {}
    for p in params:
        numeric = numeric_grad(lambda: float(loss_fn().data), p.data, step=step)
        if np.abs(analytic[p.name]).max(initial=0.0) < atol and np.abs(numeric).max(initial=0.0) < atol:
            errors[p.name] = 0.0
            continue
        errors[p.name] = rel_error(analytic[p.name], numeric)
        assert errors[p.name] < tol, f"{p.name}: rel error {errors[p.name]:.3e} >= {tol}"
    return errors
