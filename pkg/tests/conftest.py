import numpy as np
import pytest

from bitalloc.model import ProblemInstance, evaluate


def random_instance(seed, d=None, m=None, identity_prior=True, budget_per_sensor=2.0):
    """Dense Gaussian test instance, independent of the package's generators."""
    rng = np.random.default_rng(seed)
    d = d if d is not None else int(rng.integers(2, 21))
    m = m if m is not None else int(rng.integers(2, 41))
    sensing = rng.standard_normal((m, d))
    kappa = rng.uniform(0.8, 1.2, size=m)
    budget = budget_per_sensor * m
    if identity_prior:
        return ProblemInstance.with_identity_prior(sensing, kappa, budget)
    root = rng.standard_normal((d, d)) / np.sqrt(d)
    prior = root @ root.T + 0.5 * np.eye(d)
    return ProblemInstance(sensing, prior, kappa, budget)


def random_feasible_bits(rng, instance, interior_margin=0.3):
    """A strictly positive allocation using a random fraction of the budget."""
    weights = rng.uniform(0.2, 1.0, size=instance.m)
    weights = weights / weights.sum()
    scale = rng.uniform(interior_margin, 0.95)
    return scale * instance.budget * weights


def fd_gradient(func, x, step=1e-5):
    """Central finite differences, one coordinate at a time."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        forward = x.copy()
        backward = x.copy()
        forward[i] += step
        backward[i] -= step
        grad[i] = (func(forward) - func(backward)) / (2.0 * step)
    return grad


def fd_hessian_of_gradient(instance, bits, step=1e-5):
    """Central finite differences of the analytic gradient."""
    bits = np.asarray(bits, dtype=float)
    m = bits.size
    hess = np.zeros((m, m))
    for j in range(m):
        forward = bits.copy()
        backward = bits.copy()
        forward[j] += step
        backward[j] -= step
        diff = evaluate(instance, forward).gradient - evaluate(instance, backward).gradient
        hess[:, j] = diff / (2.0 * step)
    return 0.5 * (hess + hess.T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
