"""Problem data model and the estimation-error objective.

A bank of m linear sensors observes a d-dimensional zero-mean state through
the rows of a sensing matrix.  Sensor i transmits its reading with b_i bits,
which makes its effective measurement precision kappa_i * 4**b_i.  The merit
of an allocation b is the trace of the error covariance of the linear MMSE
state estimate, to be driven down subject to a total bit budget.

This module owns the instance container and the evaluation kernel: objective
value, analytic gradient, a global Lipschitz constant for the gradient, and a
dense Hessian kept around for validation.  One call to :func:`evaluate` costs
exactly one Cholesky factorization of the d x d information matrix; all
factorizations are routed through :func:`cholesky_lower` so tests can count
or sabotage them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.linalg.lapack import dpotrf

LN4 = math.log(4.0)

# 4**b overflows double precision near b ~ 512; reject far before that.
MAX_BITS = 256.0

# Componentwise negativity tolerated on allocations (roundoff from convex
# combinations), matching the feasibility slack asserted on solver output.
NEGATIVITY_TOL = 1e-12


class BitAllocationError(Exception):
    """Base class for errors raised by this package."""


class DimensionMismatchError(BitAllocationError):
    """An array argument has the wrong shape or length."""


class BitRangeError(BitAllocationError):
    """Bit values are non-finite or beyond the overflow guard MAX_BITS."""


class FactorizationError(BitAllocationError):
    """A matrix that must be SPD failed its Cholesky factorization.

    The 1-based index of the offending leading minor is kept in ``pivot``
    when the backend reports one.  For the information matrix this usually
    signals an invalid prior covariance or an overflowing 4**b term.
    """

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


def cholesky_lower(matrix: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    Single chokepoint for every SPD factorization in the package, so the
    one-factorization-per-evaluation contract is observable from tests.
    """
    factor, info = dpotrf(matrix, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise FactorizationError(
            f"matrix is not positive definite: leading minor {info} is not positive",
            pivot=int(info),
        )
    if info < 0:
        raise FactorizationError(f"invalid input to factorization (argument {-info})")
    return factor


@dataclass(frozen=True)
class BitVector:
    """A per-sensor bit allocation, continuous or integral.

    ``is_integral`` is derived at construction; integral vectors are exactly
    representable so the check is an equality, not a tolerance.
    """

    bits: np.ndarray
    is_integral: bool = field(init=False)

    def __post_init__(self):
        arr = np.atleast_1d(np.asarray(self.bits, dtype=float))
        if arr.ndim != 1:
            raise DimensionMismatchError(f"bit vector must be 1-D, got shape {arr.shape}")
        if arr.size == 0:
            raise DimensionMismatchError("bit vector must not be empty")
        if not np.all(np.isfinite(arr)):
            raise BitRangeError("bit vector has non-finite components")
        if np.any(arr < -NEGATIVITY_TOL):
            raise BitRangeError(f"negative bit value {arr.min():.3e} below tolerance")
        object.__setattr__(self, "bits", arr)
        object.__setattr__(self, "is_integral", bool(np.all(arr == np.floor(arr))))

    @classmethod
    def zeros(cls, m: int) -> "BitVector":
        return cls(np.zeros(m))

    def __len__(self) -> int:
        return self.bits.size

    @property
    def total(self) -> float:
        return float(self.bits.sum())

    def feasible_for(self, budget: float, tol: float = 1e-9) -> bool:
        return self.total <= budget + tol


@dataclass(frozen=True)
class ProblemInstance:
    """Immutable problem data: sensing matrix, prior, precisions, budget.

    Derived quantities that every evaluation needs (prior factor, prior
    inverse, spectral norm of the prior) are computed once here and cached.
    """

    sensing_matrix: np.ndarray
    prior_covariance: np.ndarray
    kappa: np.ndarray
    budget: float
    identity_prior: bool = False
    prior_factor: np.ndarray = field(init=False, repr=False)
    prior_inverse: np.ndarray = field(init=False, repr=False)
    prior_spectral_norm: float = field(init=False)
    prior_trace: float = field(init=False)

    def __post_init__(self):
        h = np.asarray(self.sensing_matrix, dtype=float)
        if h.ndim != 2:
            raise DimensionMismatchError(f"sensing matrix must be 2-D, got shape {h.shape}")
        m, d = h.shape
        if not np.all(np.isfinite(h)):
            raise DimensionMismatchError("sensing matrix has non-finite entries")
        row_norms = np.linalg.norm(h, axis=1)
        if np.any(row_norms == 0.0):
            bad = int(np.argmin(row_norms))
            raise DimensionMismatchError(f"sensing matrix row {bad} is zero; every sensor must observe something")

        kappa = np.atleast_1d(np.asarray(self.kappa, dtype=float))
        if kappa.shape != (m,):
            raise DimensionMismatchError(f"kappa must have length {m}, got shape {kappa.shape}")
        if not np.all(np.isfinite(kappa)) or np.any(kappa <= 0.0):
            raise DimensionMismatchError("kappa must be strictly positive and finite")

        budget = float(self.budget)
        if not math.isfinite(budget) or budget < 0.0:
            raise DimensionMismatchError(f"budget must be a finite nonnegative real, got {budget}")

        cov = np.asarray(self.prior_covariance, dtype=float)
        if cov.shape != (d, d):
            raise DimensionMismatchError(f"prior covariance must be {d}x{d}, got shape {cov.shape}")
        if self.identity_prior:
            if not np.array_equal(cov, np.eye(d)):
                raise DimensionMismatchError("identity_prior set but prior covariance is not the identity")
            factor = np.eye(d)
            inverse = np.eye(d)
            spectral = 1.0
            trace = float(d)
        else:
            scale = float(np.abs(cov).max()) or 1.0
            if not np.allclose(cov, cov.T, atol=1e-10 * scale, rtol=0.0):
                raise DimensionMismatchError("prior covariance must be symmetric")
            cov = 0.5 * (cov + cov.T)
            factor = cholesky_lower(cov)  # SPD check happens here
            inverse = cho_solve((factor, True), np.eye(d), check_finite=False)
            inverse = 0.5 * (inverse + inverse.T)
            spectral = float(np.linalg.eigvalsh(cov)[-1])
            trace = float(np.trace(cov))

        object.__setattr__(self, "sensing_matrix", h)
        object.__setattr__(self, "prior_covariance", cov)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "budget", budget)
        object.__setattr__(self, "prior_factor", factor)
        object.__setattr__(self, "prior_inverse", inverse)
        object.__setattr__(self, "prior_spectral_norm", spectral)
        object.__setattr__(self, "prior_trace", trace)

    @classmethod
    def with_identity_prior(cls, sensing_matrix, kappa, budget) -> "ProblemInstance":
        """Constructor for the common unit-prior setting, skipping the eigensolve."""
        h = np.asarray(sensing_matrix, dtype=float)
        if h.ndim != 2:
            raise DimensionMismatchError(f"sensing matrix must be 2-D, got shape {h.shape}")
        return cls(h, np.eye(h.shape[1]), kappa, budget, identity_prior=True)

    @property
    def m(self) -> int:
        return self.sensing_matrix.shape[0]

    @property
    def d(self) -> int:
        return self.sensing_matrix.shape[1]


@dataclass(frozen=True)
class Evaluation:
    """Objective, gradient, and factorization byproducts at one allocation."""

    objective: float
    gradient: np.ndarray
    precisions: np.ndarray
    factor: np.ndarray

    def __post_init__(self):
        if self.objective <= 0.0:
            raise BitAllocationError(f"objective must be positive, got {self.objective}")


def _bits_array(instance: ProblemInstance, bits) -> np.ndarray:
    arr = bits.bits if isinstance(bits, BitVector) else np.atleast_1d(np.asarray(bits, dtype=float))
    if arr.shape != (instance.m,):
        raise DimensionMismatchError(f"allocation must have length {instance.m}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise BitRangeError("allocation has non-finite components")
    if np.any(arr > MAX_BITS):
        bad = int(np.argmax(arr))
        raise BitRangeError(f"bit value {arr[bad]:.6g} at index {bad} exceeds overflow guard {MAX_BITS:g}")
    return arr


def precision_from_bits(instance: ProblemInstance, bits) -> np.ndarray:
    """Per-channel precision kappa_i * 4**b_i for an allocation."""
    arr = _bits_array(instance, bits)
    return instance.kappa * 4.0 ** arr


def evaluate(instance: ProblemInstance, bits) -> Evaluation:
    """Objective and gradient at an allocation, via one Cholesky factorization.

    The information matrix is assembled as a symmetric rank-k update of the
    prior inverse with the sensing matrix scaled rowwise by sqrt(precision).
    The trace of its inverse comes from triangular solves against the
    identity, and each gradient component is the squared column norm of
    (error covariance) @ (sensing row), scaled by -ln(4) * precision.  The
    m x m product of sensing rows is never formed; the cost is
    O(d^3 + d^2 m).

    Accepts a BitVector or any length-m array.  Negative components are
    allowed (the objective is defined on all of R^m); values above MAX_BITS
    raise BitRangeError before they can overflow.
    """
    arr = _bits_array(instance, bits)
    rho = instance.kappa * 4.0 ** arr
    scaled = instance.sensing_matrix * np.sqrt(rho)[:, None]
    info = instance.prior_inverse + scaled.T @ scaled
    factor = cholesky_lower(info)
    inv_factor = solve_triangular(factor, np.eye(instance.d), lower=True, check_finite=False)
    objective = float(np.sum(inv_factor * inv_factor))
    cov_ht = cho_solve((factor, True), instance.sensing_matrix.T, check_finite=False)
    quad = np.einsum("ij,ij->j", cov_ht, cov_ht)
    gradient = -LN4 * rho * quad
    return Evaluation(objective=objective, gradient=gradient, precisions=rho, factor=factor)


def objective_value(instance: ProblemInstance, bits) -> float:
    """Objective alone, skipping the gradient extraction.

    Same single-factorization cost structure as :func:`evaluate`; used by
    line searches that probe many trial points before committing to one.
    """
    arr = _bits_array(instance, bits)
    rho = instance.kappa * 4.0 ** arr
    scaled = instance.sensing_matrix * np.sqrt(rho)[:, None]
    info = instance.prior_inverse + scaled.T @ scaled
    factor = cholesky_lower(info)
    inv_factor = solve_triangular(factor, np.eye(instance.d), lower=True, check_finite=False)
    return float(np.sum(inv_factor * inv_factor))


def lipschitz_constant(instance: ProblemInstance) -> float:
    """Global Lipschitz constant of the gradient over the budget simplex.

    Instance-constant: (ln 4)^2 * ||prior||_2 * (2m + 1).
    """
    return LN4 * LN4 * instance.prior_spectral_norm * (2 * instance.m + 1)


def hessian_exact(instance: ProblemInstance, bits) -> np.ndarray:
    """Dense Hessian of the objective in bit space.

    Intended for validation on small instances (m up to ~100): it forms two
    m x m matrices of sensor cross terms.  In precision space the objective
    is convex with second derivatives 2 * (h_i' C h_j) * (h_i' C^2 h_j); the
    chain rule through 4**b adds a diagonal term that is always nonpositive,
    which is what makes the bit-space problem nonconvex.  Symmetrized after
    assembly to kill roundoff asymmetry.
    """
    ev = evaluate(instance, bits)
    rho = ev.precisions
    h = instance.sensing_matrix
    cov_ht = cho_solve((ev.factor, True), h.T, check_finite=False)  # C_eps H', d x m
    cross_cov = h @ cov_ht  # (i, j) -> h_i' C h_j
    cross_cov_sq = cov_ht.T @ cov_ht  # (i, j) -> h_i' C^2 h_j
    df_drho = -np.diag(cross_cov_sq).copy()
    diag_term = np.diag(rho * df_drho)
    # Scale each factor separately; the balanced products stay representable
    # even when allocations differ by hundreds of bits.
    curvature = 2.0 * (rho[:, None] * cross_cov) * (cross_cov_sq * rho[None, :])
    hess = LN4 * LN4 * (diag_term + curvature)
    return 0.5 * (hess + hess.T)
