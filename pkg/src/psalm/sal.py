"""Shifted asymmetric Laplace distributions.

A p-dimensional SAL variate with location mu, skewness alpha and scale
Sigma arises as X = mu + W alpha + sqrt(W) N with W ~ Exp(1) and
N ~ N(0, Sigma). Conditionally on an observation, W follows a
generalized inverse Gaussian law whose two tractable moments drive the
estimation engine.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from . import special
from .errors import DomainError, SingularPointError
from .family import ScaleMatrix, woodbury_inverse, woodbury_logdet

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class SalParams:
    """Location mu, skewness alpha, and factored scale of one SAL law."""

    mu: np.ndarray
    alpha: np.ndarray
    scale: ScaleMatrix

    def __post_init__(self):
        p = self.scale.p
        if self.mu.shape != (p,) or self.alpha.shape != (p,):
            raise DomainError("mu, alpha and scale must share the dimension p")

    @property
    def p(self):
        return self.mu.shape[0]


@dataclass(frozen=True)
class LatentExpectations:
    """Per-(observation, component) responsibilities and weight moments."""

    z: np.ndarray    # (n, G), rows sum to 1
    e1: np.ndarray   # (n, G), E[W | x, component]
    e2: np.ndarray   # (n, G), E[1/W | x, component] (possibly regularized)


class _Prepared:
    """Cached per-component quantities reused across many evaluations."""

    __slots__ = ("siginv", "si_alpha", "a", "nu", "cnst")

    def __init__(self, params: SalParams):
        p = params.p
        self.siginv = woodbury_inverse(params.scale)
        self.si_alpha = self.siginv @ params.alpha
        self.a = 2.0 + float(params.alpha @ self.si_alpha)
        self.nu = (2.0 - p) / 2.0
        self.cnst = math.log(2.0) - 0.5 * p * LOG_2PI - 0.5 * woodbury_logdet(params.scale)


def _mahalanobis_and_shift(X, params: SalParams, prep: _Prepared):
    diff = X - params.mu
    b = np.einsum("ij,jk,ik->i", diff, prep.siginv, diff)
    np.maximum(b, 0.0, out=b)
    shift = diff @ prep.si_alpha
    return b, shift


def sal_log_density(x, params: SalParams):
    """Log density of the SAL law at x (or at each row of a matrix x).

    The density has a pole at x = mu for p >= 2; evaluation there raises
    a singular-point error (callers must regularize instead).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != params.p:
        raise DomainError(f"x has dimension {X.shape[1]}, parameters have {params.p}")
    prep = _Prepared(params)
    b, shift = _mahalanobis_and_shift(X, params, prep)
    logdens, _, _ = special._component_expectations(b, shift, prep.a, prep.nu, 0.0, prep.cnst)
    if np.any(np.isinf(logdens)):
        i = int(np.argmax(np.isinf(logdens)))
        raise SingularPointError(
            f"density pole: observation {i} equals the location (p >= 2)", row=i
        )
    return float(logdens[0]) if single else logdens


def gig_posterior_params(x, params: SalParams):
    """GIG parameters of W | x: a = 2 + alpha' Sigma^{-1} alpha,
    b = squared Mahalanobis distance, order nu = (2 - p)/2.

    b = 0 (x equal to mu) is returned as-is; downstream must regularize
    or reject, so no GigParams container is constructed here.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (params.p,):
        raise DomainError("x must be a single observation of dimension p")
    prep = _Prepared(params)
    b, _ = _mahalanobis_and_shift(x[None, :], params, prep)
    return prep.a, float(b[0]), prep.nu


def latent_expectations(x, params: SalParams, psi=0.0):
    """(E[W | x], E[1/W | x]) with the inverse moment evaluated at b + psi.

    psi = 0 gives the plain posterior moments; psi > 0 is the annealing
    regularizer that keeps the inverse moment finite when mu approaches
    an observation. E[W] is never regularized.
    """
    if psi < 0.0:
        raise DomainError("psi must be nonnegative")
    a, b, nu = gig_posterior_params(x, params)
    if b + psi <= 0.0:
        raise SingularPointError("E[1/W] undefined: psi + b = 0")
    if b > 0.0:
        e1 = math.sqrt(b / a) * special.bessel_ratio(nu, math.sqrt(a * b))
    else:
        # b -> 0 limit of sqrt(b/a) R_nu(sqrt(ab)): 1/a at nu = 1/2, else 0.
        e1 = 1.0 / a if nu == 0.5 else 0.0
    e2 = math.sqrt(a / (psi + b)) * special.bessel_ratio(nu, math.sqrt(a * (psi + b))) \
        - 2.0 * nu / (psi + b)
    return e1, e2


def sample_sal(params: SalParams, n, seed):
    """n independent draws, deterministic in seed.

    Uses a counter-based generator (Philox) with fixed-consumption
    inverse-CDF transforms, so draw i depends only on the seed and i:
    extending n leaves earlier rows unchanged.
    """
    if n < 1:
        raise DomainError("need n >= 1")
    p = params.p
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    u = rng.random((int(n), p + 1))
    w = -np.log1p(-u[:, 0])
    normals = ndtri(u[:, 1:])
    chol = np.linalg.cholesky(params.scale.dense())
    return params.mu + w[:, None] * params.alpha \
        + np.sqrt(w)[:, None] * (normals @ chol.T)


def sample_sal_mixture(components, n, seed):
    """Draw from a mixture of SAL laws; returns (data, labels).

    ``components`` is a sequence of (weight, SalParams). Labels follow
    the weights; observations are drawn per-component with seeds derived
    from the top-level seed, so the output is deterministic.
    """
    if len(components) == 0:
        raise DomainError("mixture needs at least one component")
    weights = np.array([w for w, _ in components], dtype=float)
    if np.any(weights <= 0.0):
        raise DomainError("mixture weights must be positive")
    if abs(weights.sum() - 1.0) > 1e-12:
        raise DomainError("mixture weights must sum to 1")
    if n < 1:
        raise DomainError("need n >= 1")

    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    labels = rng.choice(len(components), size=int(n), p=weights)
    p = components[0][1].p
    X = np.empty((int(n), p))
    for g, (_, params) in enumerate(components):
        idx = np.flatnonzero(labels == g)
        if idx.size:
            X[idx] = sample_sal(params, idx.size, seed=int(seed) + 1 + g)
    return X, labels
