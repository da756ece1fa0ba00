import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import kv

from psalm import SalParams, ScaleMatrix


def quad_log_kv(nu, z):
    """Quadrature oracle: ln K_nu(z) from the integral representation
    K_nu(z) = int_0^inf exp(-z cosh t) cosh(nu t) dt."""
    upper = 30.0  # exp(-z cosh t) is below 1e-300 there for all z >= 0.05
    val, err = quad(lambda t: math.exp(-z * math.cosh(t)) * math.cosh(nu * t),
                    0.0, upper, limit=600, epsabs=0.0, epsrel=1e-12)
    assert err < 1e-8 * val
    return math.log(val)


def quad_gig_integral(a, b, nu, weight):
    """Quadrature oracle for integrals of weight(x) * gig density."""
    lognorm = 0.5 * nu * (math.log(a) - math.log(b)) - math.log(2.0) \
        - quad_log_kv(nu, math.sqrt(a * b))

    def integrand(x):
        return weight(x) * math.exp(
            lognorm + (nu - 1.0) * math.log(x) - 0.5 * (a * x + b / x))

    val, _ = quad(integrand, 0.0, np.inf, limit=400)
    return val


def dense_sal_logpdf(x, mu, alpha, sigma):
    """Straight transcription of the density with dense linear algebra
    and scipy's linear-domain Bessel function; independent of the
    package's log-domain kernels and Woodbury forms."""
    p = len(mu)
    nu = (2.0 - p) / 2.0
    sinv = np.linalg.inv(sigma)
    d = np.asarray(x) - mu
    b = float(d @ sinv @ d)
    a = 2.0 + float(alpha @ sinv @ alpha)
    u = math.sqrt(a * b)
    val = (2.0 * math.exp(float(d @ sinv @ alpha))
           / ((2.0 * math.pi) ** (p / 2.0) * math.sqrt(np.linalg.det(sigma)))
           * (b / a) ** (nu / 2.0) * kv(nu, u))
    return math.log(val)


def random_scale(rng, p, q):
    lam = rng.normal(0.0, 1.0, (p, q))
    raw = rng.uniform(0.5, 2.0, p)
    delta = raw / np.exp(np.mean(np.log(raw)))
    return ScaleMatrix(loadings=lam, omega=float(rng.uniform(0.3, 3.0)), delta=delta)


def random_sal_params(rng, p, q):
    return SalParams(mu=rng.normal(0.0, 2.0, p), alpha=rng.normal(0.0, 1.0, p),
                     scale=random_scale(rng, p, q))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
