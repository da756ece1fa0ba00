"""Numba-compiled scalar kernels for log K_nu and the latent-weight moments.

log K_nu(z) is assembled from three classical pieces, all in double
precision:

* z <= 2: Temme's series for the pair (K_mu, K_{mu+1}) with |mu| <= 1/2,
* z > 2:  Steed's continued fraction (CF2) for the same pair, evaluated
  with the e^{-z} factor kept symbolic so no underflow occurs,
* upward recurrence K_{t+1} = K_{t-1} + (2t/z) K_t carried in the log
  domain, which is stable (K grows with the order) and immune to overflow
  even for K values far beyond 1e308.

Everything here is scalar-in-the-loop; the array entry points at the
bottom are what the rest of the package calls.
"""

import math

import numpy as np
from numba import njit

# Odd coefficients of the 1/Gamma power series, used for the stable
# evaluation of [1/Gamma(1-mu) - 1/Gamma(1+mu)]/(2 mu) near mu = 0.
_G1_C2 = 0.5772156649015329
_G1_C4 = -0.0420026350340952
_G1_C6 = -0.0421977345555443
_G1_C8 = 0.0072189432466630
_G1_C10 = -0.0002152416741149
_G1_C12 = -0.0000201348547807

_EPS = 1.0e-16
_MAXIT = 1000


@njit(cache=True, nogil=True)
def _temme_gammas(mu):
    # gam1 = [1/G(1-mu) - 1/G(1+mu)]/(2 mu), gam2 = [1/G(1-mu) + 1/G(1+mu)]/2
    gampl = 1.0 / math.gamma(1.0 + mu)
    gammi = 1.0 / math.gamma(1.0 - mu)
    if abs(mu) < 0.1:
        m2 = mu * mu
        gam1 = -(_G1_C2 + m2 * (_G1_C4 + m2 * (_G1_C6 + m2 * (
            _G1_C8 + m2 * (_G1_C10 + m2 * _G1_C12)))))
    else:
        gam1 = (gammi - gampl) / (2.0 * mu)
    gam2 = 0.5 * (gammi + gampl)
    return gam1, gam2, gampl, gammi


@njit(cache=True, nogil=True)
def _temme_pair_log(mu, z):
    # (ln K_mu(z), ln K_{mu+1}(z)) for z <= 2, |mu| <= 1/2.
    x2 = 0.5 * z
    pimu = math.pi * mu
    fact = 1.0 if abs(pimu) < 1e-290 else pimu / math.sin(pimu)
    d = -math.log(x2)
    e = mu * d
    fact2 = 1.0 if abs(e) < 1e-290 else math.sinh(e) / e
    gam1, gam2, gampl, gammi = _temme_gammas(mu)
    ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
    summ = ff
    ee = math.exp(e)
    p = 0.5 * ee / gampl
    q = 0.5 / (ee * gammi)
    c = 1.0
    d2 = x2 * x2
    sum1 = p
    for i in range(1, _MAXIT + 1):
        fi = float(i)
        ff = (fi * ff + p + q) / (fi * fi - mu * mu)
        c *= d2 / fi
        p /= fi - mu
        q /= fi + mu
        dl = c * ff
        summ += dl
        sum1 += c * (p - fi * ff)
        if abs(dl) < abs(summ) * _EPS:
            break
    return math.log(summ), math.log(sum1) + math.log(2.0 / z)


@njit(cache=True, nogil=True)
def _cf2_pair_log(mu, z):
    # (ln K_mu(z), ln K_{mu+1}(z)) for z > 2, |mu| <= 1/2 (Steed's CF2).
    b = 2.0 * (1.0 + z)
    d = 1.0 / b
    h = d
    delh = d
    q1 = 0.0
    q2 = 1.0
    a1 = 0.25 - mu * mu
    q = a1
    c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, _MAXIT + 1):
        a -= 2.0 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < _EPS:
            break
    h = a1 * h
    lnk0 = 0.5 * math.log(math.pi / (2.0 * z)) - z - math.log(s)
    lnk1 = lnk0 + math.log((mu + z + 0.5 - h) / z)
    return lnk0, lnk1


@njit(cache=True, nogil=True)
def _log_kv_pair(nu, z):
    """(ln K_nu(z), ln K_{nu+1}(z)) for any real nu and z > 0."""
    swap = False
    if nu < -0.5:
        # K_nu = K_{-nu}; the pair (nu, nu+1) maps onto (-nu-1, -nu).
        nu = -nu - 1.0
        swap = True
    n = int(math.floor(nu + 0.5))
    mu = nu - n
    if mu == -0.5:
        # half-integer orders: K_{-1/2} = K_{1/2} = sqrt(pi/(2z)) e^{-z}
        lk0 = 0.5 * math.log(math.pi / (2.0 * z)) - z
        lk1 = lk0
    elif z <= 2.0:
        lk0, lk1 = _temme_pair_log(mu, z)
    else:
        lk0, lk1 = _cf2_pair_log(mu, z)
    for j in range(1, n + 1):
        t = lk1 + math.log(2.0 * (mu + j) / z + math.exp(lk0 - lk1))
        lk0 = lk1
        lk1 = t
    if swap:
        return lk1, lk0
    return lk0, lk1


@njit(cache=True, nogil=True)
def log_kv_scalar(nu, z):
    lk0, _ = _log_kv_pair(nu, z)
    return lk0


@njit(cache=True, nogil=True)
def log_kv_arr(nu, z):
    out = np.empty(z.shape[0])
    for i in range(z.shape[0]):
        out[i] = _log_kv_pair(nu, z[i])[0]
    return out


@njit(cache=True, nogil=True)
def kv_ratio_arr(nu, z):
    # R_nu(z) = K_{nu+1}(z) / K_nu(z)
    out = np.empty(z.shape[0])
    for i in range(z.shape[0]):
        lk0, lk1 = _log_kv_pair(nu, z[i])
        out[i] = math.exp(lk1 - lk0)
    return out


@njit(cache=True, nogil=True)
def component_expectations(b, shift, a, nu, psi, cnst):
    """Per-observation log density and latent-weight moments for one component.

    b      squared Mahalanobis distances (n,)
    shift  (x - mu)' Sigma^{-1} alpha     (n,)
    a      2 + alpha' Sigma^{-1} alpha    (scalar, >= 2)
    nu     (2 - p) / 2
    psi    regularizer added to b inside E[1/W] (0 in the plain E-step)
    cnst   ln 2 - (p/2) ln(2 pi) - (1/2) ln|Sigma|

    Returns (logdens, e1, e2). A zero Mahalanobis distance is a pole of
    the density for p >= 2 (and of e2 whenever psi == 0); such entries
    are flagged with +inf in logdens / e2 for the caller to turn into a
    singular-point error.
    """
    n = b.shape[0]
    logdens = np.empty(n)
    e1 = np.empty(n)
    e2 = np.empty(n)
    sqa = math.sqrt(a)
    for i in range(n):
        bi = b[i]
        lk0 = 0.0
        lk1 = 0.0
        if bi > 0.0:
            u = sqa * math.sqrt(bi)
            lk0, lk1 = _log_kv_pair(nu, u)
            logdens[i] = cnst + shift[i] + 0.5 * nu * (math.log(bi) - math.log(a)) + lk0
            e1[i] = math.sqrt(bi / a) * math.exp(lk1 - lk0)
        else:
            if nu == 0.5:
                # p = 1: the pole cancels; closed form via K_{1/2}.
                logdens[i] = cnst + shift[i] - 0.5 * math.log(a) \
                    + 0.5 * math.log(0.5 * math.pi)
                e1[i] = 1.0 / a
            else:
                logdens[i] = np.inf
                e1[i] = 0.0
        if psi == 0.0:
            if bi > 0.0:
                e2[i] = math.sqrt(a / bi) * math.exp(lk1 - lk0) - 2.0 * nu / bi
            else:
                e2[i] = np.inf
        else:
            bp = bi + psi
            up = sqa * math.sqrt(bp)
            lp0, lp1 = _log_kv_pair(nu, up)
            e2[i] = math.sqrt(a / bp) * math.exp(lp1 - lp0) - 2.0 * nu / bp
    return logdens, e1, e2
