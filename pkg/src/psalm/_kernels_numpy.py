"""Pure numpy/scipy fallback for the hot kernels.

Mirrors the numba module's array entry points. scipy's exponentially
scaled ``kve`` carries the heavy lifting; the only patch needed is the
small-z/large-order corner where K_nu(z) e^z itself overflows, handled
with the leading term of the small-argument expansion
K_nu(z) ~ (1/2) Gamma(nu) (2/z)^nu (relative error O(z^2), far below
tolerance wherever the overflow can occur).
"""

import numpy as np
from scipy.special import gammaln, kve


def _log_kve_patched(nu, z):
    with np.errstate(over="ignore", divide="ignore"):
        out = np.log(kve(nu, z))
    bad = ~np.isfinite(out)
    if np.any(bad):
        anu = abs(nu)
        zb = z[bad]
        out[bad] = gammaln(anu) - np.log(2.0) + anu * (np.log(2.0) - np.log(zb)) + zb
    return out


def log_kv_scalar(nu, z):
    return float(log_kv_arr(nu, np.asarray([z]))[0])


def log_kv_arr(nu, z):
    return _log_kve_patched(nu, z) - z


def kv_ratio_arr(nu, z):
    return np.exp(_log_kve_patched(nu + 1.0, z) - _log_kve_patched(nu, z))


def component_expectations(b, shift, a, nu, psi, cnst):
    """Vectorized counterpart of the numba kernel; see its docstring."""
    n = b.shape[0]
    logdens = np.full(n, np.inf)
    e1 = np.zeros(n)
    e2 = np.full(n, np.inf)

    pos = b > 0.0
    bpos = b[pos]
    u = np.sqrt(a * bpos)
    lk0 = _log_kve_patched(nu, u) - u
    lk1 = _log_kve_patched(nu + 1.0, u) - u
    logdens[pos] = cnst + shift[pos] + 0.5 * nu * (np.log(bpos) - np.log(a)) + lk0
    e1[pos] = np.sqrt(bpos / a) * np.exp(lk1 - lk0)
    if nu == 0.5 and not np.all(pos):
        logdens[~pos] = cnst + shift[~pos] - 0.5 * np.log(a) + 0.5 * np.log(0.5 * np.pi)
        e1[~pos] = 1.0 / a

    if psi == 0.0:
        e2[pos] = np.sqrt(a / bpos) * np.exp(lk1 - lk0) - 2.0 * nu / bpos
    else:
        bp = b + psi
        up = np.sqrt(a * bp)
        lp0 = _log_kve_patched(nu, up) - up
        lp1 = _log_kve_patched(nu + 1.0, up) - up
        e2 = np.sqrt(a / bp) * np.exp(lp1 - lp0) - 2.0 * nu / bp
    return logdens, e1, e2
