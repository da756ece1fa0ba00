"""Two-phase estimation for the mixture family.

Phase 1 is a deterministic-annealing pass: responsibilities are raised
to a power v swept from 0 to 1, and the inverse-weight expectation is
regularized by psi > 0 so component locations cannot collide with
observations. Phase 2 is an alternating ECM pass at v = 1, psi = 0, in
which the locations stay frozen (the first CM step updates only the
weights and skewnesses) and convergence is judged by an Aitken
acceleration estimate of the log-likelihood limit.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from . import special
from .errors import (
    ConditioningError,
    DegenerateComponentError,
    DomainError,
    FitFailureError,
    NumericalError,
    SingularPointError,
)
from .family import (
    ComponentParams,
    PsalmSpec,
    assemble_scale,
    normalize_delta,
    total_free_params,
    woodbury_inverse,
    woodbury_logdet,
)
from .sal import LOG_2PI, LatentExpectations

_PSI_FLOOR = 1e-10   # diagonal residual floor in the scale updates
_RESID_FLOOR = 1e-8  # eigen-initialization residual floor


def default_anneal_schedule(n_values=10, iters_per_v=2, settle=30):
    """Ramp 0 -> 1 over n_values entries, then hold v = 1 for `settle`
    further entries so the regularized EM can settle before the
    locations are frozen for the second phase."""
    values = list(np.linspace(0.0, 1.0, n_values)) + [1.0] * settle
    return AnnealSchedule(values=tuple(values), iters_per_v=iters_per_v)


@dataclass(frozen=True)
class AnnealSchedule:
    """Nondecreasing sequence of v values from 0 to 1, swept iters_per_v
    times each."""

    values: tuple
    iters_per_v: int = 4

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size == 0 or v[0] != 0.0 or v[-1] != 1.0:
            raise DomainError("annealing schedule must start at 0 and end at 1")
        if np.any(np.diff(v) < 0.0):
            raise DomainError("annealing schedule must be nondecreasing")
        if self.iters_per_v < 1:
            raise DomainError("iters_per_v must be >= 1")


@dataclass(frozen=True)
class FitConfig:
    psi: float = 0.03
    epsilon: float = 0.01
    max_iters: int = 200
    n_starts: int = 10
    seed: int = 0
    min_component_size: int = 0          # 0 = auto: max(q + 1, 3)
    anneal: AnnealSchedule = field(default_factory=default_anneal_schedule)
    max_restarts: int = 10               # fresh partitions per start slot

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise DomainError("epsilon must be > 0")
        if self.n_starts < 1:
            raise DomainError("n_starts must be >= 1")
        if self.psi < 0.0:
            raise DomainError("psi must be >= 0")

    def resolved_min_size(self, q):
        return self.min_component_size if self.min_component_size > 0 else max(q + 1, 3)


@dataclass
class FitResult:
    spec: PsalmSpec
    params: ComponentParams
    responsibilities: np.ndarray
    map_labels: np.ndarray
    loglik_trace: list
    loglik: float
    bic: float
    icl: float
    converged: bool
    iterations: int
    start_index: int
    diagnostics: dict


# ---------------------------------------------------------------------------
# initialization

def init_partition(n, G, seed):
    """Uniform random hard assignment with every component nonempty."""
    if G > n:
        raise DomainError(f"cannot split {n} observations into {G} nonempty groups")
    rng = np.random.default_rng(seed)
    while True:
        labels = rng.integers(0, G, size=n)
        if np.bincount(labels, minlength=G).min() > 0:
            return labels


def _center_partition(X, G, seed, min_size):
    """Nearest-neighbor partition around G randomly chosen observations.

    Uniform partitions start every component at nearly identical
    parameters (each random subset shares the global mean and scatter),
    which defeats the purpose of multiple starts; seeding locations at
    random observations gives the starts genuinely distinct geometry.
    """
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    for _ in range(200):
        centers = X[rng.choice(n, G, replace=False)]
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)
        if np.bincount(labels, minlength=G).min() >= min_size:
            return labels
    return None


def init_loadings(Sg, q):
    """Eigen-initialization of one component's (Lambda, omega, Delta).

    Column j of Lambda is the j-th leading unit eigenvector scaled by the
    square root of its eigenvalue; omega is the geometric mean of the
    diagonal residual and Delta the residual over omega. Non-positive
    residual entries (exact low-rank fits) are floored rather than
    rejected.
    """
    Sg = np.asarray(Sg, dtype=float)
    p = Sg.shape[0]
    if q > p:
        raise DomainError(f"need q <= p, got q={q}, p={p}")
    evals, evecs = np.linalg.eigh(Sg)
    order = np.argsort(evals)[::-1][:q]
    d = np.clip(evals[order], 0.0, None)
    rho = evecs[:, order]
    # deterministic sign: largest-magnitude entry of each eigenvector positive
    for j in range(q):
        k = np.argmax(np.abs(rho[:, j]))
        if rho[k, j] < 0.0:
            rho[:, j] = -rho[:, j]
    lam = rho * np.sqrt(d)
    resid = np.clip(np.diag(Sg) - np.sum(lam * lam, axis=1), _RESID_FLOOR, None)
    delta, omega = normalize_delta(resid)
    return lam, omega, delta


def _initial_params(X, labels, spec: PsalmSpec):
    n, p = X.shape
    G, q = spec.n_components, spec.n_factors
    code = spec.code
    ng = np.bincount(labels, minlength=G).astype(float)
    pi = ng / n
    mus = np.stack([X[labels == g].mean(axis=0) for g in range(G)])
    alphas = np.zeros((G, p))
    Sgs = []
    for g in range(G):
        d = X[labels == g] - mus[g]
        Sgs.append(d.T @ d / ng[g])
    pooled = np.einsum("g,gij->ij", pi, np.stack(Sgs))

    if code.loadings_shared:
        loadings, _, _ = init_loadings(pooled, q)
        lam_of = lambda g: loadings  # noqa: E731
    else:
        per = [init_loadings(Sgs[g], q)[0] for g in range(G)]
        loadings = np.stack(per)
        lam_of = lambda g: loadings[g]  # noqa: E731

    resids = np.stack([
        np.clip(np.diag(Sgs[g]) - np.sum(lam_of(g) ** 2, axis=1), _RESID_FLOOR, None)
        for g in range(G)
    ])
    omegas = np.array([normalize_delta(resids[g])[1] for g in range(G)])
    if code.delta_identity:
        delta = None
    elif code.delta_shared:
        delta = normalize_delta(np.einsum("g,gi->i", pi, resids))[0]
    else:
        delta = np.stack([normalize_delta(resids[g])[0] for g in range(G)])
    omega = float(pi @ omegas) if code.omega_shared else omegas
    return ComponentParams(code=code, weights=pi, mus=mus, alphas=alphas,
                           loadings=loadings, omega=omega, delta=delta)


# ---------------------------------------------------------------------------
# E-step

def _tables(X, params: ComponentParams, psi, need_moments=True):
    n = X.shape[0]
    G = params.n_components
    p = params.p
    nu = (2.0 - p) / 2.0
    logd = np.empty((n, G))
    e1 = np.empty((n, G))
    e2 = np.empty((n, G))
    for g in range(G):
        scale = assemble_scale(params, g)
        siginv = woodbury_inverse(scale)
        si_alpha = siginv @ params.alphas[g]
        a = 2.0 + float(params.alphas[g] @ si_alpha)
        cnst = math.log(2.0) - 0.5 * p * LOG_2PI - 0.5 * woodbury_logdet(scale)
        diff = X - params.mus[g]
        b = np.einsum("ij,jk,ik->i", diff, siginv, diff)
        np.maximum(b, 0.0, out=b)
        shift = diff @ si_alpha
        ld, e1g, e2g = special._component_expectations(b, shift, a, nu, psi, cnst)
        if np.any(np.isposinf(ld)):
            i = int(np.argmax(np.isposinf(ld)))
            raise SingularPointError(
                f"observation {i} coincides with the location of component {g}",
                row=i, component=g,
            )
        if need_moments and np.any(np.isinf(e2g)):
            i = int(np.argmax(np.isinf(e2g)))
            raise SingularPointError(
                f"E[1/W] diverges at observation {i}, component {g} "
                "(zero Mahalanobis distance with psi = 0)",
                row=i, component=g,
            )
        logd[:, g] = math.log(params.weights[g]) + ld
        e1[:, g] = e1g
        e2[:, g] = e2g
    return logd, e1, e2


def _responsibilities(logd, v, clamp=None):
    n, G = logd.shape
    if v == 0.0:
        z = np.full((n, G), 1.0 / G)
    else:
        scaled = v * logd
        norm = logsumexp(scaled, axis=1)
        if not np.all(np.isfinite(norm)):
            i = int(np.argmax(~np.isfinite(norm)))
            raise NumericalError(f"all component densities vanished at observation {i}")
        z = np.exp(scaled - norm[:, None])
    if clamp is not None:
        idx, onehot = clamp
        z[idx] = onehot
    return z


def anneal_e_step(data, params: ComponentParams, v, psi, clamp=None):
    """Annealed E-step: responsibilities from densities raised to v,
    inverse-weight moments regularized by psi."""
    if not 0.0 <= v <= 1.0:
        raise DomainError("v must lie in [0, 1]")
    X = np.asarray(data, dtype=float)
    logd, e1, e2 = _tables(X, params, psi)
    z = _responsibilities(logd, v, clamp)
    return LatentExpectations(z=z, e1=e1, e2=e2)


def e_step(data, params: ComponentParams, clamp=None):
    """Plain E-step (v = 1, psi = 0)."""
    return anneal_e_step(data, params, v=1.0, psi=0.0, clamp=clamp)


def observed_loglik(data, params: ComponentParams, clamp=None):
    """Sum over observations of ln sum_g pi_g xi(x | theta_g).

    With clamped (labelled) rows this is the joint classification
    likelihood: labelled rows contribute their own component's term.
    """
    X = np.asarray(data, dtype=float)
    logd, _, _ = _tables(X, params, psi=0.0, need_moments=False)
    return _loglik_from_table(logd, clamp)


def _loglik_from_table(logd, clamp=None):
    row_ll = logsumexp(logd, axis=1)
    if clamp is not None:
        idx, onehot = clamp
        labels = np.argmax(onehot, axis=1)
        row_ll[idx] = logd[idx, labels]
    return float(np.sum(row_ll))


# ---------------------------------------------------------------------------
# CM steps

def cm_step1(data, expectations: LatentExpectations, params: ComponentParams,
             update_mu=True, min_size=0.0):
    """Update (pi, mu, alpha) by conditional maximization.

    With update_mu=True (the annealing phase) mu and alpha move jointly
    to the stationary point of the weighted score equations, i.e. the
    displayed ratio formulas. With update_mu=False (the post-annealing
    phase) the locations stay frozen, and alpha moves to its conditional
    maximizer at the frozen mu -- the only alpha update that preserves
    the ascent property once mu no longer participates.
    """
    X = np.asarray(data, dtype=float)
    n = X.shape[0]
    G = params.n_components
    z, e1, e2 = expectations.z, expectations.e1, expectations.e2
    ng = z.sum(axis=0)
    for g in range(G):
        if ng[g] < min_size:
            raise DegenerateComponentError(
                f"component {g} holds {ng[g]:.2f} observations "
                f"(minimum {min_size})", component=g)
    pi = ng / n
    mus = params.mus.copy()
    alphas = np.empty_like(params.alphas)
    for g in range(G):
        w1 = z[:, g] * e1[:, g]
        s1 = w1.sum()
        if not update_mu:
            if s1 <= 0.0:
                raise DegenerateComponentError(
                    f"component {g} has zero total E[W] weight", component=g)
            alphas[g] = (z[:, g] @ (X - params.mus[g])) / s1
            continue
        w2 = z[:, g] * e2[:, g]
        s2 = w2.sum()
        zx = z[:, g] @ X
        w2x = w2 @ X
        denom = s1 * s2 - ng[g] ** 2
        if not np.isfinite(denom) or abs(denom) < 1e-12:
            raise DegenerateComponentError(
                f"degenerate geometry in component {g}: "
                f"(sum z E1)(sum z E2) - n_g^2 = {denom}", component=g)
        alphas[g] = (s2 * zx - ng[g] * w2x) / denom
        mus[g] = (s1 * w2x - ng[g] * zx) / denom
    return replace(params, weights=pi, mus=mus, alphas=alphas)


def compute_sg(data, expectations: LatentExpectations, mu, alpha, g):
    """Weighted scatter matrix feeding the factor-structure updates."""
    X = np.asarray(data, dtype=float)
    z = expectations.z[:, g]
    ng = z.sum()
    if ng <= 0.0:
        raise DegenerateComponentError(f"component {g} is empty", component=g)
    w1 = z * expectations.e1[:, g]
    w2 = z * expectations.e2[:, g]
    d = X - mu
    S = (d * w2[:, None]).T @ d / ng
    r = (z @ d) / ng
    S = S - np.outer(alpha, r) - np.outer(r, alpha) \
        + np.outer(alpha, alpha) * (w1.sum() / ng)
    return 0.5 * (S + S.T)


def cm_step2(Sgs, params: ComponentParams, counts):
    """Update (Lambda, omega, Delta) under the code's sharing pattern.

    Order of the conditional maximizations: Lambda given the old scale,
    Delta given the new Lambda (pooled with the old omegas where shared),
    then omega given both. Each step is an exact conditional maximizer,
    preserving the ascent property.
    """
    code = params.code
    G = params.n_components
    p, q = params.p, params.q
    ng = np.asarray(counts, dtype=float)
    n = ng.sum()

    scales = [assemble_scale(params, g) for g in range(G)]
    omegas_old = np.array([s.omega for s in scales])
    deltas_old = np.stack([s.delta for s in scales])
    betas = []
    thetas = []
    SBs = []
    for g in range(G):
        lam_old = scales[g].loadings
        try:
            beta = lam_old.T @ woodbury_inverse(scales[g])      # q x p
            theta = np.eye(q) - beta @ lam_old + beta @ Sgs[g] @ beta.T
        except np.linalg.LinAlgError as exc:
            raise ConditioningError(str(exc)) from exc
        betas.append(beta)
        thetas.append(theta)
        SBs.append(Sgs[g] @ beta.T)                              # p x q

    try:
        if code.loadings_shared:
            lam_new = np.empty((p, q))
            c = ng[:, None] / (omegas_old[:, None] * deltas_old)  # (G, p)
            for i in range(p):
                Aq = np.einsum("g,gjk->jk", c[:, i], np.stack(thetas))
                rhs = np.einsum("g,gj->j", c[:, i], np.stack([sb[i] for sb in SBs]))
                lam_new[i] = np.linalg.solve(Aq, rhs)
            lam_store = lam_new
            lam_of = lambda g: lam_new  # noqa: E731
        else:
            per = [np.linalg.solve(thetas[g].T, SBs[g].T).T for g in range(G)]
            lam_store = np.stack(per)
            lam_of = lambda g: lam_store[g]  # noqa: E731
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(f"singular factor update: {exc}") from exc

    psivecs = np.empty((G, p))
    for g in range(G):
        lam = lam_of(g)
        BS = betas[g] @ Sgs[g]
        t2 = np.einsum("ij,ji->i", lam, BS)
        t3 = np.einsum("ij,jk,ik->i", lam, thetas[g], lam)
        psivecs[g] = np.clip(np.diag(Sgs[g]) - 2.0 * t2 + t3, _PSI_FLOOR, None)

    if code.delta_identity:
        delta = None
        if code.omega_shared:
            omega = float(np.einsum("g,gi->", ng, psivecs) / (n * p))
        else:
            omega = psivecs.mean(axis=1)
    elif code.delta_shared:
        pooled = np.einsum("g,gi->i", ng / omegas_old, psivecs)
        delta, _ = normalize_delta(pooled)
        ratios = psivecs / delta
        if code.omega_shared:
            omega = float(np.einsum("g,gi->", ng, ratios) / (n * p))
        else:
            omega = ratios.mean(axis=1)
    else:
        delta = np.empty((G, p))
        scale_g = np.empty(G)
        for g in range(G):
            delta[g], scale_g[g] = normalize_delta(psivecs[g])
        if code.omega_shared:
            omega = float(ng @ scale_g / n)
        else:
            omega = scale_g

    return replace(params, loadings=lam_store, omega=omega, delta=delta)


# ---------------------------------------------------------------------------
# convergence

def aitken_converged(l_prev2, l_prev, l_curr, epsilon):
    """Aitken-accelerated stopping rule on three consecutive log-likelihoods.

    Converged iff 0 <= l_inf - l_curr < epsilon where l_inf is the
    geometric-limit estimate. A flat previous step (zero denominator)
    falls back to the plain increment test.
    """
    d1 = l_prev - l_prev2
    d0 = l_curr - l_prev
    if d1 == 0.0:
        return abs(d0) < epsilon
    a = d0 / d1
    if a == 1.0:
        return False
    l_inf = l_prev + d0 / (1.0 - a)
    gap = l_inf - l_curr
    return 0.0 <= gap < epsilon


# ---------------------------------------------------------------------------
# the two-phase engine

def _run_anneal(X, params, config: FitConfig, min_size, clamp):
    for v in config.anneal.values:
        for _ in range(config.anneal.iters_per_v):
            exps = anneal_e_step(X, params, v=v, psi=config.psi, clamp=clamp)
            params = cm_step1(X, exps, params, update_mu=True, min_size=min_size)
            ng = exps.z.sum(axis=0)
            Sgs = [compute_sg(X, exps, params.mus[g], params.alphas[g], g)
                   for g in range(params.n_components)]
            params = cm_step2(Sgs, params, ng)
    return params


def _run_aecm(X, params, config: FitConfig, min_size, clamp):
    trace = []
    converged = False
    iterations = 0
    exps = None
    for _ in range(config.max_iters):
        logd, e1, e2 = _tables(X, params, psi=0.0)
        exps = LatentExpectations(z=_responsibilities(logd, 1.0, clamp), e1=e1, e2=e2)
        trace.append(_loglik_from_table(logd, clamp))
        if len(trace) >= 3 and aitken_converged(trace[-3], trace[-2], trace[-1],
                                                config.epsilon):
            converged = True
            break
        iterations += 1
        params = cm_step1(X, exps, params, update_mu=False, min_size=min_size)
        exps2 = e_step(X, params, clamp=clamp)
        ng = exps2.z.sum(axis=0)
        Sgs = [compute_sg(X, exps2, params.mus[g], params.alphas[g], g)
               for g in range(params.n_components)]
        params = cm_step2(Sgs, params, ng)
    if not converged:
        logd, e1, e2 = _tables(X, params, psi=0.0)
        exps = LatentExpectations(z=_responsibilities(logd, 1.0, clamp), e1=e1, e2=e2)
        trace.append(_loglik_from_table(logd, clamp))
    return params, exps, trace, converged, iterations


def _start_seed(seed, start, attempt):
    return int(np.random.SeedSequence([seed, start, attempt]).generate_state(1)[0])


_RECOVERABLE = (SingularPointError, ConditioningError, DegenerateComponentError,
                NumericalError, DomainError)


def _fit_one_start(X, spec: PsalmSpec, config: FitConfig, start, clamp):
    n = X.shape[0]
    G, q = spec.n_components, spec.n_factors
    min_size = config.resolved_min_size(q)
    restarts = 0
    errors = []
    for attempt in range(config.max_restarts):
        seed = _start_seed(config.seed, start, attempt)
        if start == 0 and attempt == 0:
            # the canonical uniform random partition
            labels = init_partition(n, G, seed)
        else:
            labels = _center_partition(X, G, seed, min_size)
            if labels is None:
                restarts += 1
                continue
        if np.bincount(labels, minlength=G).min() < min_size:
            restarts += 1
            continue
        try:
            params = _initial_params(X, labels, spec)
            params = _run_anneal(X, params, config, min_size, clamp)
            params, exps, trace, converged, iterations = _run_aecm(
                X, params, config, min_size, clamp)
            return params, exps, trace, converged, iterations, restarts
        except _RECOVERABLE as exc:
            restarts += 1
            errors.append(f"attempt {attempt}: {type(exc).__name__}: {exc}")
    raise FitFailureError(
        f"start {start}: no usable partition in {config.max_restarts} attempts",
        diagnostics=errors)


def fit(data, spec: PsalmSpec, config: FitConfig, clamp=None):
    """Fit one model cell with multiple random starts; best final
    log-likelihood wins. ``clamp`` fixes responsibilities of labelled
    rows (used by the semi-supervised front end)."""
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise DomainError("data must be an n x p matrix")
    n, p = X.shape
    G, q = spec.n_components, spec.n_factors
    if q > p:
        raise DomainError(f"need q <= p, got q={q}, p={p}")
    if G > n:
        raise DomainError("more components than observations")
    rho = total_free_params(spec.code, p, q, G)
    import warnings
    if n <= rho:
        warnings.warn(f"n={n} observations for {rho} free parameters "
                      f"({spec.code}, G={G}, q={q})")

    best = None
    failures = []
    total_restarts = 0
    for start in range(config.n_starts):
        try:
            params, exps, trace, converged, iterations, restarts = _fit_one_start(
                X, spec, config, start, clamp)
        except FitFailureError as exc:
            failures.append({"start": start, "errors": exc.diagnostics})
            continue
        total_restarts += restarts
        ll = trace[-1]
        if best is None or ll > best[0]:
            best = (ll, start, params, exps, trace, converged, iterations)
    if best is None:
        raise FitFailureError(
            f"all {config.n_starts} starts failed for {spec.code} "
            f"G={G} q={q}", diagnostics=failures)

    ll, start, params, exps, trace, converged, iterations = best
    from .select import bic as _bic, icl as _icl, map_classify
    b = _bic(ll, rho, n)
    labels = map_classify(exps.z)
    result = FitResult(
        spec=spec,
        params=params,
        responsibilities=exps.z,
        map_labels=labels,
        loglik_trace=trace,
        loglik=ll,
        bic=b,
        icl=_icl(b, exps.z),
        converged=converged,
        iterations=iterations,
        start_index=start,
        diagnostics={
            "n_starts": config.n_starts,
            "restarts": total_restarts,
            "failed_starts": failures,
            "anneal_values": len(config.anneal.values),
            "anneal_iters_per_v": config.anneal.iters_per_v,
            "psi": config.psi,
            "epsilon": config.epsilon,
            "seed": config.seed,
        },
    )
    return result
