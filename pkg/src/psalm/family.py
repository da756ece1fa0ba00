"""The twelve-model family of constrained factor-analyzer scale matrices.

Each component scale matrix has the decomposition

    Sigma_g = Lambda_g Lambda_g' + omega_g Delta_g

with p x q loadings Lambda_g, scalar omega_g > 0, and diagonal Delta_g
of unit determinant. A four-letter code (C = constrained, U = not) says
which pieces are shared across components, in the order

    (Lambda_g = Lambda,  Delta_g = Delta,  omega_g = omega,  Delta_g = I).

Only twelve combinations are valid; parameter containers here store each
shared piece exactly once so the constraints cannot be violated by
construction.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConditioningError, DomainError, ParseError

VALID_CODES = (
    "CCCC", "CCUC", "UCCC", "UCUC",
    "CCCU", "CCUU", "UCCU", "UCUU",
    "CUCU", "CUUU", "UUCU", "UUUU",
)


@dataclass(frozen=True)
class ModelCode:
    code: str

    @property
    def loadings_shared(self):
        return self.code[0] == "C"

    @property
    def delta_shared(self):
        return self.code[1] == "C"

    @property
    def omega_shared(self):
        return self.code[2] == "C"

    @property
    def delta_identity(self):
        return self.code[3] == "C"

    def __str__(self):
        return self.code


def parse_model_code(text):
    """Validate a four-letter model code (case-insensitive)."""
    code = str(text).strip().upper()
    if code not in VALID_CODES:
        raise ParseError(
            f"invalid model code {text!r}; valid codes: {', '.join(VALID_CODES)}"
        )
    return ModelCode(code)


@dataclass(frozen=True)
class PsalmSpec:
    """A model cell: code, number of components G, number of factors q."""

    code: ModelCode
    n_components: int
    n_factors: int

    def __post_init__(self):
        if self.n_components < 1:
            raise DomainError("need at least one component")
        if self.n_factors < 1:
            raise DomainError("need at least one factor")


@dataclass(frozen=True)
class ScaleMatrix:
    """One component's (Lambda, omega, Delta) triple."""

    loadings: np.ndarray      # p x q
    omega: float
    delta: np.ndarray         # length p, positive, |Delta| = 1

    def __post_init__(self):
        if self.loadings.ndim != 2:
            raise DomainError("loadings must be a p x q matrix")
        p = self.loadings.shape[0]
        if self.delta.shape != (p,):
            raise DomainError("delta length must match loadings rows")
        if not self.omega > 0.0:
            raise DomainError(f"omega must be > 0, got {self.omega}")
        if np.any(self.delta <= 0.0):
            raise DomainError("delta entries must be > 0")
        logdet = np.sum(np.log(self.delta))
        if abs(np.expm1(logdet)) > 1e-10:
            raise DomainError(f"|Delta| must equal 1, got {np.exp(logdet)}")

    @property
    def p(self):
        return self.loadings.shape[0]

    @property
    def q(self):
        return self.loadings.shape[1]

    def dense(self):
        """Assembled p x p matrix Lambda Lambda' + omega Delta."""
        lam = self.loadings
        return lam @ lam.T + np.diag(self.omega * self.delta)


def normalize_delta(diag):
    """Scale a positive diagonal to unit determinant; returns (delta, scale).

    ``scale`` is the geometric mean removed, i.e. diag = scale * delta.
    """
    diag = np.asarray(diag, dtype=float)
    if np.any(diag <= 0.0):
        raise DomainError("diagonal entries must be > 0")
    scale = float(np.exp(np.mean(np.log(diag))))
    return diag / scale, scale


@dataclass(frozen=True)
class ComponentParams:
    """Full parameter set of a fitted mixture under a model code.

    Shared scale pieces are stored once: ``loadings`` is (p, q) when the
    code shares Lambda and (G, p, q) otherwise; ``omega`` is a float or
    shape (G,); ``delta`` is None when Delta = I, else (p,) or (G, p).
    """

    code: ModelCode
    weights: np.ndarray       # (G,)
    mus: np.ndarray           # (G, p)
    alphas: np.ndarray        # (G, p)
    loadings: np.ndarray
    omega: object
    delta: object = None

    def __post_init__(self):
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise DomainError("mixing weights must sum to 1")
        if np.any(self.weights <= 0.0):
            raise DomainError("mixing weights must be positive")
        G, p = self.mus.shape
        if self.alphas.shape != (G, p):
            raise DomainError("alphas shape must match mus")
        c = self.code
        if c.loadings_shared:
            if self.loadings.shape[0] != p:
                raise DomainError("shared loadings must be p x q")
        elif self.loadings.shape[:2] != (G, p):
            raise DomainError("per-component loadings must be G x p x q")
        if c.omega_shared != np.isscalar(self.omega):
            raise DomainError("omega storage does not match the code")
        if c.delta_identity:
            if self.delta is not None:
                raise DomainError("code fixes Delta = I; delta must be None")
        elif c.delta_shared:
            if np.shape(self.delta) != (p,):
                raise DomainError("shared delta must have shape (p,)")
        elif np.shape(self.delta) != (G, p):
            raise DomainError("per-component delta must have shape (G, p)")

    @property
    def n_components(self):
        return self.mus.shape[0]

    @property
    def p(self):
        return self.mus.shape[1]

    @property
    def q(self):
        return self.loadings.shape[-1]


def assemble_scale(params: ComponentParams, g):
    """The (Lambda, omega, Delta) triple in effect for component g.

    Shared pieces are returned as the same array object for every g, so
    identity checks can verify the sharing structure.
    """
    G = params.n_components
    if not 0 <= g < G:
        raise DomainError(f"component index {g} out of range for G={G}")
    c = params.code
    lam = params.loadings if c.loadings_shared else params.loadings[g]
    omega = params.omega if c.omega_shared else float(params.omega[g])
    if c.delta_identity:
        delta = _identity_delta(params.p)
    elif c.delta_shared:
        delta = params.delta
    else:
        delta = params.delta[g]
    return ScaleMatrix(loadings=lam, omega=omega, delta=delta)


_IDENTITY_DELTAS = {}


def _identity_delta(p):
    arr = _IDENTITY_DELTAS.get(p)
    if arr is None:
        arr = np.ones(p)
        arr.flags.writeable = False
        _IDENTITY_DELTAS[p] = arr
    return arr


def woodbury_inverse(scale: ScaleMatrix):
    """(Lambda Lambda' + omega Delta)^{-1} via the q x q inner solve."""
    lam, omega, delta = scale.loadings, scale.omega, scale.delta
    ainv = 1.0 / (omega * delta)                     # diag of (omega Delta)^{-1}
    ail = ainv[:, None] * lam                        # p x q
    cap = np.eye(scale.q) + lam.T @ ail              # capacitance, q x q
    try:
        inner = np.linalg.solve(cap, ail.T)          # q x p
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(f"capacitance matrix is singular: {exc}") from exc
    return np.diag(ainv) - ail @ inner


def woodbury_logdet(scale: ScaleMatrix):
    """ln |Lambda Lambda' + omega Delta| via the q x q capacitance matrix."""
    lam, omega, delta = scale.loadings, scale.omega, scale.delta
    ainv = 1.0 / (omega * delta)
    cap = np.eye(scale.q) + lam.T @ (ainv[:, None] * lam)
    sign, logdet_cap = np.linalg.slogdet(cap)
    if sign <= 0 or not np.isfinite(logdet_cap):
        raise ConditioningError("capacitance matrix is not positive definite")
    return float(scale.p * np.log(omega) + np.sum(np.log(delta)) + logdet_cap)


def free_scale_params(code: ModelCode, p, q, G):
    """Number of free scale parameters for the code at dimensions (p, q, G)."""
    if not 1 <= q <= p:
        raise DomainError(f"need 1 <= q <= p, got q={q}, p={p}")
    if G < 1:
        raise DomainError("need G >= 1")
    load_block = p * q - q * (q - 1) // 2
    n_load = load_block if code.loadings_shared else G * load_block
    n_omega = 1 if code.omega_shared else G
    if code.delta_identity:
        n_delta = 0
    else:
        n_delta = (p - 1) if code.delta_shared else G * (p - 1)
    return n_load + n_omega + n_delta


def total_free_params(code: ModelCode, p, q, G):
    """Free parameters of the whole mixture: weights, locations, skews, scale."""
    return (G - 1) + G * p + G * p + free_scale_params(code, p, q, G)
