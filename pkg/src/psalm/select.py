"""Model selection: BIC, ICL, MAP labels, and the (code, G, q) grid search."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FitFailureError, PsalmError
from .family import ModelCode, PsalmSpec

__all__ = ["SearchGrid", "SearchOutcome", "bic", "icl", "map_classify", "grid_search"]


def bic(loglik, n_params, n_obs):
    """2 l - rho ln n; larger is better under this sign convention."""
    if n_obs < 1:
        raise DomainError("need at least one observation")
    return 2.0 * loglik - n_params * math.log(n_obs)


def map_classify(responsibilities):
    """Row-wise argmax; ties break toward the lowest component index."""
    z = np.asarray(responsibilities, dtype=float)
    return np.argmax(z, axis=1)


def icl(bic_value, responsibilities):
    """BIC penalized by the classification entropy: BIC + sum_i ln z_{i, MAP(i)}.

    Always <= BIC, with equality exactly for one-hot responsibilities.
    """
    z = np.asarray(responsibilities, dtype=float)
    picked = z[np.arange(z.shape[0]), map_classify(z)]
    return bic_value + float(np.sum(np.log(picked)))


@dataclass(frozen=True)
class SearchGrid:
    codes: tuple          # ModelCode instances
    g_range: tuple        # inclusive (lo, hi)
    q_range: tuple        # inclusive (lo, hi)
    criterion: str = "bic"

    def __post_init__(self):
        if len(self.codes) == 0:
            raise DomainError("grid needs at least one model code")
        if self.g_range[0] < 1 or self.g_range[1] < self.g_range[0]:
            raise DomainError(f"bad G range {self.g_range}")
        if self.q_range[0] < 1 or self.q_range[1] < self.q_range[0]:
            raise DomainError(f"bad q range {self.q_range}")
        if self.criterion not in ("bic", "icl"):
            raise DomainError("criterion must be 'bic' or 'icl'")

    def cells(self):
        for code in self.codes:
            for G in range(self.g_range[0], self.g_range[1] + 1):
                for q in range(self.q_range[0], self.q_range[1] + 1):
                    yield PsalmSpec(code=code, n_components=G, n_factors=q)


@dataclass
class SearchOutcome:
    """Ranked fit results plus a record of failed grid cells."""

    results: list         # FitResult, best first under `criterion`
    failures: list        # dicts: {code, G, q, error}
    criterion: str

    def best(self):
        return self.results[0]

    def reranked(self, criterion):
        """Same fits ranked by the other criterion; no refitting."""
        if criterion not in ("bic", "icl"):
            raise DomainError("criterion must be 'bic' or 'icl'")
        ordered = sorted(self.results, key=lambda r: getattr(r, criterion),
                         reverse=True)
        return SearchOutcome(results=ordered, failures=self.failures,
                             criterion=criterion)


def _cell_seed(seed, code: ModelCode, G, q):
    digest = [seed, G, q] + [ord(ch) for ch in code.code]
    return int(np.random.SeedSequence(digest).generate_state(1)[0])


def default_workers():
    """Worker count for embarrassingly parallel loops.

    PSALM_WORKERS in the environment overrides the CPU count.
    """
    import os

    env = os.environ.get("PSALM_WORKERS", "").strip()
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _fit_cell(args):
    X, spec, cell_config = args
    from .estim import fit

    try:
        return fit(X, spec, cell_config), None
    except PsalmError as exc:
        return None, {
            "code": spec.code.code,
            "G": spec.n_components,
            "q": spec.n_factors,
            "error": f"{type(exc).__name__}: {exc}",
        }


def grid_search(data, grid: SearchGrid, config, workers=None):
    """Fit every (code, G, q) cell and rank by the grid's criterion.

    Cell seeds derive deterministically from (config.seed, code, G, q),
    so the outcome does not depend on evaluation order or on the worker
    count; with workers > 1 the cells run in parallel processes. Failed
    cells are recorded, not fatal; only an entirely failed grid raises.
    """
    from dataclasses import replace

    X = np.asarray(data, dtype=float)
    p = X.shape[1]
    if grid.q_range[1] > p:
        raise DomainError(f"q range exceeds data dimension p={p}")

    jobs = []
    for spec in grid.cells():
        cell_config = replace(config, seed=_cell_seed(
            config.seed, spec.code, spec.n_components, spec.n_factors))
        jobs.append((X, spec, cell_config))

    if workers is None:
        workers = default_workers()
    workers = min(workers, len(jobs))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_fit_cell, jobs))
    else:
        outcomes = [_fit_cell(job) for job in jobs]

    results = [r for r, _ in outcomes if r is not None]
    failures = [f for _, f in outcomes if f is not None]
    if not results:
        raise FitFailureError("every grid cell failed", diagnostics=failures)
    results.sort(key=lambda r: getattr(r, grid.criterion), reverse=True)
    return SearchOutcome(results=results, failures=failures,
                         criterion=grid.criterion)
