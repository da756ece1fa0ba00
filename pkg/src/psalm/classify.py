"""Semi-supervised (transductive) classification under the joint likelihood.

Labelled observations keep one-hot responsibilities through every E-step
of both phases; the objective is the joint likelihood in which labelled
rows contribute their own component's term and unlabelled rows the full
mixture sum.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .estim import FitConfig, FitResult, fit
from .family import PsalmSpec


@dataclass(frozen=True)
class PartialLabels:
    """Known class assignments for a subset of observations.

    ``known`` maps observation index -> class in {0, ..., n_classes-1};
    every class must have at least one labelled observation. ``H`` is
    the total component count of the model, H >= n_classes (extra
    components are unlabelled-only).
    """

    known: dict
    H: int

    def __post_init__(self):
        if self.H < 1:
            raise DomainError("H must be >= 1")
        if len(self.known) == 0:
            raise DomainError("at least one observation must be labelled")
        classes = set(self.known.values())
        n_classes = max(classes) + 1
        if min(classes) < 0:
            raise DomainError("class indices must be >= 0")
        if n_classes > self.H:
            raise DomainError(f"classes run to {n_classes - 1} but H = {self.H}")
        missing = [c for c in range(n_classes) if c not in classes]
        if missing:
            raise DomainError(f"classes without any labelled observation: {missing}")

    @property
    def n_classes(self):
        return max(self.known.values()) + 1


def fit_semisupervised(data, labels: PartialLabels, spec: PsalmSpec,
                       config: FitConfig) -> FitResult:
    """Same two-phase engine as ``fit`` with labelled rows clamped.

    Requires spec.n_components == labels.H. The returned result carries
    MAP labels for all rows; labelled rows reproduce their given class.
    """
    X = np.asarray(data, dtype=float)
    n = X.shape[0]
    if spec.n_components != labels.H:
        raise DomainError(
            f"spec has G={spec.n_components} components but labels declare H={labels.H}")
    idx = np.fromiter(labels.known.keys(), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise DomainError("labelled observation index out of range")
    cls = np.fromiter((labels.known[i] for i in idx), dtype=np.int64)
    onehot = np.zeros((idx.size, labels.H))
    onehot[np.arange(idx.size), cls] = 1.0
    return fit(X, spec, config, clamp=(idx, onehot))


def _run_replicate(args):
    X, cls, spec, rep_config, known_idx = args
    n = X.shape[0]
    labels = PartialLabels(known={int(i): int(cls[i]) for i in known_idx},
                           H=spec.n_components)
    result = fit_semisupervised(X, labels, spec, rep_config)
    held = np.setdiff1d(np.arange(n), known_idx)
    return (cls[held].tolist(), result.map_labels[held].tolist(),
            result.loglik, bool(result.converged))


def semisupervised_experiment(data, class_labels, spec: PsalmSpec,
                              config: FitConfig, known_frac=0.8, replicates=50,
                              workers=None):
    """Repeated random-subset classification experiment.

    Each replicate marks floor(known_frac * n) labels as known (drawn so
    every class keeps at least one labelled row), fits the joint model,
    and predicts the held-out rows. Predictions are pooled across
    replicates into one confusion matrix; the summary also reports the
    pooled held-out ARI and accuracy (class index = component index, no
    permutation matching, since the clamped rows anchor the components).
    """
    from .metrics import adjusted_rand_index, confusion_matrix

    X = np.asarray(data, dtype=float)
    cls = np.asarray(class_labels, dtype=np.int64)
    n = X.shape[0]
    if cls.shape != (n,):
        raise DomainError("class labels must be one integer per observation")
    n_classes = int(cls.max()) + 1
    if spec.n_components != n_classes:
        raise DomainError(
            f"spec has G={spec.n_components} but labels contain {n_classes} classes")
    if not 0.0 < known_frac < 1.0:
        raise DomainError("known_frac must lie strictly between 0 and 1")
    k = int(known_frac * n)
    if k < n_classes or k >= n:
        raise DomainError(f"known_frac={known_frac} leaves no usable split")

    from dataclasses import replace as _replace

    jobs = []
    for r in range(replicates):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, 104729, r]))
        while True:
            known_idx = rng.choice(n, size=k, replace=False)
            if len(set(cls[known_idx].tolist())) == n_classes:
                break
        rep_config = _replace(config, seed=int(
            np.random.SeedSequence([config.seed, 7919, r]).generate_state(1)[0]))
        jobs.append((X, cls, spec, rep_config, known_idx))

    from .select import default_workers

    if workers is None:
        workers = default_workers()
    workers = min(workers, replicates)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            replies = list(pool.map(_run_replicate, jobs))
    else:
        replies = [_run_replicate(job) for job in jobs]

    pooled_true = []
    pooled_pred = []
    per_replicate = []
    for r, (t, p, loglik, converged) in enumerate(replies):
        pooled_true.extend(int(v) for v in t)
        pooled_pred.extend(int(v) for v in p)
        per_replicate.append({
            "replicate": r,
            "held_out": int(len(t)),
            "accuracy": float(np.mean(np.asarray(t) == np.asarray(p))),
            "ari": adjusted_rand_index(t, p),
            "loglik": loglik,
            "converged": converged,
        })
    table, rows, cols = confusion_matrix(pooled_true, pooled_pred)
    # square up the table so every class appears as a prediction column
    full = np.zeros((n_classes, n_classes), dtype=np.int64)
    for i, rlab in enumerate(rows):
        for j, clab in enumerate(cols):
            full[rlab, clab] = table[i, j]
    pooled_true = np.asarray(pooled_true)
    pooled_pred = np.asarray(pooled_pred)
    return {
        "replicates": replicates,
        "known_frac": known_frac,
        "confusion": full,
        "ari": adjusted_rand_index(pooled_true, pooled_pred),
        "accuracy": float(np.mean(pooled_true == pooled_pred)),
        "per_replicate": per_replicate,
    }
