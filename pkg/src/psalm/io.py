"""Data ingestion, preprocessing, and result serialization.

Tables arrive as CSV (header row) or whitespace-delimited files (no
header, the UCI style); every preprocessing step is appended to the
dataset's transform log so a fitted matrix can be reproduced exactly
from the raw file.
"""

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, ParseError

SCHEMA_VERSION = "psalm.results/v1"

_MISSING_TOKENS = {"", "na", "nan", "null", "none", "?"}


@dataclass
class Dataset:
    X: np.ndarray
    feature_names: list
    labels: list = None
    provenance: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


def _split_rows(path, fmt):
    rows = []
    with open(path, "r", newline="") as fh:
        if fmt == "csv":
            for row in csv.reader(fh):
                if row and any(cell.strip() for cell in row):
                    rows.append([cell.strip() for cell in row])
        elif fmt == "whitespace":
            for line in fh:
                toks = line.split()
                if toks:
                    rows.append(toks)
        else:
            raise ParseError(f"unknown format {fmt!r}; expected 'csv' or 'whitespace'")
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return rows


def _resolve_column(token, names):
    """A column reference is a name or a 0-based index."""
    token = str(token).strip()
    if token in names:
        return names.index(token)
    try:
        idx = int(token)
    except ValueError:
        raise ParseError(
            f"unknown column {token!r}; available columns: {', '.join(names)}"
        ) from None
    if not 0 <= idx < len(names):
        raise ParseError(f"column index {idx} out of range (file has {len(names)})")
    return idx


def read_table(path, fmt="csv", label_column=None, feature_subset=None,
               classes=None, column_names=None):
    """Load a numeric table with optional labels and feature selection.

    CSV files carry their header; whitespace files are headerless and
    columns are named c0..cN unless ``column_names`` supplies names.
    Rows with missing feature entries are dropped (count recorded in the
    provenance); a non-missing, non-numeric feature cell is an error
    naming the cell.
    """
    rows = _split_rows(path, fmt)
    if fmt == "csv":
        names = rows[0]
        body = rows[1:]
    else:
        names = None
        body = rows
    width = len(body[0])
    for r, row in enumerate(body):
        if len(row) != width:
            raise ParseError(f"{path}: row {r} has {len(row)} fields, expected {width}")
    if names is None:
        names = list(column_names) if column_names else [f"c{j}" for j in range(width)]
    elif column_names:
        names = list(column_names)
    if len(names) != width:
        raise ParseError(f"{path}: {len(names)} column names for {width} columns")

    label_idx = None if label_column is None else _resolve_column(label_column, names)
    if feature_subset is not None:
        feat_idx = [_resolve_column(t, names) for t in feature_subset]
    else:
        feat_idx = [j for j in range(width) if j != label_idx]
    if label_idx in feat_idx:
        raise ParseError("label column cannot also be a feature")

    keep_classes = None if classes is None else {str(c) for c in classes}
    data = []
    labels = [] if label_idx is not None else None
    dropped_missing = 0
    for r, row in enumerate(body):
        if label_idx is not None:
            lab = row[label_idx]
            if keep_classes is not None and lab not in keep_classes:
                continue
        vals = []
        missing = False
        for j in feat_idx:
            cell = row[j]
            if cell.lower() in _MISSING_TOKENS:
                missing = True
                break
            try:
                vals.append(float(cell))
            except ValueError:
                raise ParseError(
                    f"{path}: non-numeric value {cell!r} at row {r}, "
                    f"column {names[j]!r}") from None
        if missing:
            dropped_missing += 1
            continue
        data.append(vals)
        if labels is not None:
            labels.append(row[label_idx])
    if not data:
        raise ParseError(f"{path}: no usable rows after filtering")
    X = np.asarray(data, dtype=float)
    prov = {
        "source": str(path),
        "format": fmt,
        "dropped_missing_rows": dropped_missing,
        "transforms": [],
    }
    return Dataset(X=X, feature_names=[names[j] for j in feat_idx],
                   labels=labels, provenance=prov)


def standardize(dataset: Dataset):
    """Center and scale every column to mean 0, variance 1 (population
    convention, divisor n). Errors on zero-variance columns."""
    X = dataset.X
    means = X.mean(axis=0)
    sds = X.std(axis=0, ddof=0)
    for j, s in enumerate(sds):
        if s <= 0.0:
            raise DomainError(
                f"column {dataset.feature_names[j]!r} has zero variance")
    prov = dict(dataset.provenance)
    prov["transforms"] = list(prov.get("transforms", [])) + [{
        "op": "standardize",
        "means": means.tolist(),
        "sds": sds.tolist(),
    }]
    return replace(dataset, X=(X - means) / sds, provenance=prov)


def pca_project(dataset: Dataset, components, use_correlation=True):
    """Scores on the requested principal components (1-based indices).

    The eigen-decomposition runs on the correlation matrix by default
    (columns centered and scaled by their sample standard deviation,
    divisor n-1) or on the covariance matrix. Each retained eigenvector
    has its largest-magnitude entry made positive, fixing score signs.
    """
    X = dataset.X
    n, p = X.shape
    comps = [int(c) for c in components]
    for c in comps:
        if not 1 <= c <= p:
            raise DomainError(f"component index {c} out of range 1..{p}")
    means = X.mean(axis=0)
    centered = X - means
    if use_correlation:
        sds = X.std(axis=0, ddof=1)
        if np.any(sds <= 0.0):
            j = int(np.argmax(sds <= 0.0))
            raise DomainError(
                f"column {dataset.feature_names[j]!r} has zero variance")
        work = centered / sds
        mat = (work.T @ work) / (n - 1)
    else:
        sds = np.ones(p)
        work = centered
        mat = np.cov(X, rowvar=False, ddof=1)
    evals, evecs = np.linalg.eigh(mat)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    for j in range(p):
        k = np.argmax(np.abs(evecs[:, j]))
        if evecs[k, j] < 0.0:
            evecs[:, j] = -evecs[:, j]
    explained = (evals / evals.sum()).tolist()
    cols = [c - 1 for c in comps]
    scores = work @ evecs[:, cols]
    prov = dict(dataset.provenance)
    prov["transforms"] = list(prov.get("transforms", [])) + [{
        "op": "pca",
        "use_correlation": bool(use_correlation),
        "components": comps,
        "means": means.tolist(),
        "sds": sds.tolist(),
        "eigenvectors": evecs[:, cols].T.tolist(),
        "explained_variance": explained,
    }]
    prov["pca_explained_variance"] = explained
    return replace(dataset, X=scores,
                   feature_names=[f"PC{c}" for c in comps], provenance=prov)


def replay_transforms(X_raw, transforms):
    """Apply a recorded transform log to a raw matrix."""
    X = np.asarray(X_raw, dtype=float)
    for t in transforms:
        if t["op"] == "standardize":
            X = (X - np.asarray(t["means"])) / np.asarray(t["sds"])
        elif t["op"] == "pca":
            work = (X - np.asarray(t["means"])) / np.asarray(t["sds"])
            X = work @ np.asarray(t["eigenvectors"]).T
        else:
            raise DomainError(f"unknown transform {t['op']!r}")
    return X


# ---------------------------------------------------------------------------
# result serialization

def _expand_params(params):
    """Per-component (pi, mu, alpha, Lambda, omega, Delta), fully expanded."""
    from .family import assemble_scale

    out = []
    for g in range(params.n_components):
        sc = assemble_scale(params, g)
        out.append({
            "weight": float(params.weights[g]),
            "mu": params.mus[g].tolist(),
            "alpha": params.alphas[g].tolist(),
            "loadings": sc.loadings.tolist(),
            "omega": float(sc.omega),
            "delta": sc.delta.tolist(),
        })
    return out


def fit_record(result, truth_labels=None):
    """JSON-ready record for one fitted model cell."""
    from .metrics import adjusted_rand_index, confusion_matrix

    rec = {
        "code": result.spec.code.code,
        "G": result.spec.n_components,
        "q": result.spec.n_factors,
        "loglik": result.loglik,
        "bic": result.bic,
        "icl": result.icl,
        "converged": bool(result.converged),
        "iterations": int(result.iterations),
        "start_index": int(result.start_index),
        "components": _expand_params(result.params),
        "map_labels": [int(v) for v in result.map_labels],
        "loglik_trace": [float(v) for v in result.loglik_trace],
        "diagnostics": result.diagnostics,
    }
    if truth_labels is not None:
        table, rows, cols = confusion_matrix(truth_labels, result.map_labels)
        rec["ari"] = adjusted_rand_index(truth_labels, result.map_labels)
        rec["confusion"] = {
            "rows": [str(r) for r in rows],
            "cols": [str(c) for c in cols],
            "table": table.tolist(),
        }
    return rec


def serialize_results(document, path):
    """Write a schema-versioned JSON document; floats round-trip exactly."""
    doc = dict(document)
    doc.setdefault("schema_version", SCHEMA_VERSION)
    for key, val in doc.items():
        if isinstance(val, float) and not math.isfinite(val):
            doc[key] = str(val)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True, allow_nan=True)
        fh.write("\n")
    return path


def load_results(path):
    with open(path) as fh:
        doc = json.load(fh)
    if "schema_version" not in doc:
        raise ParseError(f"{path}: missing schema_version field")
    return doc
