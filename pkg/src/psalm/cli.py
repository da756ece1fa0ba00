"""Command-line interface.

Subcommands: fit, search, classify, pca, sample, score. Exit codes:
0 success, 1 usage error, 2 runtime failure (with a machine-readable
error object on stderr).
"""

import argparse
import datetime
import json
import sys

import numpy as np

from . import io as pio
from .classify import semisupervised_experiment
from .errors import PsalmError


class UsageError(Exception):
    """Bad flag combinations (exit code 1, like argparse failures)."""
from .estim import FitConfig, default_anneal_schedule, fit
from .family import VALID_CODES, PsalmSpec, ScaleMatrix, parse_model_code
from .metrics import adjusted_rand_index, confusion_matrix, rand_index
from .sal import SalParams, sample_sal_mixture
from .select import SearchGrid, grid_search


def _parse_range(text):
    """'1..9' or a single integer."""
    txt = str(text).strip()
    if ".." in txt:
        lo, hi = txt.split("..", 1)
        return int(lo), int(hi)
    v = int(txt)
    return v, v


def _parse_models(text):
    if text.strip().lower() == "all":
        return tuple(parse_model_code(c) for c in VALID_CODES)
    return tuple(parse_model_code(tok) for tok in text.split(","))


def _csv_list(text):
    return [tok.strip() for tok in str(text).split(",") if tok.strip()]


def _add_data_flags(sp):
    sp.add_argument("--data", required=True, help="input table path")
    sp.add_argument("--format", default="csv", choices=["csv", "whitespace"])
    sp.add_argument("--features", default=None,
                    help="comma list of feature columns (names or 0-based indices)")
    sp.add_argument("--label-column", default=None)
    sp.add_argument("--classes", default=None,
                    help="comma list of label values to keep")
    sp.add_argument("--column-names", default=None,
                    help="names for headerless (whitespace) columns")
    sp.add_argument("--standardize", action="store_true")


def _add_fit_flags(sp):
    sp.add_argument("--models", default="all",
                    help="'all' or comma list of model codes")
    sp.add_argument("--g-range", default="1..3", help="e.g. 1..9 or 2")
    sp.add_argument("--q-range", default="1", help="e.g. 1..3 or 1")
    sp.add_argument("--criterion", default="bic", choices=["bic", "icl"])
    sp.add_argument("--starts", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--psi", type=float, default=0.03)
    sp.add_argument("--anneal-steps", type=int, default=10,
                    help="ramp length of the annealing schedule")
    sp.add_argument("--anneal-settle", type=int, default=30,
                    help="extra v=1 entries appended to the ramp")
    sp.add_argument("--epsilon", type=float, default=0.01)
    sp.add_argument("--max-iters", type=int, default=200)
    sp.add_argument("--workers", type=int, default=None,
                    help="parallel processes for grid cells / replicates "
                         "(default: PSALM_WORKERS or the CPU count)")


def _build_parser():
    ap = argparse.ArgumentParser(prog="psalm",
                                 description="Shifted asymmetric Laplace mixture "
                                             "clustering and classification")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("fit", help="fit a single model cell")
    _add_data_flags(sp)
    _add_fit_flags(sp)
    sp.add_argument("--output", default=None)

    sp = sub.add_parser("search", help="grid search over (code, G, q)")
    _add_data_flags(sp)
    _add_fit_flags(sp)
    sp.add_argument("--output", default=None)

    sp = sub.add_parser("classify", help="semi-supervised replicate experiment")
    _add_data_flags(sp)
    _add_fit_flags(sp)
    sp.add_argument("--known-frac", type=float, default=0.8)
    sp.add_argument("--replicates", type=int, default=50)
    sp.add_argument("--output", default=None)

    sp = sub.add_parser("pca", help="principal-component scores")
    _add_data_flags(sp)
    sp.add_argument("--components", default="1,2,3",
                    help="comma list of 1-based component indices")
    sp.add_argument("--use-covariance", action="store_true",
                    help="decompose the covariance instead of the correlation matrix")
    sp.add_argument("--output", required=True, help="CSV path for the scores")

    sp = sub.add_parser("sample", help="draw a synthetic mixture sample")
    sp.add_argument("--config", required=True,
                    help="JSON file describing the mixture components")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--output", required=True, help="CSV path for the sample")

    sp = sub.add_parser("score", help="compare two label files")
    sp.add_argument("--truth", required=True)
    sp.add_argument("--predicted", required=True)
    sp.add_argument("--output", default=None)
    return ap


def _load_dataset(args):
    features = _csv_list(args.features) if args.features else None
    classes = _csv_list(args.classes) if args.classes else None
    names = _csv_list(args.column_names) if args.column_names else None
    ds = pio.read_table(args.data, fmt=args.format, label_column=args.label_column,
                        feature_subset=features, classes=classes,
                        column_names=names)
    if args.standardize:
        ds = pio.standardize(ds)
    return ds


def _fit_config(args):
    return FitConfig(
        psi=args.psi, epsilon=args.epsilon, max_iters=args.max_iters,
        n_starts=args.starts, seed=args.seed,
        anneal=default_anneal_schedule(args.anneal_steps, settle=args.anneal_settle),
    )


def _encode_labels(labels):
    levels = sorted(set(labels))
    index = {v: i for i, v in enumerate(levels)}
    return np.array([index[v] for v in labels]), levels


def _emit(document, output):
    document["created_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    if output:
        pio.serialize_results(document, output)
    else:
        doc = dict(document)
        doc.setdefault("schema_version", pio.SCHEMA_VERSION)
        json.dump(doc, sys.stdout, indent=1, sort_keys=True)
        sys.stdout.write("\n")


def _grid_from_args(args):
    g_lo, g_hi = _parse_range(args.g_range)
    q_lo, q_hi = _parse_range(args.q_range)
    return SearchGrid(codes=_parse_models(args.models), g_range=(g_lo, g_hi),
                      q_range=(q_lo, q_hi), criterion=args.criterion)


def _cmd_fit(args):
    ds = _load_dataset(args)
    grid = _grid_from_args(args)
    cells = list(grid.cells())
    if len(cells) != 1:
        raise UsageError("fit expects exactly one model cell; use search for grids")
    config = _fit_config(args)
    result = fit(ds.X, cells[0], config)
    record = pio.fit_record(result, truth_labels=ds.labels)
    _emit({
        "kind": "fit",
        "data": ds.provenance,
        "config": _config_echo(config),
        "results": [record],
        "failures": [],
    }, args.output)
    return 0


def _config_echo(config: FitConfig):
    return {
        "psi": config.psi,
        "epsilon": config.epsilon,
        "max_iters": config.max_iters,
        "n_starts": config.n_starts,
        "seed": config.seed,
        "anneal_values": list(config.anneal.values),
        "anneal_iters_per_v": config.anneal.iters_per_v,
    }


def _cmd_search(args):
    ds = _load_dataset(args)
    grid = _grid_from_args(args)
    config = _fit_config(args)
    outcome = grid_search(ds.X, grid, config, workers=args.workers)
    records = [pio.fit_record(r, truth_labels=ds.labels) for r in outcome.results]
    _emit({
        "kind": "search",
        "criterion": grid.criterion,
        "data": ds.provenance,
        "config": _config_echo(config),
        "results": records,
        "failures": outcome.failures,
    }, args.output)
    return 0


def _cmd_classify(args):
    ds = _load_dataset(args)
    if ds.labels is None:
        raise UsageError("classify requires --label-column")
    codes = _parse_models(args.models)
    if len(codes) != 1:
        raise UsageError("classify expects exactly one model code")
    cls, levels = _encode_labels(ds.labels)
    g_lo, g_hi = _parse_range(args.g_range)
    q_lo, q_hi = _parse_range(args.q_range)
    if g_lo != g_hi or q_lo != q_hi:
        raise UsageError("classify expects single-valued --g-range and --q-range")
    if g_lo != len(levels):
        raise UsageError(f"--g-range {g_lo} does not match {len(levels)} classes")
    spec = PsalmSpec(code=codes[0], n_components=g_lo, n_factors=q_lo)
    config = _fit_config(args)
    summary = semisupervised_experiment(ds.X, cls, spec, config,
                                        known_frac=args.known_frac,
                                        replicates=args.replicates,
                                        workers=args.workers)
    _emit({
        "kind": "classify",
        "data": ds.provenance,
        "config": _config_echo(config),
        "code": spec.code.code,
        "G": spec.n_components,
        "q": spec.n_factors,
        "class_levels": [str(v) for v in levels],
        "known_frac": summary["known_frac"],
        "replicates": summary["replicates"],
        "confusion": summary["confusion"].tolist(),
        "ari": summary["ari"],
        "accuracy": summary["accuracy"],
        "per_replicate": summary["per_replicate"],
    }, args.output)
    return 0


def _cmd_pca(args):
    ds = _load_dataset(args)
    comps = [int(c) for c in _csv_list(args.components)]
    proj = pio.pca_project(ds, comps, use_correlation=not args.use_covariance)
    with open(args.output, "w") as fh:
        header = list(proj.feature_names)
        if proj.labels is not None:
            header.append("label")
        fh.write(",".join(header) + "\n")
        for i in range(proj.n):
            row = [repr(float(v)) for v in proj.X[i]]
            if proj.labels is not None:
                row.append(str(proj.labels[i]))
            fh.write(",".join(row) + "\n")
    ev = proj.provenance["pca_explained_variance"]
    sys.stderr.write("explained variance fractions: "
                     + ", ".join(f"{v:.4f}" for v in ev) + "\n")
    return 0


def _cmd_sample(args):
    with open(args.config) as fh:
        cfg = json.load(fh)
    components = []
    for comp in cfg["components"]:
        scale = ScaleMatrix(
            loadings=np.asarray(comp["loadings"], dtype=float),
            omega=float(comp["omega"]),
            delta=np.asarray(comp["delta"], dtype=float),
        )
        params = SalParams(mu=np.asarray(comp["mu"], dtype=float),
                           alpha=np.asarray(comp["alpha"], dtype=float),
                           scale=scale)
        components.append((float(comp["weight"]), params))
    X, labels = sample_sal_mixture(components, args.n, args.seed)
    with open(args.output, "w") as fh:
        fh.write(",".join([f"x{j}" for j in range(X.shape[1])] + ["label"]) + "\n")
        for i in range(X.shape[0]):
            fh.write(",".join(repr(float(v)) for v in X[i]) + f",{labels[i]}\n")
    return 0


def _read_labels(path):
    with open(path) as fh:
        return [line.strip() for line in fh if line.strip()]


def _cmd_score(args):
    truth = _read_labels(args.truth)
    pred = _read_labels(args.predicted)
    table, rows, cols = confusion_matrix(truth, pred)
    _emit({
        "kind": "score",
        "n": len(truth),
        "rand_index": rand_index(truth, pred),
        "ari": adjusted_rand_index(truth, pred),
        "confusion": {"rows": [str(r) for r in rows],
                      "cols": [str(c) for c in cols],
                      "table": table.tolist()},
    }, args.output)
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "search": _cmd_search,
    "classify": _cmd_classify,
    "pca": _cmd_pca,
    "sample": _cmd_sample,
    "score": _cmd_score,
}


def run_cli(argv=None):
    """Parse argv and run; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems and 0 on --help
        return 0 if exc.code == 0 else 1
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        json.dump({"error": "usage", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    except (PsalmError, OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
