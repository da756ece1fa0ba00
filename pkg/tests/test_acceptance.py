"""Acceptance suite: one test per release criterion, each printing a
PASS line with the measured numbers.

Criteria 1-5 reproduce published desk-scale experiments on three classic
datasets (crabs morphology, Swiss bank notes, UCI yeast localization).
The raw files are not redistributable through this build environment's
package mirror (no general network), so those tests skip with an exact
explanation unless the files are placed under data/ as described in
data/README.md. Criteria 6-12 are self-contained and always run.
"""

import itertools
import json
import math
from pathlib import Path

import numpy as np
import pytest

from psalm import (
    FitConfig,
    PsalmSpec,
    SalParams,
    ScaleMatrix,
    SearchGrid,
    adjusted_rand_index,
    default_anneal_schedule,
    fit,
    free_scale_params,
    grid_search,
    parse_model_code,
    pca_project,
    rand_index,
    read_table,
    sample_sal_mixture,
    semisupervised_experiment,
    standardize,
    woodbury_inverse,
    woodbury_logdet,
)
from psalm.errors import DomainError
from psalm.family import VALID_CODES
from psalm.io import fit_record

from conftest import quad_gig_integral, quad_log_kv, random_scale
from test_family import TABLE_FORMULAS

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

ALL_CODES = tuple(parse_model_code(c) for c in VALID_CODES)


def _require_data(name):
    path = DATA_DIR / name
    if not path.exists():
        pytest.skip(
            f"dataset file {path} not present: the build environment has no "
            "general network access and its package mirror carries no dataset "
            "bundles, so the classic benchmark files cannot be fetched here. "
            "Place the file as described in data/README.md to run this "
            "reproduction."
        )
    return path


def _report(criterion, detail):
    print(f"\nCRITERION {criterion}: PASS - {detail}")


def mk(mu, al, lam, om, p):
    return SalParams(mu=np.asarray(mu, dtype=float),
                     alpha=np.asarray(al, dtype=float),
                     scale=ScaleMatrix(loadings=np.asarray(lam, dtype=float).reshape(p, -1),
                                       omega=om, delta=np.ones(p)))


# ---------------------------------------------------------------------------
# 1-5: dataset reproductions (skip when the files are absent)

@pytest.mark.slow
def test_criterion_1_crabs_principal_components():
    path = _require_data("crabs.csv")
    ds = read_table(path, fmt="csv", label_column="sex",
                    feature_subset=["FL", "RW", "CL", "CW", "BD"])
    assert ds.n == 200 and ds.p == 5
    pcs = pca_project(ds, [1, 3], use_correlation=True)
    grid = SearchGrid(codes=ALL_CODES, g_range=(1, 9), q_range=(1, 1),
                      criterion="bic")
    config = FitConfig(n_starts=20, seed=0)
    outcome = grid_search(pcs.X, grid, config)
    best = outcome.best()
    assert best.spec.code.code == "UCCC", best.spec
    assert best.spec.n_components == 2
    ari = adjusted_rand_index(ds.labels, best.map_labels)
    assert ari == 1.0
    assert abs(best.bic - (-812.8928)) <= 10.0
    assert abs(best.icl - (-815.8221)) <= 10.0
    _report(1, f"UCCC G=2, ARI={ari:.2f}, BIC={best.bic:.4f}, ICL={best.icl:.4f}")


@pytest.mark.slow
def test_criterion_2_bank_notes_clustering():
    path = _require_data("banknotes.csv")
    ds = read_table(path, fmt="csv", label_column="Status")
    assert ds.n == 200 and ds.p == 6
    grid = SearchGrid(codes=ALL_CODES, g_range=(1, 9), q_range=(1, 3),
                      criterion="bic")
    outcome = grid_search(ds.X, grid, FitConfig(n_starts=20, seed=0))
    best = outcome.best()
    labels = best.map_labels
    clusters = np.unique(labels)
    assert clusters.size == 2, f"best model uses {clusters.size} clusters"
    truth = np.array([0 if v == "counterfeit" else 1 for v in
                      (s.lower() for s in ds.labels)])
    pred = (labels == clusters[1]).astype(int)
    miss = min(int(np.sum(pred != truth)), int(np.sum((1 - pred) != truth)))
    assert miss <= 3, f"{miss} misclassifications"
    _report(2, f"{best.spec.code} G={best.spec.n_components}, "
               f"misclassified {miss}/200 (target pattern 99/1, 0/100)")


def _load_yeast():
    path = _require_data("yeast.data")
    names = ["name", "mcg", "gvh", "alm", "mit", "erl", "pox", "vac", "nuc",
             "site"]
    ds = read_table(path, fmt="whitespace", column_names=names,
                    label_column="site", feature_subset=["mcg", "alm", "vac"],
                    classes=["CYT", "ME3"])
    assert ds.n == 626 and ds.p == 3
    return ds


@pytest.mark.slow
def test_criterion_3_yeast_clustering():
    ds = _load_yeast()
    grid = SearchGrid(codes=ALL_CODES, g_range=(1, 9), q_range=(1, 1),
                      criterion="bic")
    outcome = grid_search(ds.X, grid, FitConfig(n_starts=20, seed=0))
    by_bic = outcome.best()
    assert by_bic.spec.n_components == 2
    ari_bic = adjusted_rand_index(ds.labels, by_bic.map_labels)
    assert ari_bic >= 0.80
    assert abs(by_bic.bic - (-5220.763)) <= 25.0
    by_icl = outcome.reranked("icl").best()
    ari_icl = adjusted_rand_index(ds.labels, by_icl.map_labels)
    assert ari_icl >= 0.80
    _report(3, f"BIC pick {by_bic.spec.code} G=2 ARI={ari_bic:.3f} "
               f"BIC={by_bic.bic:.3f}; ICL pick {by_icl.spec.code} "
               f"ARI={ari_icl:.3f}")


@pytest.mark.slow
def test_criterion_4_crabs_semisupervised():
    path = _require_data("crabs.csv")
    ds = read_table(path, fmt="csv",
                    feature_subset=["FL", "RW", "CL", "CW", "BD"])
    raw = read_table(path, fmt="csv", label_column="sp",
                     feature_subset=["FL"])
    sex = read_table(path, fmt="csv", label_column="sex",
                     feature_subset=["FL"])
    groups = [f"{a}-{b}" for a, b in zip(raw.labels, sex.labels)]
    levels = sorted(set(groups))
    cls = np.array([levels.index(g) for g in groups])
    spec = PsalmSpec(code=parse_model_code("CCCU"), n_components=4, n_factors=1)
    config = FitConfig(n_starts=5, seed=0)
    summary = semisupervised_experiment(ds.X, cls, spec, config,
                                        known_frac=0.8, replicates=50)
    assert summary["ari"] >= 0.80
    _report(4, f"CCCU aggregated held-out ARI={summary['ari']:.3f} "
               f"(accuracy {summary['accuracy']:.3f})")


@pytest.mark.slow
def test_criterion_5_yeast_semisupervised():
    ds = _load_yeast()
    levels = sorted(set(ds.labels))
    cls = np.array([levels.index(v) for v in ds.labels])
    spec = PsalmSpec(code=parse_model_code("CCCU"), n_components=2, n_factors=1)
    config = FitConfig(n_starts=5, seed=0)
    summary = semisupervised_experiment(ds.X, cls, spec, config,
                                        known_frac=0.8, replicates=50)
    assert summary["accuracy"] >= 0.95
    _report(5, f"CCCU aggregated held-out accuracy={summary['accuracy']:.4f} "
               f"(ARI {summary['ari']:.3f})")


# ---------------------------------------------------------------------------
# 6-12: property suites (always run)

def test_criterion_6_special_function_oracles():
    from psalm import GigParams, gig_log_density, gig_moments, log_bessel_k

    worst_k = 0.0
    for nu in (0.0, 0.5, 1.0, 2.5, 5.0, 9.5):
        for z in (0.05, 0.5, 1.0, 2.0, 5.0, 20.0):
            want = quad_log_kv(nu, z)
            got = log_bessel_k(nu, z)
            rel = abs(got - want) / max(1.0, abs(want))
            worst_k = max(worst_k, rel)
            assert rel < 1e-8, (nu, z)
    rng = np.random.default_rng(1)
    worst_m = 0.0
    for _ in range(12):
        a = float(rng.uniform(0.3, 4.0))
        b = float(rng.uniform(0.3, 4.0))
        nu = float(rng.uniform(-2.5, 2.5))
        mean, inv_mean = gig_moments(GigParams(a, b, nu))
        wm = quad_gig_integral(a, b, nu, lambda x: x)
        wi = quad_gig_integral(a, b, nu, lambda x: 1.0 / x)
        worst_m = max(worst_m, abs(mean / wm - 1.0), abs(inv_mean / wi - 1.0))
        assert abs(mean / wm - 1.0) < 1e-6
        assert abs(inv_mean / wi - 1.0) < 1e-6
        norm = quad_gig_integral(a, b, nu, lambda x: 1.0)
        assert abs(norm - 1.0) < 1e-6
    _report(6, f"log K rel err <= {worst_k:.2e}, moment rel err <= {worst_m:.2e}")


def test_criterion_7_woodbury_oracles():
    rng = np.random.default_rng(2)
    worst_inv = worst_det = 0.0
    for _ in range(100):
        p = int(rng.integers(2, 9))
        q = int(rng.integers(1, 4))
        if q > p:
            continue
        s = random_scale(rng, p, q)
        dense = s.dense()
        worst_inv = max(worst_inv, float(np.max(np.abs(
            woodbury_inverse(s) - np.linalg.inv(dense)))))
        worst_det = max(worst_det, abs(
            woodbury_logdet(s) - np.linalg.slogdet(dense)[1]))
    assert worst_inv < 1e-8
    assert worst_det < 1e-8
    _report(7, f"inverse err <= {worst_inv:.2e}, logdet err <= {worst_det:.2e}")


def test_criterion_8_likelihood_ascent():
    codes = ["UUUU", "CCCC", "UCCC", "CUUU", "UCUU"]
    worst = -np.inf
    cfg = FitConfig(n_starts=1, seed=0, max_iters=60,
                    anneal=default_anneal_schedule(5, 1, settle=8))
    for k in range(50):
        rng = np.random.default_rng(1000 + k)
        sep = rng.uniform(2.5, 6.0)
        a = mk(np.zeros(2), rng.normal(0, 0.7, 2), rng.normal(0, 0.8, 2), 0.6, 2)
        b = mk(np.full(2, sep), rng.normal(0, 0.7, 2), rng.normal(0, 0.8, 2),
               0.8, 2)
        X, _ = sample_sal_mixture([(0.5, a), (0.5, b)], 160, seed=2000 + k)
        spec = PsalmSpec(code=parse_model_code(codes[k % len(codes)]),
                         n_components=2, n_factors=1)
        result = fit(X, spec, cfg)
        tr = np.array(result.loglik_trace)
        if len(tr) > 1:
            worst = max(worst, float(np.max(tr[:-1] - tr[1:])))
        assert np.all(np.diff(tr) >= -1e-6), (k, codes[k % len(codes)])
    _report(8, f"50 seeded datasets, worst one-cycle decrease {worst:.2e} "
               "(slack 1e-6)")


def test_criterion_9_parameter_counts():
    checked = 0
    for code in VALID_CODES:
        mc = parse_model_code(code)
        for p, q, G in itertools.product(range(2, 9), range(1, 4), range(1, 6)):
            if q > p:
                continue
            assert free_scale_params(mc, p, q, G) == TABLE_FORMULAS[code](p, q, G)
            checked += 1
    _report(9, f"{checked} (code, p, q, G) cells match the printed formulas")


def test_criterion_10_recovery():
    designs = [
        ([(0.4, mk([0, 0, 0], [1, 0, -0.5], [0.9, 0.2, -0.4], 1.0, 3)),
          (0.6, mk([5, 5, 5], [0, 1, 0], [0.3, 0.8, 0.1], 0.7, 3))], 900, 11),
        ([(0.5, mk([0, 0, 0], [0.6, 0.0, 0.3], [0.6, -0.3, 0.2], 0.8, 3)),
          (0.5, mk([8, -7, 6], [-0.4, 0.5, 0], [0.2, 0.7, -0.1], 0.6, 3))],
         900, 12),
    ]
    config = FitConfig(n_starts=20, seed=0)
    spec = PsalmSpec(code=parse_model_code("UUUU"), n_components=2, n_factors=1)
    aris = []
    for comps, n, seed in designs:
        X, labels = sample_sal_mixture(comps, n, seed=seed)
        result = fit(X, spec, config)
        ari = adjusted_rand_index(labels, result.map_labels)
        assert ari >= 0.95, ari
        aris.append(ari)
        # match fitted components to the truth by their means
        truth_means = [p.mu + p.alpha for _, p in comps]
        fitted_means = result.params.mus + result.params.alphas
        counts = np.bincount(labels)
        for g, (_, p) in enumerate(comps):
            j = int(np.argmin([np.linalg.norm(fm - truth_means[g])
                               for fm in fitted_means]))
            cov = p.scale.dense() + np.outer(p.alpha, p.alpha)
            se = np.sqrt(np.diag(cov) / counts[g])
            assert np.all(np.abs(fitted_means[j] - truth_means[g]) <= 3.0 * se)
    _report(10, f"ARIs {', '.join(f'{a:.3f}' for a in aris)}; fitted mean "
                "locations within 3 standard errors")


def test_criterion_11_metrics():
    rng = np.random.default_rng(3)
    from test_metrics import brute_force_ari

    for _ in range(80):
        n = int(rng.integers(2, 61))
        a = rng.integers(0, 4, n).tolist()
        b = rng.integers(0, 3, n).tolist()
        assert adjusted_rand_index(a, b) == pytest.approx(brute_force_ari(a, b),
                                                          abs=1e-12)
    vals = []
    for _ in range(2000):
        a = rng.integers(0, 3, 50).tolist()
        b = rng.integers(0, 3, 50).tolist()
        vals.append(adjusted_rand_index(a, b))
    mean_null = float(np.mean(vals))
    assert abs(mean_null) < 0.02
    _report(11, f"brute-force equivalence on 80 partitions; null mean "
                f"{mean_null:+.4f}")


def test_criterion_12_determinism():
    comps = [(0.5, mk([0, 0], [0.8, 0.2], [0.7, 0.1], 0.6, 2)),
             (0.5, mk([4, 3], [-0.3, 0.7], [0.2, 0.6], 0.5, 2))]
    X, labels = sample_sal_mixture(comps, 300, seed=7)
    spec = PsalmSpec(code=parse_model_code("UCCC"), n_components=2, n_factors=1)
    cfg = FitConfig(n_starts=3, seed=42, max_iters=80,
                    anneal=default_anneal_schedule(6, 1, settle=10))
    docs = []
    for _ in range(2):
        result = fit(X, spec, cfg)
        docs.append(json.dumps(fit_record(result, truth_labels=labels.tolist()),
                               sort_keys=True))
    assert docs[0] == docs[1]
    _report(12, "identical seeds give byte-identical fit records")


# ---------------------------------------------------------------------------
# synthetic end-to-end surrogates for the data-gated criteria

def test_surrogate_grid_selection_synthetic():
    """Full 12-code grid search on sampled data: BIC must find G=2 and a
    near-perfect partition (stands in for the clustering reproductions
    while the classic data files are absent)."""
    comps = [(0.45, mk([0, 0], [0.9, 0.1], [0.7, 0.1], 0.5, 2)),
             (0.55, mk([4.5, 3.5], [-0.2, 0.8], [0.2, 0.7], 0.5, 2))]
    X, labels = sample_sal_mixture(comps, 400, seed=31)
    grid = SearchGrid(codes=ALL_CODES, g_range=(1, 3), q_range=(1, 1),
                      criterion="bic")
    cfg = FitConfig(n_starts=4, seed=5, max_iters=120,
                    anneal=default_anneal_schedule(6, 1, settle=12))
    outcome = grid_search(X, grid, cfg)
    best = outcome.best()
    assert best.spec.n_components == 2
    ari = adjusted_rand_index(labels, best.map_labels)
    assert ari >= 0.90
    by_icl = outcome.reranked("icl").best()
    assert by_icl.icl <= by_icl.bic
    print(f"\nSURROGATE grid selection: {best.spec.code} G=2 ARI={ari:.3f} "
          f"over {len(outcome.results)} fitted cells "
          f"({len(outcome.failures)} failures)")


def test_surrogate_semisupervised_synthetic():
    comps = [(0.5, mk([0, 0, 0], [0.8, 0, 0.3], [0.6, 0.2, -0.2], 0.7, 3)),
             (0.5, mk([4, 3, -3], [-0.3, 0.6, 0], [0.2, 0.6, 0.1], 0.6, 3))]
    X, labels = sample_sal_mixture(comps, 360, seed=33)
    spec = PsalmSpec(code=parse_model_code("CCCU"), n_components=2, n_factors=1)
    cfg = FitConfig(n_starts=2, seed=9, max_iters=80,
                    anneal=default_anneal_schedule(5, 1, settle=10))
    summary = semisupervised_experiment(X, labels, spec, cfg,
                                        known_frac=0.8, replicates=5)
    assert summary["ari"] >= 0.85
    assert summary["accuracy"] >= 0.9
    print(f"\nSURROGATE semi-supervised: pooled ARI={summary['ari']:.3f} "
          f"accuracy={summary['accuracy']:.3f} over 5 replicates")
