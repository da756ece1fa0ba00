import numpy as np
import pytest

from psalm import (
    FitConfig,
    PartialLabels,
    PsalmSpec,
    SalParams,
    ScaleMatrix,
    default_anneal_schedule,
    fit,
    fit_semisupervised,
    parse_model_code,
    sample_sal_mixture,
    semisupervised_experiment,
)
from psalm.errors import DomainError


def make_mixture(n=400, seed=2):
    a = SalParams(mu=np.zeros(2), alpha=np.array([0.8, 0.2]),
                  scale=ScaleMatrix(loadings=np.array([[0.7], [0.1]]),
                                    omega=0.6, delta=np.ones(2)))
    b = SalParams(mu=np.array([4.0, 3.0]), alpha=np.array([-0.3, 0.7]),
                  scale=ScaleMatrix(loadings=np.array([[0.2], [0.6]]),
                                    omega=0.5, delta=np.ones(2)))
    return sample_sal_mixture([(0.5, a), (0.5, b)], n, seed=seed)


def quick_config(**kw):
    kw.setdefault("anneal", default_anneal_schedule(5, 1, settle=10))
    kw.setdefault("n_starts", 2)
    kw.setdefault("max_iters", 60)
    return FitConfig(**kw)


SPEC2 = PsalmSpec(code=parse_model_code("UUUU"), n_components=2, n_factors=1)


class TestPartialLabels:
    def test_requires_every_class(self):
        with pytest.raises(DomainError):
            PartialLabels(known={0: 0, 1: 0, 2: 2}, H=3)

    def test_h_at_least_classes(self):
        with pytest.raises(DomainError):
            PartialLabels(known={0: 0, 1: 1, 2: 2}, H=2)

    def test_extra_unlabelled_components_allowed(self):
        labs = PartialLabels(known={0: 0, 1: 1}, H=3)
        assert labs.n_classes == 2


class TestFitSemisupervised:
    def test_clamped_rows_keep_labels(self):
        X, truth = make_mixture()
        known = {int(i): int(truth[i]) for i in range(0, 200)}
        labels = PartialLabels(known=known, H=2)
        res = fit_semisupervised(X, labels, SPEC2, quick_config(seed=5))
        for i, c in known.items():
            assert res.map_labels[i] == c
            assert res.responsibilities[i, c] == 1.0

    def test_fully_supervised_reduces_to_per_class_fit(self):
        X, truth = make_mixture(n=300)
        known = {int(i): int(truth[i]) for i in range(300)}
        labels = PartialLabels(known=known, H=2)
        res = fit_semisupervised(X, labels, SPEC2, quick_config(seed=6))
        assert np.array_equal(res.map_labels, truth)
        # weights equal the class frequencies
        counts = np.bincount(truth) / len(truth)
        assert np.allclose(res.params.weights, counts, atol=1e-12)

    def test_no_labels_equals_unsupervised(self):
        # clamp nothing: identical trace to the plain fit at equal seed
        X, _ = make_mixture(n=250)
        cfg = quick_config(seed=7)
        plain = fit(X, SPEC2, cfg)
        clamped = fit(X, SPEC2, cfg, clamp=(np.array([], dtype=np.int64),
                                            np.zeros((0, 2))))
        assert plain.loglik_trace == clamped.loglik_trace
        assert np.array_equal(plain.map_labels, clamped.map_labels)

    def test_joint_loglik_ascends(self):
        X, truth = make_mixture(n=300, seed=9)
        known = {int(i): int(truth[i]) for i in range(0, 300, 3)}
        labels = PartialLabels(known=known, H=2)
        res = fit_semisupervised(X, labels, SPEC2, quick_config(seed=8))
        tr = np.array(res.loglik_trace)
        assert np.all(np.diff(tr) >= -1e-6)

    def test_spec_label_mismatch(self):
        X, truth = make_mixture(n=100)
        labels = PartialLabels(known={0: 0, 1: 1}, H=2)
        bad_spec = PsalmSpec(code=parse_model_code("UUUU"), n_components=3,
                             n_factors=1)
        with pytest.raises(DomainError):
            fit_semisupervised(X, labels, bad_spec, quick_config())

    def test_predictions_beat_chance(self):
        X, truth = make_mixture(n=400, seed=12)
        rng = np.random.default_rng(0)
        known_idx = rng.choice(400, 320, replace=False)
        labels = PartialLabels(known={int(i): int(truth[i]) for i in known_idx},
                               H=2)
        res = fit_semisupervised(X, labels, SPEC2, quick_config(seed=13))
        held = np.setdiff1d(np.arange(400), known_idx)
        acc = np.mean(res.map_labels[held] == truth[held])
        assert acc > 0.85


class TestExperiment:
    def test_aggregation_shapes_and_determinism(self):
        X, truth = make_mixture(n=240, seed=20)
        cfg = quick_config(seed=21, n_starts=1, max_iters=40)
        out1 = semisupervised_experiment(X, truth, SPEC2, cfg,
                                         known_frac=0.8, replicates=3)
        out2 = semisupervised_experiment(X, truth, SPEC2, cfg,
                                         known_frac=0.8, replicates=3)
        held = 240 - int(0.8 * 240)
        assert out1["confusion"].sum() == 3 * held
        assert np.array_equal(out1["confusion"], out2["confusion"])
        assert out1["ari"] == out2["ari"]
        assert len(out1["per_replicate"]) == 3

    def test_rejects_bad_fraction(self):
        X, truth = make_mixture(n=100)
        with pytest.raises(DomainError):
            semisupervised_experiment(X, truth, SPEC2, quick_config(),
                                      known_frac=1.5, replicates=2)
