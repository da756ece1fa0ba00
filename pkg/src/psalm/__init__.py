"""Parsimonious shifted asymmetric Laplace mixtures.

Model-based clustering and semi-supervised classification with a family
of twelve factor-analyzer scale structures, estimated by deterministic
annealing followed by an alternating ECM pass, with BIC/ICL selection.
"""

from ._backend import active_backend
from .classify import PartialLabels, fit_semisupervised, semisupervised_experiment
from .errors import (
    ConditioningError,
    DegenerateComponentError,
    DomainError,
    FitFailureError,
    NumericalError,
    ParseError,
    PsalmError,
    SingularPointError,
)
from .estim import (
    AnnealSchedule,
    FitConfig,
    FitResult,
    aitken_converged,
    default_anneal_schedule,
    e_step,
    fit,
    init_loadings,
    init_partition,
    observed_loglik,
)
from .family import (
    ComponentParams,
    ModelCode,
    PsalmSpec,
    ScaleMatrix,
    VALID_CODES,
    assemble_scale,
    free_scale_params,
    parse_model_code,
    total_free_params,
    woodbury_inverse,
    woodbury_logdet,
)
from .io import (
    Dataset,
    load_results,
    pca_project,
    read_table,
    replay_transforms,
    serialize_results,
    standardize,
)
from .metrics import adjusted_rand_index, confusion_matrix, rand_index
from .sal import (
    LatentExpectations,
    SalParams,
    gig_posterior_params,
    latent_expectations,
    sal_log_density,
    sample_sal,
    sample_sal_mixture,
)
from .select import SearchGrid, SearchOutcome, bic, grid_search, icl, map_classify
from .special import GigParams, bessel_ratio, gig_log_density, gig_moments, log_bessel_k

__version__ = "0.1.0"
