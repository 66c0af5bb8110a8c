"""Angular Gaussian mixture models for linear-circular regression.

A circular response is modelled as the wrap of a latent Gaussian linear
response, which turns the regression into a mixture of tied-mean linear
regressions.  Fitting is by parametric EM, kernel-local nonparametric EM or
a conjugate Gibbs sampler.
"""

from .baseline import CircularSmoother, smooth_cv, smooth_fit, smooth_predict
from .core import (
    Basis,
    Dataset,
    FitReport,
    ParametricAgmm,
    angular_difference,
    bic,
    mean_circular_error,
    mixture_loglik,
    predict_mean,
    principal_angle,
    unwrap,
    wrap_to_circle,
)
from .datagen import Truth, bessel_ratio, gen_example, sample_von_mises
from .em_nonparametric import Kernel, NonparametricAgmm, fit_local_em, select_K_local, tune
from .em_parametric import e_step, fit_em, m_step, select_K, select_model
from .errors import *  # noqa: F401,F403
from .gibbs import Priors, gibbs_sample, posterior_summary
from .initialization import assign_offsets, cluster_gap, density_cluster, init_parameters

__version__ = "0.1.0"

__all__ = [
    "Basis", "CircularSmoother", "Dataset", "FitReport", "Kernel", "NonparametricAgmm",
    "ParametricAgmm", "Priors", "Truth", "angular_difference", "assign_offsets",
    "bessel_ratio", "bic", "cluster_gap", "density_cluster", "e_step", "fit_em",
    "fit_local_em", "gen_example", "gibbs_sample", "init_parameters", "m_step",
    "mean_circular_error", "mixture_loglik", "posterior_summary", "predict_mean",
    "principal_angle", "sample_von_mises", "select_K", "select_K_local", "select_model",
    "smooth_cv", "smooth_fit", "smooth_predict", "tune", "unwrap", "wrap_to_circle",
]
