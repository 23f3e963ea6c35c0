"""Evaluation procedures for generative image models.

Divergence-based fitting (KLD/MMD/JSD), dequantized log-likelihood and its
discrete compression bound, adversarial mixture constructions, Parzen-window
estimation with the k-means exploit, and the shifted-window nearest-neighbor
overfitting test.
"""

__version__ = "0.1.0"

from .density import (
    GaussianMixture,
    IsotropicGaussian,
    SampleMatrix,
    gaussian_log_density,
    gmm_log_density,
    log_density,
    log_sum_exp,
    make_rng,
    sample,
    subseed,
)
from .divergence import (
    FitConfig,
    KernelBank,
    QuadratureGrid,
    fit_jsd,
    fit_kld,
    fit_mmd,
    jsd,
    mmd_squared,
)
from .likelihood import (
    DiscreteLLEstimate,
    MixtureTrickModel,
    QuantizedImageSet,
    build_lookup_table_model,
    dequantize,
    discrete_log_likelihood,
    jensen_bound_check,
    mixture_trick_log_density,
    nats_to_bits_per_dim,
    posterior_alpha,
    sample_mixture_trick,
)
from .modelio import load_model, model_from_text, model_to_text, save_model
from .nn_overfit import (
    PrecisionPoint,
    ShiftedQuerySet,
    binomial_ci,
    extract_shifted_windows,
    nearest_neighbor,
    shift_precision_curve,
)
from .parzen import (
    KMeansResult,
    ParzenEstimator,
    SweepResult,
    kmeans,
    parzen_benchmark,
    parzen_convergence_sweep,
    parzen_log_likelihood,
    sample_centroids,
    select_bandwidth,
)
