from .model_core import (
    ComplexVector,
    ConfigError,
    DenoiserError,
    ImageVector,
    LikelihoodConstraint,
    NumericalError,
    ProxNestError,
    RunConfig,
    make_rng,
    validate_config,
)
from .forward_ops import MaskedFourierOperator, WaveletDictionary, fft2_forward, fft2_inverse
from .prox_calculus import brute_force_prox, l1_wavelet_prox, l2_ball_project, moreau_eval, moreau_grad, soft_threshold
from .likelihood_prox import GaussianLikelihood, constraint_project, prox_residual
from .sampling_kernels import KernelSpec, mh_accept, step_data_driven, step_my_prior, step_smooth_prior
from .denoiser import ExternalDenoiser, denoise, external_denoise, tweedie_score
from .nested_sampler import posterior_mean, run_nested
from .experiment import compare_models, format_summary, load_config, run_experiment, simulate_observation
