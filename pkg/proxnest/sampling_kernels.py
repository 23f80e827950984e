import logging
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .denoiser import Denoiser, denoise
from .model_core import (
    ConfigError,
    ImageVector,
    KernelDiagnostics,
    LikelihoodConstraint,
    Potential,
    RunConfig,
    validate_config,
)

logger = logging.getLogger(__name__)

VARIANTS = ("langevin_smooth_prior", "langevin_my_prior", "data_driven")


# ===============================
# Especificação do kernel
# ===============================


@dataclass(frozen=True)
class KernelSpec:
    """Kernel de Markov ativo: variante, prior, restrição (ou None = só prior).

    lambda_prior / lambda_constraint sobrescrevem cfg.lambda_my por termo.
    """

    variant: str
    prior: Potential | None
    cfg: RunConfig
    constraint: LikelihoodConstraint | None = None
    denoiser: Denoiser | None = None
    mh_correction: bool = False
    lambda_prior: float | None = None
    lambda_constraint: float | None = None
    x_init: ImageVector | None = None

    def __post_init__(self):
        validate_config(self.cfg)
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant desconhecida: {self.variant}")
        if self.variant == "data_driven":
            if self.denoiser is None:
                raise ConfigError("data_driven variant requires a denoiser")
            if not np.isclose(self.denoiser.epsilon, self.cfg.epsilon, rtol=1e-12, atol=0.0):
                raise ConfigError(
                    f"epsilon {self.cfg.epsilon} does not match denoiser epsilon {self.denoiser.epsilon}"
                )
            if self.mh_correction:
                raise ConfigError("mh_correction is not available for the data_driven variant")
        elif self.prior is None:
            raise ConfigError(f"{self.variant} requires a prior")
        if self.variant == "langevin_smooth_prior" and not self.prior.has_score:
            raise ConfigError("langevin_smooth_prior requires a prior with score")
        if self.variant == "langevin_my_prior" and not self.prior.has_prox:
            raise ConfigError("langevin_my_prior requires a prior with prox")
        for name in ("lambda_prior", "lambda_constraint"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def lam_prior(self) -> float:
        return self.lambda_prior or self.cfg.lambda_my

    @property
    def lam_constraint(self) -> float:
        return self.lambda_constraint or self.cfg.lambda_my

    def with_constraint(self, constraint: LikelihoodConstraint | None) -> "KernelSpec":
        return replace(self, constraint=constraint)

    def initial_state(self) -> ImageVector:
        if self.x_init is not None:
            return self.x_init
        shape = getattr(self.prior, "shape", None)
        if shape is None:
            raise ConfigError("não foi possível inferir o shape inicial: informe x_init")
        return ImageVector.zeros(shape)


def check_step_size(spec: KernelSpec) -> bool:
    """Aviso quando δ/(2λ) > 1 (projeções passam do ponto). Devolve True se ok."""
    ok = True
    for lam in {spec.lam_prior, spec.lam_constraint}:
        ratio = spec.cfg.delta / (2.0 * lam)
        if ratio > 1.0:
            logger.warning("passo instável: delta/(2*lambda) = %.3g > 1", ratio)
            ok = False
    return ok


# ===============================
# Termos de deriva
# ===============================


def _constraint_drift(x: ImageVector, spec: KernelSpec, diagnostics: KernelDiagnostics | None) -> np.ndarray:
    # [x − prox_{χ_B}(x)] → 0 sem restrição (amostragem do prior)
    if spec.constraint is None:
        return np.zeros(x.size)
    res = spec.constraint.projection(x)
    # projection devolve o próprio x dentro de B_τ
    if diagnostics is not None and res.x is not x:
        diagnostics.projections += 1
        if not res.converged:
            diagnostics.projection_failures += 1
    return -(spec.cfg.delta / (2.0 * spec.lam_constraint)) * (x.data - res.x.data)


def _prior_drift(x: ImageVector, spec: KernelSpec, formula: str) -> np.ndarray:
    delta = spec.cfg.delta
    if formula == "langevin_smooth_prior":
        return 0.5 * delta * spec.prior.score(x).data
    if formula == "langevin_my_prior":
        lam = spec.lam_prior
        return -(delta / (2.0 * lam)) * (x.data - spec.prior.prox(x, lam).data)
    if formula == "data_driven":
        eps = spec.denoiser.epsilon
        return -(spec.cfg.alpha * delta / (2.0 * eps)) * (x.data - denoise(spec.denoiser, x).data)
    raise ConfigError(f"variant desconhecida: {formula}")


def drift(x: ImageVector, spec: KernelSpec, formula: str | None = None, diagnostics=None) -> np.ndarray:
    """Deriva total (média da proposta menos x) do kernel ativo."""
    formula = formula or spec.variant
    return _prior_drift(x, spec, formula) + _constraint_drift(x, spec, diagnostics)


def _langevin_step(x, spec, rng, formula, noise=None, diagnostics=None, drift_x=None) -> ImageVector:
    w = rng.standard_normal(x.size) if noise is None else np.asarray(noise, dtype=np.float64)
    d = drift(x, spec, formula, diagnostics) if drift_x is None else drift_x
    mean = x.data + d
    return x.with_data(mean + np.sqrt(spec.cfg.delta) * w)


def step_smooth_prior(
    x: ImageVector, spec: KernelSpec, rng, noise=None, diagnostics=None, drift_x=None
) -> ImageVector:
    """x + (δ/2)∇log π(x) − (δ/2λ)[x − prox_{χ_B}(x)] + √δ·w."""
    if spec.prior is None or not spec.prior.has_score:
        raise ConfigError("step_smooth_prior requires a prior with score")
    return _langevin_step(x, spec, rng, "langevin_smooth_prior", noise, diagnostics, drift_x)


def step_my_prior(
    x: ImageVector, spec: KernelSpec, rng, noise=None, diagnostics=None, drift_x=None
) -> ImageVector:
    """x − (δ/2λ)[x − prox_f^λ(x)] − (δ/2λ)[x − prox_{χ_B}(x)] + √δ·w."""
    if spec.prior is None or not spec.prior.has_prox:
        raise ConfigError("step_my_prior requires a prior with prox")
    return _langevin_step(x, spec, rng, "langevin_my_prior", noise, diagnostics, drift_x)


def step_data_driven(
    x: ImageVector, spec: KernelSpec, rng, noise=None, diagnostics=None, drift_x=None
) -> ImageVector:
    """x − (αδ/2ε)[x − D_ε(x)] − (δ/2λ)[x − prox_{χ_B}(x)] + √δ·w."""
    if spec.denoiser is None:
        raise ConfigError("step_data_driven requires a denoiser")
    return _langevin_step(x, spec, rng, "data_driven", noise, diagnostics, drift_x)


STEP_FUNCTIONS = {
    "langevin_smooth_prior": step_smooth_prior,
    "langevin_my_prior": step_my_prior,
    "data_driven": step_data_driven,
}


# ===============================
# Metropolis–Hastings
# ===============================


def _log_q(to: ImageVector, frm: ImageVector, drift_frm: np.ndarray, delta: float) -> float:
    r = to.data - frm.data - drift_frm
    return -float(np.dot(r, r)) / (2.0 * delta)


def mh_accept(x_old: ImageVector, x_proposed: ImageVector, spec: KernelSpec, rng, drift_old=None, diagnostics=None):
    """Correção MH com proposta N(x + deriva, δI). Devolve (aceito, x_next).

    Consome exatamente um uniforme por chamada; propostas fora de B_τ são
    sempre rejeitadas.
    """
    if not spec.mh_correction:
        raise ConfigError("mh_accept called with mh_correction disabled")
    if spec.variant == "data_driven" or spec.prior is None:
        raise ConfigError("mh_correction requires an evaluatable prior density")
    u = float(rng.random())

    if spec.constraint is not None and not spec.constraint.admits(x_proposed):
        if diagnostics is not None:
            diagnostics.rejected += 1
            diagnostics.constraint_rejections += 1
        return False, x_old

    delta = spec.cfg.delta
    if drift_old is None:
        drift_old = drift(x_old, spec)
    drift_new = drift(x_proposed, spec)
    log_ratio = (
        spec.prior.eval(x_old)
        - spec.prior.eval(x_proposed)
        + _log_q(x_old, x_proposed, drift_new, delta)
        - _log_q(x_proposed, x_old, drift_old, delta)
    )
    log_u = np.log(u) if u > 0 else -np.inf
    accepted = bool(log_u < log_ratio)
    if diagnostics is not None:
        if accepted:
            diagnostics.accepted += 1
        else:
            diagnostics.rejected += 1
    return accepted, (x_proposed if accepted else x_old)


def transition(x: ImageVector, spec: KernelSpec, rng, diagnostics: KernelDiagnostics | None = None):
    """Um passo completo do kernel ativo: step_* da variante, seguido de MH se ligado.

    Ordem do RNG por passo: n normais da proposta, depois 1 uniforme se MH.
    Sem MH a cadeia pode sair de B_τ; o termo de Moreau–Yosida da restrição
    a empurra de volta. Com MH propostas fora de B_τ são rejeitadas.
    """
    if diagnostics is not None:
        diagnostics.steps += 1
    step = STEP_FUNCTIONS[spec.variant]
    if not spec.mh_correction:
        proposal = step(x, spec, rng, diagnostics=diagnostics)
        if diagnostics is not None:
            diagnostics.accepted += 1
        return True, proposal

    d_old = drift(x, spec, diagnostics=diagnostics)
    proposal = step(x, spec, rng, drift_x=d_old)
    return mh_accept(x, proposal, spec, rng, drift_old=d_old, diagnostics=diagnostics)


# ===============================
# Traço da cadeia
# ===============================


@dataclass
class ChainTrace:
    """Registro (iteração, log-verossimilhança, aceito) para o chain_trace.csv."""

    likelihood: Potential | None = None
    rows: list = field(default_factory=list)

    def record(self, iteration: int, x: ImageVector, accepted: bool):
        log_like = -self.likelihood.eval(x) if self.likelihood is not None else float("nan")
        self.rows.append({"iteration": int(iteration), "log_likelihood": log_like, "accepted": bool(accepted)})

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=["iteration", "log_likelihood", "accepted"])

    def write_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False)


def evolve(
    x: ImageVector,
    spec: KernelSpec,
    rng,
    n_steps: int,
    diagnostics: KernelDiagnostics | None = None,
    trace: ChainTrace | None = None,
    start_iteration: int = 0,
) -> ImageVector:
    for k in range(int(n_steps)):
        accepted, x = transition(x, spec, rng, diagnostics)
        if trace is not None:
            trace.record(start_iteration + k + 1, x, accepted)
    return x


def sample_prior(
    spec: KernelSpec,
    n_samples: int,
    rng,
    diagnostics: KernelDiagnostics | None = None,
    trace: ChainTrace | None = None,
) -> list[ImageVector]:
    """Amostras do prior: kernel sem o termo da restrição, burn-in e depois thinning."""
    prior_spec = spec.with_constraint(None)
    check_step_size(prior_spec)
    cfg = prior_spec.cfg
    x = prior_spec.initial_state()
    x = evolve(x, prior_spec, rng, cfg.burn_in, diagnostics, trace)
    it = cfg.burn_in
    samples: list[ImageVector] = []
    for _ in range(int(n_samples)):
        x = evolve(x, prior_spec, rng, cfg.thinning, diagnostics, trace, start_iteration=it)
        it += cfg.thinning
        samples.append(x)
    return samples
