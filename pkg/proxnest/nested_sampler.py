import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp
from tqdm import tqdm

from .model_core import (
    ImageVector,
    KernelDiagnostics,
    LikelihoodConstraint,
    NumericalError,
    Potential,
    RunConfig,
    validate_config,
)
from .sampling_kernels import ChainTrace, KernelSpec, check_step_size, evolve, sample_prior

logger = logging.getLogger(__name__)

# blocos de thinning tentados antes de recorrer à cópia do sobrevivente
REPLACEMENT_ATTEMPTS = 3


# ===============================
# Tipos
# ===============================


@dataclass(frozen=True)
class LivePoint:
    x: ImageVector
    log_like: float


@dataclass(frozen=True)
class DeadPoint:
    x: ImageVector
    log_like: float
    log_weight: float


@dataclass(frozen=True)
class NestedModel:
    """Verossimilhança normalizada g (log L = −g) e a fábrica de kernels.

    make_kernel(None) devolve o kernel do prior (inicialização);
    make_kernel(restrição) o kernel restrito a B_τ.
    """

    likelihood: Potential
    make_kernel: Callable[[LikelihoodConstraint | None], KernelSpec]

    def log_like(self, x: ImageVector) -> float:
        return -float(self.likelihood.eval(x))


@dataclass
class NestedSamplerState:
    live: list[LivePoint]
    dead: list[DeadPoint] = field(default_factory=list)
    log_evidence: float = -np.inf
    iteration: int = 0

    def live_log_likes(self) -> np.ndarray:
        return np.array([p.log_like for p in self.live], dtype=np.float64)


@dataclass(frozen=True)
class NestedRunResult:
    log_evidence: float
    log_evidence_std: float
    dead_points: list[DeadPoint]
    posterior_mean: ImageVector
    information: float
    n_live: int
    diagnostics: dict = field(default_factory=dict)
    run_log: list[dict] = field(default_factory=list)

    def posterior_weights(self) -> np.ndarray:
        return _posterior_weights(self.dead_points, self.log_evidence)


# ===============================
# Pesos e estimativas
# ===============================


def _log_terms(dead: list[DeadPoint]) -> np.ndarray:
    return np.array([d.log_weight + d.log_like for d in dead], dtype=np.float64)


def _posterior_weights(dead: list[DeadPoint], log_evidence: float) -> np.ndarray:
    w = np.exp(_log_terms(dead) - log_evidence)
    return w / w.sum()


def _information(dead: list[DeadPoint], log_evidence: float) -> float:
    p = np.exp(_log_terms(dead) - log_evidence)
    ll = np.array([d.log_like for d in dead], dtype=np.float64)
    h = float(np.sum(p * (ll - log_evidence)))
    return max(h, 0.0)


def _weighted_mean(dead: list[DeadPoint], weights: np.ndarray) -> ImageVector:
    stack = np.stack([d.x.data for d in dead])
    return dead[0].x.with_data(np.average(stack, axis=0, weights=weights))


def posterior_mean(result: NestedRunResult) -> ImageVector:
    """Média ponderada dos pontos mortos, pesos ∝ L_i·w_i."""
    if not result.dead_points:
        raise ValueError("posterior_mean: nenhum ponto morto")
    return _weighted_mean(result.dead_points, result.posterior_weights())


def posterior_std(result: NestedRunResult) -> ImageVector:
    """Desvio padrão por pixel sob os mesmos pesos."""
    if not result.dead_points:
        raise ValueError("posterior_std: nenhum ponto morto")
    w = result.posterior_weights()
    stack = np.stack([d.x.data for d in result.dead_points])
    mean = np.average(stack, axis=0, weights=w)
    var = np.average((stack - mean) ** 2, axis=0, weights=w)
    return result.dead_points[0].x.with_data(np.sqrt(var))


def evidence_error(result: NestedRunResult) -> float:
    """√(H/n_live), em nats."""
    return float(np.sqrt(max(result.information, 0.0) / result.n_live))


# ===============================
# Laço de nested sampling
# ===============================


def _checked_log_like(model: NestedModel, x: ImageVector) -> float:
    ll = model.log_like(x)
    if not np.isfinite(ll):
        raise NumericalError(f"log-likelihood não finita: {ll}")
    return ll


def count_violations(run_log: list[dict]) -> int:
    """Linhas do run log cuja reposição ficou abaixo do limiar do ponto morto."""
    n = 0
    for row in run_log:
        if row.get("remainder"):
            continue
        if row["replacement_log_likelihood"] < row["dead_log_likelihood"]:
            n += 1
    return n


def run_nested(
    model: NestedModel,
    cfg: RunConfig,
    rng,
    trapezoid: bool = False,
    progress: bool = False,
    trace: ChainTrace | None = None,
) -> NestedRunResult:
    """Nested sampling com compressão determinística log X_i = −i/n_live.

    Ordem do RNG: amostras do prior (burn-in + thinning), depois por iteração
    o índice do sobrevivente e os passos do kernel restrito. Uma reposição
    com L < L* é descartada e a cadeia segue por mais um bloco de thinning;
    após REPLACEMENT_ATTEMPTS blocos entra a cópia do sobrevivente.
    """
    validate_config(cfg)
    n_live = int(cfg.n_live)
    n_dead = int(cfg.n_dead)
    diagnostics = KernelDiagnostics()

    spec0 = model.make_kernel(None)
    check_step_size(spec0)

    try:
        samples = sample_prior(spec0, n_live, rng, diagnostics, trace)
    except (ValueError, FloatingPointError) as e:
        raise NumericalError(f"cadeia do prior divergiu: {e}") from e
    state = NestedSamplerState(live=[LivePoint(x, _checked_log_like(model, x)) for x in samples])

    # log(X_{i-1} − X_i) = log X_{i-1} + log(1 − e^{−1/n})
    log_shrink = float(np.log(-np.expm1(-1.0 / n_live)))
    log_trap = float(np.log(-np.expm1(-2.0 / n_live) / 2.0))

    run_log: list[dict] = []
    survivor_fallbacks = 0
    rejected_replacements = 0
    it_trace = cfg.burn_in + n_live * cfg.thinning

    for i in tqdm(range(1, n_dead + 1), disable=not progress, desc="nested sampling"):
        lls = state.live_log_likes()
        worst = int(np.argmin(lls))
        ll_star = float(lls[worst])
        if state.dead and ll_star < state.dead[-1].log_like:
            raise NumericalError(f"limiar decrescente na iteração {i}: {ll_star} < {state.dead[-1].log_like}")

        log_x_prev = -(i - 1) / n_live
        log_w = log_x_prev + (log_trap if trapezoid else log_shrink)
        state.dead.append(DeadPoint(state.live[worst].x, ll_star, log_w))
        state.log_evidence = float(np.logaddexp(state.log_evidence, log_w + ll_star))
        state.iteration = i

        tau = -ll_star
        constraint = LikelihoodConstraint(model.likelihood, tau)
        spec = model.make_kernel(constraint)

        j = int(rng.integers(n_live - 1))
        if j >= worst:
            j += 1
        seed_point = state.live[j]
        # sem MH a cadeia pode terminar fora de B_τ: só a amostra emitida é checada
        x_new = seed_point.x
        for _ in range(REPLACEMENT_ATTEMPTS):
            try:
                x_new = evolve(x_new, spec, rng, cfg.thinning, diagnostics, trace, start_iteration=it_trace)
            except (ValueError, FloatingPointError) as e:
                raise NumericalError(f"kernel restrito divergiu na iteração {i}: {e}") from e
            it_trace += cfg.thinning
            ll_new = _checked_log_like(model, x_new)
            if ll_new >= ll_star:
                break
            rejected_replacements += 1
        else:
            survivor_fallbacks += 1
            x_new, ll_new = seed_point.x, seed_point.log_like
        state.live[worst] = LivePoint(x_new, ll_new)

        run_log.append(
            {
                "iteration": i,
                "tau": tau,
                "dead_log_likelihood": ll_star,
                "replacement_log_likelihood": ll_new,
                "log_evidence": state.log_evidence,
            }
        )

    # resto: pontos vivos dividem X_final igualmente, em ordem crescente de L
    log_x_final = -n_dead / n_live
    log_w_live = log_x_final - float(np.log(n_live))
    for p in sorted(state.live, key=lambda p: p.log_like):
        state.dead.append(DeadPoint(p.x, p.log_like, log_w_live))

    dead = state.dead
    log_z = float(logsumexp(_log_terms(dead)))
    info = _information(dead, log_z)
    weights = _posterior_weights(dead, log_z)
    mean = _weighted_mean(dead, weights)
    std = float(np.sqrt(info / n_live))

    run_log.append(
        {
            "iteration": n_dead + 1,
            "tau": None,
            "dead_log_likelihood": None,
            "log_evidence": log_z,
            "remainder": True,
        }
    )

    diag = diagnostics.to_dict()
    diag.update(
        {
            "constraint_violations": count_violations(run_log),
            "rejected_replacements": rejected_replacements,
            "survivor_fallbacks": survivor_fallbacks,
            "n_dead": n_dead,
        }
    )
    if diag["constraint_violations"]:
        logger.error("%d reposições abaixo do limiar L*", diag["constraint_violations"])
    if diagnostics.projection_failures:
        logger.warning("%d projeções não convergiram", diagnostics.projection_failures)
    logger.info("nested sampling: log Z = %.6g ± %.3g (H = %.4g nats)", log_z, std, info)

    return NestedRunResult(
        log_evidence=log_z,
        log_evidence_std=std,
        dead_points=dead,
        posterior_mean=mean,
        information=info,
        n_live=n_live,
        diagnostics=diag,
        run_log=run_log,
    )
