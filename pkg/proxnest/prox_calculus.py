import logging
from dataclasses import dataclass

import numpy as np

from .forward_ops import WaveletDictionary
from .model_core import ComplexVector, ConfigError, ImageVector, Potential

logger = logging.getLogger(__name__)


# ===============================
# Operadores elementares
# ===============================


def soft_threshold(u, threshold: float) -> np.ndarray:
    """sign(u)·max(|u| − t, 0), elemento a elemento."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    u = np.asarray(u, dtype=np.float64)
    if threshold == 0:
        return u.copy()
    return np.sign(u) * np.maximum(np.abs(u) - threshold, 0.0)


def l1_wavelet_prox(x: ImageVector, mu: float, lambda_my: float, dictionary: WaveletDictionary) -> ImageVector:
    """prox de μ‖Ψ†·‖₁ com parâmetro λ: x + Ψ(soft_{λμ}(Ψ†x) − Ψ†x)."""
    if mu == 0:
        return x
    c = dictionary.analysis(x)
    delta = soft_threshold(c, lambda_my * mu) - c
    return x.with_data(x.data + dictionary.synthesis(delta).data)


def l2_ball_project(z: ComplexVector, center: ComplexVector, radius: float) -> ComplexVector:
    if not radius > 0:
        raise ValueError("radius must be positive")
    dz = z.as_complex() - center.as_complex()
    dist = float(np.linalg.norm(dz))
    if dist <= radius:
        return z
    return ComplexVector.from_complex(center.as_complex() + (radius / dist) * dz)


# ===============================
# Potenciais com prox
# ===============================


class L1Potential(Potential):
    """μ‖x‖₁ (|·| em 1-D quando μ = 1)."""

    has_prox = True

    def __init__(self, mu: float = 1.0, shape=None):
        self.mu = float(mu)
        self.shape = tuple(shape) if shape is not None else None

    def eval(self, x: ImageVector) -> float:
        return self.mu * float(np.sum(np.abs(x.data)))

    def prox(self, x: ImageVector, lam: float) -> ImageVector:
        return x.with_data(soft_threshold(x.data, lam * self.mu))

    def subgradient(self, x: ImageVector) -> np.ndarray:
        return self.mu * np.sign(x.data)


class WaveletL1Prior(Potential):
    """−log π(x) = μ‖Ψ†x‖₁ (prior esparso no dicionário wavelet)."""

    has_prox = True

    def __init__(self, mu: float, dictionary: WaveletDictionary):
        if mu < 0:
            raise ConfigError("mu must be non-negative")
        self.mu = float(mu)
        self.dictionary = dictionary
        self.shape = dictionary.shape

    def eval(self, x: ImageVector) -> float:
        return self.mu * float(np.sum(np.abs(self.dictionary.analysis(x))))

    def prox(self, x: ImageVector, lam: float) -> ImageVector:
        return l1_wavelet_prox(x, self.mu, lam, self.dictionary)

    def subgradient(self, x: ImageVector) -> np.ndarray:
        c = self.dictionary.analysis(x)
        return self.dictionary.synthesis(self.mu * np.sign(c)).data


# ===============================
# Envelope de Moreau–Yosida
# ===============================


@dataclass(frozen=True)
class MoreauEnvelope:
    base: Potential
    lambda_my: float

    def __post_init__(self):
        if not self.base.has_prox:
            raise ConfigError(f"{type(self.base).__name__} não tem prox; envelope indisponível")
        if not self.lambda_my > 0:
            raise ConfigError("lambda_my must be positive")

    def eval(self, x: ImageVector) -> float:
        return moreau_eval(self, x)

    def grad(self, x: ImageVector) -> ImageVector:
        return moreau_grad(self, x)


def moreau_eval(env: MoreauEnvelope, x: ImageVector) -> float:
    p = env.base.prox(x, env.lambda_my)
    d = p.data - x.data
    return env.base.eval(p) + float(np.dot(d, d)) / (2.0 * env.lambda_my)


def moreau_grad(env: MoreauEnvelope, x: ImageVector) -> ImageVector:
    p = env.base.prox(x, env.lambda_my)
    return x.with_data((x.data - p.data) / env.lambda_my)


# ===============================
# Oráculo de força bruta (só para testes / prox-check)
# ===============================


@dataclass(frozen=True)
class ProxOracleResult:
    x: ImageVector
    residual: float
    converged: bool
    iterations: int


ORACLE_MAX_DIM = 64
ORACLE_RESIDUAL_TOL = 1e-5


def _prox_objective(base: Potential, u: np.ndarray, x: ImageVector, lam: float) -> float:
    d = u - x.data
    return base.eval(x.with_data(u)) + float(np.dot(d, d)) / (2.0 * lam)


def prox_optimality_residual(base: Potential, p: ImageVector, x: ImageVector, lam: float, h: float = 1e-7) -> float:
    """Maior violação das derivadas direcionais (±e_i) do objetivo do prox em p.

    No ótimo todas são >= 0; o valor devolvido é max(0, −min).
    """
    f0 = _prox_objective(base, p.data, x, lam)
    worst = 0.0
    for i in range(p.size):
        for sgn in (1.0, -1.0):
            u = p.data.copy()
            u[i] += sgn * h
            dd = (_prox_objective(base, u, x, lam) - f0) / h
            worst = min(worst, dd)
    return float(-worst)


def brute_force_prox(base: Potential, x: ImageVector, lambda_my: float, iters: int = 100_000) -> ProxOracleResult:
    """argmin_u base(u) + ‖u − x‖²/(2λ) por subgradiente com passos λ/k.

    Oráculo de teste, não é caminho de produção. Devolve o melhor entre o
    último iterado e a média da segunda metade da trajetória.
    """
    if x.size > ORACLE_MAX_DIM:
        raise ValueError(f"brute_force_prox limitado a dimensão <= {ORACLE_MAX_DIM}")
    lam = float(lambda_my)
    u = x.data.copy()
    tail_sum = np.zeros_like(u)
    tail_n = 0
    half = max(int(iters) // 2, 1)
    for k in range(1, int(iters) + 1):
        g = base.subgradient(x.with_data(u)) + (u - x.data) / lam
        u = u - (lam / k) * g
        if k > half:
            tail_sum += u
            tail_n += 1
    candidates = [u]
    if tail_n:
        candidates.append(tail_sum / tail_n)
    best = min(candidates, key=lambda c: _prox_objective(base, c, x, lam))
    p = x.with_data(best)
    residual = prox_optimality_residual(base, p, x, lam)
    converged = residual <= ORACLE_RESIDUAL_TOL
    if not converged:
        logger.warning("brute_force_prox: resíduo %.3e acima da tolerância", residual)
    return ProxOracleResult(x=p, residual=residual, converged=converged, iterations=int(iters))
