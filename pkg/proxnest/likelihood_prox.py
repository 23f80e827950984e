import logging
from dataclasses import dataclass

import numpy as np

from .forward_ops import MeasurementOperator, power_iteration
from .model_core import (
    ComplexVector,
    ConfigError,
    ImageVector,
    Potential,
    ProjectionResult,
)
from .prox_calculus import l2_ball_project

logger = logging.getLogger(__name__)

# folga do teste de viabilidade em g̃ (a bola é aberta, a projeção cai na borda)
FEASIBILITY_TOL = 1e-12


# ===============================
# Configuração do primal–dual
# ===============================


@dataclass(frozen=True)
class PrimalDualConfig:
    delta1: float = 1.0
    delta2: float = 1.0
    delta3: float = 1.0
    max_iters: int = 200
    tol: float = 1e-5

    @classmethod
    def for_operator(cls, op: MeasurementOperator, max_iters: int = 200, tol: float = 1e-5) -> "PrimalDualConfig":
        """δ1 = δ2 = 1/‖Φ‖ (estimativa por iteração de potência), δ3 = 1."""
        est = max(power_iteration(op, iters=20), 1e-12)
        bound = max(op.operator_norm_bound, est)
        step = 1.0 / bound
        return cls(delta1=step, delta2=step, delta3=1.0, max_iters=max_iters, tol=tol)

    @classmethod
    def from_dict(cls, payload: dict | None, op: MeasurementOperator) -> "PrimalDualConfig":
        payload = payload or {}
        base = cls.for_operator(
            op,
            max_iters=int(payload.get("max_iters") or 200),
            tol=float(payload.get("tol") or 1e-5),
        )
        return cls(
            delta1=float(payload.get("delta1") or base.delta1),
            delta2=float(payload.get("delta2") or base.delta2),
            delta3=float(payload.get("delta3", base.delta3)),
            max_iters=base.max_iters,
            tol=base.tol,
        )

    def validate(self, op: MeasurementOperator) -> None:
        if self.delta1 <= 0 or self.delta2 <= 0:
            raise ConfigError("delta1 and delta2 must be positive")
        if self.delta1 * self.delta2 * op.operator_norm_bound**2 > 1.0 + 1e-9:
            raise ConfigError("delta1·delta2·‖Φ‖² must be ≤ 1")
        if not (0.0 <= self.delta3 <= 1.0):
            raise ConfigError("delta3 must be in [0, 1]")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be ≥ 1")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")


# ===============================
# Verossimilhança Gaussiana
# ===============================


class GaussianLikelihood(Potential):
    """g(x) = ‖y − Φx‖²/(2σ²) + dof·log(σ√(2π)).

    O limiar `tau` de `project_sublevel` está na escala normalizada (a mesma
    de eval); constraint_project trabalha com a quadrática g̃ sem constante.
    """

    has_score = True
    has_prox = False

    def __init__(self, y: ComplexVector, op: MeasurementOperator, sigma: float, pd: PrimalDualConfig | None = None):
        if not sigma > 0:
            raise ConfigError("sigma must be positive")
        if y.size != op.output_dim:
            raise ConfigError(f"y tem {y.size} entradas, operador produz {op.output_dim}")
        self.y = y
        self.op = op
        self.sigma = float(sigma)
        self.shape = op.shape
        self.pd = pd or PrimalDualConfig.for_operator(op)
        self.pd.validate(op)

    @property
    def log_norm(self) -> float:
        return self.op.dof * float(np.log(self.sigma * np.sqrt(2.0 * np.pi)))

    def residual(self, x: ImageVector) -> np.ndarray:
        return self.y.as_complex() - self.op.forward(x).as_complex()

    def eval_quadratic(self, x: ImageVector) -> float:
        r = self.residual(x)
        return float(np.vdot(r, r).real) / (2.0 * self.sigma**2)

    def eval(self, x: ImageVector) -> float:
        return self.eval_quadratic(x) + self.log_norm

    def score(self, x: ImageVector) -> ImageVector:
        """∇log L = Φ†(y − Φx)/σ²."""
        r = ComplexVector.from_complex(self.residual(x))
        return x.with_data(self.op.adjoint(r).data / self.sigma**2)

    def log_likelihood(self, x: ImageVector) -> float:
        return -self.eval(x)

    def project_sublevel(self, x: ImageVector, tau: float) -> ProjectionResult:
        return constraint_project(x, tau - self.log_norm, self, self.pd)


# ===============================
# Projeção na bola de verossimilhança
# ===============================


def _ball_radius(tau: float, like: GaussianLikelihood) -> float:
    return float(np.sqrt(max(2.0 * tau * like.sigma**2, 0.0)))


def prox_residual(x_in: ImageVector, x_out: ImageVector, tau: float, like: GaussianLikelihood) -> float:
    """Violação relativa de viabilidade: max(0, ‖y − Φx‖² − 2τσ²)/(2τσ²)."""
    r = like.residual(x_out)
    r2 = float(np.vdot(r, r).real)
    budget = 2.0 * tau * like.sigma**2
    if budget <= 0:
        return float("inf") if r2 > 0 else 0.0
    return max(0.0, r2 - budget) / budget


def _closed_form_project(x: ImageVector, tau: float, like: GaussianLikelihood) -> ImageVector:
    # ΦΦ† = I: só a componente Φx é corrigida, o núcleo fica intacto
    z = like.op.forward(x)
    pz = l2_ball_project(z, like.y, _ball_radius(tau, like))
    corr = ComplexVector.from_complex(pz.as_complex() - z.as_complex())
    return x.with_data(x.data + like.op.adjoint(corr).data)


def constraint_project(
    x_current: ImageVector,
    tau: float,
    like: GaussianLikelihood,
    pd: PrimalDualConfig | None = None,
    fast_path: bool = True,
) -> ProjectionResult:
    """prox de χ_{B_τ}: ponto de {x : ‖y − Φx‖² ≤ 2τσ²} mais próximo de x_current.

    tau é o limiar na quadrática g̃ (sem constante). Iteração primal–dual
    iniciada na posição atual (z = Φx, x = x̄ = x_current); com
    δ1 = δ2 = 1 coincide com o esquema de três passos:
      1. z ← v − δ1·proj(v/δ1),  v = z + δ1·Φx̄
      2. x ← (x_k − δ2·Φ†z + δ2·x′)/(1 + δ2)
      3. x̄ ← x + δ3·(x − x_k)
    """
    pd = pd or like.pd
    if like.eval_quadratic(x_current) <= tau + FEASIBILITY_TOL:
        return ProjectionResult(x=x_current, converged=True, residual=0.0, iterations=0)
    radius = _ball_radius(tau, like)
    op = like.op

    if fast_path and op.orthonormal_rows and not np.any(like.y.im) and radius > 0:
        out = _closed_form_project(x_current, tau, like)
        return ProjectionResult(x=out, converged=True, residual=prox_residual(x_current, out, tau, like), iterations=0)

    d1, d2, d3 = pd.delta1, pd.delta2, pd.delta3
    y = like.y.as_complex()
    x0 = x_current.data
    x = x0.copy()
    x_bar = x0.copy()
    z = op.forward(x_current).as_complex()

    converged = False
    it = 0
    for it in range(1, int(pd.max_iters) + 1):
        v = z + d1 * op.forward(x_current.with_data(x_bar)).as_complex()
        w = v / d1 - y
        nw = float(np.linalg.norm(w))
        if nw > radius:
            w = w * (radius / nw) if nw > 0 else w
        z = v - d1 * (w + y)

        grad = op.adjoint(ComplexVector.from_complex(z)).data
        x_new = (x - d2 * grad + d2 * x0) / (1.0 + d2)
        x_bar = x_new + d3 * (x_new - x)

        change = float(np.linalg.norm(x_new - x))
        x = x_new
        if change <= pd.tol * max(float(np.linalg.norm(x)), 1e-12):
            converged = True
            break

    out = x_current.with_data(x)
    residual = prox_residual(x_current, out, tau, like)
    if not converged:
        logger.warning(
            "constraint_project: sem convergência em %d iterações (resíduo %.3e)", pd.max_iters, residual
        )
    return ProjectionResult(x=out, converged=converged, residual=residual, iterations=it)
