from dataclasses import dataclass

import numpy as np


# ===============================
# Erros
# ===============================


class ProxNestError(Exception):
    """Erro base do pacote (mensagem amigável, pronta para o usuário)."""


class ConfigError(ProxNestError, ValueError):
    """Configuração inválida (RunConfig, ExperimentConfig, PrimalDualConfig...)."""


class NumericalError(ProxNestError):
    """Falha numérica que impede continuar (ex.: log-verossimilhança não finita)."""


class InvalidImageError(ProxNestError, ValueError):
    """Vetor de imagem inconsistente com o shape ou com entradas não finitas."""


class DenoiserError(ProxNestError):
    """Falha do denoiser (interno ou externo)."""


class DenoiserTimeoutError(DenoiserError):
    pass


class DenoiserShapeError(DenoiserError):
    pass


class DenoiserOutputError(DenoiserError):
    pass


# ===============================
# Vetores
# ===============================


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True).ravel()
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ImageVector:
    """Imagem real guardada achatada (row-major); shape é só metadado."""

    data: np.ndarray
    shape: tuple[int, int]

    def __post_init__(self):
        data = _frozen(self.data)
        shape = tuple(int(s) for s in self.shape)
        if len(shape) != 2 or shape[0] <= 0 or shape[1] <= 0:
            raise InvalidImageError(f"shape inválido: {self.shape}")
        if data.size != shape[0] * shape[1]:
            raise InvalidImageError(
                f"length {data.size} does not match shape {shape[0]}x{shape[1]}"
            )
        if not np.all(np.isfinite(data)):
            raise InvalidImageError("image contains non-finite entries")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "shape", shape)

    @classmethod
    def from_array(cls, arr) -> "ImageVector":
        a = np.asarray(arr, dtype=np.float64)
        if a.ndim == 1:
            return cls(a, (1, a.size))
        if a.ndim != 2:
            raise InvalidImageError(f"esperado array 1-D ou 2-D, recebido {a.ndim}-D")
        return cls(a, a.shape)

    @classmethod
    def zeros(cls, shape) -> "ImageVector":
        return cls(np.zeros(int(shape[0]) * int(shape[1])), shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    def as_array(self) -> np.ndarray:
        return self.data.reshape(self.shape)

    def with_data(self, data) -> "ImageVector":
        return ImageVector(data, self.shape)

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))


@dataclass(frozen=True, eq=False)
class ComplexVector:
    """Observação complexa y, guardada como (re, im)."""

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        re = _frozen(self.re)
        im = _frozen(self.im)
        if re.size != im.size:
            raise InvalidImageError(f"re/im com tamanhos diferentes: {re.size} != {im.size}")
        if not (np.all(np.isfinite(re)) and np.all(np.isfinite(im))):
            raise InvalidImageError("complex vector contains non-finite entries")
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    @classmethod
    def from_complex(cls, z) -> "ComplexVector":
        z = np.asarray(z, dtype=np.complex128).ravel()
        return cls(z.real, z.imag)

    @classmethod
    def from_real(cls, r) -> "ComplexVector":
        r = np.asarray(r, dtype=np.float64).ravel()
        return cls(r, np.zeros_like(r))

    @property
    def size(self) -> int:
        return int(self.re.size)

    def as_complex(self) -> np.ndarray:
        return self.re + 1j * self.im

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.re**2) + np.sum(self.im**2)))


def real_inner(a: ComplexVector, b: ComplexVector) -> float:
    """Re⟨a, b⟩: produto interno usado no teste do adjunto."""
    return float(np.dot(a.re, b.re) + np.dot(a.im, b.im))


# ===============================
# Potenciais
# ===============================


class Potential:
    """Densidade negativa-log avaliável (até uma constante aditiva).

    Subclasses declaram has_score / has_prox e implementam o que declaram.
    `subgradient` alimenta o oráculo de força bruta; `project_sublevel` é a
    projeção no conjunto {x : eval(x) <= tau} quando existe forma fechada ou
    algoritmo dedicado.
    """

    has_score: bool = False
    has_prox: bool = False
    shape: tuple[int, int] | None = None

    def eval(self, x: ImageVector) -> float:
        raise NotImplementedError

    def score(self, x: ImageVector) -> ImageVector:
        raise NotImplementedError(f"{type(self).__name__} não tem score")

    def prox(self, x: ImageVector, lam: float) -> ImageVector:
        raise NotImplementedError(f"{type(self).__name__} não tem prox")

    def subgradient(self, x: ImageVector) -> np.ndarray:
        if self.has_score:
            # score = ∇log densidade = -∇eval
            return -self.score(x).data
        raise NotImplementedError(f"{type(self).__name__} não tem subgradiente")

    def project_sublevel(self, x: ImageVector, tau: float) -> "ProjectionResult":
        raise NotImplementedError(f"{type(self).__name__} não sabe projetar em {{eval <= tau}}")


class ZeroPotential(Potential):
    has_score = True
    has_prox = True

    def __init__(self, shape=None):
        self.shape = tuple(shape) if shape is not None else None

    def eval(self, x: ImageVector) -> float:
        return 0.0

    def score(self, x: ImageVector) -> ImageVector:
        return x.with_data(np.zeros(x.size))

    def prox(self, x: ImageVector, lam: float) -> ImageVector:
        return x


class GaussianPotential(Potential):
    """‖x − m‖²/(2s²) + (n/2)·log(2πs²): Gaussiana isotrópica normalizada.

    Serve como prior suave e como verossimilhança de teste (Φ = I).
    """

    has_score = True
    has_prox = True

    def __init__(self, mean: ImageVector, variance: float):
        if not variance > 0:
            raise ConfigError("variance must be positive")
        self.mean = mean
        self.variance = float(variance)
        self.shape = mean.shape

    @property
    def log_norm(self) -> float:
        return 0.5 * self.mean.size * np.log(2.0 * np.pi * self.variance)

    def quadratic(self, x: ImageVector) -> float:
        r = x.data - self.mean.data
        return float(np.dot(r, r) / (2.0 * self.variance))

    def eval(self, x: ImageVector) -> float:
        return self.quadratic(x) + self.log_norm

    def score(self, x: ImageVector) -> ImageVector:
        return x.with_data(-(x.data - self.mean.data) / self.variance)

    def prox(self, x: ImageVector, lam: float) -> ImageVector:
        s2 = self.variance
        return x.with_data((s2 * x.data + lam * self.mean.data) / (s2 + lam))

    def project_sublevel(self, x: ImageVector, tau: float):
        # bola ‖x − m‖ <= sqrt(2 s² (tau − log_norm)), forma fechada
        budget = tau - self.log_norm
        radius = np.sqrt(max(2.0 * self.variance * budget, 0.0))
        r = x.data - self.mean.data
        dist = float(np.linalg.norm(r))
        if dist <= radius:
            return ProjectionResult(x=x, converged=True, residual=0.0, iterations=0)
        out = self.mean.data + (radius / dist) * r
        return ProjectionResult(x=x.with_data(out), converged=True, residual=0.0, iterations=0)


# ===============================
# Projeção
# ===============================


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    """Saída de uma projeção; converged=False marca o iterado final sem convergência."""

    x: ImageVector
    converged: bool
    residual: float
    iterations: int


# ===============================
# Restrição de verossimilhança
# ===============================

# folga numérica do teste de viabilidade (medida nula, mas necessária em float)
FEASIBILITY_SLACK = 1e-12


@dataclass(frozen=True)
class LikelihoodConstraint:
    """Conjunto convexo B_tau = {x : g(x) < tau}."""

    potential_g: Potential
    tau: float

    def contains(self, x: ImageVector) -> bool:
        return self.potential_g.eval(x) < self.tau

    def slack(self) -> float:
        return FEASIBILITY_SLACK * max(1.0, abs(self.tau))

    def admits(self, x: ImageVector) -> bool:
        """Versão tolerante (fechada) de contains, usada nas rejeições duras."""
        return self.potential_g.eval(x) < self.tau + self.slack()

    def projection(self, x: ImageVector) -> "ProjectionResult":
        if self.contains(x):
            return ProjectionResult(x=x, converged=True, residual=0.0, iterations=0)
        return self.potential_g.project_sublevel(x, self.tau)

    def project(self, x: ImageVector) -> ImageVector:
        return self.projection(x).x


# ===============================
# Configuração da execução
# ===============================


@dataclass(frozen=True)
class RunConfig:
    delta: float = 1e-7
    lambda_my: float = 5e-7
    mu: float = 5e4
    sigma: float = 1.0
    epsilon: float = 8.34
    alpha: float = 3.5e-7
    n_live: int = 100
    n_dead: int = 2500
    thinning: int = 20
    burn_in: int = 100
    rng_seed: int = 0

    @classmethod
    def from_dict(cls, payload: dict | None) -> "RunConfig":
        payload = payload or {}
        base = cls()
        try:
            return cls(
                delta=float(payload.get("delta", base.delta)),
                lambda_my=float(payload.get("lambda_my", base.lambda_my)),
                mu=float(payload.get("mu", base.mu)),
                sigma=float(payload.get("sigma", base.sigma)),
                epsilon=float(payload.get("epsilon", base.epsilon)),
                alpha=float(payload.get("alpha", base.alpha)),
                n_live=int(payload.get("n_live", base.n_live)),
                n_dead=int(payload.get("n_dead", base.n_dead)),
                thinning=int(payload.get("thinning", base.thinning)),
                burn_in=int(payload.get("burn_in", base.burn_in)),
                rng_seed=int(payload.get("rng_seed", base.rng_seed)),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"run config inválida: {e}") from e

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "lambda_my": self.lambda_my,
            "mu": self.mu,
            "sigma": self.sigma,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "n_live": self.n_live,
            "n_dead": self.n_dead,
            "thinning": self.thinning,
            "burn_in": self.burn_in,
            "rng_seed": self.rng_seed,
        }


def validate_config(cfg: RunConfig) -> None:
    """Levanta ConfigError com o primeiro invariante violado (pelo nome do campo)."""
    if not cfg.delta > 0:
        raise ConfigError("delta must be positive")
    if not cfg.lambda_my > 0:
        raise ConfigError("lambda_my must be positive")
    if not cfg.sigma > 0:
        raise ConfigError("sigma must be positive")
    if cfg.n_live < 2:
        raise ConfigError("n_live must be ≥ 2")
    if cfg.thinning < 1:
        raise ConfigError("thinning must be ≥ 1")
    if cfg.n_dead < 0:
        raise ConfigError("n_dead must be ≥ 0")
    if cfg.burn_in < 0:
        raise ConfigError("burn_in must be ≥ 0")
    if cfg.rng_seed < 0:
        raise ConfigError("rng_seed must be ≥ 0")


# ===============================
# RNG
# ===============================


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Um gerador por execução; cadeias extras usam stream > 0 (mesma semente mestre)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.default_rng(ss)


@dataclass
class KernelDiagnostics:
    steps: int = 0
    accepted: int = 0
    rejected: int = 0
    constraint_rejections: int = 0
    projections: int = 0
    projection_failures: int = 0

    def acceptance_rate(self) -> float:
        n = self.accepted + self.rejected
        return float(self.accepted) / n if n else 1.0

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "accepted": self.accepted,
            "rejected": self.rejected,
            "constraint_rejections": self.constraint_rejections,
            "projections": self.projections,
            "projection_failures": self.projection_failures,
            "acceptance_rate": self.acceptance_rate(),
        }
