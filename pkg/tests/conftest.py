import numpy as np
import pytest

from proxnest.denoiser import Denoiser
from proxnest.model_core import ImageVector


class IdentityDenoiser(Denoiser):
    def __init__(self, epsilon: float = 1.0):
        self.epsilon = float(epsilon)

    def apply(self, x: ImageVector) -> ImageVector:
        return x


class WrongShapeDenoiser(Denoiser):
    epsilon = 1.0

    def apply(self, x: ImageVector) -> ImageVector:
        return ImageVector(x.data[:-1], (1, x.size - 1))


def kkt_project(x0: np.ndarray, A: np.ndarray, y: np.ndarray, radius: float, iters: int = 200) -> np.ndarray:
    """Projeção de x0 em {‖y − Ax‖ ≤ r} por bisseção no multiplicador μ.

    x(μ) = (I + μAᵀA)⁻¹(x0 + μAᵀy); ‖y − Ax(μ)‖ decresce em μ.
    """
    n = x0.size
    ata = A.T @ A
    aty = A.T @ y

    def x_of(mu):
        return np.linalg.solve(np.eye(n) + mu * ata, x0 + mu * aty)

    if np.linalg.norm(y - A @ x0) <= radius:
        return x0.copy()
    lo, hi = 0.0, 1.0
    while np.linalg.norm(y - A @ x_of(hi)) > radius:
        hi *= 2.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.linalg.norm(y - A @ x_of(mid)) > radius:
            lo = mid
        else:
            hi = mid
    return x_of(hi)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
