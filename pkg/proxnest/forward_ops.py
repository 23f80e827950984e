import logging
from dataclasses import dataclass, field

import numpy as np
import pywt

from .model_core import ComplexVector, ConfigError, ImageVector

logger = logging.getLogger(__name__)


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def _check_pow2(shape) -> None:
    rows, cols = shape
    if not (_is_pow2(int(rows)) and _is_pow2(int(cols))):
        raise ConfigError(f"FFT exige dimensões potência de 2, recebido {rows}x{cols}")


# ===============================
# FFT unitária
# ===============================


def fft2_forward(x: ImageVector) -> ComplexVector:
    """DFT 2-D com normalização unitária (Parseval: ‖X‖ = ‖x‖)."""
    _check_pow2(x.shape)
    return ComplexVector.from_complex(np.fft.fft2(x.as_array(), norm="ortho"))


def fft2_inverse(coeffs: ComplexVector, shape) -> ImageVector:
    """Inversa da fft2_forward; devolve só a parte real (imagem real)."""
    _check_pow2(shape)
    z = coeffs.as_complex().reshape(shape)
    return ImageVector(np.fft.ifft2(z, norm="ortho").real, shape)


def make_mask(shape, kept_fraction: float, seed: int) -> np.ndarray:
    """Máscara booleana com exatamente round(f·n) coeficientes escolhidos sem reposição."""
    if not (0.0 < kept_fraction <= 1.0):
        raise ConfigError("kept_fraction must be in (0, 1]")
    n = int(shape[0]) * int(shape[1])
    k = int(round(kept_fraction * n))
    rng = np.random.default_rng(int(seed))
    mask = np.zeros(n, dtype=bool)
    mask[rng.choice(n, size=k, replace=False)] = True
    return mask


# ===============================
# Operadores de medida
# ===============================


class MeasurementOperator:
    """Φ: imagem real -> dados complexos. O adjunto usa Re⟨·,·⟩."""

    shape: tuple[int, int]
    real_output: bool = False

    @property
    def input_dim(self) -> int:
        return int(self.shape[0] * self.shape[1])

    @property
    def output_dim(self) -> int:
        raise NotImplementedError

    @property
    def dof(self) -> int:
        """Graus de liberdade reais dos dados (m se real, 2m se complexo)."""
        return self.output_dim if self.real_output else 2 * self.output_dim

    @property
    def operator_norm_bound(self) -> float:
        raise NotImplementedError

    # Φ tem linhas ortonormais (ΦΦ† = I): habilita a projeção em forma fechada
    orthonormal_rows: bool = False

    def forward(self, x: ImageVector) -> ComplexVector:
        raise NotImplementedError

    def adjoint(self, y: ComplexVector) -> ImageVector:
        raise NotImplementedError


class IdentityOperator(MeasurementOperator):
    real_output = True
    orthonormal_rows = True

    def __init__(self, shape):
        self.shape = (int(shape[0]), int(shape[1]))

    @property
    def output_dim(self) -> int:
        return self.input_dim

    @property
    def operator_norm_bound(self) -> float:
        return 1.0

    def forward(self, x: ImageVector) -> ComplexVector:
        return ComplexVector.from_real(x.data)

    def adjoint(self, y: ComplexVector) -> ImageVector:
        return ImageVector(y.re, self.shape)


class MatrixOperator(MeasurementOperator):
    """Φ real e denso (identidade mascarada, linhas ortonormais aleatórias...)."""

    real_output = True

    def __init__(self, matrix, shape=None):
        a = np.array(matrix, dtype=np.float64, copy=True)
        if a.ndim != 2:
            raise ConfigError("matrix operator needs a 2-D matrix")
        a.setflags(write=False)
        self.matrix = a
        self.shape = tuple(shape) if shape is not None else (1, a.shape[1])
        if self.shape[0] * self.shape[1] != a.shape[1]:
            raise ConfigError(f"matriz {a.shape} incompatível com shape {self.shape}")
        self._norm = float(np.linalg.norm(a, 2)) if a.size else 0.0
        gram = a @ a.T
        self.orthonormal_rows = bool(np.allclose(gram, np.eye(a.shape[0]), atol=1e-12))

    @classmethod
    def masked_identity(cls, shape, mask) -> "MatrixOperator":
        n = int(shape[0]) * int(shape[1])
        mask = np.asarray(mask, dtype=bool).ravel()
        return cls(np.eye(n)[mask], shape)

    @property
    def output_dim(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def operator_norm_bound(self) -> float:
        # norma espectral exata (+ folga de arredondamento)
        return self._norm * (1.0 + 1e-12)

    def forward(self, x: ImageVector) -> ComplexVector:
        return ComplexVector.from_real(self.matrix @ x.data)

    def adjoint(self, y: ComplexVector) -> ImageVector:
        return ImageVector(self.matrix.T @ y.re, self.shape)


class MaskedFourierOperator(MeasurementOperator):
    """FFT unitária seguida da seleção dos coeficientes da máscara."""

    real_output = False

    def __init__(self, shape, mask):
        self.shape = (int(shape[0]), int(shape[1]))
        _check_pow2(self.shape)
        mask = np.array(mask, dtype=bool, copy=True).ravel()
        if mask.size != self.input_dim:
            raise ConfigError(f"mask length {mask.size} != {self.input_dim}")
        mask.setflags(write=False)
        self.mask = mask

    @classmethod
    def random(cls, shape, kept_fraction: float, seed: int) -> "MaskedFourierOperator":
        return cls(shape, make_mask(shape, kept_fraction, seed))

    @property
    def kept_fraction(self) -> float:
        return float(self.mask.mean())

    @property
    def output_dim(self) -> int:
        return int(self.mask.sum())

    @property
    def operator_norm_bound(self) -> float:
        return 1.0

    def forward(self, x: ImageVector) -> ComplexVector:
        coeffs = np.fft.fft2(x.as_array(), norm="ortho").ravel()
        return ComplexVector.from_complex(coeffs[self.mask])

    def adjoint(self, y: ComplexVector) -> ImageVector:
        full = np.zeros(self.input_dim, dtype=np.complex128)
        full[self.mask] = y.as_complex()
        img = np.fft.ifft2(full.reshape(self.shape), norm="ortho").real
        return ImageVector(img, self.shape)


class ComposedOperator(MeasurementOperator):
    """Φ∘Ψ: operador de medida aplicado depois da síntese do dicionário."""

    def __init__(self, outer: MeasurementOperator, inner: "WaveletDictionary"):
        if tuple(outer.shape) != tuple(inner.shape):
            raise ConfigError("shapes incompatíveis na composição")
        self.outer = outer
        self.inner = inner
        self.shape = outer.shape
        self.real_output = outer.real_output

    @property
    def output_dim(self) -> int:
        return self.outer.output_dim

    @property
    def operator_norm_bound(self) -> float:
        # Ψ ortogonal: ‖ΦΨ‖ = ‖Φ‖
        return self.outer.operator_norm_bound

    def forward(self, x: ImageVector) -> ComplexVector:
        return self.outer.forward(self.inner.synthesis(x.data))

    def adjoint(self, y: ComplexVector) -> ImageVector:
        return ImageVector(self.inner.analysis(self.outer.adjoint(y)), self.shape)


def power_iteration(op: MeasurementOperator, iters: int = 20, seed: int = 0) -> float:
    """Estimativa de ‖Φ‖ por iteração de potência em Φ†Φ."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.input_dim)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(int(iters)):
        w = op.adjoint(op.forward(ImageVector(v, op.shape))).data
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        est = np.sqrt(nw)
        v = w / nw
    return float(est)


# ===============================
# Dicionário wavelet
# ===============================

WAVELET_FAMILIES = {
    "haar": "haar",
    "daubechies6": "db6",
}


@dataclass(frozen=True)
class WaveletDictionary:
    """Ψ ortogonal (Haar ou Daubechies-6), extensão periódica."""

    family: str
    levels: int
    shape: tuple[int, int]
    _slices: list = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        family = str(self.family).lower()
        if family not in WAVELET_FAMILIES:
            raise ConfigError(f"wavelet family desconhecida: {self.family} (use haar ou daubechies6)")
        levels = int(self.levels)
        if levels < 1:
            raise ConfigError("levels must be ≥ 1")
        shape = (int(self.shape[0]), int(self.shape[1]))
        step = 2**levels
        if shape[0] % step or shape[1] % step:
            raise ConfigError(f"shape {shape} não é divisível por 2^{levels}")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "shape", shape)

        coeffs = pywt.wavedec2(np.zeros(shape), self.wavelet, mode="periodization", level=levels)
        _, slices = pywt.coeffs_to_array(coeffs)
        object.__setattr__(self, "_slices", slices)

        # Ψ†Ψ = I é exigido pelo prox em forma fechada
        sample = np.random.default_rng(1234).standard_normal(shape[0] * shape[1])
        err = float(np.max(np.abs(self.synthesis(self.analysis(sample)).data - sample)))
        nrm = abs(float(np.linalg.norm(self.analysis(sample))) - float(np.linalg.norm(sample)))
        if err > 1e-10 or nrm > 1e-10 * float(np.linalg.norm(sample)):
            raise ConfigError(f"dicionário {family}/{levels} não é ortogonal para shape {shape}")
        logger.debug("dicionário %s/%d pronto para shape %s (erro de reconstrução %.2e)", family, levels, shape, err)

    @property
    def wavelet(self) -> str:
        return WAVELET_FAMILIES[self.family]

    @property
    def size(self) -> int:
        return self.shape[0] * self.shape[1]

    def analysis(self, x) -> np.ndarray:
        """Ψ†x, coeficientes achatados (mesmo tamanho da imagem)."""
        img = np.asarray(getattr(x, "data", x), dtype=np.float64).reshape(self.shape)
        coeffs = pywt.wavedec2(img, self.wavelet, mode="periodization", level=self.levels)
        arr, _ = pywt.coeffs_to_array(coeffs)
        return arr.ravel()

    def synthesis(self, coeffs) -> ImageVector:
        """Ψc."""
        arr = np.asarray(coeffs, dtype=np.float64).reshape(self.shape)
        cs = pywt.array_to_coeffs(arr, self._slices, output_format="wavedec2")
        img = pywt.waverec2(cs, self.wavelet, mode="periodization")
        return ImageVector(img, self.shape)


def wavelet_analysis(dictionary: WaveletDictionary, x: ImageVector) -> np.ndarray:
    if tuple(x.shape) != dictionary.shape:
        raise ConfigError(f"shape {x.shape} incompatível com o dicionário {dictionary.shape}")
    return dictionary.analysis(x)


def wavelet_synthesis(dictionary: WaveletDictionary, coeffs) -> ImageVector:
    coeffs = np.asarray(coeffs, dtype=np.float64).ravel()
    if coeffs.size != dictionary.size:
        raise ConfigError(f"{coeffs.size} coeficientes, esperado {dictionary.size}")
    return dictionary.synthesis(coeffs)
