import logging
import os
import struct
import subprocess
import threading
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout

import numpy as np
from scipy import ndimage

from .model_core import (
    ConfigError,
    DenoiserError,
    DenoiserOutputError,
    DenoiserShapeError,
    DenoiserTimeoutError,
    ImageVector,
    InvalidImageError,
)

logger = logging.getLogger(__name__)


# ===============================
# Denoisers em processo
# ===============================


class Denoiser:
    """x -> D_ε(x). ε é propriedade do denoiser, não da execução."""

    epsilon: float

    def apply(self, x: ImageVector) -> ImageVector:
        raise NotImplementedError


class AnalyticGaussianDenoiser(Denoiser):
    """Denoiser de Tweedie exato para prior N(m, s²I): x − ε(x − m)/(s² + ε)."""

    def __init__(self, mean: ImageVector, variance: float, epsilon: float):
        if not variance > 0:
            raise ConfigError("variance must be positive")
        if not epsilon > 0:
            raise ConfigError("epsilon must be positive")
        self.mean = mean
        self.variance = float(variance)
        self.epsilon = float(epsilon)

    def apply(self, x: ImageVector) -> ImageVector:
        k = self.epsilon / (self.variance + self.epsilon)
        return x.with_data(x.data - k * (x.data - self.mean.data))


class GaussianSmoothingDenoiser(Denoiser):
    """Convolução periódica com Gaussiana normalizada (substituto de bancada da rede treinada)."""

    def __init__(self, width: float, epsilon: float):
        if width < 0:
            raise ConfigError("width must be non-negative")
        if not epsilon > 0:
            raise ConfigError("epsilon must be positive")
        self.width = float(width)
        self.epsilon = float(epsilon)

    def apply(self, x: ImageVector) -> ImageVector:
        if self.width == 0:
            return x
        out = ndimage.gaussian_filter(x.as_array(), sigma=self.width, mode="wrap")
        return x.with_data(out)


def denoise(d: Denoiser, x: ImageVector) -> ImageVector:
    """apply com validação de shape e finitude da saída."""
    try:
        out = d.apply(x)
    except InvalidImageError as e:
        raise DenoiserOutputError(f"denoiser devolveu imagem inválida: {e}") from e
    if tuple(out.shape) != tuple(x.shape) or out.size != x.size:
        raise DenoiserShapeError(f"denoiser devolveu shape {out.shape}, esperado {x.shape}")
    if not np.all(np.isfinite(out.data)):
        raise DenoiserOutputError("denoiser devolveu valores não finitos")
    return out


def tweedie_score(d: Denoiser, x: ImageVector) -> ImageVector:
    """∇log p_ε(x) = (D_ε(x) − x)/ε."""
    if not d.epsilon > 0:
        raise ConfigError("epsilon must be positive")
    return x.with_data((denoise(d, x).data - x.data) / d.epsilon)


# ===============================
# Protocolo de frames (stdin/stdout)
# ===============================

FRAME_MAGIC = b"PNDZ"
_HEADER = struct.Struct("<4sI")
_COUNT = struct.Struct("<Q")


def encode_frame(values) -> bytes:
    """magic | u32 tamanho (bytes após este campo) | u64 n | n float64, tudo little-endian."""
    arr = np.ascontiguousarray(values, dtype="<f8").ravel()
    payload = _COUNT.pack(arr.size) + arr.tobytes()
    return _HEADER.pack(FRAME_MAGIC, len(payload)) + payload


def _read_exact(stream, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            break
        buf += chunk
    return buf


def read_frame(stream) -> np.ndarray | None:
    """Lê um frame; None em EOF limpo antes do cabeçalho."""
    head = _read_exact(stream, _HEADER.size)
    if not head:
        return None
    if len(head) < _HEADER.size:
        raise DenoiserOutputError("frame truncado (cabeçalho)")
    magic, length = _HEADER.unpack(head)
    if magic != FRAME_MAGIC:
        raise DenoiserOutputError(f"magic inválido: {magic!r}")
    payload = _read_exact(stream, length)
    if len(payload) < length or length < _COUNT.size:
        raise DenoiserOutputError("frame truncado (payload)")
    (count,) = _COUNT.unpack(payload[: _COUNT.size])
    body = payload[_COUNT.size :]
    if len(body) != 8 * count:
        raise DenoiserOutputError(f"frame declara {count} valores mas traz {len(body)} bytes")
    return np.frombuffer(body, dtype="<f8").astype(np.float64)


def serve_denoiser(d: Denoiser, shape, stdin, stdout) -> int:
    """Laço do lado servidor: um pedido, uma resposta, em ordem. Devolve nº de frames."""
    served = 0
    while True:
        values = read_frame(stdin)
        if values is None:
            return served
        x = ImageVector(values, shape)
        stdout.write(encode_frame(denoise(d, x).data))
        stdout.flush()
        served += 1


# ===============================
# Ponte para denoiser externo
# ===============================


def _default_timeout() -> float:
    return float((os.environ.get("PROXNEST_DENOISER_TIMEOUT") or "30").strip() or "30")


class ExternalDenoiser(Denoiser):
    """Denoiser rodando em processo filho (ex.: rede treinada), via frames em stdin/stdout.

    Uma conexão serializa os pedidos; cadeias concorrentes precisam de
    instâncias separadas.
    """

    def __init__(self, command: list[str], epsilon: float, timeout_s: float | None = None, cwd: str | None = None):
        if not epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if not command:
            raise ConfigError("external denoiser needs a command")
        self.command = list(command)
        self.epsilon = float(epsilon)
        self.timeout_s = float(timeout_s) if timeout_s else _default_timeout()
        self.cwd = cwd
        self._proc = None
        self._lock = threading.Lock()
        self._pool = None

    def _ensure_started(self):
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    cwd=self.cwd,
                )
            except OSError as e:
                raise DenoiserError(f"não foi possível iniciar o denoiser externo: {e}") from e
            logger.info("denoiser externo iniciado (pid %d): %s", self._proc.pid, " ".join(self.command))
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=1)
        return self._proc

    def _roundtrip(self, values: np.ndarray) -> np.ndarray:
        proc = self._ensure_started()
        try:
            proc.stdin.write(encode_frame(values))
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise DenoiserError(f"denoiser externo fechou a conexão: {e}") from e
        fut = self._pool.submit(read_frame, proc.stdout)
        try:
            out = fut.result(timeout=self.timeout_s)
        except FutureTimeout as e:
            # estado do stream fica indefinido: derruba o processo
            logger.warning("denoiser externo sem resposta em %.1fs, encerrando", self.timeout_s)
            self.close()
            raise DenoiserTimeoutError(f"denoiser externo não respondeu em {self.timeout_s:.1f}s") from e
        if out is None:
            raise DenoiserError("denoiser externo encerrou sem resposta")
        return out

    def apply(self, x: ImageVector) -> ImageVector:
        with self._lock:
            out = self._roundtrip(x.data)
        if out.size != x.size:
            raise DenoiserShapeError(f"denoiser externo devolveu {out.size} valores, esperado {x.size}")
        if not np.all(np.isfinite(out)):
            raise DenoiserOutputError("denoiser externo devolveu valores não finitos")
        return x.with_data(out)

    def close(self):
        proc, self._proc = self._proc, None
        pool, self._pool = self._pool, None
        if proc is not None:
            self._stop(proc)
        if pool is not None:
            pool.shutdown(wait=False)

    @staticmethod
    def _stop(proc):
        try:
            if proc.stdin:
                proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=1.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()
        if proc.stdout:
            proc.stdout.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def external_denoise(endpoint: ExternalDenoiser, x: ImageVector) -> ImageVector:
    return endpoint.apply(x)
