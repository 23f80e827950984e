import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
from PIL import Image

from .denoiser import AnalyticGaussianDenoiser, Denoiser, ExternalDenoiser, GaussianSmoothingDenoiser
from .forward_ops import (
    ComposedOperator,
    IdentityOperator,
    MaskedFourierOperator,
    MatrixOperator,
    MeasurementOperator,
    WaveletDictionary,
)
from .likelihood_prox import GaussianLikelihood, PrimalDualConfig, constraint_project, prox_residual
from .model_core import (
    ComplexVector,
    ConfigError,
    GaussianPotential,
    ImageVector,
    KernelDiagnostics,
    LikelihoodConstraint,
    ProxNestError,
    RunConfig,
    make_rng,
    real_inner,
    validate_config,
)
from .nested_sampler import NestedModel, NestedRunResult, posterior_std, run_nested
from .prox_calculus import (
    L1Potential,
    MoreauEnvelope,
    WaveletL1Prior,
    brute_force_prox,
    moreau_eval,
    moreau_grad,
    soft_threshold,
)
from .sampling_kernels import ChainTrace, KernelSpec, sample_prior

logger = logging.getLogger(__name__)

MODEL_KINDS = ("wavelet_l1", "data_driven", "conjugate_gaussian")


# ===============================
# Configuração do experimento
# ===============================


@dataclass(frozen=True)
class ExperimentConfig:
    image: dict
    operator: dict
    snr_db: float
    model: dict
    run: RunConfig
    output_dir: str
    data_seed: int = 0
    add_noise: bool = True
    mh_correction: bool = False
    primal_dual: dict = field(default_factory=dict)
    trace: bool = False
    trapezoid: bool = False
    name: str = ""

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        if not isinstance(payload, dict):
            raise ConfigError("config deve ser um objeto JSON")
        image = payload.get("image") or {"synthetic": {"shape": [16, 16], "seed": 0}}
        operator = payload.get("operator") or {"kind": "identity"}
        model = payload.get("model")
        if not isinstance(model, dict) or not model.get("kind"):
            raise ConfigError("exactly one model is required (campo 'model' com 'kind')")
        try:
            snr_db = float(payload.get("snr_db", 15.0))
            data_seed = int(payload.get("data_seed") or 0)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"snr_db/data_seed inválidos: {e}") from e
        cfg = cls(
            image=image,
            operator=operator,
            snr_db=snr_db,
            model=model,
            run=RunConfig.from_dict(payload.get("run")),
            output_dir=str(payload.get("output_dir") or "out"),
            data_seed=data_seed,
            add_noise=bool(payload.get("add_noise", True)),
            mh_correction=bool(payload.get("mh_correction", False)),
            primal_dual=payload.get("primal_dual") or {},
            trace=bool(payload.get("trace", False)),
            trapezoid=bool(payload.get("trapezoid", False)),
            name=str(payload.get("name") or model.get("kind")),
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        validate_config(self.run)
        kind = self.model.get("kind")
        if kind not in MODEL_KINDS:
            raise ConfigError(f"model kind desconhecido: {kind} (use {', '.join(MODEL_KINDS)})")
        op_kind = self.operator.get("kind") or "identity"
        if op_kind not in ("identity", "masked_fourier"):
            raise ConfigError(f"operator kind desconhecido: {op_kind}")
        if op_kind == "masked_fourier":
            fraction = float(self.operator.get("fraction", 0.5))
            if not (0.0 < fraction <= 1.0):
                raise ConfigError("fraction must be in (0, 1]")
        if kind == "conjugate_gaussian" and op_kind != "identity":
            raise ConfigError("conjugate_gaussian validation mode requires the identity operator")
        if kind == "data_driven":
            if self.mh_correction:
                raise ConfigError("mh_correction is not available for the data_driven variant")
            den_eps = (self.model.get("denoiser") or {}).get("epsilon")
            if den_eps is not None and not np.isclose(float(den_eps), self.run.epsilon, rtol=1e-12, atol=0.0):
                raise ConfigError(f"epsilon {self.run.epsilon} does not match denoiser epsilon {float(den_eps)}")
        if "path" not in self.image and "synthetic" not in self.image:
            raise ConfigError("image precisa de 'path' ou 'synthetic'")

    def data_spec(self) -> dict:
        """Tudo o que determina a observação (base do hash de dados)."""
        return {
            "image": self.image,
            "operator": self.operator,
            "snr_db": self.snr_db,
            "data_seed": self.data_seed,
            "add_noise": self.add_noise,
        }

    def data_seed_hash(self) -> str:
        raw = json.dumps(self.data_spec(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(raw).hexdigest()


def load_config(path, seed_override: int | None = None, output_dir: str | None = None) -> ExperimentConfig:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigError(f"config não encontrada: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config JSON inválida ({path}): {e}") from e
    cfg = ExperimentConfig.from_dict(payload)
    if seed_override is not None:
        cfg = replace(cfg, run=replace(cfg.run, rng_seed=int(seed_override)))
    if output_dir:
        cfg = replace(cfg, output_dir=str(output_dir))
    return cfg


# ===============================
# Imagens (bin + sidecar JSON, PNG/JPEG, CSV)
# ===============================


def write_image(base_path, img: ImageVector) -> tuple[Path, Path]:
    base = Path(base_path)
    bin_path = base.with_suffix(".bin")
    meta_path = base.with_suffix(".json")
    bin_path.write_bytes(np.ascontiguousarray(img.data, dtype="<f8").tobytes())
    meta_path.write_text(json.dumps({"shape": list(img.shape), "dtype": "float64", "byteorder": "little"}))
    return bin_path, meta_path


def read_image(path) -> ImageVector:
    p = Path(path)
    suffix = p.suffix.lower()
    if suffix in (".png", ".jpg", ".jpeg"):
        with Image.open(p) as im:
            arr = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
        return ImageVector.from_array(arr)
    if suffix in (".bin", ".json", ""):
        bin_path = p.with_suffix(".bin")
        meta = json.loads(p.with_suffix(".json").read_text())
        if (meta.get("dtype") or "float64") != "float64":
            raise ConfigError(f"dtype não suportado: {meta.get('dtype')}")
        data = np.frombuffer(bin_path.read_bytes(), dtype="<f8")
        return ImageVector(data, tuple(meta["shape"]))
    raise ConfigError(f"formato de imagem não suportado: {p.suffix}")


def export_image_csv(path, img: ImageVector) -> None:
    pd.DataFrame(img.as_array()).to_csv(path, index=False, header=False)


def synthetic_image(shape, seed: int = 0, n_blobs: int = 4) -> ImageVector:
    """Soma de blobs Gaussianos em [0, 1] (verdade sintética, semeada)."""
    rows, cols = int(shape[0]), int(shape[1])
    rng = np.random.default_rng(int(seed))
    yy, xx = np.mgrid[0:rows, 0:cols]
    img = np.zeros((rows, cols))
    for _ in range(int(n_blobs)):
        cy, cx = rng.uniform(0.25, 0.75) * rows, rng.uniform(0.25, 0.75) * cols
        w = rng.uniform(0.06, 0.15) * min(rows, cols)
        amp = rng.uniform(0.5, 1.0)
        img += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * w**2))
    img /= img.max()
    return ImageVector.from_array(img)


def load_truth(image_cfg: dict) -> ImageVector:
    if image_cfg.get("path"):
        return read_image(image_cfg["path"])
    syn = image_cfg.get("synthetic") or {}
    shape = syn.get("shape") or [16, 16]
    return synthetic_image(shape, seed=int(syn.get("seed") or 0), n_blobs=int(syn.get("n_blobs") or 4))


# ===============================
# Observação simulada
# ===============================


def build_operator(op_cfg: dict, shape) -> MeasurementOperator:
    kind = op_cfg.get("kind") or "identity"
    if kind == "identity":
        return IdentityOperator(shape)
    if kind == "masked_fourier":
        return MaskedFourierOperator.random(
            shape, float(op_cfg.get("fraction", 0.5)), int(op_cfg.get("mask_seed") or 0)
        )
    raise ConfigError(f"operator kind desconhecido: {kind}")


def simulate_observation(truth: ImageVector, op: MeasurementOperator, snr_db: float, rng, add_noise: bool = True):
    """y = Φx + n, σ tal que 20·log10(‖Φx‖/(σ·√dof)) = snr_db. Devolve (y, σ)."""
    clean = op.forward(truth)
    signal = clean.norm()
    if signal == 0.0:
        raise ConfigError("truth has zero signal under the measurement operator")
    sigma = signal / (np.sqrt(op.dof) * 10.0 ** (snr_db / 20.0))
    if not add_noise:
        return clean, float(sigma)
    m = op.output_dim
    if op.real_output:
        noise = sigma * rng.standard_normal(m)
        y = clean.re + noise
        return ComplexVector(y, clean.im), float(sigma)
    n_re = sigma * rng.standard_normal(m)
    n_im = sigma * rng.standard_normal(m)
    return ComplexVector(clean.re + n_re, clean.im + n_im), float(sigma)


def snr_db(truth: ImageVector, estimate: ImageVector) -> float:
    """20·log10(‖x‖/‖x − x̂‖)."""
    err = float(np.linalg.norm(truth.data - estimate.data))
    if err == 0.0:
        return float("inf")
    return float(20.0 * np.log10(truth.norm() / err))


# ===============================
# Montagem do modelo
# ===============================


def build_denoiser(spec: dict, shape, run: RunConfig) -> Denoiser:
    spec = spec or {}
    kind = spec.get("kind") or "smoothing"
    eps = float(spec.get("epsilon", run.epsilon))
    if kind == "smoothing":
        return GaussianSmoothingDenoiser(width=float(spec.get("width", 1.0)), epsilon=eps)
    if kind == "analytic_gaussian":
        mean = ImageVector.zeros(shape).with_data(np.full(shape[0] * shape[1], float(spec.get("mean", 0.0))))
        return AnalyticGaussianDenoiser(mean, float(spec.get("variance", 1.0)), eps)
    if kind == "external":
        command = spec.get("command")
        if not isinstance(command, list) or not command:
            raise ConfigError("external denoiser precisa de 'command' (lista)")
        return ExternalDenoiser([str(c) for c in command], eps, timeout_s=spec.get("timeout_s"))
    raise ConfigError(f"denoiser kind desconhecido: {kind}")


def build_model(cfg: ExperimentConfig, like: GaussianLikelihood, x_init: ImageVector, denoiser: Denoiser | None = None) -> NestedModel:
    kind = cfg.model.get("kind")
    shape = like.shape
    run = cfg.run
    if kind == "wavelet_l1":
        dictionary = WaveletDictionary(
            family=str(cfg.model.get("family") or "daubechies6"),
            levels=int(cfg.model.get("levels") or 2),
            shape=shape,
        )
        mu = float(cfg.model.get("mu", run.mu))
        prior = WaveletL1Prior(mu, dictionary)
        base = KernelSpec("langevin_my_prior", prior, replace(run, mu=mu), mh_correction=cfg.mh_correction, x_init=x_init)
    elif kind == "data_driven":
        if denoiser is None:
            raise ConfigError("data_driven model needs a denoiser")
        base = KernelSpec(
            "data_driven", None, run, denoiser=denoiser, mh_correction=cfg.mh_correction, x_init=x_init
        )
    elif kind == "conjugate_gaussian":
        mean = ImageVector.zeros(shape).with_data(np.full(x_init.size, float(cfg.model.get("prior_mean", 0.0))))
        prior = GaussianPotential(mean, float(cfg.model.get("prior_variance", 1.0)))
        base = KernelSpec("langevin_smooth_prior", prior, run, mh_correction=cfg.mh_correction, x_init=x_init)
    else:
        raise ConfigError(f"model kind desconhecido: {kind}")

    def make_kernel(constraint: LikelihoodConstraint | None) -> KernelSpec:
        return base.with_constraint(constraint)

    return NestedModel(likelihood=like, make_kernel=make_kernel)


def analytic_log_evidence(y: ComplexVector, sigma: float, prior_mean: float, prior_variance: float) -> float:
    """log N(y; m, (σ² + s²)I) para Φ = I (modo de validação conjugado)."""
    var = sigma**2 + prior_variance
    r = y.re - prior_mean
    return float(-0.5 * np.dot(r, r) / var - 0.5 * r.size * np.log(2.0 * np.pi * var))


# ===============================
# Relatório
# ===============================


@dataclass(frozen=True)
class MetricsReport:
    name: str
    model_kind: str
    data_seed_hash: str
    log_evidence: float
    log_evidence_std: float
    information: float
    snr_db_reconstruction: float | None
    snr_db_dirty: float | None
    wall_time_s: float
    sigma: float
    diagnostics: dict = field(default_factory=dict)
    analytic_log_evidence: float | None = None
    partial: bool = False

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "model_kind": self.model_kind,
            "data_seed_hash": self.data_seed_hash,
            "log_evidence": self.log_evidence,
            "log_evidence_std": self.log_evidence_std,
            "information": self.information,
            "snr_db_reconstruction": self.snr_db_reconstruction,
            "snr_db_dirty": self.snr_db_dirty,
            "wall_time_s": self.wall_time_s,
            "sigma": self.sigma,
            "analytic_log_evidence": self.analytic_log_evidence,
            "partial": self.partial,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MetricsReport":
        try:
            return cls(
                name=str(payload.get("name") or ""),
                model_kind=str(payload.get("model_kind") or ""),
                data_seed_hash=str(payload["data_seed_hash"]),
                log_evidence=float(payload["log_evidence"]),
                log_evidence_std=float(payload["log_evidence_std"]),
                information=float(payload.get("information") or 0.0),
                snr_db_reconstruction=payload.get("snr_db_reconstruction"),
                snr_db_dirty=payload.get("snr_db_dirty"),
                wall_time_s=float(payload.get("wall_time_s") or 0.0),
                sigma=float(payload.get("sigma") or 0.0),
                diagnostics=payload.get("diagnostics") or {},
                analytic_log_evidence=payload.get("analytic_log_evidence"),
                partial=bool(payload.get("partial", False)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"report inválido: {e}") from e


def load_report(path) -> MetricsReport:
    try:
        return MetricsReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except FileNotFoundError as e:
        raise ConfigError(f"report não encontrado: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"report JSON inválido ({path}): {e}") from e


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True), encoding="utf-8")


def _write_run_log(path: Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _dead_points_frame(result: NestedRunResult) -> pd.DataFrame:
    w = result.posterior_weights()
    return pd.DataFrame(
        {
            "index": np.arange(len(result.dead_points)),
            "log_likelihood": [d.log_like for d in result.dead_points],
            "log_weight": [d.log_weight for d in result.dead_points],
            "posterior_weight": w,
        }
    )


@dataclass
class AssembledExperiment:
    cfg: ExperimentConfig
    truth: ImageVector
    op: MeasurementOperator
    y: ComplexVector
    sigma: float
    likelihood: GaussianLikelihood
    dirty: ImageVector
    model: NestedModel
    denoiser: Denoiser | None = None

    def close(self):
        if isinstance(self.denoiser, ExternalDenoiser):
            self.denoiser.close()


def assemble(cfg: ExperimentConfig) -> AssembledExperiment:
    """Verdade, operador, observação (stream 0 da data_seed), verossimilhança e modelo."""
    truth = load_truth(cfg.image)
    op = build_operator(cfg.operator, truth.shape)
    y, sigma = simulate_observation(truth, op, cfg.snr_db, make_rng(cfg.data_seed, stream=0), add_noise=cfg.add_noise)
    cfg = replace(cfg, run=replace(cfg.run, sigma=sigma))

    like = GaussianLikelihood(y, op, sigma, pd=PrimalDualConfig.from_dict(cfg.primal_dual, op))
    dirty = op.adjoint(y)

    denoiser = None
    if cfg.model.get("kind") == "data_driven":
        denoiser = build_denoiser(cfg.model.get("denoiser") or {}, truth.shape, cfg.run)
    model = build_model(cfg, like, x_init=dirty, denoiser=denoiser)
    return AssembledExperiment(cfg, truth, op, y, sigma, like, dirty, model, denoiser)


def run_experiment(cfg: ExperimentConfig, progress: bool = False) -> MetricsReport:
    """Simula os dados, roda nested sampling e grava os artefatos em output_dir."""
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()

    exp = None
    try:
        exp = assemble(cfg)
        cfg, run = exp.cfg, exp.cfg.run
        trace = ChainTrace(likelihood=exp.likelihood) if cfg.trace else None
        result = run_nested(
            exp.model, run, make_rng(run.rng_seed, stream=1), trapezoid=cfg.trapezoid, progress=progress, trace=trace
        )
    except ProxNestError:
        # marca a saída como parcial para quem olhar o diretório depois
        _write_json(out_dir / "report.json", {"partial": True, "name": cfg.name, "data_seed_hash": cfg.data_seed_hash()})
        raise
    finally:
        if exp is not None:
            exp.close()
    truth, y, sigma, dirty = exp.truth, exp.y, exp.sigma, exp.dirty

    write_image(out_dir / "posterior_mean", result.posterior_mean)
    write_image(out_dir / "posterior_std", posterior_std(result))
    write_image(out_dir / "dirty_image", dirty)
    export_image_csv(out_dir / "posterior_mean.csv", result.posterior_mean)
    _write_run_log(out_dir / "run_log.jsonl", result.run_log)
    _dead_points_frame(result).to_csv(out_dir / "dead_points.csv", index=False)
    if trace is not None:
        trace.write_csv(out_dir / "chain_trace.csv")

    analytic = None
    if cfg.model.get("kind") == "conjugate_gaussian":
        analytic = analytic_log_evidence(
            y, sigma, float(cfg.model.get("prior_mean", 0.0)), float(cfg.model.get("prior_variance", 1.0))
        )

    report = MetricsReport(
        name=cfg.name,
        model_kind=str(cfg.model.get("kind")),
        data_seed_hash=cfg.data_seed_hash(),
        log_evidence=result.log_evidence,
        log_evidence_std=result.log_evidence_std,
        information=result.information,
        snr_db_reconstruction=snr_db(truth, result.posterior_mean),
        snr_db_dirty=snr_db(truth, dirty),
        wall_time_s=time.perf_counter() - t0,
        sigma=sigma,
        diagnostics=result.diagnostics,
        analytic_log_evidence=analytic,
    )
    _write_json(out_dir / "report.json", report.to_dict())
    logger.info("artefatos gravados em %s", os.fspath(out_dir))
    return report


# ===============================
# Comparação de modelos
# ===============================

PREFERENCE_SIGMAS = 3.0


def compare_models(report_a: MetricsReport, report_b: MetricsReport) -> dict:
    """log BF = log Z_a − log Z_b; preferência só quando |log BF| > 3·erro combinado."""
    if report_a.data_seed_hash != report_b.data_seed_hash:
        raise ConfigError("reports come from different observations (data seed hash mismatch)")
    log_bf = report_a.log_evidence - report_b.log_evidence
    err = float(np.sqrt(report_a.log_evidence_std**2 + report_b.log_evidence_std**2))
    if abs(log_bf) > PREFERENCE_SIGMAS * err:
        preferred = report_a.name if log_bf > 0 else report_b.name
        if not preferred:
            preferred = "a" if log_bf > 0 else "b"
    else:
        preferred = "inconclusive"
    return {
        "model_a": report_a.name,
        "model_b": report_b.name,
        "log_bayes_factor": log_bf,
        "combined_error": err,
        "preferred": preferred,
        "data_seed_hash": report_a.data_seed_hash,
    }


def format_summary(report: MetricsReport) -> str:
    out = []
    out.append("=" * 72)
    out.append(f"RESUMO: {report.name} ({report.model_kind})")
    out.append("=" * 72)
    out.append(f"log Z            : {report.log_evidence:.6g} ± {report.log_evidence_std:.3g}")
    out.append(f"informação H     : {report.information:.4g} nats")
    if report.analytic_log_evidence is not None:
        out.append(f"log Z analítico  : {report.analytic_log_evidence:.6g}")
    if report.snr_db_reconstruction is not None:
        out.append(f"SNR média post.  : {report.snr_db_reconstruction:.3f} dB")
    if report.snr_db_dirty is not None:
        out.append(f"SNR imagem suja  : {report.snr_db_dirty:.3f} dB")
    out.append(f"sigma            : {report.sigma:.6g}")
    out.append(f"aceitação        : {report.diagnostics.get('acceptance_rate', float('nan')):.3f}")
    out.append(f"tempo            : {report.wall_time_s:.2f} s")
    out.append("=" * 72)
    return "\n".join(out)


# ===============================
# Amostras do prior
# ===============================


def run_prior_sampling(cfg: ExperimentConfig, n_samples: int | None = None) -> pd.DataFrame:
    """Amostras do prior do modelo configurado (sem restrição); grava prior_samples.csv."""
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    exp = assemble(cfg)
    n = int(n_samples or exp.cfg.run.n_live)
    diagnostics = KernelDiagnostics()
    try:
        spec = exp.model.make_kernel(None)
        samples = sample_prior(spec, n, make_rng(exp.cfg.run.rng_seed, stream=2), diagnostics)
    finally:
        exp.close()

    rows = []
    for i, x in enumerate(samples):
        rows.append(
            {
                "sample": i,
                "mean": float(x.data.mean()),
                "std": float(x.data.std()),
                "min": float(x.data.min()),
                "max": float(x.data.max()),
                "prior_value": float(spec.prior.eval(x)) if spec.prior is not None else float("nan"),
                "log_likelihood": exp.likelihood.log_likelihood(x),
            }
        )
    df = pd.DataFrame(rows)
    df.to_csv(out_dir / "prior_samples.csv", index=False)
    stack = np.stack([x.data for x in samples])
    write_image(out_dir / "prior_mean", exp.truth.with_data(stack.mean(axis=0)))
    logger.info("prior: %d amostras, aceitação %.3f", n, diagnostics.acceptance_rate())
    return df


# ===============================
# Diagnóstico dos operadores prox
# ===============================


def _check(rows: list, name: str, value: float, tol: float) -> None:
    rows.append({"check": name, "value": float(value), "tol": float(tol), "passed": bool(value <= tol)})


def run_prox_checks(seed: int = 0, oracle_iters: int = 20_000) -> pd.DataFrame:
    """Bateria de verificações: prox fechados contra o oráculo, adjuntos, projeções."""
    rng = np.random.default_rng(int(seed))
    rows: list[dict] = []

    # soft-threshold vs oráculo por subgradiente
    x = ImageVector(rng.normal(size=8), (1, 8))
    l1 = L1Potential(mu=1.0, shape=(1, 8))
    oracle = brute_force_prox(l1, x, 0.5, iters=oracle_iters)
    _check(rows, "soft_threshold_vs_oracle", np.max(np.abs(oracle.x.data - soft_threshold(x.data, 0.5))), 1e-4)

    # prox wavelet vs oráculo (Haar 4x4)
    haar = WaveletDictionary("haar", 1, (4, 4))
    prior = WaveletL1Prior(1.0, haar)
    x = ImageVector(rng.normal(size=16), (4, 4))
    closed = prior.prox(x, 0.3)
    oracle = brute_force_prox(prior, x, 0.3, iters=oracle_iters)
    _check(rows, "wavelet_prox_vs_oracle", np.max(np.abs(oracle.x.data - closed.data)), 1e-3)

    # gradiente do envelope vs diferenças finitas
    env = MoreauEnvelope(L1Potential(mu=1.0, shape=(1, 16)), 0.7)
    x = ImageVector(rng.normal(size=16), (1, 16))
    g = moreau_grad(env, x).data
    h = 1e-5
    fd = np.array(
        [
            (moreau_eval(env, x.with_data(x.data + h * e)) - moreau_eval(env, x.with_data(x.data - h * e))) / (2 * h)
            for e in np.eye(16)
        ]
    )
    _check(rows, "moreau_grad_vs_fd", np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-12), 1e-5)

    # adjunto do Fourier mascarado: Re⟨Φa, b⟩ = ⟨a, Φ†b⟩
    op = MaskedFourierOperator.random((8, 8), 0.5, int(seed))
    a = ImageVector(rng.normal(size=64), (8, 8))
    b = ComplexVector(rng.normal(size=op.output_dim), rng.normal(size=op.output_dim))
    _check(rows, "masked_fourier_adjoint", abs(real_inner(op.forward(a), b) - float(np.dot(a.data, op.adjoint(b).data))), 1e-10)

    # adjunto de Φ∘Ψ (Daubechies-6)
    db6 = WaveletDictionary("daubechies6", 1, (16, 16))
    comp = ComposedOperator(MaskedFourierOperator.random((16, 16), 0.5, int(seed)), db6)
    a = ImageVector(rng.normal(size=256), (16, 16))
    b = ComplexVector(rng.normal(size=comp.output_dim), rng.normal(size=comp.output_dim))
    _check(rows, "composed_adjoint", abs(real_inner(comp.forward(a), b) - float(np.dot(a.data, comp.adjoint(b).data))), 1e-9)

    # Ψ ortogonal: síntese(análise(x)) = x
    x = ImageVector(rng.normal(size=256), (16, 16))
    _check(rows, "wavelet_roundtrip", np.max(np.abs(db6.synthesis(db6.analysis(x)).data - x.data)), 1e-10)

    # primal–dual vs forma fechada (identidade mascarada, ΦΦ† = I)
    shape = (4, 4)
    mask = np.zeros(16, dtype=bool)
    mask[rng.choice(16, size=8, replace=False)] = True
    mop = MatrixOperator.masked_identity(shape, mask)
    y = ComplexVector.from_real(rng.normal(size=mop.output_dim))
    like = GaussianLikelihood(y, mop, 1.0, pd=PrimalDualConfig(max_iters=20_000, tol=1e-12))
    x = ImageVector(rng.normal(size=16) * 3.0, shape)
    tau = 0.25 * like.eval_quadratic(x)
    fast = constraint_project(x, tau, like)
    slow = constraint_project(x, tau, like, fast_path=False)
    _check(rows, "primal_dual_vs_closed_form", np.max(np.abs(fast.x.data - slow.x.data)), 1e-6)
    _check(rows, "projection_feasibility", prox_residual(x, slow.x, tau, like), 1e-6)

    return pd.DataFrame(rows, columns=["check", "value", "tol", "passed"])
