import numpy as np
import pytest
from scipy import stats

from proxnest.denoiser import AnalyticGaussianDenoiser
from proxnest.forward_ops import WaveletDictionary
from proxnest.model_core import (
    ConfigError,
    GaussianPotential,
    ImageVector,
    KernelDiagnostics,
    LikelihoodConstraint,
    RunConfig,
    ZeroPotential,
    make_rng,
)
from proxnest.prox_calculus import MoreauEnvelope, WaveletL1Prior, moreau_eval
from proxnest.sampling_kernels import (
    ChainTrace,
    KernelSpec,
    drift,
    evolve,
    mh_accept,
    sample_prior,
    step_data_driven,
    step_my_prior,
    step_smooth_prior,
    transition,
)
from tests.conftest import IdentityDenoiser


def _gauss(n=2, var=1.0, shape=None):
    shape = shape or (1, n)
    return GaussianPotential(ImageVector.zeros(shape), var)


def _loose(n=2, radius=10.0):
    g = _gauss(n)
    return LikelihoodConstraint(g, g.log_norm + radius**2 / 2.0)


def _tight(n=2, radius=0.5):
    g = _gauss(n)
    return LikelihoodConstraint(g, g.log_norm + radius**2 / 2.0)


def _cfg(**kw):
    base = dict(delta=1e-3, lambda_my=1e-2, n_live=2, n_dead=0, thinning=1, burn_in=0, epsilon=1.0, alpha=1.0)
    base.update(kw)
    return RunConfig(**base)


class TestStepSmoothPrior:
    def test_linear_drift_without_noise(self):
        s2, delta = 0.5, 0.1
        spec = KernelSpec("langevin_smooth_prior", _gauss(3, s2), _cfg(delta=delta))
        x0 = ImageVector([1.0, -2.0, 0.5], (1, 3))
        out = step_smooth_prior(x0, spec, None, noise=np.zeros(3))
        np.testing.assert_allclose(out.data, x0.data * (1 - delta / (2 * s2)), rtol=1e-15)

    def test_constraint_term_vanishes_inside(self):
        prior = _gauss(2, 0.5)
        inside = KernelSpec("langevin_smooth_prior", prior, _cfg(), constraint=_loose())
        free = KernelSpec("langevin_smooth_prior", prior, _cfg())
        x = ImageVector([0.2, -0.1], (1, 2))
        w = np.array([0.3, -1.2])
        np.testing.assert_array_equal(
            step_smooth_prior(x, inside, None, noise=w).data, step_smooth_prior(x, free, None, noise=w).data
        )

    def test_noise_drawn_from_rng(self):
        spec = KernelSpec("langevin_smooth_prior", _gauss(2), _cfg(delta=0.04))
        x = ImageVector.zeros((1, 2))
        a = step_smooth_prior(x, spec, make_rng(3))
        w = make_rng(3).standard_normal(2)
        np.testing.assert_allclose(a.data, 0.2 * w)

    def test_requires_score(self):
        prior = WaveletL1Prior(1.0, WaveletDictionary("haar", 1, (2, 2)))
        with pytest.raises(ConfigError):
            KernelSpec("langevin_smooth_prior", prior, _cfg())

    @pytest.mark.slow
    def test_long_run_moments(self):
        s2, delta, n_steps = 0.01, 2e-3, 100_000
        spec = KernelSpec("langevin_smooth_prior", _gauss(2, s2), _cfg(delta=delta), constraint=_loose())
        rng = make_rng(2024)
        x = ImageVector.zeros((1, 2))
        chain = np.empty((n_steps, 2))
        for k in range(n_steps):
            x = step_smooth_prior(x, spec, rng)
            chain[k] = x.data
        # lei estacionária exata da cadeia discretizada (Gaussiana com variância δ/(1 − ρ²))
        rho = 1 - delta / (2 * s2)
        v = delta / (1 - rho**2)
        tau_int = (1 + rho) / (1 - rho)
        se = np.sqrt(v * tau_int / n_steps)
        assert np.all(np.abs(chain.mean(axis=0)) < 3 * se)
        cov = np.cov(chain.T)
        np.testing.assert_allclose(np.diag(cov), [v, v], rtol=0.1)
        assert abs(cov[0, 1]) < 0.1 * s2
        assert v == pytest.approx(s2, rel=0.06)


class TestStepMyPrior:
    def test_zero_mu_has_no_prior_drift(self):
        prior = WaveletL1Prior(0.0, WaveletDictionary("haar", 1, (2, 2)))
        spec = KernelSpec("langevin_my_prior", prior, _cfg())
        x = ImageVector([1.0, 2.0, -3.0, 0.5], (2, 2))
        np.testing.assert_array_equal(drift(x, spec), np.zeros(4))
        np.testing.assert_array_equal(step_my_prior(x, spec, None, noise=np.zeros(4)).data, x.data)

    def test_quadratic_prior_drift_matches_envelope_gradient(self, rng):
        prior = _gauss(4, 0.7)
        lam = 0.3
        spec = KernelSpec("langevin_my_prior", prior, _cfg(delta=0.01, lambda_my=lam))
        env = MoreauEnvelope(prior, lam)
        x = ImageVector(rng.normal(size=4), (1, 4))
        h = 1e-5
        fd = np.array(
            [
                (moreau_eval(env, x.with_data(x.data + h * e)) - moreau_eval(env, x.with_data(x.data - h * e))) / (2 * h)
                for e in np.eye(4)
            ]
        )
        # deriva do prior = −(δ/2)·∇f^λ
        grad = -drift(x, spec) / (0.5 * spec.cfg.delta)
        np.testing.assert_allclose(grad, fd, rtol=1e-5, atol=1e-8)

    def test_constraint_drift_points_to_projection(self):
        c = _tight(2)
        spec = KernelSpec("langevin_my_prior", ZeroPotential((1, 2)), _cfg(), constraint=c)
        x = ImageVector([5.0, -4.0], (1, 2))
        d = drift(x, spec)
        p = c.project(x)
        assert float(np.dot(d, p.data - x.data)) > 0.0

    def test_constraint_drift_is_exactly_zero_inside(self):
        c = _loose(2)
        spec = KernelSpec("langevin_my_prior", ZeroPotential((1, 2)), _cfg(), constraint=c)
        d = KernelDiagnostics()
        np.testing.assert_array_equal(drift(ImageVector([0.3, 0.1], (1, 2)), spec, diagnostics=d), [0.0, 0.0])
        assert d.projections == 0


class TestStepDataDriven:
    def test_analytic_denoiser_matches_smoothed_gaussian_prior(self, rng):
        s2, eps = 0.4, 0.25
        m = ImageVector(rng.normal(size=6), (2, 3))
        den = AnalyticGaussianDenoiser(m, s2, eps)
        cfg = _cfg(delta=0.05, epsilon=eps, alpha=1.0, lambda_my=0.1)
        c = LikelihoodConstraint(_gauss(shape=(2, 3)), _gauss(shape=(2, 3)).log_norm + 0.5)
        dd = KernelSpec("data_driven", None, cfg, constraint=c, denoiser=den)
        smooth = KernelSpec("langevin_smooth_prior", GaussianPotential(m, s2 + eps), cfg, constraint=c)
        for _ in range(5):
            x = ImageVector(rng.normal(size=6) * 2, (2, 3))
            w = rng.normal(size=6)
            np.testing.assert_allclose(
                step_data_driven(x, dd, None, noise=w).data,
                step_smooth_prior(x, smooth, None, noise=w).data,
                atol=1e-12,
            )

    def test_coupled_chains_agree_over_ten_thousand_steps(self):
        s2, eps = 0.4, 0.25
        m = ImageVector(np.linspace(-1.0, 1.0, 6), (2, 3))
        cfg = _cfg(delta=0.05, epsilon=eps, alpha=1.0, lambda_my=0.1)
        g = _gauss(shape=(2, 3))
        c = LikelihoodConstraint(g, g.log_norm + 2.0)
        dd = KernelSpec("data_driven", None, cfg, constraint=c, denoiser=AnalyticGaussianDenoiser(m, s2, eps))
        smooth = KernelSpec("langevin_smooth_prior", GaussianPotential(m, s2 + eps), cfg, constraint=c)
        rng_a, rng_b = make_rng(2024), make_rng(2024)
        xa = xb = ImageVector.zeros((2, 3))
        worst = 0.0
        for _ in range(10_000):
            _, xa = transition(xa, dd, rng_a)
            _, xb = transition(xb, smooth, rng_b)
            worst = max(worst, float(np.max(np.abs(xa.data - xb.data))))
        assert worst < 1e-9
        assert rng_a.random() == rng_b.random()

    def test_drift_identity_for_alpha_one(self, rng):
        s2, eps, delta = 1.3, 0.2, 0.01
        m = ImageVector(np.zeros(4), (2, 2))
        spec = KernelSpec("data_driven", None, _cfg(delta=delta, epsilon=eps), denoiser=AnalyticGaussianDenoiser(m, s2, eps))
        x = ImageVector(rng.normal(size=4), (2, 2))
        np.testing.assert_allclose(drift(x, spec), (delta / 2) * (-(x.data - m.data) / (s2 + eps)), atol=1e-12)

    def test_identity_denoiser_has_no_prior_drift(self):
        spec = KernelSpec("data_driven", None, _cfg(epsilon=1.0), denoiser=IdentityDenoiser(1.0))
        x = ImageVector([0.4, -0.9], (1, 2))
        np.testing.assert_array_equal(drift(x, spec), [0.0, 0.0])

    def test_alpha_zero_is_constraint_plus_noise(self, rng):
        m = ImageVector(np.zeros(2), (1, 2))
        c = _tight(2)
        den = AnalyticGaussianDenoiser(m, 1.0, 1.0)
        dd = KernelSpec("data_driven", None, _cfg(alpha=0.0, epsilon=1.0), constraint=c, denoiser=den)
        free = KernelSpec("langevin_my_prior", ZeroPotential((1, 2)), _cfg(alpha=0.0, epsilon=1.0), constraint=c)
        x = ImageVector([3.0, 1.0], (1, 2))
        w = rng.normal(size=2)
        np.testing.assert_array_equal(step_data_driven(x, dd, None, noise=w).data, step_my_prior(x, free, None, noise=w).data)

    def test_epsilon_must_match_denoiser(self):
        den = IdentityDenoiser(0.5)
        with pytest.raises(ConfigError, match="epsilon"):
            KernelSpec("data_driven", None, _cfg(epsilon=1.0), denoiser=den)

    def test_no_mh_for_data_driven(self):
        with pytest.raises(ConfigError):
            KernelSpec("data_driven", None, _cfg(epsilon=1.0), denoiser=IdentityDenoiser(1.0), mh_correction=True)

    def test_denoiser_required(self):
        with pytest.raises(ConfigError):
            KernelSpec("data_driven", None, _cfg())


class TestMetropolisHastings:
    def test_constraint_violation_always_rejected(self):
        c = _tight(2)
        spec = KernelSpec("langevin_smooth_prior", _gauss(2), _cfg(), constraint=c, mh_correction=True)
        x = ImageVector([0.1, 0.0], (1, 2))
        bad = ImageVector([3.0, 3.0], (1, 2))
        rng = make_rng(0)
        d = KernelDiagnostics()
        for _ in range(50):
            accepted, nxt = mh_accept(x, bad, spec, rng, diagnostics=d)
            assert not accepted
            assert nxt is x
        assert d.constraint_rejections == 50

    def test_identical_proposal_always_accepted(self):
        spec = KernelSpec("langevin_smooth_prior", _gauss(2), _cfg(), constraint=_loose(), mh_correction=True)
        x = ImageVector([0.3, -0.2], (1, 2))
        rng = make_rng(1)
        assert all(mh_accept(x, x, spec, rng)[0] for _ in range(200))

    def test_one_uniform_per_call(self):
        spec = KernelSpec("langevin_smooth_prior", _gauss(2), _cfg(), mh_correction=True)
        x = ImageVector([0.3, -0.2], (1, 2))
        rng = make_rng(5)
        mh_accept(x, x.with_data([1.0, 1.0]), spec, rng)
        ref = make_rng(5)
        ref.random()
        assert rng.random() == ref.random()

    def test_requires_flag(self):
        spec = KernelSpec("langevin_smooth_prior", _gauss(2), _cfg())
        x = ImageVector([0.0, 0.0], (1, 2))
        with pytest.raises(ConfigError):
            mh_accept(x, x, spec, make_rng(0))

    def test_emitted_samples_respect_constraint(self):
        c = _tight(2, radius=0.3)
        spec = KernelSpec("langevin_smooth_prior", _gauss(2, 4.0), _cfg(delta=0.05), constraint=c, mh_correction=True)
        rng = make_rng(9)
        x = ImageVector([0.0, 0.0], (1, 2))
        for _ in range(2000):
            _, x = transition(x, spec, rng)
            assert c.potential_g.eval(x) < c.tau + 1e-12

    def test_unadjusted_chain_leaves_ball_and_is_pushed_back(self):
        c = _tight(2, radius=0.3)
        spec = KernelSpec("langevin_smooth_prior", _gauss(2, 4.0), _cfg(delta=0.05, lambda_my=0.05), constraint=c)
        rng = make_rng(10)
        d = KernelDiagnostics()
        x = ImageVector([0.0, 0.0], (1, 2))
        outside = 0
        for _ in range(2000):
            _, x = transition(x, spec, rng, d)
            assert x.norm() < 2.0
            if not c.contains(x):
                outside += 1
                assert np.linalg.norm(drift(x, spec) - drift(x, spec.with_constraint(None))) > 0.0
        assert outside > 0
        assert d.projections > 0
        assert d.constraint_rejections == 0
        assert d.accepted == d.steps == 2000

    @pytest.mark.parametrize("variant", ["langevin_smooth_prior", "langevin_my_prior"])
    def test_unadjusted_transition_is_the_step_function(self, variant):
        c = _tight(2, radius=0.3)
        spec = KernelSpec(variant, _gauss(2, 4.0), _cfg(delta=0.05, lambda_my=0.05), constraint=c)
        step = {"langevin_smooth_prior": step_smooth_prior, "langevin_my_prior": step_my_prior}[variant]
        x = ImageVector([0.5, -0.4], (1, 2))
        _, via_transition = transition(x, spec, make_rng(3))
        noise = make_rng(3).standard_normal(2)
        np.testing.assert_array_equal(via_transition.data, step(x, spec, None, noise=noise).data)

    @pytest.mark.slow
    def test_ks_distance_one_dimensional_gaussian(self):
        s2 = 0.25
        spec = KernelSpec(
            "langevin_smooth_prior",
            _gauss(1, s2),
            _cfg(delta=0.5),
            constraint=LikelihoodConstraint(_gauss(1), _gauss(1).log_norm + 50.0),
            mh_correction=True,
        )
        rng = make_rng(77)
        x = ImageVector([0.0], (1, 1))
        n = 100_000
        out = np.empty(n)
        d = KernelDiagnostics()
        for k in range(n):
            _, x = transition(x, spec, rng, d)
            out[k] = x.data[0]
        ks = stats.kstest(out, stats.norm(scale=np.sqrt(s2)).cdf).statistic
        assert ks < 0.01
        assert 0.3 < d.acceptance_rate() < 1.0


class TestSamplePrior:
    def test_bookkeeping(self):
        spec = KernelSpec("langevin_smooth_prior", _gauss(2), _cfg(thinning=1, burn_in=0), x_init=ImageVector([0.5, 0.5], (1, 2)))
        samples = sample_prior(spec, 3, make_rng(4))
        assert len(samples) == 3
        rng = make_rng(4)
        x = spec.x_init
        for s in samples:
            x = evolve(x, spec, rng, 1)
            np.testing.assert_array_equal(s.data, x.data)

    def test_constraint_removed(self):
        spec = KernelSpec("langevin_smooth_prior", _gauss(2), _cfg(delta=0.5, burn_in=5), constraint=_tight(2, 0.01))
        samples = sample_prior(spec, 20, make_rng(1))
        assert max(s.norm() for s in samples) > 0.01

    def test_deterministic(self):
        spec = KernelSpec("langevin_smooth_prior", _gauss(2), _cfg(delta=0.1, thinning=3, burn_in=4))
        a = sample_prior(spec, 10, make_rng(8))
        b = sample_prior(spec, 10, make_rng(8))
        for u, v in zip(a, b):
            np.testing.assert_array_equal(u.data, v.data)

    def test_trace_records_every_step(self):
        like = _gauss(2)
        spec = KernelSpec("langevin_smooth_prior", _gauss(2), _cfg(thinning=2, burn_in=3))
        trace = ChainTrace(likelihood=like)
        sample_prior(spec, 4, make_rng(0), trace=trace)
        df = trace.to_frame()
        assert list(df["iteration"]) == list(range(1, 12))
        assert df["accepted"].all()

    def test_initial_state_needs_shape(self):
        spec = KernelSpec("data_driven", None, _cfg(epsilon=1.0), denoiser=IdentityDenoiser(1.0))
        with pytest.raises(ConfigError):
            spec.initial_state()

    @pytest.mark.slow
    def test_moments(self):
        s2, delta = 0.01, 2e-3
        spec = KernelSpec("langevin_smooth_prior", _gauss(2, s2), _cfg(delta=delta, thinning=50, burn_in=200))
        samples = np.stack([s.data for s in sample_prior(spec, 2000, make_rng(31))])
        rho = 1 - delta / (2 * s2)
        v = delta / (1 - rho**2)
        se = np.sqrt(v / len(samples))
        assert np.all(np.abs(samples.mean(axis=0)) < 3 * se * 1.1)
        np.testing.assert_allclose(np.var(samples, axis=0, ddof=1), [v, v], rtol=0.1)
