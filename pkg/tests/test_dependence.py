import numpy as np
import pytest
import scipy.stats

from envcontours import dependence as dep
from envcontours.dependence import (
    ConditionalExtremes,
    DependenceError,
    Independence,
    Logistic,
    Nataf,
    PerfectDependence,
    fit_conditional_extremes,
    fit_logistic,
    fit_margin,
    fit_nataf,
    frechet_from_uniform,
    from_frechet,
    logistic_exponent,
    sample_logistic_frechet,
    simulate,
    to_frechet,
    uniform_from_frechet,
)


def kendall_tau(x, y):
    return scipy.stats.kendalltau(x, y).statistic


class TestMargins:
    def test_cdf_ppf_round_trip(self, small_margins):
        m = small_margins.margins[0]
        x = np.linspace(m.body_values[1] + 1e-6, m.gpd.threshold + 3.0, 200)
        p = m.cdf(x)
        back = m.ppf(np.clip(p, 1e-12, 1 - 1e-12))
        assert np.allclose(back, x, atol=1e-6)

    def test_cdf_monotone(self, small_margins):
        for m in small_margins.margins:
            x = np.linspace(m.body_values[0], m.gpd.threshold + 5.0, 500)
            assert np.all(np.diff(m.cdf(x)) >= 0)

    def test_tail_splice_continuous(self, small_margins):
        for m in small_margins.margins:
            u = m.gpd.threshold
            below = m.cdf(u - 1e-9)
            above = m.cdf(u + 1e-9)
            assert abs(above - below) < 1e-3

    def test_needs_enough_exceedances(self):
        with pytest.raises(DependenceError, match="10"):
            fit_margin(np.linspace(0, 1, 40), years=1.0, threshold_quantile=0.99)

    def test_serialization_round_trip(self, small_margins):
        doc = dep.margins_to_dict(small_margins)
        back = dep.margins_from_dict(doc)
        x = np.array([[2.0, 10.0, 0.3]])
        np.testing.assert_allclose(back.cdf_matrix(x), small_margins.cdf_matrix(x))


class TestFrechet:
    def test_anchor_values(self):
        assert frechet_from_uniform(np.exp(-1.0)) == pytest.approx(1.0, abs=1e-12)
        assert frechet_from_uniform(np.exp(-0.01)) == pytest.approx(100.0, abs=1e-9)

    def test_round_trip(self, small_margins):
        x = small_margins.ppf_matrix(np.full((5, 3), 0.6) + 0.05 * np.arange(5)[:, None])
        z = to_frechet(x, small_margins)
        back = from_frechet(z, small_margins)
        np.testing.assert_allclose(back, x, atol=1e-9)

    def test_boundary_rejected(self):
        from envcontours.evt import GpdFit

        margin = dep.SemiParametricMargin(
            gpd=GpdFit(threshold=5.0, scale=1.0, shape=-0.5,
                       exceedance_rate=1.0, n_exceedances=100, loglik=0.0),
            body_values=np.array([0.0, 5.0]),
            body_probs=np.array([1e-12, 0.9]),
            tail_fraction=0.1,
        )
        one = dep.MarginalSet(variables=["hs"], margins=[margin], events_per_year=1.0)
        # 8.0 is beyond the GPD upper endpoint (7.0), so F(x) = 1 exactly
        with pytest.raises(DependenceError, match="support"):
            to_frechet(np.array([[8.0]]), one)


class TestNataf:
    def _gaussian_copula_sample(self, rho, n, seed):
        rng = np.random.default_rng(seed)
        cov = np.array([[1.0, rho], [rho, 1.0]])
        z = rng.multivariate_normal(np.zeros(2), cov, size=n)
        return scipy.stats.norm.cdf(z)

    @pytest.mark.parametrize("rho", [0.3, 0.7])
    def test_recovery(self, rho):
        u = self._gaussian_copula_sample(rho, 100_000, seed=11)
        y = scipy.stats.norm.ppf(u)

        class _IdMargins:
            def cdf_matrix(self, x):
                return scipy.stats.norm.cdf(x)

        model = fit_nataf(y, _IdMargins(), tail_quantile=0.9)
        assert abs(model.corr[0, 1] - rho) < 0.05

    def test_independent_data(self):
        # a moderate threshold keeps the inverse tail-matching map
        # well-conditioned near rho = 0
        rng = np.random.default_rng(12)
        y = rng.standard_normal((200_000, 2))

        class _IdMargins:
            def cdf_matrix(self, x):
                return scipy.stats.norm.cdf(x)

        model = fit_nataf(y, _IdMargins(), tail_quantile=0.6)
        assert abs(model.corr[0, 1]) < 0.1

    def test_comonotone_hits_upper_bound(self):
        x = np.linspace(0.01, 0.99, 2000)
        y = scipy.stats.norm.ppf(np.column_stack([x, x]))

        class _IdMargins:
            def cdf_matrix(self, x):
                return scipy.stats.norm.cdf(x)

        model = fit_nataf(y, _IdMargins(), tail_quantile=0.8)
        assert model.corr[0, 1] >= 0.99
        assert any("upper" in f for f in model.boundary_flags)

    def test_too_few_joint_points(self, small_margins, small_events):
        with pytest.raises(DependenceError, match="joint tail"):
            fit_nataf(small_events, small_margins, tail_quantile=0.999)

    def test_asymptotic_independence_chi_decreasing(self, small_margins):
        # Gaussian copula is asymptotically independent: chi(q) decreases
        # toward 0 as q -> 1 (exact values 0.354, 0.228, 0.160 at the three
        # levels below for rho = 0.7)
        model = Nataf(corr=np.array([[1.0, 0.7, 0.0], [0.7, 1.0, 0.0],
                                     [0.0, 0.0, 1.0]]), tail_quantile=0.9)
        sim = simulate(model, small_margins, 1_000_000, seed=13)
        u = small_margins.cdf_matrix(sim.values)
        chis = []
        for q in (0.98, 0.995, 0.999):
            both = np.mean((u[:, 0] > q) & (u[:, 1] > q))
            chis.append(both / (1.0 - q))
        assert chis[0] > chis[1] > chis[2]
        assert chis[2] == pytest.approx(0.1596, abs=0.03)


class TestLogistic:
    def test_exponent_closed_forms(self):
        assert logistic_exponent([1.0, 1.0], 1.0) == pytest.approx(2.0, abs=1e-12)
        assert logistic_exponent([1.0, 1.0], 0.5) == pytest.approx(
            np.sqrt(2.0), abs=1e-12
        )
        for alpha in (0.3, 0.5, 0.8):
            assert logistic_exponent([1.0, 1.0], alpha) == pytest.approx(
                2.0**alpha, abs=1e-12
            )

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
    def test_sampler_kendall_tau(self, alpha):
        rng = np.random.default_rng(14)
        z = sample_logistic_frechet(alpha, 2, 10_000, rng)
        assert abs(kendall_tau(z[:, 0], z[:, 1]) - (1.0 - alpha)) < 0.03

    def test_sampler_frechet_margins(self):
        rng = np.random.default_rng(15)
        z = sample_logistic_frechet(0.5, 3, 20_000, rng)
        u = uniform_from_frechet(z)
        for j in range(3):
            assert scipy.stats.kstest(u[:, j], "uniform").statistic < 0.02

    @pytest.mark.parametrize("alpha", [0.4, 0.7])
    def test_censored_fit_recovery(self, alpha, small_margins):
        rng = np.random.default_rng(16)
        z = sample_logistic_frechet(alpha, 3, 4000, rng)
        x = from_frechet(z, small_margins)
        model = fit_logistic(x, small_margins, censor_level=0.7)
        assert abs(model.alpha - alpha) < 0.05

    def test_chi_at_high_quantile(self, small_margins):
        model = Logistic(alpha=0.5, censor_level=0.9)
        sim = simulate(model, small_margins, 200_000, seed=17)
        u = small_margins.cdf_matrix(sim.values)
        q = 0.99
        chi = np.mean((u[:, 0] > q) & (u[:, 1] > q)) / (1.0 - q)
        assert abs(chi - (2.0 - 2.0**0.5)) < 0.05


class TestConditionalExtremes:
    def test_comonotone_fixture(self, small_margins):
        u = np.linspace(0.2, 0.999, 3000)
        x = small_margins.ppf_matrix(np.column_stack([u, u, u]))
        nu = frechet_from_uniform(0.9)
        model = fit_conditional_extremes(x, small_margins, nu=nu, years=10.0)
        for i in range(3):
            for j in range(3):
                if i == j:
                    continue
                assert model.a[i, j] == pytest.approx(1.0, abs=1e-6)
                assert model.res_sd[i, j] < 1e-6

    def test_independent_fixture(self, small_margins):
        rng = np.random.default_rng(18)
        u = rng.random((20_000, 3))
        x = small_margins.ppf_matrix(np.clip(u, 1e-9, 1 - 1e-9))
        nu = frechet_from_uniform(0.8)
        model = fit_conditional_extremes(x, small_margins, nu=nu, years=10.0)
        assert np.all(model.a[~np.eye(3, dtype=bool)] < 0.1)

    def test_symmetry(self, small_margins):
        rng = np.random.default_rng(19)
        z = sample_logistic_frechet(0.5, 2, 10_000, rng)
        two = dep.MarginalSet(
            variables=small_margins.variables[:2],
            margins=small_margins.margins[:2],
            events_per_year=small_margins.events_per_year,
        )
        x = from_frechet(z, two)
        nu = frechet_from_uniform(0.8)
        model = fit_conditional_extremes(x, two, nu=nu, years=10.0)
        assert abs(model.a[0, 1] - model.a[1, 0]) < 0.1

    def test_too_few_conditioning_events(self, small_margins):
        u = np.linspace(0.2, 0.7, 100)
        x = small_margins.ppf_matrix(np.column_stack([u, u, u]))
        with pytest.raises(DependenceError, match="conditioning events"):
            fit_conditional_extremes(
                x, small_margins, nu=frechet_from_uniform(0.95), years=10.0
            )


class TestSimulate:
    def test_perfect_dependence_comonotone(self, small_margins):
        sim = simulate(PerfectDependence(), small_margins, 3, seed=20)
        u = small_margins.cdf_matrix(sim.values)
        for row in u:
            assert np.ptp(row) < 1e-9

    def test_independence_uncorrelated(self, small_margins):
        sim = simulate(Independence(), small_margins, 100_000, seed=21)
        c = np.corrcoef(sim.values.T)
        off = c[~np.eye(3, dtype=bool)]
        assert np.all(np.abs(off) < 0.02)

    def test_reproducible(self, small_margins):
        a = simulate(Independence(), small_margins, 100, seed=22)
        b = simulate(Independence(), small_margins, 100, seed=22)
        np.testing.assert_array_equal(a.values, b.values)

    @pytest.mark.parametrize("model", [
        Independence(),
        PerfectDependence(),
        Nataf(corr=np.array([[1.0, 0.5, 0.2], [0.5, 1.0, 0.3], [0.2, 0.3, 1.0]]),
              tail_quantile=0.9),
        Logistic(alpha=0.6, censor_level=0.9),
    ], ids=["independence", "perfect", "nataf", "logistic"])
    def test_marginals_variant_independent(self, model, small_margins):
        sim = simulate(model, small_margins, 100_000, seed=23)
        ref = simulate(Independence(), small_margins, 100_000, seed=24)
        for j in range(3):
            ks = scipy.stats.ks_2samp(sim.values[:, j], ref.values[:, j]).statistic
            assert ks < 0.02

    def test_margin_ks_against_fitted_cdf(self, small_margins):
        sim = simulate(Independence(), small_margins, 100_000, seed=25)
        for j, m in enumerate(small_margins.margins):
            ks = scipy.stats.kstest(sim.values[:, j], m.cdf).statistic
            assert ks < 0.02

    def test_logistic_alpha_one_is_independence(self, small_margins):
        a = simulate(Logistic(alpha=1.0, censor_level=0.9), small_margins, 10_000, seed=26)
        tau = kendall_tau(a.values[:, 0], a.values[:, 1])
        assert abs(tau) < 0.03

    def test_ce_simulation_tail_only(self, small_margins, small_events):
        nu = frechet_from_uniform(0.8)
        model = fit_conditional_extremes(small_events, small_margins, nu=nu)
        sim = simulate(model, small_margins, 5000, seed=27)
        z = to_frechet(sim.values, small_margins)
        assert np.all(z.max(axis=1) > nu)
        assert sim.events_per_year == model.tail_events_per_year

    def test_model_serialization_round_trip(self, small_margins, small_events, tmp_path):
        nu = frechet_from_uniform(0.8)
        models = [
            Independence(),
            PerfectDependence(),
            fit_nataf(small_events, small_margins, tail_quantile=0.6),
            fit_logistic(small_events, small_margins, censor_level=0.75),
            fit_conditional_extremes(small_events, small_margins, nu=nu),
        ]
        for model in models:
            path = tmp_path / f"{model.kind}.json"
            dep.save_model(model, path)
            back = dep.load_model(path)
            a = simulate(model, small_margins, 50, seed=28)
            b = simulate(back, small_margins, 50, seed=28)
            np.testing.assert_array_equal(a.values, b.values)
