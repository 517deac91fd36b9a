import numpy as np
import pytest
from scipy import stats

from rankmanova.exceptions import ConfigError, InvalidCorrelation, NotPSD
from rankmanova.simulation import (
    SimScenario,
    ar_cov,
    cs_cov,
    gen_continuous,
    gen_errors,
    gen_ordinal,
    generate,
    matrix_sqrt,
    named_study,
    power_study,
    run_cell,
    type1_study,
)


class TestCovariances:
    def test_cs(self):
        np.testing.assert_array_equal(cs_cov(2), [[1, 0.5], [0.5, 1]])
        np.testing.assert_array_equal(cs_cov(1), [[1]])
        np.testing.assert_array_equal(cs_cov(3, 0.0), np.eye(3))

    @pytest.mark.parametrize("d, rho", [(3, -0.5), (4, 1.0), (2, -1.0)])
    def test_cs_invalid(self, d, rho):
        with pytest.raises(InvalidCorrelation):
            cs_cov(d, rho)

    def test_ar(self):
        np.testing.assert_allclose(ar_cov(2), [[1, 0.6], [0.6, 1]])
        assert ar_cov(3)[0, 2] == pytest.approx(0.36)
        np.testing.assert_array_equal(ar_cov(4, 0.0), np.eye(4))
        with pytest.raises(InvalidCorrelation):
            ar_cov(3, 1.0)

    def test_sqrt(self):
        np.testing.assert_allclose(matrix_sqrt(np.eye(3)), np.eye(3), atol=1e-15)
        np.testing.assert_allclose(matrix_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-15)
        for V in (cs_cov(4, 0.5), ar_cov(5, 0.6)):
            R = matrix_sqrt(V)
            np.testing.assert_allclose(R, R.T, atol=1e-14)
            assert np.linalg.norm(R @ R - V) < 1e-8

    def test_sqrt_not_psd(self):
        with pytest.raises(NotPSD):
            matrix_sqrt(np.array([[1.0, 2.0], [2.0, 1.0]]))
        with pytest.raises(NotPSD):
            matrix_sqrt(np.array([[1.0, 0.5], [0.0, 1.0]]))


class TestErrors:
    @pytest.mark.parametrize("dist, var_se", [("normal", np.sqrt(2 / 1e5)), ("lognormal", np.sqrt(114 / 1e5))])
    def test_moments(self, dist, var_se):
        e = gen_errors(dist, 100_000, 2, np.random.default_rng(0))
        assert e.shape == (100_000, 2)
        assert np.all(np.abs(e.mean(axis=0)) < 4 / np.sqrt(1e5))
        assert np.all(np.abs(e.var(axis=0) - 1) < 4 * var_se)

    def test_lognormal_skewed(self):
        e = gen_errors("lognormal", 100_000, 1, np.random.default_rng(1))
        assert stats.skew(e[:, 0]) > 0

    def test_empty(self):
        assert gen_errors("normal", 0, 3, np.random.default_rng(0)).shape == (0, 3)

    def test_unknown(self):
        with pytest.raises(ConfigError):
            gen_errors("cauchy", 3, 1, np.random.default_rng(0))


class TestContinuous:
    def test_covariance_recovery(self):
        scn = SimScenario(covariance="S2", n=(20000, 20000), d=3)
        x = gen_continuous(scn, 0, np.random.default_rng(3))
        np.testing.assert_allclose(np.cov(x.T), ar_cov(3), atol=0.03)

    def test_identity_uncorrelated(self):
        scn = SimScenario(covariance="identity", n=(20000, 5), d=3)
        c = np.corrcoef(gen_continuous(scn, 0, np.random.default_rng(4)).T)
        assert np.abs(c - np.eye(3)).max() < 4 / np.sqrt(20000)

    def test_heteroscedastic_degenerates(self):
        het = SimScenario(distribution="heteroscedastic", covariance="identity", sigma2=(1.0, 1.0))
        hom = SimScenario(distribution="normal", covariance="identity")
        assert generate(het, np.random.default_rng(5)) == generate(hom, np.random.default_rng(5))

    @pytest.mark.parametrize("as_variance, expected", [(True, 2.0), (False, 4.0)])
    def test_sigma_reading(self, as_variance, expected):
        scn = SimScenario(distribution="heteroscedastic", covariance="identity", n=(5, 40000),
                          sigma2=(1.0, 2.0), sigma_is_variance=as_variance, d=1)
        x = gen_continuous(scn, 1, np.random.default_rng(6))
        assert x.var() == pytest.approx(expected, rel=0.03)

    def test_increment_and_shift(self):
        scn = SimScenario(n=(10, 20), m=30, delta=2.0, d=2)
        ds = generate(scn, np.random.default_rng(7))
        assert ds.n == (40, 50)
        big = SimScenario(n=(20000, 20000), delta=(0.0, 3.0), d=2)
        ds = generate(big, np.random.default_rng(8))
        np.testing.assert_allclose(ds.groups[1].mean(axis=0) - ds.groups[0].mean(axis=0), [0, 3], atol=0.05)

    def test_invalid_scenarios(self):
        with pytest.raises(ConfigError):
            SimScenario(distribution="gamma")
        with pytest.raises(ConfigError):
            SimScenario(n=(10,))
        with pytest.raises(ConfigError):
            SimScenario(delta=(1.0, 2.0), d=4)
        with pytest.raises(ConfigError):
            SimScenario(R=0)


class TestOrdinal:
    def test_marginals_uniform(self):
        x = gen_ordinal(4, cs_cov(4), 100_000, np.random.default_rng(9))
        for j in range(4):
            levels, counts = np.unique(x[:, j], return_counts=True)
            np.testing.assert_array_equal(levels, np.arange(1, j + 3))
            assert stats.chisquare(counts).pvalue > 0.001

    def test_two_categories(self):
        x = gen_ordinal(1, np.eye(1), 100_000, np.random.default_rng(10))
        assert set(np.unique(x)) == {1.0, 2.0}
        assert np.mean(x == 1) == pytest.approx(0.5, abs=0.01)

    def test_independence(self):
        x = gen_ordinal(3, np.eye(3), 50_000, np.random.default_rng(11))
        table = np.zeros((3, 4))
        np.add.at(table, (x[:, 1].astype(int) - 1, x[:, 2].astype(int) - 1), 1)
        assert stats.chi2_contingency(table).pvalue > 0.001

    def test_positive_dependence(self):
        x = gen_ordinal(2, cs_cov(2, 0.5), 50_000, np.random.default_rng(12))
        r = np.corrcoef(x.T)[0, 1]
        assert 0.2 < r < 0.5  # attenuated below the latent 0.5


class TestStudies:
    def test_reproducible_and_thread_invariant(self):
        scn = SimScenario(R=40, B=50, seed=3)
        tabs = [type1_study([scn], workers=w).to_text() for w in (1, 4, 8)]
        assert tabs[0] == tabs[1] == tabs[2]
        assert type1_study([scn]).to_text() == tabs[0]

    def test_delta_zero_reproduces_type1(self):
        scn = SimScenario(n=(20, 10), R=30, B=50, seed=4)
        t1 = type1_study([scn], engines=["wild"])
        pw = power_study(scn, deltas=[0.0, 1.0], engines=["wild"])
        assert pw.cells[0].rejections == t1.cells[0].rejections

    def test_table_layout(self):
        kind, grid = named_study("table1-normal-S1", R=5, B=20, m_grid=(0, 10, 30, 50))
        assert kind == "type1" and len(grid) == 12
        tab = type1_study(grid, engines=["wild"])
        text = tab.to_text()
        header = [l for l in text.splitlines() if not l.startswith("#")][0]
        assert header.endswith("m=0,m=10,m=30,m=50")
        rates = [c.rate for c in tab.cells]
        assert all(0 <= r <= 1 for r in rates) and len(rates) == 12
        assert tab.rate("wild", n=(10, 20), m=30) == tab.cells[6].rate

    @pytest.mark.parametrize("name, dist", [
        ("table2-1,2", "heteroscedastic"),
        ("table3-S2", "ordinal"),
        ("table1-lognormal-S2-d8", "lognormal"),
    ])
    def test_named(self, name, dist):
        kind, grid = named_study(name, R=5, B=5)
        assert grid[0].distribution == dist
        if name.endswith("d8"):
            assert grid[0].d == 8

    def test_named_power(self):
        kind, grid = named_study("power-ordinal")
        assert kind == "power" and grid[0].n == (20, 10)

    def test_unknown_name(self):
        with pytest.raises(ConfigError):
            named_study("table9-x")

    def test_unknown_engine(self):
        with pytest.raises(ConfigError):
            run_cell(SimScenario(R=2, B=2), engines=["pooled"])

    @pytest.mark.slow
    def test_power_saturates(self):
        scn = SimScenario(n=(20, 10), R=200, B=300, seed=5)
        tab = power_study(scn, deltas=[3.0])
        assert tab.rate("wild") >= 0.95
        assert tab.rate("classical") >= 0.95
