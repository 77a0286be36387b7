import numpy as np
import pytest
from scipy.cluster.hierarchy import linkage, to_tree
from scipy.spatial.distance import squareform

from corrlab import portfolio
from corrlab.exceptions import InvalidInput, NotPositiveDefinite
from corrlab.facts import corr_distance
from corrlab.samplers import RegimeLabel, sample_regime


def rand_cov(dim, seed):
    g = np.random.Generator(np.random.PCG64(seed))
    corr = sample_regime(RegimeLabel.NORMAL, dim, seed=seed, stream=0)
    vols = g.uniform(0.1, 0.4, dim)
    return np.outer(vols, vols) * corr + 1e-8 * np.eye(dim)


def hrp_reference(cov):
    """Independent recursive implementation of the HRP allocation."""
    std = np.sqrt(np.diag(cov))
    corr = cov / np.outer(std, std)
    np.fill_diagonal(corr, 1.0)
    d = corr_distance(corr)
    z = linkage(squareform(d, checks=False), method="average")
    order = to_tree(z, rd=False).pre_order()

    def cluster_var(idx):
        sub = cov[np.ix_(idx, idx)]
        iv = 1.0 / np.diag(sub)
        w = iv / iv.sum()
        return float(w @ sub @ w)

    w = np.ones(len(order))

    def recurse(items):
        if len(items) <= 1:
            return
        half = len(items) // 2
        left, right = items[:half], items[half:]
        vl, vr = cluster_var(left), cluster_var(right)
        alpha = 1.0 - vl / (vl + vr)
        w[left] *= alpha
        w[right] *= 1.0 - alpha
        recurse(left)
        recurse(right)

    recurse(order)
    return w / w.sum()


class TestWeights:
    def test_ew(self):
        assert np.allclose(portfolio.ew_weights(4), 0.25)
        with pytest.raises(InvalidInput):
            portfolio.ew_weights(0)

    def test_ivp_closed_form(self):
        cov = np.diag([1.0, 2.0, 4.0])
        w = portfolio.ivp_weights(cov)
        assert np.allclose(w, np.array([4, 2, 1]) / 7.0)

    def test_ivp_rejects_nonpositive_variance(self):
        with pytest.raises(InvalidInput):
            portfolio.ivp_weights(np.diag([1.0, 0.0]))

    @pytest.mark.parametrize("seed", range(8))
    def test_hrp_matches_independent_recursion(self, seed):
        cov = rand_cov(10, seed)
        assert np.allclose(
            portfolio.hrp_weights(cov), hrp_reference(cov), atol=1e-12
        )

    def test_hrp_properties(self):
        cov = rand_cov(12, 99)
        w = portfolio.hrp_weights(cov)
        assert w.sum() == pytest.approx(1.0)
        assert np.all(w > 0)

    def test_hrp_equals_ivp_on_uncorrelated(self):
        cov = np.diag([1.0, 2.0, 3.0, 4.0])
        assert np.allclose(
            portfolio.hrp_weights(cov), portfolio.ivp_weights(cov), atol=1e-12
        )

    def test_hrp_rejects_indefinite(self):
        m = np.array([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(NotPositiveDefinite):
            portfolio.hrp_weights(m)

    def test_weights_for_dispatch(self):
        cov = np.diag([1.0, 2.0])
        assert np.allclose(portfolio.weights_for("ew", cov), 0.5)
        with pytest.raises(InvalidInput):
            portfolio.weights_for("markowitz", cov)


class TestSimulation:
    def test_sample_covariance_converges(self):
        dim, t = 16, 100_000
        corr = sample_regime(RegimeLabel.NORMAL, dim, seed=3, stream=0)
        vols = np.full(dim, 0.01)
        for seed in range(5):
            panel = portfolio.simulate_returns(corr, vols, t, seed)
            cov_hat = np.cov(panel, rowvar=False, ddof=1)
            corr_hat = cov_hat / np.outer(vols, vols)
            assert np.max(np.abs(corr_hat - corr)) <= 0.02

    def test_deterministic(self):
        corr = np.eye(4)
        a = portfolio.simulate_returns(corr, np.full(4, 0.01), 10, seed=1)
        b = portfolio.simulate_returns(corr, np.full(4, 0.01), 10, seed=1)
        assert np.array_equal(a, b)

    def test_rejects_bad_args(self):
        with pytest.raises(InvalidInput):
            portfolio.simulate_returns(np.eye(2), [0.01, 0.01], 1, seed=0)
        with pytest.raises(InvalidInput):
            portfolio.simulate_returns(np.eye(2), [0.01, -0.01], 10, seed=0)


def test_max_drawdown_oracle():
    # wealth path: 1.1, 0.55, 0.6875; peak 1.1 -> drawdown 0.5
    path = np.array([0.1, -0.5, 0.25])
    assert portfolio.max_drawdown(path) == pytest.approx(0.5)
    assert portfolio.max_drawdown(np.array([0.1, 0.2])) == 0.0


class TestBacktest:
    def test_report_fields(self):
        corr = sample_regime(RegimeLabel.NORMAL, 8, seed=1, stream=0)
        vols = portfolio.default_vols(8, seed=1)
        rep = portfolio.backtest(corr, vols, "hrp", 252, 252, seed=4)
        assert rep.in_sample_vol > 0
        assert rep.out_sample_vol > 0
        assert 0 <= rep.max_drawdown <= 1
        assert rep.decay == pytest.approx(
            rep.out_sample_vol - rep.in_sample_vol
        )

    def test_deterministic(self):
        corr = sample_regime(RegimeLabel.RALLY, 8, seed=2, stream=0)
        vols = portfolio.default_vols(8, seed=2)
        a = portfolio.backtest(corr, vols, "ivp", 252, 252, seed=6)
        b = portfolio.backtest(corr, vols, "ivp", 252, 252, seed=6)
        assert a == b

    def test_rejects_short_panel(self):
        with pytest.raises(InvalidInput):
            portfolio.backtest(np.eye(8), np.full(8, 0.01), "ew", 5, 252, 0)

    def test_rejects_unknown_method(self):
        with pytest.raises(InvalidInput):
            portfolio.backtest(np.eye(8), np.full(8, 0.01), "mv", 252, 252, 0)
