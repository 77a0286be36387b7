import numpy as np
import pytest

from corrlab import mc
from corrlab.exceptions import InvalidInput, RankDeficient, Unsupported
from corrlab.facts import FEATURE_NAMES, FeatureVector
from corrlab.mc import McConfig, SurrogateModel
from corrlab.portfolio import RiskReport
from corrlab.samplers import RegimeLabel


@pytest.fixture(scope="module")
def records():
    return mc.run(McConfig(count_per_regime=10, dim=24, t_in=60, t_out=60,
                           seed=17))


def make_record(features, gap, regime=RegimeLabel.NORMAL, stream=0):
    return mc.McRecord(
        regime=regime,
        features=FeatureVector.from_array(features),
        reports={
            "hrp": RiskReport(0.1, 0.1 + gap, 0.05),
            "ivp": RiskReport(0.1, 0.1, 0.05),
            "ew": RiskReport(0.1, 0.12, 0.05),
        },
        seed=0,
        stream=stream,
    )


class TestRun:
    def test_cardinality(self, records):
        assert len(records) == 30
        for regime in RegimeLabel:
            assert sum(r.regime is regime for r in records) == 10

    def test_thread_count_invariance(self):
        cfg = McConfig(count_per_regime=4, dim=16, t_in=40, t_out=40, seed=3)
        a = mc.run(cfg, threads=1)
        b = mc.run(cfg, threads=4)
        assert [r.to_json() for r in a] == [r.to_json() for r in b]

    def test_skip_on_failure(self, capsys):
        def bad_gen(regime, stream):
            if stream == 1:
                raise ValueError("boom")
            from corrlab.samplers import sample_regime
            return sample_regime(regime, 16, seed=0, stream=stream)

        cfg = McConfig(count_per_regime=2, dim=16, t_in=40, t_out=40, seed=1)
        out = mc.run(cfg, generator_fn=bad_gen)
        assert len(out) == 5
        assert "stream 1 skipped" in capsys.readouterr().out

    def test_rejects_bad_count(self):
        with pytest.raises(InvalidInput):
            mc.run(McConfig(count_per_regime=0))


class TestRecords:
    def test_json_round_trip(self, records, tmp_path):
        p = tmp_path / "r.ndjson"
        mc.write_records(records, p)
        back = mc.read_records(p)
        assert [r.to_json() for r in back] == [r.to_json() for r in records]

    def test_schema_check(self):
        with pytest.raises(InvalidInput):
            mc.McRecord.from_json({"schema": 2})

    def test_gap_property(self):
        r = make_record(np.arange(8, dtype=float), gap=-0.01)
        assert r.hrp_minus_ivp_outvol == pytest.approx(-0.01)


class TestSurrogateModel:
    def _synthetic_records(self, n, seed, noise=0.0, target_w=None):
        g = np.random.Generator(np.random.PCG64(seed))
        x = g.standard_normal((n, 8))
        if target_w is None:
            y = g.standard_normal(n)
        else:
            y = x @ target_w + noise * g.standard_normal(n)
        return [make_record(x[i], y[i], stream=i) for i in range(n)]

    def test_exact_linear_recovery(self):
        w = np.array([0.5, -0.2, 0.0, 1.0, 0.3, -0.7, 0.1, 0.9])
        recs = self._synthetic_records(400, 1, target_w=w)
        model = mc.fit_surrogate(recs, "outperformance")
        assert model.r2 == pytest.approx(1.0, abs=1e-10)
        x = mc.design_matrix(recs)
        y = np.array([r.hrp_minus_ivp_outvol for r in recs])
        pred = model.predict(x)
        assert np.max(np.abs(pred - y)) < 1e-8

    def test_noise_target_low_r2(self):
        recs = self._synthetic_records(1000, 2)
        model = mc.fit_surrogate(recs, "outperformance")
        assert model.r2 < 0.1

    def test_too_few_records(self):
        recs = self._synthetic_records(20, 3)
        with pytest.raises(InvalidInput):
            mc.fit_surrogate(recs)

    def test_duplicated_feature_rank_deficient(self):
        g = np.random.Generator(np.random.PCG64(4))
        x = g.standard_normal((200, 8))
        x[:, 3] = x[:, 2]  # duplicate column
        recs = [make_record(x[i], 0.0, stream=i) for i in range(200)]
        with pytest.raises(RankDeficient) as e:
            mc.fit_surrogate(recs)
        assert (FEATURE_NAMES[2], FEATURE_NAMES[3]) in e.value.collinear

    def test_decay_target(self, records):
        vals = [mc.target_value(r, "decay") for r in records]
        assert all(np.isfinite(vals))
        with pytest.raises(InvalidInput):
            mc.target_value(records[0], "sharpe")


class TestShapley:
    def _model(self):
        return SurrogateModel(
            coefficients=np.array([1.0, -2.0, 0.5, 0.0, 3.0, -1.0, 0.2, 0.7]),
            intercept=0.3,
            feature_means=np.zeros(8),
            feature_stds=np.ones(8),
            target="outperformance",
            r2=1.0,
        )

    def test_linear_closed_form(self):
        g = np.random.Generator(np.random.PCG64(5))
        model = self._model()
        bg = g.standard_normal((50, 8))
        x = g.standard_normal(8)
        att = mc.shapley(model, x, bg)
        closed = model.coefficients * (x - bg.mean(axis=0))
        assert np.max(np.abs(att.phi - closed)) < 1e-10

    def test_efficiency_identity(self):
        g = np.random.Generator(np.random.PCG64(6))
        model = self._model()
        bg = g.standard_normal((20, 8))
        x = g.standard_normal(8)
        att = mc.shapley(model, x, bg)
        assert abs(att.phi.sum() - (att.prediction - att.baseline)) < 1e-10

    def test_too_many_features(self):
        model = self._model()
        with pytest.raises(Unsupported):
            mc.shapley(model, np.zeros(13), np.zeros((5, 13)))


class TestFindings:
    def test_bootstrap_ci_brackets_mean(self):
        g = np.random.Generator(np.random.PCG64(7))
        vals = g.normal(2.0, 0.5, 500)
        lo, hi = mc.bootstrap_ci(vals)
        assert lo < vals.mean() < hi
        assert hi - lo < 0.3

    def test_regime_findings_structure(self, records):
        f = mc.regime_findings(records, n_boot=100)
        assert set(f) == {"stressed", "normal", "rally"}
        for v in f.values():
            assert v["count"] == 10
            assert 0.0 <= v["hrp_win_rate"] <= 1.0
            lo, hi = v["win_rate_ci95"]
            assert lo <= v["hrp_win_rate"] <= hi
