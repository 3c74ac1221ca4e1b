import numpy as np
import pytest

from texgram.stats import (
    BRAINSCORE_METRICS,
    BrainScoreRecord,
    correlate_mi_brainscore,
    pearson_p,
    pearson_r,
)


def _records(n, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        vals = rng.uniform(0.05, 0.45, size=7)
        out.append(BrainScoreRecord(f"model{i:02d}", *vals))
    return out


class TestPearsonR:
    def test_perfect_positive_affine(self):
        x = np.arange(10.0)
        assert pearson_r(x, 2 * x + 1) == 1.0

    def test_perfect_negative(self):
        x = np.arange(10.0)
        assert pearson_r(x, -x) == -1.0

    def test_matches_covariance_formula(self):
        rng = np.random.default_rng(50)
        x = rng.normal(size=12)
        y = rng.normal(size=12)
        r = pearson_r(x, y)
        cov = ((x - x.mean()) * (y - y.mean())).mean()
        expected = cov / (x.std() * y.std())
        assert r == pytest.approx(expected, abs=1e-12)

    def test_affine_invariance_and_negation(self):
        rng = np.random.default_rng(51)
        x = rng.normal(size=15)
        y = rng.normal(size=15)
        r = pearson_r(x, y)
        assert pearson_r(3.0 * x + 7.0, y) == pytest.approx(r, abs=1e-12)
        assert pearson_r(x, 0.1 * y - 2.0) == pytest.approx(r, abs=1e-12)
        r_neg = pearson_r(-x, y)
        assert r_neg == pytest.approx(-r, abs=1e-12)
        assert pearson_p(r_neg, 15) == pytest.approx(pearson_p(r, 15), abs=1e-12)

    def test_zero_variance_rejected(self):
        with pytest.raises(ValueError):
            pearson_r([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            pearson_r([1.0, 2.0], [0.0, 1.0])


class TestPearsonP:
    def test_published_convention_values(self):
        assert 0.67 <= pearson_p(-0.130, 12) <= 0.70
        assert 0.91 <= pearson_p(-0.029, 12) <= 0.93

    def test_exact_at_unit_correlation(self):
        assert pearson_p(1.0, 5) == 0.0
        assert pearson_p(-1.0, 30) == 0.0

    def test_monotone_decreasing_in_abs_r(self):
        rs = np.linspace(0.0, 0.99, 40)
        ps = [pearson_p(r, 12) for r in rs]
        assert all(b < a for a, b in zip(ps, ps[1:]))

    def test_matches_t_distribution_monte_carlo(self):
        # the implied t-CDF should agree with simulated t variates
        rng = np.random.default_rng(52)
        n = 12
        df = n - 2
        t_samples = rng.standard_t(df, size=1_000_000)
        for r in (0.1, 0.3, 0.55, 0.8):
            t = r * np.sqrt(df / (1 - r * r))
            mc = (np.abs(t_samples) > t).mean()
            assert pearson_p(r, n) == pytest.approx(mc, abs=2e-3)

    def test_domain_checks(self):
        with pytest.raises(ValueError):
            pearson_p(1.5, 10)
        with pytest.raises(ValueError):
            pearson_p(0.5, 2)


class TestCorrelateMiBrainscore:
    def test_self_correlation_gives_unit_r(self):
        records = _records(8, seed=1)
        best_mi = {rec.model: rec.average_vision for rec in records}
        results = correlate_mi_brainscore(best_mi, records)
        by_metric = {res.metric: res for res in results}
        assert by_metric["average_vision"].r == pytest.approx(1.0)
        assert by_metric["average_vision"].significant

    def test_composition_matches_columnwise_calls(self):
        records = _records(12, seed=2)
        rng = np.random.default_rng(3)
        best_mi = {rec.model: float(v) for rec, v in zip(records, rng.uniform(1, 3, 12))}
        results = correlate_mi_brainscore(best_mi, records)
        assert [res.metric for res in results] == list(BRAINSCORE_METRICS)
        models = sorted(best_mi)
        mi = np.array([best_mi[m] for m in models])
        by_model = {rec.model: rec for rec in records}
        for res in results:
            scores = np.array([by_model[m].metric(res.metric) for m in models])
            assert res.r == pytest.approx(pearson_r(mi, scores), abs=1e-12)
            assert res.p == pytest.approx(pearson_p(res.r, 12), abs=1e-12)
            assert res.significant == (res.p < 0.05)

    def test_constant_mi_flags_undefined(self):
        records = _records(6, seed=4)
        best_mi = {rec.model: 1.5 for rec in records}
        results = correlate_mi_brainscore(best_mi, records)
        assert all(res.undefined_variance for res in results)
        assert all(res.r is None and res.p is None for res in results)
        assert not any(res.significant for res in results)

    def test_model_set_mismatch_rejected(self):
        records = _records(5, seed=5)
        best_mi = {rec.model: 1.0 for rec in records[:-1]}
        with pytest.raises(ValueError):
            correlate_mi_brainscore(best_mi, records)

    def test_duplicate_model_rejected(self):
        records = _records(4, seed=6)
        records.append(records[0])
        with pytest.raises(ValueError):
            correlate_mi_brainscore({r.model: 1.0 for r in records}, records)
