import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from batchq.model import (
    ModelParams,
    QueueState,
    ValidationError,
    make_params,
    poisson_pmf,
    sample_poisson,
)


def exact_pmf(rate, k):
    return math.exp(-rate + k * math.log(rate) - math.lgamma(k + 1))


class TestMakeParams:
    def test_figure_parameters(self):
        p = make_params(1, 9, 0.8)
        assert p.r == 9
        assert p.lambda_bar == 5
        assert not p.swapped

    def test_reversed_rates_are_swapped(self):
        p = make_params(9, 1, 0.8)
        assert (p.lambda1, p.lambda2, p.swapped) == (1, 9, True)

    def test_equal_rates(self):
        p = make_params(1, 1, 0.6)
        assert p.r == 1 and p.lambda_bar == 1

    @pytest.mark.parametrize("args,field", [
        ((0, 1, 0.5), "lambda1"),
        ((1, -2, 0.5), "lambda2"),
        ((1, 2, 0.0), "gamma"),
        ((1, 2, 1.0), "gamma"),
        ((1, float("nan"), 0.5), "lambda2"),
    ])
    def test_rejects_bad_fields(self, args, field):
        with pytest.raises(ValidationError) as err:
            make_params(*args)
        assert err.value.field == field

    def test_direct_construction_requires_order(self):
        with pytest.raises(ValidationError):
            ModelParams(3, 1, 0.5)

    @given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.01, 0.99))
    def test_normalization_idempotent(self, a, b, g):
        p = make_params(a, b, g)
        q = make_params(p.lambda1, p.lambda2, p.gamma)
        assert (q.lambda1, q.lambda2, q.gamma) == (p.lambda1, p.lambda2, p.gamma)
        assert p.lambda1 <= p.lambda2
        assert p.r >= 1
        assert p.lambda_bar == pytest.approx((a + b) / 2)


def test_queue_state_validation():
    assert QueueState(3, 0).x == 3
    with pytest.raises(ValidationError):
        QueueState(-1, 0)
    with pytest.raises(ValidationError):
        QueueState(1.5, 0)


class TestPoissonPmf:
    def test_degenerate(self):
        pmf = poisson_pmf(0)
        assert list(pmf.probs) == [1.0]
        assert pmf.tail_mass == 0

    def test_rate_one_at_zero(self):
        assert poisson_pmf(1.0, 1e-12).probs[0] == pytest.approx(0.367879441171, abs=1e-12)

    def test_rate_nine_normalized(self):
        pmf = poisson_pmf(9.0, 1e-12)
        assert pmf.probs.sum() >= 1 - 1e-12

    @pytest.mark.parametrize("rate", [0.5, 1.0, 3.0, 5.0, 9.0, 25.0])
    @pytest.mark.parametrize("cutoff", [1e-12, 1e-6, 1e-3])
    def test_invariants(self, rate, cutoff):
        pmf = poisson_pmf(rate, cutoff)
        assert np.all(pmf.probs >= 0)
        assert pmf.probs.sum() + pmf.tail_mass == pytest.approx(1.0, abs=1e-12)
        assert pmf.tail_mass <= cutoff
        # zmax is the smallest support that meets the cutoff
        assert 1 - pmf.probs[:-1].sum() > cutoff
        for k, p in enumerate(pmf.probs):
            assert p == pytest.approx(exact_pmf(rate, k), abs=1e-12)

    def test_rejects_bad_input(self):
        with pytest.raises(ValidationError):
            poisson_pmf(-1.0)
        with pytest.raises(ValidationError):
            poisson_pmf(1.0, 0.0)


class TestSamplePoisson:
    def test_zero_rate(self):
        rng = np.random.default_rng(3)
        assert all(sample_poisson(0.0, rng) == 0 for _ in range(100))

    def test_rate_nine_mean(self):
        draws = sample_poisson(9.0, np.random.default_rng(11), size=10**6)
        assert abs(draws.mean() - 9) <= 0.03

    def test_same_seed_same_sequence(self):
        a = [sample_poisson(9.0, np.random.default_rng(5)) for _ in range(1)]
        r1, r2 = np.random.default_rng(42), np.random.default_rng(42)
        assert [sample_poisson(9.0, r1) for _ in range(50)] == [sample_poisson(9.0, r2) for _ in range(50)]
        assert isinstance(a[0], int)

    @pytest.mark.parametrize("rate", [0.5, 1, 5, 9])
    def test_moments(self, rate):
        n = 10**5
        draws = sample_poisson(rate, np.random.default_rng(int(rate * 100)), size=n)
        # 4 sigma bands: var of mean = rate/n; var of sample variance ~ (rate + 2 rate^2)/n
        assert abs(draws.mean() - rate) <= 4 * math.sqrt(rate / n)
        assert abs(draws.var(ddof=1) - rate) <= 4 * math.sqrt((rate + 2 * rate**2) / n)
