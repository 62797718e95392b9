import math

import pytest
from hypothesis import given, strategies as st

from batchq.cyclic import (
    CyclicPolicy,
    Limit,
    asymptotic_k,
    cost_curve,
    cycle_cost,
    optimal_k,
    optimal_k_for,
    threshold_g,
    total_cost,
)
from batchq.model import DomainError, make_params

GAMMAS = (0.1, 0.3, 0.5, 0.7, 0.9, 0.99)
RATIOS = tuple(range(1, 51))


def cycle_cost_closed_form(p, k):
    """Geometric-series closed forms; independent of the summation loop."""
    g = p.gamma
    s0 = (1 - g ** (k + 1)) / (1 - g)
    s1 = g * (1 - (k + 1) * g**k + k * g ** (k + 1)) / (1 - g) ** 2
    return p.lambda_bar * s0 + p.lambda2 + p.lambda1 * s1


def brute_force_k(gamma, r, k_max):
    p = make_params(1, r, gamma)
    costs = [total_cost(p, k) for k in range(1, k_max + 1)]
    return 1 + costs.index(min(costs))


class TestCycleCost:
    def test_equal_rates(self):
        assert cycle_cost(make_params(1, 1, 0.6), 1) == pytest.approx(3.2, abs=1e-12)

    def test_figure_parameters(self):
        assert cycle_cost(make_params(1, 9, 0.8), 4) == pytest.approx(31.0624, abs=1e-12)

    def test_small_gamma_limit(self):
        p = make_params(2, 7, 1e-9)
        assert cycle_cost(p, 1) == pytest.approx(p.lambda_bar + p.lambda2, abs=1e-7)

    @pytest.mark.parametrize("gamma", [0.2, 0.6, 0.9])
    @pytest.mark.parametrize("k", [1, 2, 5, 17])
    def test_matches_closed_form(self, gamma, k):
        p = make_params(1.5, 4.0, gamma)
        assert cycle_cost(p, k) == pytest.approx(cycle_cost_closed_form(p, k), rel=1e-12)

    @pytest.mark.parametrize("k", [0, -1, 1.5])
    def test_rejects_bad_k(self, k):
        with pytest.raises(DomainError):
            cycle_cost(make_params(1, 2, 0.5), k)
        with pytest.raises(DomainError):
            total_cost(make_params(1, 2, 0.5), k)


class TestTotalCost:
    @pytest.mark.parametrize("l2,gamma,k,expected", [
        (1, 0.6, 1, 5.00),
        (9, 0.8, 4, 46.20),
        (1, 0.99, 1, 200.00),
    ])
    def test_table_entries(self, l2, gamma, k, expected):
        assert round(total_cost(make_params(1, l2, gamma), k), 2) == expected


class TestThreshold:
    def test_k_zero(self):
        for g in GAMMAS:
            assert threshold_g(g, 0) == 1

    def test_direct_sums(self):
        assert threshold_g(0.8, 4) == pytest.approx(11.5536, abs=1e-12)
        assert threshold_g(0.99, 2) == pytest.approx(5.9601, abs=1e-12)

    @pytest.mark.parametrize("gamma", GAMMAS)
    def test_strictly_increasing(self, gamma):
        vals = [threshold_g(gamma, k) for k in range(60)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_expanded_form(self):
        # (k+1) sum gamma^i - sum i gamma^i
        for g in GAMMAS:
            for k in range(12):
                alt = (k + 1) * sum(g**i for i in range(k + 1)) - sum(i * g**i for i in range(k + 1))
                assert threshold_g(g, k) == pytest.approx(alt, rel=1e-12)


class TestOptimalK:
    @pytest.mark.parametrize("gamma,r,k", [(0.8, 9, 4), (0.99, 9, 3), (0.6, 1, 1), (0.8, 5, 2), (0.6, 5, 3)])
    def test_table_values(self, gamma, r, k):
        assert optimal_k(make_params(1, r, gamma)).k_star == k

    def test_thresholds_bracket_r(self):
        res = optimal_k_for(0.8, 9)
        assert res.threshold_low < 9 <= res.threshold_high
        assert res.threshold_high == pytest.approx(threshold_g(0.8, 4))
        assert not res.tie

    def test_tie_picks_smaller_k(self):
        r = threshold_g(0.5, 3)  # 4 + 1.5 + 0.5 + 0.125
        res = optimal_k_for(0.5, r)
        assert res.k_star == 3 and res.tie
        p = make_params(1, r, 0.5)
        assert total_cost(p, 3) == pytest.approx(total_cost(p, 4), rel=1e-12)

    @pytest.mark.parametrize("gamma", GAMMAS)
    @pytest.mark.parametrize("r", [1, 2, 3, 5, 8, 13, 21, 34, 50])
    def test_matches_brute_force(self, gamma, r):
        k_star = optimal_k_for(gamma, r).k_star
        brute = brute_force_k(gamma, r, 4 * (k_star + 2))
        p = make_params(1, r, gamma)
        # at small gamma C(k) is flat to machine precision for large k, so
        # compare costs rather than argmin indices
        assert total_cost(p, k_star) == pytest.approx(total_cost(p, brute), rel=1e-12)

    def test_rejects_bad_ratio(self):
        with pytest.raises(DomainError):
            optimal_k_for(0.5, 0.5)
        with pytest.raises(DomainError):
            optimal_k_for(1.0, 2)


class TestProperties:
    @pytest.mark.parametrize("gamma", GAMMAS)
    def test_unimodal_and_condition_equivalence(self, gamma):
        for r in RATIOS:
            p = make_params(1, r, gamma)
            k_star = optimal_k(p).k_star
            costs = [total_cost(p, k) for k in range(1, 4 * (k_star + 2) + 1)]
            for k in range(1, len(costs)):
                c0, c1 = costs[k - 1], costs[k]
                slack = 1e-12 * c0
                if k < k_star:
                    assert c1 <= c0 + slack
                else:
                    assert c1 >= c0 - slack
                g = threshold_g(gamma, k)
                if r < g * (1 - 1e-12):
                    assert c1 > c0 - slack
                elif r > g * (1 + 1e-12):
                    assert c1 < c0 + slack

    @pytest.mark.parametrize("r", RATIOS)
    def test_k_star_nonincreasing_in_gamma(self, r):
        ks = [optimal_k_for(g, r).k_star for g in (0.01, *GAMMAS, 0.999)]
        assert all(b <= a for a, b in zip(ks, ks[1:]))

    @given(
        st.floats(0.05, 20), st.floats(1, 30), st.floats(0.05, 0.98),
        st.floats(0.1, 10), st.integers(1, 25),
    )
    def test_scale_equivariance(self, l1, ratio, gamma, c, k):
        p = make_params(l1, l1 * ratio, gamma)
        q = p.scaled(c)
        assert total_cost(q, k) == pytest.approx(c * total_cost(p, k), rel=1e-10)
        assert optimal_k(q).k_star == optimal_k(p).k_star

    @pytest.mark.parametrize("r", range(2, 51))
    def test_limits(self, r):
        assert abs(optimal_k_for(0.999, r).k_star - round(math.sqrt(2 * r) - 1)) <= 1
        assert optimal_k_for(0.001, r).k_star in (math.ceil(r) - 1, math.ceil(r))


class TestAsymptotics:
    def test_gamma_to_one(self):
        assert asymptotic_k(make_params(1, 9, 0.5), Limit.GAMMA_TO_ONE) == pytest.approx(math.sqrt(18) - 1)
        assert asymptotic_k(make_params(1, 2, 0.5), "gamma_to_one") == pytest.approx(1.0)

    def test_gamma_to_zero(self):
        assert asymptotic_k(make_params(1, 5, 0.5), Limit.GAMMA_TO_ZERO) == 5


class TestCostCurve:
    def test_last_point(self):
        k, c = cost_curve(make_params(1, 9, 0.8), 4)[-1]
        assert k == 4 and round(c, 2) == 46.20

    def test_single_point(self):
        curve = cost_curve(make_params(1, 1, 0.6), 1)
        assert [(k, round(c, 2)) for k, c in curve] == [(1, 5.00)]

    def test_minimum(self):
        curve = cost_curve(make_params(1, 9, 0.8), 10)
        assert min(curve, key=lambda kc: kc[1])[0] == 4


def test_cyclic_policy():
    pol = CyclicPolicy(3)
    assert [pol.serves_q1(t) for t in range(8)] == [True, False, False, False, True, False, False, False]
    with pytest.raises(DomainError):
        CyclicPolicy(0)
