from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction

import pytest

from hardcore_lab import fptas as F
from hardcore_lab.errors import ValidationError
from hardcore_lab.graph import (best_expansion_alpha, complete_bipartite, hypercube,
                                random_bipartite_with_degrees, random_regular_bipartite)
from hardcore_lab.hardcore import exact_Z, exact_mu, is_independent, tv_distance
from hardcore_lab.polymer import defect_model, frac_log, xi_exact

K2 = complete_bipartite(1, 1)
K33 = complete_bipartite(3, 3)
K44 = complete_bipartite(4, 4)


# ---- estimate ------------------------------------------------------------------------------

@pytest.mark.xfail(strict=True, reason="two-sided combination gives log 16 against log 15; "
                                       "the error is 0.0645, above 0.01")
def test_k33_accuracy():
    res = F.approx_logZ(K33, 1, 1, 0.01, oracle=True)
    assert res.oracle_logZ == pytest.approx(math.log(15))
    assert res.abs_error <= 0.01


@pytest.mark.xfail(strict=True, reason="achieved error is about 0.35-0.40 on every seed")
@pytest.mark.parametrize("seed", range(3))
def test_random_cubic_accuracy(seed):
    G = random_regular_bipartite(8, 3, seed)
    res = F.approx_logZ(G, best_expansion_alpha(G), Fraction(3, 2), 0.05, oracle=True)
    assert res.abs_error <= 0.05


def test_large_lambda_k44():
    res = F.approx_logZ(K44, 1, 100, 0.01, oracle=True)
    assert res.abs_error <= 0.01
    assert res.logZ_estimate == pytest.approx(math.log(2) + 4 * math.log(101), abs=1e-12)


def test_no_polymers_flag():
    lam = Fraction(1, 2)
    res = F.approx_logZ(K33, 1, lam, 0.01)
    assert "no polymers on either side" in res.flags
    assert res.logZ_estimate == pytest.approx(math.log(2 * 1.5 ** 3), abs=1e-15)
    assert res.budget_met


@pytest.mark.parametrize("G", [K33, hypercube(3), random_regular_bipartite(6, 3, 0),
                               random_regular_bipartite(7, 3, 5)])
def test_swap_symmetry(G):
    alpha = best_expansion_alpha(G)
    a = F.approx_logZ(G, alpha, 1, 0.05)
    b = F.approx_logZ(G.swapped(), alpha, 1, 0.05)
    assert a.logZ_estimate == pytest.approx(b.logZ_estimate, abs=1e-13)
    assert a.per_side["X"].T == pytest.approx(b.per_side["Y"].T, abs=1e-15)


@pytest.mark.parametrize("G", [K33, hypercube(3)])
def test_symmetric_side_weights(G):
    res = F.approx_logZ(G, best_expansion_alpha(G), 1, 0.05)
    assert F.side_weights(G, res) == (0.5, 0.5)


def test_combination_formula(Q3):
    res = F.approx_logZ(Q3, 1, 1, 0.05)
    want = math.log(math.exp(res.per_side["X"].T) * 2 ** 4 + math.exp(res.per_side["Y"].T) * 2 ** 4)
    assert res.logZ_estimate == pytest.approx(want, rel=1e-14)


def test_refusals(Q3):
    with pytest.raises(ValidationError):
        F.approx_logZ(random_bipartite_with_degrees([3] * 6 + [4] * 3, [3] * 10, 0), 1, 1, 0.1)
    with pytest.raises(ValidationError):
        F.approx_logZ(Q3, 3, 1, 0.1)
    with pytest.raises(ValidationError):
        F.approx_logZ(Q3, 1, 1, 0)
    with pytest.raises(ValidationError):
        F.approx_logZ(Q3, None, 1, 0.1)
    with pytest.raises(ValidationError):
        F.approx_logZ(hypercube(5), Fraction(1, 10), 1, 0.1)
    assert F.approx_logZ(hypercube(5), Fraction(1, 10), 1, 0.1, attested=True).k_truncation >= 1


def test_last_shell_monotone_q3(Q3):
    rep = F.epsilon_budget_report(Q3, 1, 8)
    shells = [r["last_shell_X"] for r in rep["rows"]]
    assert all(b <= a for a, b in zip(shells, shells[1:]))


# ---- budget report -------------------------------------------------------------------------

def test_budget_report_small_lambda():
    rep = F.epsilon_budget_report(K33, Fraction(1, 100), 2)
    assert rep["rows"][1]["last_shell_X"] <= 1e-6 and rep["rows"][1]["last_shell_Y"] <= 1e-6
    assert rep["no_polymers"]


def test_budget_report_plateau(Q3):
    lam = 1
    rep = F.epsilon_budget_report(Q3, lam, 12)
    lx = frac_log(xi_exact(defect_model(Q3, "X", lam)))
    ly = frac_log(xi_exact(defect_model(Q3, "Y", lam)))
    gap = abs(F.combine(Q3, Fraction(lam), lx, ly) - frac_log(exact_Z(Q3, lam)))
    assert rep["rows"][-1]["abs_error"] == pytest.approx(gap, abs=1e-4)
    assert abs(rep["rows"][-1]["abs_error"] - rep["rows"][-2]["abs_error"]) < 1e-4


# ---- sampling --------------------------------------------------------------------------------

def test_approx_sample_valid_and_deterministic(Q3):
    a = F.approx_sample(Q3, 1, 1, 0.05, seed=3, n=2000)
    assert a == F.approx_sample(Q3, 1, 1, 0.05, seed=3, n=2000)
    adj = Q3.global_adjacency
    assert all(is_independent(adj, m) for m in a)


def test_approx_sample_law_total(Q3):
    law = F.approx_sample_law(Q3, 1, 1, 0.05)
    assert law.total() == pytest.approx(1, abs=1e-12)


@pytest.mark.xfail(strict=True, reason="on K2 the law is (1/2, 1/4, 1/4) against (1/3, 1/3, 1/3); "
                                       "TV is 1/6")
def test_k2_sampler_tv():
    draws = 100_000
    rep = F.sample_tv_to_mu(K2, 1, 1, 0.05, draws, seed=0)
    assert rep["law_tv"] == pytest.approx(1 / 6, abs=1e-12)
    assert rep["empirical_tv"] <= 0.05 + 3 * rep["noise_sigma"]


def test_k2_sampler_law_value():
    # the measured quantity itself, recorded as a regression value
    law = F.approx_sample_law(K2, 1, 1, 0.05)
    assert tv_distance(law, exact_mu(K2, 1)) == pytest.approx(1 / 6, abs=1e-12)
    emp = Counter(F.approx_sample(K2, 1, 1, 0.05, seed=0, n=20_000))
    assert emp[0] / 20_000 == pytest.approx(0.5, abs=0.02)
