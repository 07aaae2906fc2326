from __future__ import annotations

import math
from fractions import Fraction
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardcore_lab import polymer as P
from hardcore_lab.errors import SizeGuardError, ValidationError
from hardcore_lab.graph import complete_bipartite, hypercube, popcount, random_regular_bipartite
from oracles import (SetGraph, cluster_sum_by_tuples, powerset, relabel_invariant_ursell,
                     ursell_edges, xi_by_collections)


@st.composite
def abstract_models(draw, max_n=5, max_size=3, max_w=Fraction(1, 4)):
    n = draw(st.integers(1, max_n))
    weights = [Fraction(draw(st.integers(1, 20)), 20) * max_w for _ in range(n)]
    sizes = [draw(st.integers(1, max_size)) for _ in range(n)]
    pairs = [p for p in combinations(range(n), 2) if draw(st.booleans())]
    return P.abstract_model(weights, sizes, pairs)


def incompatible_fn(model):
    return lambda i, j: bool(model.incompat[i] >> j & 1)


# ---- polymers ------------------------------------------------------------------------

def test_enumerate_q2_empty(Q2):
    assert P.enumerate_polymers(Q2, "X") == []


def test_enumerate_q3_singletons_only(Q3):
    polys = P.enumerate_polymers(Q3, "X")
    # every pair of even vertices in Q3 has all four odd vertices as neighbors, so its
    # closure is the whole even side (size 4 > 2^(d-2) = 2)
    assert [p.size for p in polys] == [1, 1, 1, 1]
    sg = SetGraph.of(Q3)
    brute = [A for A in powerset(sg.X) if A and sg.is_two_linked(A) and len(sg.closure(A)) <= 2]
    assert len(brute) == len(polys)
    for a, b in combinations(range(4), 2):
        assert popcount(Q3.closure_mask("X", (1 << a) | (1 << b))) == 4


def test_enumerate_size_cap_zero(Q3):
    assert P.enumerate_polymers(Q3, "X", size_cap=0) == []


@pytest.mark.parametrize("maker", [lambda: hypercube(4), lambda: random_regular_bipartite(6, 3, 1)])
def test_enumerate_matches_bruteforce(maker):
    G = maker()
    sg = SetGraph.of(G)
    cap = G.x_count // 2
    got = {p.mask for p in P.enumerate_polymers(G, "X")}
    want = {sum(1 << v[1] for v in A) for A in powerset(sg.X)
            if A and sg.is_two_linked(A) and len(sg.closure(A)) <= cap}
    assert got == want


def test_weights(Q3):
    single = P.make_polymer(Q3, "X", 1)
    assert P.polymer_weight(single, 1) == Fraction(1, 8)
    lam = Fraction(3, 7)
    assert P.polymer_weight(single, lam) == lam / (1 + lam) ** 3
    pair = P.make_polymer(Q3, "X", 0b11)
    assert (pair.size, pair.nbhd_size) == (2, 4)
    assert P.polymer_weight(pair, 1) == Fraction(1, 16)
    assert math.isclose(P.log_polymer_weight(pair, 1), math.log(1 / 16))


def test_compatibility(Q3, Q4):
    a, b = P.make_polymer(Q3, "X", 0b01), P.make_polymer(Q3, "X", 0b10)
    assert not P.compatible(Q3, a, b)
    assert not P.compatible(Q3, a, a)
    far = [i for i, v in enumerate(Q4.x_ids) if v == 0b1111][0]
    u, v = P.make_polymer(Q4, "X", 1), P.make_polymer(Q4, "X", 1 << far)
    assert P.compatible(Q4, u, v) and P.compatible(Q4, v, u)
    with pytest.raises(ValidationError):
        P.compatible(Q4, u, P.make_polymer(Q4, "Y", 1))


# ---- Xi ------------------------------------------------------------------------------------

def test_xi_examples(Q3):
    assert P.xi_exact(P.abstract_model([], [], [])) == 1
    m = P.defect_model(Q3, "X", 1)
    assert P.xi_exact(m) == Fraction(3, 2)
    w1, w2 = Fraction(1, 3), Fraction(1, 5)
    assert P.xi_exact(P.abstract_model([w1, w2], [1, 1], [])) == 1 + w1 + w2 + w1 * w2


@settings(max_examples=60, deadline=None)
@given(abstract_models(max_n=7))
def test_xi_matches_collections(model):
    assert P.xi_exact(model) == xi_by_collections(model.weights, incompatible_fn(model))
    assert P.xi_exact(model) >= 1


@settings(max_examples=40, deadline=None)
@given(st.lists(st.fractions(min_value=0, max_value=2), min_size=1, max_size=6))
def test_xi_product_when_all_compatible(ws):
    model = P.abstract_model(ws, [1] * len(ws), [])
    want = Fraction(1)
    for w in ws:
        want *= 1 + w
    assert P.xi_exact(model) == want


@pytest.mark.parametrize("maker,side", [(lambda: hypercube(4), "X"), (lambda: hypercube(4), "Y"),
                                        (lambda: random_regular_bipartite(6, 3, 2), "X"),
                                        (lambda: complete_bipartite(4, 4), "Y")])
def test_xi_subset_route_matches_recursion(maker, side):
    G = maker()
    m = P.defect_model(G, side, Fraction(2, 3))
    abstract = P.PolymerModel(m.weights, m.sizes, m.incompat)
    assert P.xi_exact(m) == P.xi_exact(abstract, override=True)


def test_xi_guard():
    model = P.abstract_model([Fraction(1, 100)] * 25, [1] * 25, [])
    with pytest.raises(SizeGuardError):
        P.xi_exact(model)


# ---- Ursell -------------------------------------------------------------------------------

def test_ursell_examples():
    assert P.ursell(1) == 1
    assert P.ursell(2, [(0, 1)]) == Fraction(-1, 2)
    assert P.ursell(3, [(0, 1), (1, 2), (0, 2)]) == Fraction(1, 3)
    assert P.ursell(3, [(0, 1), (1, 2)]) == Fraction(1, 6)
    assert P.ursell(3, [(0, 1)]) == 0


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 6), st.data())
def test_ursell_matches_definition(n, data):
    pairs = list(combinations(range(n), 2))
    edges = data.draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    assert P.ursell(n, edges) == ursell_edges(n, edges) == P.ursell_bruteforce(n, edges)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 5), st.data())
def test_ursell_isomorphism_invariant(n, data):
    pairs = list(combinations(range(n), 2))
    edges = data.draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    assert relabel_invariant_ursell(n, edges) == {P.ursell(n, edges)}


def test_ursell_guard():
    with pytest.raises(SizeGuardError):
        P.ursell(P.URSELL_VERTEX_LIMIT + 1)
    with pytest.raises(ValidationError):
        P.ursell(0)


# ---- clusters ------------------------------------------------------------------------------

def test_l1_q3(Q3):
    m = P.defect_model(Q3, "X", 1)
    L, T = P.clusters_and_sums(m, 4)
    assert L[0] == Fraction(1, 2)
    for k, Lk in enumerate(L, start=1):
        assert Lk == Fraction((-1) ** (k - 1), 2 ** k * k)
    assert T[0] == 0 and T[1] == L[0]


def test_no_polymers_series(Q2):
    m = P.defect_model(Q2, "X", 1)
    L, T = P.clusters_and_sums(m, 5)
    assert all(x == 0 for x in L) and all(x == 0 for x in T)
    assert P.xi_exact(m) == 1


def test_two_incompatible_singletons():
    wu, wv = Fraction(1, 3), Fraction(1, 7)
    model = P.abstract_model([wu, wv], [1, 1], [(0, 1)])
    expect = -(wu ** 2 + wv ** 2) / 2 - wu * wv
    for method in ("tuples", "multiset", "series"):
        assert P.cluster_sums(model, 2, method)[1] == expect


@settings(max_examples=40, deadline=None)
@given(abstract_models(max_n=4, max_size=2))
def test_cluster_routes_agree(model):
    k = 4
    ref = [cluster_sum_by_tuples(model.weights, model.sizes, incompatible_fn(model), j)
           for j in range(1, k + 1)]
    for method in ("tuples", "multiset", "series"):
        assert P.cluster_sums(model, k, method) == ref


def test_cluster_routes_agree_on_graph(Q4):
    m = P.defect_model(Q4, "X", Fraction(1, 2))
    a = P.cluster_sums(m, 4, "series")
    assert P.cluster_sums(m, 4, "multiset") == a
    assert P.cluster_sums(m, 3, "tuples") == a[:3]


def test_iter_clusters_connected():
    model = P.abstract_model([Fraction(1, 5)] * 3, [1, 1, 1], [(0, 1)])
    for cl in P.iter_clusters(model, 3):
        assert P._is_connected(cl.incompat_graph)
        assert cl.size == len(cl.polymers)
        assert 2 not in cl.polymers or set(cl.polymers) == {2}


@settings(max_examples=40, deadline=None)
@given(abstract_models(max_n=6, max_size=2, max_w=Fraction(1, 20)))
def test_truncation_converges(model):
    xi = P.xi_exact(model)
    log_xi = P.frac_log(xi)
    L, T = P.clusters_and_sums(model, 12)
    err = [abs(float(t) - log_xi) for t in T]
    assert err[-1] <= err[1] + 1e-15
    assert err[-1] < 1e-6


# ---- Kotecky-Preiss ----------------------------------------------------------------------------

def test_kp_zero_weights(Q3):
    m = P.defect_model(Q3, "X", 0)
    rep = P.kp_check(m, lambda i: 0.5, lambda i: 0.0)
    assert rep.holds and rep.min_slack == 0.5


def test_kp_self_incompatible_failure():
    m = P.abstract_model([Fraction(5)], [1], [])
    rep = P.kp_check(m, lambda i: 1.0, lambda i: 0.0)
    assert not rep.holds and rep.witnesses == [0]


def test_kp_q3_table(Q3):
    m = P.defect_model(Q3, "X", 1)
    f, g = P.kp_hypercube_functions(m, 3)
    rep = P.kp_check(m, f, g, k_max=4)
    assert len(rep.slacks) == 4
    assert isinstance(rep.holds, bool)


@settings(max_examples=40, deadline=None)
@given(abstract_models(max_n=5, max_size=2, max_w=Fraction(1, 30)), st.floats(0.05, 0.5))
def test_kp_conclusion_consistent(model, a):
    rep = P.kp_check(model, lambda i: a * model.sizes[i], lambda i: 0.0, k_max=5)
    if rep.holds and rep.min_slack > 0:
        assert rep.conclusion_checked and rep.conclusion_holds


def test_kp_rejects_negative():
    m = P.abstract_model([Fraction(1, 2)], [1], [])
    with pytest.raises(ValidationError):
        P.kp_check(m, lambda i: -1.0, lambda i: 0.0)


# ---- tail function -----------------------------------------------------------------------------

def test_gamma_branches():
    assert math.isclose(P.gamma_dk(100, 1, 1), math.log(2) * 97 - 7 * math.log(100))
    assert math.isclose(P.gamma_dk(10, 2, 1), math.log(2))
    assert math.isclose(P.gamma_dk(2, 17, 1), 17 / 2 ** 1.5)
    with pytest.raises(ValidationError):
        P.gamma_dk(0, 1, 1)


def test_tail_examples():
    assert math.isclose(P.tail_bound(3, 1, 1), 3 ** -1.5 * 4 * math.exp(-P.gamma_dk(3, 1, 1)))
    # lambda = 0: gamma is non-positive on the first two branches; value reported as is
    assert P.gamma_dk(30, 1, 0) == -7 * math.log(30)
    assert P.tail_bound(30, 1, 0) >= 30 ** -1.5 * 2 ** 29


def test_gamma_grid_contents():
    ks = P.gamma_grid(10)
    assert ks[0] == 1 and ks[-1] == 10 ** 5 and 10 ** 4 in ks


# ---- moments ------------------------------------------------------------------------------------

def test_moment_log_xi(Q3):
    m = P.defect_model(Q3, "X", 1)
    rep = P.moment_sum(m, ell=0, k_min=1, cutoff=60)
    assert math.isclose(rep["value"], math.log(1.5), abs_tol=1e-15)


def test_moment_no_polymers(Q2):
    assert P.moment_sum(P.defect_model(Q2, "X", 1), ell=1)["value"] == 0


def test_moment_mean_defect(Q3):
    m = P.defect_model(Q3, "X", 1)
    rep = P.moment_sum(m, ell=1, cutoff=60)
    assert math.isclose(rep["value"], float(P.expected_defect_size(m)), rel_tol=1e-12)
    assert P.expected_defect_size(m) == Fraction(1, 3)


def test_expand_report(Q3):
    rep = P.expand(Q3, "Y", 1, 6)
    assert rep["polymer_count"] == 4 and rep["xi_exact"] == 1.5
    assert len(rep["L"]) == 6 and len(rep["T"]) == 7 and len(rep["tails"]) == 6
    assert rep["T_error"][-1] < rep["T_error"][1]


def test_as_activity():
    assert P.as_activity(0.1) == Fraction(1, 10)
    assert P.as_activity("3/2") == Fraction(3, 2)
    with pytest.raises(ValidationError):
        P.as_activity(0)
    with pytest.raises(ValidationError):
        P.as_activity("x")
