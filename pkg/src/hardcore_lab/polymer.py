"""Polymer models for hard-core defects and their cluster expansion.

A polymer is a 2-linked set A on the defect side with small closure, weighted
w(A) = lambda^|A| / (1 + lambda)^|N(A)|; two polymers are compatible when
their union is not 2-linked.

Three routes to the cluster sums L_k are provided and cross-checked in tests:

``tuples``
    the literal definition, ordered tuples of polymers with connected
    incompatibility graph, weighted by the Ursell function;
``multiset``
    the same sum collapsed over orderings (symmetry factor n!/prod m_i!);
``series``
    L_k = [z^k] log Xi(z), where Xi(z) grades each collection by its total
    size.  This is exact (rational) and is what the rest of the package uses.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Callable, Sequence

from .errors import SizeGuardError, ValidationError
from .graph import BipartiteGraph, VertexSet, bits, components, popcount, two_linked_subsets

SIDE_LIMIT = 20
XI_POLYMER_LIMIT = 24
URSELL_VERTEX_LIMIT = 12
TUPLE_LIMIT = 2_000_000


def as_activity(lam, allow_zero: bool = False) -> Fraction:
    """Activity as an exact rational (floats go through their shortest repr)."""
    if isinstance(lam, Fraction):
        val = lam
    elif isinstance(lam, int):
        val = Fraction(lam)
    elif isinstance(lam, (float, str)):
        try:
            val = Fraction(str(lam)) if isinstance(lam, float) else Fraction(lam)
        except (ValueError, ZeroDivisionError):
            raise ValidationError(f"cannot read activity {lam!r}") from None
    else:
        try:
            val = Fraction(str(float(lam)))
        except (TypeError, ValueError):
            raise ValidationError(f"cannot read activity {lam!r}") from None
    if val < 0 or (val == 0 and not allow_zero):
        raise ValidationError(f"activity must be {'>= 0' if allow_zero else '> 0'}, got {lam!r}")
    return val


def frac_log(x: Fraction) -> float:
    """Natural log of a positive rational without overflowing floats."""
    if x <= 0:
        raise ValueError("log of a non-positive number")
    return math.log(x.numerator) - math.log(x.denominator)


# ---- polymers --------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class Polymer:
    side: str
    mask: int
    size: int = field(compare=False)
    closure_size: int = field(compare=False)
    nbhd_size: int = field(compare=False)

    def support(self, G: BipartiteGraph) -> VertexSet:
        return G.vset(self.side, self.mask)


def default_closure_cap(G: BipartiteGraph, side: str) -> int:
    """|side|/2, which is 2^(d-2) on the hypercube."""
    return G.count(side) // 2


def make_polymer(G: BipartiteGraph, side: str, mask: int) -> Polymer:
    return Polymer(side, mask, popcount(mask), popcount(G.closure_mask(side, mask)),
                   popcount(G.N(side, mask)))


def enumerate_polymers(G: BipartiteGraph, side: str = "X", size_cap: int | None = None,
                       closure_cap: int | None = None, override: bool = False) -> list[Polymer]:
    """All 2-linked A on ``side`` with |A| <= size_cap and |[A]| <= closure_cap, canonically sorted."""
    if size_cap is not None and size_cap <= 0:
        return []
    if G.count(side) > 16 and size_cap is None and not override:
        raise SizeGuardError("polymer enumeration needs |side| <= 16 or a size cap")
    cap = default_closure_cap(G, side) if closure_cap is None else closure_cap
    if cap <= 0:
        return []
    out = [make_polymer(G, side, m)
           for m in two_linked_subsets(G, side, max_size=size_cap, closure_cap=cap)]
    out.sort(key=lambda p: (p.size, p.mask))
    return out


def polymer_weight(p: Polymer, lam) -> Fraction:
    lam = as_activity(lam, allow_zero=True)
    return lam ** p.size / (1 + lam) ** p.nbhd_size


def log_polymer_weight(p: Polymer, lam) -> float:
    lam = as_activity(lam)
    return p.size * frac_log(lam) - p.nbhd_size * math.log1p(float(lam))


def _reach(G: BipartiteGraph, side: str, mask: int) -> int:
    sq = G.square(side)
    out = mask
    for i in bits(mask):
        out |= sq[i]
    return out


def compatible(G: BipartiteGraph, p1: Polymer, p2: Polymer) -> bool:
    """True iff the union is not 2-linked (so a polymer is never compatible with itself)."""
    if p1.side != p2.side:
        raise ValidationError("polymers live on different sides")
    return not (_reach(G, p1.side, p1.mask) & p2.mask)


@dataclass
class PolymerModel:
    """A finite polymer model: weights, sizes and incompatibility masks.

    ``incompat[i]`` has bit j set when polymers i and j are incompatible; the
    diagonal is always set.  ``graph``/``side``/``closure_cap``/``size_cap``
    are present for defect models built from a graph, which unlocks the
    subset-based exact routes.
    """

    weights: list
    sizes: list
    incompat: list
    polymers: list | None = None
    graph: BipartiteGraph | None = None
    side: str | None = None
    lam: Fraction | None = None
    closure_cap: int | None = None
    size_cap: int | None = None

    def __post_init__(self):
        n = len(self.weights)
        if len(self.sizes) != n or len(self.incompat) != n:
            raise ValidationError("weights, sizes and incompat must have equal length")
        for i in range(n):
            if not self.incompat[i] >> i & 1:
                raise ValidationError(f"polymer {i} must be incompatible with itself")
            for j in bits(self.incompat[i]):
                if not self.incompat[j] >> i & 1:
                    raise ValidationError("incompatibility must be symmetric")
            if self.sizes[i] < 1:
                raise ValidationError("polymer sizes must be positive")

    def __len__(self):
        return len(self.weights)

    @property
    def is_defect_model(self) -> bool:
        return self.graph is not None


def abstract_model(weights: Sequence, sizes: Sequence[int], incompatible_pairs) -> PolymerModel:
    n = len(weights)
    inc = [1 << i for i in range(n)]
    for i, j in incompatible_pairs:
        inc[i] |= 1 << j
        inc[j] |= 1 << i
    return PolymerModel([Fraction(w) if not isinstance(w, float) else w for w in weights],
                        list(sizes), inc)


def defect_model(G: BipartiteGraph, side: str, lam, size_cap: int | None = None,
                 closure_cap: int | None = None, enumerate_all: bool = True) -> PolymerModel:
    """Hard-core defect polymers on one side of G."""
    lam = as_activity(lam, allow_zero=True)
    cap = default_closure_cap(G, side) if closure_cap is None else closure_cap
    polys = enumerate_polymers(G, side, size_cap, cap, override=True) if enumerate_all else []
    inc = []
    for p in polys:
        r = _reach(G, side, p.mask)
        inc.append(sum(1 << j for j, q in enumerate(polys) if r & q.mask))
    return PolymerModel([polymer_weight(p, lam) for p in polys], [p.size for p in polys], inc,
                        polys, G, side, lam, cap, size_cap)


# ---- exact partition function -----------------------------------------------------

def _valid_defect_set(model: PolymerModel, U: int) -> bool:
    G, side = model.graph, model.side
    for comp in components(G.square(side), U):
        if popcount(G.closure_mask(side, comp)) > model.closure_cap:
            return False
        if model.size_cap is not None and popcount(comp) > model.size_cap:
            return False
    return True


def defect_configurations(model: PolymerModel, max_size: int | None = None):
    """Yield (U, weight) for every subset U of the defect side whose 2-linked components are polymers.

    These are exactly the unions of compatible polymer collections; the
    weight of U is lambda^|U| / (1 + lambda)^|N(U)|.
    """
    G, side, lam = model.graph, model.side, model.lam
    n = G.count(side)
    if n > SIDE_LIMIT and max_size is None:
        raise SizeGuardError(f"defect-side enumeration needs |side| <= {SIDE_LIMIT}")
    top = n if max_size is None else min(max_size, n)
    if model.closure_cap is not None and model.closure_cap <= 0:
        top = 0
    yield 0, Fraction(1)
    for k in range(1, top + 1):
        for combo in combinations(range(n), k):
            U = sum(1 << i for i in combo)
            if _valid_defect_set(model, U):
                yield U, lam ** k / (1 + lam) ** popcount(G.N(side, U))


def _xi_by_recursion(model: PolymerModel, truncate: int | None = None):
    """Polynomial coefficients of Xi(z) over compatible collections (deletion recursion)."""
    n = len(model)
    K = truncate

    @lru_cache(maxsize=None)
    def rec(mask: int):
        if not mask:
            return (Fraction(1),)
        i = (mask & -mask).bit_length() - 1
        a = rec(mask & ~(1 << i))
        b = rec(mask & ~model.incompat[i])
        s = model.sizes[i]
        w = model.weights[i]
        length = max(len(a), len(b) + s)
        if K is not None:
            length = min(length, K + 1)
        out = [Fraction(0)] * length
        for k, c in enumerate(a[:length]):
            out[k] += c
        for k, c in enumerate(b):
            if k + s < length:
                out[k + s] += w * c
        return tuple(out)

    return list(rec((1 << n) - 1))


def xi_exact(model: PolymerModel, override: bool = False) -> Fraction:
    """Xi = sum over pairwise compatible collections of prod w(A)."""
    if model.is_defect_model and model.graph.count(model.side) <= SIDE_LIMIT:
        return sum((w for _, w in defect_configurations(model)), Fraction(0))
    if len(model) > XI_POLYMER_LIMIT and not override:
        raise SizeGuardError(f"exact Xi needs at most {XI_POLYMER_LIMIT} polymers")
    return sum(_xi_by_recursion(model), Fraction(0))


def nu_distribution(model: PolymerModel) -> list[tuple[int, Fraction]]:
    """Law of the union of a nu-random compatible collection: (U, probability)."""
    configs = list(defect_configurations(model))
    xi = sum((w for _, w in configs), Fraction(0))
    return [(U, w / xi) for U, w in configs]


# ---- Ursell function --------------------------------------------------------------

def _edges_to_adj(n: int, edges) -> list[int]:
    adj = [0] * n
    for u, v in edges:
        if u == v:
            continue
        adj[u] |= 1 << v
        adj[v] |= 1 << u
    return adj


def ursell_bruteforce(n: int, edges) -> Fraction:
    """(1/n!) * sum over edge subsets spanning a connected graph of (-1)^|A|."""
    edges = sorted({(min(u, v), max(u, v)) for u, v in edges if u != v})
    if n == 0:
        raise ValidationError("Ursell function needs at least one vertex")
    if len(edges) > 24:
        raise SizeGuardError("brute-force Ursell needs at most 24 edges")
    total = 0
    full = (1 << n) - 1
    for sub in range(1 << len(edges)):
        chosen = [edges[i] for i in range(len(edges)) if sub >> i & 1]
        adj = _edges_to_adj(n, chosen)
        if components(adj, full) == [full]:
            total += -1 if len(chosen) % 2 else 1
    return Fraction(total, math.factorial(n))


def connected_signed_count(adj: Sequence[int], n: int) -> int:
    """sum over connected spanning edge subsets of (-1)^|A|, by subset recursion.

    With Z(U) = [U spans no edge] and the root r = min(U),
    Z(U) = sum_{r in T subset U} C(T) Z(U minus T), which is solved for C(U).
    """
    C: dict[int, int] = {}

    def Z(U: int) -> int:
        for i in bits(U):
            if adj[i] & U:
                return 0
        return 1

    full = (1 << n) - 1
    for U in sorted(range(1, full + 1), key=popcount):
        r = U & -U
        rest = U ^ r
        acc = Z(U)
        sub = rest
        while True:
            T = sub | r
            if T != U:
                acc -= C[T] * Z(U ^ T)
            if sub == 0:
                break
            sub = (sub - 1) & rest
        C[U] = acc
    return C[full]


def ursell(n: int, edges=(), limit: int = URSELL_VERTEX_LIMIT) -> Fraction:
    """Ursell function of the graph on vertices 0..n-1 with the given edges."""
    if n < 1:
        raise ValidationError("Ursell function needs at least one vertex")
    if n > limit:
        raise SizeGuardError(f"Ursell function limited to {limit} vertices")
    adj = _edges_to_adj(n, edges)
    return Fraction(connected_signed_count(adj, n), math.factorial(n))


def _ursell_from_adj(adj: tuple[int, ...]) -> Fraction:
    return Fraction(_signed_count_cached(adj), math.factorial(len(adj)))


@lru_cache(maxsize=1 << 16)
def _signed_count_cached(adj: tuple[int, ...]) -> int:
    return connected_signed_count(adj, len(adj))


def incompatibility_graph(model: PolymerModel, tup: Sequence[int]) -> tuple[int, ...]:
    """H(Gamma) on tuple positions; repeated polymers are adjacent."""
    n = len(tup)
    adj = [0] * n
    for a in range(n):
        for b in range(a + 1, n):
            if model.incompat[tup[a]] >> tup[b] & 1:
                adj[a] |= 1 << b
                adj[b] |= 1 << a
    return tuple(adj)


def _is_connected(adj: tuple[int, ...]) -> bool:
    full = (1 << len(adj)) - 1
    return components(adj, full) == [full]


# ---- cluster sums -----------------------------------------------------------------

@dataclass
class Cluster:
    polymers: tuple
    incompat_graph: tuple
    size: int
    ursell: Fraction
    weight: Fraction


def iter_clusters(model: PolymerModel, k_max: int):
    """Every ordered tuple with total size <= k_max and connected H(Gamma)."""
    n = len(model)
    count = [0]

    def rec(prefix, size):
        if prefix:
            H = incompatibility_graph(model, prefix)
            if _is_connected(H):
                phi = _ursell_from_adj(H)
                w = phi
                for i in prefix:
                    w *= model.weights[i]
                yield Cluster(tuple(prefix), H, size, phi, w)
        for i in range(n):
            s = model.sizes[i]
            if size + s <= k_max:
                count[0] += 1
                if count[0] > TUPLE_LIMIT:
                    raise SizeGuardError("ordered-tuple enumeration exceeded its budget")
                prefix.append(i)
                yield from rec(prefix, size + s)
                prefix.pop()

    yield from rec([], 0)


def _iter_multisets(model: PolymerModel, k_max: int):
    """(index tuple nondecreasing, size) for every multiset with total size <= k_max."""
    n = len(model)

    def rec(prefix, start, size):
        if prefix:
            yield tuple(prefix), size
        for i in range(start, n):
            s = model.sizes[i]
            if size + s <= k_max:
                prefix.append(i)
                yield from rec(prefix, i, size + s)
                prefix.pop()

    yield from rec([], 0, 0)


def _multiset_clusters(model: PolymerModel, k_max: int):
    """(multiset, size, summed weight over its orderings, |summed weight|)."""
    for tup, size in _iter_multisets(model, k_max):
        H = incompatibility_graph(model, tup)
        if not _is_connected(H):
            continue
        signed = _signed_count_cached(H)
        sym = 1
        for m in Counter(tup).values():
            sym *= math.factorial(m)
        w = Fraction(signed, sym)
        for i in tup:
            w *= model.weights[i]
        yield tup, size, w


def series_coefficients(model: PolymerModel, k_max: int) -> list[Fraction]:
    """[z^0..z^k_max] of Xi(z), where z marks total polymer size."""
    if model.is_defect_model:
        c = [Fraction(0)] * (k_max + 1)
        for U, w in defect_configurations(model, max_size=k_max):
            c[popcount(U)] += w
        return c
    coeffs = _xi_by_recursion(model, truncate=k_max)
    return coeffs + [Fraction(0)] * (k_max + 1 - len(coeffs))


def log_series(c: Sequence[Fraction], k_max: int) -> list[Fraction]:
    """Coefficients l_1..l_k_max of log(c(z)) for c_0 = 1."""
    if c[0] != 1:
        raise ValidationError("series must start with 1")
    ell = [Fraction(0)] * (k_max + 1)
    for k in range(1, k_max + 1):
        acc = k * c[k]
        for j in range(1, k):
            acc -= j * ell[j] * c[k - j]
        ell[k] = acc / k
    return ell[1:]


def cluster_sums(model: PolymerModel, k_max: int, method: str = "series") -> list[Fraction]:
    """L_1..L_k_max, exact."""
    if k_max < 1:
        return []
    if method == "series":
        return log_series(series_coefficients(model, k_max), k_max)
    L = [Fraction(0)] * k_max
    if method == "tuples":
        for cl in iter_clusters(model, k_max):
            L[cl.size - 1] += cl.weight
    elif method == "multiset":
        for _, size, w in _multiset_clusters(model, k_max):
            L[size - 1] += w
    else:
        raise ValidationError(f"unknown cluster method {method!r}")
    return L


def truncated_T(L: Sequence) -> list:
    """T_1..T_{len(L)+1} with T_k = L_1 + ... + L_{k-1}."""
    T = [Fraction(0) if not L or isinstance(L[0], Fraction) else 0.0]
    for x in L:
        T.append(T[-1] + x)
    return T


def clusters_and_sums(model: PolymerModel, k_max: int, method: str = "series"):
    L = cluster_sums(model, k_max, method)
    return L, truncated_T(L)


# ---- Kotecky-Preiss ----------------------------------------------------------------

@dataclass
class KPReport:
    holds: bool
    min_slack: float
    slacks: list
    witnesses: list  # polymer indices where the hypothesis fails
    conclusion_checked: bool = False
    conclusion_holds: bool | None = None
    conclusion_k: int | None = None
    conclusion_rows: list = field(default_factory=list)

    def as_dict(self, f_spec: str = "", g_spec: str = "") -> dict:
        return {"f_spec": f_spec, "g_spec": g_spec, "holds": self.holds,
                "min_slack": self.min_slack, "witnesses": self.witnesses,
                "conclusion_checked": self.conclusion_checked,
                "conclusion_holds": self.conclusion_holds, "conclusion_k": self.conclusion_k}


def kp_check(model: PolymerModel, f: Callable[[int], float], g: Callable[[int], float],
             k_max: int | None = None) -> KPReport:
    """Kotecky-Preiss hypothesis per polymer, plus a truncated check of the conclusion.

    ``f`` and ``g`` take a polymer index.  Slack for A is
    f(A) - sum_{A' incompatible with A} w(A') exp(f(A') + g(A')).
    """
    n = len(model)
    fv = [float(f(i)) for i in range(n)]
    gv = [float(g(i)) for i in range(n)]
    if any(x < 0 for x in fv + gv):
        raise ValidationError("f and g must be non-negative")
    wv = [float(w) for w in model.weights]
    terms = [wv[j] * math.exp(fv[j] + gv[j]) for j in range(n)]
    slacks = []
    for i in range(n):
        s = math.fsum(terms[j] for j in bits(model.incompat[i]))
        slacks.append(fv[i] - s)
    witnesses = [i for i, s in enumerate(slacks) if s < 0]
    rep = KPReport(not witnesses, min(slacks) if slacks else math.inf, slacks, witnesses)
    if rep.holds and k_max and n:
        rep.conclusion_checked = True
        rep.conclusion_k = k_max
        sums = [0.0] * n
        for tup, _size, w in _multiset_clusters(model, k_max):
            # sum over orderings of |w(Gamma)| equals |summed weight| (one sign per multiset)
            val = abs(float(w)) * math.exp(sum(gv[i] for i in tup))
            touched = 0
            for i in tup:
                touched |= model.incompat[i]
            for a in bits(touched):
                sums[a] += val
        rep.conclusion_rows = [(i, sums[i], fv[i]) for i in range(n)]
        rep.conclusion_holds = all(sums[i] <= fv[i] * (1 + 1e-12) for i in range(n))
    return rep


# ---- the hypercube tail function ----------------------------------------------------

def gamma_dk(d: int, k: int, lam) -> float:
    """Piecewise exponent used for the hypercube cluster tail."""
    if d < 1 or k < 1:
        raise ValidationError("d and k must be positive")
    lam = as_activity(lam, allow_zero=True)
    ll = math.log1p(float(lam))
    if k <= d / 10:
        return ll * (d * k - 3 * k * k) - 7 * k * math.log(d)
    if k <= d ** 4:
        return d * ll * k / 20
    return k / d ** 1.5


def log_tail_bound(d: int, k: int, lam) -> float:
    return -1.5 * math.log(d) + (d - 1) * math.log(2) - gamma_dk(d, k, lam)


def tail_bound(d: int, k: int, lam) -> float:
    """d^(-3/2) 2^(d-1) exp(-gamma(d, k)), computed in log domain (inf on overflow)."""
    lt = log_tail_bound(d, k, lam)
    return math.exp(lt) if lt < 709 else math.inf


def gamma_grid(d: int) -> list[int]:
    """Sampled k in 1..d^5: every k up to 4d, branch boundaries, and a geometric ladder."""
    top = d ** 5
    ks = set(range(1, min(4 * d, top) + 1))
    for b in (d // 10, d // 10 + 1, d ** 4, d ** 4 + 1, top):
        if 1 <= b <= top:
            ks.add(b)
    x = 1.0
    while x < top:
        ks.add(int(x))
        x *= 1.3
    return sorted(ks)


def gamma_grid_check(ds=range(3, 51), lams=(Fraction(1, 10), Fraction(1))) -> dict:
    """Count where gamma(d,k)/k increases in k, and where the tail bound increases in k."""
    ratio_viol, tail_viol = [], []
    checked = 0
    for lam in lams:
        for d in ds:
            ks = gamma_grid(d)
            prev = None
            for k in ks:
                gk = gamma_dk(d, k, lam)
                lt = log_tail_bound(d, k, lam)
                checked += 1
                if prev is not None:
                    pk, pg, plt = prev
                    if gk / k > pg / pk + 1e-12 * max(1.0, abs(pg / pk)):
                        ratio_viol.append((float(lam), d, pk, k, pg / pk, gk / k))
                    if lt > plt + 1e-12 * max(1.0, abs(plt)):
                        tail_viol.append((float(lam), d, pk, k, plt, lt))
                prev = (k, gk, lt)
    return {"checked": checked, "ratio_violations": ratio_viol, "tail_violations": tail_viol}


# ---- moments and reports ------------------------------------------------------------

def moment_sum(model: PolymerModel, lam=None, ell: int = 0, k_min: int = 1,
               cutoff: int = 12) -> dict:
    """sum over clusters with k_min <= ||Gamma|| <= cutoff of w(Gamma) ||Gamma||^ell."""
    if cutoff < 1:
        raise ValidationError("cutoff must be at least 1")
    L = cluster_sums(model, cutoff)
    total = sum((Lk * k ** ell for k, Lk in enumerate(L, start=1) if k >= k_min), Fraction(0))
    return {"value": float(total), "exact": total, "cutoff": cutoff,
            "last_shell": abs(float(L[-1])) * cutoff ** ell}


def expected_defect_size(model: PolymerModel) -> Fraction:
    """E|Lambda-bar| under nu, computed directly from the configuration law."""
    return sum((p * popcount(U) for U, p in nu_distribution(model)), Fraction(0))


def kp_hypercube_functions(model: PolymerModel, d: int):
    """f(A) = |A|/d^(3/2) and g(A) = gamma(d, |A|), clipped at 0 for g."""
    lam = model.lam
    f = lambda i: model.sizes[i] / d ** 1.5  # noqa: E731
    g = lambda i: max(0.0, gamma_dk(d, model.sizes[i], lam))  # noqa: E731
    return f, g


def expand(G: BipartiteGraph, side: str, lam, k_max: int, d: int | None = None) -> dict:
    """Report for one defect side: Xi, L_k, T_k, the KP table and tail bounds."""
    lam = as_activity(lam)
    model = defect_model(G, side, lam)
    L, T = clusters_and_sums(model, k_max)
    xi = xi_exact(model)
    log_xi = frac_log(xi)
    d = d if d is not None else G.d_X
    f, g = kp_hypercube_functions(model, d)
    kp = kp_check(model, f, g, k_max=min(k_max, 6))
    return {
        "lambda": float(lam), "side": side, "polymer_count": len(model),
        "xi_exact": float(xi), "log_xi": log_xi,
        "L": [float(x) for x in L], "T": [float(x) for x in T],
        "T_error": [abs(float(x) - log_xi) for x in T],
        "kp": kp.as_dict("|A|/d^1.5", "gamma(d,|A|) clipped at 0"),
        "tails": [tail_bound(d, k, lam) for k in range(1, k_max + 1)],
    }
