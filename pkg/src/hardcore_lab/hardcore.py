"""Exact hard-core oracles, the defect-side sampler, and Glauber dynamics.

Independent sets are global bitmasks: X-vertex i is bit i and Y-vertex j is
bit x_count + j.  Exact quantities are Fractions.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .containers import make_rng
from .errors import InvariantViolation, SizeGuardError, ValidationError
from .graph import BipartiteGraph, VertexSet, bits, components, hypercube, popcount
from .polymer import as_activity, defect_model, frac_log, nu_distribution

Z_VERTEX_LIMIT = 36
MU_VERTEX_LIMIT = 20
MEMO_LIMIT = 1 << 24

STREAM_SIDE = 1
STREAM_GLAUBER = 2


def _adjacency(G) -> tuple[int, ...]:
    if isinstance(G, BipartiteGraph):
        return G.global_adjacency
    return tuple(int(m) for m in G)


def is_independent(adj: Sequence[int], mask: int) -> bool:
    return all(not (adj[i] & mask) for i in bits(mask))


def independent_sets(G) -> list[int]:
    """Every independent set as a global mask, in increasing order of (size, mask)."""
    adj = _adjacency(G)
    n = len(adj)
    out = []

    def rec(i, cur, blocked):
        if i == n:
            out.append(cur)
            return
        rec(i + 1, cur, blocked)
        if not blocked >> i & 1:
            rec(i + 1, cur | 1 << i, blocked | adj[i])

    rec(0, 0, 0)
    out.sort(key=lambda m: (popcount(m), m))
    return out


# ---- partition function ----------------------------------------------------------

def independence_polynomial(G) -> list[int]:
    """Coefficients i_k (number of independent sets of size k).

    Deletion recursion Z(H) = Z(H - v) + z Z(H - N[v]) on induced subgraphs,
    split into connected components; residual graphs are keyed by their
    vertex mask (canonical for a fixed host graph) in an LRU memo.
    """
    adj = _adjacency(G)
    n = len(adj)
    if n > Z_VERTEX_LIMIT:
        raise SizeGuardError(f"exact Z needs |V| <= {Z_VERTEX_LIMIT}")

    def mul(a, b):
        out = [0] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    out[i + j] += x * y
        return out

    @lru_cache(maxsize=MEMO_LIMIT)
    def poly(mask: int) -> tuple[int, ...]:
        if not mask:
            return (1,)
        comps = components(adj, mask)
        if len(comps) > 1:
            out = [1]
            for c in comps:
                out = mul(out, poly(c))
            return tuple(out)
        # branch on a maximum-degree vertex of the component
        v = max(bits(mask), key=lambda i: (popcount(adj[i] & mask), -i))
        a = poly(mask & ~(1 << v))
        b = poly(mask & ~(adj[v] | 1 << v))
        out = list(a) + [0] * max(0, len(b) + 1 - len(a))
        for k, c in enumerate(b):
            out[k + 1] += c
        return tuple(out)

    return list(poly((1 << n) - 1))


def exact_Z(G, lam) -> Fraction:
    lam = as_activity(lam, allow_zero=True)
    total = Fraction(0)
    for c in reversed(independence_polynomial(G)):
        total = total * lam + c
    return total


def exact_logZ(G, lam) -> float:
    return frac_log(exact_Z(G, lam))


def brute_force_Z(G, lam) -> Fraction:
    """Sum of lambda^|I| over all vertex subsets that are independent (2^n scan)."""
    lam = as_activity(lam, allow_zero=True)
    adj = _adjacency(G)
    n = len(adj)
    if n > 22:
        raise SizeGuardError("brute-force Z needs |V| <= 22")
    counts = [0] * (n + 1)
    for m in range(1 << n):
        if is_independent(adj, m):
            counts[popcount(m)] += 1
    return sum((c * lam ** k for k, c in enumerate(counts)), Fraction(0))


# ---- distributions ---------------------------------------------------------------

@dataclass
class Distribution:
    """Probability law on independent sets (global masks)."""

    probs: dict
    graph: BipartiteGraph | None = None

    def __post_init__(self):
        if any(p < 0 for p in self.probs.values()):
            raise InvariantViolation("negative probability")
        if abs(float(self.total()) - 1.0) > 1e-12:
            raise InvariantViolation(f"distribution sums to {float(self.total())}")
        if self.graph is not None:
            adj = self.graph.global_adjacency
            for m in self.probs:
                if not is_independent(adj, m):
                    raise InvariantViolation("support contains a non-independent set")

    def total(self):
        return sum(self.probs.values(), Fraction(0) if self._exact() else 0.0)

    def _exact(self) -> bool:
        return all(isinstance(p, (Fraction, int)) for p in self.probs.values())

    def __getitem__(self, mask: int):
        return self.probs.get(mask, 0)

    def support(self) -> list[int]:
        return sorted(self.probs, key=lambda m: (popcount(m), m))

    def items(self):
        return [(m, self.probs[m]) for m in self.support()]

    def marginal(self, fn) -> dict:
        out: dict = {}
        for m, p in self.probs.items():
            k = fn(m)
            out[k] = out.get(k, 0) + p
        return out

    @classmethod
    def empirical(cls, counts: Counter, graph: BipartiteGraph | None = None) -> "Distribution":
        n = sum(counts.values())
        return cls({m: Fraction(c, n) for m, c in counts.items()}, graph)


def exact_mu(G: BipartiteGraph, lam) -> Distribution:
    lam = as_activity(lam)
    if G.n > MU_VERTEX_LIMIT:
        raise SizeGuardError(f"explicit mu needs |V| <= {MU_VERTEX_LIMIT}")
    sets = independent_sets(G)
    Z = sum((lam ** popcount(m) for m in sets), Fraction(0))
    return Distribution({m: lam ** popcount(m) / Z for m in sets}, G)


def tv_distance(p, q) -> float:
    """(1/2) sum |p - q| over the union of supports; accepts Distributions or dicts."""
    pp = p.probs if isinstance(p, Distribution) else p
    qq = q.probs if isinstance(q, Distribution) else q
    keys = set(pp) | set(qq)
    if all(isinstance(v, Fraction) for v in list(pp.values()) + list(qq.values())):
        return float(sum((abs(pp.get(k, 0) - qq.get(k, 0)) for k in keys), Fraction(0)) / 2)
    return 0.5 * math.fsum(abs(float(pp.get(k, 0)) - float(qq.get(k, 0))) for k in keys)


# ---- defect-side sampler -----------------------------------------------------------

def side_offset(G: BipartiteGraph, side: str) -> int:
    return 0 if side == "X" else G.x_count


def defect_label(G: BipartiteGraph, side: str) -> str:
    """'E'/'O' on hypercubes (even/odd), otherwise the side name."""
    if G.labels is not None:
        return "E" if side == "X" else "O"
    return side


def free_vertices(G: BipartiteGraph, side: str, U: int) -> int:
    """Vertices of the other side with no neighbor in U (local mask)."""
    other = "Y" if side == "X" else "X"
    return ((1 << G.count(other)) - 1) & ~G.N(side, U)


def _place(G: BipartiteGraph, side: str, local: int) -> int:
    return local << side_offset(G, side)


class NuSampler:
    """Exact sampler for the defect configuration law nu on one side (cached inverse CDF)."""

    def __init__(self, G: BipartiteGraph, side: str, lam, size_cap=None, closure_cap=None):
        lam = as_activity(lam, allow_zero=True)
        model = defect_model(G, side, lam, size_cap=size_cap, closure_cap=closure_cap,
                             enumerate_all=False)
        self.law = nu_distribution(model)
        self.configs = [U for U, _ in self.law]
        self.cdf = np.cumsum([float(p) for _, p in self.law])
        self.cdf[-1] = 1.0

    def draw(self, u: float) -> int:
        return self.configs[int(np.searchsorted(self.cdf, u, side="right"))]


_NU_CACHE: dict = {}


def nu_sampler(G: BipartiteGraph, side: str, lam, size_cap=None, closure_cap=None) -> NuSampler:
    key = (G, side, as_activity(lam, allow_zero=True), size_cap, closure_cap)
    if key not in _NU_CACHE:
        if len(_NU_CACHE) > 64:
            _NU_CACHE.clear()
        _NU_CACHE[key] = NuSampler(G, side, lam, size_cap, closure_cap)
    return _NU_CACHE[key]


def _fill_other_side(G, side, U, lam_f, rng) -> int:
    other = "Y" if side == "X" else "X"
    free = free_vertices(G, side, U)
    p = lam_f / (1 + lam_f)
    idx = list(bits(free))
    draws = rng.random(len(idx))
    W = 0
    for i, r in zip(idx, draws):
        if r < p:
            W |= 1 << i
    return _place(G, side, U) | _place(G, other, W)


@dataclass
class MuHatSample:
    members: int  # global mask
    defect: str  # "X" or "Y"
    defect_set: int  # local mask of Lambda-bar on the defect side


def sample_mu_hat_batch(G: BipartiteGraph, lam, n: int, seed: int = 0,
                        side_weights: tuple | None = None,
                        size_cap=None, closure_cap=None) -> list[MuHatSample]:
    """n draws of the three-step process: choose D, draw Lambda ~ nu_D, fill the other side.

    ``side_weights`` replaces the fair choice of D (used by the approximate
    sampler); it is a pair of probabilities for (X, Y).
    """
    lam = as_activity(lam, allow_zero=True)
    lam_f = float(lam)
    rng = make_rng(seed, STREAM_SIDE)
    samplers = {s: nu_sampler(G, s, lam, size_cap, closure_cap) for s in ("X", "Y")}
    pX = 0.5 if side_weights is None else float(side_weights[0])
    adj = G.global_adjacency
    out = []
    for _ in range(n):
        side = "X" if rng.random() < pX else "Y"
        U = samplers[side].draw(rng.random())
        I = _fill_other_side(G, side, U, lam_f, rng)
        if not is_independent(adj, I):
            raise InvariantViolation("sampler produced a non-independent set")
        out.append(MuHatSample(I, side, U))
    return out


def sample_mu_hat(G: BipartiteGraph, lam, seed: int = 0) -> tuple[VertexSet, str]:
    s = sample_mu_hat_batch(G, lam, 1, seed)[0]
    return G.global_vset(s.members), defect_label(G, s.defect)


def mu_hat_law(G: BipartiteGraph, lam, side_weights: tuple | None = None,
               size_cap=None, closure_cap=None) -> dict:
    """Exact law of the three-step process as {global mask: Fraction}."""
    lam = as_activity(lam, allow_zero=True)
    if G.n > MU_VERTEX_LIMIT:
        raise SizeGuardError(f"explicit law needs |V| <= {MU_VERTEX_LIMIT}")
    weights = (Fraction(1, 2), Fraction(1, 2)) if side_weights is None else side_weights
    q = lam / (1 + lam)
    out: dict[int, Fraction] = {}
    for side, ws in zip(("X", "Y"), weights):
        other = "Y" if side == "X" else "X"
        model = defect_model(G, side, lam, size_cap=size_cap, closure_cap=closure_cap,
                             enumerate_all=False)
        for U, pU in nu_distribution(model):
            free = free_vertices(G, side, U)
            k = popcount(free)
            base = _place(G, side, U)
            sub = free
            while True:
                j = popcount(sub)
                p = ws * pU * q ** j * (1 - q) ** (k - j)
                if p:
                    m = base | _place(G, other, sub)
                    out[m] = out.get(m, Fraction(0)) + p
                if sub == 0:
                    break
                sub = (sub - 1) & free
    return out


def mu_hat_exact(G: BipartiteGraph, lam) -> Distribution:
    return Distribution(mu_hat_law(G, lam), G)


# ---- Glauber dynamics -------------------------------------------------------------

@dataclass
class GlauberResult:
    final: int
    series: list  # (step, size, x_count, y_count)
    visits: Counter = field(default_factory=Counter)
    steps: int = 0

    def empirical(self, G: BipartiteGraph | None = None) -> Distribution:
        return Distribution.empirical(self.visits, G)


def _counts(G: BipartiteGraph, I: int) -> tuple[int, int, int]:
    xm = I & ((1 << G.x_count) - 1)
    return popcount(I), popcount(xm), popcount(I >> G.x_count)


def glauber_run(G: BipartiteGraph, lam, steps: int, seed: int = 0, start: int | VertexSet = 0,
                stride: int = 1, record_visits: bool = True, chunk: int = 1 << 16) -> GlauberResult:
    """Single-site heat-bath chain: pick v uniformly, draw Bernoulli(lambda/(1+lambda)),
    add v if the coin is 1 and v has no occupied neighbor, remove v if the coin is 0.

    ``visits`` counts the state after each step.
    """
    lam = as_activity(lam, allow_zero=True)
    if steps < 0 or stride < 1:
        raise ValidationError("steps must be >= 0 and stride >= 1")
    adj = G.global_adjacency
    I = G.global_mask(start) if isinstance(start, VertexSet) else int(start)
    if not is_independent(adj, I):
        raise ValidationError("start is not an independent set")
    n = G.n
    p = float(lam / (1 + lam))
    rng = make_rng(seed, STREAM_GLAUBER)
    series = [(0, *_counts(G, I))]
    visits: Counter = Counter()
    t = 0
    while t < steps:
        m = min(chunk, steps - t)
        vs = rng.integers(0, n, size=m).tolist()
        coins = (rng.random(m) < p).tolist()
        for v, c in zip(vs, coins):
            bit = 1 << v
            if c:
                if not adj[v] & I:
                    I |= bit
            else:
                I &= ~bit
            t += 1
            if record_visits:
                visits[I] += 1
            if t % stride == 0:
                series.append((t, *_counts(G, I)))
    return GlauberResult(I, series, visits, steps)


def transition_matrix(G: BipartiteGraph, lam):
    """Exact Glauber kernel on all independent sets: (states, {(i, j): Fraction})."""
    lam = as_activity(lam, allow_zero=True)
    if G.n > MU_VERTEX_LIMIT:
        raise SizeGuardError(f"transition matrix needs |V| <= {MU_VERTEX_LIMIT}")
    adj = G.global_adjacency
    states = independent_sets(G)
    index = {m: i for i, m in enumerate(states)}
    n = G.n
    p_add = lam / (1 + lam)
    P: dict[tuple[int, int], Fraction] = {}
    for i, I in enumerate(states):
        for v in range(n):
            bit = 1 << v
            add = I | bit if not adj[v] & I else I
            rem = I & ~bit
            for J, pr in ((add, p_add), (rem, 1 - p_add)):
                if pr:
                    key = (i, index[J])
                    P[key] = P.get(key, Fraction(0)) + pr / n
    return states, P


def detailed_balance_gap(G: BipartiteGraph, lam) -> Fraction:
    """max |mu(I)P(I,J) - mu(J)P(J,I)| over all state pairs (exact)."""
    states, P = transition_matrix(G, lam)
    mu = exact_mu(G, lam)
    worst = Fraction(0)
    for (i, j), pij in P.items():
        pji = P.get((j, i), Fraction(0))
        worst = max(worst, abs(mu[states[i]] * pij - mu[states[j]] * pji))
    return worst


def stationary_vector(G: BipartiteGraph, lam) -> dict:
    """Stationary law of the transition matrix, solved numerically."""
    states, P = transition_matrix(G, lam)
    m = len(states)
    M = np.zeros((m, m))
    for (i, j), p in P.items():
        M[i, j] = float(p)
    A = M.T - np.eye(m)
    A[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    return {states[i]: float(pi[i]) for i in range(m)}


# ---- occupancy observables ----------------------------------------------------------

def occupancy_observables(d: int, lam, n_samples: int, seed: int = 0) -> dict:
    """Occupancy statistics of the defect-side sampler on Q_d."""
    lam = as_activity(lam, allow_zero=True)
    G = hypercube(d)
    draws = sample_mu_hat_batch(G, lam, n_samples, seed)
    lam_f = float(lam)
    sizes = np.array([popcount(s.members) for s in draws], dtype=float)
    xs = np.array([popcount(s.members & ((1 << G.x_count) - 1)) for s in draws], dtype=float)
    ys = sizes - xs
    minority = np.minimum(xs, ys)
    defect_sizes = np.array([popcount(s.defect_set) for s in draws], dtype=float)
    defect_is_minority = [
        (s.defect == "X" and x <= y) or (s.defect == "Y" and y <= x)
        for s, x, y in zip(draws, xs, ys)
    ]
    half = 2 ** (d - 1)
    target_size = lam_f / (1 + lam_f) * half
    target_min = lam_f / 2 * (2 / (1 + lam_f)) ** d
    sem = lambda a: float(a.std(ddof=1) / math.sqrt(len(a))) if len(a) > 1 else 0.0  # noqa: E731
    return {
        "d": d, "lambda": lam_f, "n_samples": n_samples, "seed": seed,
        "mean_size": float(sizes.mean()), "target_size": target_size,
        "size_deviation": float(sizes.mean()) - target_size,
        "mean_minority": float(minority.mean()), "target_minority": target_min,
        "minority_deviation": float(minority.mean()) - target_min,
        "minority_is_defect_fraction": float(np.mean(defect_is_minority)),
        "mean_defect_size": float(defect_sizes.mean()), "defect_size_sem": sem(defect_sizes),
    }
