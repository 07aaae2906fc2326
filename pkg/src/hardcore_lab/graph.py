"""Immutable bipartite graphs and the set operations used throughout.

Vertices live on two sides X and Y.  Internally each side is indexed densely
(0..n-1) and vertex sets are Python ints used as bitmasks over those local
indices; the public functions speak in terms of external vertex ids wrapped in
:class:`VertexSet`.  For hypercubes the external id of a vertex is its bitmask
in {0,1}^d, so ``xs(0b011)`` reads naturally in tests.

Mixed-side sets (independent sets, ``nabla`` arguments) use a *global* mask:
X-vertex ``i`` is bit ``i`` and Y-vertex ``j`` is bit ``x_count + j``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Iterator

import numpy as np

from .errors import SizeGuardError, ValidationError

SIDES = ("X", "Y")
EXHAUSTIVE_EXPANSION_LIMIT = 24


def popcount(mask: int) -> int:
    return mask.bit_count()


def bits(mask: int) -> Iterator[int]:
    """Indices of set bits, ascending."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def other_side(side: str) -> str:
    if side not in SIDES:
        raise ValidationError(f"side must be 'X' or 'Y', got {side!r}")
    return "Y" if side == "X" else "X"


@dataclass(frozen=True)
class VertexSet:
    """A set of vertices, possibly touching both sides."""

    x: frozenset = field(default_factory=frozenset)
    y: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "x", frozenset(self.x))
        object.__setattr__(self, "y", frozenset(self.y))

    @property
    def side(self) -> str:
        if self.x and self.y:
            return "mixed"
        if self.y:
            return "Y"
        return "X"

    def on(self, side: str) -> frozenset:
        return self.x if side == "X" else self.y

    def __len__(self):
        return len(self.x) + len(self.y)

    def __bool__(self):
        return bool(self.x or self.y)

    def __or__(self, other: "VertexSet") -> "VertexSet":
        return VertexSet(self.x | other.x, self.y | other.y)

    def __le__(self, other: "VertexSet") -> bool:
        return self.x <= other.x and self.y <= other.y

    def sorted_members(self) -> tuple[list, list]:
        return sorted(self.x), sorted(self.y)


def xs(*ids) -> VertexSet:
    return VertexSet(x=frozenset(ids))


def ys(*ids) -> VertexSet:
    return VertexSet(y=frozenset(ids))


def side_set(side: str, ids: Iterable) -> VertexSet:
    return VertexSet(x=frozenset(ids)) if side == "X" else VertexSet(y=frozenset(ids))


class BipartiteGraph:
    """Simple bipartite graph with parts X and Y.

    ``d_X`` is the minimum X-degree and ``d_Y`` the maximum Y-degree; ``delta``
    is the smallest slack for which the graph is delta-approximately
    (d_X, d_Y)-biregular.  Instances are never mutated after construction.
    """

    def __init__(self, x_count: int, y_count: int, edges: Iterable[tuple[int, int]],
                 x_ids: Iterable | None = None, y_ids: Iterable | None = None,
                 labels: dict[int, str] | None = None):
        if x_count < 0 or y_count < 0:
            raise ValidationError("vertex counts must be non-negative")
        edge_list = []
        seen = set()
        for e in edges:
            try:
                u, v = e
            except (TypeError, ValueError):
                raise ValidationError(f"malformed edge {e!r}") from None
            if not (isinstance(u, (int, np.integer)) and isinstance(v, (int, np.integer))):
                raise ValidationError(f"malformed edge {e!r}")
            u, v = int(u), int(v)
            if not (0 <= u < x_count and 0 <= v < y_count):
                raise ValidationError(f"edge {e!r} out of range")
            if (u, v) in seen:
                raise ValidationError(f"duplicate edge {(u, v)!r}")
            seen.add((u, v))
            edge_list.append((u, v))
        self.x_count = x_count
        self.y_count = y_count
        self.edges = tuple(edge_list)
        self.x_ids = tuple(range(x_count)) if x_ids is None else tuple(x_ids)
        self.y_ids = tuple(range(y_count)) if y_ids is None else tuple(y_ids)
        if len(self.x_ids) != x_count or len(self.y_ids) != y_count:
            raise ValidationError("id lists do not match vertex counts")
        self._x_index = {v: i for i, v in enumerate(self.x_ids)}
        self._y_index = {v: i for i, v in enumerate(self.y_ids)}
        self.labels = dict(labels) if labels else None

        nbr_x = [0] * x_count
        nbr_y = [0] * y_count
        for u, v in self.edges:
            nbr_x[u] |= 1 << v
            nbr_y[v] |= 1 << u
        self.nbr_x = tuple(nbr_x)
        self.nbr_y = tuple(nbr_y)
        self.deg_x = tuple(popcount(m) for m in nbr_x)
        self.deg_y = tuple(popcount(m) for m in nbr_y)
        self._sq = {}

        self.d_X = min(self.deg_x, default=0)
        self.d_Y = max(self.deg_y, default=0)
        slack = [Fraction(1)]
        if self.d_X > 0:
            slack.append(Fraction(max(self.deg_x), self.d_X))
        if self.deg_y and min(self.deg_y) > 0:
            slack.append(Fraction(self.d_Y, min(self.deg_y)))
        self.delta = max(slack)

    # ---- basic views -------------------------------------------------

    @property
    def n(self) -> int:
        return self.x_count + self.y_count

    @property
    def x_vertices(self) -> tuple:
        return self.x_ids

    @property
    def y_vertices(self) -> tuple:
        return self.y_ids

    def count(self, side: str) -> int:
        return self.x_count if side == "X" else self.y_count

    def nbr(self, side: str) -> tuple[int, ...]:
        """Neighbor masks of the vertices on ``side`` (masks over the other side)."""
        return self.nbr_x if side == "X" else self.nbr_y

    def deg(self, side: str) -> tuple[int, ...]:
        return self.deg_x if side == "X" else self.deg_y

    def ids(self, side: str) -> tuple:
        return self.x_ids if side == "X" else self.y_ids

    @property
    def adjacency(self) -> dict:
        """Sorted neighbor lists keyed by ``(side, id)``."""
        adj = {}
        for side in SIDES:
            other = self.ids(other_side(side))
            for i, m in enumerate(self.nbr(side)):
                adj[(side, self.ids(side)[i])] = sorted(other[j] for j in bits(m))
        return adj

    def is_biregular(self, d_X: int | None = None, d_Y: int | None = None,
                     delta: Fraction | None = None) -> bool:
        """delta-approximate (d_X, d_Y)-biregularity with d_Y <= d_X."""
        d_X = self.d_X if d_X is None else d_X
        d_Y = self.d_Y if d_Y is None else d_Y
        delta = self.delta if delta is None else Fraction(delta)
        if d_Y > d_X or delta < 1:
            return False
        return (all(d_X <= d <= delta * d_X for d in self.deg_x)
                and all(Fraction(d_Y) / delta <= d <= d_Y for d in self.deg_y))

    def is_regular(self) -> bool:
        degs = set(self.deg_x) | set(self.deg_y)
        return len(degs) == 1

    # ---- id <-> mask ---------------------------------------------------

    def mask(self, side: str, ids: Iterable) -> int:
        index = self._x_index if side == "X" else self._y_index
        m = 0
        for v in ids:
            try:
                m |= 1 << index[v]
            except KeyError:
                raise ValidationError(f"vertex {v!r} is not on side {side}") from None
        return m

    def members(self, side: str, mask: int) -> frozenset:
        ids = self.ids(side)
        return frozenset(ids[i] for i in bits(mask))

    def vset(self, side: str, mask: int) -> VertexSet:
        return side_set(side, self.members(side, mask))

    def global_mask(self, s: VertexSet) -> int:
        return self.mask("X", s.x) | (self.mask("Y", s.y) << self.x_count)

    def split_global(self, gmask: int) -> tuple[int, int]:
        return gmask & ((1 << self.x_count) - 1), gmask >> self.x_count

    def global_vset(self, gmask: int) -> VertexSet:
        xm, ym = self.split_global(gmask)
        return VertexSet(self.members("X", xm), self.members("Y", ym))

    def global_ids(self, gmask: int) -> list[int]:
        """Global integer ids for serialization (X first, then Y offset by x_count)."""
        return list(bits(gmask))

    @property
    def global_adjacency(self) -> tuple[int, ...]:
        if "global" not in self._sq:
            nx = self.x_count
            adj = [m << nx for m in self.nbr_x] + list(self.nbr_y)
            self._sq["global"] = tuple(adj)
        return self._sq["global"]

    # ---- neighborhoods ------------------------------------------------

    def N(self, side: str, mask: int) -> int:
        """Neighborhood of a one-sided mask, as a mask on the other side."""
        nbr = self.nbr(side)
        out = 0
        for i in bits(mask):
            out |= nbr[i]
        return out

    def closure_mask(self, side: str, mask: int) -> int:
        """[A] = vertices of ``side`` whose whole neighborhood lies in N(A)."""
        na = self.N(side, mask)
        out = 0
        for i, m in enumerate(self.nbr(side)):
            if m & ~na == 0:
                out |= 1 << i
        return out

    def degree_into(self, side: str, i: int, target: int) -> int:
        """d_T(v) for vertex ``i`` of ``side`` and a mask ``target`` on the other side."""
        return popcount(self.nbr(side)[i] & target)

    def square(self, side: str) -> tuple[int, ...]:
        """Adjacency of Sigma^2 restricted to one side (shared neighbor), no loops."""
        key = ("sq", side)
        if key not in self._sq:
            nbr, back = self.nbr(side), self.nbr(other_side(side))
            rows = []
            for i, m in enumerate(nbr):
                r = 0
                for j in bits(m):
                    r |= back[j]
                rows.append(r & ~(1 << i))
            self._sq[key] = tuple(rows)
        return self._sq[key]

    def is_two_linked(self, side: str, mask: int) -> bool:
        return mask != 0 and _component_of(self.square(side), mask & -mask, mask) == mask

    def __repr__(self):
        return (f"BipartiteGraph(|X|={self.x_count}, |Y|={self.y_count}, "
                f"|E|={len(self.edges)}, d_X={self.d_X}, d_Y={self.d_Y}, delta={self.delta})")

    def __eq__(self, other):
        if not isinstance(other, BipartiteGraph):
            return NotImplemented
        return (self.x_count, self.y_count, self.x_ids, self.y_ids) == \
            (other.x_count, other.y_count, other.x_ids, other.y_ids) and \
            set(self.edges) == set(other.edges)

    def __hash__(self):
        return hash((self.x_count, self.y_count, frozenset(self.edges)))

    def swapped(self) -> "BipartiteGraph":
        """Same graph with the roles of X and Y exchanged."""
        return BipartiteGraph(self.y_count, self.x_count, [(v, u) for u, v in self.edges],
                              x_ids=self.y_ids, y_ids=self.x_ids)


def _component_of(adj, seed: int, within: int) -> int:
    """Connected component (as mask) of ``seed`` inside ``within``."""
    comp = seed
    frontier = seed
    while frontier:
        nxt = 0
        for i in bits(frontier):
            nxt |= adj[i]
        nxt &= within & ~comp
        comp |= nxt
        frontier = nxt
    return comp


def components(adj, within: int) -> list[int]:
    out = []
    rest = within
    while rest:
        c = _component_of(adj, rest & -rest, within)
        out.append(c)
        rest &= ~c
    return out


# ---- constructors -------------------------------------------------------

def build_bipartite(x_count: int, y_count: int, edges) -> BipartiteGraph:
    return BipartiteGraph(x_count, y_count, edges)


def hypercube(d: int) -> BipartiteGraph:
    """Q_d with X the even-weight and Y the odd-weight vertices."""
    if not isinstance(d, int) or not 1 <= d <= 20:
        raise ValidationError(f"hypercube dimension must be in 1..20, got {d!r}")
    even = [v for v in range(1 << d) if popcount(v) % 2 == 0]
    odd = [v for v in range(1 << d) if popcount(v) % 2 == 1]
    odd_index = {v: j for j, v in enumerate(odd)}
    edges = [(i, odd_index[v ^ (1 << b)]) for i, v in enumerate(even) for b in range(d)]
    labels = {}
    for i, v in enumerate(even):
        labels[i] = format(v, f"0{d}b")
    for j, v in enumerate(odd):
        labels[len(even) + j] = format(v, f"0{d}b")
    return BipartiteGraph(len(even), len(odd), edges, x_ids=even, y_ids=odd, labels=labels)


def complete_bipartite(m: int, n: int) -> BipartiteGraph:
    return BipartiteGraph(m, n, [(i, j) for i in range(m) for j in range(n)])


def random_bipartite_with_degrees(x_degrees, y_degrees, seed: int,
                                  max_attempts: int = 10_000) -> BipartiteGraph:
    """Configuration model with rejection of multi-edges."""
    x_degrees, y_degrees = list(x_degrees), list(y_degrees)
    if sum(x_degrees) != sum(y_degrees):
        raise ValidationError("degree sequences have different sums")
    if any(d > len(y_degrees) for d in x_degrees) or any(d > len(x_degrees) for d in y_degrees):
        raise ValidationError("a degree exceeds the size of the opposite side")
    rng = np.random.default_rng(seed)
    x_stubs = np.repeat(np.arange(len(x_degrees)), x_degrees)
    y_stubs = np.repeat(np.arange(len(y_degrees)), y_degrees)
    for _ in range(max_attempts):
        perm = rng.permutation(y_stubs)
        pairs = list(zip(x_stubs.tolist(), perm.tolist()))
        if len(set(pairs)) == len(pairs):
            return BipartiteGraph(len(x_degrees), len(y_degrees), pairs)
    raise ValidationError(f"no simple graph found after {max_attempts} attempts")


def random_regular_bipartite(n_per_side: int, d: int, seed: int,
                             max_attempts: int = 10_000) -> BipartiteGraph:
    if not (1 <= d <= n_per_side):
        raise ValidationError(f"need 1 <= d <= n_per_side, got d={d}, n={n_per_side}")
    return random_bipartite_with_degrees([d] * n_per_side, [d] * n_per_side, seed, max_attempts)


# ---- set operations -----------------------------------------------------

def neighborhood(G: BipartiteGraph, S: VertexSet) -> VertexSet:
    if S.side == "mixed":
        raise ValidationError("neighborhood expects a one-sided set")
    side = S.side
    return G.vset(other_side(side), G.N(side, G.mask(side, S.on(side))))


def closure(G: BipartiteGraph, A: VertexSet) -> VertexSet:
    if A.y:
        raise ValidationError("closure is defined for subsets of X")
    return G.vset("X", G.closure_mask("X", G.mask("X", A.x)))


def distance_ball(G: BipartiteGraph, gmask: int, s: int) -> int:
    """All vertices within graph distance s of the global mask."""
    adj = G.global_adjacency
    ball = frontier = gmask
    for _ in range(s):
        nxt = 0
        for i in bits(frontier):
            nxt |= adj[i]
        nxt &= ~ball
        if not nxt:
            break
        ball |= nxt
        frontier = nxt
    return ball


def power_adjacency(G: BipartiteGraph, s: int) -> tuple[int, ...]:
    """Adjacency masks of Sigma^s on global indices (no loops)."""
    key = ("pow", s)
    if key not in G._sq:
        G._sq[key] = tuple(distance_ball(G, 1 << v, s) & ~(1 << v) for v in range(G.n))
    return G._sq[key]


def linked_components(G: BipartiteGraph, S: VertexSet, s: int) -> list[VertexSet]:
    """Maximal s-linked pieces of S (components of Sigma^s restricted to S)."""
    if s < 1:
        raise ValidationError("s must be >= 1")
    gm = G.global_mask(S)
    comps = components(power_adjacency(G, s), gm)
    comps.sort(key=lambda c: (c & -c).bit_length())
    return [G.global_vset(c) for c in comps]


def is_s_linked(G: BipartiteGraph, S: VertexSet, s: int) -> bool:
    return len(S) > 0 and len(linked_components(G, S, s)) == 1


def nabla(G: BipartiteGraph, A: VertexSet, B: VertexSet | None = None) -> int:
    """|grad(A, B)|: edges with one end in A and the other in B (B defaults to V minus A)."""
    ax, ay = G.mask("X", A.x), G.mask("Y", A.y)
    if B is None:
        bx = ((1 << G.x_count) - 1) & ~ax
        by = ((1 << G.y_count) - 1) & ~ay
    else:
        bx, by = G.mask("X", B.x), G.mask("Y", B.y)
    total = 0
    for i in bits(ax):
        total += popcount(G.nbr_x[i] & by)
    for i in bits(bx):
        total += popcount(G.nbr_x[i] & ay)
    for i in bits(ax & bx):
        total -= popcount(G.nbr_x[i] & ay & by)
    return total


# ---- enumeration of linked subsets ----------------------------------------

def connected_subsets(adj, within: int, max_size: int | None = None,
                      prune=None) -> Iterator[int]:
    """Every nonempty connected subset of ``within`` exactly once.

    Sets are grown from their lowest vertex; at each node the remaining
    candidates are either added (one at a time, in order) or excluded for the
    rest of that subtree.  ``prune(mask)`` returning True cuts a set and all of
    its supersets (use only with monotone predicates).
    """
    limit = popcount(within) if max_size is None else max_size
    if limit <= 0:
        return

    def grow(sub, size, cand, forbidden):
        yield sub
        if size >= limit:
            return
        while cand:
            w = cand & -cand
            cand ^= w
            new = sub | w
            if prune is None or not prune(new):
                ext = adj[w.bit_length() - 1] & within & ~(forbidden | new | cand)
                yield from grow(new, size + 1, cand | ext, forbidden | new)
            forbidden |= w

    below = 0
    for v in bits(within):
        seed = 1 << v
        if prune is None or not prune(seed):
            yield from grow(seed, 1, adj[v] & within & ~(below | seed), below | seed)
        below |= seed


def two_linked_subsets(G: BipartiteGraph, side: str = "X", max_size: int | None = None,
                       closure_cap: int | None = None) -> Iterator[int]:
    """Masks of nonempty 2-linked subsets of one side.

    With ``closure_cap`` only sets with |[A]| <= cap are produced; closure is
    monotone so the cap prunes whole subtrees.
    """
    full = (1 << G.count(side)) - 1
    prune = None
    if closure_cap is not None:
        prune = lambda m: popcount(G.closure_mask(side, m)) > closure_cap  # noqa: E731
    return connected_subsets(G.square(side), full, max_size, prune)


def count_linked_subsets(G: BipartiteGraph, v, ell: int, s: int, side: str = "X") -> int:
    """Number of s-linked subsets of ``side`` of size ell containing vertex v."""
    if ell < 1:
        return 0
    n_side = G.count(side)
    offset = 0 if side == "X" else G.x_count
    padj = power_adjacency(G, s)
    side_full = ((1 << n_side) - 1)
    adj = tuple(((padj[offset + i] >> offset) & side_full) for i in range(n_side))
    vi = G.mask(side, [v])
    total = 0
    for m in connected_subsets(adj, side_full, max_size=ell):
        if popcount(m) == ell and m & vi:
            total += 1
    return total


# ---- expansion diagnostics ---------------------------------------------------

def m_phi(G: BipartiteGraph, phi) -> int:
    """min |N(K)| over y in Y and K subset of N(y) with |K| > phi.

    |N(K)| is monotone in K, so only |K| = floor(phi) + 1 is enumerated.
    """
    phi = Fraction(phi)
    upper = Fraction(G.d_Y) / G.delta - 1
    if not (1 <= phi <= upper):
        raise ValidationError(f"phi must lie in [1, {upper}], got {phi}")
    k = math.floor(phi) + 1
    best = None
    for j in range(G.y_count):
        nb = list(bits(G.nbr_y[j]))
        if len(nb) < k:
            continue
        for K in combinations(nb, k):
            size = popcount(G.N("X", sum(1 << i for i in K)))
            if best is None or size < best:
                best = size
    if best is None:
        raise ValidationError(f"no y has more than {phi} neighbors")
    return best


@dataclass
class ExpansionReport:
    alpha: Fraction
    exhaustive: bool
    holds: bool
    per_side: dict  # side -> {"holds", "worst_ratio", "witness", "checked"}

    @property
    def status(self) -> str:
        if not self.holds:
            return "falsified"
        return "certified" if self.exhaustive else "sampled, unfalsified (not exhaustive)"


def _side_expansion_exhaustive(G, side):
    n = G.count(side)
    worst, witness, checked = None, None, 0
    for size in range(1, (n + 1) // 2):  # |A| < n/2
        if 2 * size >= n:
            break
        for A in combinations(range(n), size):
            m = sum(1 << i for i in A)
            r = Fraction(popcount(G.N(side, m)), size)
            checked += 1
            if worst is None or r < worst:
                worst, witness = r, m
    return worst, witness, checked


def _side_expansion_sampled(G, side, rng, samples):
    n = G.count(side)
    worst, witness, checked = None, None, 0
    for _ in range(samples):
        size = int(rng.integers(1, max(2, (n + 1) // 2)))
        if 2 * size >= n:
            continue
        A = rng.choice(n, size=size, replace=False)
        m = 0
        for i in A:
            m |= 1 << int(i)
        # greedy descent: swap in vertices that shrink the neighborhood
        improved = True
        while improved:
            improved = False
            na = G.N(side, m)
            for i in bits(m):
                for j in range(n):
                    if m >> j & 1:
                        continue
                    cand = (m & ~(1 << i)) | (1 << j)
                    if popcount(G.N(side, cand)) < popcount(na):
                        m, improved = cand, True
                        break
                if improved:
                    break
        r = Fraction(popcount(G.N(side, m)), popcount(m))
        checked += 1
        if worst is None or r < worst:
            worst, witness = r, m
    return worst, witness, checked


def check_alpha_expansion(G: BipartiteGraph, alpha, seed: int = 0,
                          samples: int = 2000) -> ExpansionReport:
    """Check |N(A)| >= (1 + alpha)|A| for all A with |A| < |side|/2, on both sides."""
    alpha = Fraction(alpha)
    exhaustive = G.n <= EXHAUSTIVE_EXPANSION_LIMIT
    rng = np.random.default_rng(seed)
    per_side = {}
    for side in SIDES:
        if exhaustive:
            worst, witness, checked = _side_expansion_exhaustive(G, side)
        else:
            worst, witness, checked = _side_expansion_sampled(G, side, rng, samples)
        holds = worst is None or worst >= 1 + alpha
        per_side[side] = {
            "holds": holds,
            "worst_ratio": worst,
            "witness": sorted(G.members(side, witness)) if witness is not None else None,
            "checked": checked,
        }
    return ExpansionReport(alpha, exhaustive, all(v["holds"] for v in per_side.values()), per_side)


def best_expansion_alpha(G: BipartiteGraph) -> Fraction | None:
    """Largest alpha certified by exhaustion (min over both sides of ratio - 1)."""
    if G.n > EXHAUSTIVE_EXPANSION_LIMIT:
        raise SizeGuardError(f"exhaustive expansion needs |V| <= {EXHAUSTIVE_EXPANSION_LIMIT}")
    ratios = [_side_expansion_exhaustive(G, s)[0] for s in SIDES]
    ratios = [r for r in ratios if r is not None]
    return min(ratios) - 1 if ratios else None


def hypercube_isoperimetry_check(d: int) -> dict:
    """Exhaustively test the three hypercube isoperimetry clauses on the even side.

    Each clause is checked over every nonempty A inside its own hypothesis:
    |A| <= d/10, |A| <= d^4, |A| <= 2^(d-2) respectively.
    """
    if not 1 <= d <= 4:
        raise SizeGuardError("exhaustive isoperimetry check supports d <= 4")
    G = hypercube(d)
    n = G.x_count
    clauses = {
        "small": {"hyp": Fraction(d, 10), "bound": lambda a: d * a - a * a},
        "medium": {"hyp": Fraction(d ** 4), "bound": lambda a: Fraction(d * a, 10)},
        "large": {"hyp": Fraction(2 ** (d - 2)),
                  "bound": lambda a: (1 + 1 / (2 * math.sqrt(d))) * a},
    }
    report = {"d": d}
    for name, c in clauses.items():
        checked, violations, worst = 0, [], None
        for m in range(1, 1 << n):
            a = popcount(m)
            if a > c["hyp"]:
                continue
            g = popcount(G.N("X", m))
            slack = g - c["bound"](a)
            checked += 1
            if worst is None or slack < worst:
                worst = slack
            if slack < 0:
                violations.append(sorted(G.members("X", m)))
        report[name] = {"checked": checked, "violations": violations,
                        "worst_slack": None if worst is None else float(worst)}
    report["holds"] = all(not report[k]["violations"] for k in clauses)
    return report


# ---- JSON -------------------------------------------------------------------

def to_json_dict(G: BipartiteGraph) -> dict:
    out = {"x_count": G.x_count, "y_count": G.y_count,
           "edges": [[u, v] for u, v in G.edges]}
    if G.labels:
        out["labels"] = {str(k): G.labels[k] for k in sorted(G.labels)}
    return out


def dumps(G: BipartiteGraph) -> str:
    return json.dumps(to_json_dict(G), separators=(",", ":")) + "\n"


def loads(text: str) -> BipartiteGraph:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"graph file is not valid JSON: {exc}") from None
    return from_json_dict(data)


def from_json_dict(data: dict) -> BipartiteGraph:
    if not isinstance(data, dict):
        raise ValidationError("graph JSON must be an object")
    try:
        xc, yc, edges = data["x_count"], data["y_count"], data["edges"]
    except KeyError as exc:
        raise ValidationError(f"graph JSON missing key {exc}") from None
    if not isinstance(xc, int) or not isinstance(yc, int) or not isinstance(edges, list):
        raise ValidationError("graph JSON has wrong field types")
    labels = data.get("labels")
    if labels is not None:
        try:
            labels = {int(k): str(v) for k, v in labels.items()}
        except (AttributeError, ValueError):
            raise ValidationError("labels must map integer ids to strings") from None
    edges = [tuple(e) if isinstance(e, list) else e for e in edges]
    return BipartiteGraph(xc, yc, edges, labels=labels)


def load(path) -> BipartiteGraph:
    try:
        with open(path) as fh:
            return loads(fh.read())
    except OSError as exc:
        raise ValidationError(f"cannot read graph file {path}: {exc}") from None


def save(G: BipartiteGraph, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(G))
