"""Graph containers for 2-linked sets on a bipartite graph.

Pipeline, for fixed (a, g):

* ``enumerate_Gag`` lists every 2-linked A in X with |[A]| = a and |N(A)| = g;
* ``phi_approximation_for`` builds a phi-approximation F' of A from a random
  T0 plus a greedy cover; ``phi_family`` collects them;
* ``psi_initial_run`` / ``psi_additional_run`` turn (A, F') into
  (psi_X, psi_Y)-approximating pairs (F, S);
* ``iterative_psi_family`` halves psi_X stage by stage, producing the families
  F_0..F_kappa;
* the audits compare measured sums and family sizes with the analytic bounds.

All psi comparisons are exact (Fraction); vertex sets are bitmasks on the
graph's local indices (F on Y, S and A on X).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from .errors import InvariantViolation, SizeGuardError, ValidationError
from .graph import BipartiteGraph, VertexSet, bits, m_phi, popcount, two_linked_subsets

GAG_X_LIMIT = 16
DEFAULT_GAMMA = 64
RESAMPLE_BUDGET = 64
DESK_P_CAP = Fraction(1, 2)
EXTENDED_PREC = 113


class ResampleBudgetExhausted(RuntimeError):
    pass


def _as_mask(G: BipartiteGraph, A, side="X") -> int:
    if isinstance(A, VertexSet):
        return G.mask(side, A.on(side))
    return int(A)


# ---- G(a, g) ------------------------------------------------------------------

@dataclass
class GagInstance:
    a: int
    g: int
    members: list  # masks on X

    @property
    def t(self) -> int:
        return self.g - self.a

    def w(self, G: BipartiteGraph) -> int:
        return self.g * G.d_Y - self.a * G.d_X

    def as_sets(self, G: BipartiteGraph) -> list[VertexSet]:
        return [G.vset("X", m) for m in self.members]


def gag_table(G: BipartiteGraph, override: bool = False) -> dict[tuple[int, int], list[int]]:
    """All nonempty 2-linked A in X bucketed by (|[A]|, |N(A)|)."""
    if G.x_count > GAG_X_LIMIT and not override:
        raise SizeGuardError(f"G(a,g) enumeration needs |X| <= {GAG_X_LIMIT} (or override)")
    key = "gag"
    if key not in G._sq:
        table: dict[tuple[int, int], list[int]] = {}
        for m in two_linked_subsets(G, "X"):
            ag = (popcount(G.closure_mask("X", m)), popcount(G.N("X", m)))
            table.setdefault(ag, []).append(m)
        for v in table.values():
            v.sort(key=lambda m: (popcount(m), m))
        G._sq[key] = table
    return G._sq[key]


def enumerate_Gag(G: BipartiteGraph, a: int, g: int, override: bool = False) -> GagInstance:
    if a <= 0:
        return GagInstance(a, g, [])
    return GagInstance(a, g, list(gag_table(G, override).get((a, g), [])))


# ---- approximation predicates ----------------------------------------------------

def N_phi(G: BipartiteGraph, A: int, phi) -> int:
    """N(A)^phi: neighbors of A with more than phi neighbors inside [A]."""
    cl = G.closure_mask("X", A)
    out = 0
    for j in bits(G.N("X", A)):
        if popcount(G.nbr_y[j] & cl) > phi:
            out |= 1 << j
    return out


def is_phi_approximation(G: BipartiteGraph, A: int, F: int, phi) -> bool:
    NA = G.N("X", A)
    cl = G.closure_mask("X", A)
    return (N_phi(G, A, phi) & ~F == 0 and F & ~NA == 0
            and cl & ~G.N("Y", F) == 0)


def pair_violations(G: BipartiteGraph, A: int, F: int, S: int, psi_X, psi_Y) -> list[str]:
    """Which (psi_X, psi_Y)-approximating-pair conditions fail for A (empty if valid)."""
    out = []
    NA = G.N("X", A)
    if F & ~NA:
        out.append("F not inside N(A)")
    if G.closure_mask("X", A) & ~S:
        out.append("S does not contain [A]")
    for u in bits(S):
        if popcount(G.nbr_x[u] & F) < G.deg_x[u] - psi_X:
            out.append(f"degree condition on S fails at x{u}")
            break
    notS = ((1 << G.x_count) - 1) & ~S
    for v in bits(((1 << G.y_count) - 1) & ~F):
        if popcount(G.nbr_y[v] & notS) < G.deg_y[v] - psi_Y:
            out.append(f"degree condition on Y minus F fails at y{v}")
            break
    return out


# ---- Lovasz-Stein greedy cover ------------------------------------------------------

def lovasz_stein_cover(P, Q, incidence, a_min: int | None = None, b_max: int | None = None):
    """Greedy Q' subset of Q covering P; ``incidence`` maps q -> iterable of P-vertices.

    Picks the q covering most uncovered P-vertices, ties by smallest id.  The
    result obeys |Q'| <= (|Q|/a)(1 + log b).
    """
    P = set(P)
    Q = sorted(set(Q))
    inc = {q: set(incidence.get(q, ())) & P for q in Q}
    deg_P = {u: 0 for u in P}
    for q in Q:
        for u in inc[q]:
            deg_P[u] += 1
    for u, d in sorted(deg_P.items()):
        if d == 0:
            raise ValidationError(f"vertex {u!r} of P has no neighbor in Q")
    if a_min is not None and any(d < a_min for d in deg_P.values()):
        raise ValidationError("some P-vertex has fewer than a_min neighbors")
    if b_max is not None and any(len(inc[q]) > b_max for q in Q):
        raise ValidationError("some Q-vertex has more than b_max neighbors")
    uncovered = set(P)
    chosen = []
    while uncovered:
        best = max(Q, key=lambda q: (len(inc[q] & uncovered), -Q.index(q)))
        chosen.append(best)
        uncovered -= inc[best]
    return frozenset(chosen)


def lovasz_stein_bound(q_size: int, a: int, b: int) -> float:
    return q_size / a * (1 + math.log(b)) if a > 0 and b > 0 else 0.0


# ---- phi-approximations -------------------------------------------------------

def default_phi(G: BipartiteGraph) -> Fraction:
    return Fraction(G.d_Y) / (2 * G.delta)


def default_gamma_prime(G: BipartiteGraph, phi, p_cap=DESK_P_CAP) -> Fraction:
    """max{1, 10/delta''} with delta'' = m_phi/(phi d_X), then lowered so p <= p_cap."""
    phi = Fraction(phi)
    dpp = Fraction(m_phi(G, phi)) / (phi * G.d_X)
    gp = max(Fraction(1), 10 / dpp)
    if G.d_X > 1:
        limit = Fraction(float(p_cap) * float(phi) * G.d_X / math.log(G.d_X)).limit_denominator(10 ** 6)
        gp = min(gp, limit)
    return gp


def inclusion_probability(G: BipartiteGraph, phi, gamma_prime) -> float:
    return float(gamma_prime) * math.log(G.d_X) / (float(phi) * G.d_X) if G.d_X > 0 else 0.0


def _seed_sequence(seed: int, tag: int) -> np.random.SeedSequence:
    words = []
    while True:
        words.append(tag & 0xFFFFFFFF)
        tag >>= 32
        if not tag:
            break
    return np.random.SeedSequence(seed, spawn_key=tuple(words))


def make_rng(seed: int, tag: int = 0) -> np.random.Generator:
    """Counter-based Philox stream keyed by (seed, tag)."""
    return np.random.Generator(np.random.Philox(_seed_sequence(seed, tag)))


@dataclass
class PhiApproximation:
    F: int
    T0: int
    T0_prime: int
    T1: int
    omega: tuple  # edges (y, x) of grad(T0, X minus [A]), local indices
    attempts: int

    def parts_key(self):
        return (self.T0, self.T0_prime, self.T1, self.omega)


def phi_approximation_for(G: BipartiteGraph, A, phi, gamma_prime, seed: int,
                          max_attempts: int = RESAMPLE_BUDGET) -> PhiApproximation:
    A = _as_mask(G, A)
    phi, gamma_prime = Fraction(phi), Fraction(gamma_prime)
    p = inclusion_probability(G, phi, gamma_prime)
    if not 0 < p <= 1:
        raise ValidationError(f"inclusion probability p = {p:.4g} must lie in (0, 1]")
    mphi = m_phi(G, phi)
    cl = G.closure_mask("X", A)
    NA = G.N("X", A)
    g, a = popcount(NA), popcount(cl)
    w = g * G.d_Y - a * G.d_X
    outside = ((1 << G.x_count) - 1) & ~cl
    Nphi = N_phi(G, A, phi)
    na_list = list(bits(NA))
    rng = make_rng(seed, A)
    bounds = (3 * g * p, 3 * w * p, 3 * g * math.exp(-p * mphi))
    failures = {"size": 0, "edges": 0, "coverage": 0}
    for attempt in range(1, max_attempts + 1):
        draws = rng.random(len(na_list))
        T0 = 0
        for j, r in zip(na_list, draws):
            if r < p:
                T0 |= 1 << j
        e_out = sum(popcount(G.nbr_y[j] & outside) for j in bits(T0))
        reach = G.N("X", G.N("Y", T0) & cl)
        missed = popcount(Nphi & ~reach)
        ok = True
        if popcount(T0) > bounds[0]:
            failures["size"] += 1
            ok = False
        if e_out > bounds[1]:
            failures["edges"] += 1
            ok = False
        if missed > bounds[2]:
            failures["coverage"] += 1
            ok = False
        if ok:
            break
    else:
        worst = max(failures, key=failures.get)
        raise ResampleBudgetExhausted(
            f"T0 resampling failed {max_attempts} times; claim '{worst}' failed "
            f"{failures[worst]}/{max_attempts} attempts")
    T0p = Nphi & ~reach
    L = T0p | reach
    P = cl & ~G.N("Y", L)
    Q = NA & ~L
    incidence = {j: list(bits(G.nbr_y[j] & P)) for j in bits(Q)}
    T1 = 0
    for j in lovasz_stein_cover(list(bits(P)), list(bits(Q)), incidence):
        T1 |= 1 << j
    F = L | T1
    omega = tuple((j, i) for j in bits(T0) for i in bits(G.nbr_y[j] & outside))
    if not is_phi_approximation(G, A, F, phi):
        raise InvariantViolation("constructed F' is not a phi-approximation")
    return PhiApproximation(F, T0, T0p, T1, omega, attempt)


def log_binom_le(n, k) -> float:
    """log of sum_{i <= k} C(n, i), with n and k floored."""
    n_i = math.floor(n)
    k_i = min(math.floor(k), n_i)
    if k_i < 0:
        return float("-inf")
    return math.log(sum(math.comb(n_i, i) for i in range(k_i + 1)))


def log_phi_family_bound(G: BipartiteGraph, g: int, w: int, phi, gamma_prime) -> float:
    """Logarithm of the analytic bound on |V(a, g, phi)| for phi-approximation families."""
    dX, dY, delta = G.d_X, G.d_Y, float(G.delta)
    phi, gp = float(phi), float(gamma_prime)
    mph = m_phi(G, phi)
    L = math.log(delta * dX * dY)
    e1 = 54 * g * gp * math.log(dX) * L / (phi * dX)
    e2 = 54 * g * L / dX ** (gp * mph / (phi * dX))
    e3 = 54 * w * math.log(dY) * L / (dX * (dY / delta - phi))
    n = 3 * g * gp * dY * math.log(dX) / (phi * dX)
    k = 3 * w * gp * math.log(dX) / (phi * dX)
    return math.log(G.y_count) + e1 + e2 + e3 + log_binom_le(n, k)


@dataclass
class ContainerFamily:
    kind: str  # "phi" or "psi"
    members: set
    stage_params: dict
    accounting: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.members)

    def records(self, G: BipartiteGraph, stage: int | None = None) -> list[dict]:
        out = []
        for m in sorted(self.members):
            if self.kind == "phi":
                out.append({"stage": -1, "F": sorted(G.members("Y", m)), "S": []})
            else:
                F, S = m
                out.append({"stage": stage, "F": sorted(G.members("Y", F)),
                            "S": sorted(G.members("X", S))})
        return out


def phi_family(G: BipartiteGraph, a: int, g: int, phi=None, gamma_prime=None,
               seed: int = 0) -> ContainerFamily:
    phi = default_phi(G) if phi is None else Fraction(phi)
    gamma_prime = default_gamma_prime(G, phi) if gamma_prime is None else Fraction(gamma_prime)
    inst = enumerate_Gag(G, a, g)
    members: set[int] = set()
    witnesses: dict[int, list[int]] = {}
    attempts = []
    for A in inst.members:
        approx = phi_approximation_for(G, A, phi, gamma_prime, seed)
        members.add(approx.F)
        witnesses.setdefault(approx.F, []).append(A)
        attempts.append(approx.attempts)
    w = g * G.d_Y - a * G.d_X
    acct = {"size": len(members), "witnesses": witnesses,
            "mean_attempts": float(np.mean(attempts)) if attempts else 0.0}
    if inst.members:
        acct["log_bound"] = log_phi_family_bound(G, g, w, phi, gamma_prime)
    return ContainerFamily("phi", members, {"phi": phi, "gamma_prime": gamma_prime}, acct)


# ---- psi-approximating runs ------------------------------------------------------

@dataclass(frozen=True)
class ApproximatingPair:
    F: int
    S: int
    psi_X: Fraction
    psi_Y: Fraction
    stage: int
    source: str
    n1: int = field(default=0, compare=False)
    n2: int = field(default=0, compare=False)

    @property
    def key(self) -> tuple[int, int]:
        return (self.F, self.S)

    def f(self) -> int:
        return popcount(self.F)

    def s(self) -> int:
        return popcount(self.S)

    def as_sets(self, G: BipartiteGraph) -> tuple[VertexSet, VertexSet]:
        return G.vset("Y", self.F), G.vset("X", self.S)


def _check_psi(psi, upper, name):
    if not 0 < psi <= upper:
        raise ValidationError(f"{name} = {psi} outside (0, {upper}]")


def _step1(G, A_cl, NA, F, psi_X):
    """Grow F by N(u) for the smallest u in [A] with too many neighbors outside F."""
    n = 0
    while True:
        for u in bits(A_cl):
            if popcount(G.nbr_x[u] & NA & ~F) > psi_X:
                F |= G.nbr_x[u]
                n += 1
                break
        else:
            return F, n
        if n > G.x_count:
            raise InvariantViolation("step 1 did not terminate")


def _step2(G, NA, S, psi_Y):
    """Shrink S by N(v) for the smallest v outside N(A) with too many neighbors in S."""
    n = 0
    outside = ((1 << G.y_count) - 1) & ~NA
    while True:
        for v in bits(outside):
            if popcount(G.nbr_y[v] & S) > psi_Y:
                S &= ~G.nbr_y[v]
                n += 1
                break
        else:
            return S, n
        if n > G.y_count:
            raise InvariantViolation("step 2 did not terminate")


def _close_F(G, F, S, psi_Y):
    for v in range(G.y_count):
        if popcount(G.nbr_y[v] & S) > psi_Y:
            F |= 1 << v
    return F


def psi_initial_run(G: BipartiteGraph, A, F_prime, psi_X, psi_Y, phi=None,
                    stage: int = 0) -> ApproximatingPair:
    """First (psi_X, psi_Y)-approximating run from a phi-approximation F'.

    When ``phi`` is given, the Step 1 iteration count is checked against
    delta*w/((d_Y - delta*phi) psi_X); Step 2 is always checked against
    w/((d_X - psi_X) psi_Y).
    """
    A = _as_mask(G, A)
    F_prime = _as_mask(G, F_prime, "Y")
    psi_X, psi_Y = Fraction(psi_X), Fraction(psi_Y)
    _check_psi(psi_X, G.d_X - 1, "psi_X")
    _check_psi(psi_Y, G.d_Y - 1, "psi_Y")
    cl = G.closure_mask("X", A)
    NA = G.N("X", A)
    F2, n1 = _step1(G, cl, NA, F_prime, psi_X)
    S2 = 0
    for u in range(G.x_count):
        if popcount(G.nbr_x[u] & F2) >= G.deg_x[u] - psi_X:
            S2 |= 1 << u
    S, n2 = _step2(G, NA, S2, psi_Y)
    F = _close_F(G, F2, S, psi_Y)

    g, a = popcount(NA), popcount(cl)
    w = g * G.d_Y - a * G.d_X
    if phi is not None:
        phi = Fraction(phi)
        budget1 = G.delta * w / ((G.d_Y - G.delta * phi) * psi_X)
        if n1 > budget1:
            raise InvariantViolation(f"step 1 used {n1} iterations, budget {budget1}")
    budget2 = Fraction(w) / ((G.d_X - psi_X) * psi_Y)
    if n2 > budget2:
        raise InvariantViolation(f"step 2 used {n2} iterations, budget {budget2}")
    pair = ApproximatingPair(F, S, psi_X, psi_Y, stage, "initial", n1, n2)
    bad = pair_violations(G, A, F, S, psi_X, psi_Y)
    if bad:
        raise InvariantViolation("initial run produced an invalid pair: " + "; ".join(bad))
    return pair


def psi_additional_run(G: BipartiteGraph, A, pair: ApproximatingPair, psi_X2, psi_Y2,
                       stage: int | None = None) -> ApproximatingPair:
    """Tighten a valid pair for A to (psi_X', psi_Y')."""
    A = _as_mask(G, A)
    psi_X2, psi_Y2 = Fraction(psi_X2), Fraction(psi_Y2)
    _check_psi(psi_X2, G.d_X - 1, "psi_X'")
    _check_psi(psi_Y2, Fraction(G.d_Y) / G.delta - 1, "psi_Y'")
    if pair_violations(G, A, pair.F, pair.S, pair.psi_X, pair.psi_Y):
        raise ValidationError("input pair is not valid for A")
    cl = G.closure_mask("X", A)
    NA = G.N("X", A)
    F, S = pair.F, pair.S
    f, g, a = popcount(F), popcount(NA), popcount(cl)
    w = g * G.d_Y - a * G.d_X

    n1 = 0
    while True:
        for u in bits(cl):
            if popcount(G.nbr_x[u] & NA & ~F) > psi_X2:
                if not S >> u & 1:
                    raise InvariantViolation("step 1' picked u outside S")
                F |= G.nbr_x[u]
                n1 += 1
                break
        else:
            break
    F_hat = F
    S_hat = 0
    for u in bits(S):
        if popcount(G.nbr_x[u] & F_hat) >= G.deg_x[u] - psi_X2:
            S_hat |= 1 << u
    NS = G.N("X", S)
    n2 = 0
    outside = ((1 << G.y_count) - 1) & ~NA
    while True:
        for v in bits(outside):
            if popcount(G.nbr_y[v] & S_hat) > psi_Y2:
                if not NS >> v & 1:
                    raise InvariantViolation("step 2' picked v outside N(S)")
                S_hat &= ~G.nbr_y[v]
                n2 += 1
                break
        else:
            break
    S_new = S_hat
    F_new = _close_F(G, F_hat, S_new, psi_Y2)

    if n1 > Fraction(g - f) / psi_X2:
        raise InvariantViolation(f"step 1' used {n1} iterations, budget {Fraction(g - f) / psi_X2}")
    budget2 = Fraction(w) / ((G.d_X - psi_X2) * psi_Y2)
    if n2 > budget2:
        raise InvariantViolation(f"step 2' used {n2} iterations, budget {budget2}")
    st = pair.stage + 1 if stage is None else stage
    out = ApproximatingPair(F_new, S_new, psi_X2, psi_Y2, st, "additional", n1, n2)
    bad = pair_violations(G, A, F_new, S_new, psi_X2, psi_Y2)
    if bad:
        raise InvariantViolation("additional run produced an invalid pair: " + "; ".join(bad))
    return out


def kappa(d_X: int) -> int:
    """max{i : 2^i <= sqrt(d_X)}."""
    i = 0
    while 4 ** (i + 1) <= d_X:
        i += 1
    return i


def psi_schedule(G: BipartiteGraph, gamma, i: int) -> tuple[Fraction, Fraction]:
    gamma = Fraction(gamma)
    return Fraction(G.d_X) / (2 ** i * gamma), Fraction(G.d_Y) / gamma


@dataclass
class PsiFamily:
    """F_0..F_kappa for one (a, g, F'), with witness bookkeeping."""

    a: int
    g: int
    F_prime: int
    gamma: Fraction
    kappa: int
    stages: list  # ContainerFamily per stage
    witnesses: list  # per stage: {(F, S): [A, ...]}
    assignment: dict  # A -> (stage, ApproximatingPair)
    W_sizes: list
    U_sizes: list
    W0_size: int
    W_next_sizes: list  # sizes of W_{i+1}(F, S) per rerun pair
    covered: list  # the members of G(a, g, F')


def iterative_psi_family(G: BipartiteGraph, a: int, g: int, F_prime, gamma=DEFAULT_GAMMA,
                         phi=None, members: list[int] | None = None) -> PsiFamily:
    gamma = Fraction(gamma)
    if gamma < 50:
        raise ValidationError("gamma must be at least 50")
    F_prime = _as_mask(G, F_prime, "Y")
    phi = default_phi(G) if phi is None else Fraction(phi)
    if members is None:
        members = enumerate_Gag(G, a, g).members
    covered = [A for A in members if is_phi_approximation(G, A, F_prime, phi)]
    t = g - a
    k = kappa(G.d_X)

    psi_X, psi_Y = psi_schedule(G, gamma, 0)
    W: dict[tuple[int, int], list] = {}
    for A in covered:
        pair = psi_initial_run(G, A, F_prime, psi_X, psi_Y, phi=phi, stage=0)
        W.setdefault(pair.key, []).append((A, pair))
    W0_size = len(W)

    stages, stage_witnesses, W_sizes, U_sizes, W_next = [], [], [], [], []
    assignment = {}
    for i in range(k + 1):
        psi_X, psi_Y = psi_schedule(G, gamma, i)
        W_sizes.append(len(W))
        if i < k:
            U = {key: v for key, v in W.items() if popcount(key[0]) >= g - Fraction(t, 2 ** i)}
            Fi = {key: v for key, v in W.items() if key not in U}
        else:
            U, Fi = {}, W
        U_sizes.append(len(U))
        for key, lst in Fi.items():
            for A, pair in lst:
                assignment[A] = (i, pair)
        stages.append(ContainerFamily("psi", set(Fi), {"psi_X": psi_X, "psi_Y": psi_Y,
                                                        "gamma": gamma, "kappa": k, "stage": i}))
        stage_witnesses.append({key: [A for A, _ in lst] for key, lst in Fi.items()})
        if i < k:
            nX, nY = psi_schedule(G, gamma, i + 1)
            W_new: dict[tuple[int, int], list] = {}
            for key, lst in U.items():
                outs = set()
                for A, pair in lst:
                    new = psi_additional_run(G, A, pair, nX, nY, stage=i + 1)
                    W_new.setdefault(new.key, []).append((A, new))
                    outs.add(new.key)
                W_next.append(len(outs))
            W = W_new
    for st in stages:
        st.accounting["size"] = len(st.members)
    return PsiFamily(a, g, F_prime, gamma, k, stages, stage_witnesses, assignment,
                     W_sizes, U_sizes, W0_size, W_next, covered)


# ---- audits ---------------------------------------------------------------------

def log_W_bound(G: BipartiteGraph, g: int, w: int, phi, psi_X, psi_Y) -> float:
    """Log of the initial-run family bound (two binomial factors)."""
    d = G.delta
    k1 = d * w / ((G.d_Y - d * Fraction(phi)) * Fraction(psi_X))
    n2 = d * d * G.d_X ** 2 * G.d_Y ** 2 * g
    k2 = Fraction(w) / ((G.d_X - Fraction(psi_X)) * Fraction(psi_Y))
    return log_binom_le(G.d_Y * g, k1) + log_binom_le(n2, k2)


def log_W_prime_bound(G: BipartiteGraph, s: int, f: int, g: int, w: int, psi_X2, psi_Y2) -> float:
    """Log of the additional-run family bound."""
    k1 = Fraction(g - f) / Fraction(psi_X2)
    k2 = Fraction(w) / ((G.d_X - Fraction(psi_X2)) * Fraction(psi_Y2))
    return log_binom_le(s, k1) + log_binom_le(G.delta * G.d_X * s, k2)


def log_stage_bound(G: BipartiteGraph, g: int, w: int, phi, gamma) -> float:
    """Explicit binomial part of the per-stage bound (the exp(O(.)) factor is not evaluated)."""
    d, gamma = G.delta, Fraction(gamma)
    k1 = d * gamma * w / ((G.d_Y - d * Fraction(phi)) * G.d_X)
    n2 = d * d * G.d_X ** 2 * G.d_Y ** 2 * g
    k2 = 2 * gamma * w / (G.d_X * G.d_Y)
    return log_binom_le(G.d_Y * g, k1) + log_binom_le(n2, k2)


@dataclass
class PairCheck:
    """Outcome of checking every produced pair of one (a, g) instance."""

    pairs: int = 0
    witnesses: int = 0
    violations: dict = field(default_factory=dict)

    def add(self, name: str, detail):
        self.violations.setdefault(name, []).append(detail)

    def merge(self, other: "PairCheck"):
        self.pairs += other.pairs
        self.witnesses += other.witnesses
        for k, v in other.violations.items():
            self.violations.setdefault(k, []).extend(v)

    @property
    def total_violations(self) -> int:
        return sum(len(v) for v in self.violations.values())


def check_psi_family(G: BipartiteGraph, fam: PsiFamily) -> PairCheck:
    """Exact checks on every member of F_0..F_kappa against each of its witnesses.

    Covers: pair validity, the size bound s <= f + [(g-f)psi_Y + (s-a)psi_X]/d_X,
    |S| - a <= 2t, |S| <= d_X g, stage separation, g - s >= 0.9(g - f) for
    i < kappa, completeness over G(a, g, F').
    """
    chk = PairCheck()
    a, g, t = fam.a, fam.g, fam.g - fam.a
    for i, (stage, wit) in enumerate(zip(fam.stages, fam.witnesses)):
        psi_X, psi_Y = stage.stage_params["psi_X"], stage.stage_params["psi_Y"]
        for key, As in wit.items():
            F, S = key
            f, s = popcount(F), popcount(S)
            chk.pairs += 1
            for A in As:
                chk.witnesses += 1
                bad = pair_violations(G, A, F, S, psi_X, psi_Y)
                if bad:
                    chk.add("pair", (i, A, bad))
            if Fraction(s) > f + Fraction(1, G.d_X) * ((g - f) * psi_Y + (s - a) * psi_X):
                chk.add("prop_s_f", (i, key))
            if s - a > 2 * t:
                chk.add("s_minus_a", (i, key))
            if s > G.d_X * g:
                chk.add("s_loose", (i, key))
            if i < fam.kappa:
                if not f < g - Fraction(t, 2 ** i):
                    chk.add("stage_separation", (i, key))
                if Fraction(g - s) < Fraction(9, 10) * (g - f):
                    chk.add("reconstruction_gap", (i, key))
    for A in fam.covered:
        if A not in fam.assignment:
            chk.add("completeness", A)
    return chk


def audit_instance(G: BipartiteGraph, gamma=DEFAULT_GAMMA, phi=None, gamma_prime=None,
                   seed: int = 0) -> dict:
    """Run the full container pipeline on every nonempty G(a, g) and check everything exactly."""
    phi = default_phi(G) if phi is None else Fraction(phi)
    gamma_prime = default_gamma_prime(G, phi) if gamma_prime is None else Fraction(gamma_prime)
    total = PairCheck()
    instances = 0
    budget_checks = 0
    for (a, g), members in sorted(gag_table(G).items()):
        instances += 1
        vfam = phi_family(G, a, g, phi, gamma_prime, seed)
        own = {}
        for F_prime, As in vfam.accounting["witnesses"].items():
            for A in As:
                own[A] = F_prime
        for F_prime in sorted(vfam.members):
            fam = iterative_psi_family(G, a, g, F_prime, gamma, phi, members=members)
            chk = check_psi_family(G, fam)
            total.merge(chk)
            budget_checks += len(fam.covered)
        for A in members:
            if A not in own or not is_phi_approximation(G, A, own[A], phi):
                total.add("phi_cover", A)
    return {"instances": instances, "pairs": total.pairs, "witness_checks": total.witnesses,
            "runs": budget_checks, "violations": {k: len(v) for k, v in total.violations.items()},
            "total_violations": total.total_violations, "details": total.violations}


def _weight_sum(members, lam: Fraction) -> Fraction:
    return sum((lam ** popcount(A) for A in members), Fraction(0))


def container_weight_audit(G: BipartiteGraph, a: int, g: int, lam, gamma=DEFAULT_GAMMA,
                           phi=None, gamma_prime=None, seed: int = 0) -> dict:
    """Sum of lambda^|A| over G(a, g) against the container bound and its ingredients.

    Nothing here is pass/fail: the headline inequality is asymptotic.  The
    per-pair reconstruction comparison is reported stage by stage.
    """
    from .polymer import as_activity

    lam = as_activity(lam, allow_zero=True)
    phi = default_phi(G) if phi is None else Fraction(phi)
    inst = enumerate_Gag(G, a, g)
    t, w = g - a, g * G.d_Y - a * G.d_X
    lhs = _weight_sum(inst.members, lam) if lam else Fraction(0)
    report = {"a": a, "g": g, "t": t, "w": w, "lambda": float(lam), "count": len(inst.members),
              "lhs": float(lhs), "lhs_exact": str(lhs), "gamma": float(gamma), "phi": float(phi),
              "kappa": kappa(G.d_X)}
    with mpmath.workprec(EXTENDED_PREC):
        dX = mpmath.mpf(G.d_X)
        log_rhs = (mpmath.log(G.y_count) + g * mpmath.log1p(mpmath.mpf(lam.numerator) / lam.denominator)
                   - t * mpmath.log(dX) ** 2 / (6 * dX)) if G.d_X > 1 else mpmath.mpf("nan")
        report["log_rhs"] = float(log_rhs)
        report["log_lhs"] = float(mpmath.log(mpmath.mpf(lhs.numerator) / lhs.denominator)) if lhs else float("-inf")
        lam_bar = min(lam, Fraction(1))
        log_recon = (g * mpmath.log1p(mpmath.mpf(lam.numerator) / lam.denominator)
                     - mpmath.mpf(lam_bar.numerator) / lam_bar.denominator * t / (3 * mpmath.sqrt(dX)))
        report["log_reconstruction_bound"] = float(log_recon)
    report["eq14_holds"] = report["log_lhs"] <= report["log_rhs"]
    if not inst.members:
        report["stages"] = []
        return report

    gamma_prime = default_gamma_prime(G, phi) if gamma_prime is None else Fraction(gamma_prime)
    vfam = phi_family(G, a, g, phi, gamma_prime, seed)
    report["phi_family"] = {"size": len(vfam), "log_size": math.log(len(vfam)),
                            "log_bound": vfam.accounting.get("log_bound")}
    psi_X0, psi_Y0 = psi_schedule(G, gamma, 0)
    log_W0 = log_W_bound(G, g, w, phi, psi_X0, psi_Y0)
    k = kappa(G.d_X)
    stage_rows = [{"stage": i, "family_size": 0, "pairs_over_bound": 0, "max_log_sum": float("-inf"),
                   "max_log_ratio_to_bound": float("-inf")} for i in range(k + 1)]
    w0_rows, wnext = [], []
    for F_prime in sorted(vfam.members):
        fam = iterative_psi_family(G, a, g, F_prime, gamma, phi, members=inst.members)
        w0_rows.append({"log_W0": math.log(fam.W0_size) if fam.W0_size else float("-inf"),
                        "log_bound": log_W0})
        wnext.extend(fam.W_next_sizes)
        for i, wit in enumerate(fam.witnesses):
            row = stage_rows[i]
            row["family_size"] += len(wit)
            for key, As in wit.items():
                s_ = _weight_sum(As, lam) if lam else Fraction(0)
                if not s_:
                    continue
                ls = math.log(s_.numerator) - math.log(s_.denominator)
                row["max_log_sum"] = max(row["max_log_sum"], ls)
                ratio = ls - report["log_reconstruction_bound"]
                row["max_log_ratio_to_bound"] = max(row["max_log_ratio_to_bound"], ratio)
                if ratio > 0:
                    row["pairs_over_bound"] += 1
    report["W0"] = w0_rows
    report["W_next_max"] = max(wnext) if wnext else 0
    report["log_stage_bound"] = log_stage_bound(G, g, w, phi, gamma)
    report["stages"] = stage_rows
    return report


def expander_container_audit(G: BipartiteGraph, a: int, g: int, lam, alpha=None,
                             gamma=DEFAULT_GAMMA, seed: int = 0) -> dict:
    """Container audit for a d-regular expander with d/2-approximations (delta = 1)."""
    if not G.is_regular():
        raise ValidationError("expander audit needs a d-regular bipartite graph")
    if a > G.x_count / 2:
        raise ValidationError(f"a = {a} exceeds |X|/2 = {G.x_count / 2}")
    d = G.d_X
    out = {"a": a, "g": g, "d": d, "t": g - a}
    if alpha is not None:
        alpha = Fraction(alpha)
        out["alpha"] = float(alpha)
        out["t_bound"] = float(alpha * g / (1 + alpha))
        out["t_bound_holds"] = (g - a) >= alpha * g / (1 + alpha)
    if g < d:
        out["branch"] = "trivially true (g < d)"
        return out
    out["branch"] = "container"
    phi = Fraction(d, 2)
    if not (1 <= phi <= d - 1):
        out["branch"] = "phi = d/2 outside [1, d-1]; container pipeline skipped"
        return out
    out["audit"] = container_weight_audit(G, a, g, lam, gamma=gamma, phi=phi, seed=seed)
    return out
