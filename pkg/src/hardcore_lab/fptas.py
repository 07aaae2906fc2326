"""Truncated cluster expansion estimate of Z on regular bipartite expanders.

Each side hosts its own defect polymer model (closure cap |side|/2).  The
per-side series T_k is grown until the last included shell, times a safety
factor, drops below eps/4, and the two sides are combined as

    Z ~ exp(T^X) (1 + lambda)^|Y| + exp(T^Y) (1 + lambda)^|X|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath

from .containers import make_rng
from .errors import SizeGuardError, ValidationError
from .graph import BipartiteGraph, check_alpha_expansion, two_linked_subsets, popcount
from .hardcore import (MU_VERTEX_LIMIT, Z_VERTEX_LIMIT, Distribution, exact_Z, exact_mu,
                       mu_hat_law, sample_mu_hat_batch, tv_distance)
from .polymer import as_activity, cluster_sums, defect_model, frac_log

SAFETY = 10
K_CAP = 12
SIZE_CAP = 6
PREC = 113


@dataclass
class SideExpansion:
    side: str
    L: list  # exact L_1..L_k_cap
    k: int  # shells included in the estimate
    T: float  # L_1 + ... + L_k
    last_shell: float
    met: bool
    truncated_polymers: bool

    def as_dict(self) -> dict:
        return {"k": self.k, "T": self.T, "last_shell": self.last_shell, "budget_met": self.met,
                "polymers_beyond_cap": self.truncated_polymers,
                "shells": [float(x) for x in self.L[: self.k]]}


@dataclass
class ApproxResult:
    logZ_estimate: float
    epsilon_target: float
    k_truncation: int
    per_side: dict
    budget_met: bool
    lam: Fraction
    error_budget_trace: list = field(default_factory=list)
    oracle_logZ: float | None = None
    flags: list = field(default_factory=list)

    @property
    def abs_error(self) -> float | None:
        if self.oracle_logZ is None:
            return None
        return abs(self.logZ_estimate - self.oracle_logZ)

    def as_dict(self) -> dict:
        out = {"logZ": self.logZ_estimate, "eps": self.epsilon_target, "k": self.k_truncation,
               "budget_met": self.budget_met, "lambda": float(self.lam), "flags": list(self.flags),
               "per_side": {s: e.as_dict() for s, e in self.per_side.items()}}
        if self.oracle_logZ is not None:
            out["oracle"] = {"logZ": self.oracle_logZ, "rel_err": self.abs_error}
        return out


def _require_expander(G: BipartiteGraph, alpha, attested: bool):
    if not G.is_regular():
        raise ValidationError("the expansion estimate needs a d-regular bipartite graph")
    if alpha is None:
        raise ValidationError("an expansion parameter alpha is required")
    if attested:
        return
    if G.n > 24:
        raise ValidationError("expansion cannot be certified by exhaustion; pass attested=True")
    rep = check_alpha_expansion(G, alpha)
    if not rep.holds:
        raise ValidationError(f"graph is not a {alpha}-expander")


def _beyond_size_cap(G: BipartiteGraph, side: str, size_cap: int, closure_cap: int) -> bool:
    if size_cap >= closure_cap:
        return False
    for m in two_linked_subsets(G, side, max_size=size_cap + 1, closure_cap=closure_cap):
        if popcount(m) == size_cap + 1:
            return True
    return False


def side_expansion(G: BipartiteGraph, side: str, lam: Fraction, eps: float,
                   k_cap: int = K_CAP, size_cap: int = SIZE_CAP, fixed_k: int | None = None
                   ) -> SideExpansion:
    closure_cap = G.count(side) // 2
    cap = min(closure_cap, size_cap)
    model = defect_model(G, side, lam, size_cap=cap, closure_cap=closure_cap, enumerate_all=False)
    top = fixed_k if fixed_k is not None else k_cap
    L = cluster_sums(model, top)
    beyond = _beyond_size_cap(G, side, cap, closure_cap)
    if fixed_k is not None:
        k, met = fixed_k, False
    else:
        k, met = top, False
        for i, x in enumerate(L, start=1):
            if abs(float(x)) * SAFETY <= eps / 4:
                k, met = i, True
                break
    met = met and not beyond
    T = float(sum(L[:k], Fraction(0)))
    return SideExpansion(side, L, k, T, abs(float(L[k - 1])) if k else 0.0, met, beyond)


def combine(G: BipartiteGraph, lam: Fraction, TX: float, TY: float) -> float:
    with mpmath.workprec(PREC):
        l1 = mpmath.log1p(mpmath.mpf(lam.numerator) / lam.denominator)
        a = TX + G.y_count * l1
        b = TY + G.x_count * l1
        m = max(a, b)
        return float(m + mpmath.log(mpmath.exp(a - m) + mpmath.exp(b - m)))


def approx_logZ(G: BipartiteGraph, alpha, lam, epsilon, oracle: bool = False,
                attested: bool = False, k_cap: int = K_CAP, size_cap: int = SIZE_CAP) -> ApproxResult:
    lam = as_activity(lam)
    eps = float(epsilon)
    if eps <= 0:
        raise ValidationError("epsilon must be positive")
    _require_expander(G, alpha, attested)
    sides = {s: side_expansion(G, s, lam, eps, k_cap, size_cap) for s in ("X", "Y")}
    est = combine(G, lam, sides["X"].T, sides["Y"].T)
    met = all(e.met for e in sides.values())
    flags = []
    if not met:
        flags.append("budget not met")
    if all(not any(e.L) for e in sides.values()):
        flags.append("no polymers on either side")
    trace = [{"k": k + 1, "X": abs(float(sides["X"].L[k])), "Y": abs(float(sides["Y"].L[k]))}
             for k in range(min(len(sides["X"].L), len(sides["Y"].L)))]
    res = ApproxResult(est, eps, max(e.k for e in sides.values()), sides, met, lam, trace, flags=flags)
    if oracle:
        if G.n > Z_VERTEX_LIMIT:
            raise SizeGuardError("oracle comparison needs |V| <= 36")
        res.oracle_logZ = frac_log(exact_Z(G, lam))
    return res


def side_weights(G: BipartiteGraph, res: ApproxResult) -> tuple[float, float]:
    """Probability of choosing X (resp. Y) as the defect side."""
    with mpmath.workprec(PREC):
        lam = res.lam
        l1 = mpmath.log1p(mpmath.mpf(lam.numerator) / lam.denominator)
        a = res.per_side["X"].T + G.y_count * l1
        b = res.per_side["Y"].T + G.x_count * l1
        pX = 1 / (1 + mpmath.exp(b - a))
        return float(pX), float(1 - pX)


def _caps(G: BipartiteGraph, side: str, size_cap: int):
    cc = G.count(side) // 2
    return min(cc, size_cap), cc


def approx_sample(G: BipartiteGraph, alpha, lam, epsilon, seed: int = 0, n: int = 1,
                  attested: bool = False, size_cap: int = SIZE_CAP) -> list[int]:
    """Independent sets (global masks) from the truncated-expansion sampler."""
    res = approx_logZ(G, alpha, lam, epsilon, attested=attested, size_cap=size_cap)
    pX, _ = side_weights(G, res)
    caps = _caps(G, "X", size_cap)
    if _caps(G, "Y", size_cap) != caps:
        raise ValidationError("sides of a regular graph should have equal size")
    draws = sample_mu_hat_batch(G, res.lam, n, seed, side_weights=(pX, 1 - pX),
                                size_cap=caps[0], closure_cap=caps[1])
    return [s.members for s in draws]


def approx_sample_law(G: BipartiteGraph, alpha, lam, epsilon, attested: bool = False,
                      size_cap: int = SIZE_CAP) -> Distribution:
    """Exact law of ``approx_sample`` given the truncation (float side weights)."""
    res = approx_logZ(G, alpha, lam, epsilon, attested=attested, size_cap=size_cap)
    if G.n > MU_VERTEX_LIMIT:
        raise SizeGuardError("explicit law needs |V| <= 20")
    pX, pY = side_weights(G, res)
    sc, cc = _caps(G, "X", size_cap)
    law = mu_hat_law(G, res.lam, side_weights=(Fraction(pX), Fraction(pY)),
                     size_cap=sc, closure_cap=cc)
    return Distribution({m: float(p) for m, p in law.items()}, G)


def sample_tv_to_mu(G: BipartiteGraph, alpha, lam, epsilon, draws: int, seed: int = 0) -> dict:
    """Empirical and exact TV distance of the approximate sampler to the hard-core measure."""
    from collections import Counter

    mu = exact_mu(G, lam)
    sample = Counter(approx_sample(G, alpha, lam, epsilon, seed=seed, n=draws))
    emp = Distribution.empirical(sample, G)
    law = approx_sample_law(G, alpha, lam, epsilon)
    sigma = math.sqrt(len(mu.probs) / (4 * draws))
    return {"empirical_tv": tv_distance(emp, mu), "law_tv": tv_distance(law, mu),
            "noise_sigma": sigma, "draws": draws, "seed": seed}


def epsilon_budget_report(G: BipartiteGraph, lam, k_max: int, oracle: bool = True,
                          size_cap: int = SIZE_CAP) -> dict:
    """For each k, the per-side partial sums, the last shell, and the error against exact Z."""
    lam = as_activity(lam)
    rows = []
    sides = {s: side_expansion(G, s, lam, 1.0, size_cap=size_cap, fixed_k=k_max) for s in ("X", "Y")}
    logZ = frac_log(exact_Z(G, lam)) if oracle and G.n <= Z_VERTEX_LIMIT else None
    empty = all(not any(e.L) for e in sides.values())
    for k in range(1, k_max + 1):
        TX = float(sum(sides["X"].L[:k], Fraction(0)))
        TY = float(sum(sides["Y"].L[:k], Fraction(0)))
        est = combine(G, lam, TX, TY)
        row = {"k": k, "T_X": TX, "T_Y": TY,
               "last_shell_X": abs(float(sides["X"].L[k - 1])),
               "last_shell_Y": abs(float(sides["Y"].L[k - 1])), "logZ_estimate": est}
        if logZ is not None:
            row["abs_error"] = abs(est - logZ)
        rows.append(row)
    return {"lambda": float(lam), "k_max": k_max, "oracle_logZ": logZ,
            "no_polymers": empty, "rows": rows}
