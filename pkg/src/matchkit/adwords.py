"""Fractional AdWords with advice, and randomized rounding under small bids."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from .core import (HEADER, TOL, Allocation, DualCertificate, ParseError, RunResult,
                   _check_advice, _content_lines, _fmt, _parse_header, _parse_pairs,
                   _parse_vector, _split_arrival)
from .lab import solve_level
from .numerics import PenaltyParams, c_lab, r_lab


@dataclass(frozen=True)
class Impression:
    bids: Mapping[int, float]
    advice: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "bids", {int(u): float(b) for u, b in sorted(self.bids.items())})
        object.__setattr__(self, "advice", {int(u): float(a) for u, a in sorted(self.advice.items())})


@dataclass(frozen=True)
class AdwordsInstance:
    budgets: tuple[float, ...]
    impressions: tuple[Impression, ...]

    def __post_init__(self):
        object.__setattr__(self, "budgets", tuple(float(b) for b in self.budgets))
        object.__setattr__(self, "impressions", tuple(self.impressions))
        n = len(self.budgets)
        if any(b <= 0 for b in self.budgets):
            raise ValueError("budgets must be positive")
        for t, imp in enumerate(self.impressions):
            if any(not 0 <= u < n for u in imp.bids) or any(b < 0 for b in imp.bids.values()):
                raise ValueError(f"impression {t}: bad bid")
            if set(imp.advice) - set(imp.bids):
                raise ValueError(f"impression {t}: advice on advertisers without a bid")
            if sum(imp.advice.values()) > 1.0 + TOL or any(a < 0 for a in imp.advice.values()):
                raise ValueError(f"impression {t}: advice is not a distribution")
        if np.any(self.advice_fractions() > 1.0 + TOL):
            raise ValueError("advice overspends a budget")

    @property
    def n_advertisers(self) -> int:
        return len(self.budgets)

    def advice_fractions(self) -> np.ndarray:
        A = np.zeros(self.n_advertisers)
        for imp in self.impressions:
            for u, a in imp.advice.items():
                A[u] += imp.bids[u] * a
        return A / np.array(self.budgets)

    def bid_ratio(self) -> float:
        """Largest bid-to-budget ratio; the small-bids parameter."""
        B = self.budgets
        return max((b / B[u] for imp in self.impressions for u, b in imp.bids.items()), default=0.0)

    def advice_value(self) -> float:
        return float(self.advice_fractions() @ np.array(self.budgets))


@dataclass
class AdwordsState:
    budgets: np.ndarray
    params: PenaltyParams
    X: np.ndarray = None
    A: np.ndarray = None
    alpha: np.ndarray = None
    beta: list = field(default_factory=list)
    alpha_at: list = field(default_factory=list)

    def __post_init__(self):
        n = len(self.budgets)
        self.X = np.zeros(n)
        self.A = np.zeros(n)
        self.alpha = np.zeros(n)


def adwords_step(state: AdwordsState, imp: Impression) -> tuple[np.ndarray, np.ndarray]:
    """Split one impression; returns advertiser ids and fractions."""
    for u, a in imp.advice.items():
        state.A[u] += imp.bids[u] * a / state.budgets[u]
    us = np.array([u for u, b in imp.bids.items() if b > 0], dtype=int)
    if us.size == 0:
        state.beta.append(0.0)
        state.alpha_at.append(np.zeros(0))
        return us, np.zeros(0)
    b = np.array([imp.bids[u] for u in us])
    B = state.budgets[us]
    sol = solve_level(b, np.minimum(state.A[us], 1.0), state.X[us], state.params, scale=B / b)
    x = sol.x
    beta = sol.level if sol.saturated else 0.0
    state.alpha[us] += x * (b - beta)
    state.X[us] = np.minimum(state.X[us] + x * b / B, 1.0)
    state.beta.append(beta)
    state.alpha_at.append(state.alpha[us].copy())
    return us, x


def adwords_frac_run(inst: AdwordsInstance, lam: float) -> RunResult:
    """Fractional run; ``allocation.rows[v]`` holds (advertisers, fractions)."""
    state = AdwordsState(np.array(inst.budgets), PenaltyParams(lam))
    alloc = Allocation(inst.n_advertisers)
    revenue = 0.0
    for imp in inst.impressions:
        us, x = adwords_step(state, imp)
        alloc.rows.append((us, x))
        revenue += float(sum(imp.bids[u] * xi for u, xi in zip(us.tolist(), x)))
    alloc.levels = state.X.copy()
    cert = DualCertificate(state.alpha.copy(), np.array(state.beta), "ADWORDS")
    return RunResult(revenue, alloc, cert, {"state": state})


@dataclass
class AdwordsCertReport:
    relative_gap: float
    edge_min: float
    consistency_min: float
    r_target: float
    c_target: float

    @property
    def passed(self) -> bool:
        return (self.relative_gap <= 1e-8 and self.edge_min >= self.r_target - 1e-6
                and self.consistency_min >= self.c_target - 1e-6)


def adwords_certify(result: RunResult, inst: AdwordsInstance, lam: float) -> AdwordsCertReport:
    cert, state = result.certificate, result.extra["state"]
    B = np.array(inst.budgets)
    gap = abs(result.value - cert.objective) / max(result.value, 1e-300)
    edge_min = np.inf
    for v, imp in enumerate(inst.impressions):
        us = np.array([u for u, b in imp.bids.items() if b > 0], dtype=int)
        if us.size:
            b = np.array([imp.bids[u] for u in us])
            edge_min = min(edge_min, float(np.min((b / B[us] * state.alpha_at[v] + cert.beta[v]) / b)))
    credit = cert.alpha.copy()
    for v, imp in enumerate(inst.impressions):
        for u, a in imp.advice.items():
            credit[u] += a * cert.beta[v]
    spend = inst.advice_fractions() * B
    mask = spend > 0
    cons = float(np.min(credit[mask] / spend[mask])) if mask.any() else np.inf
    return AdwordsCertReport(gap, edge_min, cons, r_lab(lam), c_lab(lam))


# -- rounding --------------------------------------------------------------------

def rounding_gamma(eps: float) -> float:
    """Sampling scale ``1 - eps - sqrt(eps ln(1/eps))``."""
    if not 0.0 < eps < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    return 1.0 - eps - math.sqrt(eps * math.log(1.0 / eps))


EPS_MAX = brentq(rounding_gamma, 1e-3, 0.5, xtol=1e-15)


def rounding_bound(eps: float) -> float:
    return 1.0 - 3.0 * math.sqrt(eps * math.log(1.0 / eps))


def _trace_matrix(inst: AdwordsInstance, frac_trace: Sequence):
    m, n = len(inst.impressions), inst.n_advertisers
    P = np.zeros((m, n))
    bids = np.zeros((m, n))
    for v, (imp, (us, x)) in enumerate(zip(inst.impressions, frac_trace)):
        P[v, np.asarray(us, dtype=int)] = x
        for u, b in imp.bids.items():
            bids[v, u] = b
    if np.any(P.sum(axis=1) > 1.0 + TOL):
        raise ValueError("fractional trace sends more than one unit of an impression")
    return P, bids


def _check_eps(inst, eps):
    gamma = rounding_gamma(eps)
    if not 0.0 < gamma < 1.0 - eps:
        raise ValueError(f"epsilon {eps} too large: need epsilon < {EPS_MAX:.4f}")
    if inst.bid_ratio() > eps + 1e-12:
        raise ValueError(f"bids reach {inst.bid_ratio():.4g} of a budget, above epsilon {eps}")
    return gamma


def adwords_round_many(inst: AdwordsInstance, frac_trace, eps: float, seeds) -> tuple[np.ndarray, np.ndarray]:
    """Round the fractional trace once per seed.

    Returns realised revenues and the largest spend-to-budget ratio seen per
    seed.  Seed ``s`` draws ``default_rng(s).random(m)`` and impression
    ``v`` goes to the advertiser whose cumulative band ``gamma * x`` holds
    the draw, if that advertiser can still pay.
    """
    gamma = _check_eps(inst, eps)
    P, bids = _trace_matrix(inst, frac_trace)
    seeds = list(seeds)
    m, n = P.shape
    U = np.array([np.random.default_rng(s).random(m) for s in seeds]).reshape(len(seeds), m)
    B = np.array(inst.budgets)
    spent = np.zeros((len(seeds), n))
    revenue = np.zeros(len(seeds))
    rows = np.arange(len(seeds))
    for v in range(m):
        edges = np.cumsum(gamma * P[v])
        pick = np.searchsorted(edges, U[:, v], side="right")
        hit = pick < n
        u = np.where(hit, pick, 0)
        bid = bids[v, u]
        ok = hit & (spent[rows, u] + bid <= B[u])
        spent[rows[ok], u[ok]] += bid[ok]
        revenue[ok] += bid[ok]
    return revenue, (spent / B).max(axis=1, initial=0.0)


def adwords_round(inst: AdwordsInstance, frac_trace, eps: float, seed: int) -> float:
    return float(adwords_round_many(inst, frac_trace, eps, [seed])[0][0])


# -- file format -----------------------------------------------------------------

def serialize_adwords(inst: AdwordsInstance) -> str:
    lines = [HEADER, f"offline {inst.n_advertisers} adwords",
             "budgets " + " ".join(_fmt(b) for b in inst.budgets)]
    for k, imp in enumerate(inst.impressions):
        line = f"arrival {k}: b:" + "".join(f" {u}={_fmt(b)}" for u, b in imp.bids.items())
        if imp.advice:
            line += " | a:" + "".join(f" {u}={_fmt(a)}" for u, a in imp.advice.items())
        lines.append(line)
    return "\n".join(lines) + "\n"


def parse_adwords(text: str) -> AdwordsInstance:
    lines = _content_lines(text)
    n, _ = _parse_header(lines, ("adwords",))
    budgets = _parse_vector(lines, "budgets", n)
    if any(b <= 0 for b in budgets):
        raise ParseError(0, "budgets must be positive")
    imps = []
    for lineno, line in lines:
        first, rest = _split_arrival(line, lineno, len(imps))
        bids, advice = None, {}
        for sec in [first] + rest:
            tag, _, body = sec.partition(":")
            tag = tag.strip()
            if tag == "b":
                bids = _parse_pairs(body, lineno, n)
            elif tag == "a":
                advice = _parse_pairs(body, lineno, n)
            elif sec:
                raise ParseError(lineno, f"unknown section {tag!r}")
        bids = bids or {}
        if any(b < 0 for b in bids.values()):
            raise ParseError(lineno, "negative bid")
        _check_advice(advice, list(bids), lineno)
        imps.append(Impression(bids, advice))
    try:
        return AdwordsInstance(tuple(budgets), tuple(imps))
    except ValueError as exc:
        raise ParseError(0, str(exc)) from None


def gen_adwords(n_advertisers: int, n_impressions: int, eps: float, seed: int = 0,
                density: float = 0.6, advice_noise: float = 0.3) -> AdwordsInstance:
    """Random small-bids instance with a feasible fractional advice.

    Budgets are 1; bids are uniform in ``[eps/2, eps]``.  Advice follows the
    highest bid with probability ``1 - advice_noise`` and a random bidder
    otherwise, trimmed so no budget is overspent.
    """
    rng = np.random.default_rng(seed)
    left = np.ones(n_advertisers)
    imps = []
    for _ in range(n_impressions):
        mask = rng.random(n_advertisers) < density
        if not mask.any():
            mask[rng.integers(n_advertisers)] = True
        us = np.flatnonzero(mask)
        b = rng.uniform(eps / 2, eps, us.size)
        bids = dict(zip(us.tolist(), b.tolist()))
        j = int(np.argmax(b)) if rng.random() >= advice_noise else int(rng.integers(us.size))
        u = int(us[j])
        a = min(1.0, left[u] / bids[u])
        advice = {}
        if a > 0:
            left[u] -= a * bids[u]
            advice = {u: a}
        imps.append(Impression(bids, advice))
    return AdwordsInstance((1.0,) * n_advertisers, tuple(imps))
