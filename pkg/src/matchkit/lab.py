"""LearningAugmentedBalance for vertex-weighted fractional matching."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import DualCertificate, GraphInstance, RunError, RunResult, TOL, run_policy
from .numerics import PenaltyParams, c_lab, f, f1, level_filler, r_lab

_LEVEL_TOL = 1e-13
_MAX_ITER = 200
_ONE = 1.0 + 1e-12


@dataclass
class LevelSolve:
    """Result of one water-level search."""

    x: np.ndarray
    level: float
    saturated: bool


def _waterfill_by_level(X, scale, cap, amount):
    """Raise the lowest levels first until ``amount`` is spent.

    ``x_u = scale_u * (L - X_u)^+`` capped at ``cap_u``; assumes
    ``amount < sum(cap)``.
    """
    x = np.zeros_like(X)
    live = cap > 0
    if not live.any() or amount <= 0:
        return x
    idx = np.flatnonzero(live)
    order = idx[np.argsort(X[idx], kind="stable")]
    Xs, ss = X[order], scale[order]
    # piecewise linear: on [Xs[k], Xs[k+1]] the first k+1 vertices rise
    lo = 0.0
    L = Xs[-1]
    acc_s = 0.0
    for k in range(len(order)):
        acc_s += ss[k]
        nxt = Xs[k + 1] if k + 1 < len(order) else np.inf
        need = acc_s * (nxt - Xs[k])
        if lo + need >= amount:
            L = Xs[k] + (amount - lo) / acc_s
            break
        lo += need
    x[order] = np.minimum(ss * np.maximum(L - Xs, 0.0), cap[order])
    # capped vertices cannot absorb; top up the rest proportionally
    short = amount - x.sum()
    if short > 1e-15:
        room = cap - x
        x += room * (short / room.sum())
    return x


def solve_level(w, A, X0, p: PenaltyParams, scale=None) -> LevelSolve:
    """Allocate one unit of water to the neighbours at the highest potential.

    The potential of neighbour ``u`` is ``w_u (1 - f(A_u, X_u))``; pushing
    ``x_u`` into it raises its level by ``x_u / scale_u``.  Returns amounts
    summing to ``min(1, residual capacity)`` and the common final potential.
    """
    w = np.asarray(w, dtype=float)
    A = np.asarray(A, dtype=float)
    X0 = np.asarray(X0, dtype=float)
    scale = np.ones_like(w) if scale is None else np.asarray(scale, dtype=float)
    cap = scale * np.maximum(1.0 - X0, 0.0)
    if cap.sum() <= 1.0:
        return LevelSolve(cap, 0.0, False)

    fill = level_filler(w, A, X0, p)

    def alloc(level):
        return scale * fill(level)

    x0 = alloc(0.0)
    s0 = x0.sum()
    if s0 <= _ONE:
        if s0 >= 1.0:
            return LevelSolve(x0 / s0, 0.0, True)
        # zero-potential region: any split is optimal; continue greedily by level
        x = x0 + _waterfill_by_level(X0 + x0 / scale, scale, cap - x0, 1.0 - s0)
        return LevelSolve(x, 0.0, True)

    top = float(w.max())
    lo, hi, x_lo, x_hi = _bracket(alloc, _breakpoints(w, A, X0, p, top), x0)
    s_lo, s_hi = x_lo.sum(), x_hi.sum()
    # the mass curve can only jump at breakpoints; probe both ends for one
    delta = _LEVEL_TOL * max(1.0, top)
    if hi - lo > 2.0 * delta:
        x_probe = alloc(hi - delta)
        if x_probe.sum() > _ONE:
            lo, x_lo, s_lo = hi - delta, x_probe, x_probe.sum()
        else:
            x_probe = alloc(lo + delta)
            if x_probe.sum() <= _ONE:
                hi, x_hi, s_hi = lo + delta, x_probe, x_probe.sum()
    # Illinois regula falsi on the continuous piece inside the bracket;
    # aiming slightly above one keeps the crossing transversal
    F_lo, F_hi = s_lo - _ONE, s_hi - _ONE
    last = 0
    for it in range(_MAX_ITER):
        if hi - lo <= delta or s_hi >= 1.0:
            break
        mid = lo + (hi - lo) * F_lo / (F_lo - F_hi)
        if not lo < mid < hi or it % 8 == 7:
            mid = 0.5 * (lo + hi)
        x_mid = alloc(mid)
        s_mid = x_mid.sum()
        if s_mid > _ONE:
            lo, x_lo, s_lo, F_lo = mid, x_mid, s_mid, s_mid - _ONE
            if last == 1:
                F_hi *= 0.5
            last = 1
        else:
            hi, x_hi, s_hi, F_hi = mid, x_mid, s_mid, s_mid - _ONE
            if last == -1:
                F_lo *= 0.5
            last = -1
    if s_hi >= 1.0:
        return LevelSolve(x_hi / s_hi, hi, True)
    theta = (1.0 - s_hi) / (s_lo - s_hi)
    return LevelSolve(x_hi + theta * (x_lo - x_hi), hi, True)


def _breakpoints(w, A, X0, p, top):
    """Levels at which some neighbour's fill starts moving or jumps.

    Between consecutive breakpoints the set of receiving neighbours is fixed,
    so the mass curve is smooth there.
    """
    pts = [w * (1.0 - f(A, np.minimum(X0, 1.0), p))]
    ahead = X0 < A
    if ahead.any():
        Aa, wa = A[ahead], w[ahead]
        pts.append(wa * (1.0 - f1(np.minimum(Aa, 1.0), p)))
        pts.append(wa * (1.0 - f(Aa, Aa, p)))
    c = np.unique(np.clip(np.concatenate(pts + [np.array([0.0, top])]), 0.0, top))
    return c


def _bracket(alloc, cands, x0):
    """Adjacent candidates ``lo < hi`` with mass above 1 at ``lo`` and not at ``hi``."""
    i, j = 0, len(cands) - 1
    x_i, x_j = x0, alloc(cands[j])
    while j - i > 1:
        k = (i + j) // 2
        x_k = alloc(cands[k])
        if x_k.sum() > _ONE:
            i, x_i = k, x_k
        else:
            j, x_j = k, x_k
    return float(cands[i]), float(cands[j]), x_i, x_j


@dataclass
class LabState:
    """Running state of one LAB execution."""

    weights: np.ndarray
    params: PenaltyParams
    X: np.ndarray = None
    A: np.ndarray = None
    alpha: np.ndarray = None
    beta: list = field(default_factory=list)
    # alpha of each neighbour at the end of the arrival, for the strict check
    alpha_at: list = field(default_factory=list)

    def __post_init__(self):
        n = len(self.weights)
        self.X = np.zeros(n) if self.X is None else self.X
        self.A = np.zeros(n) if self.A is None else self.A
        self.alpha = np.zeros(n) if self.alpha is None else self.alpha

    @classmethod
    def fresh(cls, weights, lam: float) -> LabState:
        return cls(np.asarray(weights, dtype=float), PenaltyParams(lam))

    def certificate(self, mode="LAB") -> DualCertificate:
        return DualCertificate(self.alpha.copy(), np.array(self.beta, dtype=float), mode)


def lab_step(state: LabState, neighbors, advice: Mapping[int, float]) -> np.ndarray:
    """Process one arrival; returns the amounts sent to ``neighbors``."""
    nb = np.asarray(neighbors, dtype=int)
    for u, a in advice.items():
        state.A[u] += a
        if state.A[u] > 1.0 + TOL:
            raise RunError(f"advice overfills offline vertex {u}: {state.A[u]!r}")
    if nb.size == 0:
        state.beta.append(0.0)
        state.alpha_at.append(np.zeros(0))
        return np.zeros(0)
    w = state.weights[nb]
    A = np.minimum(state.A[nb], 1.0)
    sol = solve_level(w, A, state.X[nb], state.params)
    x = sol.x
    # equality of primal and dual gain: each unit pays w_u, split into level and rest
    beta = sol.level if sol.saturated else 0.0
    state.alpha[nb] += x * (w - beta)
    state.X[nb] = np.minimum(state.X[nb] + x, 1.0)
    state.beta.append(beta)
    state.alpha_at.append(state.alpha[nb].copy())
    return x


class LabPolicy:
    """LAB behind the generic ``start``/``step`` interface."""

    name = "lab"

    def __init__(self, lam: float):
        self.lam = float(lam)
        self.state = None

    def start(self, n_offline, weights):
        self.state = LabState.fresh(np.asarray(weights, dtype=float), self.lam)

    def step(self, neighbors, advice):
        return lab_step(self.state, neighbors, advice)

    @property
    def certificate(self):
        return self.state.certificate()


def lab_run(g: GraphInstance, lam: float) -> RunResult:
    policy = LabPolicy(lam)
    res = run_policy(policy, g)
    res.extra["state"] = policy.state
    return res


@dataclass
class CertReport:
    equality_gap: float
    relative_gap: float
    edge_min: float
    consistency_min: float
    r_target: float
    c_target: float
    edge_min_final: float = float("nan")

    @property
    def passed(self) -> bool:
        ok_gap = self.relative_gap <= 1e-8
        ok_edge = self.edge_min >= self.r_target - 1e-6
        ok_cons = self.consistency_min >= self.c_target - 1e-6
        return ok_gap and ok_edge and ok_cons

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["passed"] = self.passed
        return d


def _gap(value, cert):
    gap = abs(value - cert.objective)
    return gap, gap / max(abs(value), 1e-300) if value else gap


def lab_certify(result: RunResult, g: GraphInstance, lam: float) -> CertReport:
    """Check equality, approximate dual feasibility and consistency of LAB's duals."""
    cert = result.certificate
    if cert is None:
        raise ValueError("run result carries no certificate")
    state = result.extra.get("state")
    w = g.weight_array()
    gap, rel = _gap(result.value, cert)

    edge_min = edge_final = np.inf
    for v, ev in enumerate(g.arrivals):
        nb = np.array(ev.neighborhood, dtype=int)
        if nb.size == 0:
            continue
        pos = w[nb] > 0
        if not pos.any():
            continue
        final = (cert.alpha[nb] + cert.beta[v])[pos] / w[nb][pos]
        edge_final = min(edge_final, final.min())
        if state is not None:
            strict = (state.alpha_at[v] + cert.beta[v])[pos] / w[nb][pos]
            edge_min = min(edge_min, strict.min())
    if state is None:
        edge_min = edge_final

    A = g.advice_levels()
    credit = cert.alpha.copy()
    for v, ev in enumerate(g.arrivals):
        for u, a in ev.advice.items():
            credit[u] += a * cert.beta[v]
    mask = (A > 0) & (w > 0)
    cons = float(np.min(credit[mask] / (w[mask] * A[mask]))) if mask.any() else np.inf
    return CertReport(gap, rel, float(edge_min), cons, r_lab(lam), c_lab(lam), float(edge_final))
