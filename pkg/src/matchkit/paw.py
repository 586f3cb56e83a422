"""PushAndWaterfill for unweighted matching with integral advice."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import ArrivalEvent, DualCertificate, GraphInstance, RunError, RunResult, run_policy
from .numerics import PenaltyParams, c_paw, g_c_integral, g_r_integral, r_paw


def waterfill(levels: np.ndarray, amount: float) -> tuple[np.ndarray, float]:
    """Exact unweighted waterfilling of ``amount`` onto ``levels``.

    Returns the fills and the common level, which never exceeds 1.
    """
    d = np.asarray(levels, dtype=float)
    if d.size == 0 or amount <= 0.0:
        return np.zeros_like(d), float(d.min()) if d.size else 0.0
    s = np.sort(d)
    k = np.arange(1, s.size + 1)
    # level reached when the lowest k vertices share the amount
    cand = (amount + np.cumsum(s)) / k
    nxt = np.append(s[1:], np.inf)
    j = int(np.argmax(cand <= nxt))
    level = min(float(cand[j]), 1.0)
    return np.maximum(level - d, 0.0), level


@dataclass
class PawState:
    lam: float
    d: np.ndarray
    alpha_r: np.ndarray = None
    alpha_c: np.ndarray = None
    beta_r: list = field(default_factory=list)
    beta_c: list = field(default_factory=list)

    def __post_init__(self):
        self.params = PenaltyParams(self.lam)
        n = len(self.d)
        self.alpha_r = np.zeros(n) if self.alpha_r is None else self.alpha_r
        self.alpha_c = np.zeros(n) if self.alpha_c is None else self.alpha_c

    def _credit(self, u, lo, hi, acc):
        if hi <= lo:
            return
        ir = float(g_r_integral(lo, hi, self.params))
        ic = float(g_c_integral(lo, hi, self.params))
        self.alpha_r[u] += ir
        self.alpha_c[u] += ic
        acc[0] += (hi - lo) - ir
        acc[1] += (hi - lo) - ic


def integral_advice(advice: Mapping[int, float]):
    """The advised vertex of an integral advice map, or ``None``."""
    return ArrivalEvent(tuple(advice), advice).advised_vertex()


def paw_step(state: PawState, neighbors, advice: Mapping[int, float]) -> np.ndarray:
    nb = np.asarray(neighbors, dtype=int)
    target = integral_advice(advice)
    x = np.zeros(nb.size)
    acc = [0.0, 0.0]
    if target is not None and target in set(nb.tolist()):
        i = int(np.flatnonzero(nb == target)[0])
        lo = state.d[target]
        tau = max(0.0, state.lam - lo)
        if tau > 0.0:
            state._credit(target, lo, lo + tau, acc)
            state.d[target] = lo + tau
            x[i] = tau
    lo = state.d[nb]
    fill, _ = waterfill(lo, 1.0 - x.sum())
    if fill.any():
        hi = lo + fill
        ir = g_r_integral(lo, hi, state.params)
        ic = g_c_integral(lo, hi, state.params)
        state.alpha_r[nb] += ir
        state.alpha_c[nb] += ic
        acc[0] += float(fill.sum() - ir.sum())
        acc[1] += float(fill.sum() - ic.sum())
        state.d[nb] = hi
    x += fill
    state.beta_r.append(acc[0])
    state.beta_c.append(acc[1])
    return x


class PawPolicy:
    name = "paw"

    def __init__(self, lam: float):
        self.lam = float(lam)
        self.state = None

    def start(self, n_offline, weights):
        if weights is not None and np.any(np.asarray(weights) != 1.0):
            raise RunError("PushAndWaterfill handles unweighted instances only")
        self.state = PawState(self.lam, np.zeros(n_offline))

    def step(self, neighbors, advice):
        return paw_step(self.state, neighbors, advice)

    @property
    def certificate(self):
        return DualCertificate(self.state.alpha_r.copy(), np.array(self.state.beta_r), "PAW-robust")

    @property
    def certificate_c(self):
        return DualCertificate(self.state.alpha_c.copy(), np.array(self.state.beta_c), "PAW-consistent")


def paw_run(g: GraphInstance, lam: float) -> RunResult:
    if not g.unweighted:
        raise RunError("PushAndWaterfill handles unweighted instances only")
    for ev in g.arrivals:
        ev.advised_vertex()
    policy = PawPolicy(lam)
    res = run_policy(policy, g)
    res.extra["certificate_c"] = policy.certificate_c
    res.extra["state"] = policy.state
    return res


@dataclass
class PawCertReport:
    gap_r: float
    gap_c: float
    edge_min: float
    advised_min: float
    r_target: float
    c_target: float

    @property
    def relative_gap(self) -> float:
        return max(self.gap_r, self.gap_c)

    @property
    def passed(self) -> bool:
        return (self.relative_gap <= 1e-8 and self.edge_min >= self.r_target - 1e-6
                and self.advised_min >= self.c_target - 1e-6)

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["passed"] = self.passed
        return d


def paw_certify(result: RunResult, g: GraphInstance, lam: float) -> PawCertReport:
    """Relative equality gaps and feasibility minima of both PAW duals."""
    cr, cc = result.certificate, result.extra.get("certificate_c")
    if cr is None or cc is None:
        raise ValueError("run result lacks PAW certificates")
    val = max(result.value, 1e-300)
    gap_r = abs(result.value - cr.objective) / val
    gap_c = abs(result.value - cc.objective) / val
    edge_min = advised_min = np.inf
    for v, ev in enumerate(g.arrivals):
        if ev.neighborhood:
            nb = np.array(ev.neighborhood)
            edge_min = min(edge_min, float((cr.alpha[nb] + cr.beta[v]).min()))
        a = ev.advised_vertex()
        if a is not None and a in ev.neighborhood:
            advised_min = min(advised_min, float(cc.alpha[a] + cc.beta[v]))
    return PawCertReport(gap_r, gap_c, edge_min, advised_min, r_paw(lam), c_paw(lam))
