"""Advice-free and advice-following baselines."""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from .core import GraphInstance, RunResult, run_policy
from .paw import waterfill


def balance_split(w, X0) -> np.ndarray:
    """One unit of water to the neighbours maximising ``w (1 - e^{X-1})``."""
    w = np.asarray(w, dtype=float)
    X0 = np.asarray(X0, dtype=float)
    room = np.maximum(1.0 - X0, 0.0)
    if room.sum() <= 1.0:
        return room
    if np.all(w == w[0]) and w[0] > 0:
        return waterfill(X0, 1.0)[0]
    live = w > 0

    def fill(level):
        z = np.zeros_like(w)
        with np.errstate(divide="ignore"):
            target = 1.0 + np.log1p(-np.minimum(level / w[live], 1.0))
        z[live] = np.clip(target - X0[live], 0.0, room[live])
        return z

    if fill(0.0).sum() <= 1.0:
        # only weightless neighbours remain; spread evenly by level
        z = fill(0.0)
        return z + waterfill(X0 + z, 1.0 - z.sum())[0]
    top = float(w.max())
    level = brentq(lambda l: fill(l).sum() - 1.0, 0.0, top, xtol=1e-15 * top, rtol=1e-15, maxiter=500)
    z = fill(level)
    return z / z.sum()


class BalancePolicy:
    name = "balance"

    def start(self, n_offline, weights):
        self.w = np.ones(n_offline) if weights is None else np.asarray(weights, dtype=float)
        self.X = np.zeros(n_offline)

    def step(self, neighbors, advice):
        nb = np.asarray(neighbors, dtype=int)
        if nb.size == 0:
            return np.zeros(0)
        x = balance_split(self.w[nb], self.X[nb])
        self.X[nb] += x
        return x


class GreedyPolicy:
    """Fill neighbours in order of decreasing weight, lower index first on ties."""

    name = "greedy"

    def start(self, n_offline, weights):
        self.w = np.ones(n_offline) if weights is None else np.asarray(weights, dtype=float)
        self.X = np.zeros(n_offline)

    def step(self, neighbors, advice):
        nb = np.asarray(neighbors, dtype=int)
        x = np.zeros(nb.size)
        left = 1.0
        for i in np.lexsort((nb, -self.w[nb])):
            if left <= 0.0:
                break
            take = min(left, max(1.0 - self.X[nb[i]], 0.0))
            x[i] = take
            left -= take
        self.X[nb] += x
        return x


class FollowAdvicePolicy:
    """Send exactly the advised amounts, trimmed to residual capacity.

    With ``complete=True`` the unused mass is waterfilled over the
    neighbourhood, giving a maximal fractional matching.
    """

    name = "advice"

    def __init__(self, complete: bool = False):
        self.complete = complete

    def start(self, n_offline, weights):
        self.X = np.zeros(n_offline)

    def step(self, neighbors, advice):
        nb = np.asarray(neighbors, dtype=int)
        a = np.array([advice.get(int(u), 0.0) for u in nb])
        x = np.minimum(a, np.maximum(1.0 - self.X[nb], 0.0))
        if self.complete and nb.size:
            x += waterfill(self.X[nb] + x, 1.0 - x.sum())[0]
        self.X[nb] += x
        return x


class CoinFlipPolicy:
    """Deterministic convex combination ``mix * advice + (1 - mix) * balance``."""

    name = "coinflip"

    def __init__(self, mix: float, complete: bool = False):
        if not 0.0 <= mix <= 1.0:
            raise ValueError("mix must lie in [0, 1]")
        self.mix = float(mix)
        self.advice = FollowAdvicePolicy(complete)
        self.balance = BalancePolicy()

    def start(self, n_offline, weights):
        self.advice.start(n_offline, weights)
        self.balance.start(n_offline, weights)

    def step(self, neighbors, advice):
        xa = self.advice.step(neighbors, advice)
        xb = self.balance.step(neighbors, advice)
        return self.mix * xa + (1.0 - self.mix) * xb


def balance_run(g: GraphInstance, unused_lambda=None) -> RunResult:
    return run_policy(BalancePolicy(), g)


def greedy_run(g: GraphInstance) -> RunResult:
    return run_policy(GreedyPolicy(), g)


def follow_advice_run(g: GraphInstance, complete: bool = False) -> RunResult:
    return run_policy(FollowAdvicePolicy(complete), g)


def coinflip_run(g: GraphInstance, mix: float, complete: bool = False) -> RunResult:
    return run_policy(CoinFlipPolicy(mix, complete), g)
