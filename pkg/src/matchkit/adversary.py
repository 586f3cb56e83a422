"""Adaptive hard instances for robustness and consistency.

Both adversaries use ``2n`` offline vertices and ``2n`` online vertices.
Offline vertices keep fixed ids; a position array ``pos2id`` maps the
adversary's running labels ``u_1..u_2n`` (0-based here) to those ids and
is re-sorted by the algorithm's levels after each arrival.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .core import ArrivalEvent, GraphInstance, TOL


class AdversaryAbort(RuntimeError):
    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass
class AdversaryTranscript:
    which: str
    n: int
    instance: GraphInstance
    permutations: list = field(default_factory=list)
    levels: np.ndarray = None
    alg_value: float = 0.0

    @property
    def opt(self) -> int:
        return 2 * self.n

    @property
    def ratio(self) -> float:
        return self.alg_value / self.opt


class _Driver:
    def __init__(self, policy, n: int, which: str):
        self.policy = policy
        self.n = n
        self.which = which
        self.levels = np.zeros(2 * n)
        self.pos2id = np.arange(2 * n)
        self.arrivals = []
        self.perms = [self.pos2id.copy()]
        policy.start(2 * n, np.ones(2 * n))

    def feed(self, lo: int, hi: int, advised: int | None):
        """Arrival adjacent to positions ``lo..hi`` inclusive."""
        ids = np.sort(self.pos2id[lo: hi + 1])
        advice = {} if advised is None else {int(self.pos2id[advised]): 1.0}
        x = np.asarray(self.policy.step(ids, advice), dtype=float)
        bad = []
        if x.shape != ids.shape:
            bad.append(f"allocation shape {x.shape} for {ids.size} neighbours")
        else:
            if np.any(x < -TOL):
                bad.append(f"negative allocation at arrival {len(self.arrivals)}")
            if x.sum() > 1.0 + TOL:
                bad.append(f"online vertex {len(self.arrivals)} sends {x.sum()!r}")
            over = ids[self.levels[ids] + x > 1.0 + TOL]
            if over.size:
                bad.append(f"offline vertices {over.tolist()} overfilled")
        if bad:
            raise AdversaryAbort(bad)
        self.levels[ids] += x
        self.arrivals.append(ArrivalEvent(tuple(ids.tolist()), advice))

    def reorder(self, lo: int, hi: int, descending: bool):
        seg = self.pos2id[lo: hi + 1]
        key = -self.levels[seg] if descending else self.levels[seg]
        self.pos2id[lo: hi + 1] = seg[np.argsort(key, kind="stable")]
        self.perms.append(self.pos2id.copy())

    def common_phase(self):
        n = self.n
        # label u_t is position t-1
        for t in range(1, n + 1):
            self.feed(t - 1, 2 * n - t, t - 1)
            if t + 1 <= 2 * n - t + 1:
                self.reorder(t, 2 * n - t, descending=True)
                seg = self.levels[self.pos2id[t: 2 * n - t + 1]]
                assert np.all(np.diff(seg) <= 0.0), "ordering invariant broken"

    def transcript(self) -> AdversaryTranscript:
        g = GraphInstance(2 * self.n, (1.0,) * (2 * self.n), tuple(self.arrivals))
        return AdversaryTranscript(self.which, self.n, g, self.perms, self.levels.copy(),
                                   float(self.levels.sum()))


def run_adversary_R(policy, n: int) -> AdversaryTranscript:
    """Robustness adversary: after the common phase, advice goes silent and
    the remaining arrivals only see the least-filled advised side."""
    if n < 1:
        raise ValueError("n must be at least 1")
    drv = _Driver(policy, n, "R")
    drv.common_phase()
    drv.reorder(0, n - 1, descending=False)
    for t in range(n + 1, 2 * n + 1):
        drv.feed(t - n - 1, n - 1, None)
        drv.reorder(t - n - 1, n - 1, descending=False)
    return drv.transcript()


def run_adversary_C(policy, n: int) -> AdversaryTranscript:
    """Consistency adversary: the advice completes a perfect matching."""
    if n < 1:
        raise ValueError("n must be at least 1")
    drv = _Driver(policy, n, "C")
    drv.common_phase()
    for t in range(n + 1, 2 * n + 1):
        drv.feed(t - 1, t - 1, t - 1)
    return drv.transcript()


def empirical_tradeoff(family: Callable[[float], object], n: int,
                       lambda_grid: Iterable[float]) -> list[tuple[float, float, float]]:
    """``(lambda, r_hat, c_hat)`` for a lambda-indexed policy factory."""
    rows = []
    for lam in lambda_grid:
        r = run_adversary_R(family(lam), n).ratio
        c = run_adversary_C(family(lam), n).ratio
        rows.append((float(lam), r, c))
    return rows
