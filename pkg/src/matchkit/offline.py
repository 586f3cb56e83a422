"""Offline optimum, noisy predictions, advice generation and instance generators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import ArrivalEvent, GraphInstance, ParseError


@dataclass(frozen=True)
class NoiseModel:
    gamma: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5 + 1e-12))


def _max_weight_pairs(weights, cols, available=None):
    """Maximum-weight matching between offline vertices and the given columns.

    ``cols`` is a list of neighbourhoods; returns ``(value, pairs)`` with
    pairs ``(u, j)`` meaning offline ``u`` matched to column ``j``.
    """
    w = np.asarray(weights, dtype=float)
    n = len(w)
    if n == 0 or not cols:
        return 0.0, []
    M = np.zeros((n, len(cols)))
    E = np.zeros((n, len(cols)), dtype=bool)
    for j, nb in enumerate(cols):
        if len(nb):
            idx = np.asarray(nb, dtype=int)
            E[idx, j] = True
    if available is not None:
        E &= np.asarray(available, dtype=bool)[:, None]
    M[E] = np.broadcast_to(w[:, None], M.shape)[E]
    rows, colsel = linear_sum_assignment(M, maximize=True)
    pairs = [(int(u), int(j)) for u, j in zip(rows, colsel) if E[u, j] and w[u] > 0]
    return float(sum(w[u] for u, _ in pairs)), pairs


def opt_matching(g: GraphInstance):
    """Offline optimum ``(value, {online: offline})`` of the hindsight graph."""
    value, pairs = _max_weight_pairs(g.weights, [ev.neighborhood for ev in g.arrivals])
    return value, {j: u for u, j in pairs}


def perturb_graph(g: GraphInstance, noise: NoiseModel) -> GraphInstance:
    """Noisy prediction: each online vertex keeps a random ``1 - gamma`` share of
    its neighbours and gains a random ``gamma`` share of its non-neighbours."""
    rng = np.random.default_rng(noise.seed)
    everyone = np.arange(g.n_offline)
    arrivals = []
    for ev in g.arrivals:
        nb = np.array(ev.neighborhood, dtype=int)
        non = np.setdiff1d(everyone, nb, assume_unique=True)
        keep = rng.choice(nb, _round_half_up((1.0 - noise.gamma) * nb.size), replace=False)
        add = rng.choice(non, _round_half_up(noise.gamma * non.size), replace=False)
        arrivals.append(ArrivalEvent(tuple(np.concatenate([keep, add]).tolist())))
    return GraphInstance(g.n_offline, g.weights, tuple(arrivals))


def generate_advice(g: GraphInstance, noise: NoiseModel, seed: int | None = None):
    """Integral advice stream built from a noisy forecast of the future.

    At step ``t`` the true neighbourhood of ``t`` and the predicted ones of
    later arrivals are matched over the offline vertices the stream has not
    yet used; ``t``'s partner in that matching is emitted.
    """
    if seed is not None:
        noise = NoiseModel(noise.gamma, seed)
    pred = perturb_graph(g, noise)
    available = np.ones(g.n_offline, dtype=bool)
    stream = []
    for t, ev in enumerate(g.arrivals):
        cols = [ev.neighborhood] + [p.neighborhood for p in pred.arrivals[t + 1:]]
        _, pairs = _max_weight_pairs(g.weights, cols, available)
        match = [u for u, j in pairs if j == 0]
        if match:
            available[match[0]] = False
            stream.append({match[0]: 1.0})
        else:
            stream.append({})
    return stream


def gen_er(n: int, p: float, seed: int = 0) -> GraphInstance:
    """Erdos-Renyi bipartite graph with ``n`` vertices on each side."""
    rng = np.random.default_rng(seed)
    adj = rng.random((n, n)) < p
    arrivals = tuple(ArrivalEvent(tuple(np.flatnonzero(adj[:, v]).tolist())) for v in range(n))
    return GraphInstance(n, (1.0,) * n, arrivals)


def gen_ut(n: int) -> GraphInstance:
    """Upper-triangular instance: online ``i`` sees offline ``i..n-1``."""
    return GraphInstance(n, (1.0,) * n, tuple(ArrivalEvent(tuple(range(i, n))) for i in range(n)))


def gen_weights(g: GraphInstance, seed: int = 0) -> GraphInstance:
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.0, 1000.0, g.n_offline)
    return GraphInstance(g.n_offline, tuple(w.tolist()), g.arrivals)


def ingest_real(edge_list: str, seed: int = 0) -> GraphInstance:
    """Bipartite instance from an undirected edge list.

    Node ids are shuffled; the first half become offline vertices, the next
    half arrive online in shuffled order, and only crossing edges are kept.
    """
    edges = []
    for lineno, raw in enumerate(edge_list.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "%#":
            continue
        parts = line.split()
        if len(parts) < 2:
            raise ParseError(lineno, "expected two node ids")
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(lineno, f"non-integer node id in {line!r}") from None
        if a < 0 or b < 0:
            raise ParseError(lineno, "negative node id")
        edges.append((a, b))
    if not edges:
        return GraphInstance(0, (), ())
    ids = np.array(edges)
    if ids.min() >= 1:
        ids -= 1
    n = int(ids.max()) + 1
    perm = np.random.default_rng(seed).permutation(n)
    half = n // 2
    off_pos = np.full(n, -1)
    on_pos = np.full(n, -1)
    off_pos[perm[:half]] = np.arange(half)
    on_pos[perm[half: 2 * half]] = np.arange(half)
    nbrs = [set() for _ in range(half)]
    for a, b in ids:
        for x, y in ((a, b), (b, a)):
            if off_pos[x] >= 0 and on_pos[y] >= 0:
                nbrs[on_pos[y]].add(int(off_pos[x]))
    return GraphInstance(half, (1.0,) * half, tuple(ArrivalEvent(tuple(s)) for s in nbrs))
