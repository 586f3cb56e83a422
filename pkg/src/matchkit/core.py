"""Instances, allocations, dual certificates and the instance file format."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import numpy as np

TOL = 1e-9
HEADER = "MATCHKIT v1"


class ParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class RunError(RuntimeError):
    """An algorithm was handed input it cannot process."""


@dataclass(frozen=True)
class ArrivalEvent:
    neighborhood: tuple[int, ...]
    advice: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "neighborhood", tuple(sorted(set(int(u) for u in self.neighborhood))))
        object.__setattr__(self, "advice", {int(u): float(a) for u, a in sorted(self.advice.items())})

    @property
    def advice_total(self) -> float:
        return sum(self.advice.values())

    def advised_vertex(self) -> int | None:
        """The single advised neighbour for integral advice, else ``None``.

        Raises :class:`RunError` when the advice is fractional.
        """
        nonzero = {u: a for u, a in self.advice.items() if a != 0.0}
        if not nonzero:
            return None
        if len(nonzero) != 1 or next(iter(nonzero.values())) != 1.0:
            raise RunError(f"non-integral advice {dict(self.advice)}")
        return next(iter(nonzero))


@dataclass(frozen=True)
class GraphInstance:
    n_offline: int
    weights: tuple[float, ...]
    arrivals: tuple[ArrivalEvent, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "arrivals", tuple(self.arrivals))
        if len(self.weights) != self.n_offline:
            raise ValueError("one weight per offline vertex required")
        if any(w < 0 or math.isnan(w) for w in self.weights):
            raise ValueError("weights must be nonnegative")
        for t, ev in enumerate(self.arrivals):
            bad = [u for u in ev.neighborhood if not 0 <= u < self.n_offline]
            if bad:
                raise ValueError(f"arrival {t}: offline index out of range {bad}")
            stray = set(ev.advice) - set(ev.neighborhood)
            if stray:
                raise ValueError(f"arrival {t}: advice on non-neighbours {sorted(stray)}")
            if any(not 0.0 <= a <= 1.0 + TOL for a in ev.advice.values()):
                raise ValueError(f"arrival {t}: advice value outside [0, 1]")
            if ev.advice_total > 1.0 + TOL:
                raise ValueError(f"arrival {t}: advice sums to {ev.advice_total!r} > 1")

    @property
    def n_online(self) -> int:
        return len(self.arrivals)

    @property
    def unweighted(self) -> bool:
        return all(w == 1.0 for w in self.weights)

    def weight_array(self) -> np.ndarray:
        return np.array(self.weights, dtype=float)

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for v, ev in enumerate(self.arrivals) for u in ev.neighborhood]

    def advice_levels(self) -> np.ndarray:
        """Total advice mass landing on each offline vertex."""
        A = np.zeros(self.n_offline)
        for ev in self.arrivals:
            for u, a in ev.advice.items():
                A[u] += a
        return A

    def advice_value(self) -> float:
        return float(self.advice_levels() @ self.weight_array())

    def with_advice(self, advice: Sequence[Mapping[int, float]]) -> GraphInstance:
        if len(advice) != self.n_online:
            raise ValueError("one advice map per arrival required")
        return GraphInstance(
            self.n_offline, self.weights,
            tuple(ArrivalEvent(ev.neighborhood, a) for ev, a in zip(self.arrivals, advice)),
        )

    def without_advice(self) -> GraphInstance:
        return self.with_advice([{}] * self.n_online)


@dataclass
class Allocation:
    """Fractional matching built one online vertex at a time.

    ``rows[v]`` holds the neighbour indices of ``v`` and the amounts sent to
    them; ``levels`` is the running total per offline vertex.
    """

    n_offline: int
    rows: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    levels: np.ndarray = None

    def __post_init__(self):
        if self.levels is None:
            self.levels = np.zeros(self.n_offline)

    def append(self, neighbors, amounts) -> None:
        neighbors = np.asarray(neighbors, dtype=int)
        amounts = np.asarray(amounts, dtype=float)
        self.rows.append((neighbors, amounts))
        np.add.at(self.levels, neighbors, amounts)

    @property
    def x(self) -> dict[tuple[int, int], float]:
        return {(int(u), v): float(a)
                for v, (us, xs) in enumerate(self.rows) for u, a in zip(us, xs) if a != 0.0}

    def online_sums(self) -> np.ndarray:
        return np.array([xs.sum() for _, xs in self.rows])

    def value(self, weights) -> float:
        return float(self.levels @ np.asarray(weights, dtype=float))


@dataclass
class DualCertificate:
    alpha: np.ndarray
    beta: np.ndarray
    mode: str

    @property
    def objective(self) -> float:
        return float(self.alpha.sum() + self.beta.sum())


@dataclass
class RunResult:
    value: float
    allocation: Allocation
    certificate: DualCertificate | None = None
    extra: dict = field(default_factory=dict)


class OnlinePolicy(Protocol):
    """What an adversary or runner needs from an online algorithm."""

    def start(self, n_offline: int, weights: np.ndarray) -> None: ...

    def step(self, neighbors: np.ndarray, advice: Mapping[int, float]) -> np.ndarray: ...


def run_policy(policy, g: GraphInstance) -> RunResult:
    policy.start(g.n_offline, g.weight_array())
    alloc = Allocation(g.n_offline)
    for ev in g.arrivals:
        nb = np.array(ev.neighborhood, dtype=int)
        alloc.append(nb, policy.step(nb, ev.advice))
    cert = getattr(policy, "certificate", None)
    return RunResult(alloc.value(g.weights), alloc, cert)


# -- validation ----------------------------------------------------------------

def validate_fractional_matching(g: GraphInstance, x: Allocation, tol: float = TOL):
    """Check degree constraints and support of ``x`` against ``g``.

    Returns ``(ok, violations)`` where ``violations`` is a list of readable
    strings; nothing is raised.
    """
    problems = []
    if len(x.rows) > g.n_online:
        problems.append(f"allocation has {len(x.rows)} rows for {g.n_online} arrivals")
    levels = np.zeros(g.n_offline)
    for v, (us, xs) in enumerate(x.rows[: g.n_online]):
        nb = set(g.arrivals[v].neighborhood)
        for u, a in zip(us, xs):
            if a < -tol:
                problems.append(f"x[{u},{v}] = {a!r} is negative")
            if a != 0.0 and int(u) not in nb:
                problems.append(f"x[{u},{v}] = {a!r} on a non-edge")
            if 0 <= u < g.n_offline:
                levels[u] += a
            else:
                problems.append(f"offline index {u} out of range at arrival {v}")
        s = float(np.sum(xs))
        if s > 1.0 + tol:
            problems.append(f"online vertex {v} sends {s!r} > 1")
    for u in np.flatnonzero(levels > 1.0 + tol):
        problems.append(f"offline vertex {u} level {levels[u]!r} > 1")
    return not problems, problems


# -- instance file format ----------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def serialize_instance(g: GraphInstance) -> str:
    lines = [HEADER]
    kind = "unweighted" if g.unweighted else "weighted"
    lines.append(f"offline {g.n_offline} {kind}")
    if kind == "weighted":
        lines.append("weights " + " ".join(_fmt(w) for w in g.weights))
    for k, ev in enumerate(g.arrivals):
        line = f"arrival {k}:" + "".join(f" {u}" for u in ev.neighborhood)
        if ev.advice:
            line += " | a:" + "".join(f" {u}={_fmt(a)}" for u, a in ev.advice.items())
        lines.append(line)
    return "\n".join(lines) + "\n"


def _parse_float(tok: str, lineno: int) -> float:
    try:
        val = float(tok)
    except ValueError:
        raise ParseError(lineno, f"bad number {tok!r}") from None
    if math.isnan(val) or math.isinf(val):
        raise ParseError(lineno, f"non-finite number {tok!r}")
    return val


def _parse_int(tok: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(lineno, f"bad index {tok!r}") from None


def _parse_pairs(text: str, lineno: int, n: int) -> dict[int, float]:
    out = {}
    for tok in text.split():
        if "=" not in tok:
            raise ParseError(lineno, f"expected u=value, got {tok!r}")
        u, val = tok.split("=", 1)
        u = _parse_int(u, lineno)
        if not 0 <= u < n:
            raise ParseError(lineno, f"offline index {u} out of range")
        if u in out:
            raise ParseError(lineno, f"duplicate entry for {u}")
        out[u] = _parse_float(val, lineno)
    return out


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def _parse_header(lines, kinds):
    try:
        lineno, line = next(lines)
    except StopIteration:
        raise ParseError(1, "empty file") from None
    if line != HEADER:
        raise ParseError(lineno, f"expected {HEADER!r}")
    try:
        lineno, line = next(lines)
    except StopIteration:
        raise ParseError(lineno + 1, "missing 'offline' line") from None
    parts = line.split()
    if len(parts) != 3 or parts[0] != "offline" or parts[2] not in kinds:
        raise ParseError(lineno, f"expected 'offline <n> {'|'.join(kinds)}'")
    n = _parse_int(parts[1], lineno)
    if n < 0:
        raise ParseError(lineno, "negative offline count")
    return n, parts[2]


def _parse_vector(lines, key, n):
    try:
        lineno, line = next(lines)
    except StopIteration:
        raise ParseError(0, f"missing '{key}' line") from None
    parts = line.split()
    if parts[0] != key or len(parts) != n + 1:
        raise ParseError(lineno, f"expected '{key}' followed by {n} numbers")
    vals = [_parse_float(t, lineno) for t in parts[1:]]
    if any(v < 0 for v in vals):
        raise ParseError(lineno, f"negative entry in {key}")
    return vals


def _split_arrival(line: str, lineno: int, expected: int) -> tuple[str, list[str]]:
    head, sep, rest = line.partition(":")
    parts = head.split()
    if not sep or len(parts) != 2 or parts[0] != "arrival":
        raise ParseError(lineno, "expected 'arrival <k>: ...'")
    k = _parse_int(parts[1], lineno)
    if k != expected:
        raise ParseError(lineno, f"arrival index {k}, expected {expected}")
    chunks = [c.strip() for c in rest.split("|")]
    return chunks[0], chunks[1:]


def _check_advice(advice, nb, lineno):
    stray = sorted(set(advice) - set(nb))
    if stray:
        raise ParseError(lineno, f"advice on non-neighbours {stray}")
    if any(a < 0.0 or a > 1.0 + TOL for a in advice.values()):
        raise ParseError(lineno, "advice value outside [0, 1]")
    if sum(advice.values()) > 1.0 + TOL:
        raise ParseError(lineno, f"advice sums to {sum(advice.values())!r} > 1")


def parse_instance(text: str) -> GraphInstance:
    """Parse the line-oriented instance format; errors carry line numbers."""
    lines = _content_lines(text)
    n, kind = _parse_header(lines, ("weighted", "unweighted"))
    weights = _parse_vector(lines, "weights", n) if kind == "weighted" else [1.0] * n
    arrivals = []
    for lineno, line in lines:
        nb_text, sections = _split_arrival(line, lineno, len(arrivals))
        nb = [_parse_int(t, lineno) for t in nb_text.split()]
        if any(not 0 <= u < n for u in nb):
            raise ParseError(lineno, f"offline index out of range in {nb}")
        advice = {}
        for sec in sections:
            tag, _, body = sec.partition(":")
            if tag.strip() != "a":
                raise ParseError(lineno, f"unknown section {tag.strip()!r}")
            advice = _parse_pairs(body, lineno, n)
        _check_advice(advice, nb, lineno)
        arrivals.append(ArrivalEvent(tuple(nb), advice))
    return GraphInstance(n, tuple(weights), tuple(arrivals))
