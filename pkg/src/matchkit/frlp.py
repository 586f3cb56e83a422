"""Factor-revealing LP bounding consistency given robustness.

The LP describes a greedy, monotone, uniform algorithm against both
adaptive adversaries: ``x_t`` goes to the advised vertex and ``xb_t`` to
each other neighbour in common-phase step ``t``; ``y_{i,t}`` is what the
``t``-th robustness arrival sends to ``u_i``; ``D_{t,i}`` is the resulting
level.  Maximising ``c`` over this LP bounds the consistency of any
algorithm that is ``r``-robust against the robustness adversary.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

TABLE_R = (0.500, 0.525, 0.550, 0.575, 0.600, 0.625, 1.0 - math.exp(-1.0))
TABLE_C = (1.000, 0.974, 0.944, 0.908, 0.862, 0.788, 0.731)
EMBEDDED_CAP = 80


class FrlpError(ValueError):
    pass


@dataclass
class Row:
    name: str
    coefs: dict
    sense: str
    rhs: float


@dataclass
class FrlpModel:
    n: int
    r: float
    names: list = field(default_factory=list)
    lower: list = field(default_factory=list)
    upper: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    objective: str = "c"

    def __post_init__(self):
        self.index = {name: i for i, name in enumerate(self.names)}

    def add_var(self, name, lo=0.0, hi=1.0):
        self.index[name] = len(self.names)
        self.names.append(name)
        self.lower.append(lo)
        self.upper.append(hi)

    def add_row(self, name, coefs, sense, rhs):
        unknown = set(coefs) - set(self.index)
        if unknown:
            raise FrlpError(f"row {name} uses undeclared variables {sorted(unknown)[:3]}")
        self.rows.append(Row(name, dict(coefs), sense, float(rhs)))

    @property
    def n_vars(self) -> int:
        return len(self.names)

    def matrices(self):
        """Dense ``(A_ub, b_ub, A_eq, b_eq, bounds, cost)`` for a minimiser."""
        ub, bu, eq, be = [], [], [], []
        for row in self.rows:
            vec = np.zeros(self.n_vars)
            for name, a in row.coefs.items():
                vec[self.index[name]] += a
            if row.sense == "<=":
                ub.append(vec), bu.append(row.rhs)
            elif row.sense == ">=":
                ub.append(-vec), bu.append(-row.rhs)
            else:
                eq.append(vec), be.append(row.rhs)
        cost = np.zeros(self.n_vars)
        cost[self.index[self.objective]] = -1.0
        bounds = list(zip(self.lower, self.upper))
        return (np.array(ub).reshape(-1, self.n_vars), np.array(bu), np.array(eq).reshape(-1, self.n_vars),
                np.array(be), bounds, cost)


def row_count(n: int) -> int:
    return n * n + 5 * n + 1


def var_count(n: int) -> int:
    return 4 * n + 1 + n * (n + 1)


def build_frlp(n: int, r: float) -> FrlpModel:
    if n < 1:
        raise FrlpError("n must be at least 1")
    if not 0.0 <= r <= 1.0:
        raise FrlpError("r must lie in [0, 1]")
    m = FrlpModel(n, float(r))
    T = range(1, n + 1)
    for t in T:
        for base in ("x", "xb", "d", "db"):
            m.add_var(f"{base}_{t}")
    for t in T:
        for i in range(t, n + 1):
            m.add_var(f"y_{i}_{t}")
            m.add_var(f"D_{t}_{i}")
    m.add_var("c", -math.inf, math.inf)

    for t in T:
        m.add_row(f"deg_{t}", {f"x_{t}": 1.0, f"xb_{t}": float(2 * n - 2 * t + 1)}, "<=", 1.0)
    for t in T:
        coefs = {f"xb_{i}": -1.0 for i in range(1, t)}
        coefs[f"x_{t}"] = -1.0
        coefs[f"d_{t}"] = 1.0
        m.add_row(f"lev_{t}", coefs, "=", 0.0)
    for t in T:
        coefs = {f"xb_{i}": -1.0 for i in range(1, t + 1)}
        coefs[f"db_{t}"] = 1.0
        m.add_row(f"levb_{t}", coefs, "=", 0.0)
    for t in range(1, n):
        m.add_row(f"mono_{t}", {f"d_{t}": 1.0, f"d_{t + 1}": -1.0}, "<=", 0.0)
    for t in T:
        m.add_row(f"ydeg_{t}", {f"y_{i}_{t}": 1.0 for i in range(t, n + 1)}, "<=", 1.0)
    for t in T:
        for i in range(t, n + 1):
            coefs = {f"y_{i}_{s}": -1.0 for s in range(1, t + 1)}
            coefs[f"D_{t}_{i}"] = 1.0
            coefs[f"d_{i}"] = -1.0
            m.add_row(f"rlev_{t}_{i}", coefs, "=", 0.0)
    for t in T:
        for i in range(t, n):
            m.add_row(f"rmono_{t}_{i}", {f"D_{t}_{i}": 1.0, f"D_{t}_{i + 1}": -1.0}, "<=", 0.0)
    rob = {}
    for t in T:
        rob[f"d_{t}"] = 1.0
        rob[f"db_{t}"] = 1.0
        for i in range(t, n + 1):
            rob[f"y_{i}_{t}"] = 1.0
    m.add_row("robust", rob, ">=", 2.0 * n * r)
    cons = {f"d_{t}": -1.0 for t in T}
    cons["c"] = 2.0 * n
    m.add_row("consistent", cons, "<=", float(n))
    return m


# -- LP file ---------------------------------------------------------------------

def _num(a: float) -> str:
    return repr(float(a))


def _expr(coefs: dict) -> list[str]:
    terms = []
    for k, (name, a) in enumerate(coefs.items()):
        sign = "-" if a < 0 else "+"
        mag = abs(a)
        body = name if mag == 1.0 else f"{_num(mag)} {name}"
        terms.append(f"{'- ' if sign == '-' else ''}{body}" if k == 0 else f"{sign} {body}")
    return terms


def _wrap(head: str, terms: list[str], tail: str, width: int = 200) -> list[str]:
    lines, cur = [], head
    for tok in terms + [tail]:
        if len(cur) + 1 + len(tok) > width and cur.strip():
            lines.append(cur)
            cur = "   " + tok
        else:
            cur = f"{cur} {tok}" if cur else tok
    lines.append(cur)
    return lines


def export_lp(model: FrlpModel) -> str:
    """The model in CPLEX LP format."""
    out = [f"\\ factor-revealing LP, n={model.n}, r={_num(model.r)}", "Maximize", model.objective,
           "Subject To"]
    ops = {"<=": "<=", ">=": ">=", "=": "="}
    for row in model.rows:
        out += _wrap(f" {row.name}:", _expr(row.coefs), f"{ops[row.sense]} {_num(row.rhs)}")
    out.append("Bounds")
    for name, lo, hi in zip(model.names, model.lower, model.upper):
        if lo == -math.inf and hi == math.inf:
            out.append(f" {name} free")
        else:
            out.append(f" {_num(lo)} <= {name} <= {_num(hi)}")
    out.append("End")
    return "\n".join(out) + "\n"


def _parse_expr(text: str) -> dict:
    coefs = {}
    pos = 0
    text = text.strip()
    while pos < len(text):
        mt = re.match(r"\s*([+-])?\s*(\d[0-9.]*(?:[eE][+-]?\d+)?)?\s*([A-Za-z_][A-Za-z0-9_.]*)\s*", text[pos:])
        if not mt or not mt.group(0).strip():
            raise FrlpError(f"cannot parse expression near {text[pos:pos + 30]!r}")
        sign = -1.0 if mt.group(1) == "-" else 1.0
        mag = float(mt.group(2)) if mt.group(2) else 1.0
        coefs[mt.group(3)] = coefs.get(mt.group(3), 0.0) + sign * mag
        pos += mt.end()
    return coefs


def parse_lp(text: str) -> dict:
    """Read an LP file written by :func:`export_lp` (or in the same subset).

    Returns a dict with ``sense``, ``objective`` (coefficients), ``rows``
    (list of :class:`Row`) and ``bounds`` (name -> (lo, hi)).
    """
    section = None
    sense = None
    obj_text = []
    rows_text = []
    bounds = {}
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        low = line.lower()
        if low in ("maximize", "maximise", "max", "minimize", "minimise", "min"):
            section, sense = "obj", ("max" if low.startswith("max") else "min")
            continue
        if low in ("subject to", "such that", "st", "s.t."):
            section = "st"
            continue
        if low == "bounds":
            section = "bounds"
            continue
        if low == "end":
            break
        if section == "obj":
            obj_text.append(line)
        elif section == "st":
            if rows_text and not re.match(r"^[A-Za-z_][A-Za-z0-9_.]*\s*:", line):
                rows_text[-1] += " " + line
            else:
                rows_text.append(line)
        elif section == "bounds":
            parts = line.split()
            if len(parts) == 2 and parts[1].lower() == "free":
                bounds[parts[0]] = (-math.inf, math.inf)
            elif len(parts) == 5 and parts[1] == "<=" and parts[3] == "<=":
                bounds[parts[2]] = (float(parts[0]), float(parts[4]))
            else:
                raise FrlpError(f"unsupported bound line {line!r}")
        else:
            raise FrlpError(f"text outside any section: {line!r}")
    obj = " ".join(obj_text)
    if ":" in obj:
        obj = obj.split(":", 1)[1]
    rows = []
    for rt in rows_text:
        name, body = rt.split(":", 1)
        mt = re.match(r"(.*?)(<=|>=|=<|=>|=)\s*(\S+)\s*$", body)
        if not mt:
            raise FrlpError(f"row {name.strip()} lacks a comparison")
        op = {"=<": "<=", "=>": ">="}.get(mt.group(2), mt.group(2))
        rows.append(Row(name.strip(), _parse_expr(mt.group(1)), op, float(mt.group(3))))
    return {"sense": sense, "objective": _parse_expr(obj), "rows": rows, "bounds": bounds}


def model_from_lp(text: str) -> FrlpModel:
    lp = parse_lp(text)
    names = []
    for row in lp["rows"]:
        for v in row.coefs:
            if v not in names:
                names.append(v)
    for v in list(lp["bounds"]) + list(lp["objective"]):
        if v not in names:
            names.append(v)
    hdr = re.search(r"n=(\d+), r=(\S+)", text)
    n, r = (int(hdr.group(1)), float(hdr.group(2))) if hdr else (0, float("nan"))
    m = FrlpModel(n, r)
    for v in names:
        lo, hi = lp["bounds"].get(v, (0.0, math.inf))
        m.add_var(v, lo, hi)
    for row in lp["rows"]:
        m.add_row(row.name, row.coefs, row.sense, row.rhs)
    if lp["sense"] != "max" or len(lp["objective"]) != 1:
        raise FrlpError("expected a single-variable maximisation objective")
    (obj_var,) = lp["objective"]
    m.objective = obj_var
    return m


@dataclass
class FrlpSolution:
    c: float
    x: np.ndarray
    model: FrlpModel
    solver: str

    def value(self, name: str) -> float:
        return float(self.x[self.model.index[name]])

    def max_violation(self) -> float:
        worst = 0.0
        for row in self.model.rows:
            lhs = sum(a * self.value(v) for v, a in row.coefs.items())
            if row.sense == "<=":
                worst = max(worst, lhs - row.rhs)
            elif row.sense == ">=":
                worst = max(worst, row.rhs - lhs)
            else:
                worst = max(worst, abs(lhs - row.rhs))
        lo = np.array(self.model.lower)
        hi = np.array(self.model.upper)
        return max(worst, float(np.max(lo - self.x, initial=0.0)), float(np.max(self.x - hi, initial=0.0)))


def solve_lp_highs(model: FrlpModel) -> FrlpSolution:
    """Solve with scipy's HiGHS backend."""
    from scipy.optimize import linprog
    from scipy.sparse import csr_matrix

    A_ub, b_ub, A_eq, b_eq, bounds, cost = model.matrices()
    res = linprog(cost, A_ub=csr_matrix(A_ub) if A_ub.size else None, b_ub=b_ub if A_ub.size else None,
                  A_eq=csr_matrix(A_eq) if A_eq.size else None, b_eq=b_eq if A_eq.size else None,
                  bounds=bounds, method="highs")
    if res.status != 0:
        raise FrlpError(f"HiGHS failed: {res.message}")
    return FrlpSolution(-float(res.fun), res.x, model, "highs")


def solve_frlp_external(lp_text: str) -> FrlpSolution:
    """Parse an exported LP file and hand it to HiGHS."""
    return solve_lp_highs(model_from_lp(lp_text))


# -- dense two-phase simplex ----------------------------------------------------

def dense_simplex(cost, A_ub, b_ub, A_eq, b_eq, bounds, tol=1e-9, max_iter=50000):
    """Minimise ``cost @ x`` with a dense two-phase tableau simplex.

    Bounds are shifted to zero, upper bounds become rows and free variables
    are split.  Pricing is Dantzig's rule, switching to Bland's rule after a
    run of degenerate pivots to rule out cycling.  Returns ``(x, value)``.
    """
    cost = np.asarray(cost, dtype=float)
    nv = cost.size
    A_ub = np.asarray(A_ub, dtype=float).reshape(-1, nv)
    A_eq = np.asarray(A_eq, dtype=float).reshape(-1, nv)
    b_ub = np.asarray(b_ub, dtype=float)
    b_eq = np.asarray(b_eq, dtype=float)

    # column map: x_j = shift_j + sum_k sign_k * z_k, z >= 0
    cols, shift = [], np.zeros(nv)
    extra_ub, extra_b = [], []
    for j, (lo, hi) in enumerate(bounds):
        lo = -math.inf if lo is None else lo
        hi = math.inf if hi is None else hi
        if lo == -math.inf:
            cols += [(j, 1.0), (j, -1.0)]
            if hi != math.inf:
                raise FrlpError("upper-bounded free variables are not supported")
            continue
        shift[j] = lo
        cols.append((j, 1.0))
        if hi != math.inf:
            e = np.zeros(nv)
            e[j] = 1.0
            extra_ub.append(e)
            extra_b.append(hi)
    M = np.zeros((nv, len(cols)))
    for k, (j, s) in enumerate(cols):
        M[j, k] = s
    Aub = np.vstack([A_ub] + ([np.array(extra_ub)] if extra_ub else []))
    bub = np.concatenate([b_ub, extra_b]) - Aub @ shift
    beq = b_eq - A_eq @ shift
    Aub, Aeq = Aub @ M, A_eq @ M
    c = M.T @ cost

    m_ub, m_eq, nz = Aub.shape[0], Aeq.shape[0], len(cols)
    m = m_ub + m_eq
    # rows: [Aub | I | art] and [Aeq | 0 | art], all right-hand sides made >= 0
    A = np.zeros((m, nz + m_ub))
    A[:m_ub, :nz] = Aub
    A[:m_ub, nz:] = np.eye(m_ub)
    A[m_ub:, :nz] = Aeq
    b = np.concatenate([bub, beq])
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    need_art = np.concatenate([neg[:m_ub], np.ones(m_eq, dtype=bool)])
    art_rows = np.flatnonzero(need_art)
    n_art = art_rows.size
    T = np.zeros((m + 1, nz + m_ub + n_art + 1))
    T[:m, : nz + m_ub] = A
    T[art_rows, nz + m_ub + np.arange(n_art)] = 1.0
    T[:m, -1] = b
    basis = np.empty(m, dtype=int)
    slack_rows = np.flatnonzero(~need_art)
    basis[slack_rows] = nz + slack_rows
    basis[art_rows] = nz + m_ub + np.arange(n_art)

    def run(obj_row, allowed):
        T[-1, :] = obj_row
        for i, bj in enumerate(basis):
            if T[-1, bj] != 0.0:
                T[-1, :] -= T[-1, bj] * T[i, :]
        degenerate = 0
        for _ in range(max_iter):
            red = T[-1, :-1].copy()
            red[~allowed] = 0.0
            if degenerate > 50:
                cand = np.flatnonzero(red < -tol)
                if cand.size == 0:
                    return
                q = int(cand[0])
            else:
                q = int(np.argmin(red))
                if red[q] >= -tol:
                    return
            col = T[:-1, q]
            pos = col > tol
            if not pos.any():
                raise FrlpError("LP is unbounded")
            ratios = np.full(m, np.inf)
            ratios[pos] = T[:-1, -1][pos] / col[pos]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + 1e-12)
            p = int(ties[np.argmin(basis[ties])])
            degenerate = degenerate + 1 if best <= tol else 0
            T[p, :] /= T[p, q]
            colq = T[:, q].copy()
            colq[p] = 0.0
            T[:, :] -= np.outer(colq, T[p, :])
            basis[p] = q
        raise FrlpError("simplex iteration limit reached")

    total = T.shape[1] - 1
    allow_all = np.ones(total, dtype=bool)
    if n_art:
        obj = np.zeros(total + 1)
        obj[nz + m_ub: nz + m_ub + n_art] = 1.0
        run(obj, allow_all)
        if -T[-1, -1] > 1e-7:
            raise FrlpError("LP is infeasible")
        # drive remaining artificials out of the basis where possible
        for i in range(m):
            if basis[i] >= nz + m_ub:
                row = T[i, : nz + m_ub]
                js = np.flatnonzero(np.abs(row) > 1e-9)
                if js.size:
                    q = int(js[0])
                    T[i, :] /= T[i, q]
                    colq = T[:, q].copy()
                    colq[i] = 0.0
                    T[:, :] -= np.outer(colq, T[i, :])
                    basis[i] = q
    allowed = allow_all.copy()
    allowed[nz + m_ub:] = False
    obj = np.zeros(total + 1)
    obj[:nz] = c
    run(obj, allowed)
    z = np.zeros(total)
    z[basis] = T[:-1, -1]
    x = shift + M @ z[:nz]
    return x, float(cost @ x)


def solve_lp_simplex(model: FrlpModel) -> FrlpSolution:
    A_ub, b_ub, A_eq, b_eq, bounds, cost = model.matrices()
    x, val = dense_simplex(cost, A_ub, b_ub, A_eq, b_eq, bounds)
    return FrlpSolution(-val, x, model, "simplex")


def solve_frlp_embedded(model: FrlpModel, solver: str = "highs", cap: int = EMBEDDED_CAP) -> FrlpSolution:
    """Solve in-process.  ``solver`` is ``"highs"`` or ``"simplex"``."""
    if model.n > cap:
        raise FrlpError(f"n={model.n} exceeds the in-process cap {cap}; use export_lp and an external solver")
    if solver == "highs":
        return solve_lp_highs(model)
    if solver == "simplex":
        return solve_lp_simplex(model)
    raise FrlpError(f"unknown solver {solver!r}")


def frlp_curve(n: int, rs=TABLE_R, solver: str = "highs") -> list[tuple[float, float]]:
    return [(float(r), solve_frlp_embedded(build_frlp(n, r), solver).c) for r in rs]


class ReplayPolicy:
    """Plays an LP solution online against either adversary.

    Common phase: ``x_t`` to the advised vertex, ``xb_t`` to the others.
    Afterwards, advised arrivals are filled greedily and unadvised ones send
    ``y_{i,t}`` to the neighbour holding position ``i`` in level order.
    """

    name = "frlp-replay"

    def __init__(self, sol: FrlpSolution):
        self.sol = sol
        self.n = sol.model.n

    def start(self, n_offline, weights):
        self.t = 0
        self.level = np.zeros(n_offline)
        self.advised = []

    def _v(self, name):
        return max(self.sol.value(name), 0.0)

    def step(self, neighbors, advice):
        nb = np.asarray(neighbors, dtype=int)
        self.t += 1
        t, n = self.t, self.n
        x = np.zeros(nb.size)
        if t <= n:
            (a,) = advice
            self.advised.append(a)
            x[:] = self._v(f"xb_{t}")
            x[nb == a] = self._v(f"x_{t}")
        elif advice:
            x[:] = np.maximum(1.0 - self.level[nb], 0.0)
        else:
            # position i holds the (i - s)-th lowest level, as the adversary sorts
            s = t - n
            rank = {u: k for k, u in enumerate(self.advised)}
            order = sorted(range(nb.size), key=lambda j: (self.level[nb[j]], rank.get(int(nb[j]), 0)))
            for i, j in zip(range(s, n + 1), order):
                x[j] = self._v(f"y_{i}_{s}")
        x = np.minimum(x, np.maximum(1.0 - self.level[nb], 0.0))
        if x.sum() > 1.0:
            x /= x.sum()
        self.level[nb] += x
        return x
