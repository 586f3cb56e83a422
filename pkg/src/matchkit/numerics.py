"""Penalty functions, splitting functions and closed-form tradeoff curves.

Everything here is a pure function of its arguments. Functions that take a
``z`` or ``(A, X)`` accept scalars or numpy arrays; scalar input gives a
Python float back.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

E_INV = math.exp(-1.0)
BALANCE_RATIO = 1.0 - E_INV

_DOMAIN_SLACK = 1e-12
_W_TOL = 1e-15
_W_MAXITER = 40


class DomainError(ValueError):
    """Argument outside the domain of a numeric function."""


def _out(value, scalar):
    if scalar:
        return float(value)
    return value


# -- Lambert W ---------------------------------------------------------------

def lambert_w(z):
    """Principal branch of the Lambert W function.

    Solves ``w * exp(w) = z`` for ``w >= -1`` with Halley's method. Seeds are
    the branch-point series near ``-1/e``, ``log1p`` for moderate arguments
    and ``log z - log log z`` for large ones.

    Parameters
    ----------
    z : float or array_like
        Arguments, ``z >= -1/e``. Values below ``-1/e`` by less than 1e-12
        are clamped onto the branch point.

    Returns
    -------
    float or ndarray
    """
    scalar = np.ndim(z) == 0
    z = np.array(z, dtype=float, ndmin=1)
    if np.any(np.isnan(z)):
        raise DomainError("lambert_w: NaN argument")
    if np.any(z < -E_INV - _DOMAIN_SLACK):
        raise DomainError(f"lambert_w: argument below -1/e: {z.min()!r}")
    z = np.maximum(z, -E_INV)

    w = np.empty_like(z)
    near = z < -0.32
    mid = (~near) & (z <= 3.0)
    big = z > 3.0
    p = np.sqrt(np.maximum(2.0 * (math.e * z[near] + 1.0), 0.0))
    w[near] = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    w[mid] = np.log1p(z[mid]) * (1.0 - np.log1p(np.log1p(z[mid])) / (2.0 + np.log1p(z[mid])))
    lz = np.log(z[big])
    w[big] = lz - np.log(lz) + np.log(lz) / lz

    branch = z <= -E_INV
    active = ~branch
    for _ in range(_W_MAXITER):
        if not active.any():
            break
        wa = w[active]
        ew = np.exp(wa)
        resid = wa * ew - z[active]
        wp1 = wa + 1.0
        denom = ew * wp1 - (wa + 2.0) * resid / (2.0 * wp1)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(denom != 0.0, resid / denom, 0.0)
        w[active] = np.maximum(wa - step, -1.0)
        done = np.abs(step) <= _W_TOL * (1.0 + np.abs(w[active]))
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    w[branch] = -1.0
    return _out(w[0], True) if scalar else w


# -- LAB penalty -------------------------------------------------------------

@dataclass(frozen=True)
class PenaltyParams:
    """Tradeoff parameter and the constants derived from it."""

    lam: float
    e_lm1: float = field(init=False)      # e^{lam-1}
    kink: float = field(init=False)       # lam * e^{1-lam}, where f1 changes piece
    f1_head: float = field(init=False)    # e^{lam-1} - lam, numerator of the first f1 piece

    def __post_init__(self):
        lam = float(self.lam)
        if not 0.0 <= lam <= 1.0:
            raise DomainError(f"lambda must lie in [0, 1], got {lam!r}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "e_lm1", math.exp(lam - 1.0))
        object.__setattr__(self, "kink", lam * math.exp(1.0 - lam))
        object.__setattr__(self, "f1_head", math.exp(lam - 1.0) - lam)


def _params(p) -> PenaltyParams:
    return p if isinstance(p, PenaltyParams) else PenaltyParams(p)


def _unit(z, name):
    scalar = np.ndim(z) == 0
    z = np.array(z, dtype=float, ndmin=1)
    if np.any(z < -_DOMAIN_SLACK) or np.any(z > 1.0 + _DOMAIN_SLACK) or np.any(np.isnan(z)):
        raise DomainError(f"{name}: argument outside [0, 1]")
    return np.clip(z, 0.0, 1.0), scalar


def f0(z, p):
    """``min(e^{z + lam - 1}, 1)``."""
    p = _params(p)
    z, scalar = _unit(z, "f0")
    v = np.minimum(np.exp(z + p.lam - 1.0), 1.0)
    return _out(v[0], True) if scalar else v


def f1(z, p):
    """Penalty applied while the advice is ahead of the algorithm."""
    p = _params(p)
    z, scalar = _unit(z, "f1")
    v = np.ones_like(z)
    head = z < p.kink
    v[head] = p.f1_head / (1.0 - z[head])
    tail = (~head) & (z < 1.0)
    if tail.any():
        zt = z[tail]
        # -lam / W(x) rewritten as exp(W(x) + z + lam - 1); no division, so
        # tiny lam does not underflow
        v[tail] = np.exp(lambert_w(-p.lam * np.exp(1.0 - p.lam - zt)) + zt + p.lam - 1.0)
    v = np.clip(v, 0.0, 1.0)
    return _out(v[0], True) if scalar else v


def f(A, X, p):
    """Advice-aware penalty ``f(A, X)``.

    ``f1(X)`` while the advice is ahead (``A > X``), otherwise the larger of
    ``f0(X - A)`` and ``f1(X)``.
    """
    p = _params(p)
    A, sa = _unit(A, "f(A)")
    X, sx = _unit(X, "f(X)")
    A, X = np.broadcast_arrays(A, X)
    v = f1(X, p)
    behind = A <= X
    if behind.any():
        v = np.array(v, copy=True)
        v[behind] = np.maximum(f0(X[behind] - A[behind], p), v[behind])
    return _out(v[0], True) if (sa and sx) else v


class Region(enum.Enum):
    L = "L"
    BR = "BR"
    TR = "TR"


def _left_bound(A: float, p: PenaltyParams) -> float:
    # X-coordinate of the curve separating L from TR
    if A <= 0.0:
        return math.inf
    if p.lam == 0.0:
        return -math.inf
    return A - math.log(A) + (1.0 - p.lam) + math.log(p.lam)


def classify_region(A: float, X: float, p) -> Region:
    """Which closed form of ``f`` applies at ``(A, X)``."""
    p = _params(p)
    if X < A:
        return Region.BR if X < p.kink else Region.TR
    if X < _left_bound(A, p):
        return Region.L
    return Region.TR


# -- inverting the potential ---------------------------------------------------

def f1_inverse(phi, p):
    """Smallest ``z`` in [0, 1] with ``f1(z) >= phi`` (vectorised)."""
    p = _params(p)
    phi = np.asarray(phi, dtype=float)
    out = np.ones_like(phi)
    low = phi <= 0.0
    out[low] = 0.0
    head = (~low) & (phi <= p.e_lm1)
    out[head] = np.maximum(0.0, 1.0 - p.f1_head / phi[head])
    tail = (~low) & (~head) & (phi < 1.0)
    pt = phi[tail]
    out[tail] = 1.0 - p.lam + p.lam / pt + np.log(pt)
    return np.clip(out, 0.0, 1.0)


def f0_inverse(phi, p):
    """Smallest ``z >= 0`` with ``f0(z) >= phi``."""
    p = _params(p)
    phi = np.asarray(phi, dtype=float)
    with np.errstate(divide="ignore"):
        z = np.log(np.maximum(phi, 1e-300)) + 1.0 - p.lam
    return np.where(phi <= 0.0, 0.0, np.clip(z, 0.0, 1.0))


def level_filler(w, A, X0, p):
    """Return ``level -> z``, the fills that bring each potential down to ``level``.

    ``z_u`` is the smallest amount in ``[0, 1 - X0_u]`` with
    ``w_u (1 - f(A_u, X0_u + z_u)) <= level``.  Constants are hoisted so the
    returned closure is cheap inside a root search.
    """
    p = _params(p)
    w, A, X0 = (np.asarray(a, dtype=float) for a in (w, A, X0))
    pos = w > 0.0
    inv_w = np.where(pos, 1.0 / np.where(pos, w, 1.0), 0.0)
    behind = X0 < A
    lam, e_lm1, head = p.lam, p.e_lm1, p.f1_head

    def fill(level):
        raw = 1.0 - level * inv_w
        phi = np.maximum(raw, 1e-300)
        log_phi = np.log(phi)
        # f1^{-1}: hyperbolic piece below e^{lam-1}, logarithmic piece above
        g = np.where(phi <= e_lm1, 1.0 - head / phi, 1.0 - lam + lam / phi + log_phi)
        np.clip(g, 0.0, 1.0, out=g)
        h = A + np.maximum(log_phi + 1.0 - lam, 0.0)
        target = np.where(behind & (g < A), g, np.minimum(h, g))
        z = np.maximum(target - X0, 0.0)
        return np.where(pos & (raw > 0.0), z, 0.0)

    return fill


def fill_to_level(w, A, X0, level, p):
    """Closed-form counterpart of :func:`invert_level_lab` for arrays."""
    return level_filler(w, A, X0, p)(level)


def invert_level_lab(u_weight: float, A: float, X0: float, level: float, p,
                     tol: float = 1e-12) -> float:
    """Smallest fill ``z`` bringing ``w (1 - f(A, X0 + z))`` down to ``level``.

    Plain bisection on ``z``; the potential is non-increasing in ``z`` so the
    predicate is monotone even across the jump at ``X = A``.
    """
    p = _params(p)
    room = max(0.0, 1.0 - X0)

    def pot(z):
        return u_weight * (1.0 - f(A, min(1.0, X0 + z), p))

    if pot(0.0) <= level:
        return 0.0
    lo, hi = 0.0, room
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if pot(mid) <= level:
            hi = mid
        else:
            lo = mid
    return hi


# -- PAW splitting functions -------------------------------------------------

def g_r(z, p):
    """Splitting function behind the robustness certificate."""
    p = _params(p)
    z, scalar = _unit(z, "g_r")
    v = np.where(z < p.lam, p.e_lm1 * (z + 1.0 - p.lam), np.exp(z - 1.0))
    return _out(v[0], True) if scalar else v


def g_c(z, p):
    """Splitting function behind the consistency certificate."""
    p = _params(p)
    z, scalar = _unit(z, "g_c")
    v = np.where(z < p.lam, p.e_lm1, np.exp(z - 1.0))
    return _out(v[0], True) if scalar else v


def g_r_integral(a, b, p):
    """Integral of ``g_r`` over ``[a, b]`` from its antiderivative."""
    p = _params(p)
    return _G_r(np.asarray(b, dtype=float), p) - _G_r(np.asarray(a, dtype=float), p)


def g_c_integral(a, b, p):
    """Integral of ``g_c`` over ``[a, b]`` from its antiderivative."""
    p = _params(p)
    return _G_c(np.asarray(b, dtype=float), p) - _G_c(np.asarray(a, dtype=float), p)


def _G_r(z, p):
    lam = p.lam
    zl = np.minimum(z, lam)
    head = p.e_lm1 * (0.5 * zl * zl + (1.0 - lam) * zl)
    tail = np.where(z > lam, np.exp(z - 1.0) - p.e_lm1, 0.0)
    return head + tail


def _G_c(z, p):
    lam = p.lam
    zl = np.minimum(z, lam)
    tail = np.where(z > lam, np.exp(z - 1.0) - p.e_lm1, 0.0)
    return p.e_lm1 * zl + tail


# -- tradeoff curves ---------------------------------------------------------

def r_lab(lam: float) -> float:
    """Robustness of LAB at ``lam``."""
    if lam >= 1.0:
        return 0.0
    e = math.exp(lam - 1.0)
    d = 1.0 - lam
    if d < 0.1:
        # both factors cancel near lam = 1; use their series in d
        terms = [d ** k / math.factorial(k) for k in range(2, 20)]
        gap = sum(t * (k - 1) for k, t in zip(range(2, 20), terms))   # 1 - lam e^{1-lam}
        head = sum(t * (-1) ** k for k, t in zip(range(2, 20), terms))  # e^{lam-1} - lam
    else:
        gap = 1.0 - lam * math.exp(d)
        head = e - lam
    return 1.0 - e - head * math.log(gap) - lam * d


def c_lab(lam: float) -> float:
    """Consistency of LAB at ``lam``."""
    return 1.0 + lam - math.exp(lam - 1.0)


def r_paw(lam: float) -> float:
    return 1.0 - (1.0 - lam + 0.5 * lam * lam) * math.exp(lam - 1.0)


def c_paw(lam: float) -> float:
    return 1.0 - (1.0 - lam) * math.exp(lam - 1.0)


def map_lambda_equal_consistency(lambda_lab: float) -> float:
    """PAW parameter whose consistency equals LAB's at ``lambda_lab``."""
    if not 0.0 <= lambda_lab <= 1.0:
        raise DomainError("lambda_lab must lie in [0, 1]")
    return min(1.0, max(0.0, 1.0 + lambert_w(lambda_lab - math.exp(lambda_lab - 1.0))))


def lambda_lab_for_consistency(c: float) -> float:
    """Invert ``c_lab``; ``c`` must lie in ``[1 - 1/e, 1]``."""
    if not BALANCE_RATIO - 1e-12 <= c <= 1.0 + 1e-12:
        raise DomainError(f"consistency {c!r} outside [1-1/e, 1]")
    return min(1.0, max(0.0, c - 1.0 - lambert_w(-math.exp(c - 2.0))))


def lambda_paw_for_consistency(c: float) -> float:
    """Invert ``c_paw``; ``c`` must lie in ``[1 - 1/e, 1]``."""
    if not BALANCE_RATIO - 1e-12 <= c <= 1.0 + 1e-12:
        raise DomainError(f"consistency {c!r} outside [1-1/e, 1]")
    return min(1.0, max(0.0, 1.0 + lambert_w(c - 1.0)))


CURVES = {
    "lab": (r_lab, c_lab),
    "paw": (r_paw, c_paw),
}


def tradeoff_curve(alg: str, grid: int) -> list[tuple[float, float, float]]:
    """``(lam, r, c)`` on ``grid`` evenly spaced points of [0, 1]."""
    r, c = CURVES[alg]
    if grid < 2:
        lams = [0.0]
    else:
        lams = [i / (grid - 1) for i in range(grid)]
    return [(lam, r(lam), c(lam)) for lam in lams]
