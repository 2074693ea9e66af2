"""Airy functions Ai and Bi for real argument.

Maclaurin series near the origin, asymptotic expansions further out.
Bi on the positive axis is always summed from the series: every term is
positive, so it is accurate to rounding at any size, while the
asymptotic form would be limited to a relative error of about exp(-4/3 z^1.5).
"""

from __future__ import annotations

import math

import numpy as np

AI0 = 1.0 / (3.0 ** (2.0 / 3.0) * math.gamma(2.0 / 3.0))
AIP0 = 1.0 / (3.0 ** (1.0 / 3.0) * math.gamma(1.0 / 3.0))  # -Ai'(0)
SERIES_POS = 6.0
SERIES_NEG = 7.0
ZETA_MAX = 50.0
_NTERMS = 40


def _u_coeffs(n: int) -> list[float]:
    u = [1.0]
    for k in range(1, n):
        u.append(u[-1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216 * k))
    return u


_U = _u_coeffs(_NTERMS)


def _series(z: float) -> tuple[float, float]:
    """The two even/odd Maclaurin pieces f(z), g(z)."""
    z3 = z * z * z
    tf, tg = 1.0, z
    fs, gs = [tf], [tg]
    k = 1
    while True:
        tf *= z3 / ((3 * k - 1) * (3 * k))
        tg *= z3 / ((3 * k) * (3 * k + 1))
        fs.append(tf)
        gs.append(tg)
        if abs(tf) + abs(tg) < 1e-17 * (abs(math.fsum(fs)) + abs(math.fsum(gs))) and k > 3:
            break
        k += 1
    return math.fsum(fs), math.fsum(gs)


def _truncated(xi: float, alternate: bool) -> float:
    """sum u_k (-1)^k / xi^k (or without sign), stopped at the smallest term."""
    out, prev = [], float("inf")
    for k, u in enumerate(_U):
        term = u / xi**k
        if term > prev:
            break
        out.append(-term if (alternate and k % 2) else term)
        prev = term
    return math.fsum(out)


def _oscillatory(x: float):
    """(P, Q) sums for the negative axis, with xi = (2/3) x^1.5."""
    xi = 2.0 / 3.0 * x**1.5
    p, q, prev = [], [], float("inf")
    for k, u in enumerate(_U):
        term = u / xi**k
        if term > prev:
            break
        sign = -1.0 if (k // 2) % 2 else 1.0
        (p if k % 2 == 0 else q).append(sign * term)
        prev = term
    return xi, math.fsum(p), math.fsum(q)


def _airy_scalar(z: float) -> tuple[float, float]:
    if not math.isfinite(z):
        raise ValueError("Airy argument must be finite")
    if z > ZETA_MAX:
        raise OverflowError(f"Bi({z}) overflow guard: argument above {ZETA_MAX}")
    if -SERIES_NEG <= z <= SERIES_POS:
        f, g = _series(z)
        return AI0 * f - AIP0 * g, math.sqrt(3.0) * (AI0 * f + AIP0 * g)
    if z > SERIES_POS:
        xi = 2.0 / 3.0 * z**1.5
        ai = math.exp(-xi) / (2 * math.sqrt(math.pi) * z**0.25) * _truncated(xi, True)
        f, g = _series(z)
        return ai, math.sqrt(3.0) * (AI0 * f + AIP0 * g)
    x = -z
    xi, p, q = _oscillatory(x)
    pre = 1.0 / (math.sqrt(math.pi) * x**0.25)
    s, c = math.sin(xi + math.pi / 4), math.cos(xi + math.pi / 4)
    return pre * (s * p - c * q), pre * (c * p + s * q)


def airy_ai_bi(z):
    """(Ai(z), Bi(z)) for real scalar or array z, |z| <= 50 on the Bi side."""
    arr = np.asarray(z, dtype=float)
    if arr.ndim == 0:
        return _airy_scalar(float(arr))
    ai = np.empty(arr.shape)
    bi = np.empty(arr.shape)
    for idx, val in np.ndenumerate(arr):
        ai[idx], bi[idx] = _airy_scalar(float(val))
    return ai, bi


def airy_asymptotic_positive(z: float) -> tuple[float, float]:
    """Leading large-z forms exp(-+xi) z^(-1/4) / (2 sqrt(pi)) and /sqrt(pi)."""
    xi = 2.0 / 3.0 * z**1.5
    base = 1.0 / (math.sqrt(math.pi) * z**0.25)
    return 0.5 * base * math.exp(-xi), base * math.exp(xi)
