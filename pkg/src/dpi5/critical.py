"""Critical curves U_0, U_pi, U_* and the band-edge / internal / forbidden labels.

A critical curve is an energy at which the semiclassical velocity vanishes:
q = 0, q = pi, or cos q* = -t1 / 4 t2.  Labels are assigned directly from the
band structure at each m, so they do not depend on a sign convention:

* ``"U-"`` / ``"U+"``: the curve is the lower / upper band edge;
* ``"Ui"``: real q but strictly inside the band (internal);
* ``"Uf"``: U_* with complex q* (outside the band, forbidden);
* ``"boundary"``: exact tangency, |cos q*| = 1.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .smooth import ContinuumCoefficients

TANGENCY_TOL = 1e-12


class CriticalError(ArithmeticError):
    pass


def _ustar(w, t1, t2):
    with np.errstate(divide="ignore", invalid="ignore"):
        return w - 2 * t2 - t1**2 / (4 * t2)


def _cosqstar(t1, t2):
    with np.errstate(divide="ignore", invalid="ignore"):
        return -t1 / (4 * t2)


def q_star(cc: ContinuumCoefficients, m: float) -> tuple[float, str]:
    _, t1, t2 = (float(x) for x in cc.bands(m))
    if t2 == 0:
        raise CriticalError(f"t2 = 0 at m={m}: q* undefined")
    c = -t1 / (4 * t2)
    if abs(abs(c) - 1) <= TANGENCY_TOL:
        return c, "boundary"
    return c, ("real" if abs(c) < 1 else "complex")


def _labels(U0, Upi, Us, c):
    """Per-point labels for (U0, Upi, U*) given cos q*."""
    n = U0.size
    lab0, labpi, labs = (np.empty(n, dtype=object) for _ in range(3))
    for i in range(n):
        if not np.isfinite(c[i]):
            lab0[i] = "U-" if U0[i] <= Upi[i] else "U+"
            labpi[i] = "U+" if lab0[i] == "U-" else "U-"
            labs[i] = "nan"
            continue
        if abs(abs(c[i]) - 1) <= TANGENCY_TOL:
            lab0[i] = labpi[i] = labs[i] = "boundary"
            # the curve not touching U* is still an edge
            if c[i] > 0:
                labpi[i] = "U+" if Upi[i] > U0[i] else "U-"
            else:
                lab0[i] = "U+" if U0[i] > Upi[i] else "U-"
            continue
        cands = [U0[i], Upi[i]] + ([Us[i]] if abs(c[i]) < 1 else [])
        lo, hi = min(cands), max(cands)

        def tag(u):
            if u == lo:
                return "U-"
            if u == hi:
                return "U+"
            return "Ui"

        lab0[i], labpi[i] = tag(U0[i]), tag(Upi[i])
        labs[i] = tag(Us[i]) if abs(c[i]) < 1 else "Uf"
    return lab0, labpi, labs


@dataclass
class CriticalCurves:
    m: np.ndarray
    U0: np.ndarray
    Upi: np.ndarray
    Ustar: np.ndarray
    cosqstar: np.ndarray
    label0: np.ndarray
    labelpi: np.ndarray
    labelstar: np.ndarray
    undefined: np.ndarray  # t2 == 0 at this point

    @property
    def qstar_real(self) -> np.ndarray:
        return np.abs(self.cosqstar) <= 1


def critical_curves(cc: ContinuumCoefficients, m_grid) -> CriticalCurves:
    m = np.atleast_1d(np.asarray(m_grid, dtype=float))
    cc.check_range(m)
    w, t1, t2 = cc.bands(m)
    U0 = w + 2 * t1 + 2 * t2
    Upi = w - 2 * t1 + 2 * t2
    bad = t2 == 0
    Us = np.where(bad, np.nan, _ustar(w, t1, t2))
    c = np.where(bad, np.nan, _cosqstar(t1, t2))
    l0, lpi, ls = _labels(U0, Upi, Us, c)
    return CriticalCurves(m, U0, Upi, Us, c, l0, lpi, ls, bad)


def curve_value(cc: ContinuumCoefficients, curve: str, m):
    w, t1, t2 = cc.bands(m)
    if curve == "0":
        return w + 2 * t1 + 2 * t2
    if curve == "pi":
        return w - 2 * t1 + 2 * t2
    if curve == "*":
        return _ustar(w, t1, t2)
    raise ValueError(f"unknown curve {curve!r}")


def curve_labels_at(cc: ContinuumCoefficients, m: float) -> dict:
    cv = critical_curves(cc, [m])
    return {"0": cv.label0[0], "pi": cv.labelpi[0], "*": cv.labelstar[0]}


def band_edges(cc: ContinuumCoefficients, m: float):
    """(U_-, U_+, q at the minimum, q at the maximum) at fixed m."""
    w, t1, t2 = (float(x) for x in cc.bands(m))
    if t2 == 0:
        raise CriticalError(f"t2 = 0 at m={m}")
    cands = [(w + 2 * t1 + 2 * t2, 0.0), (w - 2 * t1 + 2 * t2, np.pi)]
    c = -t1 / (4 * t2)
    if abs(c) <= 1:
        cands.append((float(_ustar(w, t1, t2)), float(np.arccos(c))))
    lo = min(cands, key=lambda x: x[0])
    hi = max(cands, key=lambda x: x[0])
    return lo[0], hi[0], lo[1], hi[1]


def tangency_points(cc: ContinuumCoefficients, lo: float | None = None,
                    hi: float | None = None, step: float = 0.25) -> list[float]:
    """Points where U_* touches U_0 (t1 + 4 t2 = 0) or U_pi (t1 - 4 t2 = 0)."""
    lo = cc.m_lo if lo is None else lo
    hi = cc.m_hi if hi is None else hi
    n = max(int(np.ceil((hi - lo) / step)) + 1, 2)
    grid = np.linspace(lo, hi, n)
    out = []
    for sgn in (1.0, -1.0):
        def g(m, sgn=sgn):
            _, t1, t2 = cc.bands(m)
            return t1 + sgn * 4 * t2
        vals = g(grid)
        for i in range(n - 1):
            a, b = vals[i], vals[i + 1]
            if a == 0:
                out.append(float(grid[i]))
            elif a * b < 0:
                out.append(float(brentq(g, grid[i], grid[i + 1], xtol=1e-12, rtol=1e-15)))
        if vals[-1] == 0:
            out.append(float(grid[-1]))
    return sorted(set(out))


def write_curves_csv(cv: CriticalCurves, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "U0", "Upi", "Ustar", "label0", "labelstar", "cosqstar"])
        for i in range(cv.m.size):
            w.writerow([f"{cv.m[i]:.17g}", f"{cv.U0[i]:.17g}", f"{cv.Upi[i]:.17g}",
                        f"{cv.Ustar[i]:.17g}", cv.label0[i], cv.labelstar[i],
                        f"{cv.cosqstar[i]:.17g}"])
