"""Turning points: location, type, local expansion and failure-zone width.

A turning point is a crossing of the energy line with one of the critical
curves U_0, U_pi, U_*.  Near it H_sc - E ~ a (q - q_c)^2 + b (m - m_c), so
q - q_c and v both grow like |m - m_c|^(1/2), and the DPI form breaks down
in a zone whose half-width grows like J^(1/3).
"""

from __future__ import annotations

import cmath
import csv
import math
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .critical import curve_labels_at, curve_value
from .dpi import BranchSolution, branch_q, branch_derivatives, phi2_estimate
from .io import write_json
from .smooth import ContinuumCoefficients

CURVES = ("0", "pi", "*")
TYPES = ("A", "Ā", "A′", "Ā′", "B", "B̄", "B′", "B̄′")


class UnknownLabel(ValueError):
    """The crossed curve sits exactly at a tangency; no type applies."""


class QuadraticProximity(ArithmeticError):
    """Another turning point is too close for the linear local expansion."""


class NearTangency(UserWarning):
    pass


@dataclass
class TurningPoint:
    m_c: float
    q_c: complex
    curve: str
    E: float
    label: str = ""
    type: str | None = None
    kappa_c: float | None = None
    alpha: float = float("nan")
    a: float = float("nan")
    b: float = float("nan")
    orientation: int = 1  # +1: complex / forbidden side at m > m_c
    failure_halfwidth: float = float("nan")
    nominal_halfwidth: float = float("nan")
    nearest_other_tp: float = float("inf")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["q_c"] = [self.q_c.real, self.q_c.imag]
        return d


def _scale(cc, m):
    w, t1, t2 = (float(x) for x in cc.bands(m))
    return max(abs(w), abs(t1), abs(t2), 1.0)


def _qc(cc, curve, m):
    if curve == "0":
        return 0j
    if curve == "pi":
        return complex(math.pi)
    _, t1, t2 = (float(x) for x in cc.bands(m))
    c = -t1 / (4 * t2)
    if abs(c) <= 1:
        return complex(math.acos(c))
    if c > 1:
        return complex(0.0, math.acosh(c))
    return complex(math.pi, math.acosh(-c))


def classify(tp: TurningPoint, cc: ContinuumCoefficients | None = None,
             E: float | None = None) -> str:
    """Type tag from the crossed curve and its band label at m_c.

    U_0 / U_pi give the A family, barred on U_pi (q_c = pi) and primed when
    the curve is internal to the band.  U_* gives the B family, barred when
    Re q_c = pi and primed when q_* is real (the curve is a band edge).
    """
    label = tp.label
    if cc is not None:
        label = curve_labels_at(cc, tp.m_c)[tp.curve]
    if label == "boundary":
        raise UnknownLabel(f"curve {tp.curve} is tangent at m={tp.m_c}")
    if tp.curve in ("0", "pi"):
        base = "Ā" if tp.curve == "pi" else "A"
        return base + ("′" if label == "Ui" else "")
    base = "B̄" if tp.q_c.real > math.pi / 2 else "B"
    return base + ("′" if label in ("U-", "U+") else "")


def _expansion(cc, E, tp):
    m = tp.m_c
    w, t1, t2 = (float(x) for x in cc.bands(m))
    dw, dt1, dt2 = (float(x) for x in cc.bands(m, 1))
    q = tp.q_c
    a = 0.5 * (-2 * t1 * cmath.cos(q) - 8 * t2 * cmath.cos(2 * q))
    b = dw + 2 * dt1 * cmath.cos(q) + 2 * dt2 * cmath.cos(2 * q)
    a, b = a.real, b.real  # q_c is 0, pi, real, or k*pi + i kappa: both are real
    kappa = None
    if tp.curve == "*":
        def disc(x):
            ww, s1, s2 = (float(y) for y in cc.bands(x))
            return s1 * s1 - 4 * s2 * (ww - 2 * s2 - E)
        h = 0.5
        lo, hi = max(m - h, cc.m_lo), min(m + h, cc.m_hi)
        slope = (disc(hi) - disc(lo)) / (hi - lo)
        alpha = math.sqrt(abs(slope) * cc.J / (16 * t2 * t2))
        orientation = -1 if slope > 0 else 1
        if abs(q.imag) > 0:
            kappa = abs(q.imag)
    else:
        alpha = math.sqrt(cc.J * abs(b / a)) if a != 0 else float("inf")
        # forbidden side: where a (q - q_c)^2 = -b dm needs imaginary q - q_c
        orientation = 1 if a * b > 0 else -1
    return a, b, alpha, kappa, orientation


def _nominal_halfwidth(a, b, J, threshold):
    if a == 0 or b == 0:
        return float("inf")
    c = ((5.0 / 48.0) * math.sqrt(abs(a) / (abs(b) * J)) / threshold) ** (2.0 / 3.0)
    return c * J ** (1.0 / 3.0)


def locate_turning_points(cc: ContinuumCoefficients, E: float, lo: float | None = None,
                          hi: float | None = None, tol: float = 1e-10) -> list[TurningPoint]:
    """All crossings of E with U_0, U_pi and U_* on [lo, hi], sorted by m_c."""
    if not math.isfinite(E):
        raise ValueError("energy must be finite")
    lo = cc.m_lo if lo is None else float(lo)
    hi = cc.m_hi if hi is None else float(hi)
    cc.check_range([lo, hi])
    grid = np.arange(lo, hi, 1.0)
    grid = np.append(grid, hi) if grid[-1] < hi else grid
    found = []
    for curve in CURVES:
        def g(x, curve=curve):
            return float(E - curve_value(cc, curve, x))
        vals = np.array([g(x) for x in grid])
        for i in range(grid.size - 1):
            ga, gb = vals[i], vals[i + 1]
            if not (np.isfinite(ga) and np.isfinite(gb)):
                continue
            if ga == 0:
                found.append((float(grid[i]), curve))
            elif ga * gb < 0:
                found.append((brentq(g, grid[i], grid[i + 1], xtol=tol, rtol=1e-15), curve))
        if vals[-1] == 0:
            found.append((float(grid[-1]), curve))
        # unit-grid bracketing misses double roots: flag near-tangent minima
        mag = np.abs(vals)
        for i in range(1, grid.size - 1):
            if mag[i] <= mag[i - 1] and mag[i] <= mag[i + 1] and vals[i - 1] * vals[i + 1] > 0 \
                    and mag[i] < 1e-6 * _scale(cc, grid[i]):
                warnings.warn(f"near-tangent crossing of U_{curve} at m~{grid[i]:.3f}",
                              NearTangency, stacklevel=2)
    found.sort()
    tps = []
    for m_c, curve in found:
        tp = TurningPoint(m_c=float(m_c), q_c=_qc(cc, curve, m_c), curve=curve, E=float(E))
        tp.label = curve_labels_at(cc, m_c)[curve]
        try:
            tp.type = classify(tp)
        except UnknownLabel:
            warnings.warn(f"turning point at m={m_c} on a tangency; left unclassified",
                          NearTangency, stacklevel=2)
        tp.a, tp.b, tp.alpha, tp.kappa_c, tp.orientation = _expansion(cc, E, tp)
        tp.nominal_halfwidth = _nominal_halfwidth(tp.a, tp.b, cc.J, 0.1)
        tps.append(tp)
    for i, tp in enumerate(tps):
        others = [abs(o.m_c - tp.m_c) for j, o in enumerate(tps) if j != i]
        tp.nearest_other_tp = min(others) if others else float("inf")
    return tps


def local_expansion(cc: ContinuumCoefficients, E: float, tp: TurningPoint,
                    min_separation: float = 5.0):
    """(a, b, alpha, kappa_c) with a = H_qq / 2 and b = H_m at the turning point.

    For the B family alpha comes from the discriminant slope,
    t1^2 - 4 t2 f ~ -(16/J) alpha^2 t2c^2 (m - m_c) up to orientation; for
    the A family it is the constant in |q - q_c| ~ alpha |m - m_c|^(1/2) / J^(1/2).
    """
    if tp.nearest_other_tp <= min_separation:
        raise QuadraticProximity(
            f"turning point at m={tp.m_c:.6g} has a neighbour {tp.nearest_other_tp:.3g} sites away"
        )
    a, b, alpha, kappa, orientation = _expansion(cc, E, tp)
    tp.a, tp.b, tp.alpha, tp.kappa_c, tp.orientation = a, b, alpha, kappa, orientation
    return a, b, alpha, kappa


def nearest_branch(cc: ContinuumCoefficients, E: float, tp: TurningPoint, side: int):
    """(sigma1, sigma2) of the branch that meets q_c when approached from ``side``."""
    x = tp.m_c + side * 0.25
    best = None
    for s1 in (1, -1):
        for s2 in (1, -1):
            q = branch_q(cc, E, x, s1, s2)
            d = abs(q - tp.q_c)
            if best is None or d < best[0] - 1e-12:
                best = (d, s1, s2)
    return best[1], best[2]


def _side_limit(cc, tp, side, extent):
    far = tp.m_c + side * extent
    return min(max(far, cc.m_lo), cc.m_hi)


def phi2_profile(cc: ContinuumCoefficients, E: float, tp: TurningPoint, side: int,
                 extent: float | None = None, n: int = 160):
    """Distances from m_c and |Phi_2| on one side, integrals referenced at the far end."""
    if extent is None:
        extent = 0.3 * cc.J
    if math.isfinite(tp.nearest_other_tp):
        extent = min(extent, 0.5 * tp.nearest_other_tp)
    far = _side_limit(cc, tp, side, extent)
    reach = abs(far - tp.m_c)
    if reach <= 0.6:
        return np.empty(0), np.empty(0)
    dm = np.geomspace(0.3, reach - 0.25, n)
    m = tp.m_c + side * dm
    s1, s2 = nearest_branch(cc, E, tp, side)
    br = BranchSolution(cc, E, s1, s2, m, tp.m_c, True)
    return dm, np.abs(phi2_estimate(br, m, ref=far))


def failure_zone(cc: ContinuumCoefficients, E: float, tp: TurningPoint,
                 threshold: float = 0.1, sides=(1, -1), extent: float | None = None):
    """Half-width (sites) of the zone where |Phi_2| exceeds ``threshold``.

    Returns (measured, nominal); measured is NaN when a neighbouring
    turning point is too close to inspect either side.  The measured width is the outermost
    distance on the inspected sides at which |Phi_2| exceeds the threshold;
    the nominal width is c J^(1/3) with c fixed by a and b of the local
    expansion, from the leading behaviour |Phi_2| ~ (5/48) sqrt(|a|/(|b|J)) x^(-3/2)
    in the scaled variable x = |m - m_c| / J^(1/3).
    """
    width, seen = 0.0, False
    for side in sides:
        dm, p2 = phi2_profile(cc, E, tp, side, extent)
        seen = seen or dm.size > 0
        bad = np.flatnonzero(p2 > threshold)
        if bad.size:
            width = max(width, float(dm[bad].max()))
    if not seen:
        width = math.nan  # another turning point leaves no room to measure
    nominal = _nominal_halfwidth(tp.a, tp.b, cc.J, threshold)
    tp.failure_halfwidth, tp.nominal_halfwidth = width, nominal
    return width, nominal


def validity_outside(cc: ContinuumCoefficients, E: float, tp: TurningPoint, start: float,
                     side: int, extent: float | None = None, n: int = 200) -> float:
    """max |q'| / |v|^2 on one side, from ``start`` sites out to the side limit."""
    if extent is None:
        extent = 0.3 * cc.J
    if math.isfinite(tp.nearest_other_tp):
        extent = min(extent, 0.5 * tp.nearest_other_tp)
    far = _side_limit(cc, tp, side, extent)
    if abs(far - tp.m_c) <= start:
        return 0.0
    m = tp.m_c + side * np.linspace(start, abs(far - tp.m_c), n)
    s1, s2 = nearest_branch(cc, E, tp, side)
    q = np.array([branch_q(cc, E, x, s1, s2) for x in m])
    d = branch_derivatives(cc, m, q)
    return float(np.max(np.abs(d["qd"]) / np.abs(d["v"]) ** 2))


def sqrt_law_exponents(cc: ContinuumCoefficients, E: float, tp: TurningPoint, dm_lo: float,
                       dm_hi: float, side: int = -1, n: int = 40):
    """Log-log slopes of |q - q_c| and |v| against |m - m_c| on one side."""
    dm = np.geomspace(dm_lo, dm_hi, n)
    m = tp.m_c + side * dm
    s1, s2 = nearest_branch(cc, E, tp, side)
    q = np.array([branch_q(cc, E, x, s1, s2) for x in m])
    v = branch_derivatives(cc, m, q)["v"]
    x = np.log(dm)
    eq = np.polyfit(x, np.log(np.abs(q - tp.q_c)), 1)[0]
    ev = np.polyfit(x, np.log(np.abs(v)), 1)[0]
    return float(eq), float(ev)


def write_turning_json(tps: list[TurningPoint], path: str | Path) -> None:
    data = [tp.to_dict() for tp in tps]
    write_json(data, path)


def write_turning_csv(rows: list[TurningPoint], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["E", "m_c", "curve", "type", "Re_qc", "Im_qc", "alpha", "a", "b",
                    "failure_halfwidth", "nearest_other_tp"])
        for tp in rows:
            w.writerow([f"{tp.E:.17g}", f"{tp.m_c:.17g}", tp.curve, tp.type or "",
                        f"{tp.q_c.real:.17g}", f"{tp.q_c.imag:.17g}", f"{tp.alpha:.17g}",
                        f"{tp.a:.17g}", f"{tp.b:.17g}", f"{tp.failure_halfwidth:.17g}",
                        f"{tp.nearest_other_tp:.17g}"])
