"""Smooth continuum extensions t_alpha(m) of the discrete bands.

At every integer m the extension reproduces the midpoint average
(t[m, m+alpha] + t[m, m-alpha]) / 2.  Natural cubic splines through those
averages are used; they satisfy the interpolation identity exactly and the
derivative conditions only asymptotically, which is checked as a
diagnostic (``derivative_residuals``).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .model import PentadiagonalOperator


class ExtensionError(ValueError):
    pass


def midpoint_averages(op: PentadiagonalOperator, alpha: int):
    """Integer sites and (t[m,m+a] + t[m,m-a])/2 where both neighbours exist."""
    n = op.size
    if alpha == 0:
        return op.m.copy(), op.diag.copy()
    band = op.off1 if alpha == 1 else op.off2
    if n <= 2 * alpha:
        raise ExtensionError(f"too few rows for alpha={alpha}")
    # site i (alpha <= i < n - alpha) couples to i+alpha via band[i], to i-alpha via band[i-alpha]
    vals = 0.5 * (band[alpha:] + band[:-alpha])
    return op.m[alpha : n - alpha], vals


@dataclass(frozen=True)
class ContinuumCoefficients:
    """t0 = w, t1, t2 as C^2 functions of a continuous site index m."""

    J: float
    m_lo: float
    m_hi: float
    splines: tuple
    signs: tuple = (1.0, 1.0, 1.0)

    def __call__(self, alpha: int, m, order: int = 0):
        return eval_coefficient(self, alpha, m, order)

    def bands(self, m, order: int = 0):
        """(w, t1, t2) or their derivatives at m, vectorised."""
        return tuple(self.signs[a] * self.splines[a](m, order) for a in range(3))

    def with_signs(self, sw: float, s1: float, s2: float) -> "ContinuumCoefficients":
        """Same bands multiplied by fixed signs (used to normalise sign conventions)."""
        return replace(self, signs=(float(sw), float(s1), float(s2)))

    @property
    def domain(self) -> tuple[float, float]:
        return self.m_lo, self.m_hi

    def check_range(self, m, slack: float = 1e-9):
        m = np.asarray(m, dtype=float)
        if np.any(m < self.m_lo - slack) or np.any(m > self.m_hi + slack):
            raise ExtensionError(
                f"m outside continuum domain [{self.m_lo}, {self.m_hi}]"
            )


def extend_coefficients(op: PentadiagonalOperator, J: float) -> ContinuumCoefficients:
    if J <= 0:
        raise ExtensionError("quasiclassical parameter J must be positive")
    if op.size < 5:
        raise ExtensionError(f"need >= 5 rows, got {op.size}")
    splines = []
    for a in range(3):
        m, vals = midpoint_averages(op, a)
        if not np.all(np.isfinite(vals)):
            raise ExtensionError(f"non-finite band values for alpha={a}")
        if m.size >= 3:
            splines.append(CubicSpline(m, vals, bc_type="natural"))
        else:
            # two points: linear interpolant written as a spline
            splines.append(CubicSpline(np.r_[m[0], m[-1]], np.r_[vals[0], vals[-1]],
                                       bc_type="natural"))
    return ContinuumCoefficients(
        J=float(J), m_lo=float(op.m_min + 2), m_hi=float(op.m_max - 2),
        splines=tuple(splines),
    )


def eval_coefficient(cc: ContinuumCoefficients, alpha: int, m, order: int = 0):
    if alpha not in (0, 1, 2):
        raise ValueError(f"alpha must be 0, 1 or 2, got {alpha}")
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    cc.check_range(m)
    out = cc.signs[alpha] * cc.splines[alpha](m, order)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class QuasiclassicalityReport:
    first: tuple[float, float, float]
    second: tuple[float, float, float]
    worst_m: float
    threshold: float
    passed: bool


def quasiclassicality_report(
    cc: ContinuumCoefficients, threshold: float = 10.0, samples_per_site: int = 8
) -> QuasiclassicalityReport:
    """Suprema of |t'| J / |t| and |t''| J^2 / |t| over a dense grid.

    Near zeros of a band the ratio is taken against a floor of 1e-3 times
    the largest band magnitude, so a band crossing zero does not read as
    infinitely fast.
    """
    n = max(int(np.ceil((cc.m_hi - cc.m_lo) * samples_per_site)) + 1, 2)
    m = np.linspace(cc.m_lo, cc.m_hi, n)
    vals = [cc.splines[a](m) for a in range(3)]
    scale = max(float(np.max(np.abs(v))) for v in vals)
    floor = 1e-3 * scale if scale > 0 else 1.0
    first, second, worst = [], [], (0.0, cc.m_lo)
    for a in range(3):
        den = np.maximum(np.abs(vals[a]), floor)
        r1 = np.abs(cc.splines[a](m, 1)) * cc.J / den
        r2 = np.abs(cc.splines[a](m, 2)) * cc.J**2 / den
        first.append(float(r1.max()))
        second.append(float(r2.max()))
        k = int(np.argmax(np.maximum(r1, r2)))
        if max(r1[k], r2[k]) > worst[0]:
            worst = (float(max(r1[k], r2[k])), float(m[k]))
    passed = max(first + second) <= threshold
    return QuasiclassicalityReport(tuple(first), tuple(second), worst[1], threshold, passed)


def derivative_residuals(op: PentadiagonalOperator, cc: ContinuumCoefficients) -> dict:
    """Deviation of the spline from the finite-difference derivative conditions.

    First derivative: t1'(m) ~ t[m,m+1] - t[m,m-1].  Second derivative: the
    symmetric second difference (t[m+1,m+2] - t[m,m+1] - t[m,m-1] + t[m-1,m-2])/2.
    Both hold only to O(J^-2) relative to the leading size and are reported,
    not enforced.
    """
    b = op.off1
    m = op.m[2:-2]
    i = np.arange(2, op.size - 2)
    first = b[i] - b[i - 1]
    second = 0.5 * (b[i + 1] - b[i] - b[i - 1] + b[i - 2])
    inside = (m >= cc.m_lo) & (m <= cc.m_hi)
    d1 = cc.splines[1](m[inside], 1) - first[inside]
    d2 = cc.splines[1](m[inside], 2) - second[inside]
    return {
        "max_first": float(np.max(np.abs(d1))) if d1.size else 0.0,
        "max_second": float(np.max(np.abs(d2))) if d2.size else 0.0,
    }


def write_coefficients_csv(cc: ContinuumCoefficients, grid, path: str | Path) -> None:
    grid = np.asarray(grid, dtype=float)
    cc.check_range(grid)
    cols = [grid]
    for order in range(3):
        cols.extend(cc.bands(grid, order))
    header = ["m", "t0", "t1", "t2", "dt0", "dt1", "dt2", "ddt0", "ddt1", "ddt2"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([f"{x:.17g}" for x in row])
