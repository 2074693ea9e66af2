"""DPI branch wavefunctions C_m ~ v^(-1/2) exp(i int q dm) and the Phi_2 monitor.

A branch is selected by two signs.  Where the discriminant
t1^2 - 4 t2 f is non-negative, ``sigma1`` picks the root
cos q = (-t1 + sigma1 sqrt(disc)) / 4 t2 and ``sigma2`` the sign of q
(of Im q when q is imaginary).  Where it is negative the four roots are
+/-chi + i sigma2 kappa (shifted by pi for t2 < 0) and ``sigma1`` picks the
sign of the real part.

Derivatives of q(m) follow from implicit differentiation of
H_sc(q, m) = E, so no numerical differencing of q is needed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .eikonal import kappa_chi
from .io import write_json
from .smooth import ContinuumCoefficients


class ZeroVelocity(ArithmeticError):
    pass


class MaskViolation(ArithmeticError):
    pass


_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


def branch_q(cc: ContinuumCoefficients, E: float, m: float, sigma1: int, sigma2: int) -> complex:
    w, t1, t2 = (float(x) for x in cc.bands(m))
    f = w - 2 * t2 - E
    disc = t1 * t1 - 4 * t2 * f
    if disc >= 0:
        c = (-t1 + sigma1 * math.sqrt(disc)) / (4 * t2)
        if abs(c) <= 1:
            return complex(sigma2 * math.acos(c))
        if c > 1:
            return complex(0.0, sigma2 * math.acosh(c))
        return complex(math.pi, sigma2 * math.acosh(-c))
    kappa, chi, _, _ = kappa_chi(cc, E, m, sigma2)
    shift = math.pi if t2 < 0 else 0.0
    return complex(shift + sigma1 * chi, sigma2 * kappa)


def branch_q_array(cc, E, m, sigma1, sigma2) -> np.ndarray:
    m = np.atleast_1d(np.asarray(m, dtype=float))
    return np.array([branch_q(cc, E, x, sigma1, sigma2) for x in m])


def _partials(cc: ContinuumCoefficients, m, q):
    """H_sc partial derivatives along (q, m), vectorised."""
    w, t1, t2 = cc.bands(m)
    wd, t1d, t2d = cc.bands(m, 1)
    wdd, t1dd, t2dd = cc.bands(m, 2)
    c1, c2, s1, s2 = np.cos(q), np.cos(2 * q), np.sin(q), np.sin(2 * q)
    return {
        "t1": t1, "t2": t2, "cos": c1,
        "Hq": -2 * t1 * s1 - 4 * t2 * s2,
        "Hqq": -2 * t1 * c1 - 8 * t2 * c2,
        "Hqqq": 2 * t1 * s1 + 16 * t2 * s2,
        "Hm": wd + 2 * t1d * c1 + 2 * t2d * c2,
        "Hmm": wdd + 2 * t1dd * c1 + 2 * t2dd * c2,
        "Hqm": -2 * t1d * s1 - 4 * t2d * s2,
        "Hqmm": -2 * t1dd * s1 - 4 * t2dd * s2,
        "Hqqm": -2 * t1d * c1 - 8 * t2d * c2,
    }


def branch_derivatives(cc: ContinuumCoefficients, m, q) -> dict:
    """v, q', q'', v', v'', r = H_qq / v and r' along a branch."""
    p = _partials(cc, m, q)
    v = p["Hq"]
    qd = -p["Hm"] / v
    qdd = -(p["Hmm"] + 2 * p["Hqm"] * qd + p["Hqq"] * qd**2) / v
    vd = p["Hqm"] + p["Hqq"] * qd
    vdd = p["Hqmm"] + 2 * p["Hqqm"] * qd + p["Hqqq"] * qd**2 + p["Hqq"] * qdd
    r = p["Hqq"] / v
    hqq_d = p["Hqqm"] + p["Hqqq"] * qd
    rd = (hqq_d * v - p["Hqq"] * vd) / v**2
    ratio = (p["t1"] + 16 * p["t2"] * p["cos"]) / (p["t1"] + 4 * p["t2"] * p["cos"])
    return {"v": v, "qd": qd, "qdd": qdd, "vd": vd, "vdd": vdd, "r": r, "rd": rd,
            "ratio": ratio}


def _segment_nodes(a: float, b: float):
    x = 0.5 * (b - a) * _GL_X + 0.5 * (a + b)
    return x, 0.5 * (b - a) * _GL_W


def integrate(fun, a: float, b: float, singular_at_a: bool = False, panel: float = 1.0):
    """Composite Gauss-Legendre quadrature of a (complex) function on [a, b].

    With ``singular_at_a`` the panel touching ``a`` is mapped through
    m = a + s u^2, which removes a square-root endpoint behaviour.
    """
    if a == b:
        return 0.0 + 0.0j
    s = 1.0 if b > a else -1.0
    L = abs(b - a)
    total = 0.0 + 0.0j
    start = 0.0
    if singular_at_a:
        first = min(L, panel)
        u, wu = _segment_nodes(0.0, math.sqrt(first))
        vals = fun(a + s * u**2)
        total += s * np.sum(wu * 2 * u * vals)
        start = first
    if L > start:
        n = max(int(math.ceil((L - start) / panel)), 1)
        edges = a + s * (start + (L - start) * np.arange(n + 1) / n)
        for lo, hi in zip(edges[:-1], edges[1:]):
            x, wx = _segment_nodes(lo, hi)
            total += np.sum(wx * fun(x))
    return complex(total)


@dataclass
class BranchSolution:
    """One DPI branch sampled on a grid, with phase anchored at ``anchor``."""

    cc: ContinuumCoefficients
    E: float
    sigma1: int
    sigma2: int
    m: np.ndarray
    anchor: float
    anchor_is_turning_point: bool = False
    q: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)
    phi0: np.ndarray = field(default=None, repr=False)
    phi2: np.ndarray = field(default=None, repr=False)
    valid: np.ndarray = field(default=None, repr=False)

    def q_at(self, m):
        return branch_q_array(self.cc, self.E, m, self.sigma1, self.sigma2)

    @property
    def phi1(self) -> np.ndarray:
        return 0.5j * np.log(self.v)


def make_branch(cc: ContinuumCoefficients, E: float, m_grid, sigma1: int, sigma2: int,
                anchor: float | None = None, anchor_is_turning_point: bool = False,
                phi2_threshold: float = 0.1, validity_threshold: float = 0.1,
                phi2_ref: float | None = None, monitor: bool = True) -> BranchSolution:
    m = np.asarray(m_grid, dtype=float)
    cc.check_range(m)
    anchor = float(m[0]) if anchor is None else float(anchor)
    br = BranchSolution(cc, E, sigma1, sigma2, m, anchor, anchor_is_turning_point)
    br.q = br.q_at(m)
    br.v = branch_derivatives(cc, m, br.q)["v"]
    br.phi0 = cumulative_phase(br, m)
    if monitor:
        br.phi2 = phi2_estimate(br, m, ref=phi2_ref)
        qdot_v2 = np.abs(branch_derivatives(cc, m, br.q)["qd"]) / np.abs(br.v) ** 2
        br.valid = (np.abs(br.phi2) <= phi2_threshold) & (qdot_v2 <= validity_threshold)
    else:
        br.phi2 = np.zeros(m.size, dtype=complex)
        br.valid = np.ones(m.size, dtype=bool)
    return br


def phase_integral(branch: BranchSolution, m: float) -> complex:
    """Phi_0(m) = int_anchor^m q dm'."""
    fun = lambda x: branch.q_at(x)
    return integrate(fun, branch.anchor, float(m),
                     singular_at_a=branch.anchor_is_turning_point)


def cumulative_phase(branch: BranchSolution, m) -> np.ndarray:
    """Phi_0 at every grid point, accumulated outward from the anchor."""
    m = np.atleast_1d(np.asarray(m, dtype=float))
    fun = lambda x: branch.q_at(x)
    out = np.empty(m.size, dtype=complex)
    a = branch.anchor
    for side in (1.0, -1.0):
        idx = np.flatnonzero((m - a) * side > 0)
        idx = idx[np.argsort(np.abs(m[idx] - a))]
        acc, prev = 0.0 + 0.0j, a
        for k in idx:
            acc += integrate(fun, prev, float(m[k]),
                             singular_at_a=branch.anchor_is_turning_point and prev == a)
            prev = float(m[k])
            out[k] = acc
    out[m == a] = 0.0
    return out


def amplitude(v) -> complex | np.ndarray:
    """exp(i Phi_1) = v^(-1/2), principal square root."""
    v = np.asarray(v, dtype=complex)
    if np.any(v == 0):
        raise ZeroVelocity("v = 0: DPI amplitude undefined at a turning point")
    out = 1 / np.sqrt(v)
    return complex(out) if out.ndim == 0 else out


def continuous_amplitude(v, m, anchor: float) -> np.ndarray:
    """v^(-1/2) with the square-root branch carried continuously outward from the anchor."""
    v = np.asarray(v, dtype=complex)
    m = np.asarray(m, dtype=float)
    if np.any(v == 0):
        raise ZeroVelocity("v = 0: DPI amplitude undefined at a turning point")
    out = np.empty(v.size, dtype=complex)
    for side in (1.0, -1.0):
        idx = np.flatnonzero((m - anchor) * side >= 0)
        idx = idx[np.argsort(np.abs(m[idx] - anchor))]
        if idx.size == 0:
            continue
        ang = np.unwrap(np.angle(v[idx]))
        out[idx] = np.abs(v[idx]) ** -0.5 * np.exp(-0.5j * ang)
    return out


def branch_amplitude(branch: BranchSolution, m: float) -> complex:
    q = branch.q_at(m)
    v = branch_derivatives(branch.cc, np.atleast_1d(float(m)), q)["v"][0]
    return amplitude(v)


def _phi2_integrands(cc, E, sigma1, sigma2):
    def qof(x):
        return branch_q_array(cc, E, x, sigma1, sigma2)

    def f1(x):
        d = branch_derivatives(cc, x, qof(x))
        return d["ratio"] * d["qdd"]

    def f3(x):
        d = branch_derivatives(cc, x, qof(x))
        return d["r"] * (d["vdd"] / d["v"] - (d["vd"] / d["v"]) ** 2)

    return f1, f3, qof


def phi2_terms(cc: ContinuumCoefficients, E: float, sigma1: int, sigma2: int, m: float,
               ref: float):
    """The three contributions to Phi_2 at m; integrals run from ``ref``."""
    f1, f3, qof = _phi2_integrands(cc, E, sigma1, sigma2)
    d = branch_derivatives(cc, np.atleast_1d(m), qof(m))
    return (-integrate(f1, ref, m) / 24, complex(d["rd"][0]) / 8,
            -integrate(f3, ref, m) / 8)


def phi2_estimate(branch: BranchSolution, m=None, ref: float | None = None):
    """Phi_2 on the branch; the indefinite integrals start at ``ref``.

    The default reference is the grid end farthest from the anchor, where
    the branch is furthest from its turning point, so that near the
    anchor the value measures the accumulated breakdown.
    """
    grid = branch.m if m is None else np.atleast_1d(np.asarray(m, dtype=float))
    if ref is None:
        ends = (float(branch.m[0]), float(branch.m[-1]))
        ref = max(ends, key=lambda e: abs(e - branch.anchor))
    cc, E, s1, s2 = branch.cc, branch.E, branch.sigma1, branch.sigma2
    out = np.empty(grid.size, dtype=complex)
    f1, f3, qof = _phi2_integrands(cc, E, s1, s2)
    for side in (1.0, -1.0):
        idx = np.flatnonzero(np.sign(grid - ref) == side) if side > 0 else \
            np.flatnonzero(np.sign(grid - ref) <= 0)
        idx = idx[np.argsort(np.abs(grid[idx] - ref))]
        acc1 = acc3 = 0.0 + 0.0j
        prev = ref
        for k in idx:
            x = float(grid[k])
            acc1 += integrate(f1, prev, x, panel=0.5)
            acc3 += integrate(f3, prev, x, panel=0.5)
            prev = x
            d = branch_derivatives(cc, np.atleast_1d(x), qof(x))
            out[k] = -acc1 / 24 + d["rd"][0] / 8 - acc3 / 8
    return out


def validity_ratio(branch: BranchSolution, m=None) -> np.ndarray:
    """|q'| / |v|^2, small where the DPI form holds."""
    grid = branch.m if m is None else np.atleast_1d(np.asarray(m, dtype=float))
    d = branch_derivatives(branch.cc, grid, branch.q_at(grid))
    return np.abs(d["qd"]) / np.abs(d["v"]) ** 2


def branch_values(branch: BranchSolution, m=None) -> np.ndarray:
    """v^(-1/2) exp(i Phi_0) on the grid (or at m)."""
    if m is None:
        return continuous_amplitude(branch.v, branch.m, branch.anchor) * np.exp(1j * branch.phi0)
    m = np.atleast_1d(np.asarray(m, dtype=float))
    q = branch.q_at(m)
    v = branch_derivatives(branch.cc, m, q)["v"]
    return continuous_amplitude(v, m, branch.anchor) * np.exp(1j * cumulative_phase(branch, m))


@dataclass
class DPIWavefunction:
    m: np.ndarray
    C: np.ndarray
    valid: np.ndarray


def dpi_wavefunction(branches, coeffs, m_grid=None, check_mask: bool = False) -> DPIWavefunction:
    """Superpose branches: C_m = sum_b coeff_b v_b^(-1/2) exp(i Phi_0,b)."""
    if len(branches) != len(coeffs):
        raise ValueError("one coefficient per branch required")
    grid = branches[0].m if m_grid is None else np.asarray(m_grid, dtype=float)
    C = np.zeros(grid.size, dtype=complex)
    valid = np.ones(grid.size, dtype=bool)
    for br, c in zip(branches, coeffs):
        if m_grid is None:
            vals, ok = branch_values(br), br.valid
        else:
            vals = branch_values(br, grid)
            ok = np.interp(grid, br.m, br.valid.astype(float)) > 0.5
        C += c * vals
        valid &= ok
    if check_mask and not np.all(valid):
        bad = grid[~valid]
        raise MaskViolation(f"{bad.size} samples outside the DPI validity mask, first m={bad[0]}")
    return DPIWavefunction(grid, C, valid)


def write_wavefunction_csv(wf: DPIWavefunction, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "Re(C)", "Im(C)", "valid"])
        for m, c, ok in zip(wf.m, wf.C, wf.valid):
            w.writerow([f"{m:.17g}", f"{c.real:.17g}", f"{c.imag:.17g}", int(ok)])


def write_manifest(branches, coeffs, path: str | Path) -> None:
    data = [
        {"sigma1": b.sigma1, "sigma2": b.sigma2, "anchor": b.anchor,
         "coeff": [float(np.real(c)), float(np.imag(c))]}
        for b, c in zip(branches, coeffs)
    ]
    write_json(data, path)
