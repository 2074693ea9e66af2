"""Quartic eikonal equation E = H_sc(q, m) and its four wavevector branches.

With zeta = exp(iq) the eikonal equation is the palindromic quartic

    t2 zeta^4 + t1 zeta^3 + (w - E) zeta^2 + t1 zeta + t2 = 0,

so roots come in pairs (zeta, 1/zeta).  Equivalently cos q solves the
quadratic 4 t2 c^2 + 2 t1 c + (w - 2 t2 - E) = 0.
"""

from __future__ import annotations

import cmath
import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .smooth import ContinuumCoefficients


class FallbackThreeTerm(ArithmeticError):
    """t2 vanishes: the recursion is effectively three-term here."""


class NoConvergence(ArithmeticError):
    pass


class RegionMismatch(ValueError):
    pass


class AmbiguousContinuation(ArithmeticError):
    pass


def semiclassical_energy(cc: ContinuumCoefficients, q, m):
    w, t1, t2 = cc.bands(m)
    return w + 2 * t1 * np.cos(q) + 2 * t2 * np.cos(2 * q)


def velocity(cc: ContinuumCoefficients, q, m):
    _, t1, t2 = cc.bands(m)
    return -2 * np.sin(q) * (t1 + 4 * t2 * np.cos(q))


@dataclass
class WavevectorRoot:
    zeta: complex
    q: complex
    v: complex
    branch_id: int
    sigma1: int = 0
    sigma2: int = 0


@dataclass
class CosqPair:
    plus: complex
    minus: complex
    discriminant: float
    f: float


def _scale(w, t1, t2, E):
    return max(abs(w), abs(t1), abs(t2), abs(E), 1.0)


def _check_t2(w, t1, t2, E):
    if abs(t2) < 1e-12 * max(abs(t1), abs(w - E), 1.0):
        raise FallbackThreeTerm(f"|t2| = {abs(t2):.3g} below degeneracy threshold")


def cosq_branches(cc: ContinuumCoefficients, E: float, m: float) -> CosqPair:
    """Both roots cos q = (-t1 +/- sqrt(t1^2 - 4 t2 f)) / (4 t2), f = w - 2t2 - E."""
    w, t1, t2 = (float(x) for x in cc.bands(m))
    _check_t2(w, t1, t2, E)
    f = w - 2 * t2 - E
    disc = t1 * t1 - 4 * t2 * f
    root = cmath.sqrt(disc)
    return CosqPair(
        plus=(-t1 + root) / (4 * t2), minus=(-t1 - root) / (4 * t2),
        discriminant=disc, f=f,
    )


def q_from_zeta(zeta: complex) -> complex:
    return -1j * cmath.log(zeta)


def _polish(coeffs, z, scale):
    p = np.polynomial.polynomial
    dcoef = p.polyder(coeffs)
    for _ in range(3):
        val = p.polyval(z, coeffs)
        d = p.polyval(z, dcoef)
        if abs(d) < 1e-14 * scale:
            break
        step = val / d
        znew = z - step
        if abs(p.polyval(znew, coeffs)) >= abs(val):
            break
        z = znew
    return z


def _pair_up(roots):
    """Order four roots as (z0, 1/z0, z1, 1/z1)."""
    best = None
    for i, j, k, l in ((0, 1, 2, 3), (0, 2, 1, 3), (0, 3, 1, 2)):
        err = abs(roots[i] * roots[j] - 1) + abs(roots[k] * roots[l] - 1)
        if best is None or err < best[0]:
            best = (err, (i, j, k, l))
    i, j, k, l = best[1]
    pairs = [(roots[i], roots[j]), (roots[k], roots[l])]
    out = []
    for a, b in pairs:
        # first member: |zeta| < 1 (Im q > 0); on the unit circle, Re q > 0
        qa = q_from_zeta(a)
        if abs(abs(a) - 1) > 1e-12:
            first = a if abs(a) < 1 else b
        else:
            first = a if qa.real >= 0 else b
        second = b if first is a else a
        out.append((first, second))
    # pair with smaller |zeta| first, ties broken by arg
    out.sort(key=lambda pr: (round(abs(pr[0]), 12), cmath.phase(pr[0])))
    return [out[0][0], out[0][1], out[1][0], out[1][1]]


def _reciprocal_refine(pairs, cq: CosqPair):
    """Rebuild each (zeta, 1/zeta) pair from the nearest cos q root.

    Near a double root the companion eigenvalues carry errors of order
    sqrt(machine epsilon); cos q from the quadratic does not, and
    zeta = c +/- sqrt(c^2 - 1) restores the exact reciprocal pairing.
    """
    out = []
    for a, b in ((pairs[0], pairs[1]), (pairs[2], pairs[3])):
        est = 0.5 * (a + b)
        c = cq.plus if abs(cq.plus - est) <= abs(cq.minus - est) else cq.minus
        r = cmath.sqrt(c * c - 1)
        big = c + r if abs(c + r) >= abs(c - r) else c - r
        z1, z2 = big, 1 / big
        # keep the companion ordering: z1 should sit next to a
        if abs(z1 - a) + abs(z2 - b) > abs(z2 - a) + abs(z1 - b):
            z1, z2 = z2, z1
        out.extend([z1, z2])
    return out


def _sigma1(zeta, t1, t2, disc):
    c = 0.5 * (zeta + 1 / zeta)
    r = cmath.sqrt(disc)
    cp, cm = (-t1 + r) / (4 * t2), (-t1 - r) / (4 * t2)
    if abs(cp - cm) < 1e-12 * max(abs(cp), 1.0):
        return 0
    return 1 if abs(c - cp) <= abs(c - cm) else -1


def solve_hj(cc: ContinuumCoefficients, E: float, m: float) -> list[WavevectorRoot]:
    """Four roots zeta = exp(iq) via companion-matrix eigenvalues plus Newton polish."""
    w, t1, t2 = (float(x) for x in cc.bands(m))
    _check_t2(w, t1, t2, E)
    scale = _scale(w, t1, t2, E)
    coeffs = np.array([t2, t1, w - E, t1, t2])  # ascending powers
    roots = np.polynomial.polynomial.polyroots(coeffs)
    if roots.size != 4 or not np.all(np.isfinite(roots)):
        raise NoConvergence(f"companion eigensolve failed at m={m}, E={E}")
    roots = [_polish(coeffs, complex(z), scale) for z in roots]
    ordered = _pair_up(_reciprocal_refine(_pair_up(roots), cosq_branches(cc, E, m)))
    disc = t1 * t1 - 4 * t2 * (w - 2 * t2 - E)
    out = []
    for k, z in enumerate(ordered):
        q = q_from_zeta(z)
        v = -2 * cmath.sin(q) * (t1 + 4 * t2 * cmath.cos(q))
        s2 = 0 if abs(q.imag) < 1e-12 else (1 if q.imag > 0 else -1)
        out.append(WavevectorRoot(z, q, v, k, _sigma1(z, t1, t2, disc), s2))
    return out


def quartic_residual(cc: ContinuumCoefficients, E: float, m: float, zeta: complex) -> float:
    w, t1, t2 = (float(x) for x in cc.bands(m))
    return abs(t2 * zeta**2 + t1 * zeta + (w - E) + t1 / zeta + t2 / zeta**2)


def kappa_chi(cc: ContinuumCoefficients, E: float, m: float, sigma2: int):
    """(kappa, chi, q_a, s_a) on the complex-q side of a B-type point.

    cosh(kappa) cos(chi) = -t1 / 4|t2| and sinh(kappa) sin(chi) =
    sqrt(4 t2 f - t1^2) / 4|t2|, q_a = i sigma2 kappa + chi (shifted by pi
    when t2 < 0), s_a = -i sigma2 v(q_a) = 8|t2| sinh(kappa) sin(chi) sin(q_a).
    The sign of t1 is normalised to negative first.
    """
    if sigma2 not in (1, -1):
        raise ValueError("sigma2 must be +1 or -1")
    w, t1, t2 = (float(x) for x in cc.bands(m))
    _check_t2(w, t1, t2, E)
    f = w - 2 * t2 - E
    disc = t1 * t1 - 4 * t2 * f
    if disc >= 0:
        raise RegionMismatch(f"discriminant {disc:.3g} >= 0 at m={m}: q not complex here")
    t1n = -abs(t1)
    X = -t1n / (4 * abs(t2))
    Y = math.sqrt(-disc) / (4 * abs(t2))
    base = cmath.acos(complex(X, -sigma2 * Y))  # chi + i sigma2 kappa, chi in (0, pi)
    chi, kappa = base.real, sigma2 * base.imag
    qa = base + (math.pi if t2 < 0 else 0.0)
    s_a = 8 * abs(t2) * math.sinh(kappa) * math.sin(chi) * cmath.sin(qa)
    return kappa, chi, qa, s_a


@dataclass
class TrackedBranches:
    m: np.ndarray
    zeta: np.ndarray  # shape (len(m), 4)
    swaps: list = field(default_factory=list)

    @property
    def q(self) -> np.ndarray:
        q = -1j * np.log(self.zeta)
        re = np.unwrap(q.real, axis=0)
        return re + 1j * q.imag


def _turning_between(cc: ContinuumCoefficients, E: float, a: float, b: float) -> bool:
    """Whether E crosses U_0, U_pi or U_* within one step of [a, b].

    Roots coalesce there, so a tie between assignments is expected and is
    resolved by taking the cheaper one.
    """
    h = abs(b - a)
    x = np.clip(np.array([min(a, b) - h, min(a, b), max(a, b), max(a, b) + h]),
                cc.m_lo, cc.m_hi)
    w, t1, t2 = cc.bands(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        curves = (w + 2 * t1 + 2 * t2, w - 2 * t1 + 2 * t2, w - 2 * t2 - t1**2 / (4 * t2))
    for u in curves:
        g = E - u
        if np.all(np.isfinite(g)) and (np.any(g == 0) or np.any(np.sign(g) != np.sign(g[0]))):
            return True
    return False


def track_branches(cc: ContinuumCoefficients, E: float, m_grid) -> TrackedBranches:
    """Follow the four roots along m by nearest-neighbour matching in the zeta plane."""
    m_grid = np.asarray(m_grid, dtype=float)
    if m_grid.size > 1 and np.max(np.abs(np.diff(m_grid))) > 0.5 + 1e-12:
        raise ValueError("grid step must not exceed 0.5 site")
    cc.check_range(m_grid)
    first = solve_hj(cc, E, m_grid[0])
    cur = np.array([r.zeta for r in first])
    z = np.empty((m_grid.size, 4), dtype=complex)
    z[0] = cur
    swaps = []
    perms = list(itertools.permutations(range(4)))
    for k in range(1, m_grid.size):
        new = np.array([r.zeta for r in solve_hj(cc, E, m_grid[k])])
        costs = np.array([np.sum(np.abs(new[list(p)] - cur)) for p in perms])
        order = np.argsort(costs)
        best, second = perms[order[0]], perms[order[1]]
        if costs[order[1]] - costs[order[0]] < 1e-6:
            differs = [i for i in range(4) if best[i] != second[i]]
            if any(abs(new[best[i]] - new[second[i]]) > 1e-6 for i in differs) \
                    and not _turning_between(cc, E, m_grid[k - 1], m_grid[k]):
                raise AmbiguousContinuation(f"branch assignment ambiguous at m={m_grid[k]}")
        nxt = new[list(best)]
        # roots that swap pairing partner mark a turning point crossing
        if k > 1 and not np.allclose(np.abs(nxt * nxt[[1, 0, 3, 2]] - 1), 0, atol=1e-6):
            swaps.append(float(m_grid[k]))
        z[k] = nxt
        cur = nxt
    return TrackedBranches(m_grid, z, swaps)


def write_branches_csv(cc: ContinuumCoefficients, E: float, tb: TrackedBranches,
                       path: str | Path) -> None:
    q = tb.q
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "branch", "Re(q)", "Im(q)", "Re(v)", "Im(v)"])
        for i, m in enumerate(tb.m):
            for b in range(4):
                v = complex(velocity(cc, q[i, b], m))
                w.writerow([f"{m:.17g}", b, f"{q[i, b].real:.17g}", f"{q[i, b].imag:.17g}",
                            f"{v.real:.17g}", f"{v.imag:.17g}"])
