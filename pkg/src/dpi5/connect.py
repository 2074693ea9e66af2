"""Connection formulas across turning points.

Type A points (q_c = 0 or pi) use the classic linear-turning-point rule.
Type B points (complex q_c = i kappa_c, possibly shifted by pi) join a
pair of pure-exponential DPI solutions on one side to a complex-conjugate
pair with an oscillating, exponentially varying envelope on the other,
through an Airy central zone.

All B-family work is done in a normalised frame with t1 < 0, t2 > 0,
reached by the gauge C_m -> (-1)^m C_m (t1 -> -t1) and, for t2 < 0, the
overall negation (w, t, E) -> -(w, t, E).  Signs sigma1, sigma2 always
refer to that frame.  When the complex side lies at m < m_c the
reflection m -> 2 m_c - m maps the problem onto the standard orientation;
this flips sigma2 on the complex side (``sigma2f``).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .airy import airy_ai_bi
from .dpi import branch_derivatives, branch_q, integrate
from .eikonal import kappa_chi
from .io import write_json
from .smooth import ContinuumCoefficients
from .turning import TurningPoint, nearest_branch


class IdentityViolation(ArithmeticError):
    pass


class WrongType(ValueError):
    pass


class CentralZoneError(ValueError):
    pass


B_TYPES = ("B", "B̄")
A_TYPES = ("A", "Ā", "A′", "Ā′")

# (t1 < 0, t2 > 0) -> (band signs, energy sign, gauge)
_FRAMES = {
    (True, True): ("direct", (1, 1, 1), 1, False),
    (False, True): ("gauge", (1, -1, 1), 1, True),
    (True, False): ("gauge-negate", (-1, 1, -1), -1, True),
    (False, False): ("negate", (-1, -1, -1), -1, False),
}


def parity(cc: ContinuumCoefficients, m):
    """(-1)^m relative to the first continuum site, for integer-spaced m."""
    k = np.rint(np.asarray(m, dtype=float) - cc.m_lo).astype(int)
    return np.where(k % 2 == 0, 1.0, -1.0)


@dataclass(frozen=True)
class ConnectionConstants:
    m_c: float
    kappa_c: float
    sigma1: int
    sigma2: int
    J: float
    E: float  # normalised-frame energy
    frame: str
    gauge: bool
    orientation: int  # +1: complex side at m > m_c
    tc: tuple  # (w, t1, t2) at m_c, normalised
    tdotc: tuple
    alpha: float
    a1: float
    a2: float
    b2: float
    a3: float
    b3: float
    b3_disc: float
    b3p: float
    mcp: float
    zeta_scale: float
    K: float
    residuals: dict
    cc: ContinuumCoefficients = field(repr=False, compare=False, default=None)

    def zeta(self, m, refined: bool = False):
        m = np.asarray(m, dtype=float)
        if refined:
            return -np.cbrt(self.b3p / self.a1) * (m - self.mcp)
        return -self.zeta_scale * (m - self.m_c)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "cc"}
        d["tc"], d["tdotc"] = list(self.tc), list(self.tdotc)
        return d


def normalised(cc: ContinuumCoefficients, E: float, m: float):
    """(frame name, normalised coefficients, normalised energy, gauge flag)."""
    _, t1, t2 = (float(x) for x in cc.bands(m))
    name, signs, esign, gauge = _FRAMES[(t1 < 0, t2 > 0)]
    s = tuple(a * b for a, b in zip(signs, cc.signs))
    return name, cc.with_signs(*s), esign * E, gauge


def connection_constants(cc: ContinuumCoefficients, tp: TurningPoint, sigma1: int = 1,
                         sigma2: int = 1, tol: float = 1e-4) -> ConnectionConstants:
    """Central-zone constants a1..b3, b3', m_c', K at a type B / B-bar point."""
    if tp.type not in B_TYPES:
        raise WrongType(f"connection constants need a type B or B̄ point, got {tp.type}")
    if sigma1 not in (1, -1) or sigma2 not in (1, -1):
        raise ValueError("signs must be +1 or -1")
    frame, ccn, En, gauge = normalised(cc, tp.E, tp.m_c)
    mc = tp.m_c
    w, t1, t2 = (float(x) for x in ccn.bands(mc))
    wd, t1d, t2d = (float(x) for x in ccn.bands(mc, 1))
    kc = math.acosh(-t1 / (4 * t2))
    ch, sh, ch2 = math.cosh(kc), math.sinh(kc), math.cosh(2 * kc)
    a1 = t1 * ch + 4 * t2 * ch2
    a2 = t1d * ch + 4 * t2d * ch2
    b2 = 2 * sh * (t1d + 4 * t2d * ch)
    a3 = sh * (t1d + 4 * t2d * ch)
    b3 = wd + 2 * t1d * ch + 2 * t2d * ch2

    def disc(x):
        ww, s1, s2 = (float(y) for y in ccn.bands(x))
        return s1 * s1 - 4 * s2 * (ww - 2 * s2 - En)

    h = 0.5
    lo, hi = max(mc - h, ccn.m_lo), min(mc + h, ccn.m_hi)
    slope = (disc(hi) - disc(lo)) / (hi - lo)
    alpha2 = -cc.J * slope / (16 * t2 * t2)  # signed; negative when mirrored
    alpha = math.sqrt(abs(alpha2))
    b3_disc = 4 * alpha2 * t2 / cc.J
    orientation = 1 if b3 > 0 else -1
    b3p = b3 + sigma2 * a2 * b2 / (2 * a1)
    mcp = mc + a2 * a2 / (4 * a1 * b3)
    zscale = float(np.cbrt(b3 / a1))
    K = (math.sqrt(math.pi) / (4 * math.sqrt(2 * alpha * t2 * sh))
         * abs(a1 / b3) ** (-1.0 / 12.0) * cc.J**0.25)
    res = {
        "a1_closed_form": abs(a1 - 4 * t2 * sh * sh) / abs(a1),
        "a3_half_b2": abs(a3 - 0.5 * b2),
        "b3_two_routes": abs(b3 - b3_disc) / abs(b3),
        "energy_at_mc": abs(En - (w + 2 * t1 * ch + 2 * t2 * ch2)) / max(abs(En), 1.0),
    }
    if not a1 > 0:
        raise IdentityViolation(f"a1 = {a1:.6g} is not positive")
    if res["b3_two_routes"] > tol:
        raise IdentityViolation(
            f"b3 = {b3:.6g} vs 4 alpha^2 t2c / J = {b3_disc:.6g} (rel {res['b3_two_routes']:.2g})"
        )
    return ConnectionConstants(
        m_c=mc, kappa_c=kc, sigma1=sigma1, sigma2=sigma2, J=cc.J, E=En, frame=frame,
        gauge=gauge, orientation=orientation, tc=(w, t1, t2), tdotc=(wd, t1d, t2d),
        alpha=alpha, a1=a1, a2=a2, b2=b2, a3=a3, b3=b3, b3_disc=b3_disc, b3p=b3p, mcp=mcp,
        zeta_scale=zscale, K=K, residuals=res, cc=ccn,
    )


def central_zone_solution(k: ConnectionConstants, c1: float, c2: float, m_grid,
                          refined: bool = False, eta: float = 0.5):
    """C_m = exp(-sigma2 kappa_c (m - m_c)) [c1 Ai(zeta) + c2 Bi(zeta)].

    With ``refined`` the shifted centre m_c' and slope b3' are used and the
    first-derivative factor exp(-(a2 dm - sigma2 b2 dm^2 / 2) / 2 a1) kept.
    """
    m = np.atleast_1d(np.asarray(m_grid, dtype=float))
    dm = m - k.m_c
    if np.any(np.abs(dm) > k.J**eta):
        raise CentralZoneError(f"grid leaves the central zone |m - m_c| <= J^{eta}")
    ai, bi = airy_ai_bi(k.zeta(m, refined))
    C = np.exp(-k.sigma2 * k.kappa_c * dm) * (c1 * ai + c2 * bi)
    if refined:
        C = C * np.exp(-(k.a2 * dm - 0.5 * k.sigma2 * k.b2 * dm**2) / (2 * k.a1))
    if k.gauge:
        C = C * parity(k.cc, m)
    return C


@dataclass
class ConnectionResult:
    """Amplitude / phase map of one connection, with evaluators for both sides.

    ``left`` and ``right`` name the side holding the pure-exponential
    (imaginary q) solution and the side holding the complex pair; they are
    swapped in space when ``orientation`` is -1.
    """

    kind: str
    sigma1: int
    sigma2: int
    A: float
    B: float
    Delta: float
    uses_bi: bool
    orientation: int = 1
    sigma2f: int = 0
    constants: ConnectionConstants | None = field(default=None, repr=False)
    _left: object = field(default=None, repr=False)
    _right: object = field(default=None, repr=False)

    def left(self, m):
        return np.array([self._left(float(x)) for x in np.atleast_1d(m)])

    def right(self, m):
        return np.array([self._right(float(x)) for x in np.atleast_1d(m)])

    def table_row(self) -> dict:
        return {"sigma1": self.sigma1, "sigma2": self.sigma2, "B_over_A": self.B / self.A,
                "Delta": self.Delta, "airy": "Bi" if self.uses_bi else "Ai"}


def amplitude_ratio(sigma1: int, sigma2: int) -> float:
    """B / A: 1/2 when sigma1 = sigma2, 1 otherwise."""
    return (2 - (1 if sigma1 == sigma2 else 0)) / 2


def maslov_phase(sigma1: int, sigma2: int) -> float:
    return math.pi / 4 * (1 + sigma1) * sigma2


def maslov_phase_bar(sigma1: int, sigma2: int) -> float:
    return -math.pi / 4 * (1 - sigma1) * sigma2


def _phase(ccn, E, sigma1, sigma2, mc, m):
    return integrate(lambda x: np.array([branch_q(ccn, E, y, sigma1, sigma2) for y in x]),
                     mc, m, singular_at_a=True)


def _complex_phase(ccn, E, sigma2f, mc, m):
    return integrate(lambda x: np.array([kappa_chi(ccn, E, y, sigma2f)[2] for y in x]),
                     mc, m, singular_at_a=True)


def _left_value(ccn, E, s1, s2, mc, A, m):
    q = branch_q(ccn, E, m, s1, s2)
    v = complex(branch_derivatives(ccn, np.atleast_1d(m), np.atleast_1d(q))["v"][0])
    return A / (2 * cmath.sqrt(1j * s1 * s2 * v)) * cmath.exp(1j * _phase(ccn, E, s1, s2, mc, m))


def _right_value(ccn, E, s2f, o, mc, B, delta, m, prefactor=1.0):
    _, _, _, s_a = kappa_chi(ccn, E, m, s2f)
    psi = o * _complex_phase(ccn, E, s2f, mc, m)
    term = prefactor * cmath.exp(1j * (psi + delta)) / cmath.sqrt(s_a)
    return 0.5 * B * 2 * term.real


def connect_B(k: ConnectionConstants, sigma1: int | None = None, sigma2: int | None = None,
              A: float = 1.0) -> ConnectionResult:
    """Type-B map: A / (2 sqrt(i s1 s2 v)) e^{i int q} <-> (B/2)[s_a^{-1/2} e^{i int q_a + i Delta} + c.c.].

    B = (2 - delta_{s1 s2}) A / 2 and Delta = (pi/4)(1 + s1) s2, with s2
    replaced by ``sigma2f`` on a mirrored point.  Evaluators act in the
    original frame (gauge factor included).
    """
    s1 = k.sigma1 if sigma1 is None else sigma1
    s2 = k.sigma2 if sigma2 is None else sigma2
    o = k.orientation
    s2f = o * s2
    B = amplitude_ratio(s1, s2f) * A
    delta = maslov_phase(s1, s2f)
    ccn, E, mc = k.cc, k.E, k.m_c

    def gauge(m):
        return float(parity(ccn, m)) if k.gauge else 1.0

    def left(m):
        return gauge(m) * _left_value(ccn, E, s1, s2, mc, A, m)

    def right(m):
        return gauge(m) * _right_value(ccn, E, s2f, o, mc, B, delta, m)

    kind = "B" if not k.gauge else "B̄ (gauge)"
    return ConnectionResult(kind, s1, s2, A, B, delta, s1 == s2f, o, s2f, k, left, right)


def connect_B_bar(cc: ContinuumCoefficients, tp: TurningPoint, sigma1: int = 1,
                  sigma2: int = 1, A: float = 1.0) -> ConnectionResult:
    """Type B-bar map.

    For t1 < 0, t2 < 0 the formula is written in the original bands: both
    sides carry exp(i pi m_c), q = pi + i s2 kappa + ..., q_a = pi + i s2 kappa + chi,
    and Delta = -(pi/4)(1 - s1) s2.  A B-bar point of the gauge image
    (t1 > 0, t2 > 0) is the gauge conjugate of an ordinary type-B map.
    """
    if tp.type != "B̄":
        raise WrongType(f"connect_B_bar needs a type B̄ point, got {tp.type}")
    _, t1, t2 = (float(x) for x in cc.bands(tp.m_c))
    if t2 > 0:
        return connect_B(connection_constants(cc, tp, sigma1, sigma2), A=A)
    k = connection_constants(cc, tp, sigma1, sigma2)
    o = k.orientation
    s1, s2 = sigma1, sigma2
    s2f = o * s2
    B = amplitude_ratio(s1, s2f) * A
    delta = maslov_phase_bar(s1, s2f)
    E, mc = tp.E, tp.m_c
    pre = cmath.exp(1j * math.pi * mc)

    def left(m):
        return pre * _left_value(cc, E, s1, s2, mc, A, m)

    def right(m):
        return _right_value(cc, E, s2f, o, mc, B, delta, m, prefactor=pre)

    return ConnectionResult("B̄", s1, s2, A, B, delta, s1 == s2f, o, s2f, k, left, right)


@dataclass
class AConnection:
    """Linear turning point: decaying exponential <-> 2 cos(|phase| - pi/4)."""

    kind: str
    m_c: float
    q_c: complex
    A: float
    orientation: int  # +1: forbidden side at m > m_c
    passthrough: bool  # A-prime: the +/-q branches are not connected
    _forbidden: object = field(default=None, repr=False)
    _allowed: object = field(default=None, repr=False)

    def forbidden(self, m):
        return np.array([self._forbidden(float(x)) for x in np.atleast_1d(m)])

    def allowed(self, m):
        return np.array([self._allowed(float(x)) for x in np.atleast_1d(m)])


def connect_A(cc: ContinuumCoefficients, tp: TurningPoint, A: float = 1.0) -> AConnection:
    """(A/sqrt|v|) e^{-|int kappa|} on the forbidden side <-> (2A/sqrt|v|) cos(|int (q - q_c)| - pi/4).

    On q_c = pi points both forms carry the (-1)^m factor.
    """
    if tp.type not in A_TYPES:
        raise WrongType(f"connect_A needs a type A-family point, got {tp.type}")
    E, mc, qc, o = tp.E, tp.m_c, tp.q_c, tp.orientation
    bar = abs(qc.real - math.pi) < 1e-9
    sf = nearest_branch(cc, E, tp, o)
    sa = nearest_branch(cc, E, tp, -o)

    def fac(m):
        return float(parity(cc, m)) if bar else 1.0

    def speed(m, s):
        q = branch_q(cc, E, m, *s)
        v = complex(branch_derivatives(cc, np.atleast_1d(m), np.atleast_1d(q))["v"][0])
        return abs(v)

    def phase(m, s):
        f = lambda x: np.array([branch_q(cc, E, y, *s) for y in x]) - qc
        return integrate(f, mc, m, singular_at_a=True)

    def forbidden(m):
        return fac(m) * A / math.sqrt(speed(m, sf)) * math.exp(-abs(phase(m, sf).imag))

    def allowed(m):
        return fac(m) * 2 * A / math.sqrt(speed(m, sa)) * math.cos(abs(phase(m, sa).real)
                                                                     - math.pi / 4)

    return AConnection(tp.type, mc, qc, A, o, tp.type.endswith("′"), forbidden, allowed)


def connection_report(k: ConnectionConstants) -> dict:
    rows = []
    for s1 in (1, -1):
        for s2 in (1, -1):
            rows.append(connect_B(k, s1, s2).table_row())
    return {"constants": k.to_dict(), "identity_residuals": dict(k.residuals), "map": rows}


def write_connection_json(report: dict, path: str | Path) -> None:
    write_json(report, path)
