"""End-to-end measurements of the asymptotic machinery against the oracle.

Each helper runs one complete comparison (connection through a type B
point, central-zone residual, allowed-region wavefunction) and returns a
plain dict of metrics so the CLI and the tests share one implementation.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .connect import (B_TYPES, _right_value, central_zone_solution, connect_B, connect_B_bar,
                      connection_constants, parity)
from .dpi import branch_values, make_branch
from .model import PentadiagonalOperator
from .oracle import OracleError, exact_spectrum, fit_basis, fit_conjugate_pair, integrate_recursion
from .smooth import ContinuumCoefficients
from .turning import TurningPoint, failure_zone, locate_turning_points


def _window(op, mc, side, lo, hi):
    a, b = sorted((mc + side * lo, mc + side * hi))
    return op.m[(op.m >= a) & (op.m <= b)]


def _connection(cc, tp, s1, s2):
    if tp.type == "B":
        return connect_B(connection_constants(cc, tp, s1, s2))
    return connect_B_bar(cc, tp, s1, s2)


def connection_end_to_end(op: PentadiagonalOperator, cc: ContinuumCoefficients,
                          tp: TurningPoint, windows=(0.1, 0.3)) -> dict:
    """Continue the oracle's decaying solution through a type B point.

    The recursion is integrated from the matrix edge on the pure-exponential
    side toward m_c, so the solution that decays away from the turning point
    is the dominant one.  Its amplitude A is fitted on that side, the complex pair
    coefficient lam on the other, and lam is compared with the predicted
    (B / 2) e^{i Delta}.  Windows are fractions of J measured from m_c.
    """
    if tp.type not in B_TYPES:
        raise ValueError(f"end-to-end check needs a type B or B̄ point, got {tp.type}")
    J = cc.J
    lo, hi = windows[0] * J, windows[1] * J
    probe = connection_constants(cc, tp, 1, 1)
    o = probe.orientation
    mi = _window(op, tp.m_c, -o, lo, hi)
    mr = _window(op, tp.m_c, o, lo, hi)
    if mi.size < 12 or mr.size < 12:
        raise OracleError("fit windows leave the operator range")
    # sigma2 is fixed by asking the pure-exponential form to decay away from m_c
    res = None
    for s2 in (1, -1):
        cand = _connection(cc, tp, 1, s2)
        ends = np.abs(cand.left([mi[0], mi[-1]]))
        far_first = abs(mi[0] - tp.m_c) > abs(mi[-1] - tp.m_c)
        if (ends[0] < ends[1]) == far_first:
            res = cand
            break
    if res is None:
        raise OracleError("no pure-exponential branch decays away from the turning point")
    k = res.constants
    sol = integrate_recursion(op, tp.E, [1.0, 0.3], "down" if o < 0 else "up")
    C = sol.values(ref=tp.m_c)
    C = C / np.abs(C[np.isin(op.m, np.concatenate([mi, mr]))]).max()
    left = res.left(mi)
    # the pure-exponential form may carry a constant phase; fit against its real shape
    ph = left[np.argmax(np.abs(left))]
    ph = ph / abs(ph)
    (A,), rel_a = fit_basis(C[np.isin(op.m, mi)], [(left / ph).real])
    A = A / ph
    g = np.array([_right_value(k.cc, k.E, res.sigma2f, o, k.m_c, 1.0, 0.0, x)
                  + 1j * _right_value(k.cc, k.E, res.sigma2f, o, k.m_c, 1.0, -math.pi / 2, x)
                  for x in mr])
    if k.gauge:
        g = g * parity(k.cc, mr)
    if res.kind == "B̄":
        g = g * cmath.exp(1j * math.pi * k.m_c)
    lam, rel_b = fit_conjugate_pair(C[np.isin(op.m, mr)], g)
    pred = 0.5 * res.B / res.A * A * cmath.exp(1j * res.Delta)
    phase_err = abs(math.remainder(cmath.phase(lam) - cmath.phase(pred), 2 * math.pi))
    return {
        "J": J, "E": tp.E, "m_c": tp.m_c, "type": tp.type, "orientation": o,
        "sigma1": res.sigma1, "sigma2": res.sigma2, "sigma2f": res.sigma2f,
        "B_over_A": res.B / res.A, "Delta": res.Delta, "A_fit": complex(A),
        "lambda": lam, "lambda_pred": pred,
        "amplitude_ratio": abs(lam) / abs(pred),
        "amplitude_error": abs(abs(lam) / abs(pred) - 1.0),
        "phase_error": phase_err,
        "fit_misfit_pure": rel_a, "fit_misfit_complex": rel_b,
        "windows": [windows[0], windows[1]],
    }


def central_zone_residual(op: PentadiagonalOperator, cc: ContinuumCoefficients,
                          tp: TurningPoint, c1: float, c2: float, sigma2: int = 1,
                          exponent: float = 0.4, refined: bool = False) -> float:
    """Largest relative residual of the Airy central-zone form in the exact recursion.

    Rows with |m - m_c| <= J^exponent are checked; each residual is divided
    by the sum of the magnitudes of the terms in that row.
    """
    k = connection_constants(cc, tp, 1, sigma2)
    h = cc.J**exponent
    rows = op.m[(op.m >= tp.m_c - h) & (op.m <= tp.m_c + h)]
    ms = op.m[(op.m >= rows[0] - 2) & (op.m <= rows[-1] + 2)]
    full = np.zeros(op.size)
    full[np.isin(op.m, ms)] = central_zone_solution(k, c1, c2, ms, refined=refined,
                                                    eta=exponent + 0.2)
    r = op.apply(full) - tp.E * full
    a = np.abs(full)
    mag = np.abs(op.diag) * a + abs(tp.E) * a
    mag[:-1] += np.abs(op.off1) * a[1:]
    mag[1:] += np.abs(op.off1) * a[:-1]
    mag[:-2] += np.abs(op.off2) * a[2:]
    mag[2:] += np.abs(op.off2) * a[:-2]
    sel = np.isin(op.m, rows)
    return float(np.max(np.abs(r[sel]) / mag[sel]))


def allowed_region_error(op: PentadiagonalOperator, cc: ContinuumCoefficients, E0: float,
                         sigma1: int, sigma2: int, lo: float, hi: float) -> dict:
    """DPI standing wave against the exact eigenvector nearest E0 on [lo, hi].

    The branch (sigma1, sigma2) must have real q on the window.  A complex
    coefficient lam is fitted so that lam g + c.c. matches the eigenvector;
    the error is measured relative to the local envelope 2 |lam g|.
    """
    ex = exact_spectrum(op)
    E, vec = ex.nearest(E0)
    sel = (op.m >= lo) & (op.m <= hi)
    m = op.m[sel]
    br = make_branch(cc, E, m, sigma1, sigma2, anchor=float(m[0]), monitor=False)
    g = branch_values(br)
    lam, _ = fit_conjugate_pair(vec[sel], g)
    fit = 2 * (lam * g).real
    env = 2 * abs(lam) * np.abs(g)
    err = np.abs(fit - vec[sel]) / env
    zones = []
    for tp in locate_turning_points(cc, E):
        w, nominal = failure_zone(cc, E, tp)
        w = w if math.isfinite(w) else nominal
        zones.append({"m_c": tp.m_c, "type": tp.type, "halfwidth": w,
                      "distance_in_halfwidths": min(abs(lo - tp.m_c), abs(hi - tp.m_c)) / w
                      if lo > tp.m_c or hi < tp.m_c else 0.0})
    return {"E": E, "lo": lo, "hi": hi, "max_error": float(err.max()),
            "rms_error": float(np.sqrt(np.mean(err**2))), "turning_points": zones}
