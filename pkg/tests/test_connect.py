import math

import numpy as np
import pytest

from dpi5.connect import (CentralZoneError, WrongType, amplitude_ratio, central_zone_solution,
                          connect_A, connect_B, connect_B_bar, connection_constants,
                          connection_report, maslov_phase, maslov_phase_bar, parity,
                          write_connection_json)
from dpi5.model import build_from_table, build_ramp, build_synth1, ramp_rows
from dpi5.oracle import exact_spectrum, fit_basis
from dpi5.smooth import extend_coefficients
from dpi5.turning import locate_turning_points
from dpi5.validation import central_zone_residual, connection_end_to_end


def synth_b(J, E=-6.5):
    op = build_synth1(J)
    cc = extend_coefficients(op, J)
    return op, cc, [t for t in locate_turning_points(cc, E) if t.type == "B"][0]


def ramp_b(J, E=-18.0):
    op = build_ramp(J, t1=-8.0)
    cc = extend_coefficients(op, J)
    return op, cc, [t for t in locate_turning_points(cc, E) if t.type == "B"][0]


def barred_ramp(J):
    """Ramp with w, t2 negated: t1 < 0, t2 < 0, a B-bar point at m = 0 for E = 18."""
    op = build_from_table([(m, -w, t1, -t2) for m, w, t1, t2 in ramp_rows(J)])
    cc = extend_coefficients(op, J)
    return op, cc, locate_turning_points(cc, 18.0)[0]


def test_constants_on_synth1():
    _, cc, tp = synth_b(400)
    k = connection_constants(cc, tp)
    assert k.a1 == pytest.approx(0.5, abs=1e-12)
    assert k.a1 == pytest.approx(4 * k.tc[2] * math.sinh(k.kappa_c) ** 2, rel=1e-12)
    assert k.a3 == pytest.approx(k.b2 / 2, abs=1e-12)
    assert abs(k.b3 - k.b3_disc) / abs(k.b3) < 1e-6
    assert k.alpha > 0
    assert k.orientation == -1  # complex side lies below m_c
    assert k.residuals["energy_at_mc"] < 1e-12


def test_refined_centre_and_slope():
    _, cc, tp = ramp_b(200)
    k1 = connection_constants(cc, tp, 1, 1)
    k2 = connection_constants(cc, tp, 1, -1)
    # with constant hoppings the first-derivative terms vanish
    assert k1.a2 == 0 and k1.b2 == 0
    assert k1.b3p == pytest.approx(k1.b3) and k2.mcp == pytest.approx(tp.m_c)
    z = k1.zeta(np.array([tp.m_c + 5.0]))
    assert z[0] == pytest.approx(-5.0 * np.cbrt(k1.b3 / k1.a1))


def test_amplitude_and_phase_table():
    assert amplitude_ratio(1, 1) == 0.5 and amplitude_ratio(-1, -1) == 0.5
    assert amplitude_ratio(1, -1) == 1.0 and amplitude_ratio(-1, 1) == 1.0
    assert maslov_phase(1, 1) == pytest.approx(math.pi / 2)
    assert maslov_phase(1, -1) == pytest.approx(-math.pi / 2)
    assert maslov_phase(-1, 1) == 0 and maslov_phase(-1, -1) == 0
    assert maslov_phase_bar(1, 1) == 0 and maslov_phase_bar(1, -1) == 0
    assert maslov_phase_bar(-1, 1) == pytest.approx(-math.pi / 2)
    assert maslov_phase_bar(-1, -1) == pytest.approx(math.pi / 2)


def test_connect_b_rows_unmirrored():
    _, cc, tp = ramp_b(200)
    k = connection_constants(cc, tp)
    assert k.orientation == 1
    r = connect_B(k, 1, 1, A=2.0)
    assert r.B == pytest.approx(1.0) and r.Delta == pytest.approx(math.pi / 2) and r.uses_bi
    for s2 in (1, -1):
        r = connect_B(k, -1, s2)
        assert r.Delta == 0
        assert r.B == pytest.approx(r.A if s2 == 1 else r.A / 2)  # halved when s1 = s2
        assert r.uses_bi == (s2 == -1)  # Ai pairs with sigma2 = -sigma1
    rows = connection_report(k)["map"]
    assert len(rows) == 4 and {row["airy"] for row in rows} == {"Ai", "Bi"}


def test_connect_b_mirrored_point_flips_sigma2():
    _, cc, tp = synth_b(200)
    k = connection_constants(cc, tp)
    r = connect_B(k, 1, 1)
    assert r.sigma2f == -1 and r.Delta == pytest.approx(-math.pi / 2) and r.B == pytest.approx(1.0)


def test_b_bar_gauge_amplitudes():
    J = 200
    _, ccb, tpb = barred_ramp(J)
    assert tpb.type == "B̄" and tpb.m_c == pytest.approx(0.0, abs=1e-9)
    # the gauge-and-negation image of this operator is the plain ramp at E = -18
    _, cc, tp = ramp_b(J)
    lm, rm = np.array([-41.0, -40.0]), np.array([40.0, 41.0])
    for s1 in (1, -1):
        for s2 in (1, -1):
            rb = connect_B_bar(ccb, tpb, s1, s2)
            r = connect_B(connection_constants(cc, tp, s1, s2))
            assert rb.B == pytest.approx(r.B)
            assert rb.right(rm) == pytest.approx(parity(cc, rm) * r.right(rm), rel=1e-9)
            ratio = rb.left(lm) / (parity(cc, lm) * r.left(lm))
            assert np.abs(ratio) == pytest.approx(1.0, rel=1e-9)
            # the literal barred form differs from the gauge image by a constant i s1 s2
            assert ratio == pytest.approx(1j * s1 * s2, abs=1e-9)


def test_b_bar_end_to_end_amplitude():
    op, cc, tp = barred_ramp(200)
    res = connection_end_to_end(op, cc, tp)
    assert res["type"] == "B̄"
    assert res["amplitude_error"] < 0.1
    # a constant factor i s1 s2 on the exponential side shows up as a sign flip here
    assert abs(res["phase_error"] - math.pi) < 0.05


def test_b_bar_positive_t2_goes_through_gauge():
    op = build_synth1(100)
    gauged = build_from_table([(m, w, -t1, t2) for m, w, t1, t2 in op.rows()])
    cc = extend_coefficients(gauged, 100)
    tp = [t for t in locate_turning_points(cc, -6.5) if t.type == "B̄"][0]
    r = connect_B_bar(cc, tp)
    assert r.constants.gauge and r.kind.startswith("B̄")
    _, cc0, tp0 = synth_b(100)
    r0 = connect_B(connection_constants(cc0, tp0))
    m = np.array([tp.m_c + 10.0, tp.m_c + 11.0])
    assert r.left(m) == pytest.approx(parity(cc, m) * r0.left(m), rel=1e-9)


def test_central_zone_residual_shrinks_with_J():
    res = []
    for J in (100, 400):
        op, cc, tp = ramp_b(J)
        res.append(central_zone_residual(op, cc, tp, 1.0, 0.0))
    assert res[0] / res[1] >= 2.0
    assert res[1] < 1e-4


def test_central_zone_guard():
    _, cc, tp = ramp_b(100)
    k = connection_constants(cc, tp)
    with pytest.raises(CentralZoneError):
        central_zone_solution(k, 1.0, 0.0, [tp.m_c + 40.0])


@pytest.mark.parametrize("J", [200, 400])
def test_connect_a_against_eigenvector(J):
    op = build_ramp(J, t1=-8.0)
    cc = extend_coefficients(op, J)
    E, vec = exact_spectrum(op).nearest(-14.0)
    tp = [t for t in locate_turning_points(cc, E) if t.type == "A"][0]
    a = connect_A(cc, tp)
    assert a.orientation == 1 and not a.passthrough
    m = op.m[(op.m > tp.m_c - 0.4 * J) & (op.m < tp.m_c - 0.1 * J)]
    (A,), misfit = fit_basis(vec[np.isin(op.m, m)], [a.allowed(m)])
    # a phase error delta leaves a misfit of about |sin delta|
    assert misfit < 0.05 * 200 / J
    mf = op.m[(op.m > tp.m_c + 2 * J ** (1 / 3)) & (op.m < tp.m_c + 0.1 * J)]
    ratio = vec[np.isin(op.m, mf)] / (A * a.forbidden(mf))
    assert np.all(np.abs(ratio - 1) < 0.06)


def test_wrong_types():
    cc = extend_coefficients(build_synth1(100), 100)
    tps = {t.type: t for t in locate_turning_points(cc, -6.5)}
    with pytest.raises(WrongType):
        connection_constants(cc, tps["A"])
    with pytest.raises(WrongType):
        connect_A(cc, tps["B"])
    with pytest.raises(WrongType):
        connect_B_bar(cc, tps["B"])
    with pytest.raises(ValueError):
        connection_constants(cc, tps["B"], 0, 1)


def test_report_json(tmp_path):
    _, cc, tp = ramp_b(100)
    rep = connection_report(connection_constants(cc, tp))
    write_connection_json(rep, tmp_path / "c.json")
    text = (tmp_path / "c.json").read_text()
    assert "identity_residuals" in text and "B_over_A" in text
