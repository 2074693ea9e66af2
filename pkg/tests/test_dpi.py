import numpy as np
import pytest

from dpi5.connect import connect_B, connection_constants
from dpi5.dpi import (MaskViolation, ZeroVelocity, amplitude, branch_q, branch_values,
                      dpi_wavefunction, integrate, make_branch, phase_integral, phi2_estimate,
                      write_manifest, write_wavefunction_csv)
from dpi5.eikonal import kappa_chi
from dpi5.model import build_ramp, build_synth1
from dpi5.smooth import extend_coefficients
from dpi5.turning import locate_turning_points, nearest_branch


def ramp(J):
    op = build_ramp(J, t1=-8.0, lo=-1, hi=1)
    cc = extend_coefficients(op, J)
    return op, cc


def test_constant_band_phase_and_plane_wave(const_cc):
    E = -1.0
    m = np.arange(5.0, 31.0)
    br = make_branch(const_cc, E, m, -1, 1)  # cos q = (2 - sqrt 8) / 4, real q
    q = br.q[0]
    assert q.imag == 0
    assert np.allclose(br.q, q)
    assert np.allclose(br.phi0, q * (m - m[0]), atol=1e-12)
    assert phase_integral(br, 20.0) == pytest.approx(q * 15.0, abs=1e-12)
    assert integrate(lambda x: br.q_at(x), 20.0, 5.0) == pytest.approx(-q * 15.0, abs=1e-12)
    vals = branch_values(br)
    assert np.allclose(np.abs(vals), np.abs(vals[0]), rtol=1e-12)
    assert np.allclose(br.phi2, 0.0, atol=1e-12)
    assert br.valid.all()


def test_amplitude_definitions():
    assert amplitude(4.0) == pytest.approx(0.5)
    v = np.array([1 + 2j, -3 + 0.5j, 0.2 - 4j])
    a = amplitude(v)
    assert np.allclose(np.abs(a) ** 2 * np.abs(v), 1.0)
    with pytest.raises(ZeroVelocity):
        amplitude(0.0)


def test_amplitude_exponent_near_turning_point():
    J = 400
    _, cc = ramp(J)
    tp = [t for t in locate_turning_points(cc, -18.0) if abs(t.m_c) < 1][0]
    s1, s2 = nearest_branch(cc, -18.0, tp, 1)
    dm = np.geomspace(J**0.4, J**0.6, 30)
    br = make_branch(cc, -18.0, tp.m_c + dm, s1, s2, monitor=False)
    slope = np.polyfit(np.log(dm), np.log(np.abs(amplitude(br.v))), 1)[0]
    assert abs(slope + 0.25) < 0.02


def test_phi2_order_inverse_j():
    # far from turning points: allowed region of SYNTH1 at E = 0
    vals = []
    for J in (400, 1600):
        cc = extend_coefficients(build_synth1(J), J)
        m = J * np.linspace(0.5, 0.9, 9)
        br = make_branch(cc, 0.0, m, -1, 1, monitor=False)
        vals.append(np.abs(phi2_estimate(br, m, ref=float(m[-1]))).max())
    assert 3 <= vals[0] / vals[1] <= 5


def test_phi2_exponent_near_turning_point():
    J = 800
    _, cc = ramp(J)
    tp = [t for t in locate_turning_points(cc, -18.0) if abs(t.m_c) < 1][0]
    s1, s2 = nearest_branch(cc, -18.0, tp, 1)
    far = tp.m_c + 0.4 * J
    dm = np.geomspace(12, 60, 12)
    br = make_branch(cc, -18.0, np.append(tp.m_c + dm, far), s1, s2, monitor=False)
    p2 = np.abs(phi2_estimate(br, tp.m_c + dm, ref=far))
    slope = np.polyfit(np.log(dm), np.log(p2), 1)[0]
    assert abs(slope + 1.5) < 0.1


def test_matching_zone_phase_against_airy_form():
    J = 800
    _, cc = ramp(J)
    tp = [t for t in locate_turning_points(cc, -18.0) if abs(t.m_c) < 1][0]
    k = connection_constants(cc, tp, 1, 1)
    for dm in (8.0, 12.0, 16.0):
        m = tp.m_c + k.orientation * dm
        zeta = float(k.zeta(m))
        for s2 in (1, -1):
            phase = integrate(lambda x: np.array([kappa_chi(cc, -18.0, y, s2)[2] for y in x]),
                              tp.m_c, m, singular_at_a=True)
            got = 1j * k.orientation * phase
            ref = -s2 * tp.kappa_c * (m - tp.m_c) + 1j * (2 / 3) * (-zeta) ** 1.5
            assert abs(got.real - ref.real) / abs(ref.real) < 0.01
            assert abs(got.imag - ref.imag) / abs(ref.imag) < 0.01


def test_conjugate_pair_is_real():
    J = 400
    _, cc = ramp(J)
    tp = [t for t in locate_turning_points(cc, -18.0) if abs(t.m_c) < 1][0]
    res = connect_B(connection_constants(cc, tp, -1, 1))
    m = tp.m_c + np.arange(30.0, 80.0, 5.0)
    # the complex-side evaluator returns B Re(...): real with an exponential envelope
    vals = res.right(m)
    assert np.all(np.isreal(vals))
    kappa = np.array([kappa_chi(cc, -18.0, x, 1)[0] for x in m])
    assert np.all(kappa > 0.1)


def test_wavefunction_mask_and_writers(tmp_path, synth100):
    _, cc = synth100
    m = np.arange(60.0, 140.0)
    br = make_branch(cc, 0.0, m, -1, 1)
    wf = dpi_wavefunction([br], [1.0])
    assert wf.valid.all()
    near = make_branch(cc, -6.5, np.arange(96.0, 106.0), 1, 1)
    with pytest.raises(MaskViolation):
        dpi_wavefunction([near], [1.0], check_mask=True)
    write_wavefunction_csv(wf, tmp_path / "wf.csv")
    write_manifest([br], [1.0], tmp_path / "manifest.json")
    assert (tmp_path / "wf.csv").read_text().splitlines()[0] == "m,Re(C),Im(C),valid"


def test_branch_q_solves_eikonal(synth100):
    _, cc = synth100
    from dpi5.eikonal import semiclassical_energy
    for m in (40.0, 90.0, 104.0, 130.0):
        for s1 in (1, -1):
            for s2 in (1, -1):
                q = branch_q(cc, -6.5, m, s1, s2)
                assert abs(semiclassical_energy(cc, q, m) + 6.5) < 1e-9
