import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpi5.eikonal import (RegionMismatch, cosq_branches, kappa_chi, quartic_residual,
                          semiclassical_energy, solve_hj, track_branches, velocity)

J = 100


def test_energy_and_velocity_examples(synth100):
    _, cc = synth100
    m = J / 2
    assert semiclassical_energy(cc, 0.0, m) == pytest.approx(-2.0, abs=1e-12)
    assert semiclassical_energy(cc, math.pi, m) == pytest.approx(6.0, abs=1e-12)
    assert semiclassical_energy(cc, math.pi / 3, m) == pytest.approx(-3.0, abs=1e-12)
    assert velocity(cc, 0.0, m) == 0
    assert velocity(cc, math.pi / 3, m) == pytest.approx(0.0, abs=1e-12)
    assert velocity(cc, math.pi / 2, m) == pytest.approx(4.0, abs=1e-12)


def test_double_root_at_ustar(synth100):
    _, cc = synth100
    roots = solve_hj(cc, -3.0, J / 2)
    target = cmath.exp(1j * math.pi / 3)
    for r in roots:
        assert min(abs(r.zeta - target), abs(r.zeta - target.conjugate())) < 1e-6
    pair = cosq_branches(cc, -3.0, J / 2)
    assert pair.discriminant == pytest.approx(0.0, abs=1e-12)
    assert pair.plus == pytest.approx(0.5) and pair.minus == pytest.approx(0.5)


def test_band_top_double_root(const_cc):
    z = np.array([r.zeta for r in solve_hj(const_cc, 6.0, 10.0)])
    # one double pair at -1 (q = pi); the other pair is real, cos q = -2
    assert np.sum(np.abs(z + 1) < 1e-6) == 2
    other = z[np.abs(z + 1) >= 1e-6]
    assert abs(other[0] * other[1] - 1) < 1e-12


def test_mixed_region_roots(synth100):
    _, cc = synth100
    pair = cosq_branches(cc, -6.5, 1.2 * J)
    assert pair.f == pytest.approx(4.5)
    assert pair.discriminant == pytest.approx(16 * 1.44 - 18, abs=1e-12)
    r = math.sqrt(5.04)
    assert pair.plus.real == pytest.approx((4.8 + r) / 4, abs=1e-12)
    assert pair.minus.real == pytest.approx((4.8 - r) / 4, abs=1e-12)
    roots = solve_hj(cc, -6.5, 1.2 * J)
    z = np.array([x.zeta for x in roots])
    # cos q = 1.76 gives a real reciprocal pair, cos q = 0.64 a unit-circle pair
    real = z[np.abs(z.imag) < 1e-12]
    assert real.size == 2 and np.all(real.real > 0)
    assert abs(real[0] * real[1] - 1) < 1e-9
    assert np.sum(np.abs(np.abs(z) - 1) < 1e-12) == 2


def test_complex_cosq_pair_below_ustar(synth100):
    _, cc = synth100
    # with t2 > 0 the discriminant is negative for E < U_*, not above the band
    pair = cosq_branches(cc, -20.0, J / 2)
    assert pair.discriminant < 0
    assert pair.plus == pytest.approx(pair.minus.conjugate())
    above = cosq_branches(cc, 20.0, J / 2)
    assert above.discriminant > 0 and abs(above.plus) > 1 and abs(above.minus) > 1


@settings(max_examples=200, deadline=None)
@given(st.floats(25, 155), st.floats(-12, 12))
def test_reciprocal_pairs_and_residual(synth100, m, E):
    _, cc = synth100
    roots = solve_hj(cc, E, m)
    z = [r.zeta for r in roots]
    assert abs(z[0] * z[1] - 1) < 1e-9 and abs(z[2] * z[3] - 1) < 1e-9
    w, t1, t2 = (float(x) for x in cc.bands(m))
    for x in z:
        scale = abs(t2) * (abs(x) ** 2 + abs(x) ** -2) + abs(t1) * (abs(x) + 1 / abs(x)) + abs(w - E)
        assert quartic_residual(cc, E, m, x) / scale < 1e-10
        assert abs(semiclassical_energy(cc, -1j * cmath.log(x), m) - E) < 1e-9 * max(1, abs(E))


def test_kappa_chi_back_substitution(synth100):
    _, cc = synth100
    m, E = 1.05 * J, -6.5
    _, t1, t2 = (float(x) for x in cc.bands(m))
    assert t1 == pytest.approx(-4.2)
    for s2 in (1, -1):
        kappa, chi, qa, sa = kappa_chi(cc, E, m, s2)
        assert abs(cmath.cos(qa) - cosq_branches(cc, E, m).plus) < 1e-12 or \
            abs(cmath.cos(qa) - cosq_branches(cc, E, m).minus) < 1e-12
        assert semiclassical_energy(cc, qa, m) == pytest.approx(E, abs=1e-12)
        assert qa.imag == pytest.approx(s2 * kappa)
        # s_a = -i sigma2 v(q_a)
        assert sa == pytest.approx(-1j * s2 * velocity(cc, qa, m), abs=1e-12)
    sa_p = kappa_chi(cc, E, m, 1)[3]
    sa_m = kappa_chi(cc, E, m, -1)[3]
    assert sa_m == pytest.approx(sa_p.conjugate(), abs=1e-12)


def test_kappa_chi_turning_limit(synth100):
    _, cc = synth100
    E = -6.5
    mc = J * math.sqrt(4.5) / 2  # -2 - 4 (m/J)^2 = -6.5
    kappa, chi, _, _ = kappa_chi(cc, E, mc - 1e-7, 1)
    assert chi < 1e-3
    assert kappa == pytest.approx(math.acosh(4 * mc / J / 4), abs=1e-4)
    with pytest.raises(RegionMismatch):
        kappa_chi(cc, E, mc + 2, 1)


def test_tracking_topology(synth100, const_cc):
    _, cc = synth100
    tb = track_branches(cc, -6.5, np.round(np.arange(100.0, 130.0, 0.05), 10))
    z = tb.zeta
    before = z[np.searchsorted(tb.m, 104.0)]
    between = z[np.searchsorted(tb.m, 106.15)]  # m_c = 106.066 < m < m_t = 106.25
    after = z[np.searchsorted(tb.m, 112.0)]
    assert np.all(np.abs(before.imag) > 1e-3) and np.all(np.abs(np.abs(before) - 1) > 1e-3)
    assert np.all(np.abs(between.imag) < 1e-12) and np.all(between.real > 0)
    # past the A point one pair has moved onto the unit circle
    assert np.sum(np.abs(after.imag) < 1e-12) == 2
    assert np.sum(np.abs(np.abs(after) - 1) < 1e-12) == 2
    flat = track_branches(const_cc, -1.0, np.arange(5.0, 30.0, 0.5))
    assert np.allclose(flat.zeta, flat.zeta[0], atol=1e-12) and not flat.swaps
    top = track_branches(cc, 20.0, np.arange(40.0, 60.0, 0.5))
    assert np.all(np.abs(top.q.imag) > 1e-6) and not top.swaps
