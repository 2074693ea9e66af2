import cmath
import math

import numpy as np
import pytest
from scipy.linalg import eigh

from dpi5.eikonal import kappa_chi
from dpi5.model import PentadiagonalOperator, SpinModelParams, build_fe8_operator, build_synth1
from dpi5.oracle import (MAX_DIM, OracleError, compare, exact_spectrum, fit_basis,
                         fit_conjugate_pair, fit_envelope, integrate_recursion,
                         write_sequence_csv, write_spectrum_csv)
from dpi5.smooth import extend_coefficients
from dpi5.turning import locate_turning_points

from conftest import constant_operator


def test_two_by_two_closed_form():
    w0, w1, t = 0.3, -1.1, 0.7
    op = PentadiagonalOperator(0.0, [w0, w1], [t], [])
    vals = exact_spectrum(op).eigenvalues
    mid, half = (w0 + w1) / 2, math.sqrt((w0 - w1) ** 2 / 4 + t * t)
    assert vals == pytest.approx([mid - half, mid + half], abs=1e-14)


def test_diagonal_only():
    d = np.array([3.0, -1.0, 2.5, 0.0, -7.0, 4.0])
    op = PentadiagonalOperator(0.0, d, np.zeros(5), np.zeros(4))
    assert np.array_equal(exact_spectrum(op).eigenvalues, np.sort(d))


def test_fe8_even_odd_blocks():
    op = build_fe8_operator(SpinModelParams(J=10))
    full = exact_spectrum(op).eigenvalues
    T = op.to_dense()
    even = np.arange(0, op.size, 2)
    odd = np.arange(1, op.size, 2)
    blocks = np.sort(np.concatenate([np.linalg.eigvalsh(T[np.ix_(even, even)]),
                                     np.linalg.eigvalsh(T[np.ix_(odd, odd)])]))
    assert np.abs(full - blocks).max() < 1e-10


def test_against_dense_reference():
    rng = np.random.default_rng(3)
    for n in (5, 37, 200):
        op = PentadiagonalOperator(0.0, rng.normal(size=n), rng.normal(size=n - 1),
                                   rng.normal(size=n - 2))
        sol = exact_spectrum(op)
        assert np.abs(sol.eigenvalues - eigh(op.to_dense(), eigvals_only=True)).max() < 1e-10
        assert sol.max_residual < 1e-10 and sol.max_orthogonality < 1e-10


def test_dimension_limit():
    op = PentadiagonalOperator(0.0, np.zeros(MAX_DIM + 1), np.zeros(MAX_DIM), np.zeros(MAX_DIM - 1))
    with pytest.raises(OracleError):
        exact_spectrum(op)


def test_bloch_wave_propagation():
    w, t1, t2 = 0.4, -1.3, 0.6
    op = constant_operator(w, t1, t2, n=140)
    q = 0.83
    E = w + 2 * t1 * math.cos(q) + 2 * t2 * math.cos(2 * q)
    m = op.m
    start = 120.0
    seed = [cmath.exp(1j * q * (start - k)) for k in range(4)]
    sol = integrate_recursion(op, E, seed, "down", start=start)
    C = sol.values(ref=start)
    sel = (m <= start) & (m > start - 100)
    assert np.abs(C[sel] - np.exp(1j * q * m[sel])).max() < 1e-10
    up = integrate_recursion(op, E, [cmath.exp(1j * q * (10 + k)) for k in range(4)], "up",
                             start=10.0)
    sel = (m >= 10) & (m < 110)
    assert np.abs(up.values(ref=10.0)[sel] - np.exp(1j * q * m[sel])).max() < 1e-10


def test_zero_seed():
    op = build_synth1(100)
    sol = integrate_recursion(op, -6.5, [0.0, 0.0], "down")
    assert np.all(sol.C == 0)


@pytest.fixture(scope="module")
def fe8_top():
    """Highest state of a J=60 zero-field Fe8 chain: peaked at m=0, decaying to both edges.

    At zero field the even and odd sublattices decouple, so each carries a
    single pair of exponential modes and the decaying one is unambiguous.
    """
    op = build_fe8_operator(SpinModelParams(J=60))
    ex = exact_spectrum(op)
    return op, ex.eigenvalues[-1], ex.eigenvectors[:, -1]


def test_decaying_tail_matches_eigenvector(fe8_top):
    op, E, vec = fe8_top
    # the top state lives on the odd sublattice; seed that one from the top edge
    C = integrate_recursion(op, E, [0.0, 1.0], "down").values()
    sel = (op.m >= 10) & (op.m <= 40) & (np.abs(vec) > 1e-12)
    ratio = vec[sel] / C[sel]
    assert np.ptp(ratio) / abs(np.mean(ratio)) < 0.01


def test_backward_stability_of_eigenvector(fe8_top):
    op, E, vec = fe8_top
    i0 = op.index(40.0)
    seed = [vec[i0 - k] for k in range(4)]
    C = integrate_recursion(op, E, seed, "down", start=40.0).values(ref=40.0)
    sel = (op.m <= 40.0) & (op.m >= -10.0)
    assert np.abs(C[sel] - vec[sel]).max() / np.abs(vec[sel]).max() < 1e-8


def test_rescaling_records_log_factor():
    op = constant_operator(0.0, -2.0, 1.0, n=900)
    sol = integrate_recursion(op, -20.0, [1e-3, 1e-3], "down")  # strongly growing downward
    assert sol.log_scale.max() > math.log(1e100)
    assert np.all(np.isfinite(sol.C))


def test_fit_envelope_recovers_model():
    m = np.arange(0.0, 60.0)
    x = m - 29.5  # parameters refer to the window midpoint
    y = 2.5 * np.exp(-0.07 * x) * np.cos(0.9 * x + 0.4)
    f = fit_envelope(m, y, (0, 59))
    assert (f.R, f.kappa, f.chi, f.phi) == pytest.approx((2.5, 0.07, 0.9, 0.4), abs=1e-6)
    pure = fit_envelope(m, np.cos(1.3 * m + 0.2), (0, 59))
    assert abs(pure.kappa) < 1e-4
    exp = fit_envelope(m, 3 * np.exp(-0.2 * m), (0, 59), oscillating=False)
    assert exp.kappa == pytest.approx(0.2, abs=1e-8)
    with pytest.raises(OracleError):
        fit_envelope(m, y, (0, 5))


def test_envelope_fit_matches_kappa_chi():
    J = 200
    op = build_synth1(J)
    cc = extend_coefficients(op, J)
    tp = locate_turning_points(cc, -6.5)[0]
    C = integrate_recursion(op, -6.5, [1.0, 0.3], "down").values(ref=tp.m_c)
    hi = tp.m_c - 0.2 * J
    sel = (op.m >= hi - 14) & (op.m <= hi)
    m, y = op.m[sel], C[sel] / np.abs(C[sel]).max()
    f = fit_envelope(m, y, (hi - 14, hi))
    # a constant-rate fit weights the window by |C|^2, so compare with that mean
    kc = np.array([kappa_chi(cc, -6.5, x, 1)[:2] for x in m])
    wgt = np.abs(y) ** 2
    kappa, chi = (kc * wgt[:, None]).sum(axis=0) / wgt.sum()
    assert f.kappa == pytest.approx(kappa, rel=0.02)
    assert f.chi == pytest.approx(chi, rel=0.02)


def test_basis_fits():
    x = np.linspace(0, 5, 40)
    g = np.exp(1j * 1.7 * x) / (1 + x)
    lam = 0.3 - 0.8j
    C = (lam * g + np.conj(lam * g)).real
    got, rel = fit_conjugate_pair(C, g)
    assert got == pytest.approx(lam, abs=1e-12) and rel < 1e-12
    coef, rel = fit_basis(2 * x + 3 * x**2, [x, x**2])
    assert coef == pytest.approx([2, 3])


def test_compare():
    x = np.linspace(0, 10, 50)
    y = np.cos(x) + 0.1j
    cmp = compare(y, y)
    assert cmp.max_error < 1e-14 and cmp.phase_drift < 1e-14
    cmp = compare(y, (1 + 1j) * y)
    assert cmp.scale == pytest.approx(1 + 1j) and cmp.max_error < 1e-12
    with pytest.raises(OracleError):
        compare(y, y, mask=np.zeros(50, dtype=bool))


def test_writers(tmp_path):
    op = build_synth1(50)
    sol = exact_spectrum(op, eigvals_only=True)
    write_spectrum_csv(sol, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "index,E" and len(lines) == op.size + 1
    write_sequence_csv(op.m, np.ones(op.size), tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().startswith("m,Re(C),Im(C)\n")
