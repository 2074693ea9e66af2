"""Exact references: banded eigensolve, direct recursion integration, fits.

These are the ground truth the asymptotic machinery is measured against.
Decaying solutions of the recursion are minimal solutions, so they are
obtained by integrating from the side where they are largest toward the
side where they decay away: any contaminant then shrinks relative to them.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import eig_banded
from scipy.optimize import least_squares

from .model import PentadiagonalOperator

MAX_DIM = 20001
_RESCALE = 1e100


class OracleError(ArithmeticError):
    pass


@dataclass
class ExactSolution:
    m: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None  # columns
    max_residual: float = 0.0
    max_orthogonality: float = 0.0

    def nearest(self, E: float) -> tuple[float, np.ndarray]:
        k = int(np.argmin(np.abs(self.eigenvalues - E)))
        return float(self.eigenvalues[k]), self.eigenvectors[:, k]


def operator_norm_bound(op: PentadiagonalOperator) -> float:
    """Largest absolute row sum, an upper bound on the 2-norm."""
    rows = np.abs(op.diag).copy()
    rows[:-1] += np.abs(op.off1)
    rows[1:] += np.abs(op.off1)
    rows[:-2] += np.abs(op.off2)
    rows[2:] += np.abs(op.off2)
    return float(rows.max()) if rows.size else 0.0


def exact_spectrum(op: PentadiagonalOperator, eigvals_only: bool = False,
                   check: bool = True) -> ExactSolution:
    """All eigenpairs of the symmetric pentadiagonal operator."""
    if op.size > MAX_DIM:
        raise OracleError(f"dimension {op.size} exceeds {MAX_DIM}")
    ab = op.banded_upper()
    if eigvals_only:
        vals = eig_banded(ab, lower=False, eigvals_only=True)
        return ExactSolution(op.m.copy(), vals, None)
    vals, vecs = eig_banded(ab, lower=False)
    sol = ExactSolution(op.m.copy(), vals, vecs)
    if check:
        norm = max(operator_norm_bound(op), 1e-300)
        res = np.abs(op.apply(vecs) - vecs * vals).max(axis=0)
        sol.max_residual = float(res.max()) / norm
        gram = vecs.T @ vecs
        sol.max_orthogonality = float(np.abs(gram - np.eye(op.size)).max())
        if sol.max_residual > 1e-10 or sol.max_orthogonality > 1e-10:
            raise OracleError(
                f"eigenpair check failed: residual {sol.max_residual:.2g}, "
                f"orthogonality {sol.max_orthogonality:.2g}"
            )
    return sol


@dataclass
class RecursionSolution:
    """C_m = C[i] * exp(log_scale[i]) at site m[i]."""

    m: np.ndarray
    C: np.ndarray
    log_scale: np.ndarray
    E: float
    direction: str
    seed: tuple = field(default=())

    def values(self, ref: float | None = None) -> np.ndarray:
        """Unscaled values relative to the scale at site ``ref`` (default: largest)."""
        if ref is None:
            base = float(self.log_scale.max())
        else:
            base = float(self.log_scale[int(np.argmin(np.abs(self.m - ref)))])
        return self.C * np.exp(self.log_scale - base)


def integrate_recursion(op: PentadiagonalOperator, E: float, seed, direction: str = "down",
                        start: float | None = None) -> RecursionSolution:
    """Apply the five-term recursion row by row from a seed.

    With a two-value seed the start is the matrix edge (top for "down",
    bottom for "up") and the edge rows act as boundary conditions.  A
    four-value seed gives C at four consecutive sites beginning at
    ``start`` and moving in ``direction``.
    """
    if direction not in ("down", "up"):
        raise ValueError("direction must be 'down' or 'up'")
    seed = np.asarray(seed)
    n = op.size
    dtype = complex if np.iscomplexobj(seed) else float
    C = np.zeros(n, dtype=dtype)
    logs = np.zeros(n)
    d = op.diag - E
    b1, b2 = op.off1, op.off2

    def elem(i, j):  # t[i, j] with |i - j| <= 2, zero outside the matrix
        if j < 0 or j >= n:
            return 0.0
        lo, k = min(i, j), abs(i - j)
        return d[i] if k == 0 else (b1[lo] if k == 1 else b2[lo])

    # work in "down" orientation by reflecting indices for "up"
    idx = (lambda i: i) if direction == "down" else (lambda i: n - 1 - i)
    if seed.size == 2:
        first = n - 1
        C[idx(first)], C[idx(first - 1)] = seed
        filled = 2
    elif seed.size == 4:
        if start is None:
            raise ValueError("a four-value seed needs a start site")
        first = n - 1 - op.index(start) if direction == "up" else op.index(start)
        for k in range(4):
            C[idx(first - k)] = seed[k]
        filled = 4
    else:
        raise ValueError("seed must hold 2 (edge) or 4 (interior) values")
    if first + 1 < n:
        for i in range(first + 1, n):
            C[idx(i)] = np.nan
    scale = 0.0
    # row (target + 2), in reflected numbering, links sites target .. target + 4
    for target in range(first - filled, -1, -1):
        row = target + 2
        ri = idx(row)
        s = 0.0
        for off in (2, 1, 0, -1):
            j = row + off
            if j <= first:
                s += elem(ri, idx(j)) * C[idx(j)]
        t = elem(ri, idx(target))
        if t == 0:
            raise OracleError(f"vanishing t2 at site {op.m[ri]}: recursion cannot continue")
        C[idx(target)] = -s / t
        logs[idx(target)] = scale
        big = abs(C[idx(target)])
        if big > _RESCALE:
            if not math.isfinite(big):
                raise OracleError("overflow beyond rescaling capacity")
            window = [idx(j) for j in range(target, min(target + 4, first + 1))]
            C[window] /= big
            scale += math.log(big)
            logs[window] = scale
    return RecursionSolution(op.m.copy(), C, logs, float(E), direction, tuple(np.ravel(seed)))


@dataclass
class EnvelopeFit:
    """C_m ~ R exp(-kappa (m - m0)) cos(chi (m - m0) + phi) over a window."""

    R: float
    kappa: float
    chi: float
    phi: float
    m0: float
    residual: float  # rms misfit relative to rms data
    ill_conditioned: bool

    def __call__(self, m):
        x = np.asarray(m, dtype=float) - self.m0
        return self.R * np.exp(-self.kappa * x) * np.cos(self.chi * x + self.phi)


def _prony(x, y):
    """Linear-prediction estimate of exp(-kappa +/- i chi) from y[k+1] = p y[k] + r y[k-1]."""
    M = np.column_stack([y[1:-1], y[:-2]])
    (p, r), *_ = np.linalg.lstsq(M, y[2:], rcond=None)
    roots = np.roots([1.0, -p, -r])
    z = roots[np.argmax(np.abs(roots.imag))] if np.any(np.abs(roots.imag) > 0) else roots[0]
    kappa = -math.log(max(abs(z), 1e-300))
    chi = abs(cmath_phase(z))
    return kappa, chi


def cmath_phase(z) -> float:
    return math.atan2(float(np.imag(z)), float(np.real(z)))


def fit_envelope(m, C, window, oscillating: bool = True) -> EnvelopeFit:
    """Least-squares damped-cosine (or pure exponential) fit on ``window`` = (lo, hi)."""
    m = np.asarray(m, dtype=float)
    C = np.asarray(C, dtype=float)
    sel = (m >= window[0]) & (m <= window[1])
    x, y = m[sel], C[sel]
    if x.size < 12:
        raise OracleError("fit window needs at least 12 samples")
    if not np.all(np.isfinite(y)):
        raise OracleError("non-finite samples in fit window")
    m0 = 0.5 * (x[0] + x[-1])
    u = x - m0
    yscale = float(np.sqrt(np.mean(y**2))) or 1.0
    yn = y / yscale
    if oscillating:
        k0, c0 = _prony(u, yn)
        basis = np.exp(-k0 * u)
        (a, b), *_ = np.linalg.lstsq(np.column_stack([basis * np.cos(c0 * u),
                                                      basis * np.sin(c0 * u)]), yn, rcond=None)
        p0 = [math.hypot(a, b), k0, c0, math.atan2(-b, a)]

        def model(p):
            return p[0] * np.exp(-p[1] * u) * np.cos(p[2] * u + p[3])
    else:
        lin = np.polyfit(u, np.log(np.abs(yn) + 1e-300), 1)
        sign = np.sign(np.mean(yn)) or 1.0
        p0 = [sign * math.exp(lin[1]), -lin[0]]

        def model(p):
            return p[0] * np.exp(-p[1] * u)
    res = least_squares(lambda p: model(p) - yn, p0, method="lm", xtol=1e-15, ftol=1e-15,
                        gtol=1e-15, max_nfev=2000)
    p = res.x
    jac = res.jac
    cond = np.linalg.cond(jac) if jac.size else np.inf
    rms = float(np.sqrt(np.mean(res.fun**2)))
    if oscillating:
        R, kappa, chi, phi = p
        if R < 0:
            R, phi = -R, phi + math.pi
        if chi < 0:
            chi, phi = -chi, -phi
        phi = math.remainder(phi, 2 * math.pi)
    else:
        R, kappa = p
        chi, phi = 0.0, 0.0
    return EnvelopeFit(R * yscale, kappa, chi, phi, m0, rms, bool(cond > 1e12))


def fit_basis(C, basis) -> tuple[np.ndarray, float]:
    """Real coefficients c minimising |C - sum_k c_k basis_k|; returns (c, relative rms misfit)."""
    A = np.column_stack(basis)
    coef, *_ = np.linalg.lstsq(A, C, rcond=None)
    fit = A @ coef
    return coef, float(np.linalg.norm(C - fit) / np.linalg.norm(C))


def fit_conjugate_pair(C, g) -> tuple[complex, float]:
    """Complex lam with C ~ lam g + conj(lam g), by real least squares."""
    g = np.asarray(g, dtype=complex)
    coef, rel = fit_basis(np.asarray(C, dtype=float), [2 * g.real, -2 * g.imag])
    return complex(coef[0], coef[1]), rel


@dataclass
class Comparison:
    scale: complex
    max_error: float
    rms_error: float
    phase_drift: float
    n: int


def sliding_envelope(C, halfwidth: int = 8) -> np.ndarray:
    a = np.abs(np.asarray(C))
    out = np.empty(a.size)
    for i in range(a.size):
        out[i] = a[max(0, i - halfwidth): i + halfwidth + 1].max()
    return out


def compare(dpi_C, exact_C, mask=None, envelope=None) -> Comparison:
    """Errors of the DPI sequence after optimal complex scaling onto the exact one.

    Pointwise errors are taken relative to an envelope (default: a sliding
    maximum of |exact|), so nodes of an oscillating solution do not dominate.
    The phase drift is the change in the optimal scale's argument between
    the first and last thirds of the mask.
    """
    d = np.asarray(dpi_C, dtype=complex)
    e = np.asarray(exact_C, dtype=complex)
    mask = np.ones(d.size, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if not mask.any():
        raise OracleError("comparison mask is empty")
    env = sliding_envelope(e) if envelope is None else np.asarray(envelope, dtype=float)
    dm, em, vm = d[mask], e[mask], env[mask]
    scale = complex(np.vdot(dm, em) / np.vdot(dm, dm))
    err = np.abs(scale * dm - em) / vm
    k = max(dm.size // 3, 1)
    s1 = np.vdot(dm[:k], em[:k]) / np.vdot(dm[:k], dm[:k])
    s2 = np.vdot(dm[-k:], em[-k:]) / np.vdot(dm[-k:], dm[-k:])
    drift = abs(math.remainder(cmath_phase(s2 / s1), 2 * math.pi))
    return Comparison(scale, float(err.max()), float(np.sqrt(np.mean(err**2))), drift, int(dm.size))


def write_spectrum_csv(sol: ExactSolution, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "E"])
        for i, e in enumerate(sol.eigenvalues):
            w.writerow([i, f"{e:.17g}"])


def write_sequence_csv(m, C, path: str | Path) -> None:
    C = np.asarray(C)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "Re(C)", "Im(C)"])
        for x, c in zip(m, C):
            w.writerow([f"{x:.17g}", f"{np.real(c):.17g}", f"{np.imag(c):.17g}"])
