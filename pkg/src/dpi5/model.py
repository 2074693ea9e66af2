"""Pentadiagonal symmetric operators for five-term recursions.

The operator stores only the upper bands of a real symmetric matrix
``t[m, n]`` with ``|m - n| <= 2``:

    diag[i] = t[m_i, m_i]
    off1[i] = t[m_i, m_i + 1]     (length n - 1)
    off2[i] = t[m_i, m_i + 2]     (length n - 2)

with ``m_i = m_min + i``.  ``m_min`` may be half-integer (spin models with
half-integer J); all index arithmetic is done on the integer offset ``i``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class ModelError(ValueError):
    """Invalid model parameters or table input."""


@dataclass(frozen=True)
class SpinModelParams:
    """Parameters of H = -k2 Jz^2 + (k1 - k2) Jx^2 - (hx Jx + hz Jz).

    Fields enter as g*mu_B*H already converted to kelvin.
    """

    J: float = 10.0
    k1: float = 0.33
    k2: float = 0.22
    hx: float = 0.0
    hz: float = 0.0
    fe8_regime: bool = True

    def __post_init__(self):
        if self.J <= 0:
            raise ModelError(f"J must be positive, got {self.J}")
        if abs(2 * self.J - round(2 * self.J)) > 1e-12:
            raise ModelError(f"J must be integer or half-integer, got {self.J}")
        if self.fe8_regime and not (self.k1 > self.k2 > 0):
            warnings.warn(
                f"Fe8 regime expects k1 > k2 > 0 (k1={self.k1}, k2={self.k2})",
                stacklevel=2,
            )


@dataclass(frozen=True)
class PentadiagonalOperator:
    m_min: float
    diag: np.ndarray
    off1: np.ndarray
    off2: np.ndarray
    label: str = ""

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=float)
        off1 = np.asarray(self.off1, dtype=float)
        off2 = np.asarray(self.off2, dtype=float)
        n = diag.size
        if off1.size != max(n - 1, 0) or off2.size != max(n - 2, 0):
            raise ModelError(
                f"band lengths {diag.size}/{off1.size}/{off2.size} inconsistent"
            )
        for name, arr in (("diag", diag), ("off1", off1), ("off2", off2)):
            if not np.all(np.isfinite(arr)):
                bad = int(np.flatnonzero(~np.isfinite(arr))[0])
                raise ModelError(f"non-finite {name} entry at m={self.m_min + bad}")
            arr.setflags(write=False)
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "off1", off1)
        object.__setattr__(self, "off2", off2)

    @property
    def size(self) -> int:
        return self.diag.size

    @property
    def m(self) -> np.ndarray:
        return self.m_min + np.arange(self.size)

    @property
    def m_max(self) -> float:
        return self.m_min + self.size - 1

    def index(self, m: float) -> int:
        i = m - self.m_min
        if abs(i - round(i)) > 1e-9 or not 0 <= round(i) < self.size:
            raise IndexError(f"m={m} outside [{self.m_min}, {self.m_max}]")
        return int(round(i))

    def element(self, m: float, n: float) -> float:
        """Matrix element t[m, n]; zero outside the band or the index range."""
        i, j = m - self.m_min, n - self.m_min
        if not (0 <= i < self.size and 0 <= j < self.size):
            return 0.0
        i, j = int(round(i)), int(round(j))
        i, j = min(i, j), max(i, j)
        k = j - i
        if k == 0:
            return float(self.diag[i])
        if k == 1:
            return float(self.off1[i])
        if k == 2:
            return float(self.off2[i])
        return 0.0

    def banded_upper(self) -> np.ndarray:
        """Upper banded storage in the LAPACK layout used by ``eig_banded``."""
        n = self.size
        ab = np.zeros((3, n))
        ab[2] = self.diag
        ab[1, 1:] = self.off1
        ab[0, 2:] = self.off2
        return ab

    def to_dense(self) -> np.ndarray:
        n = self.size
        T = np.diag(self.diag)
        if n > 1:
            T += np.diag(self.off1, 1) + np.diag(self.off1, -1)
        if n > 2:
            T += np.diag(self.off2, 2) + np.diag(self.off2, -2)
        return T

    def apply(self, c: np.ndarray) -> np.ndarray:
        """T @ c without forming T; c may be a vector or a matrix of columns."""
        c = np.asarray(c)
        ex = (slice(None),) + (None,) * (c.ndim - 1)
        d, b1, b2 = self.diag[ex], self.off1[ex], self.off2[ex]
        out = d * c
        out[:-1] += b1 * c[1:]
        out[1:] += b1 * c[:-1]
        out[:-2] += b2 * c[2:]
        out[2:] += b2 * c[:-2]
        return out

    def rows(self) -> list[tuple[float, float, float, float]]:
        """Rows (m, w, t1, t2) with t1 = t[m, m+1], t2 = t[m, m+2]; 0 past the edge."""
        n = self.size
        t1 = np.concatenate([self.off1, np.zeros(1)])[:n]
        t2 = np.concatenate([self.off2, np.zeros(2)])[:n]
        return [
            (float(m), float(w), float(a), float(b))
            for m, w, a, b in zip(self.m, self.diag, t1, t2)
        ]


def _ladder_factor(J: float, m: np.ndarray) -> np.ndarray:
    """<m+1| J+ |m> = sqrt(J(J+1) - m(m+1)), clipped at the chain ends."""
    return np.sqrt(np.clip(J * (J + 1) - m * (m + 1), 0.0, None))


def build_fe8_operator(params: SpinModelParams) -> PentadiagonalOperator:
    """Jz-basis matrix of the biaxial spin Hamiltonian with field in the x-z plane.

    Jx^2 = (J+^2 + J-^2 + J+J- + J-J+)/4 gives the diagonal piece
    (J(J+1) - m^2)/2 and the second band; -hx Jx gives the first band.
    """
    J = params.J
    m = -J + np.arange(int(round(2 * J)) + 1)
    if m.size < 1 or abs(m[-1] - J) > 1e-9:
        raise ModelError(f"|m| range mismatch for J={J}")
    d = params.k1 - params.k2
    diag = -params.k2 * m**2 + 0.5 * d * (J * (J + 1) - m**2) - params.hz * m
    off1 = -0.5 * params.hx * _ladder_factor(J, m[:-1])
    off2 = 0.25 * d * _ladder_factor(J, m[:-2]) * _ladder_factor(J, m[:-2] + 1)
    return PentadiagonalOperator(float(m[0]), diag, off1, off2, label="fe8")


def build_from_table(rows: Sequence[Sequence[float]]) -> PentadiagonalOperator:
    """Operator from rows (m, w, t1, t2), t1 = t[m, m+1] and t2 = t[m, m+2].

    The t1 of the last row and the t2 of the last two rows point past the
    matrix and are ignored.
    """
    rows = [tuple(float(x) for x in r) for r in rows]
    if len(rows) < 5:
        raise ModelError(f"need >= 5 rows, got {len(rows)}")
    for r in rows:
        if len(r) != 4:
            raise ModelError(f"row {r} does not have 4 columns (m, w, t1, t2)")
        if not all(math.isfinite(x) for x in r):
            raise ModelError(f"non-finite entry in row at m={r[0]}")
    arr = np.array(rows)
    m = arr[:, 0]
    steps = np.diff(m)
    if not np.allclose(steps, 1.0, atol=1e-9, rtol=0):
        k = int(np.flatnonzero(~np.isclose(steps, 1.0, atol=1e-9, rtol=0))[0])
        raise ModelError(f"gap in m between {m[k]} and {m[k + 1]}")
    return PentadiagonalOperator(
        float(m[0]), arr[:, 1], arr[:-1, 2], arr[:-2, 3], label="table"
    )


def read_table_csv(path: str | Path) -> PentadiagonalOperator:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"m", "w", "t1", "t2"} - set(reader.fieldnames or [])
        if missing:
            raise ModelError(f"{path}: missing columns {sorted(missing)}")
        rows = [
            (float(r["m"]), float(r["w"]), float(r["t1"]), float(r["t2"]))
            for r in reader
        ]
    return build_from_table(rows)


def write_table_csv(op: PentadiagonalOperator, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "w", "t1", "t2"])
        for row in op.rows():
            w.writerow([repr(x) for x in row])


def synth1_rows(J: float, lo: float = 0.2, hi: float = 1.6) -> list[tuple]:
    """Reference model w = 0, t2 = 1, t1(m) = -4m/J on [lo*J, hi*J].

    The table's t1 column is t[m, m+1] = -4(m + 1/2)/J so that the midpoint
    average reproduces -4m/J exactly.
    """
    m0, m1 = math.ceil(lo * J), math.floor(hi * J)
    return [(m, 0.0, -4.0 * (m + 0.5) / J, 1.0) for m in range(m0, m1 + 1)]


def build_synth1(J: float, lo: float = 0.2, hi: float = 1.6) -> PentadiagonalOperator:
    op = build_from_table(synth1_rows(J, lo, hi))
    return PentadiagonalOperator(op.m_min, op.diag, op.off1, op.off2, label="synth1")


def ramp_rows(
    J: float, t1: float = -8.0, t2: float = 1.0, slope: float = 1.0,
    lo: float = -1.0, hi: float = 1.0,
) -> list[tuple]:
    """Linear on-site ramp w = slope*m/J with constant hoppings."""
    m0, m1 = math.ceil(lo * J), math.floor(hi * J)
    return [(m, slope * m / J, t1, t2) for m in range(m0, m1 + 1)]


def build_ramp(J: float, **kw) -> PentadiagonalOperator:
    op = build_from_table(ramp_rows(J, **kw))
    return PentadiagonalOperator(op.m_min, op.diag, op.off1, op.off2, label="ramp")


def gauge_transform(op: PentadiagonalOperator) -> PentadiagonalOperator:
    """C_m -> (-1)^m C_m: negate the first band."""
    return PentadiagonalOperator(op.m_min, op.diag, -op.off1, op.off2, label=op.label)


@dataclass
class SymmetryReport:
    max_asymmetry: float
    finite: bool
    t1_sign: str
    t2_sign: str
    needs_gauge: bool
    messages: list[str] = field(default_factory=list)


def _sign_summary(values: np.ndarray, m: np.ndarray, name: str, tol: float):
    nz = np.abs(values) > tol
    if not np.any(nz):
        return "zero", [f"{name} = 0 identically"]
    s = np.sign(values[nz])
    if np.all(s < 0):
        return "negative", []
    if np.all(s > 0):
        return "positive", []
    mm = m[nz]
    flips = mm[1:][np.diff(s) != 0]
    where = ", ".join(f"{x:g}" for x in flips)
    return "mixed", [f"{name} changes sign at m={where}"]


def validate_symmetry(op: PentadiagonalOperator) -> SymmetryReport:
    """Report-only check of storage symmetry, finiteness and band signs."""
    scale = max(float(np.max(np.abs(op.diag))) if op.size else 0.0, 1.0)
    tol = 1e-14 * scale
    finite = bool(
        np.all(np.isfinite(op.diag))
        and np.all(np.isfinite(op.off1))
        and np.all(np.isfinite(op.off2))
    )
    s1, msg1 = _sign_summary(op.off1, op.m[:-1], "t1", tol)
    s2, msg2 = _sign_summary(op.off2, op.m[:-2], "t2", tol)
    msgs = msg1 + msg2
    if s1 == "zero":
        msgs.append("t1 = 0; either sign convention valid")
    elif s1 == "positive":
        msgs.append("t1 > 0 throughout; gauge_transform gives the t1 < 0 convention")
    elif s1 == "negative":
        msgs.append("t1 < 0 throughout")
    if s2 == "positive":
        msgs.append("t2 > 0 throughout")
    elif s2 == "negative":
        msgs.append("t2 < 0 throughout (barred turning-point types)")
    return SymmetryReport(
        max_asymmetry=0.0,
        finite=finite,
        t1_sign=s1,
        t2_sign=s2,
        needs_gauge=s1 in ("positive", "mixed"),
        messages=msgs,
    )


def dense_spin_hamiltonian(params: SpinModelParams) -> np.ndarray:
    """Dense H built from ladder matrices; reference for build_fe8_operator."""
    J = params.J
    m = -J + np.arange(int(round(2 * J)) + 1)
    jp = np.diag(_ladder_factor(J, m[:-1]), -1)  # J+ |m> -> |m+1>, rows ordered by m
    jm = jp.T
    jx = 0.5 * (jp + jm)
    jz = np.diag(m)
    return (
        -params.k2 * jz @ jz
        + (params.k1 - params.k2) * jx @ jx
        - params.hx * jx
        - params.hz * jz
    )

