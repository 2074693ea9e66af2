"""Command-line front end.

    dpi5 [options] {model,curves,turning,wavefunction,connect-test,oracle,scan}

Options may also come from an INI file (``--config``) with sections
[model], [run] and [tolerances]; flags override the file.  Exit status is
0 on success, 1 on a configuration error and 2 on a numerical failure,
in which case ``error.json`` is written to the output directory.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .connect import B_TYPES, connection_constants, connection_report
from .critical import critical_curves
from .dpi import dpi_wavefunction, make_branch
from .io import atomic_path, write_json
from .model import (ModelError, SpinModelParams, build_fe8_operator, build_ramp, build_synth1,
                    read_table_csv, write_table_csv)
from .oracle import exact_spectrum, integrate_recursion, write_sequence_csv, write_spectrum_csv
from .smooth import extend_coefficients
from .turning import failure_zone, locate_turning_points
from .validation import connection_end_to_end

SUBCOMMANDS = ("model", "curves", "turning", "wavefunction", "connect-test", "oracle", "scan")
MODELS = ("fe8", "table", "synth1", "ramp")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model: str = "synth1"
    J: float = 100.0
    k1: float = 0.33
    k2: float = 0.22
    hx: float = 0.0
    hz: float = 0.0
    table: str | None = None
    energies: list = field(default_factory=list)
    m_lo: float | None = None
    m_hi: float | None = None
    out: str = "."
    seed: int = 0
    sigma1: int = -1
    sigma2: int = 1
    phi2_threshold: float = 0.1
    validity_threshold: float = 0.1
    min_separation: float = 5.0
    eta: float = 0.4

    def check(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {', '.join(MODELS)}")
        if self.model == "table" and not self.table:
            raise ConfigError("model 'table' needs a table path")
        if self.model != "table" and self.table:
            raise ConfigError("a table path is only valid with model 'table'")
        if not (self.J > 0 and math.isfinite(self.J)):
            raise ConfigError("J must be positive")
        for name in ("phi2_threshold", "validity_threshold", "min_separation", "eta"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"tolerance {name} must be positive")
        if self.sigma1 not in (1, -1) or self.sigma2 not in (1, -1):
            raise ConfigError("sigma1 and sigma2 must be +1 or -1")

    def as_dict(self) -> dict:
        # the output directory is left out so reruns elsewhere stay byte-identical
        return {k: v for k, v in self.__dict__.items() if k != "out"}


def parse_energy_grid(text: str) -> list[float]:
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError as exc:
        raise ConfigError(f"energy grid must be a:b:n, got {text!r}") from exc
    if n < 1:
        raise ConfigError("energy grid needs n >= 1")
    return [float(x) for x in np.linspace(a, b, n)]


_KEYS = {
    "model": {"type": ("model", str), "j": ("J", float), "k1": ("k1", float),
              "k2": ("k2", float), "hx": ("hx", float), "hz": ("hz", float),
              "table": ("table", str)},
    "run": {"energy": ("energy", float), "energy_grid": ("energy_grid", str),
            "m_lo": ("m_lo", float), "m_hi": ("m_hi", float), "out": ("out", str),
            "seed": ("seed", int), "sigma1": ("sigma1", int), "sigma2": ("sigma2", int)},
    "tolerances": {"phi2_threshold": ("phi2_threshold", float),
                   "validity_threshold": ("validity_threshold", float),
                   "min_separation": ("min_separation", float), "eta": ("eta", float)},
}


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for section in cp.sections():
        if section not in _KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in cp[section].items():
            if key not in _KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            name, kind = _KEYS[section][key]
            try:
                out[name] = kind(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    vals = load_config(args.config)
    cfg = RunConfig()
    for name in ("model", "J", "k1", "k2", "hx", "hz", "table", "m_lo", "m_hi", "out", "seed",
                 "sigma1", "sigma2", "phi2_threshold", "validity_threshold", "min_separation",
                 "eta"):
        if name in vals:
            setattr(cfg, name, vals[name])
        flag = getattr(args, name, None)
        if flag is not None:
            setattr(cfg, name, flag)
    energy = args.energy if args.energy is not None else vals.get("energy")
    grid = args.energy_grid if args.energy_grid is not None else vals.get("energy_grid")
    if args.energy is not None and args.energy_grid is not None:
        raise ConfigError("give either --energy or --energy-grid, not both")
    if args.energy_grid is not None:
        energy = None
    elif args.energy is not None:
        grid = None
    if grid is not None:
        cfg.energies = parse_energy_grid(grid)
    elif energy is not None:
        cfg.energies = [float(energy)]
    cfg.check()
    return cfg


def build_operator(cfg: RunConfig):
    if cfg.model == "fe8":
        return build_fe8_operator(SpinModelParams(J=cfg.J, k1=cfg.k1, k2=cfg.k2,
                                                  hx=cfg.hx, hz=cfg.hz))
    if cfg.model == "table":
        return read_table_csv(cfg.table)
    if cfg.model == "ramp":
        return build_ramp(cfg.J)
    return build_synth1(cfg.J)


def _need_energy(cfg: RunConfig) -> list[float]:
    if not cfg.energies:
        raise ConfigError("this subcommand needs --energy or --energy-grid")
    return cfg.energies


def _range(cc, cfg):
    lo = cc.m_lo if cfg.m_lo is None else max(cfg.m_lo, cc.m_lo)
    hi = cc.m_hi if cfg.m_hi is None else min(cfg.m_hi, cc.m_hi)
    if lo >= hi:
        raise ConfigError("empty m range")
    return lo, hi


def _turning_records(cc, E, cfg, with_zone=True):
    lo, hi = _range(cc, cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        tps = locate_turning_points(cc, E, lo, hi)
    if with_zone:
        for tp in tps:
            failure_zone(cc, E, tp, threshold=cfg.phi2_threshold)
    return tps, [str(w.message) for w in caught]


def cmd_model(cfg, op, out: Path) -> dict:
    with atomic_path(out / "operator.csv") as tmp:
        write_table_csv(op, tmp)
    return {"rows": op.size}


def cmd_curves(cfg, op, out: Path) -> dict:
    cc = extend_coefficients(op, cfg.J)
    lo, hi = _range(cc, cfg)
    grid = op.m[(op.m >= lo) & (op.m <= hi)]
    cv = critical_curves(cc, grid)
    with atomic_path(out / "curves.csv") as tmp:
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["m", "U0", "Upi", "Ustar", "label0", "labelstar", "cosqstar",
                        "U0_minus_Ustar"])
            for i in range(cv.m.size):
                w.writerow([f"{cv.m[i]:.17g}", f"{cv.U0[i]:.17g}", f"{cv.Upi[i]:.17g}",
                            f"{cv.Ustar[i]:.17g}", cv.label0[i], cv.labelstar[i],
                            f"{cv.cosqstar[i]:.17g}", f"{cv.U0[i] - cv.Ustar[i]:.17g}"])
    return {"points": int(cv.m.size)}


def cmd_turning(cfg, op, out: Path) -> dict:
    cc = extend_coefficients(op, cfg.J)
    report = []
    for E in _need_energy(cfg):
        tps, warns = _turning_records(cc, E, cfg)
        report.append({"E": E, "turning_points": [tp.to_dict() for tp in tps],
                       "warnings": warns})
    write_json({"config": cfg.as_dict(), "energies": report}, out / "turning.json")
    return {"energies": len(report)}


def cmd_wavefunction(cfg, op, out: Path) -> dict:
    cc = extend_coefficients(op, cfg.J)
    E = _need_energy(cfg)[0]
    lo, hi = _range(cc, cfg)
    grid = op.m[(op.m >= lo) & (op.m <= hi)]
    br = make_branch(cc, E, grid, cfg.sigma1, cfg.sigma2, anchor=float(grid[0]),
                     phi2_threshold=cfg.phi2_threshold,
                     validity_threshold=cfg.validity_threshold)
    branches, coeffs = [br], [1.0]
    if np.all(np.abs(br.q.imag) < 1e-14):
        # real q: add the conjugate branch so the standing wave is real
        twin = make_branch(cc, E, grid, cfg.sigma1, -cfg.sigma2, anchor=float(grid[0]),
                           phi2_threshold=cfg.phi2_threshold,
                           validity_threshold=cfg.validity_threshold)
        branches.append(twin)
        coeffs.append(1.0)
    wf = dpi_wavefunction(branches, coeffs)
    with atomic_path(out / "wavefunction.csv") as tmp:
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["m", "Re(C)", "Im(C)", "valid"])
            for m, c, ok in zip(wf.m, wf.C, wf.valid):
                w.writerow([f"{m:.17g}", f"{c.real:.17g}", f"{c.imag:.17g}", int(ok)])
    manifest = [{"sigma1": b.sigma1, "sigma2": b.sigma2, "anchor": b.anchor, "coeff": [c, 0.0]}
                for b, c in zip(branches, coeffs)]
    write_json({"E": E, "branches": manifest}, out / "manifest.json")
    return {"points": int(wf.m.size), "valid": int(wf.valid.sum())}


def cmd_connect(cfg, op, out: Path) -> dict:
    cc = extend_coefficients(op, cfg.J)
    reports = []
    for E in _need_energy(cfg):
        tps, _ = _turning_records(cc, E, cfg, with_zone=False)
        for tp in tps:
            if tp.type not in B_TYPES:
                continue
            k = connection_constants(cc, tp, cfg.sigma1, cfg.sigma2)
            rep = connection_report(k)
            rep["turning_point"] = tp.to_dict()
            rep["end_to_end"] = connection_end_to_end(op, cc, tp)
            reports.append(rep)
    if not reports:
        raise NumericalFailure("no type B or B̄ turning point at the requested energies")
    write_json({"config": cfg.as_dict(), "connections": reports}, out / "connect.json")
    return {"connections": len(reports)}


def cmd_oracle(cfg, op, out: Path) -> dict:
    sol = exact_spectrum(op)
    with atomic_path(out / "spectrum.csv") as tmp:
        write_spectrum_csv(sol, tmp)
    info = {"eigenvalues": int(sol.eigenvalues.size), "max_residual": sol.max_residual}
    if cfg.energies:
        rec = integrate_recursion(op, cfg.energies[0], [1.0, 0.0], "down")
        with atomic_path(out / "recursion.csv") as tmp:
            write_sequence_csv(rec.m, rec.values(), tmp)
    write_json({"config": cfg.as_dict(), **info}, out / "oracle.json")
    return info


def cmd_scan(cfg, op, out: Path) -> dict:
    cc = extend_coefficients(op, cfg.J)
    rows = []
    for E in _need_energy(cfg):
        tps, _ = _turning_records(cc, E, cfg)
        rows.extend(tps)
    with atomic_path(out / "scan.csv") as tmp:
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["E", "m_c", "curve", "type", "Re_qc", "Im_qc", "alpha", "a", "b",
                        "failure_halfwidth", "nearest_other_tp"])
            for tp in rows:
                w.writerow([f"{tp.E:.17g}", f"{tp.m_c:.17g}", tp.curve, tp.type or "",
                            f"{tp.q_c.real:.17g}", f"{tp.q_c.imag:.17g}", f"{tp.alpha:.17g}",
                            f"{tp.a:.17g}", f"{tp.b:.17g}", f"{tp.failure_halfwidth:.17g}",
                            f"{tp.nearest_other_tp:.17g}"])
    return {"energies": len(cfg.energies), "turning_points": len(rows)}


class NumericalFailure(ArithmeticError):
    pass


_COMMANDS = {"model": cmd_model, "curves": cmd_curves, "turning": cmd_turning,
             "wavefunction": cmd_wavefunction, "connect-test": cmd_connect,
             "oracle": cmd_oracle, "scan": cmd_scan}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dpi5", description="Discrete phase integral analysis of five-term "
                                         "recursions.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", help="INI file with [model], [run], [tolerances]")
    p.add_argument("--out", help="output directory")
    p.add_argument("--model", choices=MODELS)
    p.add_argument("--table", help="CSV table m,w,t1,t2 for --model table")
    p.add_argument("--J", type=float, help="quasiclassical parameter (spin length)")
    p.add_argument("--k1", type=float)
    p.add_argument("--k2", type=float)
    p.add_argument("--hx", type=float)
    p.add_argument("--hz", type=float)
    p.add_argument("--energy", type=float)
    p.add_argument("--energy-grid", dest="energy_grid", help="a:b:n")
    p.add_argument("--m-lo", dest="m_lo", type=float)
    p.add_argument("--m-hi", dest="m_hi", type=float)
    p.add_argument("--sigma1", type=int)
    p.add_argument("--sigma2", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--phi2-threshold", dest="phi2_threshold", type=float)
    p.add_argument("--validity-threshold", dest="validity_threshold", type=float)
    p.add_argument("--min-separation", dest="min_separation", type=float)
    p.add_argument("--eta", type=float)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        op = build_operator(cfg)
    except (ConfigError, ModelError, OSError) as exc:
        print(f"dpi5: configuration error: {exc}", file=sys.stderr)
        return 1
    np.random.seed(cfg.seed)
    try:
        info = _COMMANDS[args.command](cfg, op, out)
    except ConfigError as exc:
        print(f"dpi5: configuration error: {exc}", file=sys.stderr)
        return 1
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        write_json({"command": args.command, "error": type(exc).__name__, "message": str(exc),
                    "seed": cfg.seed}, out / "error.json")
        print(f"dpi5: numerical failure: {exc}", file=sys.stderr)
        return 2
    print(f"dpi5 {args.command}: " + ", ".join(f"{k}={v}" for k, v in sorted(info.items())))
    return 0


if __name__ == "__main__":
    sys.exit(main())
