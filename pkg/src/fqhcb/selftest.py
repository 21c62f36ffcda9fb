"""Invariant suite behind ``fqhcb selftest``."""

from __future__ import annotations

import contextlib
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import thermo
from .edge_cft import Sector, decompose_sector, pairing_admissible, preset, validate_state
from .qseries import QExpansion, z3_parafermion_character
from .thermo import ThermoParams, conductance_einstein, conductance_fd, conductance_flux, log_Z

VACUUM = Sector(0, "vac")


@dataclass
class CheckResult:
    name: str
    passed: bool
    count: int
    tolerance: float
    worst: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.name}: {self.count} evaluations, worst {self.worst:.3e} "
                f"(tolerance {self.tolerance:.1e}) {self.detail}").rstrip()


def _states():
    return [preset("rr-z3"), preset("laughlin:3")]


def check_route_equivalence(n: int = 12, seed: int = 7) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    worst_e = worst_fd = 0.0
    count = 0
    for state in _states():
        for _ in range(n):
            p = ThermoParams(t=rng.uniform(0.3, 2.0), mu_red=rng.uniform(-3, 3),
                             phi=rng.uniform(0, 15), include_cz=False)
            ev = log_Z(state, VACUUM, p)
            gf = conductance_flux(state, VACUUM, p, ev)
            ge = conductance_einstein(state, VACUUM, p, ev)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", thermo.FDCancellationWarning)
                gd = conductance_fd(state, VACUUM, p)
            ref = max(abs(gf), 1e-300)
            worst_e = max(worst_e, abs(gf - ge) / ref)
            worst_fd = max(worst_fd, abs(gf - gd) / ref)
            count += 1
    return [CheckResult("route equivalence flux/einstein", worst_e <= 1e-9, count, 1e-9, worst_e),
            CheckResult("route equivalence flux/finite-difference", worst_fd <= 1e-6, count,
                        1e-6, worst_fd)]


def _g(state, params):
    return conductance_flux(state, VACUUM, params)


def check_periodicity() -> CheckResult:
    worst, count = 0.0, 0
    for state in _states():
        phis = np.linspace(0.0, state.d_H, 101)
        g = np.array([_g(state, ThermoParams(0.5, phi=p)) for p in phis])
        g2 = np.array([_g(state, ThermoParams(0.5, phi=p + state.d_H)) for p in phis])
        worst = max(worst, float(np.max(np.abs(g2 - g)) / np.max(np.abs(g))))
        count += phis.size
    return CheckResult("flux periodicity (shift d_H)", worst < 1e-9, count, 1e-9, worst)


def check_reflection() -> CheckResult:
    worst, count = 0.0, 0
    for state in _states():
        phis = np.linspace(0.05, 2 * state.d_H, 97)
        g = np.array([_g(state, ThermoParams(0.5, phi=p)) for p in phis])
        gm = np.array([_g(state, ThermoParams(0.5, phi=-p)) for p in phis])
        worst = max(worst, float(np.max(np.abs(g - gm)) / np.max(np.abs(g))))
        count += phis.size
    return CheckResult("flux reflection at mu=0", worst < 1e-9, count, 1e-9, worst)


def check_positivity() -> CheckResult:
    """g >= 0 without CZ, g + nu/2 >= 0 with CZ, and the CZ shift is exactly -nu/2."""
    worst, count, ok = 0.0, 0, True
    for state in _states():
        nu = float(state.nu)
        for p in np.linspace(0.0, state.d_H, 151):
            g0 = _g(state, ThermoParams(0.5, phi=p, include_cz=False))
            g1 = _g(state, ThermoParams(0.5, phi=p, include_cz=True))
            shift_err = abs(g1 - g0 + nu / 2)
            worst = max(worst, shift_err, -min(g0, 0.0), -min(g1 + nu / 2, 0.0))
            ok &= g0 >= 0 and g1 + nu / 2 >= -1e-12 and shift_err <= 1e-9
            count += 1
    return CheckResult("positivity and CZ offset", ok, count, 1e-9, worst)


def check_staircase() -> CheckResult:
    state = preset("rr-z3")
    worst = 0.0
    phis = np.linspace(0.0, 5.0, 20, endpoint=False)
    for p in phis:
        q0 = log_Z(state, VACUUM, ThermoParams(0.5, phi=p)).mean_Q
        q1 = log_Z(state, VACUUM, ThermoParams(0.5, phi=p + 5)).mean_Q
        worst = max(worst, abs(q1 - q0 - 3))
    return CheckResult("charge staircase <Q>(phi+5) - <Q>(phi) = 3", worst <= 1e-8, phis.size,
                       1e-8, worst)


def check_characters(level: int = 12) -> CheckResult:
    ch = [z3_parafermion_character(l, Fraction(level)) for l in range(3)]
    problems = []
    if [int(c) for c in ch[0].coefficients[:4]] != [1, 0, 1, 2]:
        problems.append("ch00 low levels")
    if ch[1].leading_exponent != Fraction(-1, 30) + Fraction(2, 3):
        problems.append("ch01 leading exponent")
    if not ch[1].agrees_with(ch[2]) or ch[1].leading_exponent != ch[2].leading_exponent:
        problems.append("ch01 != ch02")
    if not all(c.is_character_like() for c in ch):
        problems.append("non-integer coefficient")
    total = ch[0] + ch[1] + ch[2]
    if not total.agrees_with(_unrestricted_z3(level)):
        problems.append("sector sum")
    return CheckResult("Z3 character suite", not problems, 3 * (level + 1), 0.0,
                       float(len(problems)), ", ".join(problems))


def _unrestricted_z3(level: int) -> QExpansion:
    """Unrestricted double sum by direct enumeration, independent of the sector code."""
    from itertools import product

    def partitions(n, max_part):
        if n == 0:
            return 1
        return sum(partitions(n - k, k) for k in range(1, min(n, max_part) + 1))

    top = Fraction(level)
    series: dict[Fraction, int] = {}
    for n1, n2 in product(range(6), repeat=2):
        base = Fraction(2, 3) * (n1 * n1 + n1 * n2 + n2 * n2)
        for j in range(int(top - base) + 1 if base <= top else 0):
            c = sum(partitions(i, n1) * partitions(j - i, n2) for i in range(j + 1))
            series[base + j] = series.get(base + j, 0) + c
    step = Fraction(1, 3)
    coeffs = tuple(Fraction(series.get(k * step, 0)) for k in range(int(top / step) + 1))
    return QExpansion(Fraction(-1, 30), step, coeffs, top)


def check_algebra() -> CheckResult:
    problems = []
    for state in _states():
        problems += [f"{state.name}: {d}" for d in validate_state(state)]
    z3 = preset("rr-z3")
    pieces = decompose_sector(z3, VACUUM)
    if [p.display(z3.m) for p in pieces] != [(0, "vac"), (5, "psi1"), (-5, "psi2")]:
        problems.append("Z3 vacuum decomposition")
    if not all(pairing_admissible(z3, p.l, p.lam) for p in pieces):
        problems.append("inadmissible piece")
    return CheckResult("algebraic consistency", not problems, len(pieces), 0.0,
                       float(len(problems)), "; ".join(problems))


CHECKS = [check_route_equivalence, check_periodicity, check_reflection, check_positivity,
          check_staircase, check_characters, check_algebra]


@contextlib.contextmanager
def injected_fault(fault: str | None):
    if fault is None:
        yield
        return
    if fault != "cz-sign":
        raise ValueError(f"unknown fault {fault!r}")
    saved = thermo._CZ_SIGN
    thermo._CZ_SIGN = -saved
    try:
        yield
    finally:
        thermo._CZ_SIGN = saved


def run_selftest(fault: str | None = None, echo=print) -> list[CheckResult]:
    results = []
    with injected_fault(fault):
        for check in CHECKS:
            out = check()
            for r in out if isinstance(out, list) else [out]:
                results.append(r)
                if echo:
                    echo(r.line())
    if echo:
        n_pass = sum(r.passed for r in results)
        echo(f"{n_pass}/{len(results)} checks passed")
    return results
