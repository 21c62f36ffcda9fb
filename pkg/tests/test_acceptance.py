"""
Acceptance suite.  Each criterion is a plain function returning
(passed, detail); the pytest wrappers record one line per criterion and the
module can also be run as a script:

    python3 tests/test_acceptance.py
"""
import time
import warnings
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from fqhcb.analysis import central_peak, classify_periods, find_peaks, sweep_flux, temperature_scan
from fqhcb.edge_cft import (Sector, decompose_sector, electron_dimension, pairing_admissible,
                            preset, validate_state)
from fqhcb.qseries import z3_parafermion_character
from fqhcb.thermo import (ThermoParams, conductance_einstein, conductance_fd, conductance_flux,
                          log_K, log_Z, mean_charge)

VAC = Sector(0, "vac")
Z3 = preset("rr-z3")
LAUGHLIN = preset("laughlin:3")

# pinned tolerances, one block per criterion
C1_RUNTIME_S, C1_PEAKS, C1_SPACING_TOL = 30.0, 9, 0.02
C2_REL_TOL, C2C_SPACING_TOL = 1e-9, 0.02
C3_EINSTEIN_TOL, C3_FD_TOL, C3_FD_STEP, C3_POINTS, C3_SEED = 1e-9, 1e-6, 1e-3, 100, 20240601
C4_STEP_TOL, C4_POINTS = 1e-8, 20
C5_LEVEL_EQ = 12
C6_K_TOL = 1e-12
C7_TOL = 1e-9
C8_DRIFT = 0.05


def _fmt(ok, label, detail):
    return f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"


def _rel_shift(state, shift, phi, params):
    g0 = np.array([conductance_flux(state, VAC, params.with_(phi=p)) for p in phi])
    g1 = np.array([conductance_flux(state, VAC, params.with_(phi=p + shift)) for p in phi])
    return float(np.max(np.abs(g1 - g0)) / np.max(np.abs(g0)))


# -- oracles -------------------------------------------------------------------------

def _partitions_at_most(n, k):
    """Partitions of n into parts no larger than k, by recursion."""
    if n == 0:
        return 1
    return sum(_partitions_at_most(n - p, p) for p in range(1, min(n, k) + 1))


def _double_sum(level, residue=None):
    """{exponent above q^(-1/30): coefficient} of the fermionic double sum."""
    out = {}
    for n1, n2 in product(range(7), repeat=2):
        if residue is not None and (n1 + 2 * n2) % 3 != residue:
            continue
        base = Fraction(2, 3) * (n1 * n1 + n1 * n2 + n2 * n2)
        if base > level:
            continue
        for j in range(int(level - base) + 1):
            c = sum(_partitions_at_most(i, n1) * _partitions_at_most(j - i, n2)
                    for i in range(j + 1))
            if c:
                out[base + j] = out.get(base + j, 0) + c
    return out


# -- criteria ------------------------------------------------------------------------

def criterion_1():
    start = time.perf_counter()
    trace = sweep_flux(Z3, VAC, ThermoParams(0.5, mu_red=0.0), 0.0, 15.0, 15001)
    report = find_peaks(trace)
    cls = classify_periods(report, Z3)
    elapsed = time.perf_counter() - start
    d = report.spacings
    within = d[np.abs(d - 1.0) < 0.5]
    between = d[np.abs(d - 3.0) < 0.5]
    ok = (elapsed < C1_RUNTIME_S and len(report.peaks) == C1_PEAKS
          and len(within) + len(between) == len(d) and len(within) == 6 and len(between) == 2
          and np.all(np.abs(within - 1.0) <= C1_SPACING_TOL)
          and np.all(np.abs(between - 3.0) <= C1_SPACING_TOL)
          and abs(cls.period - 5.0) <= C1_SPACING_TOL and cls.bunch_size == 3)
    detail = (f"{len(report.peaks)} peaks, within {np.round(within, 4).tolist()}, "
              f"between {np.round(between, 4).tolist()}, period {cls.period:.4f}, "
              f"{elapsed:.1f}s")
    return ok, detail


def criterion_2():
    base = ThermoParams(0.5)
    phi = np.linspace(-2.0, 8.0, 201)
    err_z3 = _rel_shift(Z3, 5.0, phi, base)
    err_l3 = _rel_shift(LAUGHLIN, LAUGHLIN.d_H, phi, base)
    # literal reading: unit shift and unit peak spacing for Laughlin 1/3
    err_l1 = _rel_shift(LAUGHLIN, 1.0, phi, base)
    report = find_peaks(sweep_flux(LAUGHLIN, VAC, base, 0.0, 9.0, 9001))
    spacings = report.spacings
    spacing_ok = len(spacings) > 0 and bool(np.all(np.abs(spacings - 1.0) <= C2C_SPACING_TOL))
    parts = {
        "2a z3 shift 5": (err_z3 < C2_REL_TOL, f"{err_z3:.1e}"),
        "2b laughlin shift d_H=3": (err_l3 < C2_REL_TOL, f"{err_l3:.1e}"),
        "2c laughlin shift 1 and spacing 1": (
            err_l1 < C2_REL_TOL and spacing_ok,
            f"shift-1 error {err_l1:.1e}, spacings {np.round(spacings, 4).tolist()}"),
    }
    ok = all(p[0] for p in parts.values())
    detail = "; ".join(f"{k} {'ok' if v[0] else 'FAIL'} ({v[1]})" for k, v in parts.items())
    return ok, detail


def criterion_3():
    rng = np.random.default_rng(C3_SEED)
    worst_e = worst_fd = 0.0
    count = 0
    for state in (Z3, LAUGHLIN):
        for cz in (False, True):
            for _ in range(C3_POINTS):
                p = ThermoParams(rng.uniform(0.3, 2.0), mu_red=rng.uniform(-3.0, 3.0),
                                 phi=rng.uniform(0.0, 15.0), include_cz=cz)
                ev = log_Z(state, VAC, p)
                gf = conductance_flux(state, VAC, p, ev)
                ge = conductance_einstein(state, VAC, p, ev)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    gd = conductance_fd(state, VAC, p, step=C3_FD_STEP)
                worst_e = max(worst_e, abs(gf - ge) / abs(gf))
                worst_fd = max(worst_fd, abs(gf - gd) / abs(gf))
                count += 1
    ok = worst_e <= C3_EINSTEIN_TOL and worst_fd <= C3_FD_TOL
    return ok, f"{count} points, einstein {worst_e:.1e}, finite-difference {worst_fd:.1e}"


def criterion_4():
    base = ThermoParams(0.5, mu_red=0.0)
    worst = 0.0
    for phi in np.linspace(0.0, 5.0, C4_POINTS, endpoint=False) + 0.037:
        step = (mean_charge(Z3, VAC, base.with_(phi=phi + 5.0))
                - mean_charge(Z3, VAC, base.with_(phi=phi)))
        worst = max(worst, abs(step - 3.0))
    return worst <= C4_STEP_TOL, f"max |step - 3| = {worst:.1e} over {C4_POINTS} points"


def criterion_5():
    checks = {}
    ch0 = z3_parafermion_character(0, Fraction(C5_LEVEL_EQ))
    ch1 = z3_parafermion_character(1, Fraction(C5_LEVEL_EQ))
    ch2 = z3_parafermion_character(2, Fraction(C5_LEVEL_EQ))
    oracle0 = _double_sum(3, residue=0)
    head = [ch0.coefficient(ch0.leading_exponent + k) for k in range(4)]
    checks["ch00 head"] = (head == [1, 0, 1, 2]
                           and [oracle0.get(Fraction(k), 0) for k in range(4)] == [1, 0, 1, 2])
    checks["ch01 lead"] = ch1.leading_exponent == Fraction(-1, 30) + Fraction(2, 3)
    checks["ch01 = ch02"] = (ch1.leading_exponent == ch2.leading_exponent
                             and ch1.coefficients == ch2.coefficients)
    checks["non-negative integers"] = all(c >= 0 and c.denominator == 1
                                          for ch in (ch0, ch1, ch2) for c in ch.coefficients)
    total = _double_sum(C5_LEVEL_EQ)
    summed = {}
    for ch in (ch0, ch1, ch2):
        for e, c in ch.items():
            if c:
                key = e + Fraction(1, 30)
                if key > C5_LEVEL_EQ:
                    continue
                summed[key] = summed.get(key, 0) + c
    checks["sum = unrestricted"] = summed == total
    ok = all(checks.values())
    return ok, ", ".join(f"{k} {'ok' if v else 'FAIL'}" for k, v in checks.items())


def criterion_6():
    checks = {}
    checks["validate rr-z3"] = validate_state(Z3) == []
    checks["validate laughlin:3"] = validate_state(LAUGHLIN) == []
    checks["2 Delta_el = 3"] = all(2 * electron_dimension(s) == 3 for s in (Z3, LAUGHLIN))
    pieces = decompose_sector(Z3, VAC)
    checks["vacuum decomposition"] = ([p.display(Z3.m) for p in pieces]
                                      == [(0, "vac"), (5, "psi1"), (-5, "psi2")])
    checks["pairs admissible"] = all(pairing_admissible(Z3, p.l, p.lam) for p in pieces)
    worst = 0.0
    for t, x, l in product((0.3, 1.0, 2.0), (-2.0, 0.0, 1.7), range(-7, 8)):
        p = ThermoParams(t, mu_red=x)
        a = log_K(l, 15, 3, p).log_value
        b = log_K(l + 15, 15, 3, p).log_value
        worst = max(worst, abs(a - b))
    checks["K periodic"] = worst <= C6_K_TOL
    ok = all(checks.values())
    detail = ", ".join(f"{k} {'ok' if v else 'FAIL'}" for k, v in checks.items())
    return ok, f"{detail} (K max diff {worst:.1e})"


def criterion_7():
    phi = np.linspace(0.0, 15.0, 301)
    worst_neg = 0.0
    worst_sym = 0.0
    ok = True
    for state in (Z3, LAUGHLIN):
        nu = float(state.nu)
        for cz in (False, True):
            base = ThermoParams(0.5, mu_red=0.0, include_cz=cz)
            g = np.array([conductance_flux(state, VAC, base.with_(phi=p)) for p in phi])
            gm = np.array([conductance_flux(state, VAC, base.with_(phi=-p)) for p in phi])
            floor = g + (nu / 2 if cz else 0.0)
            scale = np.max(np.abs(g))
            neg = max(0.0, -float(floor.min())) / scale
            sym = float(np.max(np.abs(g - gm))) / scale
            worst_neg, worst_sym = max(worst_neg, neg), max(worst_sym, sym)
            ok &= neg <= C7_TOL and sym <= C7_TOL
    return ok, f"worst negativity {worst_neg:.1e}, worst asymmetry {worst_sym:.1e}"


def criterion_8():
    ts = (0.3, 0.5, 0.8)
    reports = temperature_scan(Z3, VAC, ts, (0.0, 5.0), 5001)
    peaks = [central_peak(r, 2.5) for r in reports]
    widths = [p.fwhm for p in peaks]
    drift = max(p.position for p in peaks) - min(p.position for p in peaks)
    ok = all(a < b for a, b in zip(widths, widths[1:])) and drift < C8_DRIFT
    return ok, f"fwhm {np.round(widths, 5).tolist()}, drift {drift:.1e}"


CRITERIA = {
    1: ("Z3 peak pattern", criterion_1),
    2: ("flux periodicity", criterion_2),
    3: ("route equivalence", criterion_3),
    4: ("charge staircase", criterion_4),
    5: ("character suite", criterion_5),
    6: ("algebraic consistency", criterion_6),
    7: ("positivity and symmetry", criterion_7),
    8: ("thermal broadening", criterion_8),
}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_acceptance(number, acceptance_record):
    label, fn = CRITERIA[number]
    ok, detail = fn()
    line = _fmt(ok, f"criterion {number} {label}", detail)
    acceptance_record(line)
    print(line)
    assert ok, line


if __name__ == "__main__":
    results = []
    for number, (label, fn) in sorted(CRITERIA.items()):
        ok, detail = fn()
        results.append(ok)
        print(_fmt(ok, f"criterion {number} {label}", detail), flush=True)
    raise SystemExit(0 if all(results) else 1)
