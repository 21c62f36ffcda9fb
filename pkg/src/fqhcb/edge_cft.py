"""
Algebraic structure of the edge theory.

A state is a filling factor n_H/d_H plus a neutral model.  Physical sectors
(l, Lambda) obey the Z_{n_H} pairing rule, and each one splits into n_H
pieces (l + s d_H, omega^s * Lambda), s = 0..n_H-1, produced by the electron
simple current.  Charge labels are kept reduced modulo m = n_H d_H.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

from .errors import (ConfigError, InadmissibleSectorError, InconsistentModelError,
                     UnknownSectorError)
from .qseries import QExpansion, z3_parafermion_character


@dataclass(frozen=True)
class FillingFactor:
    n_H: int
    d_H: int

    def __post_init__(self):
        if int(self.n_H) != self.n_H or int(self.d_H) != self.d_H or self.n_H < 1 or self.d_H < 1:
            raise ValueError(f"filling factor needs positive integers, got {self.n_H}/{self.d_H}")

    @property
    def nu(self) -> Fraction:
        return Fraction(self.n_H, self.d_H)

    @property
    def m(self) -> int:
        return self.n_H * self.d_H

    @property
    def coprime(self) -> bool:
        return math.gcd(self.n_H, self.d_H) == 1

    def __str__(self):
        return f"{self.n_H}/{self.d_H}"


@dataclass(frozen=True, eq=False)
class NeutralModel:
    """
    Neutral CFT data needed by the partition function.

    ``omega_fusion`` maps every sector to its fusion with the electron's
    neutral charge omega.  ``pairing_sign`` fixes the orientation of the
    charge label in the pairing rule n_H Q_omega(Lambda) = sign * l (mod n_H).
    """

    name: str
    central_charge: Fraction
    sectors: tuple[str, ...]
    weights: Mapping[str, Fraction]
    omega: str
    omega_fusion: Mapping[str, str]
    character_fn: Callable[[str, Fraction], QExpansion] = field(repr=False)
    vacuum: str = "vac"
    pairing_sign: int = 1

    def check_sector(self, sector: str) -> str:
        if sector not in self.sectors:
            raise UnknownSectorError(f"sector {sector!r} not in model {self.name} {self.sectors}")
        return sector

    def weight(self, sector: str) -> Fraction:
        return self.weights[self.check_sector(sector)]

    def fuse_with_omega(self, sector: str, times: int = 1) -> str:
        self.check_sector(sector)
        for _ in range(times):
            sector = self.omega_fusion[sector]
        return sector

    def character(self, sector: str, level_max) -> QExpansion:
        return self.character_fn(self.check_sector(sector), Fraction(level_max))

    @property
    def is_trivial(self) -> bool:
        return len(self.sectors) == 1


@dataclass(frozen=True, eq=False)
class FQHState:
    filling: FillingFactor
    neutral: NeutralModel
    name: str = ""

    @property
    def n_H(self) -> int:
        return self.filling.n_H

    @property
    def d_H(self) -> int:
        return self.filling.d_H

    @property
    def m(self) -> int:
        return self.filling.m

    @property
    def nu(self) -> Fraction:
        return self.filling.nu


@dataclass(frozen=True)
class Sector:
    l: int
    lam: str

    def display(self, m: int) -> tuple[int, str]:
        return display_label(self.l, m), self.lam


def display_label(l: int, m: int) -> int:
    """Representative of l mod m in (-m/2, m/2]."""
    r = l % m
    return r - m if 2 * r > m else r


def electron_dimension(state: FQHState) -> Fraction:
    return Fraction(state.d_H, 2 * state.n_H) + state.neutral.weight(state.neutral.omega)


def monodromy_charge(model: NeutralModel, lam: str) -> Fraction:
    """Q_omega(Lambda) = Delta(omega*Lambda) - Delta(Lambda) - Delta(omega)  mod 1."""
    q = (model.weight(model.fuse_with_omega(lam)) - model.weight(lam)
         - model.weight(model.omega))
    return q - math.floor(q)


def pairing_admissible(state: FQHState, l: int, lam: str) -> bool:
    n = state.n_H
    lhs = n * monodromy_charge(state.neutral, lam)
    if lhs.denominator != 1:
        raise InconsistentModelError(
            f"n_H * Q_omega({lam}) = {lhs} is not an integer in model {state.neutral.name}")
    return (int(lhs) - state.neutral.pairing_sign * l) % n == 0


def decompose_sector(state: FQHState, sector: Sector) -> list[Sector]:
    """Simple-current orbit [(l + s d_H mod m, omega^s * Lambda)] for s = 0..n_H-1."""
    if not pairing_admissible(state, sector.l, sector.lam):
        raise InadmissibleSectorError(
            f"sector (l={sector.l}, {sector.lam}) violates the pairing rule of {state.name or 'state'}")
    m = state.m
    return [Sector((sector.l + s * state.d_H) % m, state.neutral.fuse_with_omega(sector.lam, s))
            for s in range(state.n_H)]


def validate_state(state: FQHState, level: int = 6) -> list[str]:
    """Diagnostics for a state; an empty list means the state is consistent."""
    problems = []
    model = state.neutral
    if not state.filling.coprime:
        problems.append(f"gcd(n_H, d_H) = {math.gcd(state.n_H, state.d_H)} != 1")
    if model.omega not in model.sectors:
        problems.append(f"electron neutral charge {model.omega!r} is not a model sector")
        return problems

    two_delta = 2 * electron_dimension(state)
    if two_delta.denominator != 1 or two_delta <= 0 or two_delta.numerator % 2 == 0:
        problems.append(f"2*Delta_el = {two_delta} is not an odd positive integer")

    for lam in model.sectors:
        if model.fuse_with_omega(lam, state.n_H) != lam:
            problems.append(f"omega orbit of {lam!r} does not close after n_H={state.n_H} steps")
        if (state.n_H * monodromy_charge(model, lam)).denominator != 1:
            problems.append(f"n_H * Q_omega({lam}) is not an integer")

    if model.is_trivial:
        if state.n_H > 1:
            problems.append("n_H > 1 requires a non-trivial neutral sector")
    elif model.central_charge <= 0:
        problems.append(f"neutral central charge {model.central_charge} must be positive")

    offset = model.central_charge / 24
    for lam in model.sectors:
        ch = model.character(lam, level)
        if ch.leading_exponent != model.weight(lam) - offset:
            problems.append(f"character of {lam!r} starts at q^{ch.leading_exponent}, "
                            f"expected Delta - c/24 = {model.weight(lam) - offset}")
        if not ch.is_character_like():
            problems.append(f"character of {lam!r} has non-integer or negative coefficients")
    return problems


_Z3_SECTOR_INDEX = {"vac": 0, "psi1": 1, "psi2": 2}


def _z3_character(sector: str, level_max: Fraction) -> QExpansion:
    return z3_parafermion_character(_Z3_SECTOR_INDEX[sector], level_max)


def _trivial_character(sector: str, level_max: Fraction) -> QExpansion:
    coeffs = (Fraction(1),) + (Fraction(0),) * math.floor(level_max)
    return QExpansion(Fraction(0), Fraction(1), coeffs, level_max)


def build_z3_parafermion_model() -> NeutralModel:
    """Vacuum orbit {1, psi1, psi2} of the Z_3 parafermion theory, omega = psi1."""
    # sign -1 is the only choice under which (5, psi1) and (-5, psi2) are admissible
    return NeutralModel(
        name="z3-parafermion",
        central_charge=Fraction(4, 5),
        sectors=("vac", "psi1", "psi2"),
        weights={"vac": Fraction(0), "psi1": Fraction(2, 3), "psi2": Fraction(2, 3)},
        omega="psi1",
        omega_fusion={"vac": "psi1", "psi1": "psi2", "psi2": "vac"},
        character_fn=_z3_character,
        pairing_sign=-1,
    )


def build_laughlin_model() -> NeutralModel:
    """Trivial neutral sector; the whole c = 1 sits in the charged factor."""
    return NeutralModel(
        name="trivial",
        central_charge=Fraction(0),
        sectors=("vac",),
        weights={"vac": Fraction(0)},
        omega="vac",
        omega_fusion={"vac": "vac"},
        character_fn=_trivial_character,
    )


NEUTRAL_MODELS = {
    "z3-parafermion": build_z3_parafermion_model,
    "trivial": build_laughlin_model,
}


def make_state(n_H: int, d_H: int, neutral: str, name: str = "") -> FQHState:
    try:
        model = NEUTRAL_MODELS[neutral]()
    except KeyError:
        raise ConfigError(f"unknown neutral model {neutral!r}; known: {sorted(NEUTRAL_MODELS)}")
    return FQHState(FillingFactor(n_H, d_H), model, name or f"{n_H}/{d_H}:{neutral}")


def preset(name: str) -> FQHState:
    """Named states: ``rr-z3`` (nu = 3/5 Read-Rezayi) and ``laughlin:<d_H>``."""
    if name == "rr-z3":
        return make_state(3, 5, "z3-parafermion", name)
    match = re.fullmatch(r"laughlin:(\d+)", name)
    if match:
        d = int(match.group(1))
        if d < 1:
            raise ConfigError(f"invalid Laughlin denominator in {name!r}")
        return make_state(1, d, "trivial", name)
    raise ConfigError(f"unknown state preset {name!r}; use 'rr-z3' or 'laughlin:<d_H>'")
