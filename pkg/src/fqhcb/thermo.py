"""
Grand-canonical thermodynamics of the edge with Aharonov-Bohm flux.

Everything is in reduced units: t = T/T0, mu_red = mu/(k_B T), phi in flux
quanta, conductances in e^2/h.  With A = 2 pi^2 / t (so q = exp(-A)) a state
of charge Q = n_H a, a in l/m + Z, has log-weight

    -A (m/2) a^2 + (mu_red + A phi) Q

plus the neutral character and the eta / Cappelli-Zemba prefactors.  Flux and
chemical potential enter only through x = mu_red + A phi, which is the flux
shift of the chemical-potential modular parameter.  Derivation of the
conductance prefactors: docs/conductance_units.md.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

import numpy as np

from .edge_cft import (FQHState, NeutralModel, Sector, decompose_sector, display_label,
                       pairing_admissible)
from .errors import GuardError, InadmissibleSectorError, TruncationError
from .qseries import LOG_DROP, T_MAX_DEFAULT, LogSeriesAccumulator, log_dedekind_eta

MAX_WINDOW = 100_000

# Sign of the Cappelli-Zemba exponent; only the self-test fault hook touches it.
_CZ_SIGN = -1.0


class FDCancellationWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class ThermoParams:
    t: float
    mu_red: float = 0.0
    phi: float = 0.0
    include_cz: bool = True
    include_eta: bool = True
    t_max: float = T_MAX_DEFAULT
    t_min: float = 1e-3
    drop: float = LOG_DROP
    max_char_level: int = 64
    fd_step: float = 1e-3

    def __post_init__(self):
        if not (math.isfinite(self.t) and math.isfinite(self.mu_red) and math.isfinite(self.phi)):
            raise GuardError("t, mu_red and phi must be finite")
        if self.t < self.t_min:
            raise GuardError(f"t={self.t} below t_min={self.t_min}: charge frozen, "
                             "derivatives below floating precision")
        if self.t > self.t_max:
            raise GuardError(f"t={self.t} above t_max={self.t_max}")

    @property
    def coupling(self) -> float:
        """A = 2 pi^2 / t = -ln q."""
        return 2.0 * math.pi ** 2 / self.t

    @property
    def x(self) -> float:
        return self.mu_red + self.coupling * self.phi

    def char_level(self) -> int:
        """Character levels kept: stop once A * level exceeds the drop margin, at most max_char_level."""
        return min(math.floor(self.drop / self.coupling), self.max_char_level)

    def with_(self, **changes) -> ThermoParams:
        return replace(self, **changes)


def _log_cz(nu: float, params: ThermoParams) -> float:
    return _CZ_SIGN * nu * params.t * params.x ** 2 / (4.0 * math.pi ** 2)


def _lattice_terms(l: int, m: int, n_charge: int, params: ThermoParams):
    """Log-weights (without prefactors) and charges of one K-function window."""
    A = params.coupling
    center = n_charge * params.x / (A * m)
    half = math.sqrt(2.0 * params.drop / (A * m)) + 1.0
    if not math.isfinite(center) or 2 * half > MAX_WINDOW:
        raise TruncationError(f"cannot bound the K-sum window (center={center}, half-width={half})")
    shift = l / m
    n = np.arange(math.floor(center - half - shift), math.ceil(center + half - shift) + 1)
    a = n + shift
    charge = n_charge * a
    log_w = -A * (m / 2.0) * a * a + params.x * charge
    return log_w, charge


def _prefactor(nu: float, params: ThermoParams) -> float:
    out = 0.0
    if params.include_eta:
        out -= log_dedekind_eta(params.t, params.t_max)
    if params.include_cz:
        out += _log_cz(nu, params)
    return out


def log_K(l: int, m: int, n_charge_factor: int, params: ThermoParams) -> LogSeriesAccumulator:
    """
    Luttinger-liquid factor K_l(tau, n_H zeta; m) with flux, as an accumulator.

    Charges are Q = n_H a; the eta and Cappelli-Zemba factors are constant
    over the lattice and only shift the log value.
    """
    if m < 1 or n_charge_factor < 1:
        raise ValueError("m and n_charge_factor must be positive")
    log_w, charge = _lattice_terms(l, m, n_charge_factor, params)
    acc = LogSeriesAccumulator.from_arrays(log_w, charge, params.drop)
    nu = n_charge_factor ** 2 / m
    return acc.shifted(_prefactor(nu, params))


@lru_cache(maxsize=4096)
def _log_character(model: NeutralModel, sector: str, level: int, t: float) -> float:
    return model.character(sector, level).log_value(-2.0 * math.pi ** 2 / t)


@dataclass
class ZEvaluation:
    log_Z: float
    mean_Q: float
    var_Q: float
    dlogZ_dphi: float
    d2logZ_dphi2: float
    dlogZ_dmu: float
    d2logZ_dmu2: float
    breakdown: list = field(default_factory=list)
    char_level: int = 0
    n_terms: int = 0


def _check_admissible(state: FQHState, sector: Sector):
    if not pairing_admissible(state, sector.l, sector.lam):
        raise InadmissibleSectorError(f"sector ({sector.l}, {sector.lam}) is not admissible")


def _sector_pieces(state: FQHState, sector: Sector, params: ThermoParams):
    """(piece, log-weights, charges) for each simple-current component, characters included."""
    level = params.char_level()
    for piece in decompose_sector(state, sector):
        log_w, charge = _lattice_terms(piece.l, state.m, state.n_H, params)
        log_w = log_w + _log_character(state.neutral, piece.lam, level, params.t)
        yield piece, log_w, charge


def log_Z(state: FQHState, sector: Sector, params: ThermoParams) -> ZEvaluation:
    """Z_{l,Lambda} = sum_s K_{l+s d_H}(tau, n_H zeta; m) ch_{omega^s Lambda}(tau), in log form."""
    _check_admissible(state, sector)
    nu = float(state.nu)
    pref = _prefactor(nu, params)
    total = LogSeriesAccumulator(params.drop)
    breakdown = []
    for piece, log_w, charge in _sector_pieces(state, sector, params):
        acc = LogSeriesAccumulator.from_arrays(log_w, charge, params.drop)
        breakdown.append((piece.display(state.m), acc.log_value + pref))
        total.merge(acc)

    A = params.coupling
    mean, var = total.mean, total.variance
    if params.include_cz:
        cz_mu, cz_mu2 = _CZ_SIGN * nu * params.t * params.x / (2 * math.pi ** 2), \
            _CZ_SIGN * nu * params.t / (2 * math.pi ** 2)
    else:
        cz_mu = cz_mu2 = 0.0
    dmu, dmu2 = mean + cz_mu, var + cz_mu2
    return ZEvaluation(
        log_Z=total.log_value + pref,
        mean_Q=mean,
        var_Q=var,
        dlogZ_dphi=A * dmu,
        d2logZ_dphi2=A * A * dmu2,
        dlogZ_dmu=dmu,
        d2logZ_dmu2=dmu2,
        breakdown=breakdown,
        char_level=params.char_level(),
        n_terms=total.n_terms,
    )


def grand_potential(state: FQHState, sector: Sector, params: ThermoParams) -> float:
    """Omega / (k_B T) = -ln Z."""
    return -log_Z(state, sector, params).log_Z


def mean_charge(state: FQHState, sector: Sector, params: ThermoParams) -> float:
    return log_Z(state, sector, params).mean_Q


def charge_stiffness(state: FQHState, sector: Sector, params: ThermoParams) -> float:
    """Var(Q) = d<Q>/d mu_red."""
    return log_Z(state, sector, params).var_Q


def flux_prefactor(t: float) -> float:
    """g = flux_prefactor(t) * d^2 ln Z / d phi^2."""
    return t / (4.0 * math.pi ** 2)


def einstein_prefactor(t: float) -> float:
    """g = einstein_prefactor(t) * d^2 ln Z / d mu_red^2  (ballistic D = L v_F / 2)."""
    return math.pi ** 2 / t


def conductance_flux(state: FQHState, sector: Sector, params: ThermoParams,
                     evaluation: ZEvaluation | None = None) -> float:
    ev = evaluation or log_Z(state, sector, params)
    return flux_prefactor(params.t) * ev.d2logZ_dphi2


def conductance_einstein(state: FQHState, sector: Sector, params: ThermoParams,
                         evaluation: ZEvaluation | None = None) -> float:
    ev = evaluation or log_Z(state, sector, params)
    return einstein_prefactor(params.t) * ev.d2logZ_dmu2


def relative_grand_potential(state: FQHState, sector: Sector,
                             params: ThermoParams) -> Callable[[float], float]:
    """
    phi -> Omega(phi) - Omega(params.phi) up to a linear function of phi.

    Built from ratios Z(phi)/Z(phi0) over the term set at phi0, with each
    term's weight moved by exp(A (phi - phi0) Q); the ratio is summed with
    expm1/log1p about the heaviest term so that exponentially small
    curvatures survive a second difference.
    """
    _check_admissible(state, sector)
    logs, charges = [], []
    for _, log_w, charge in _sector_pieces(state, sector, params):
        logs.append(log_w)
        charges.append(charge)
    log_w = np.concatenate(logs)
    charge = np.concatenate(charges)
    top = int(np.argmax(log_w))
    keep = log_w >= log_w[top] - params.drop
    p = np.exp(log_w[keep] - log_w[top])
    p /= p.sum()
    dq = charge[keep] - charge[top]
    A, phi0 = params.coupling, params.phi
    cz_curv = -_CZ_SIGN * float(state.nu) * A / 2.0 if params.include_cz else 0.0

    def omega(phi: float) -> float:
        d = phi - phi0
        u = float(np.dot(p, np.expm1(A * d * dq)))
        return -math.log1p(u) + cz_curv * d * d

    return omega


def conductance_fd(state: FQHState, sector: Sector, params: ThermoParams,
                   step: float | None = None,
                   evaluator: Callable[[float], float] | str | None = None,
                   tol: float = 1e-6) -> float:
    """
    Conductance from a Richardson-extrapolated central second difference of
    the grand potential in phi (steps h and h/2).

    ``evaluator`` maps phi to Omega/(k_B T); ``None`` uses
    relative_grand_potential, ``"direct"`` re-evaluates -ln Z at each phi.
    """
    h = params.fd_step if step is None else step
    if not h > 0:
        raise ValueError(f"finite-difference step must be positive, got {h}")
    if evaluator is None:
        f = relative_grand_potential(state, sector, params)
    elif evaluator == "direct":
        def f(phi):
            return grand_potential(state, sector, params.with_(phi=phi))
    else:
        f = evaluator
    phi = params.phi
    f0 = f(phi)
    values = {}

    def second_difference(hh):
        fp, fm = f(phi + hh), f(phi - hh)
        values[hh] = (fp, fm)
        return (fp + fm - 2.0 * f0) / (hh * hh)

    d_h, d_h2 = second_difference(h), second_difference(h / 2)
    d2_omega = (4.0 * d_h2 - d_h) / 3.0

    scale = max(abs(v) for pair in values.values() for v in pair)
    scale = max(scale, abs(f0))
    predicted = 4.0 * np.finfo(float).eps * scale / (h / 2) ** 2 * 2.0
    if predicted > tol * abs(d2_omega) and predicted > 0:
        warnings.warn(f"second difference at step {h} may lose accuracy to cancellation "
                      f"(predicted error {predicted:.2e} vs value {abs(d2_omega):.2e})",
                      FDCancellationWarning, stacklevel=2)
    return -flux_prefactor(params.t) * d2_omega


def cb_conductance(g_left: float, g_right: float, g_island: float) -> float:
    """Series combination of the two point contacts times the island conductance (units e^2/h)."""
    if g_left < 0 or g_right < 0:
        raise ValueError("point-contact conductances must be non-negative")
    if g_left + g_right == 0:
        return 0.0
    return g_left * g_right / (g_left + g_right) * g_island


def qpc_conductance(t: float, delta_el, amplitude: float) -> float:
    """Low-temperature point-contact conductance amplitude * t^(4 Delta_el - 2)."""
    return amplitude * t ** (4 * float(delta_el) - 2)
