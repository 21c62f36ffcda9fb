"""Flux sweeps, peak extraction and spacing classification."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .edge_cft import FQHState, Sector
from .thermo import ThermoParams, conductance_flux

WORKERS_ENV = "FQHCB_WORKERS"


@dataclass
class ConductanceTrace:
    phi: np.ndarray
    g: np.ndarray
    params: dict
    state: str

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        if self.phi.shape != self.g.shape or self.phi.ndim != 1:
            raise ValueError("phi and g must be 1-d arrays of equal length")
        if self.phi.size >= 2 and not np.all(np.diff(self.phi) > 0):
            raise ValueError("phi grid must be strictly increasing")
        if not np.all(np.isfinite(self.g)):
            raise ValueError("conductance trace contains non-finite values")

    @property
    def step(self) -> float:
        return float(self.phi[1] - self.phi[0])


@dataclass
class Peak:
    position: float
    height: float
    fwhm: float
    index: int


@dataclass
class Classification:
    bunch_size: int
    within_spacing: float
    between_spacing: float
    period: float
    expected_bunch_size: int
    expected_period: int
    single_period: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PeakReport:
    peaks: list[Peak]
    baseline: float
    threshold: float
    classification: Classification | None = None
    meta: dict = field(default_factory=dict)

    @property
    def positions(self) -> np.ndarray:
        return np.array([p.position for p in self.peaks])

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.positions)


def _sweep_chunk(args):
    state, sector, params, phis = args
    return [conductance_flux(state, sector, params.with_(phi=float(p))) for p in phis]


def _workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, workers)


def sweep_flux(state: FQHState, sector: Sector, base_params: ThermoParams,
               phi_min: float, phi_max: float, n_points: int,
               workers: int | None = None) -> ConductanceTrace:
    """Conductance on a uniform flux grid.  Worker count defaults to $FQHCB_WORKERS (else 1)."""
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    if not phi_max > phi_min:
        raise ValueError("phi_max must exceed phi_min")
    phis = np.linspace(phi_min, phi_max, n_points)
    nw = _workers(workers)
    if nw > 1:
        chunks = np.array_split(phis, nw)
        with ProcessPoolExecutor(nw) as pool:
            parts = pool.map(_sweep_chunk, [(state, sector, base_params, c) for c in chunks])
            g = [v for part in parts for v in part]
    else:
        g = []
        for p in phis:
            try:
                g.append(conductance_flux(state, sector, base_params.with_(phi=float(p))))
            except Exception as exc:
                raise type(exc)(f"{exc} (at phi={p})") from exc
    snapshot = {k: v for k, v in asdict(base_params).items() if k != "phi"}
    snapshot["sector"] = [sector.l, sector.lam]
    return ConductanceTrace(phis, np.array(g), snapshot, state.name)


def _refine(x: np.ndarray, y: np.ndarray, i: int) -> tuple[float, float]:
    """Vertex of the parabola through points i-1, i, i+1 (uniform grid)."""
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom >= 0:
        return float(x[i]), float(y1)
    h = x[i + 1] - x[i]
    delta = 0.5 * (y0 - y2) / denom
    return float(x[i] + delta * h), float(y1 - 0.25 * (y0 - y2) * delta)


def _crossing(x, y, i, level, direction):
    j = i
    while 0 <= j + direction < len(y):
        k = j + direction
        if y[k] < level:
            frac = (y[j] - level) / (y[j] - y[k])
            return x[j] + frac * (x[k] - x[j])
        j = k
    return None


def find_peaks(trace: ConductanceTrace, rel_threshold: float = 0.1) -> PeakReport:
    """
    Local maxima above baseline + rel_threshold * (max - baseline), where the
    baseline is the trace minimum.  Positions and heights come from a
    three-point parabola, widths from linearly interpolated half-height
    crossings; peaks whose half-height crossing falls off the grid are dropped.
    """
    x, y = trace.phi, trace.g
    if x.size < 3:
        raise ValueError("need at least 3 points to find peaks")
    baseline = float(y.min())
    span = float(y.max()) - baseline
    threshold = baseline + rel_threshold * span
    peaks = []
    if span > 0:
        for i in range(1, len(y) - 1):
            if not (y[i] > y[i - 1] and y[i] >= y[i + 1] and y[i] > threshold):
                continue
            pos, height = _refine(x, y, i)
            half = baseline + 0.5 * (height - baseline)
            left, right = _crossing(x, y, i, half, -1), _crossing(x, y, i, half, +1)
            if left is None or right is None:
                continue
            peaks.append(Peak(pos, height, float(right - left), i))
    return PeakReport(peaks, baseline, threshold,
                      meta={"state": trace.state, "grid_step": trace.step,
                            "phi_range": [float(x[0]), float(x[-1])], "n_points": int(x.size),
                            "rel_threshold": rel_threshold})


def _two_means(values: np.ndarray) -> np.ndarray:
    """1-d two-means labels (False = small cluster), seeded at min and max; ties go to small."""
    lo, hi = float(values.min()), float(values.max())
    labels = np.zeros(values.size, dtype=bool)
    for _ in range(100):
        new = np.abs(values - hi) < np.abs(values - lo)
        if np.array_equal(new, labels):
            break
        labels = new
        lo = float(values[~labels].mean())
        if labels.any():
            hi = float(values[labels].mean())
    return labels


def classify_periods(report: PeakReport, state: FQHState, spread_tol: float = 0.1) -> Classification:
    """
    Split peak spacings into within-bunch and between-bunch groups.

    If all spacings agree to ``spread_tol`` (relative) the pattern is single
    period and within = between.  The bunch size is the most common number
    of peaks joined by within-bunch spacings.
    """
    n_peaks = len(report.peaks)
    if n_peaks < state.n_H + 1:
        raise ValueError(f"need at least n_H + 1 = {state.n_H + 1} peaks, got {n_peaks}")
    s = report.spacings
    mean = float(s.mean())
    if float(s.max() - s.min()) <= spread_tol * mean:
        cls = Classification(1, mean, mean, mean, state.n_H, state.d_H, True)
    else:
        big = _two_means(s)
        within, between = float(s[~big].mean()), float(s[big].mean())
        runs, run = [], 1
        for is_big in big:
            if is_big:
                runs.append(run)
                run = 1
            else:
                run += 1
        runs.append(run)
        # interior runs are complete bunches; edge runs may be cut by the window
        complete = runs[1:-1] or runs
        counts = {r: complete.count(r) for r in set(complete)}
        bunch = max(sorted(counts), key=lambda r: counts[r])
        cls = Classification(bunch, within, between, (bunch - 1) * within + between,
                             state.n_H, state.d_H, False)
    report.classification = cls
    return cls


def temperature_scan(state: FQHState, sector: Sector, t_values, phi_window: tuple[float, float],
                     n_points: int, base_params: ThermoParams | None = None,
                     workers: int | None = None) -> list[PeakReport]:
    """One sweep and peak report per temperature over the same flux window."""
    base = base_params or ThermoParams(t=float(t_values[0]))
    reports = []
    for t in t_values:
        trace = sweep_flux(state, sector, base.with_(t=float(t)), phi_window[0], phi_window[1],
                           n_points, workers)
        report = find_peaks(trace)
        report.meta["t"] = float(t)
        report.meta["trace"] = trace
        reports.append(report)
    return reports


def central_peak(report: PeakReport, center: float) -> Peak:
    if not report.peaks:
        raise ValueError("report has no peaks")
    return min(report.peaks, key=lambda p: abs(p.position - center))

