"""
Command-line front end.

    fqhcb sweep            --config run.cfg --set t=0.5 --out runs/z3
    fqhcb scan-temperature --set t_list=0.3,0.5,0.8
    fqhcb selftest
    fqhcb describe-state rr-z3

Configuration is a flat ``key = value`` file; ``--set key=value`` overrides
it.  Exit codes: 0 ok, 1 self-test failure, 2 configuration error,
3 numerical guard, 4 I/O error.  Failures print a JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import __version__
from .analysis import ConductanceTrace, PeakReport, classify_periods, find_peaks, sweep_flux
from .edge_cft import (FQHState, Sector, decompose_sector, electron_dimension, make_state,
                       monodromy_charge, pairing_admissible, preset, validate_state)
from .errors import ConfigError, DomainError, FQHError, GuardError
from .thermo import ThermoParams

EXIT_OK, EXIT_SELFTEST, EXIT_CONFIG, EXIT_GUARD, EXIT_IO = 0, 1, 2, 3, 4


def fmt(x: float) -> str:
    """Fixed 12-significant-digit scientific notation."""
    return f"{float(x):.11e}"


@dataclass
class RunConfig:
    state: str = "rr-z3"
    n_H: int | None = None
    d_H: int | None = None
    neutral: str | None = None
    sector_l: int = 0
    sector_lambda: str = "vac"
    t: float = 0.5
    t_list: tuple[float, ...] = ()
    mu_red: float = 0.0
    phi_min: float = 0.0
    phi_max: float | None = None
    n_points: int | None = None
    include_cz: bool = True
    include_eta: bool = True
    t_max: float = 50.0
    drop: float = 750.0
    max_char_level: int = 64
    rel_threshold: float = 0.1
    workers: int | None = None
    out: str = "fqhcb_run"
    formats: tuple[str, ...] = ("csv", "json")
    defaults_applied: list = field(default_factory=list)

    @classmethod
    def from_mapping(cls, values: dict[str, str]) -> RunConfig:
        known = {f.name: f for f in fields(cls) if f.name != "defaults_applied"}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ConfigError(f"unknown configuration key {key!r}")
            kwargs[key] = _parse_value(key, str(raw).strip(), known[key].type)
        cfg = cls(**kwargs)
        cfg.defaults_applied = sorted(k for k in known if k not in kwargs)
        return cfg

    def build_state(self) -> FQHState:
        if self.n_H is not None or self.d_H is not None or self.neutral is not None:
            if None in (self.n_H, self.d_H, self.neutral):
                raise ConfigError("explicit state needs n_H, d_H and neutral together")
            state = make_state(self.n_H, self.d_H, self.neutral)
        else:
            state = preset(self.state)
        problems = validate_state(state)
        if problems:
            raise ConfigError(f"state {state.name} is inconsistent: " + "; ".join(problems))
        return state

    def resolve_grid(self, state: FQHState):
        """Default window: three flux periods at step 1e-3."""
        phi_max = self.phi_max if self.phi_max is not None else self.phi_min + 3 * state.d_H
        n_points = self.n_points
        if n_points is None:
            n_points = int(round((phi_max - self.phi_min) / 1e-3)) + 1
        if n_points < 3 or not phi_max > self.phi_min:
            raise ConfigError("flux grid needs phi_max > phi_min and at least 3 points")
        return phi_max, n_points

    def params(self, t: float | None = None) -> ThermoParams:
        return ThermoParams(t=self.t if t is None else t, mu_red=self.mu_red,
                            include_cz=self.include_cz, include_eta=self.include_eta,
                            t_max=self.t_max, drop=self.drop, max_char_level=self.max_char_level)

    def echo(self) -> dict:
        out = asdict(self)
        out["t_list"] = list(self.t_list)
        out["formats"] = list(self.formats)
        return out


def _parse_value(key, raw, annotation):
    ann = str(annotation)
    try:
        if raw.lower() in ("none", "") and "None" in ann:
            return None
        if ann.startswith("bool"):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if ann.startswith("tuple[float"):
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if ann.startswith("tuple[str"):
            return tuple(v.strip() for v in raw.split(",") if v.strip())
        if ann.startswith("int"):
            return int(raw)
        if ann.startswith("float"):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"cannot parse {key}={raw!r} as {ann}") from None


def read_config_file(path: str) -> dict[str, str]:
    values = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


# -- serialization ----------------------------------------------------------

def _json_token(obj, indent=0) -> str:
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return fmt(obj) if math.isfinite(obj) else json.dumps(str(obj))
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        body = ",\n".join(f"{inner}{json.dumps(str(k))}: {_json_token(v, indent + 1)}"
                          for k, v in sorted(obj.items()))
        return "{\n" + body + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(inner + _json_token(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if hasattr(obj, "item"):
        return _json_token(obj.item(), indent)
    raise TypeError(f"cannot serialize {type(obj)}")


def dumps(obj) -> str:
    """JSON text with every float in fixed 12-digit scientific notation, keys sorted."""
    return _json_token(obj) + "\n"


def _with_ext(stem: Path, ext: str) -> Path:
    # stems such as run_t0.3 carry dots, so append rather than with_suffix
    return stem.with_name(f"{stem.name}.{ext}")


def write_trace_csv(trace: ConductanceTrace, path: Path):
    lines = ["phi,g"] + [f"{fmt(p)},{fmt(g)}" for p, g in zip(trace.phi, trace.g)]
    path.write_text("\n".join(lines) + "\n")


def report_to_dict(report: PeakReport) -> dict:
    """Positions are rounded first and spacings taken from the rounded values."""
    positions = [float(fmt(p.position)) for p in report.peaks]
    out = {
        "peaks": [{"position": pos, "height": p.height, "fwhm": p.fwhm}
                  for pos, p in zip(positions, report.peaks)],
        "spacings": [b - a for a, b in zip(positions, positions[1:])],
        "baseline": report.baseline,
        "threshold": report.threshold,
        "classification": report.classification.to_dict() if report.classification else None,
    }
    out["meta"] = {k: v for k, v in report.meta.items() if k != "trace"}
    return out


def write_svg(trace: ConductanceTrace, report: PeakReport, path: Path,
              width: int = 800, height: int = 400):
    x0, x1 = float(trace.phi[0]), float(trace.phi[-1])
    y0, y1 = float(trace.g.min()), float(trace.g.max())
    if y1 == y0:
        y1 = y0 + 1.0
    margin = 40

    def sx(x):
        return margin + (x - x0) / (x1 - x0) * (width - 2 * margin)

    def sy(y):
        return height - margin - (y - y0) / (y1 - y0) * (height - 2 * margin)

    stride = max(1, trace.phi.size // 4000)
    pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}"
                   for x, y in zip(trace.phi[::stride], trace.g[::stride]))
    marks = "\n".join(f'  <circle cx="{sx(p.position):.2f}" cy="{sy(p.height):.2f}" r="3" fill="red"/>'
                      for p in report.peaks)
    svg = f"""<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">
  <rect width="100%" height="100%" fill="white"/>
  <line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>
  <line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>
  <text x="{width / 2}" y="{height - 8}" text-anchor="middle" font-size="12">flux (quanta) {x0:g} .. {x1:g}</text>
  <text x="12" y="{height / 2}" font-size="12" transform="rotate(-90 12 {height / 2})" text-anchor="middle">g [e^2/h] {y0:.3g} .. {y1:.3g}</text>
  <polyline fill="none" stroke="navy" stroke-width="1" points="{pts}"/>
{marks}
</svg>
"""
    path.write_text(svg)


# -- commands ---------------------------------------------------------------

def _sweep_and_report(cfg: RunConfig, state: FQHState, t: float):
    phi_max, n_points = cfg.resolve_grid(state)
    sector = Sector(cfg.sector_l, cfg.sector_lambda)
    trace = sweep_flux(state, sector, cfg.params(t), cfg.phi_min, phi_max, n_points, cfg.workers)
    report = find_peaks(trace, cfg.rel_threshold)
    if len(report.peaks) >= state.n_H + 1:
        classify_periods(report, state)
    return trace, report


def _emit(cfg: RunConfig, state: FQHState, trace, report, stem: Path, extra: dict):
    if "csv" in cfg.formats:
        write_trace_csv(trace, _with_ext(stem, "csv"))
    if "svg" in cfg.formats:
        write_svg(trace, report, _with_ext(stem, "svg"))
    payload = report_to_dict(report)
    payload.update(extra)
    return payload


def _document(cfg: RunConfig, state: FQHState, body: dict) -> dict:
    return {
        "version": __version__,
        "state": {"name": state.name, "n_H": state.n_H, "d_H": state.d_H,
                  "neutral": state.neutral.name},
        "config": cfg.echo(),
        **body,
    }


def cmd_sweep(cfg: RunConfig) -> int:
    state = cfg.build_state()
    stem = Path(cfg.out)
    stem.parent.mkdir(parents=True, exist_ok=True)
    trace, report = _sweep_and_report(cfg, state, cfg.t)
    payload = _emit(cfg, state, trace, report, stem, {"t": cfg.t})
    if "json" in cfg.formats:
        _with_ext(stem, "json").write_text(dumps(_document(cfg, state, {"report": payload})))
    _summary(report, cfg.t)
    return EXIT_OK


def cmd_scan(cfg: RunConfig) -> int:
    state = cfg.build_state()
    ts = cfg.t_list or (cfg.t,)
    base = Path(cfg.out)
    base.parent.mkdir(parents=True, exist_ok=True)
    reports = []
    for t in ts:
        stem = base.with_name(f"{base.name}_t{t:g}")
        trace, report = _sweep_and_report(cfg, state, t)
        reports.append(_emit(cfg, state, trace, report, stem, {"t": t}))
        _summary(report, t)
    if "json" in cfg.formats:
        _with_ext(base, "json").write_text(dumps(_document(cfg, state, {"reports": reports})))
    return EXIT_OK


def _summary(report: PeakReport, t: float):
    c = report.classification
    msg = f"t={t:g}: {len(report.peaks)} peaks"
    if c is not None:
        msg += (f", bunch {c.bunch_size}, within {c.within_spacing:.4f}, "
                f"between {c.between_spacing:.4f}, period {c.period:.4f}")
    print(msg)


def describe_state(state: FQHState, sector: Sector) -> str:
    model = state.neutral
    rows = [f"state {state.name}: nu = {state.nu}, m = {state.m}, neutral {model.name} "
            f"(c = {model.central_charge}), Delta_el = {electron_dimension(state)}"]
    problems = validate_state(state)
    rows.append("valid" if not problems else "INVALID: " + "; ".join(problems))
    rows.append(f"Z_{{{sector.l},{sector.lam}}} = sum over s of K_l(tau, {state.n_H} zeta; "
                f"{state.m}) ch_Lambda(tau)")
    rows.append(f"{'s':>3} {'l':>5} {'Lambda':>8} {'Delta':>7} {'Q_omega':>8} admissible")
    for s, piece in enumerate(decompose_sector(state, sector)):
        l_disp, lam = piece.display(state.m)
        rows.append(f"{s:>3} {l_disp:>5} {lam:>8} {str(model.weight(lam)):>7} "
                    f"{str(monodromy_charge(model, lam)):>8} {pairing_admissible(state, piece.l, lam)}")
    return "\n".join(rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fqhcb", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("sweep", "scan-temperature"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a configuration key (repeatable)")
        p.add_argument("--out", help="output path stem")
    p = sub.add_parser("selftest")
    p.add_argument("--inject-fault", choices=["cz-sign"], help=argparse.SUPPRESS)
    p = sub.add_parser("describe-state")
    p.add_argument("state", help="preset name, e.g. rr-z3 or laughlin:3")
    p.add_argument("--sector-l", type=int, default=0)
    p.add_argument("--sector-lambda", default="vac")
    return parser


def _load_config(args) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip()] = v
    if args.out:
        values["out"] = args.out
    return RunConfig.from_mapping(values)


def _fail(code: int, exc: BaseException) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            from .selftest import run_selftest
            results = run_selftest(args.inject_fault)
            return EXIT_OK if all(r.passed for r in results) else EXIT_SELFTEST
        if args.command == "describe-state":
            print(describe_state(preset(args.state), Sector(args.sector_l, args.sector_lambda)))
            return EXIT_OK
        cfg = _load_config(args)
        return cmd_sweep(cfg) if args.command == "sweep" else cmd_scan(cfg)
    except (GuardError, DomainError) as exc:
        return _fail(EXIT_GUARD, exc)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    except (FQHError, ValueError) as exc:
        return _fail(EXIT_CONFIG, exc)


if __name__ == "__main__":
    sys.exit(main())
