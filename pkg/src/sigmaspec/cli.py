"""Command-line interface.

Commands: ``profile``, ``modes``, ``spectrum``, ``reproduce-tables`` and
``converge``.  Settings come from ``--config`` (JSON) with command-line flags
taking precedence; the effective configuration is embedded in every JSON
output.

Exit codes: 0 success, 2 invalid input, 3 numerical failure (no convergence,
instability, degenerate filter), 4 regression failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from . import io
from .evolve import SchemeConfig, evolve, gauge_mode_error, initial_data, self_convergence, Grid
from .exceptions import SigmaSpecError, ValidationError
from .modes import lightcone_analyticity, shooting_spectrum
from .profiles import ProfileSpec, ground_state, ground_state_profile, shoot_profile
from .spectra import extract_spectrum
from .tables import CELLS, SHOOTING_RANGES, cell, evaluate_cells, format_report

log = logging.getLogger("sigmaspec")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_REGRESSION = 0, 2, 3, 4
CLOSED_FORM_TOLERANCE = 1e-8
ORDER_TARGET, ORDER_TOLERANCE = 2.0, 0.2


@dataclass
class RunConfig:
    """Effective settings of one invocation (``None`` means the command default)."""

    command: str = ""
    n: int = 0
    grid: int | None = None
    cfl: float = 0.2
    tau_end: float | None = None
    levels: int = 4
    window: object = "auto"
    lambda_range: list | None = None
    steps: int | None = None
    samples: int = 2049
    coarse: bool = True
    shoot: bool = False
    check_closed_form: bool = False
    analytic_check: list | None = None
    cell: str | None = None
    out: str | None = None
    series: str | None = None

    def validate(self):
        if self.n not in (0, 1) and self.command in ("reproduce-tables",):
            raise ValidationError("reproduce-tables covers n = 0 and n = 1 only")
        if self.n < 0:
            raise ValidationError("--n must be non-negative")
        if self.grid is not None and self.grid < 32:
            raise ValidationError("--grid must be at least 32")
        if not 0 < self.cfl <= 0.5:
            raise ValidationError("--cfl must lie in (0, 0.5]")
        if self.tau_end is not None and self.tau_end <= 0:
            raise ValidationError("--tau-end must be positive")
        if not 1 <= self.levels <= 4:
            raise ValidationError("--levels must be between 1 and 4")
        if self.lambda_range is not None:
            lo, hi = self.lambda_range
            if not lo < hi:
                raise ValidationError("--lambda-range needs LO < HI")
        if isinstance(self.window, (list, tuple)):
            if len(self.window) != 2 or not self.window[0] < self.window[1]:
                raise ValidationError("--window needs two increasing times")
        elif self.window != "auto":
            raise ValidationError("--window must be 'auto' or 'A,B'")
        if self.cell is not None:
            cell(self.cell)
        return self


def _window(text):
    if text == "auto":
        return "auto"
    try:
        a, b = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("window must be 'auto' or 'A,B'") from None
    return [a, b]


def build_parser():
    p = argparse.ArgumentParser(prog="sigmaspec", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="JSON file with default settings")
        sp.add_argument("--out", help="output file ('-' for stdout)")
        sp.add_argument("--n", type=int, help="excitation index of the profile")
        return sp

    def evolution(sp):
        sp.add_argument("--grid", type=int, help="number of grid intervals on [0, 1]")
        sp.add_argument("--cfl", type=float, help="Courant number dtau / drho")
        sp.add_argument("--tau-end", type=float, dest="tau_end", help="final time")

    sp = common(sub.add_parser("profile", help="construct a self-similar profile"))
    sp.add_argument("--samples", type=int)
    sp.add_argument("--shoot", action="store_true", default=None,
                    help="shoot the ground state instead of using its closed form")
    sp.add_argument("--check-closed-form", action="store_true", default=None, dest="check_closed_form",
                    help="compare the shot ground state with 2 arctan(rho)")

    sp = common(sub.add_parser("modes", help="eigenvalues by shooting"))
    sp.add_argument("--lambda-range", type=float, nargs=2, metavar=("LO", "HI"), dest="lambda_range")
    sp.add_argument("--steps", type=int, help="scan points")
    sp.add_argument("--analytic-check", type=float, nargs="+", dest="analytic_check", metavar="LAMBDA",
                    help="also test analyticity at the lightcone for these lambdas")

    sp = common(sub.add_parser("spectrum", help="eigenvalues by filtered time evolution"))
    evolution(sp)
    sp.add_argument("--levels", type=int)
    sp.add_argument("--window", type=_window, help="'auto' or 'A,B'")
    sp.add_argument("--series", help="CSV file for the log-norm series")
    sp.add_argument("--no-coarse", action="store_false", dest="coarse", default=None,
                    help="skip the half-resolution error estimate")

    sp = common(sub.add_parser("reproduce-tables", help="check both tables of reference eigenvalues"))
    evolution(sp)
    sp.add_argument("--cell", help="check one cell, e.g. groundstate/shooting/gauge")
    sp.add_argument("--no-coarse", action="store_false", dest="coarse", default=None)

    sp = common(sub.add_parser("converge", help="self-convergence order of the scheme"))
    evolution(sp)
    return p


COMMAND_DEFAULTS = {
    "spectrum": {"grid": 2048, "tau_end": 12.0},
    "reproduce-tables": {"grid": 2048, "tau_end": 12.0},
    "converge": {"grid": 256, "tau_end": 2.0},
}


def resolve_config(args):
    cfg = RunConfig(command=args.command)
    if getattr(args, "config", None) is not None:
        data = io.read_json(args.config)
        data = data.get("config", data)
        known = {f.name for f in fields(RunConfig)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        for k, v in data.items():
            if k != "command":
                setattr(cfg, k, v)
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None and f.name != "command":
            setattr(cfg, f.name, v)
    for k, v in COMMAND_DEFAULTS.get(cfg.command, {}).items():
        if getattr(cfg, k) is None:
            setattr(cfg, k, v)
    if cfg.command == "modes" and cfg.lambda_range is None:
        cfg.lambda_range = list(SHOOTING_RANGES.get(cfg.n, (-1.0, 8.0)))
    return cfg.validate()


def _profile(n, samples=2049):
    if n == 0:
        return ground_state_profile(samples)
    return shoot_profile(ProfileSpec(excitation_index=n, samples=samples))


def _say(cfg, text):
    # keep stdout clean when the JSON document goes there
    print(text, file=sys.stderr if cfg.out == "-" else sys.stdout)


def _emit(cfg, doc):
    if cfg.out:
        io.write_json(cfg.out, doc)


def _header(cfg):
    return {"config": asdict(cfg), "versions": io.version_tags()}


def cmd_profile(cfg):
    if cfg.check_closed_form:
        if cfg.n != 0:
            raise ValidationError("--check-closed-form applies to --n 0 only")
        p = shoot_profile(ProfileSpec(excitation_index=0, samples=cfg.samples))
        r = p.rho[p.rho <= 1.0]
        f, fp = p.evaluate(r)
        f0, fp0 = ground_state(r)
        dev = float(max(np.max(np.abs(f - f0)), np.max(np.abs(fp - fp0))))
        ok = dev <= CLOSED_FORM_TOLERANCE
        _say(cfg, f"b={p.b:.12g} c={p.c:.12g} defect={p.defect:.3e}")
        _say(cfg, f"max deviation from 2 arctan(rho): {dev:.3e} ({'PASS' if ok else 'FAIL'}, "
              f"tolerance {CLOSED_FORM_TOLERANCE:g})")
        _emit(cfg, dict(p.to_dict(), closed_form_deviation=dev, **_header(cfg)))
        return EXIT_OK if ok else EXIT_REGRESSION
    if cfg.n == 0 and not cfg.shoot:
        p = ground_state_profile(cfg.samples)
    else:
        p = shoot_profile(ProfileSpec(excitation_index=cfg.n, samples=cfg.samples))
    _say(cfg, f"n={p.excitation_index} b={p.b:.12g} c={p.c:.12g} defect={p.defect:.3e}"
          f"{' (closed form)' if p.closed_form else ''}")
    _emit(cfg, dict(p.to_dict(), **_header(cfg)))
    return EXIT_OK


def cmd_modes(cfg):
    p = _profile(cfg.n, cfg.samples)
    rng = cfg.lambda_range
    est, sols = shooting_spectrum(p, tuple(rng), cfg.steps)
    pairs = []
    for e, s in zip(est, sols):
        _say(cfg, f"lambda={e.value:.10f} +- {e.uncertainty:.1e}  a={s.params.a:.8g}  "
              f"defect={e.details['defect']:.1e}")
        pairs.append(dict(s.to_dict(), uncertainty=e.uncertainty))
    if not est:
        _say(cfg, f"no eigenvalues in [{rng[0]}, {rng[1]}]")
    doc = io.spectrum_report(est, p.excitation_index, "shooting", asdict(cfg))
    doc["eigenpairs"] = pairs
    if cfg.analytic_check:
        checks = []
        for lam in cfg.analytic_check:
            r = lightcone_analyticity(p, lam)
            _say(cfg, f"lambda={lam}: log coefficient {r.log_coefficient:.3e} (relative {r.relative_log:.2e}), "
                  f"shooter defect at optimal a {r.optimal_defect:.3e} -> "
                  f"{'analytic (eigenvalue)' if r.analytic else 'not analytic'}")
            checks.append(r.to_dict())
        doc["analytic_checks"] = checks
    _emit(cfg, doc)
    return EXIT_OK


def _evolution_spectrum(cfg, n, profile=None):
    p = profile if profile is not None else _profile(n, cfg.samples)
    scheme = SchemeConfig(p, cfl=cfg.cfl, tau_end=cfg.tau_end)
    window = cfg.window if cfg.window == "auto" else tuple(cfg.window)
    return extract_spectrum(p, cfg.levels, scheme, N=cfg.grid, window=window,
                            coarse=cfg.coarse)


def cmd_spectrum(cfg):
    res = _evolution_spectrum(cfg, cfg.n)
    for e in res:
        _say(cfg, f"level {e.level}: mu={e.value:.6f} +- {e.uncertainty:.1e}  window={e.details['window']}"
              f"  oscillation={e.oscillation}")
    doc = io.spectrum_report(res.estimates, cfg.n, "evolution", asdict(cfg))
    _emit(cfg, doc)
    series = cfg.series
    if series is None and cfg.out and cfg.out != "-":
        series = str(Path(cfg.out).with_suffix("")) + "_series.csv"
    if series:
        io.write_csv(series, *io.series_table(res.bank))
    return EXIT_OK


def cmd_reproduce_tables(cfg):
    cells = [cell(cfg.cell)] if cfg.cell else list(CELLS)
    estimates, profiles = {}, {}
    for n, method in sorted({(c.profile_n, c.method) for c in cells}):
        if n not in profiles:
            profiles[n] = _profile(n, cfg.samples)
        if method == "shooting":
            estimates[(n, method)] = shooting_spectrum(profiles[n], SHOOTING_RANGES[n])[0]
        else:
            sub = RunConfig(**dict(asdict(cfg), levels=4))
            estimates[(n, method)] = list(_evolution_spectrum(sub, n, profiles[n]))
    results = evaluate_cells(cells, estimates)
    _say(cfg, format_report(results))
    doc = {"cells": [r.to_dict() for r in results], "pass": all(r.passed for r in results),
           **_header(cfg)}
    _emit(cfg, doc)
    return EXIT_OK if doc["pass"] else EXIT_REGRESSION


def cmd_converge(cfg):
    p = _profile(cfg.n, cfg.samples)
    base = cfg.grid
    scheme = SchemeConfig(p, cfl=cfg.cfl, tau_end=cfg.tau_end)
    rep = self_convergence(scheme, (base, 2 * base, 4 * base))
    order_ok = abs(rep["order"] - ORDER_TARGET) <= ORDER_TOLERANCE
    _say(cfg, f"self-convergence N={rep['grids']}: differences {rep['differences'][0]:.3e}, "
          f"{rep['differences'][1]:.3e} -> order {rep['order']:.3f} ({'PASS' if order_ok else 'FAIL'})")
    gauge = {}
    for N in rep["grids"]:
        gauge[N] = gauge_mode_error(scheme, N)
        _say(cfg, f"gauge mode exp(tau) test N={N}: relative error {gauge[N]:.3e}")
    zero = {}
    for N in rep["grids"]:
        s = evolve(initial_data("phi", Grid(N)) * 0.0, scheme)
        zero[N] = float(np.max(np.abs(s.u)))
    zero_ok = all(v == 0.0 for v in zero.values())
    _say(cfg, f"zero data stays zero: {'PASS' if zero_ok else 'FAIL'}")
    doc = {"self_convergence": rep, "order_pass": order_ok, "gauge_mode_error": gauge,
           "zero_data_max": zero, **_header(cfg)}
    _emit(cfg, doc)
    return EXIT_OK if order_ok and zero_ok else EXIT_REGRESSION


COMMANDS = {
    "profile": cmd_profile,
    "modes": cmd_modes,
    "spectrum": cmd_spectrum,
    "reproduce-tables": cmd_reproduce_tables,
    "converge": cmd_converge,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[cfg.command](cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SigmaSpecError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
