"""Command-line interface: ``acmcp simulate | run | evaluate | version``.

Exit codes: 0 success, 1 usage, 2 validation, 3 runtime. Every failure
prints exactly one line to stderr::

    acmcp-error exit=<code> kind=<usage|validation|runtime> message="<json string>"

Run configuration is a text file of ``key = value`` lines (``#`` starts a
comment). Keys are the :class:`~acmcp.core.ExperimentConfig` field names
plus the run keys in :data:`RUN_KEYS`; command-line flags override the file.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__, _kernels
from .core import ConfigError, ExperimentConfig, IntervalPanel, PanelError, SeriesFrame, check_config
from .cpmethods import DEFAULT_METHODS, METHODS
from .engine import RunPlan, run
from .evalkit import evaluate_panel, metrics_to_csv_text
from .forecasters import FitError, ForecasterSpec
from .simgen import DgpSpec, simulate

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3
_KIND = {EXIT_USAGE: "usage", EXIT_VALIDATION: "validation", EXIT_RUNTIME: "runtime"}

# run-level keys accepted in config files besides the ExperimentConfig fields
RUN_KEYS = {
    "methods": ",".join(DEFAULT_METHODS),
    "forecaster": "ar_ls",
    "ar_order": "2",
    "exog": "false",
    "forecasts_path": "none",
    "refit_every": "1",
    "expanding": "false",
    "error_models": "true",
}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_USAGE, f"{self.prog}: {message}")


def _fail(code: int, message: str) -> int:
    msg = " ".join(str(message).split())
    print(f"acmcp-error exit={code} kind={_KIND[code]} message={json.dumps(msg)}", file=sys.stderr)
    return code


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

def parse_config_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(EXIT_VALIDATION, f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in ExperimentConfig.field_names() and key not in RUN_KEYS:
            raise CliError(EXIT_VALIDATION, f"{source}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _bool(text: str, key: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise CliError(EXIT_VALIDATION, f"{key}: expected true/false, got {text!r}")


def _convert(key: str, text: str):
    """Typed value of an ExperimentConfig field from its text form."""
    ints = {"H", "t_r", "t_c", "seed", "delta"}
    optional = {"C_sat", "K_I", "delta"}
    if key in optional and text.strip().lower() in ("none", ""):
        return None
    try:
        if key == "sided":
            return text.strip()
        if key in ints:
            return int(text)
        return float(text)
    except ValueError:
        raise CliError(EXIT_VALIDATION, f"{key}: cannot parse {text!r}") from None


def build_config(values: dict) -> ExperimentConfig:
    kwargs = {k: _convert(k, v) for k, v in values.items() if k in ExperimentConfig.field_names()}
    cfg = ExperimentConfig(**kwargs)
    try:
        check_config(cfg)
    except ConfigError as exc:
        raise CliError(EXIT_VALIDATION, f"invalid config: {exc}") from None
    return cfg


def resolved_config_text(cfg: ExperimentConfig, run_values: dict) -> str:
    lines = []
    for name in ExperimentConfig.field_names():
        v = getattr(cfg, name)
        if name == "delta":
            v = cfg.window_delta
        elif name == "C_sat":
            v = cfg.c_sat
        lines.append(f"{name} = {'none' if v is None else repr(v) if isinstance(v, float) else v}")
    for k in RUN_KEYS:
        lines.append(f"{k} = {run_values[k]}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    phi = ()
    if args.phi:
        try:
            phi = tuple(float(p) for p in args.phi.split(","))
        except ValueError:
            raise CliError(EXIT_VALIDATION, f"--phi: cannot parse {args.phi!r}") from None
    try:
        spec = DgpSpec(args.dgp, args.n, args.burn_in, args.seed, phi, args.sigma2)
    except ValueError as exc:
        raise CliError(EXIT_VALIDATION, f"invalid dgp spec: {exc}") from None
    sim = simulate(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    text = sim.series.to_csv_text()
    out.write_text(text)
    manifest = {
        "dgp": dataclasses.asdict(spec),
        "seed": spec.seed,
        "spec_hash": spec.digest(),
        "csv_sha256": hashlib.sha256(text.encode()).hexdigest(),
        "rows": len(sim.series),
        "guard_events": sim.guard_events,
        "generator": "numpy.random.default_rng (PCG64)",
        "version": __version__,
    }
    Path(str(out) + ".manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out} ({len(sim.series)} rows)")
    return EXIT_OK


def _collect_run_values(args) -> dict:
    values = dict(RUN_KEYS)
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise CliError(EXIT_VALIDATION, f"config file not found: {path}")
        values.update(parse_config_text(path.read_text(), str(path)))
    for name in ExperimentConfig.field_names():
        v = getattr(args, f"cfg_{name}")
        if v is not None:
            values[name] = v
    for k in RUN_KEYS:
        v = getattr(args, f"run_{k}")
        if v is not None:
            values[k] = v
    return values


def _plan_from_values(values: dict, series: SeriesFrame) -> RunPlan:
    cfg = build_config(values)
    methods = tuple(m.strip() for m in values["methods"].split(",") if m.strip())
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise CliError(EXIT_VALIDATION, f"methods: unknown or empty ({', '.join(bad)}); choose from {', '.join(METHODS)}")
    try:
        order = int(values["ar_order"])
        refit = int(values["refit_every"])
    except ValueError:
        raise CliError(EXIT_VALIDATION, "ar_order and refit_every must be integers") from None
    path = values["forecasts_path"]
    try:
        spec = ForecasterSpec(values["forecaster"], order, _bool(values["exog"], "exog"),
                              None if path.lower() == "none" else path)
    except ValueError as exc:
        raise CliError(EXIT_VALIDATION, f"forecaster: {exc}") from None
    plan = RunPlan(series, spec, methods, cfg, refit, _bool(values["expanding"], "expanding"),
                   _bool(values["error_models"], "error_models"))
    try:
        plan.validate()
    except (ValueError, ConfigError) as exc:
        raise CliError(EXIT_VALIDATION, f"invalid run plan: {exc}") from None
    return plan


def cmd_run(args) -> int:
    values = _collect_run_values(args)
    series_path = Path(args.series)
    try:
        series = SeriesFrame.from_csv(series_path)
    except FileNotFoundError:
        raise CliError(EXIT_VALIDATION, f"series file not found: {series_path}") from None
    except (ValueError, IndexError) as exc:
        raise CliError(EXIT_VALIDATION, f"{series_path}: {exc}") from None
    plan = _plan_from_values(values, series)
    try:
        result = run(plan)
    except FitError as exc:
        raise CliError(EXIT_RUNTIME, f"{series_path}: {exc}") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    resolved = resolved_config_text(plan.cfg, values)
    (out / "resolved_config.txt").write_text(resolved)
    result.scores.to_csv(out / "scores.csv")
    result.forecasts.to_csv(out / "forecasts.csv")
    for m in plan.methods:
        result.intervals[m].to_csv(out / f"intervals_{m}.csv")
        result.traces[m].to_csv(out / f"trace_{m}.csv")
    (out / "warnings.txt").write_text("".join(w + "\n" for w in result.warnings))
    sys.stdout.write(resolved)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    rundir = Path(args.run_dir)
    cfg_path = rundir / "resolved_config.txt"
    if not cfg_path.is_file():
        raise CliError(EXIT_VALIDATION, f"not a run directory (missing {cfg_path})")
    values = dict(RUN_KEYS)
    values.update(parse_config_text(cfg_path.read_text(), str(cfg_path)))
    cfg = build_config(values)
    methods = [m for m in values["methods"].split(",") if m]
    if args.window < 1:
        raise CliError(EXIT_VALIDATION, "--window must be >= 1")
    panels = {}
    for m in methods:
        p = rundir / f"intervals_{m}.csv"
        try:
            panels[m] = IntervalPanel.from_csv(p)
        except FileNotFoundError:
            raise CliError(EXIT_VALIDATION, f"missing panel {p}") from None
        except (ValueError, IndexError) as exc:
            raise CliError(EXIT_VALIDATION, f"{p}: {exc}") from None
    shapes = {(p.first_origin, p.last_origin, p.H) for p in panels.values()}
    if len(shapes) > 1:
        raise CliError(EXIT_VALIDATION, f"mismatched panels: origin/horizon ranges differ {sorted(shapes)}")
    rows = []
    skipped = False
    for m in methods:
        r, s = evaluate_panel(m, panels[m], cfg.alpha, args.window, args.boxplot)
        rows += r
        skipped |= s
    if skipped:
        logging.getLogger("acmcp").warning(
            "window %d exceeds the realised test set for some horizons; rolling metrics omitted there", args.window)
    out = Path(args.out) if args.out else rundir / f"metrics_w{args.window}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(metrics_to_csv_text(rows))
    print(f"wrote {out} ({len(rows)} rows)")
    return EXIT_OK


def cmd_version(args) -> int:
    print(f"acmcp {__version__} (kernels: {_kernels.BACKEND})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="acmcp", description="Online conformal prediction intervals for multi-step forecasts.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", help="generate a reference series")
    s.add_argument("--dgp", required=True, choices=("ar2", "nonlinear", "custom_linear"))
    s.add_argument("--n", required=True, type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--burn-in", type=int, default=500)
    s.add_argument("--phi", help="comma-separated AR coefficients (custom_linear)")
    s.add_argument("--sigma2", type=float, default=1.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("run", help="run online conformal methods on a series")
    r.add_argument("--series", required=True, help="series CSV (tick,y[,x...])")
    r.add_argument("--config", help="key = value configuration file")
    r.add_argument("--out", required=True, help="output directory")
    for name in ExperimentConfig.field_names():
        r.add_argument(f"--{name.replace('_', '-')}", dest=f"cfg_{name}", metavar="VALUE")
    for k in RUN_KEYS:
        r.add_argument(f"--{k.replace('_', '-')}", dest=f"run_{k}", metavar="VALUE")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("evaluate", help="coverage and width metrics of a run")
    e.add_argument("--run-dir", required=True)
    e.add_argument("--window", type=int, default=500)
    e.add_argument("--boxplot", action="store_true", help="add width boxplot summaries")
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    v = sub.add_parser("version", help="print version")
    v.set_defaults(func=cmd_version)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if not getattr(args, "command", None):
            raise CliError(EXIT_USAGE, "acmcp: a subcommand is required (simulate, run, evaluate, version)")
        return args.func(args)
    except CliError as exc:
        return _fail(exc.code, str(exc))
    except (ConfigError, PanelError) as exc:
        return _fail(EXIT_VALIDATION, str(exc))
    except OSError as exc:
        return _fail(EXIT_RUNTIME, f"{type(exc).__name__}: {exc}")
    except Exception as exc:  # noqa: BLE001
        return _fail(EXIT_RUNTIME, f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
