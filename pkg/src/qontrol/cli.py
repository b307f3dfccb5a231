"""Command-line front end: ``qontrol {traj,sweep,effect,series,figure}``.

Every flag has a config-file key of the same name (``delta-e = 0.1``; ``#``
starts a comment).  Flags override the file.  Each successful run writes
its resolved configuration to a ``<output>.run_manifest.txt`` sidecar.

Exit codes: 0 success, 1 invalid arguments or config, 2 numerical failure,
3 I/O error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import degenerate_trajectory
from .core import InvalidParameterError, TimeGrid
from .dynamics import DivergenceError, DivergencePolicy, integrate
from .metrics import (
    SimConfig,
    SweepPointError,
    default_workers,
    duration_sweep,
    effect_series,
    fit_effect,
    numerical_error_series,
)
from .series import (
    InsufficientOrderError,
    SeriesOverflowError,
    TruncatedSeriesError,
    coefficient_rows,
    radius_estimate,
    taylor_coefficients,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

FORMS = {"first": "first_order", "second": "second_order", "analytic": "analytic"}
FIGURE2_GRID = [round(0.05 * k, 2) for k in range(21)]
FIGURE_STRIDE = 100

CONVENTION_NOTE = (
    "# rate convention 'cyclic': drive rate 2*pi*H12/hbar, closed form exact, "
    "p2(T/4) = 1 at H12*T/hbar = pi/2\n"
    "# rate convention 'angular': drive rate H12/hbar, closed-form phase amplitude "
    "H12*T/(2*pi*hbar), p2(T/4) = sin(1/4)^2 = 0.0612 at H12*T/hbar = pi/2\n"
)


class UsageError(Exception):
    pass


def _bool(text: str) -> bool:
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> list[float]:
    return [float(x) for x in str(text).replace(" ", "").split(",") if x]


def _choice(options):
    def convert(text):
        if text not in options:
            raise ValueError(f"expected one of {sorted(options)}, got {text!r}")
        return text
    return convert


# key -> (converter, default); None default means "not set".
OPTIONS = {
    "out": (str, None),
    "dt": (float, 1e-5),
    "method": (_choice({"euler", "rk4"}), "rk4"),
    "form": (_choice(set(FORMS)), "first"),
    "delta-e": (float, 0.0),
    "delta-e-list": (_floats, None),
    "thresholds": (_floats, [0.95, 0.90, 0.80, 0.70]),
    "t-end": (float, 1.0),
    "workers": (int, None),
    "stride": (int, 1),
    "fit": (_bool, False),
    "order": (int, 80),
    "radius": (_bool, False),
    "halt-on-divergence": (_bool, False),
    "coupling": (float, None),
    "convention": (_choice({"cyclic", "angular"}), "cyclic"),
    "defect-threshold": (float, 1e-3),
    "tan-guard": (float, 1e8),
    "window": (float, 0.25),
    "fit-window": (_floats, [0.0, 0.25]),
    "time-unit": (_choice({"fraction_of_T", "hbar_over_H12"}), "fraction_of_T"),
}
FLAGS = {"fit", "radius", "halt-on-divergence"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    for key in OPTIONS:
        dest = key.replace("-", "_")
        if key in FLAGS:
            common.add_argument(f"--{key}", dest=dest, action="store_const", const="true")
        else:
            common.add_argument(f"--{key}", dest=dest)

    parser = _Parser(prog="qontrol", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("traj", parents=[common], help="trajectory CSV")
    sub.add_parser("sweep", parents=[common], help="control-duration sweep CSV")
    sub.add_parser("effect", parents=[common], help="non-degeneracy effect CSV")
    sub.add_parser("series", parents=[common], help="Taylor coefficients and radius")
    fig = sub.add_parser("figure", parents=[common], help="reproduce a figure dataset")
    fig.add_argument("which", type=int, choices=[1, 2, 3])
    return parser


def read_config_file(path) -> dict:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("_", "-")
        if key not in OPTIONS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then config file, then flags."""
    raw = {}
    if args.config:
        raw.update(read_config_file(args.config))
    for key in OPTIONS:
        value = getattr(args, key.replace("-", "_"))
        if value is not None:
            raw[key] = value
    cfg = {key: default for key, (_, default) in OPTIONS.items()}
    for key, value in raw.items():
        try:
            cfg[key] = OPTIONS[key][0](value)
        except ValueError as exc:
            raise UsageError(f"--{key}: {exc}") from exc
    if cfg["workers"] is None:
        cfg["workers"] = default_workers()
    if cfg["workers"] < 1 or cfg["stride"] < 1:
        raise UsageError("workers and stride must be >= 1")
    if cfg["dt"] <= 0 or cfg["t-end"] <= 0:
        raise UsageError("dt and t-end must be positive")
    if len(cfg["fit-window"]) != 2:
        raise UsageError("fit-window takes two numbers: lo,hi")
    return cfg


def sim_config(cfg: dict) -> SimConfig:
    """Simulation settings; the analytic form falls back to first order for metrics."""
    form = FORMS[cfg["form"]]
    return SimConfig(
        method=cfg["method"],
        form="first_order" if form == "analytic" else form,
        dt_in_hbar_over_H12=cfg["dt"],
        coupling=cfg["coupling"],
        convention=cfg["convention"],
        workers=cfg["workers"],
        policy=DivergencePolicy(
            cfg["defect-threshold"], cfg["tan-guard"], cfg["halt-on-divergence"]
        ),
    )


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def write_atomic(path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def manifest_text(command: str, cfg: dict, extra: dict = None) -> str:
    lines = [f"command={command}"]
    for key in OPTIONS:
        value = cfg[key]
        if isinstance(value, list):
            value = ",".join(fmt(v) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = fmt(value)
        lines.append(f"{key}={'' if value is None else value}")
    for key, value in (extra or {}).items():
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n" + CONVENTION_NOTE


def _sidecar(out: Path) -> Path:
    return out.with_name(out.name + ".run_manifest.txt")


def _trajectory(cfg: dict, delta: float, t_end: float):
    sim = sim_config(cfg)
    params = sim.params(delta)
    grid = TimeGrid(t_end * params.period, sim.step(params))
    if cfg["form"] == "analytic":
        return degenerate_trajectory(params, grid.times())
    return integrate(params, grid, sim.method, sim.form, sim.policy)


def _traj_rows(traj, stride: int):
    idx = np.arange(0, len(traj), stride)
    T = traj.params.period
    for i in idx:
        a, b = traj.a11[i], traj.a12[i]
        yield (traj.times[i] / T, a.real, a.imag, b.real, b.imag,
               abs(a) ** 2, abs(b) ** 2, traj.unitarity_defect[i])


TRAJ_HEADER = ["t_over_T", "re_a11", "im_a11", "re_a12", "im_a12", "p1", "p2", "defect"]


def cmd_traj(cfg: dict) -> int:
    out = Path(cfg["out"] or "traj.csv")
    traj = _trajectory(cfg, cfg["delta-e"], cfg["t-end"])
    write_atomic(out, csv_text(TRAJ_HEADER, _traj_rows(traj, cfg["stride"])))
    diverged = "" if traj.diverged_at is None else fmt(traj.diverged_at / traj.params.period)
    if diverged:
        print(f"diverged_at_over_T={diverged}", file=sys.stderr)
    write_atomic(_sidecar(out), manifest_text("traj", cfg, {"diverged_at_over_T": diverged}))
    return EXIT_OK


def _sweep_points(cfg: dict, deltas):
    return duration_sweep(deltas, cfg["thresholds"], sim_config(cfg), cfg["window"])


def cmd_sweep(cfg: dict) -> int:
    if not cfg["delta-e-list"]:
        raise UsageError("sweep needs a non-empty --delta-e-list")
    out = Path(cfg["out"] or "sweep.csv")
    points = _sweep_points(cfg, cfg["delta-e-list"])
    rows = [(p.delta_e_over_E, p.threshold, p.fraction) for p in points]
    write_atomic(out, csv_text(["delta_e_over_E", "threshold", "fraction"], rows))
    write_atomic(_sidecar(out), manifest_text("sweep", cfg))
    return EXIT_OK


def _fit_block(fit) -> str:
    return (
        f"c1={fmt(fit.c1)}\nc2={fmt(fit.c2)}\nc3={fmt(fit.c3)}\n"
        f"residual={fmt(fit.residual_norm)}\ntime_unit={fit.time_unit}\n"
    )


def cmd_effect(cfg: dict) -> int:
    out = Path(cfg["out"] or "effect.csv")
    series = effect_series(cfg["delta-e"], sim_config(cfg), cfg["window"])
    fit = None
    if cfg["fit"]:
        fit = fit_effect(series, cfg["time-unit"], tuple(cfg["fit-window"]))
    rows = zip(series.times[:: cfg["stride"]], series.effect[:: cfg["stride"]])
    write_atomic(out, csv_text(["t_over_T", "effect_percent"], rows))
    extra = {}
    if fit is not None:
        block = _fit_block(fit)
        write_atomic(out.with_name(out.name + ".fit.txt"), block)
        sys.stdout.write(block)
        extra = dict(line.split("=", 1) for line in block.splitlines())
    write_atomic(_sidecar(out), manifest_text("effect", cfg, extra))
    return EXIT_OK


def cmd_series(cfg: dict) -> int:
    out = Path(cfg["out"] or "series.csv")
    order = cfg["order"]
    if order < 1:
        raise UsageError("order must be >= 1")
    if cfg["radius"] and order < 20:
        raise UsageError("radius estimate needs --order >= 20")
    params = sim_config(cfg).params(cfg["delta-e"])
    sol = taylor_coefficients(params, order, estimate_radius=False)
    write_atomic(out, csv_text(["n", "re_alpha", "im_alpha", "re_beta", "im_beta"], coefficient_rows(sol)))
    extra = {}
    if cfg["radius"]:
        r = radius_estimate(sol)
        report = "inf" if math.isinf(r) else fmt(r / params.period)
        print(f"radius_over_T={report}")
        extra["radius_over_T"] = report
    write_atomic(_sidecar(out), manifest_text("series", cfg, extra))
    return EXIT_OK


def _two_column(name: str, xs, ys) -> str:
    return csv_text(["x", name], zip(xs, ys))


def cmd_figure(cfg: dict, which: int) -> int:
    outdir = Path(cfg["out"] or ".")
    stride = cfg["stride"] if cfg["stride"] > 1 else FIGURE_STRIDE
    files = {}
    if which == 1:
        fig_cfg = dict(cfg, form="first", **{"delta-e": 0.0, "t-end": 1.0})
        traj = _trajectory(fig_cfg, 0.0, 1.0)
        files["figure1_trajectory.csv"] = csv_text(TRAJ_HEADER, _traj_rows(traj, stride))
        t = traj.t_over_T[::stride]
        p1, p2 = traj.p1[::stride], traj.p2[::stride]
        files["figure1_p1.csv"] = _two_column("p1", t, p1)
        files["figure1_p2.csv"] = _two_column("p2", t, p2)
        files["figure1_sum.csv"] = _two_column("p1_plus_p2", t, p1 + p2)
    elif which == 2:
        deltas = cfg["delta-e-list"] or FIGURE2_GRID
        points = _sweep_points(dict(cfg, form="first"), deltas)
        files["figure2_sweep.csv"] = csv_text(
            ["delta_e_over_E", "threshold", "fraction"],
            [(p.delta_e_over_E, p.threshold, p.fraction) for p in points],
        )
        for th in sorted({p.threshold for p in points}, reverse=True):
            curve = [p for p in points if p.threshold == th]
            files[f"figure2_threshold_{th:g}.csv"] = _two_column(
                "fraction", [p.delta_e_over_E for p in curve], [p.fraction for p in curve]
            )
    else:
        delta = cfg["delta-e"] or 0.1
        sim = sim_config(dict(cfg, form="first"))
        effect = effect_series(delta, sim, cfg["window"])
        error = numerical_error_series(sim, cfg["window"])
        files["figure3_effect.csv"] = csv_text(
            ["t_over_T", "effect_percent"],
            zip(effect.times[::stride], effect.effect[::stride]),
        )
        files["figure3_error.csv"] = csv_text(
            ["t_over_T", "error_percent"],
            zip(error.times[::stride], error.effect[::stride]),
        )
    for name, text in files.items():
        write_atomic(outdir / name, text)
    write_atomic(
        outdir / f"figure{which}.run_manifest.txt",
        manifest_text(f"figure {which}", cfg, {"files": ",".join(files)}),
    )
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve(args)
        if args.command == "traj":
            return cmd_traj(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "effect":
            return cmd_effect(cfg)
        if args.command == "series":
            return cmd_series(cfg)
        return cmd_figure(cfg, args.which)
    except (UsageError, InvalidParameterError, InsufficientOrderError) as exc:
        print(f"qontrol: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (DivergenceError, TruncatedSeriesError, SeriesOverflowError) as exc:
        print(f"qontrol: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SweepPointError as exc:
        print(f"qontrol: {exc}", file=sys.stderr)
        if isinstance(exc.cause, (ArithmeticError,)):
            return EXIT_NUMERIC
        return EXIT_INVALID
    except OSError as exc:
        print(f"qontrol: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
