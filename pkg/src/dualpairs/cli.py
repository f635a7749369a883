"""Command-line runner: verification suites and simulations with CSV artifacts.

Subcommands: ``verify`` (identity suites, one printed row per invariant),
``peakon`` (collective N-body runs, point or filament), ``advect`` (a grid
map advected by a flow on the target, with the conserved momentum pairing
logged), ``converge`` (grid-refinement studies with fitted orders).

Configuration merges three layers, strongest first: command-line flags, a
``key = value`` config file (``--config``), built-in defaults.  Unknown
config keys are hard errors.  All floats are printed with 17 significant
digits; CSV files are RFC-4180 with a header row, so identical seed and
configuration reproduce identical bytes.

Exit codes: 0 all checks passed, 1 an invariant failed, 2 usage or
configuration error, 3 I/O failure, 4 numeric divergence (the failing step
index goes to stderr).
"""

from __future__ import annotations

import argparse
import csv
import math
import sys

import numpy as np

from . import datagen, verify
from .errors import SolverDivergenceError
from .fields import (
    GridSource,
    format_float,
    left_act,
    nodewise_linear,
    right_momentum_pair,
)
from .peakons import (
    FilamentState,
    KernelSpec,
    SingularState,
    integrate,
    write_trajectory_csv,
)
from .symplectic import METHODS, FlowSpec, Observable

__all__ = ["main"]

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

FLOWS = ("shear", "rotation", "swirl")
SUITES = ("exact", "numeric", "all")


def _as_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _as_grids(text) -> tuple[int, ...]:
    if isinstance(text, tuple):
        return text
    try:
        return tuple(int(part) for part in str(text).split(","))
    except ValueError:
        raise ValueError(f"expected comma-separated integers, got {text!r}") from None


# Per-subcommand option tables: name -> (parser-for-config-values, default).
_OPTIONS = {
    "verify": {
        "suite": (str, "all"),
        "seed": (int, 7),
        "count": (int, 100),
        "grid": (int, 16),
        "tol": (float, None),
        "out": (str, None),
    },
    "peakon": {
        "n": (int, 1),
        "dim": (int, 1),
        "kernel": (str, None),
        "alpha": (float, 1.0),
        "p": (float, 2.0),
        "dt": (float, 1e-3),
        "t_final": (float, 5.0),
        "method": (str, "implicit-midpoint"),
        "filament": (_as_bool, False),
        "nodes": (int, 32),
        "radius": (float, 1.0),
        "seed": (int, 7),
        "out": (str, "peakon.csv"),
    },
    "advect": {
        "grid": (int, 16),
        "flow": (str, "shear"),
        "steps": (int, 100),
        "dt": (float, 0.0625),
        "amplitude": (float, 0.3),
        "seed": (int, 7),
        "out": (str, "advect.csv"),
    },
    "converge": {
        "op": (str, "all"),
        "grids": (_as_grids, (8, 16, 32)),
        "seed": (int, 7),
        "threshold": (float, 1.9),
        "out": (str, "converge.csv"),
    },
}


def _read_config(path: str) -> dict[str, str]:
    try:
        with open(path, "r") as handle:
            text = handle.read()
    except OSError as exc:
        raise ValueError(f"cannot read config file: {exc}") from None
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in fields:
            raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
        fields[key] = value
    return fields


def _resolve(args: argparse.Namespace, command: str) -> dict:
    """Merge CLI flags over config-file values over defaults."""
    table = _OPTIONS[command]
    raw = _read_config(args.config) if args.config else {}
    unknown = sorted(set(raw) - set(table))
    if unknown:
        raise ValueError(f"unknown config keys for {command}: {unknown}")
    merged = {}
    for key, (parse, default) in table.items():
        cli_value = getattr(args, key)
        if cli_value is not None:
            merged[key] = cli_value
        elif key in raw:
            try:
                merged[key] = parse(raw[key])
            except ValueError as exc:
                raise ValueError(f"config key {key!r}: {exc}") from None
        else:
            merged[key] = default
    return merged


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


def _write_rows_csv(path: str, rows) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["test_id", "N", "residual", "observed_order", "pass"])
        for r in rows:
            writer.writerow(
                [
                    r.test_id,
                    "" if r.n is None else r.n,
                    format_float(r.residual),
                    "" if r.observed_order is None else format_float(r.observed_order),
                    "true" if r.passed else "false",
                ]
            )


def _print_row(row) -> None:
    status = "PASS" if row.passed else "FAIL"
    extra = "" if row.observed_order is None else f" order={row.observed_order:.3f}"
    grid = "" if row.n is None else f" N={row.n}"
    print(f"{status} {row.test_id:<34s} residual={format_float(row.residual)}{grid}{extra}")


# -- subcommands ----------------------------------------------------------------


def _cmd_verify(opt: dict) -> int:
    _require(opt["suite"] in SUITES, f"suite must be one of {SUITES}, got {opt['suite']!r}")
    _require(opt["count"] >= 1, "count must be >= 1")
    _require(opt["grid"] >= 4, "grid must be >= 4")
    _require(opt["tol"] is None or opt["tol"] > 0.0, "tol must be positive")
    rows = []
    if opt["suite"] in ("exact", "all"):
        rows += verify.exact_suite(opt["seed"], opt["count"])
    if opt["suite"] in ("numeric", "all"):
        rows += verify.numeric_suite(opt["seed"], opt["grid"], opt["tol"])
    for row in rows:
        _print_row(row)
    if opt["out"]:
        _write_rows_csv(opt["out"], rows)
    failed = [r for r in rows if not r.passed]
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed")
    return EXIT_OK if not failed else EXIT_INVARIANT


def _cmd_converge(opt: dict) -> int:
    ops = verify.CONVERGENCE_OPS if opt["op"] == "all" else (opt["op"],)
    for op in ops:
        _require(
            op in verify.CONVERGENCE_OPS,
            f"op must be one of {verify.CONVERGENCE_OPS + ('all',)}, got {op!r}",
        )
    _require(opt["threshold"] > 0.0, "threshold must be positive")
    rows = []
    for op in ops:
        study = verify.convergence_study(op, opt["grids"], opt["seed"], opt["threshold"])
        rows += study
        _print_row(study[-1])
    if opt["out"]:
        _write_rows_csv(opt["out"], rows)
    return EXIT_OK if all(r.passed for r in rows) else EXIT_INVARIANT


def _build_peakon_state(opt: dict):
    if opt["filament"]:
        _require(opt["nodes"] >= 3, "filament runs need at least 3 nodes")
        _require(opt["radius"] > 0.0, "radius must be positive")
        kernel = KernelSpec(opt["kernel"] or "gaussian", opt["alpha"])
        s = np.arange(opt["nodes"]) / opt["nodes"]
        ang = 2.0 * np.pi * s
        q = opt["radius"] * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        tangent = np.stack([-np.sin(ang), np.cos(ang)], axis=-1)
        p = opt["p"] * tangent
        return FilamentState(q, p, kernel)
    _require(opt["n"] >= 1, "n must be >= 1")
    _require(opt["dim"] >= 1, "dim must be >= 1")
    default_kernel = "exp1d" if opt["dim"] == 1 else "gaussian"
    kernel = KernelSpec(opt["kernel"] or default_kernel, opt["alpha"])
    count, dim = opt["n"], opt["dim"]
    q = np.zeros((count, dim))
    p = np.zeros((count, dim))
    for a in range(count):
        q[a, 0] = 2.0 * opt["alpha"] * (a - (count - 1) / 2.0)
        p[a, 0] = opt["p"] * 2.0**-a
    return SingularState(q, p, kernel)


def _cmd_peakon(opt: dict) -> int:
    _require(opt["alpha"] > 0.0, "alpha must be positive")
    _require(opt["dt"] > 0.0, "dt must be positive")
    _require(opt["t_final"] > 0.0, "t-final must be positive")
    _require(opt["method"] in METHODS, f"method must be one of {METHODS}")
    steps = int(round(opt["t_final"] / opt["dt"]))
    state = _build_peakon_state(opt)
    traj = integrate(state, FlowSpec(opt["method"], opt["dt"], steps))
    write_trajectory_csv(opt["out"], traj)
    energies = traj.hamiltonians()
    drift = abs(energies[-1] - energies[0])
    print(
        f"peakon run: steps={steps} final_q1={format_float(traj.q[-1, 0, 0])} "
        f"H_drift={format_float(drift)} wrote {opt['out']}"
    )
    return EXIT_OK


def _swirl_observable() -> Observable:
    def value(z):
        r2 = np.einsum("...i,...i->...", z, z)
        return 0.25 * r2 * r2

    def gradient(z):
        r2 = np.einsum("...i,...i->...", z, z)
        return r2[..., None] * z

    return Observable(value, gradient, name="swirl")


def _cmd_advect(opt: dict) -> int:
    _require(opt["flow"] in FLOWS, f"flow must be one of {FLOWS}, got {opt['flow']!r}")
    _require(opt["grid"] >= 4, "grid must be >= 4")
    _require(opt["steps"] >= 0, "steps must be >= 0")
    _require(opt["dt"] > 0.0, "dt must be positive")
    _require(opt["amplitude"] > 0.0, "amplitude must be positive")
    rng = np.random.default_rng(opt["seed"])
    src = GridSource("periodic", opt["grid"])
    f = datagen.sample_map(src, datagen.trig_vector(rng, 2, amplitude=opt["amplitude"]))
    alpha = datagen.sample_stream(src, datagen.trig_scalar(rng)).zero_mean()
    dt = opt["dt"]
    if opt["flow"] == "shear":
        step = lambda g: nodewise_linear(g, np.array([[1.0, 0.0], [-dt, 1.0]]))
    elif opt["flow"] == "rotation":
        c, s = math.cos(dt), math.sin(dt)
        step = lambda g: nodewise_linear(g, np.array([[c, s], [-s, c]]))
    else:
        swirl = _swirl_observable()
        spec = FlowSpec("implicit-midpoint", dt, 1)
        step = lambda g: left_act(g, swirl, spec)
    j0 = right_momentum_pair(f, alpha)
    scale = max(1.0, abs(j0))
    records = [(0.0, j0, 0.0)]
    for k in range(opt["steps"]):
        try:
            f = step(f)
        except SolverDivergenceError:
            # renumber: the solver sees one step per advection step
            raise SolverDivergenceError(k) from None
        with np.errstate(over="ignore", invalid="ignore"):
            jk = right_momentum_pair(f, alpha)
        if not math.isfinite(jk):
            # the step "converged" onto a runaway branch of the implicit equation
            raise SolverDivergenceError(k)
        records.append(((k + 1) * dt, jk, abs(jk - j0) / scale))
    with open(opt["out"], "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "jr_pair", "jr_drift"])
        for t, jk, drift in records:
            writer.writerow([format_float(t), format_float(jk), format_float(drift)])
    print(
        f"advect run: flow={opt['flow']} steps={opt['steps']} "
        f"max_jr_drift={format_float(max(r[2] for r in records))} wrote {opt['out']}"
    )
    return EXIT_OK


_RUNNERS = {
    "verify": _cmd_verify,
    "peakon": _cmd_peakon,
    "advect": _cmd_advect,
    "converge": _cmd_converge,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualpairs",
        description="Verification suites and singular-solution simulations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run identity suites, one row per invariant")
    p_verify.add_argument("--suite", help="exact | numeric | all")
    p_verify.add_argument("--seed", type=int)
    p_verify.add_argument("--count", type=int, help="random draws for the exact suite")
    p_verify.add_argument("--grid", type=int, help="grid size for the numeric suite")
    p_verify.add_argument("--tol", type=float, help="override every row tolerance")

    p_peakon = sub.add_parser("peakon", help="collective N-body run (point or filament)")
    p_peakon.add_argument("--n", type=int, help="number of points")
    p_peakon.add_argument("--dim", type=int, help="target dimension")
    p_peakon.add_argument("--kernel", help="exp1d | gaussian")
    p_peakon.add_argument("--alpha", type=float, help="kernel length scale")
    p_peakon.add_argument("--p", type=float, help="momentum magnitude")
    p_peakon.add_argument("--dt", type=float)
    p_peakon.add_argument("--t-final", dest="t_final", type=float)
    p_peakon.add_argument("--method", help=" | ".join(METHODS))
    p_peakon.add_argument("--filament", action="store_true", default=None)
    p_peakon.add_argument("--nodes", type=int, help="filament node count")
    p_peakon.add_argument("--radius", type=float, help="filament radius")
    p_peakon.add_argument("--seed", type=int)

    p_advect = sub.add_parser("advect", help="advect a grid map by a flow on the target")
    p_advect.add_argument("--grid", type=int)
    p_advect.add_argument("--flow", help=" | ".join(FLOWS))
    p_advect.add_argument("--steps", type=int)
    p_advect.add_argument("--dt", type=float)
    p_advect.add_argument("--amplitude", type=float)
    p_advect.add_argument("--seed", type=int)

    p_converge = sub.add_parser("converge", help="grid-refinement studies with fitted orders")
    p_converge.add_argument("--op", help=" | ".join(verify.CONVERGENCE_OPS + ("all",)))
    p_converge.add_argument("--grids", type=_as_grids, help="comma-separated ascending sizes")
    p_converge.add_argument("--seed", type=int)
    p_converge.add_argument("--threshold", type=float, help="required observed order")

    for sp in (p_verify, p_peakon, p_advect, p_converge):
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--out", help="CSV output path")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        opt = _resolve(args, args.command)
        return _RUNNERS[args.command](opt)
    except SolverDivergenceError as exc:
        print(f"numeric divergence at step {exc.step}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
