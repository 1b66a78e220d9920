"""Command line interface: single runs, figure/table presets, CSV output.

    mmdg solve --problem schlogl --monitor optimal --degree 2 --elements 40 \\
               --dt 0.001 --mesh moving --out-dir out/
    mmdg solve --seed-preset fig2 --out-dir out/
    mmdg table --name table2 --out-dir out/
"""
from __future__ import annotations

import argparse
import csv
from dataclasses import replace
import logging
import os
from pathlib import Path
import sys

import numpy as np

from .dg_space import eval_basis
from .driver import SCHEMA_VERSION, RunConfig, RunError, RunRecord, run_many

__all__ = ["main", "write_outputs", "PRESETS", "preset_configs", "table_rows", "write_table"]

log = logging.getLogger("mmdg")

SNAPSHOT_POINTS = 20

TABLE1_TIMES = (-0.1, -0.05, -0.04, -0.035, -0.03)
TABLE2_TIMES = (0.001, 0.01, 0.25, 0.5, 0.75, 1.0)
MONITORS = ("optimal", "arc-length", "curvature")
BURGERS_TIMES = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


def _label(c: RunConfig) -> str:
    return f"{c.problem}-{c.mesh_mode}-{c.monitor}-k{c.degree}-N{c.n_elements}"


def _named(configs):
    return [replace(c, label=c.label or _label(c)) for c in configs]


PRESETS = {
    "table1": lambda: _named(
        RunConfig(problem="burgers-fisher", monitor=m, degree=2, n_elements=40,
                  dt=1e-3, mesh_mode="moving", snapshots=TABLE1_TIMES)
        for m in MONITORS
    ),
    "table2": lambda: _named(
        RunConfig(problem="schlogl", monitor=m, degree=k, n_elements=40,
                  dt=1e-3, mesh_mode="moving", snapshots=TABLE2_TIMES)
        for k in (1, 2)
        for m in MONITORS
    ),
    "fig2": lambda: _named([
        RunConfig(problem="burgers", degree=1, n_elements=120, dt=5e-3,
                  mesh_mode="fixed", snapshots=BURGERS_TIMES)
    ]),
    "fig3": lambda: _named(
        RunConfig(problem="burgers", monitor=m, degree=1, n_elements=40, dt=5e-3,
                  mesh_mode="moving", snapshots=BURGERS_TIMES)
        for m in MONITORS
    ),
    "fig6": lambda: _named([
        RunConfig(problem="schlogl", degree=2, n_elements=120, dt=1e-3,
                  mesh_mode="fixed", snapshots=(0.0, 0.25, 0.5, 0.75, 1.0)),
        RunConfig(problem="schlogl", degree=1, n_elements=40, dt=1e-3,
                  mesh_mode="moving", snapshots=(0.0, 0.25, 0.5, 0.75, 1.0)),
        RunConfig(problem="schlogl", degree=2, n_elements=40, dt=1e-3,
                  mesh_mode="moving", snapshots=(0.0, 0.25, 0.5, 0.75, 1.0)),
    ]),
}


def preset_configs(name: str) -> list[RunConfig]:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


# ----------------------------------------------------------------- output

def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_outputs(record: RunRecord, out_dir) -> list[Path]:
    """Write the CSV files and ``meta.txt`` of one run; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    n_nodes = record.trajectory.shape[1]

    p = out / "trajectory.csv"
    _write_csv(p, ["t"] + [f"x_{n}" for n in range(n_nodes)],
               (np.concatenate(([t], row)) for t, row in zip(record.times, record.trajectory)))
    written.append(p)

    # interior sample points only, so x is strictly increasing within a snapshot
    s = (np.arange(SNAPSHOT_POINTS) + 0.5) / SNAPSHOT_POINTS
    phi, _ = eval_basis(record.config.degree, s)
    rows = []
    for t, sol in record.snapshots:
        nodes = sol.mesh.nodes
        xs = (nodes[:-1, None] + np.diff(nodes)[:, None] * s).ravel()
        us = (sol.coefficients @ phi.T).ravel()
        rows.extend((t, x, u) for x, u in zip(xs, us))
    p = out / "snapshots.csv"
    _write_csv(p, ["t", "x", "u"], rows)
    written.append(p)

    if record.errors:
        p = out / "errors.csv"
        _write_csv(p, ["t", "l2_error"], record.errors)
        written.append(p)

    if record.energies is not None:
        p = out / "energy.csv"
        _write_csv(p, ["t", "energy"], zip(record.times, record.energies))
        written.append(p)

    p = out / "diagnostics.csv"
    _write_csv(
        p,
        ["t", "newton_iters", "equidist_residual", "mass_drift"],
        zip(record.times[1:], record.newton_iterations,
            record.equidistribution, record.mass_drift),
    )
    written.append(p)

    p = out / "meta.txt"
    with open(p, "w") as fh:
        fh.write(f"schema_version = {SCHEMA_VERSION}\n")
        resolved = record.config.as_dict()
        resolved["t0"], resolved["tf"] = float(record.times[0]), float(record.times[-1])
        for key, value in _flatten(resolved):
            fh.write(f"{key} = {value}\n")
        fh.write(f"steps = {record.n_steps}\n")
    written.append(p)
    return written


def _flatten(d, prefix=""):
    for key, value in d.items():
        if isinstance(value, dict):
            yield from _flatten(value, f"{prefix}{key}.")
        elif isinstance(value, (list, tuple)):
            yield f"{prefix}{key}", ",".join(_fmt(v) for v in value)
        elif isinstance(value, float):
            yield f"{prefix}{key}", _fmt(value)
        else:
            yield f"{prefix}{key}", value


def table_rows(name: str, records) -> tuple[list, list]:
    """Header and rows laid out like the published error tables."""
    times = TABLE1_TIMES if name == "table1" else TABLE2_TIMES
    second = "N_I" if name == "table1" else "degree"
    header = ["monitor", second] + [f"t={t:g}" for t in times]
    rows = []
    for rec in records:
        c = rec.config
        errs = dict(rec.errors)
        rows.append(
            [c.monitor, c.n_elements if name == "table1" else c.degree]
            + [_fmt(errs[t]) for t in times]
        )
    return header, rows


def write_table(name: str, records, path) -> Path:
    header, rows = table_rows(name, records)
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


# ----------------------------------------------------------------- parsing

# flag name -> (RunConfig field, converter)
_FIELDS = {
    "problem": ("problem", str),
    "monitor": ("monitor", str),
    "mesh": ("mesh_mode", str),
    "degree": ("degree", int),
    "elements": ("n_elements", int),
    "dt": ("dt", float),
    "tau": ("tau", float),
    "sigma-scale": ("sigma_scale", float),
    "smooth-sweeps": ("smooth_sweeps", int),
    "t0": ("t0", float),
    "tf": ("tf", float),
    "snapshots": ("snapshots", lambda s: tuple(float(v) for v in str(s).split(",") if v.strip())),
}


def read_config_file(path) -> dict:
    """``key = value`` lines; keys are flag names (``-`` or ``_``), ``#`` comments."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("_", "-")
            if key not in _FIELDS and key != "out-dir":
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value
    return values


def _overrides(values: dict) -> dict:
    out = {}
    for key, value in values.items():
        if key in _FIELDS and value is not None:
            field_name, conv = _FIELDS[key]
            out[field_name] = conv(value)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmdg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run one configuration or a preset")
    solve.add_argument("--problem", choices=["burgers", "burgers-fisher", "schlogl"])
    solve.add_argument("--monitor")
    solve.add_argument("--mesh", choices=["fixed", "moving"])
    solve.add_argument("--degree", type=int)
    solve.add_argument("--elements", type=int)
    solve.add_argument("--dt", type=float)
    solve.add_argument("--tau", type=float)
    solve.add_argument("--sigma-scale", type=float)
    solve.add_argument("--smooth-sweeps", type=int)
    solve.add_argument("--t0", type=float)
    solve.add_argument("--tf", type=float)
    solve.add_argument("--snapshots", help="comma separated grid times")
    solve.add_argument("--config", help="key = value file; flags override it")
    solve.add_argument("--seed-preset", choices=sorted(PRESETS))
    solve.add_argument("--out-dir")
    solve.add_argument("--jobs", type=int, default=1)

    table = sub.add_parser("table", help="reproduce an error table")
    table.add_argument("--name", required=True, choices=["table1", "table2"])
    table.add_argument("--out-dir", default="out")
    table.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    return parser


def _solve_configs(args) -> tuple[list[RunConfig], str]:
    file_values = read_config_file(args.config) if args.config else {}
    flag_values = {
        key: getattr(args, key.replace("-", "_"))
        for key in _FIELDS
        if getattr(args, key.replace("-", "_")) is not None
    }
    out_dir = args.out_dir or file_values.pop("out-dir", None) or "out"
    file_values.pop("out-dir", None)
    merged = {**_overrides(file_values), **_overrides(flag_values)}
    if args.seed_preset:
        configs = [replace(c, **merged) for c in preset_configs(args.seed_preset)]
        return configs, out_dir
    config = RunConfig(**merged)
    return [replace(config, label=_label(config))], out_dir


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "solve":
            configs, out_dir = _solve_configs(args)
            for c in configs:
                c.snapshot_steps()  # reject off-grid snapshots before any work
            records = run_many(configs, args.jobs)
            nested = len(configs) > 1 or args.seed_preset
            for rec in records:
                target = Path(out_dir) / rec.config.label if nested else Path(out_dir)
                write_outputs(rec, target)
                print(f"{rec.config.label}: {rec.n_steps} steps -> {target}")
        else:
            configs = preset_configs(args.name)
            records = run_many(configs, args.jobs)
            out = Path(args.out_dir)
            for rec in records:
                write_outputs(rec, out / rec.config.label)
            path = write_table(args.name, records, out / f"{args.name}.csv")
            header, rows = table_rows(args.name, records)
            print(",".join(header))
            for row in rows:
                print(",".join([str(row[0]), str(row[1])] + [f"{float(v):.2e}" for v in row[2:]]))
            print(f"table written to {path}")
    except (ValueError, OSError) as exc:
        print(f"mmdg: error: {exc}", file=sys.stderr)
        return 2
    except RunError as exc:
        print(f"mmdg: run failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
