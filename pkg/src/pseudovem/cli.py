"""Configuration-driven experiment runner.

Reads a flat ``key = value`` config, runs refinement sweeps of the
manufactured cases, and writes three artifact kinds: a CSV convergence
table (columns ``h, e_u, r_u, e_sigma, r_sigma, e_p, r_p, e_star,
n_sigma_dofs, n_u_dofs, t_assemble_s, t_solve_s``), a key-value metadata
file (variants, seed, smallness indicator, timings), and legacy-VTK
polygon files with cell data for external viewers.

Exit codes: 0 success, 2 config error, 3 solver error, 4 manufactured-case
residual-check failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .assembly import STAB_VARIANTS, assemble_global, build_all_local_forms
from .mesh import MeshError, all_geometries, mesh_size, save_mesh, validate_mesh
from .meshgen import MeshFamily, generate_mesh
from .polybasis import MeshQuadrature
from .postprocess import (
    ConvergenceRecord,
    compute_errors,
    convergence_rates,
    recover_pressure,
)
from .problems import CASE_TAGS, CaseResidualError, build_case, residual_check, smallness_indicator
from .solver import SolverError, solve


class ConfigError(Exception):
    """Malformed run configuration; the message names the offending key."""


CSV_COLUMNS = (
    "h", "e_u", "r_u", "e_sigma", "r_sigma", "e_p", "r_p",
    "e_star", "n_sigma_dofs", "n_u_dofs", "t_assemble_s", "t_solve_s",
)

_CONFIG_KEYS = (
    "test", "family", "levels", "nu", "kappa", "beta_x", "beta_y",
    "stab", "c_nu_off", "outdir", "seed",
)

_FAMILIES = tuple(m.name for m in MeshFamily)


@dataclass(frozen=True)
class RunConfig:
    """Validated experiment description (one sweep)."""

    test: str = "test1"
    family: str = "T1"
    levels: tuple = (8, 16, 32, 64)
    nu: float = None
    kappa: float = None
    beta: tuple = None
    stab: str = "paper5"
    c_nu_off: bool = False
    outdir: str = "out"
    seed: int = None


def _parse_bool(key, raw):
    low = raw.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"invalid value for {key!r}: {raw!r} is not a boolean")


def _parse_float(key, raw, positive=False):
    try:
        val = float(raw)
    except ValueError:
        raise ConfigError(f"invalid value for {key!r}: {raw!r} is not a number") from None
    if positive and not val > 0.0:
        raise ConfigError(f"invalid value for {key!r}: must be positive, got {raw}")
    return val


def _parse_levels(raw):
    try:
        levels = tuple(int(part) for part in raw.split(","))
    except ValueError:
        raise ConfigError(f"invalid value for 'levels': {raw!r} is not a comma list of integers") from None
    if not levels:
        raise ConfigError("invalid value for 'levels': empty list")
    if any(n < 1 for n in levels):
        raise ConfigError(f"invalid value for 'levels': resolutions must be >= 1, got {levels}")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigError(f"invalid value for 'levels': must increase strictly, got {levels}")
    return levels


def parse_config(path):
    """Read a flat ``key = value`` file into a RunConfig.

    Blank lines and ``#`` comments are skipped; unknown or duplicate keys
    raise ConfigError naming the key.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    seen = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r} (line {lineno})")
        if key in seen:
            raise ConfigError(f"duplicate config key {key!r} (line {lineno})")
        seen[key] = raw

    kwargs = {}
    if "test" in seen:
        if seen["test"] not in CASE_TAGS:
            raise ConfigError(f"invalid value for 'test': {seen['test']!r}; known: {CASE_TAGS}")
        kwargs["test"] = seen["test"]
    if "family" in seen:
        fam = seen["family"].upper()
        if fam not in _FAMILIES:
            raise ConfigError(f"invalid value for 'family': {seen['family']!r}; known: {_FAMILIES}")
        kwargs["family"] = fam
    if "levels" in seen:
        kwargs["levels"] = _parse_levels(seen["levels"])
    if "nu" in seen:
        kwargs["nu"] = _parse_float("nu", seen["nu"], positive=True)
    if "kappa" in seen:
        kwargs["kappa"] = _parse_float("kappa", seen["kappa"], positive=True)
    if ("beta_x" in seen) != ("beta_y" in seen):
        raise ConfigError("'beta_x' and 'beta_y' must be given together")
    if "beta_x" in seen:
        kwargs["beta"] = (_parse_float("beta_x", seen["beta_x"]), _parse_float("beta_y", seen["beta_y"]))
    if "stab" in seen:
        if seen["stab"] not in STAB_VARIANTS:
            raise ConfigError(f"invalid value for 'stab': {seen['stab']!r}; known: {STAB_VARIANTS}")
        kwargs["stab"] = seen["stab"]
    if "c_nu_off" in seen:
        kwargs["c_nu_off"] = _parse_bool("c_nu_off", seen["c_nu_off"])
    if "outdir" in seen:
        if not seen["outdir"]:
            raise ConfigError("invalid value for 'outdir': empty path")
        kwargs["outdir"] = seen["outdir"]
    if "seed" in seen and seen["seed"].lower() not in ("", "none"):
        try:
            kwargs["seed"] = int(seen["seed"])
        except ValueError:
            raise ConfigError(f"invalid value for 'seed': {seen['seed']!r} is not an integer") from None
    return RunConfig(**kwargs)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{value:.12e}"


def _csv_row(rec):
    return (
        _fmt(rec.h), _fmt(rec.e_u), _fmt(rec.r_u), _fmt(rec.e_sigma), _fmt(rec.r_sigma),
        _fmt(rec.e_p), _fmt(rec.r_p), _fmt(rec.e_star), _fmt(rec.n_sigma_dofs),
        _fmt(rec.n_u_dofs), f"{rec.t_assemble_s:.6f}", f"{rec.t_solve_s:.6f}",
    )


def _solve_level(case, config, n):
    """One refinement level: mesh, assemble, solve, post-process."""
    mesh = generate_mesh(config.family, n, domain=case.domain, seed=config.seed)
    geoms = all_geometries(mesh)
    t0 = time.perf_counter()
    locals_ = build_all_local_forms(mesh, geoms, case, stab=config.stab, c_nu_off=config.c_nu_off)
    system = assemble_global(mesh, case, locals_)
    t_assemble = time.perf_counter() - t0
    report = solve(system)
    solution = recover_pressure(mesh, case, geoms, report.sigma, report.u)
    err = compute_errors(solution, on_zero_denominator="absolute")
    record = ConvergenceRecord(
        h=mesh_size(geoms),
        e_u=err.e_u, e_sigma=err.e_sigma, e_p=err.e_p, e_star=err.e_star,
        n_sigma_dofs=system.n_sigma, n_u_dofs=system.n_u,
        t_assemble_s=t_assemble, t_solve_s=report.time_s,
    )
    return record, report, solution


def run_experiment(config, csv_stream=None):
    """Run the configured refinement sweep; returns (records, metadata).

    When `csv_stream` is given, rows are written and flushed as levels
    finish so a solver failure still leaves a parsable partial CSV.
    """
    case = build_case(config.test, nu=config.nu, kappa=config.kappa, beta=config.beta)
    writer = csv.writer(csv_stream, lineterminator="\n") if csv_stream is not None else None
    if writer is not None:
        writer.writerow(CSV_COLUMNS)
        csv_stream.flush()

    records = []
    residual_max = 0.0
    t_total = time.perf_counter()
    for n in config.levels:
        record, report, _ = _solve_level(case, config, n)
        records.append(record)
        convergence_rates(records)
        residual_max = max(residual_max, report.residual)
        if writer is not None:
            writer.writerow(_csv_row(record))
            csv_stream.flush()
    t_total = time.perf_counter() - t_total

    beta_probe = np.asarray(case.params.beta(0.0, 0.0), dtype=float)
    metadata = {
        "test": config.test,
        "family": config.family,
        "levels": ",".join(str(n) for n in config.levels),
        "nu": repr(case.params.nu),
        "kappa": repr(case.params.kappa),
        "beta_at_origin": ",".join(repr(float(b)) for b in beta_probe),
        "stab": config.stab,
        "c_nu": "off" if config.c_nu_off else "1/nu",
        "theta": repr(smallness_indicator(case.params)),
        "seed": "none" if config.seed is None else str(config.seed),
        "domain": ",".join(repr(float(v)) for v in case.domain),
        "velocity_space": "piecewise-constant vectors, 2 DOFs per cell",
        "residual_fd": f"{residual_check(case):.3e}",
        "residual_solve_max": f"{residual_max:.3e}",
        "t_total_s": f"{t_total:.3f}",
    }
    return records, metadata


def write_metadata(metadata, path):
    lines = [f"{key} = {value}" for key, value in metadata.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def export_fields(solution, path, quad=None):
    """Write a solved state as a legacy-VTK polygon file with cell data.

    Cell arrays: velocity components and magnitude, pressure cell means,
    and the four components of the projected tensor.
    """
    mesh = solution.mesh
    if mesh.n_cells == 0:
        raise ValueError("cannot export an empty mesh")
    if quad is None:
        quad = MeshQuadrature(solution.geoms, solution.case.volume_degree)
    areas = np.asarray([g.area for g in solution.geoms])
    p_means = quad.cell_integrals(solution.pressure(quad)) / areas
    u = solution.u.values
    pi = solution.pi_sigma

    buf = io.StringIO()
    buf.write("# vtk DataFile Version 2.0\n")
    buf.write("pseudostress-velocity fields\n")
    buf.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
    buf.write(f"POINTS {mesh.n_vertices} double\n")
    for x, y in mesh.vertices:
        buf.write(f"{x:.12g} {y:.12g} 0\n")
    sizes = [len(c) for c in mesh.cells]
    buf.write(f"CELLS {mesh.n_cells} {mesh.n_cells + sum(sizes)}\n")
    for cell in mesh.cells:
        buf.write(str(len(cell)) + " " + " ".join(str(v) for v in cell) + "\n")
    buf.write(f"CELL_TYPES {mesh.n_cells}\n")
    buf.write("7\n" * mesh.n_cells)
    buf.write(f"CELL_DATA {mesh.n_cells}\n")

    def scalar(name, values):
        buf.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
        for v in values:
            buf.write(f"{v:.12g}\n")

    scalar("u_x", u[:, 0])
    scalar("u_y", u[:, 1])
    scalar("u_mag", np.hypot(u[:, 0], u[:, 1]))
    scalar("p", p_means)
    scalar("sigma_11", pi[:, 0, 0])
    scalar("sigma_12", pi[:, 0, 1])
    scalar("sigma_21", pi[:, 1, 0])
    scalar("sigma_22", pi[:, 1, 1])
    Path(path).write_text(buf.getvalue())


def read_csv_records(path):
    """Reconstruct ConvergenceRecords from a run CSV (schema-checked)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty CSV") from None
        if tuple(header) != CSV_COLUMNS:
            raise ConfigError(f"{path}: unexpected CSV header {header}")
        records = []
        for row in reader:
            if len(row) != len(CSV_COLUMNS):
                raise ConfigError(f"{path}: row has {len(row)} fields, expected {len(CSV_COLUMNS)}")
            records.append(ConvergenceRecord(
                h=float(row[0]), e_u=float(row[1]), e_sigma=float(row[3]),
                e_p=float(row[5]), e_star=float(row[7]),
                n_sigma_dofs=int(row[8]), n_u_dofs=int(row[9]),
                t_assemble_s=float(row[10]), t_solve_s=float(row[11]),
                r_u=float(row[2]) if row[2] else None,
                r_sigma=float(row[4]) if row[4] else None,
                r_p=float(row[6]) if row[6] else None,
            ))
    return records


def _artifact_paths(config):
    outdir = Path(config.outdir)
    stem = f"{config.test}_{config.family}"
    return outdir, outdir / f"{stem}.csv", outdir / f"{stem}_meta.txt"


def _cmd_run(args):
    config = parse_config(args.config)
    outdir, csv_path, meta_path = _artifact_paths(config)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", newline="") as fh:
        records, metadata = run_experiment(config, csv_stream=fh)
    write_metadata(metadata, meta_path)
    for rec in records:
        print(f"n_sigma={rec.n_sigma_dofs:7d} h={rec.h:.5f} e_u={rec.e_u:.4e} "
              f"e_sigma={rec.e_sigma:.4e} e_p={rec.e_p:.4e}")
    print(f"wrote {csv_path} and {meta_path}")
    return 0


def _cmd_mesh(args):
    config = parse_config(args.config)
    case = build_case(config.test, nu=config.nu, kappa=config.kappa,
                      beta=config.beta, check=False)
    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for n in config.levels:
        mesh = generate_mesh(config.family, n, domain=case.domain, seed=config.seed)
        report = validate_mesh(mesh)
        path = outdir / f"mesh_{config.family}_{n}.txt"
        save_mesh(mesh, path)
        geoms = all_geometries(mesh)
        print(f"{config.family} n={n}: cells={mesh.n_cells} edges={mesh.n_edges} "
              f"h={mesh_size(geoms):.5f} ok={report.ok} -> {path}")
    return 0


def _cmd_export(args):
    config = parse_config(args.config)
    n = config.levels[-1]
    case = build_case(config.test, nu=config.nu, kappa=config.kappa, beta=config.beta)
    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    _, _, solution = _solve_level(case, config, n)
    path = outdir / f"{config.test}_{config.family}_{n}.vtk"
    export_fields(solution, path)
    print(f"wrote {path}")
    return 0


def _cmd_rates(args):
    records = read_csv_records(args.csv)
    convergence_rates(records)
    with open(args.csv, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(_csv_row(rec))
    print(f"{'h':>12s} {'e_u':>12s} {'r_u':>7s} {'e_sigma':>12s} {'r_sigma':>7s} {'e_p':>12s} {'r_p':>7s}")
    for rec in records:
        ru = "-" if rec.r_u is None else f"{rec.r_u:.4f}"
        rs = "-" if rec.r_sigma is None else f"{rec.r_sigma:.4f}"
        rp = "-" if rec.r_p is None else f"{rec.r_p:.4f}"
        print(f"{rec.h:12.5e} {rec.e_u:12.5e} {ru:>7s} {rec.e_sigma:12.5e} {rs:>7s} "
              f"{rec.e_p:12.5e} {rp:>7s}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pseudovem",
        description="Mixed virtual element experiments for the generalized Oseen problem.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text, fn in (
        ("mesh", "generate, validate and save the configured meshes", _cmd_mesh),
        ("run", "run the configured refinement sweep (CSV + metadata)", _cmd_run),
        ("export", "solve the finest level and write a legacy-VTK field file", _cmd_export),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to a key = value config file")
        p.set_defaults(fn=fn)
    p = sub.add_parser("rates", help="recompute rate columns of an existing CSV in place")
    p.add_argument("--csv", required=True, help="path to a run CSV")
    p.set_defaults(fn=_cmd_rates)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except CaseResidualError as exc:
        print(f"case residual check failed: {exc}", file=sys.stderr)
        return 4
    except (MeshError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
