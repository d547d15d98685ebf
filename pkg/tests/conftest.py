"""Shared fixtures: small meshes and solved cases reused across test modules."""

import numpy as np
import pytest

from pseudovem import (
    all_geometries,
    assemble_global,
    build_all_local_forms,
    build_case,
    compute_errors,
    generate_mesh,
    recover_pressure,
    solve,
)


def solve_case(tag, family, n, *, nu=None, kappa=None, beta=None,
               stab="paper5", c_nu_off=False, seed=None, check=True):
    """Run the full pipeline once and return (case, mesh, geoms, report, solution)."""
    case = build_case(tag, nu=nu, kappa=kappa, beta=beta, check=check)
    mesh = generate_mesh(family, n, domain=case.domain, seed=seed)
    geoms = all_geometries(mesh)
    locals_ = build_all_local_forms(mesh, geoms, case, stab=stab, c_nu_off=c_nu_off)
    system = assemble_global(mesh, case, locals_)
    report = solve(system)
    solution = recover_pressure(mesh, case, geoms, report.sigma, report.u)
    return case, mesh, geoms, report, solution


@pytest.fixture(scope="session")
def test1_t2_solution():
    """One solved level of the constant-convection smooth case, reused widely."""
    return solve_case("test1", "T2", 8)


@pytest.fixture(scope="session")
def random_geoms():
    """A pool of perturbed-quad and Voronoi element geometries for identity checks."""
    geoms = []
    for family, n, seed in (("T4", 8, 3), ("T6", 60, 4)):
        mesh = generate_mesh(family, n, seed=seed)
        geoms.extend(all_geometries(mesh))
    return geoms


def l2_error_table(tag, family, levels, **kwargs):
    """Errors on a ladder of meshes, as a list of ErrorReport-like tuples."""
    rows = []
    for n in levels:
        _, _, geoms, _, solution = solve_case(tag, family, n, **kwargs)
        err = compute_errors(solution, on_zero_denominator="absolute")
        h = max(g.diameter for g in geoms)
        rows.append((h, err))
    return rows
