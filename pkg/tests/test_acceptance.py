"""End-to-end acceptance gates of the solver, one test per criterion.

Each test asserts one shipping requirement at its stated tolerance; the
pytest -v line per test is the pass/fail record.  Criterion inputs that are
known-hard (the boundary-layer pressure rate floor) still assert the full
requirement rather than a weakened one.
"""

import time

import numpy as np
import pytest

from pseudovem.mesh import all_geometries, mesh_size
from pseudovem.meshgen import generate_mesh
from pseudovem.polybasis import MeshQuadrature
from pseudovem.postprocess import ConvergenceRecord, compute_errors, convergence_rates
from pseudovem.problems import build_case, residual_check
from pseudovem.vemspace import (
    div_from_dofs,
    dofs_of_constant,
    element_mean_div,
    interpolate_tensor,
    pi_projection,
    trace_integral,
)

from conftest import solve_case


def run_ladder(tag, family, levels, **kwargs):
    """Solve a refinement ladder and return rate-filled records."""
    records = []
    for n in levels:
        _, _, geoms, report, solution = solve_case(tag, family, n, **kwargs)
        err = compute_errors(solution, on_zero_denominator="absolute")
        records.append(ConvergenceRecord(
            h=mesh_size(geoms), e_u=err.e_u, e_sigma=err.e_sigma,
            e_p=err.e_p, e_star=err.e_star, n_sigma_dofs=0, n_u_dofs=0,
            t_assemble_s=0.0, t_solve_s=0.0))
    return convergence_rates(records)


def format_ladder(records):
    lines = ["      h        e_u     r_u    e_sigma  r_sigma      e_p     r_p"]
    for r in records:
        ru = "   -  " if r.r_u is None else f"{r.r_u:6.3f}"
        rs = "   -  " if r.r_sigma is None else f"{r.r_sigma:6.3f}"
        rp = "   -  " if r.r_p is None else f"{r.r_p:6.3f}"
        lines.append(f"{r.h:11.5e} {r.e_u:9.3e} {ru} {r.e_sigma:9.3e} {rs} "
                     f"{r.e_p:9.3e} {rp}")
    return "\n".join(lines)


def test_criterion_01_rate_reproduction_smooth_case():
    """First-order convergence of u, sigma and p on triangles and squares,
    six levels down to h ~ 0.015, inside a five-minute budget."""
    t0 = time.perf_counter()
    windows = {}
    for family in ("T1", "T2"):
        records = run_ladder("test1", family, (24, 32, 48, 96, 144, 192))
        assert records[-1].h < 0.016
        last3 = records[-3:]
        windows[family] = records
        for rec in last3:
            for label, rate in (("r_u", rec.r_u), ("r_sigma", rec.r_sigma),
                                ("r_p", rec.r_p)):
                assert 0.90 <= rate <= 1.10, (
                    f"{family} {label}={rate:.4f} at h={rec.h:.5f} outside "
                    f"[0.90, 1.10]\n{format_ladder(records)}"
                )
    elapsed = time.perf_counter() - t0
    for family, records in windows.items():
        print(f"criterion 1 ({family}):\n{format_ladder(records)}")
    print(f"criterion 1 runtime: {elapsed:.1f} s")
    assert elapsed < 300.0


def test_criterion_02_error_magnitude_sanity():
    """Absolute error sizes at h = 0.05 on squares match the reference
    table within a factor of three."""
    *_, solution = solve_case("test1", "T2", 40)
    err = compute_errors(solution)
    print(f"criterion 2: e_u={err.e_u:.4f} (reference 0.0530), "
          f"e_sigma={err.e_sigma:.4f} (reference 0.0606)")
    assert 0.0530 / 3.0 <= err.e_u <= 0.0530 * 3.0
    assert 0.0606 / 3.0 <= err.e_sigma <= 0.0606 * 3.0


@pytest.mark.parametrize("family", ["T1", "T2", "T3", "T4", "T5", "T6"])
@pytest.mark.parametrize("n", [2, 4])
def test_criterion_03_patch_test(family, n):
    """A constant-velocity field with zero pressure is reproduced to 1e-9
    on every family, including non-homogeneous boundary data."""
    *_, solution = solve_case("patch", family, n, check=False)
    err = compute_errors(solution, on_zero_denominator="absolute")
    print(f"criterion 3 ({family}, n={n}): e_u={err.e_u:.2e} "
          f"e_sigma={err.e_sigma:.2e} e_p={err.e_p:.2e}")
    assert err.e_u <= 1e-9
    assert err.e_sigma <= 1e-9
    assert err.e_p <= 1e-9


def test_criterion_04_projector_identities():
    """Divergence theorem, projector exactness on constants, and the
    commuting-diagram property hold on 500+ elements across families."""

    def smooth(x, y):
        out = np.empty(np.shape(x) + (2, 2))
        out[..., 0, 0] = np.sin(x) * np.cos(y)
        out[..., 0, 1] = x * y + 0.5 * y**2
        out[..., 1, 0] = np.exp(0.3 * x - 0.2 * y)
        out[..., 1, 1] = x**2 - y
        return out

    def smooth_div(x, y):
        return np.stack([
            np.cos(x) * np.cos(y) + x + y,
            0.3 * np.exp(0.3 * x - 0.2 * y) - np.ones_like(np.asarray(y)),
        ], axis=-1)

    rng = np.random.default_rng(100)
    n_elements = 0
    worst = {"div": 0.0, "pi": 0.0, "commute": 0.0}
    for family, n, seed in (("T1", 8, 1), ("T2", 5, 2), ("T3", 4, 3),
                            ("T4", 8, 4), ("T5", 6, 5), ("T6", 230, 6)):
        mesh = generate_mesh(family, n, seed=seed)
        geoms = all_geometries(mesh)
        interp = interpolate_tensor(smooth, mesh, degree=15)
        for cell, geom in enumerate(geoms):
            n_elements += 1
            dofs = rng.standard_normal(2 * geom.edge_ids.size)
            scale = float(np.linalg.norm(dofs))
            signed = geom.edge_signs[:, None] * dofs.reshape(-1, 2)
            gap = geom.area * div_from_dofs(dofs, geom) - signed.sum(axis=0)
            worst["div"] = max(worst["div"],
                               float(np.max(np.abs(gap))) / scale)
            C = rng.standard_normal((2, 2))
            pi_gap = pi_projection(dofs_of_constant(geom, C), geom) - C
            worst["pi"] = max(worst["pi"], float(np.max(np.abs(pi_gap))))
            commute_gap = (
                div_from_dofs(interp.cell_dofs(cell), geom)
                - element_mean_div(smooth_div, geom, degree=15)
            )
            worst["commute"] = max(worst["commute"],
                                   float(np.max(np.abs(commute_gap))))
    print(f"criterion 4: {n_elements} elements, worst divergence gap "
          f"{worst['div']:.2e}, projector gap {worst['pi']:.2e}, "
          f"commuting gap {worst['commute']:.2e}")
    assert n_elements >= 500
    assert worst["div"] <= 1e-12
    assert worst["pi"] <= 1e-12
    assert worst["commute"] <= 1e-10


def test_criterion_05_kappa_robust_velocity():
    """The velocity error at fixed mesh moves by less than a factor two
    while the reaction coefficient sweeps six orders of magnitude."""
    errors = {}
    for kappa in (1.0, 1e2, 1e4, 1e6):
        *_, solution = solve_case("test3", "T2", 32, kappa=kappa)
        errors[kappa] = compute_errors(solution).e_u
    spread = max(errors.values()) / min(errors.values())
    print("criterion 5: e_u by kappa "
          + ", ".join(f"{k:g}: {v:.4e}" for k, v in errors.items())
          + f" -> spread {spread:.3f}")
    assert spread < 2.0


def test_criterion_06_boundary_layer_rates():
    """Pre-asymptotic convergence on the boundary-layer case: u and sigma
    rates trend at least first order; the pressure rate must reach 1.5 on
    at least half the rows."""
    records = run_ladder("test5", "T2", (60, 75, 95, 120, 150, 190))
    print(f"criterion 6:\n{format_ladder(records)}")
    r_u = [r.r_u for r in records[1:]]
    r_sigma = [r.r_sigma for r in records[1:]]
    r_p = [r.r_p for r in records[1:]]
    assert np.median(r_u) >= 1.0, f"median r_u {np.median(r_u):.3f} < 1.0"
    assert np.median(r_sigma) >= 1.0, (
        f"median r_sigma {np.median(r_sigma):.3f} < 1.0"
    )
    hits = sum(r >= 1.5 for r in r_p)
    assert 2 * hits >= len(r_p), (
        f"r(p) >= 1.5 on {hits}/{len(r_p)} rows; rates "
        f"{['%.3f' % r for r in r_p]} (u and sigma trends pass; the layer "
        f"pollutes the recovered pressure globally at these resolutions)"
    )


@pytest.mark.parametrize("tag", ["test1", "test2", "test3", "test4", "test5"])
def test_criterion_07_manufactured_residuals(tag):
    """Registered exact fields agree with finite differences to 1e-6."""
    residual = residual_check(build_case(tag, check=False))
    print(f"criterion 7 ({tag}): residual {residual:.3e}")
    assert residual <= 1e-6


@pytest.mark.parametrize(
    "tag, family, n",
    [("test1", "T2", 16), ("test2", "T3", 8), ("test3", "T6", 100),
     ("test4", "T5", 6)],
)
def test_criterion_08_zero_mean_constraints(tag, family, n):
    """Every solve satisfies the trace constraint and leaves a zero-mean
    recovered pressure."""
    _, _, geoms, _, solution = solve_case(tag, family, n, seed=1)
    quad = MeshQuadrature(geoms, solution.case.error_degree)
    tr = abs(trace_integral(solution.sigma, geoms))
    sigma_vals = quad.expand(solution.pi_sigma).reshape(len(quad.x), 4)
    sigma_norm = float(np.sqrt(quad.integrate((sigma_vals**2).sum(axis=1))))
    p_mean = abs(float(quad.integrate(solution.pressure(quad))))
    print(f"criterion 8 ({tag}, {family}, n={n}): |int tr sigma| = {tr:.2e} "
          f"(limit {1e-10 * sigma_norm:.2e}), |int p| = {p_mean:.2e}")
    assert tr <= 1e-10 * sigma_norm
    assert p_mean <= 1e-12
