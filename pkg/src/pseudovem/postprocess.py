"""Pressure recovery, relative error norms and convergence rates.

The discrete pressure is recovered per element from the projected
pseudostress and the cell velocity,

    p_h(x) = -(1/2) (tr Pi sigma_h + u_h . beta(x)) - mean correction,

and all errors are relative L2 norms by polygon quadrature.  The tensor
error compares the exact field against Pi sigma_h, the projected constant
per element: the virtual field itself is not pointwise known, so this is
the natural (and reported) metric, weaker than a full H(div) distance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .polybasis import MeshQuadrature
from .vemspace import VirtualTensorField, PiecewiseVectorField, pi_projection_all


class ZeroDenominatorError(ValueError):
    """Raised when a relative error has an identically zero exact norm."""


@dataclass(frozen=True)
class DiscreteSolution:
    """Solved fields on one mesh, with the recovered pressure baked in."""

    mesh: object
    case: object
    geoms: list
    sigma: VirtualTensorField
    u: PiecewiseVectorField
    pi_sigma: np.ndarray
    p_shift: float
    multiplier: float = 0.0

    def pressure(self, quad):
        """Recovered pressure at the quadrature points of `quad`."""
        raw = -0.5 * (
            quad.expand(self.pi_sigma[:, 0, 0] + self.pi_sigma[:, 1, 1])
            + np.einsum(
                "qi,qi->q",
                quad.expand(self.u.values),
                np.asarray(self.case.params.beta(quad.x, quad.y)),
            )
        )
        return raw - self.p_shift


def recover_pressure(mesh, case, geoms, sigma_dofs, u_values, quad=None):
    """Build a DiscreteSolution with the zero-mean recovered pressure.

    The mean of the raw pressure is computed by polygon quadrature over the
    mesh and subtracted, so the returned field integrates to zero.
    """
    sigma = VirtualTensorField(mesh, np.asarray(sigma_dofs, dtype=float))
    u = PiecewiseVectorField(mesh, np.asarray(u_values, dtype=float).reshape(-1, 2))
    pi_sigma = pi_projection_all(geoms, sigma.dofs)
    if quad is None:
        quad = MeshQuadrature(geoms, case.volume_degree)
    sol = DiscreteSolution(
        mesh=mesh, case=case, geoms=geoms, sigma=sigma, u=u,
        pi_sigma=pi_sigma, p_shift=0.0,
    )
    area = sum(g.area for g in geoms)
    mean = float(quad.integrate(sol.pressure(quad))) / area
    return replace(sol, p_shift=mean)


@dataclass(frozen=True)
class ErrorReport:
    e_u: float
    e_sigma: float
    e_p: float
    e_star: float


def compute_errors(solution, quad=None, on_zero_denominator="raise"):
    """Relative L2 errors (e_u, e_sigma, e_p, e_star) of a solution.

    A zero exact norm cannot feed a relative error; the default is to raise
    ZeroDenominatorError.  `on_zero_denominator="absolute"` falls back to
    the absolute error for that component (needed for cases whose exact
    pressure is identically zero).
    """
    case = solution.case
    if quad is None:
        quad = MeshQuadrature(solution.geoms, case.error_degree)

    u_exact = np.asarray(case.u(quad.x, quad.y))
    u_h = quad.expand(solution.u.values)
    sig_exact = np.asarray(case.sigma(quad.x, quad.y))
    sig_h = quad.expand(solution.pi_sigma)
    p_exact = np.asarray(case.p(quad.x, quad.y))
    p_h = solution.pressure(quad)

    def l2sq(vals):
        flat = vals.reshape(vals.shape[0], -1)
        return float(quad.integrate((flat * flat).sum(axis=1)))

    num_u, den_u = l2sq(u_exact - u_h), l2sq(u_exact)
    num_s, den_s = l2sq(sig_exact - sig_h), l2sq(sig_exact)
    num_p, den_p = l2sq(p_exact[:, None] - p_h[:, None]), l2sq(p_exact[:, None])

    def rel(num, den, name):
        if den == 0.0:
            if on_zero_denominator == "absolute":
                return float(np.sqrt(num))
            raise ZeroDenominatorError(
                f"exact {name} has zero norm; no relative error (pass "
                f"on_zero_denominator='absolute' to report the absolute error)"
            )
        return float(np.sqrt(num / den))

    den_star = den_u + den_s + den_p
    return ErrorReport(
        e_u=rel(num_u, den_u, "velocity"),
        e_sigma=rel(num_s, den_s, "pseudostress"),
        e_p=rel(num_p, den_p, "pressure"),
        e_star=rel(num_u + num_s + num_p, den_star, "star-norm fields"),
    )


@dataclass
class ConvergenceRecord:
    """One row of a refinement study; rates are None until filled."""

    h: float
    e_u: float
    e_sigma: float
    e_p: float
    e_star: float
    n_sigma_dofs: int
    n_u_dofs: int
    t_assemble_s: float
    t_solve_s: float
    r_u: float = None
    r_sigma: float = None
    r_p: float = None

    @property
    def errors(self):
        return self.e_u, self.e_sigma, self.e_p


def convergence_rates(records):
    """Fill pairwise rates r = log(e/e') / log(h/h') against the previous row.

    Requires strictly decreasing h; the first row keeps rates None.
    """
    prev = None
    for rec in records:
        if prev is not None:
            if not rec.h < prev.h:
                raise ValueError(
                    f"mesh sizes must decrease strictly, got {prev.h!r} then {rec.h!r}"
                )
            scale = np.log(prev.h / rec.h)
            rec.r_u = float(np.log(prev.e_u / rec.e_u) / scale)
            rec.r_sigma = float(np.log(prev.e_sigma / rec.e_sigma) / scale)
            rec.r_p = float(np.log(prev.e_p / rec.e_p) / scale)
        prev = rec
    return records
