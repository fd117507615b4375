"""Fast operator-invariant suite backing the `check` CLI command.

Each check returns (name, passed, measured, bound).  The full set runs in
seconds (once the kernels are compiled) and gates the discrete structure:
summation-by-parts, quadrature and derivative exactness, metric identities,
rotation orthogonality, flux consistency and free-stream preservation.
"""
from __future__ import annotations

import numpy as np

from .basis import gauss_lobatto
from .discretization import Discretization, all_walls
from .fluxes import (analytic_normal_conservative,
                     analytic_normal_nonconservative, central_diamond_flux,
                     ers_conservative_flux, ers_diamond_flux, ers_star, rotate)
from .mesh import (AxisGrading, build_cartesian_mesh, metric_identity_residual,
                   sinusoidal_curve)
from .model import InterfaceParams, PhasePair, SourceSpec, StateVector, mixture


def _random_triad(rng):
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q[:, 0], q[:, 1], q[:, 2]


def check_sbp() -> tuple:
    worst = 0.0
    for order in range(1, 9):
        b = gauss_lobatto(order)
        q = np.diag(b.weights) @ b.diff_matrix
        boundary = np.zeros((order + 1, order + 1))
        boundary[0, 0], boundary[-1, -1] = -1.0, 1.0
        worst = max(worst, np.max(np.abs(q + q.T - boundary)))
    return ("summation-by-parts (N=1..8)", worst < 1e-12, worst, 1e-12)


def check_quadrature() -> tuple:
    worst = 0.0
    for order in range(1, 9):
        b = gauss_lobatto(order)
        for k in range(2 * order):
            moment = 0.0 if k % 2 else 2.0 / (k + 1)
            worst = max(worst, abs(np.sum(b.weights * b.nodes**k) - moment))
    return ("quadrature exactness (deg <= 2N-1)", worst < 1e-12, worst, 1e-12)


def check_derivative() -> tuple:
    worst = 0.0
    rng = np.random.default_rng(11)
    for order in (2, 4, 6, 8):
        b = gauss_lobatto(order)
        coeffs = rng.standard_normal(order + 1)
        p = np.polynomial.Polynomial(coeffs)
        err = np.max(np.abs(b.diff_matrix @ p(b.nodes) - p.deriv()(b.nodes)))
        worst = max(worst, err / max(1.0, np.abs(coeffs).max()))
    return ("derivative-matrix exactness", worst < 1e-11, worst, 1e-11)


def check_metric_identities() -> tuple:
    worst = 0.0
    uniform = build_cartesian_mesh([(0, 1), (0, 1), (0, 1)], (3, 2, 2),
                                   order=4)
    graded = build_cartesian_mesh([(0, 1), (0, 1), (0, 1)], (4, 2, 2),
                                  order=4, grading={0: AxisGrading(0.0, 0.8)})
    curved = build_cartesian_mesh([(0, 1), (0, 1), (0, 1)], (2, 2, 2),
                                  order=5, curve=sinusoidal_curve(0.05))
    for mesh in (uniform, graded, curved):
        worst = max(worst, metric_identity_residual(mesh))
    return ("metric identities (uniform/graded/curved)", worst < 1e-12,
            worst, 1e-12)


def check_rotation_orthogonality() -> tuple:
    mesh = build_cartesian_mesh([(0, 1), (0, 1), (0, 1)], (2, 2, 2),
                                order=3, curve=sinusoidal_curve(0.05))
    worst = 0.0
    for e in range(mesh.n_elements):
        geo = mesh.element_geometry(e)
        for fg in geo.faces:
            rot = np.stack([fg.normal, fg.tangent1, fg.tangent2])
            flat = rot.reshape(3, 3, -1)
            for p in range(flat.shape[2]):
                t = flat[:, :, p]
                worst = max(worst, np.max(np.abs(t @ t.T - np.eye(3))))
                worst = max(worst, abs(np.linalg.det(t) - 1.0))
    return ("face rotation orthogonality", worst < 1e-13, worst, 1e-13)


def check_flux_consistency(n_states: int = 200) -> tuple:
    phases = PhasePair()
    rng = np.random.default_rng(23)
    worst = 0.0
    for _ in range(n_states):
        c = rng.uniform(-0.05, 1.05)
        rho = mixture(c, phases.rho1, phases.rho2)
        cs = mixture(c, phases.cs1, phases.cs2)
        q = StateVector(c, *rng.uniform(-1, 1, 3), rng.uniform(-2, 2))
        mu = rng.uniform(-1, 1)
        qn = rotate(q, *_random_triad(rng))
        scale = max(1.0, rho * cs * cs)
        star = ers_star(qn, qn, rho, rho, cs, cs)
        worst = max(worst, np.max(np.abs(
            ers_conservative_flux(qn, qn, star)
            - analytic_normal_conservative(qn, rho))) / scale)
        worst = max(worst, np.max(np.abs(
            ers_diamond_flux(qn, mu, mu, star, rho, cs)
            - analytic_normal_nonconservative(qn, mu, rho, cs))) / scale)
        worst = max(worst, np.max(np.abs(
            central_diamond_flux(qn, qn, mu, mu, rho, rho, cs)
            - analytic_normal_nonconservative(qn, mu, rho, cs))) / scale)
    return (f"flux consistency ({n_states} random states)", worst < 1e-12,
            worst, 1e-12)


def check_free_stream() -> tuple:
    phases = PhasePair()
    iface = InterfaceParams()
    src = SourceSpec(enabled=False)
    worst = 0.0
    meshes = [
        build_cartesian_mesh([(-2, 2), (0, 1), (0, 1)], (6, 1, 1), order=5),
        build_cartesian_mesh([(0, 1), (0, 1), (0, 1)], (3, 2, 2), order=3,
                             grading={0: AxisGrading(0.0, 0.8)}),
        build_cartesian_mesh([(0, 1), (0, 1), (0, 1)], (2, 2, 2), order=4,
                             curve=sinusoidal_curve(0.05)),
    ]
    for mesh in meshes:
        for flux in ("central", "ers"):
            disc = Discretization(mesh, phases, iface, all_walls(), src,
                                  flux=flux)
            fields = disc.allocate_fields()
            fields.q[:, 0] = 0.37
            fields.q[:, 4] = 1.75
            resid = disc.primary_residual(fields, 0.0)
            worst = max(worst, float(np.abs(resid).max()))
    return ("free-stream preservation (rest state)", worst < 1e-11, worst,
            1e-11)


ALL_CHECKS = (check_sbp, check_quadrature, check_derivative,
              check_metric_identities, check_rotation_orthogonality,
              check_flux_consistency, check_free_stream)


def run_checks(verbose: bool = True) -> bool:
    ok = True
    for check in ALL_CHECKS:
        name, passed, measured, bound = check()
        ok &= passed
        if verbose:
            state = "PASS" if passed else "FAIL"
            print(f"[{state}] {name}: {measured:.3e} (bound {bound:.0e})")
    return ok
