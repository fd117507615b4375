"""Node-local model algebra: mixtures, free energy, fluxes, sources, ICs."""
import numpy as np
import pytest

from phasewave.fluxes import (
    analytic_normal_conservative,
    analytic_normal_nonconservative,
    rotate,
)
from phasewave.model import (
    InterfaceParams,
    PhasePair,
    SourceSpec,
    StateVector,
    double_well,
    chemical_potential,
    initial_condition,
    inviscid_flux,
    mixture,
    nonconservative_coefficients,
    pressure_source,
    viscous_flux,
)


def random_triad(rng):
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q[:, 0], q[:, 1], q[:, 2]


def test_mixture_endpoints_and_midpoint():
    assert mixture(1.0, 7.0, 3.0) == 7.0
    assert mixture(0.0, 7.0, 3.0) == 3.0
    assert mixture(0.5, 1.0, 2.0) == 1.5


def test_mixture_degenerate_property():
    rng = np.random.default_rng(0)
    for c in rng.uniform(-0.1, 1.1, 50):
        assert mixture(c, 4.2, 4.2) == pytest.approx(4.2, abs=1e-15)


def test_double_well_minima_and_symmetry():
    iface = InterfaceParams(sigma=1e-16, epsilon=0.01)
    assert double_well(0.0, iface) == (0.0, 0.0)
    assert double_well(1.0, iface) == (0.0, 0.0)
    f0, df0 = double_well(0.5, iface)
    assert f0 == pytest.approx(7.5e-15, rel=1e-12)
    assert df0 == pytest.approx(0.0, abs=1e-30)


def test_double_well_nonnegative_and_derivative():
    iface = InterfaceParams(sigma=2.5, epsilon=0.004)
    grid = np.linspace(0.0, 1.0, 20)
    step = 1e-6
    for c in grid:
        f0, df0 = double_well(c, iface)
        assert f0 >= 0.0
        fp, _ = double_well(c + step, iface)
        fm, _ = double_well(c - step, iface)
        fd = (fp - fm) / (2 * step)
        # scale by the natural derivative magnitude sigma/eps so the check is
        # meaningful at the stationary points of the well
        scale = max(abs(df0), abs(fd), iface.sigma / iface.epsilon)
        assert abs(df0 - fd) / scale < 1e-6


def test_chemical_potential_flat_states():
    iface = InterfaceParams(sigma=1.0, epsilon=0.01)
    assert chemical_potential(0.0, 0.0, iface) == 0.0
    assert chemical_potential(0.5, 0.0, iface) == 0.0


def test_mobility_from_chemical_time():
    iface = InterfaceParams.from_chemical_time(sigma=2.0, epsilon=0.01,
                                               t_ch=0.005)
    assert iface.mobility == pytest.approx(0.01**2 / (2.0 * 0.005))


def test_inviscid_flux_rest_and_moving():
    q = StateVector(0.3, 0.0, 0.0, 0.0, 4.0)
    f = inviscid_flux(q, rho=2.0)
    assert np.allclose(f[0], [0, 4.0, 0, 0, 0])

    q = StateVector(1.0, 2.0, 0.0, 0.0, 3.0)   # rho = 1 so u = 2
    f = inviscid_flux(q, rho=1.0)
    assert np.allclose(f[0], [2.0, 5.0, 0.0, 0.0, 0.0])
    assert np.allclose(f[1], [0.0, 0.0, 3.0, 0.0, 0.0])


def test_nonconservative_blocks():
    q = StateVector(0.0, 0.1, 0.2, 0.3, 1.0)
    phi = nonconservative_coefficients(q, rho=2.0, cs=1481.0)
    assert np.all(phi[4] == 0.0)
    assert np.all(phi[0] == 0.0)          # c = 0: no capillary coupling
    assert phi[1, 4, 0] == pytest.approx(2.0 * 1481.0**2)
    assert phi[1, 4, 1] == 0.0

    q = StateVector(0.7, 0.0, 0.0, 0.0, 0.0)
    phi = nonconservative_coefficients(q, rho=1.5, cs=10.0)
    assert phi[0, 1, 0] == pytest.approx(0.7)
    assert phi[0, 2, 1] == pytest.approx(0.7)
    assert phi[0, 3, 2] == pytest.approx(0.7)


def test_viscous_flux_shear_and_diffusion():
    assert np.all(viscous_flux(np.zeros((3, 5)), 1.0, 0.01) == 0.0)

    g = np.zeros((3, 5))
    g[1, 1] = 1.0                      # du/dy = 1
    f = viscous_flux(g, eta=1.0, mobility=0.0)
    assert f[0, 1] == 0.0              # x-flux of u: 2 eta S_11 = 0
    assert f[1, 1] == pytest.approx(1.0)  # y-flux of u: 2 eta S_12 = 1
    assert f[0, 2] == pytest.approx(1.0)  # x-flux of v: 2 eta S_21 = 1

    g = np.zeros((3, 5))
    g[0, 0] = 1.0                      # d mu / dx = 1
    f = viscous_flux(g, eta=0.0, mobility=0.01)
    assert np.allclose(f[:, 0], [0.01, 0.0, 0.0])


def test_pressure_source_peak_zero_and_width():
    spec = SourceSpec(kind="gaussian_line_x", frequency=1000.0, width=0.01,
                      center=(-0.55, 0.0, 0.0))
    assert pressure_source((-0.55, 0, 0), 0.0, spec) == pytest.approx(1.0)
    assert pressure_source((0.1, 0, 0), 1.0 / 4000.0, spec) == \
        pytest.approx(0.0, abs=1e-12)
    assert pressure_source((-0.54, 0, 0), 0.0, spec) == \
        pytest.approx(np.exp(-1.0), rel=1e-12)


def test_pressure_source_ball_is_radial():
    spec = SourceSpec(kind="gaussian_ball", frequency=100.0, width=0.05,
                      center=(0.0, 0.0, 0.125))
    a = pressure_source((0.05, 0.0, 0.125), 0.0, spec)
    b = pressure_source((0.0, 0.03, 0.165), 0.0, spec)
    assert a == pytest.approx(np.exp(-1.0))
    assert b == pytest.approx(np.exp(-1.0))


def test_initial_condition_profiles():
    iface = InterfaceParams(epsilon=0.01)
    assert initial_condition("flat_1d", 0.0, iface, (0.0, 0, 0)).c == \
        pytest.approx(0.5)
    assert initial_condition("flat_1d", 0.0, iface, (-0.1, 0, 0)).c == \
        pytest.approx(1.0, abs=1e-8)
    assert initial_condition("flat_1d", 0.0, iface, (0.1, 0, 0)).c == \
        pytest.approx(0.0, abs=1e-8)
    # slanted profile reduces to the flat one at zero incidence
    for x in (-0.004, 0.0, 0.002, 0.03):
        flat = initial_condition("flat_1d", 0.0, iface, (x, 0.4, 0))
        slant = initial_condition("slanted_2d", 0.0, iface, (x, 0.4, 0))
        assert flat.c == pytest.approx(slant.c, abs=1e-15)
    # 3D: phase 1 above the z = 0 plane
    assert initial_condition("plane_z_3d", 0.0, iface, (0, 0, 0.1)).c == \
        pytest.approx(1.0, abs=1e-8)
    q = initial_condition("plane_z_3d", 0.0, iface, (0, 0, -0.1))
    assert q.c == pytest.approx(0.0, abs=1e-8)
    assert (q.srho_u, q.srho_v, q.srho_w, q.p) == (0, 0, 0, 0)


def test_normal_flux_rotation_identity():
    # contracting the flux tensors with a unit normal and rotating equals the
    # printed face-normal fluxes, for random states and triads
    rng = np.random.default_rng(42)
    phases = PhasePair()
    for _ in range(100):
        c = rng.uniform(-0.05, 1.05)
        rho = mixture(c, phases.rho1, phases.rho2)
        cs = mixture(c, phases.cs1, phases.cs2)
        q = StateVector(c, *rng.uniform(-1, 1, 3), rng.uniform(-1, 1))
        mu = rng.uniform(-1, 1)
        n, t1, t2 = random_triad(rng)
        rot_mat = np.eye(5)
        rot_mat[1:4, 1:4] = np.stack([n, t1, t2])

        q_rot = rotate(q, n, t1, t2)
        f_cart = inviscid_flux(q, rho).T @ n          # (5,) Cartesian rows
        assert np.allclose(rot_mat @ f_cart,
                           analytic_normal_conservative(q_rot, rho),
                           atol=1e-12)

        phi = nonconservative_coefficients(q, rho, cs)
        w_vals = np.array([mu, *np.array([q.srho_u, q.srho_v, q.srho_w])
                           / np.sqrt(rho), q.p])
        nc_cart = sum(w_vals[m] * phi[m] @ n for m in range(5))
        assert np.allclose(rot_mat @ nc_cart,
                           analytic_normal_nonconservative(q_rot, mu, rho, cs),
                           atol=1e-9 * max(1.0, rho * cs * cs))


def test_phase_pair_validation():
    with pytest.raises(ValueError):
        PhasePair(rho1=-1.0)
    with pytest.raises(ValueError):
        InterfaceParams(epsilon=-0.01)
    with pytest.raises(ValueError):
        SourceSpec(kind="bogus")
