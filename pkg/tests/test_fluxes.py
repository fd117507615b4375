"""Two-state numerical flux algebra: rotation, star states, diamonds."""
import numpy as np
import pytest

from phasewave.fluxes import (
    RotatedState,
    analytic_normal_conservative,
    analytic_normal_nonconservative,
    br1_average,
    central_diamond_flux,
    ers_conservative_flux,
    ers_diamond_flux,
    ers_star,
    rotate,
    unrotate,
    unrotate_flux,
)
from phasewave.model import PhasePair, StateVector, mixture


def random_triad(rng):
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q[:, 0], q[:, 1], q[:, 2]


def random_state(rng, vel_scale=1.0):
    return StateVector(rng.uniform(-0.05, 1.05),
                       *(vel_scale * rng.uniform(-1, 1, 3)),
                       rng.uniform(-2, 2))


def face_values(q, phases):
    rho = mixture(q.c, phases.rho1, phases.rho2)
    cs = mixture(q.c, phases.cs1, phases.cs2)
    return rho, cs


def test_rotate_axis_aligned_is_identity():
    q = StateVector(0.2, 1.0, 2.0, 3.0, 4.0)
    qn = rotate(q, np.array([1.0, 0, 0]), np.array([0, 1.0, 0]),
                np.array([0, 0, 1.0]))
    assert qn == RotatedState(0.2, 1.0, 2.0, 3.0, 4.0)


def test_rotate_roundtrip_random():
    rng = np.random.default_rng(1)
    for _ in range(100):
        q = random_state(rng)
        n, t1, t2 = random_triad(rng)
        back = unrotate(rotate(q, n, t1, t2), n, t1, t2)
        assert np.allclose(back, q, atol=1e-14)


def test_rotate_velocity_along_normal():
    n, t1, t2 = np.array([0.6, 0.8, 0.0]), np.array([-0.8, 0.6, 0.0]), \
        np.array([0.0, 0.0, 1.0])
    q = StateVector(1.0, n[0], n[1], n[2], 0.0)  # rho = 1: velocity = n
    qn = rotate(q, n, t1, t2)
    assert np.allclose([qn.srho_un, qn.srho_vt1, qn.srho_vt2], [1, 0, 0],
                       atol=1e-15)


def test_central_flux_consistency_and_examples():
    phases = PhasePair()
    rng = np.random.default_rng(2)
    for _ in range(50):
        q = random_state(rng)
        rho, cs = face_values(q, phases)
        qn = rotate(q, *random_triad(rng))
        mu = rng.uniform(-1, 1)
        flux = central_diamond_flux(qn, qn, mu, mu, rho, rho, cs)
        assert np.allclose(flux, analytic_normal_nonconservative(qn, mu, rho, cs),
                           atol=1e-11 * rho * cs * cs)

    mu = 0.8
    ql = RotatedState(0.5, 0.0, 0.0, 0.0, 1.0)
    flux = central_diamond_flux(ql, ql, mu, mu, 1.5, 1.5, 343.0)
    assert np.allclose(flux, [0.0, 0.5 * mu, 0.0, 0.0, 0.0])

    # antisymmetric normal velocities: pressure row averages to zero
    qr = RotatedState(0.5, -0.3, 0.0, 0.0, 1.0)
    ql = RotatedState(0.5, 0.3, 0.0, 0.0, 1.0)
    flux = central_diamond_flux(ql, qr, 0.0, 0.0, 1.5, 1.5, 343.0)
    assert flux[4] == pytest.approx(0.0, abs=1e-12)


def test_ers_star_identical_rest_states():
    q = RotatedState(1.0, 0.0, 0.0, 0.0, 2.0)
    star = ers_star(q, q, 1.0, 1.0, 343.0, 343.0)
    assert star.un_star == 0.0
    assert star.p_star == 2.0
    assert star.rho_star == pytest.approx(1.0, rel=1e-14)


def test_ers_star_rest_equal_impedance():
    # oracle: at rest with equal rho, c_s: a = 2 c_s, lambda_L+ = c_s,
    # lambda_R- = -c_s so u* = (pL - pR) / (2 rho c_s), p* = (pL + pR)/2
    rho, cs, pl, pr = 2.0, 100.0, 3.0, 1.0
    star = ers_star(RotatedState(1, 0, 0, 0, pl), RotatedState(1, 0, 0, 0, pr),
                    rho, rho, cs, cs)
    assert star.un_star == pytest.approx((pl - pr) / (2 * rho * cs), rel=1e-14)
    assert star.p_star == pytest.approx(0.5 * (pl + pr), rel=1e-14)


def table1_rest_star():
    # hand substitution of the two-phase rest problem with a unit pressure
    # jump: lambda_L+ = c_s1, lambda_R- = -c_s2
    rho_l, cs_l, rho_r, cs_r = 1.0, 343.0, 2.0, 1481.0
    un = 1.0 / (rho_l * cs_l + rho_r * cs_r)
    p = 1.0 - rho_l * cs_l * un
    return un, p


def test_ers_star_two_phase_rest():
    ql = RotatedState(1.0, 0, 0, 0, 1.0)
    qr = RotatedState(0.0, 0, 0, 0, 0.0)
    star = ers_star(ql, qr, 1.0, 2.0, 343.0, 1481.0)
    un_expect, p_expect = table1_rest_star()
    assert un_expect == pytest.approx(1.0 / 3305.0)
    assert star.un_star == pytest.approx(un_expect, rel=1e-14)
    assert star.p_star == pytest.approx(p_expect, rel=1e-14)


def test_ers_star_pressure_jump_antisymmetry():
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = rng.uniform(0.1, 2.0)
        rho, cs = rng.uniform(0.5, 3.0), rng.uniform(10, 1000)
        plus = ers_star(RotatedState(0.5, 0, 0, 0, p),
                        RotatedState(0.5, 0, 0, 0, -p), rho, rho, cs, cs)
        minus = ers_star(RotatedState(0.5, 0, 0, 0, -p),
                         RotatedState(0.5, 0, 0, 0, p), rho, rho, cs, cs)
        assert plus.un_star == pytest.approx(-minus.un_star, rel=1e-14)


def test_ers_conservative_flux_examples():
    q = RotatedState(0.7, 0, 0, 0, 5.0)
    star = ers_star(q, q, 1.0, 1.0, 343.0, 343.0)
    assert np.allclose(ers_conservative_flux(q, q, star), [0, 5.0, 0, 0, 0])

    ql = RotatedState(1.0, 0, 0, 0, 1.0)
    qr = RotatedState(0.0, 0, 0, 0, 0.0)
    star = ers_star(ql, qr, 1.0, 2.0, 343.0, 1481.0)
    flux = ers_conservative_flux(ql, qr, star)
    assert star.un_star > 0
    assert flux[0] == pytest.approx(1.0 * star.un_star)  # c upwinds from left


def test_ers_diamond_examples():
    phases = PhasePair()
    rng = np.random.default_rng(4)
    # consistency: coincident states collapse to the analytic normal flux
    for _ in range(50):
        q = random_state(rng)
        rho, cs = face_values(q, phases)
        qn = rotate(q, *random_triad(rng))
        mu = rng.uniform(-1, 1)
        star = ers_star(qn, qn, rho, rho, cs, cs)
        flux = ers_diamond_flux(qn, mu, mu, star, rho, cs)
        assert np.allclose(flux, analytic_normal_nonconservative(qn, mu, rho, cs),
                           atol=1e-9 * rho * cs * cs)

    # chained from the two-phase rest star state: pressure row uses the
    # owner-side rho c_s^2 with the star normal velocity
    ql = RotatedState(1.0, 0, 0, 0, 1.0)
    qr = RotatedState(0.0, 0, 0, 0, 0.0)
    star = ers_star(ql, qr, 1.0, 2.0, 343.0, 1481.0)
    un_expect, _ = table1_rest_star()
    flux_left = ers_diamond_flux(ql, 0.0, 0.0, star, 1.0, 343.0)
    assert flux_left[4] == pytest.approx(343.0**2 * un_expect, rel=1e-13)
    flux_right = ers_diamond_flux(qr, 0.0, 0.0, star, 2.0, 1481.0)
    assert flux_right[4] == pytest.approx(2.0 * 1481.0**2 * un_expect, rel=1e-13)

    # zero velocity and pressure, equal chemical potential
    q = RotatedState(0.3, 0, 0, 0, 0.0)
    star = ers_star(q, q, 1.5, 1.5, 343.0, 343.0)
    flux = ers_diamond_flux(q, 0.9, 0.9, star, 1.5, 343.0)
    assert np.allclose(flux, [0.0, 0.3 * 0.9, 0.0, 0.0, 0.0], atol=1e-14)


def test_br1_average():
    assert br1_average(3.0, 3.0) == 3.0
    assert br1_average(0.0, 2.0) == 1.0
    assert br1_average(np.array([1.0, -1.0]), np.array([-1.0, 1.0])) == \
        pytest.approx([0.0, 0.0])


def test_flux_consistency_200_random_states():
    phases = PhasePair()
    rng = np.random.default_rng(5)
    for _ in range(200):
        q = random_state(rng, vel_scale=0.5)
        rho, cs = face_values(q, phases)
        qn = rotate(q, *random_triad(rng))
        mu = rng.uniform(-1, 1)
        scale = max(1.0, rho * cs * cs)
        star = ers_star(qn, qn, rho, rho, cs, cs)
        assert np.allclose(ers_conservative_flux(qn, qn, star),
                           analytic_normal_conservative(qn, rho),
                           atol=1e-12 * scale)
        assert np.allclose(ers_diamond_flux(qn, mu, mu, star, rho, cs),
                           analytic_normal_nonconservative(qn, mu, rho, cs),
                           atol=1e-12 * scale)
        assert np.allclose(central_diamond_flux(qn, qn, mu, mu, rho, rho, cs),
                           analytic_normal_nonconservative(qn, mu, rho, cs),
                           atol=1e-12 * scale)


def test_rotational_invariance_of_face_flux():
    # evaluating in a globally rotated frame and rotating back matches the
    # direct evaluation
    phases = PhasePair()
    rng = np.random.default_rng(6)

    def total_face_flux(ql, qr, n, t1, t2):
        rho_l, cs_l = face_values(ql, phases)
        rho_r, cs_r = face_values(qr, phases)
        qln, qrn = rotate(ql, n, t1, t2), rotate(qr, n, t1, t2)
        star = ers_star(qln, qrn, rho_l, rho_r, cs_l, cs_r)
        fn = ers_conservative_flux(qln, qrn, star) + \
            ers_diamond_flux(qln, 0.3, -0.2, star, rho_l, cs_l)
        return unrotate_flux(fn, n, t1, t2)

    for _ in range(40):
        ql, qr = random_state(rng, 0.3), random_state(rng, 0.3)
        n, t1, t2 = random_triad(rng)
        rot, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        if np.linalg.det(rot) < 0:
            rot[:, 0] = -rot[:, 0]

        def spin(q):
            m = rot @ np.array([q.srho_u, q.srho_v, q.srho_w])
            return StateVector(q.c, *m, q.p)

        direct = total_face_flux(ql, qr, n, t1, t2)
        spun = total_face_flux(spin(ql), spin(qr), rot @ n, rot @ t1, rot @ t2)
        expect = np.concatenate([[direct[0]], rot @ direct[1:4], [direct[4]]])
        assert np.allclose(spun, expect, atol=1e-9 * max(1, np.abs(direct).max()))


def test_star_flux_single_valued_under_side_swap():
    phases = PhasePair()
    rng = np.random.default_rng(7)
    for _ in range(50):
        ql, qr = random_state(rng, 0.4), random_state(rng, 0.4)
        rho_l, cs_l = face_values(ql, phases)
        rho_r, cs_r = face_values(qr, phases)
        n, t1, t2 = random_triad(rng)
        # the neighbor sees the flipped right-handed triad (-n, t1, -t2)
        qln, qrn = rotate(ql, n, t1, t2), rotate(qr, n, t1, t2)
        qlf, qrf = rotate(ql, -n, t1, -t2), rotate(qr, -n, t1, -t2)

        star = ers_star(qln, qrn, rho_l, rho_r, cs_l, cs_r)
        star_swap = ers_star(qrf, qlf, rho_r, rho_l, cs_r, cs_l)
        assert star.un_star == pytest.approx(-star_swap.un_star, abs=1e-13)
        assert star.p_star == pytest.approx(star_swap.p_star, rel=1e-12)
        assert star.rho_star == pytest.approx(star_swap.rho_star, rel=1e-12)

        f = unrotate_flux(ers_conservative_flux(qln, qrn, star), n, t1, t2)
        f_swap = unrotate_flux(ers_conservative_flux(qrf, qlf, star_swap),
                               -n, t1, -t2)
        assert np.allclose(f, -f_swap, atol=1e-13 * max(1, np.abs(f).max()))


def test_degenerate_denominator_guard():
    # cannot occur for positive densities (lambda_L+ > 0 > lambda_R-); a
    # vanished mixture density from a blown-up concentration trips the guard
    ql = RotatedState(0.5, 0, 0, 0, 1.0)
    with pytest.raises(FloatingPointError):
        with np.errstate(invalid="ignore", divide="ignore"):
            ers_star(ql, ql, 0.0, 0.0, 343.0, 343.0)
