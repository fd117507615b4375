"""Rotation-invariant two-state numerical fluxes at element faces.

Provides the entropy-conserving central diamond flux, the entropy-stable
exact Riemann solver (conservative star flux plus diamond flux) and BR1
averaging.  All operate on face-rotated states; each element accumulates
fluxes with its own (owner-side) material values for the non-averaged
factors, as the formulas are written.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import StateVector


class RotatedState(NamedTuple):
    """State expressed in the face frame (normal, tangent1, tangent2)."""

    c: float
    srho_un: float
    srho_vt1: float
    srho_vt2: float
    p: float


@dataclass(frozen=True)
class StarState:
    """Star-region solution of the weakly compressible Riemann problem."""

    un_star: float
    p_star: float
    rho_star: float
    vt1_star: float
    vt2_star: float


def rotate(q: StateVector, normal, t1, t2) -> RotatedState:
    """Project the momentum components onto the face triad; c, p unchanged."""
    m = np.array([q.srho_u, q.srho_v, q.srho_w])
    return RotatedState(q.c, float(np.dot(m, normal)), float(np.dot(m, t1)),
                        float(np.dot(m, t2)), q.p)


def unrotate(qn: RotatedState, normal, t1, t2) -> StateVector:
    """Inverse of :func:`rotate` (the triad is orthonormal)."""
    m = (qn.srho_un * np.asarray(normal) + qn.srho_vt1 * np.asarray(t1)
         + qn.srho_vt2 * np.asarray(t2))
    return StateVector(qn.c, float(m[0]), float(m[1]), float(m[2]), qn.p)


def unrotate_flux(flux_n: np.ndarray, normal, t1, t2) -> np.ndarray:
    """Apply T^T to a face-frame 5-vector flux (momentum block rotates back)."""
    out = np.empty(5)
    out[0] = flux_n[0]
    out[1:4] = (flux_n[1] * np.asarray(normal) + flux_n[2] * np.asarray(t1)
                + flux_n[3] * np.asarray(t2))
    out[4] = flux_n[4]
    return out


def br1_average(left, right):
    """Arithmetic facet mean, used for all viscous/auxiliary couplings."""
    return 0.5 * (left + right)


def face_velocities(q: RotatedState, rho):
    srho = np.sqrt(rho)
    return q.srho_un / srho, q.srho_vt1 / srho, q.srho_vt2 / srho


def analytic_normal_nonconservative(q: RotatedState, mu, rho, cs) -> np.ndarray:
    """Single-state normal non-conservative flux (consistency target)."""
    un, vt1, vt2 = face_velocities(q, rho)
    return np.array([0.0,
                     0.5 * rho * un * un + mu * q.c,
                     0.5 * rho * un * vt1,
                     0.5 * rho * un * vt2,
                     rho * cs * cs * un])


def analytic_normal_conservative(q: RotatedState, rho) -> np.ndarray:
    """Single-state normal conservative flux (consistency target)."""
    un, vt1, vt2 = face_velocities(q, rho)
    return np.array([q.c * un,
                     0.5 * rho * un * un + q.p,
                     0.5 * rho * un * vt1,
                     0.5 * rho * un * vt2,
                     0.0])


def central_diamond_flux(q_own: RotatedState, q_nbr: RotatedState,
                         mu_own, mu_nbr, rho_own, rho_nbr, cs_own) -> np.ndarray:
    """Entropy-conserving central diamond flux, owner-side convention.

    Un-averaged factors (rho, c_s, c, u_n) belong to the owner; only the
    double-bracket terms mix both sides.
    """
    un_o, _, _ = face_velocities(q_own, rho_own)
    un_n, vt1_n, vt2_n = face_velocities(q_nbr, rho_nbr)
    _, vt1_o, vt2_o = face_velocities(q_own, rho_own)
    avg_un = 0.5 * (un_o + un_n)
    avg_mu = 0.5 * (mu_own + mu_nbr)
    return np.array([
        0.0,
        0.5 * rho_own * un_o * avg_un + q_own.c * avg_mu,
        0.5 * rho_own * un_o * 0.5 * (vt1_o + vt1_n),
        0.5 * rho_own * un_o * 0.5 * (vt2_o + vt2_n),
        rho_own * cs_own**2 * avg_un,
    ])


def ers_star(q_left: RotatedState, q_right: RotatedState,
             rho_left, rho_right, cs_left, cs_right) -> StarState:
    """Star-region solution of the exact Riemann problem.

    Eigenvalues lambda^{+-} = (u_n +- a)/2 with a = sqrt(u_n^2 + 4 c_s^2);
    ties (u_n* = 0) pick the left state.
    """
    un_l, vt1_l, vt2_l = face_velocities(q_left, rho_left)
    un_r, vt1_r, vt2_r = face_velocities(q_right, rho_right)
    a_l = np.sqrt(un_l * un_l + 4.0 * cs_left**2)
    a_r = np.sqrt(un_r * un_r + 4.0 * cs_right**2)
    lam_l_plus = 0.5 * (un_l + a_l)
    lam_l_minus = 0.5 * (un_l - a_l)
    lam_r_plus = 0.5 * (un_r + a_r)
    lam_r_minus = 0.5 * (un_r - a_r)

    denom = rho_left * lam_l_plus - rho_right * lam_r_minus
    if not denom > 0.0:  # also trips on NaN from inadmissible inputs
        raise FloatingPointError(
            f"degenerate Riemann denominator {denom:.3e}")
    un_star = (q_left.p - q_right.p + rho_left * un_l * lam_l_plus
               - rho_right * un_r * lam_r_minus) / denom
    p_star = q_left.p + rho_left * lam_l_plus * (un_l - un_star)
    if un_star >= 0.0:
        rho_star = rho_left * lam_l_plus / (un_star - lam_l_minus)
        vt1_star, vt2_star = vt1_l, vt2_l
    else:
        rho_star = rho_right * lam_r_minus / (un_star - lam_r_plus)
        vt1_star, vt2_star = vt1_r, vt2_r
    return StarState(un_star, p_star, rho_star, vt1_star, vt2_star)


def ers_conservative_flux(q_left: RotatedState, q_right: RotatedState,
                          star: StarState) -> np.ndarray:
    """Normal conservative flux on star quantities, c upwinded by u_n*.

    Single-valued across the face; consistent with the analytic normal flux
    for coincident states.
    """
    c_up = q_left.c if star.un_star >= 0.0 else q_right.c
    return np.array([
        c_up * star.un_star,
        0.5 * star.rho_star * star.un_star**2 + star.p_star,
        0.5 * star.rho_star * star.un_star * star.vt1_star,
        0.5 * star.rho_star * star.un_star * star.vt2_star,
        0.0,
    ])


def ers_diamond_flux(q_own: RotatedState, mu_own, mu_nbr, star: StarState,
                     rho_own, cs_own) -> np.ndarray:
    """Entropy-stable diamond flux, owner-side convention.

    Momentum rows combine star and owner quantities as
    (1/2) rho* u_n*^2 + (1/2) rho u_n^2 - (1/2) rho* u_n* u_n + c <<mu>>;
    the pressure row upwinds through rho c_s^2 u_n*.
    """
    un, vt1, vt2 = face_velocities(q_own, rho_own)
    rs, us = star.rho_star, star.un_star
    avg_mu = 0.5 * (mu_own + mu_nbr)
    return np.array([
        0.0,
        0.5 * rs * us * us + 0.5 * rho_own * un * un - 0.5 * rs * us * un
        + q_own.c * avg_mu,
        0.5 * rs * us * star.vt1_star + 0.5 * rho_own * un * vt1
        - 0.5 * rs * us * vt1,
        0.5 * rs * us * star.vt2_star + 0.5 * rho_own * un * vt2
        - 0.5 * rs * us * vt2,
        rho_own * cs_own**2 * us,
    ])
