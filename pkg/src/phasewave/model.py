"""Two-phase weakly compressible flow model with a diffuse interface.

State, mixture rules, double-well free energy, chemical potential, flux
tensors, non-conservative coefficient blocks, forcing terms and initial
conditions.  Everything here is a pure node-local function; the fused
residual kernels mirror this arithmetic and are tested against it.

Unknowns per node: q = (c, sqrt(rho) u, sqrt(rho) v, sqrt(rho) w, p) with c
the phase concentration and p the acoustic perturbation pressure.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class PhasePair:
    """Material properties of the two fluids (SI units)."""

    rho1: float = 1.0
    rho2: float = 2.0
    cs1: float = 343.0
    cs2: float = 1481.0
    eta1: float = 1e-16
    eta2: float = 1e-16

    def __post_init__(self):
        for name in ("rho1", "rho2", "cs1", "cs2", "eta1", "eta2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"phase property {name} must be > 0")

    @property
    def impedance1(self) -> float:
        return self.rho1 * self.cs1

    @property
    def impedance2(self) -> float:
        return self.rho2 * self.cs2


@dataclass(frozen=True)
class InterfaceParams:
    """Diffuse-interface parameters: surface tension, half width, mobility.

    The mobility can be given directly or through the chemical time scale
    t_ch, in which case mobility = epsilon^2 / (sigma * t_ch).
    """

    sigma: float = 1e-16
    epsilon: float = 0.01
    mobility: float = 0.01

    def __post_init__(self):
        if self.sigma <= 0 or self.epsilon <= 0:
            raise ValueError("sigma and epsilon must be > 0")
        if self.mobility < 0:
            raise ValueError("mobility must be >= 0")

    @classmethod
    def from_chemical_time(cls, sigma: float, epsilon: float,
                           t_ch: float) -> "InterfaceParams":
        return cls(sigma=sigma, epsilon=epsilon,
                   mobility=epsilon**2 / (sigma * t_ch))


class StateVector(NamedTuple):
    """Unknowns at one collocation node."""

    c: float
    srho_u: float
    srho_v: float
    srho_w: float
    p: float


@dataclass
class GradientVars:
    """Gradient-entropy variables w = (mu, u, v, w, p) and their gradients.

    ``big_g[d, m]`` holds the DG derivative of w_m along Cartesian direction
    d; ``small_g`` is the DG gradient of the concentration.  Both come from
    the auxiliary solves, not from analytic differentiation.
    """

    mu: float
    u: float
    v: float
    w: float
    p: float
    big_g: np.ndarray = field(default_factory=lambda: np.zeros((3, 5)))
    small_g: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True)
class SourceSpec:
    """Oscillating Gaussian pressure forcing plus optional gravity."""

    kind: str = "gaussian_line_x"
    frequency: float = 1000.0
    width: float = 0.01
    center: tuple = (-0.55, 0.0, 0.0)
    gravity: tuple = (0.0, 0.0, 0.0)
    enabled: bool = True

    def __post_init__(self):
        if self.kind not in ("gaussian_line_x", "gaussian_ball"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.frequency <= 0 or self.width <= 0:
            raise ValueError("source frequency and width must be > 0")


def mixture(c, prop1, prop2):
    """Concentration-weighted linear interpolation of a phase property."""
    return prop1 * c + prop2 * (1.0 - c)


def double_well(c, iface: InterfaceParams):
    """Double-well free energy (12 sigma / eps) c^2 (1-c)^2 and its derivative."""
    scale = 12.0 * iface.sigma / iface.epsilon
    f0 = scale * c * c * (1.0 - c) ** 2
    df0 = scale * (2.0 * c - 6.0 * c * c + 4.0 * c ** 3)
    return f0, df0


def chemical_potential(c, div_g, iface: InterfaceParams):
    """mu = df0/dc - (3/2) sigma eps * div(g), g the auxiliary gradient of c."""
    _, df0 = double_well(c, iface)
    return df0 - 1.5 * iface.sigma * iface.epsilon * div_g


def velocity(q: StateVector, rho):
    srho = np.sqrt(rho)
    return q.srho_u / srho, q.srho_v / srho, q.srho_w / srho


def inviscid_flux(q: StateVector, rho) -> np.ndarray:
    """Directional inviscid flux vectors, shape (3, 5) = (direction, row).

    Momentum rows carry the skew advective form (1/2) rho u_i u_j + p delta.
    """
    u, v, w = velocity(q, rho)
    c, p = q.c, q.p
    return np.array([
        [c * u, 0.5 * rho * u * u + p, 0.5 * rho * u * v, 0.5 * rho * u * w, 0.0],
        [c * v, 0.5 * rho * u * v, 0.5 * rho * v * v + p, 0.5 * rho * v * w, 0.0],
        [c * w, 0.5 * rho * u * w, 0.5 * rho * v * w, 0.5 * rho * w * w + p, 0.0],
    ])


def nonconservative_coefficients(q: StateVector, rho, cs) -> np.ndarray:
    """Coefficient blocks Phi_m, shape (5, 5, 3) = (m, row, direction).

    Row m couples to grad w_m in the volume terms sum_m Phi_m . grad w_m and
    in the diamond surface fluxes.  Phi_5 is identically zero.
    """
    u, v, w = velocity(q, rho)
    phi = np.zeros((5, 5, 3))
    # m = 1: capillary coupling c * grad(mu) in the momentum rows
    phi[0, 1, 0] = q.c
    phi[0, 2, 1] = q.c
    phi[0, 3, 2] = q.c
    # m = 2..4: (1/2) rho u . grad(u_i) plus the acoustic divergence row
    half_ru = 0.5 * rho * np.array([u, v, w])
    rc2 = rho * cs * cs
    for m, row in ((1, 1), (2, 2), (3, 3)):
        phi[m, row] = half_ru
        phi[m, 4, m - 1] = rc2
    return phi


def viscous_flux(big_g: np.ndarray, eta, mobility) -> np.ndarray:
    """Viscous/diffusive fluxes from the gradient block, shape (3, 5).

    First row mobility * grad(mu); momentum rows 2 eta S with
    S = (grad u + grad u^T) / 2; pressure row zero.
    """
    grad_u = big_g[:, 1:4]           # grad_u[d, i] = d u_i / d x_d
    strain = 0.5 * (grad_u + grad_u.T)
    flux = np.zeros((3, 5))
    flux[:, 0] = mobility * big_g[:, 0]
    flux[:, 1:4] = 2.0 * eta * strain
    return flux


def pressure_source(position, time, spec: SourceSpec):
    """Forcing added to the pressure equation right-hand side.

    cos(2 pi f t) times a decaying Gaussian envelope of width b: a sheet
    (x-dependence only) for ``gaussian_line_x`` or a ball around the center
    for ``gaussian_ball``.
    """
    if not spec.enabled:
        return 0.0
    if spec.kind == "gaussian_line_x":
        r2 = ((position[0] - spec.center[0]) / spec.width) ** 2
    else:
        dx = np.asarray(position) - np.asarray(spec.center)
        r2 = np.dot(dx, dx) / spec.width**2
    return np.cos(2.0 * np.pi * spec.frequency * time) * np.exp(-r2)


def initial_condition(kind: str, theta_i: float, iface: InterfaceParams,
                      position) -> StateVector:
    """Equilibrium tanh concentration profile at rest with zero pressure.

    flat_1d      : interface plane x = 0, phase 1 at x < 0.
    slanted_2d   : interface slanted by the incidence angle theta_i.
    plane_z_3d   : interface plane z = 0, phase 1 above (z > 0).
    uniform_1/2  : single-phase fields (c = 1 or 0 everywhere).
    """
    x, y, z = position[0], position[1], position[2]
    if kind == "flat_1d":
        s = x
    elif kind == "slanted_2d":
        s = np.cos(theta_i) * x + np.sin(theta_i) * y
    elif kind == "plane_z_3d":
        s = -z
    elif kind == "uniform_1":
        return StateVector(1.0, 0.0, 0.0, 0.0, 0.0)
    elif kind == "uniform_2":
        return StateVector(0.0, 0.0, 0.0, 0.0, 0.0)
    else:
        raise ValueError(f"unknown initial condition {kind!r}")
    c = 1.0 - 0.5 * (1.0 + np.tanh(2.0 * s / iface.epsilon))
    return StateVector(float(c), 0.0, 0.0, 0.0, 0.0)
