"""Semi-discrete residual assembly for the two-phase acoustic system.

Glues the mesh, bases and physics into the fused kernels: the auxiliary
cascade (concentration gradient, chemical potential, gradient variables) is
recomputed from scratch inside every evaluation, then the primary weak-form
residual accumulates volume, non-conservative, surface and forcing terms.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from . import kernels
from .mesh import FACE_NAMES, Mesh
from .model import InterfaceParams, PhasePair, SourceSpec, StateVector, mixture

#: boundary condition kinds accepted in configurations
BC_KINDS = {
    "no_slip_wall": kernels.BC_NO_SLIP,
    "slip_wall": kernels.BC_SLIP,
    "symmetry": kernels.BC_SYMMETRY,
}

FLUX_KINDS = {"central": kernels.FLUX_CENTRAL, "ers": kernels.FLUX_ERS}


@dataclass
class BoundarySpec:
    """Wall condition per boundary tag; c and mu are always no-flux.

    Collapsed axes are closed by exact symmetry regardless of this spec.
    """

    conditions: dict = field(default_factory=dict)

    def validate(self, mesh: Mesh):
        present = set()
        for e in range(mesh.n_elements):
            for f in range(6):
                if mesh.boundary_tag_ids[e, f] >= 0 and \
                        not mesh.collapsed[f // 2]:
                    present.add(FACE_NAMES[mesh.boundary_tag_ids[e, f]])
        missing = sorted(present - set(self.conditions))
        if missing:
            raise ValueError(f"boundary tags without a condition: {missing}")
        unknown = {k: v for k, v in self.conditions.items()
                   if v not in BC_KINDS}
        if unknown:
            raise ValueError(f"unknown boundary kinds: {unknown}")


def all_walls(kind: str = "no_slip_wall") -> BoundarySpec:
    return BoundarySpec({name: kind for name in FACE_NAMES})


@dataclass
class FieldStorage:
    """Per-element, per-node unknowns and work fields (tensor layout)."""

    q: np.ndarray        # (K, 5, n1, n2, n3) state
    g: np.ndarray        # (K, 3, ...) concentration gradient
    mu: np.ndarray       # (K, ...)
    wvars: np.ndarray    # (K, 5, ...) gradient variables (mu, u, v, w, p)
    big_g: np.ndarray    # (K, 5, 3, ...) gradients of wvars
    resid: np.ndarray    # (K, 5, ...) dq/dt
    rk_reg: np.ndarray   # (K, 5, ...) low-storage RK register

    @classmethod
    def allocate(cls, k_elements: int, node_shape: tuple) -> "FieldStorage":
        full = (k_elements, 5) + node_shape
        return cls(
            q=np.zeros(full),
            g=np.zeros((k_elements, 3) + node_shape),
            mu=np.zeros((k_elements,) + node_shape),
            wvars=np.zeros(full),
            big_g=np.zeros((k_elements, 5, 3) + node_shape),
            resid=np.zeros(full),
            rk_reg=np.zeros(full),
        )


class BlowUpError(RuntimeError):
    """Raised when a non-finite nodal value appears during a run."""


class Discretization:
    """DGSEM spatial operator for one mesh/physics configuration."""

    def __init__(self, mesh: Mesh, phases: PhasePair, iface: InterfaceParams,
                 boundaries: BoundarySpec, source: SourceSpec,
                 flux: str = "ers"):
        if flux not in FLUX_KINDS:
            raise ValueError(f"unknown flux kind {flux!r}")
        boundaries.validate(mesh)
        self.mesh = mesh
        self.phases = phases
        self.iface = iface
        self.boundaries = boundaries
        self.source = source
        self.flux = flux

        self._qtw = []
        self._w = []
        for b in mesh.bases:
            w, d = b.weights, b.diff_matrix
            self._qtw.append(np.ascontiguousarray(
                (w[None, :] * d.T) / w[:, None]))
            self._w.append(np.ascontiguousarray(w))

        self._bc = self._build_bc_codes()
        self._phys = np.array([
            phases.rho1, phases.rho2, phases.cs1, phases.cs2,
            phases.eta1, phases.eta2, iface.sigma, iface.epsilon,
            iface.mobility])
        self._src = self._pack_source(source)
        self._orders = np.array(
            [max(b.order, 1) for b in mesh.bases], dtype=np.int64)
        nthreads = numba.get_num_threads()
        self._scratch = np.zeros((nthreads, 3, 5) + mesh.node_shape)

    def _build_bc_codes(self) -> np.ndarray:
        mesh = self.mesh
        bc = np.zeros((mesh.n_elements, 6), dtype=np.int8)
        for e in range(mesh.n_elements):
            for f in range(6):
                tid = mesh.boundary_tag_ids[e, f]
                if tid < 0:
                    continue
                if mesh.collapsed[f // 2]:
                    bc[e, f] = kernels.BC_COLLAPSED
                else:
                    kind = self.boundaries.conditions[FACE_NAMES[tid]]
                    bc[e, f] = BC_KINDS[kind]
        return bc

    @staticmethod
    def _pack_source(source: SourceSpec) -> np.ndarray:
        kind = -1.0
        if source.enabled:
            kind = 0.0 if source.kind == "gaussian_line_x" else 1.0
        return np.array([kind, source.frequency, source.width,
                         *source.center, *source.gravity])

    def allocate_fields(self) -> FieldStorage:
        return FieldStorage.allocate(self.mesh.n_elements,
                                     self.mesh.node_shape)

    def set_initial_condition(self, fields: FieldStorage, kind: str,
                              theta_i: float = 0.0):
        from .model import initial_condition
        mesh = self.mesh
        x = mesh.x
        if kind == "flat_1d":
            s = x[:, 0]
        elif kind == "slanted_2d":
            s = np.cos(theta_i) * x[:, 0] + np.sin(theta_i) * x[:, 1]
        elif kind == "plane_z_3d":
            s = -x[:, 2]
        elif kind in ("uniform_1", "uniform_2"):
            fields.q[:] = 0.0
            fields.q[:, 0] = 1.0 if kind == "uniform_1" else 0.0
            return
        else:
            raise ValueError(f"unknown initial condition {kind!r}")
        fields.q[:] = 0.0
        fields.q[:, 0] = 1.0 - 0.5 * (1.0 + np.tanh(2.0 * s
                                                    / self.iface.epsilon))

    # -- auxiliary solves (each also runs inside primary_residual) ----------

    def solve_concentration_gradient(self, fields: FieldStorage) -> np.ndarray:
        m = self.mesh
        kernels.gradient_c_pass(
            fields.q, fields.g, m.contravariant, m.jacobian, m.neighbors,
            self._bc, *self._qtw, *self._w)
        return fields.g

    def solve_chemical_potential(self, fields: FieldStorage) -> np.ndarray:
        m = self.mesh
        kernels.chem_potential_pass(
            fields.q, fields.g, fields.mu, fields.wvars, m.contravariant,
            m.jacobian, m.neighbors, self._bc, *self._qtw, *self._w,
            self.iface.sigma, self.iface.epsilon,
            self.phases.rho1, self.phases.rho2)
        return fields.mu

    def solve_gradient_vars(self, fields: FieldStorage) -> np.ndarray:
        m = self.mesh
        kernels.gradient_w_pass(
            fields.wvars, fields.big_g, m.contravariant, m.jacobian,
            m.neighbors, self._bc, *self._qtw, *self._w)
        return fields.big_g

    def primary_residual(self, fields: FieldStorage, t: float) -> np.ndarray:
        """Full cascade + weak-form residual; fills fields.resid with dq/dt."""
        m = self.mesh
        self.solve_concentration_gradient(fields)
        self.solve_chemical_potential(fields)
        self.solve_gradient_vars(fields)
        kernels.primary_pass(
            fields.q, fields.wvars, fields.big_g, fields.resid, m.x,
            m.contravariant, m.jacobian, m.neighbors, self._bc,
            *self._qtw, *self._w, self._phys, self._src, t,
            FLUX_KINDS[self.flux], self._scratch)
        return fields.resid

    def check_finite(self, fields: FieldStorage, t: float):
        e, mvar, i, j, k = kernels.find_nonfinite(fields.q)
        if e >= 0:
            raise BlowUpError(
                f"non-finite state at t={t:.6e}: element {e}, variable "
                f"{mvar}, node ({i},{j},{k})")

    # -- reference boundary ghost (kernels mirror this) ---------------------

    @staticmethod
    def boundary_state(q_int: StateVector, kind: str,
                       normal: np.ndarray) -> StateVector:
        """Ghost state realizing the wall condition.

        no_slip_wall mirrors all momentum components; slip_wall/symmetry
        reflect only the normal one; c and p are copied, which together with
        the copied-value closures in the auxiliary solves enforces the
        no-flux conditions on c and mu.
        """
        m = np.array([q_int.srho_u, q_int.srho_v, q_int.srho_w])
        if kind == "no_slip_wall":
            m = -m
        elif kind in ("slip_wall", "symmetry"):
            m = m - 2.0 * np.dot(m, normal) * np.asarray(normal)
        else:
            raise ValueError(f"unknown boundary kind {kind!r}")
        return StateVector(q_int.c, m[0], m[1], m[2], q_int.p)

    # -- diagnostics hooks ---------------------------------------------------

    def entropy_and_dissipation(self, fields: FieldStorage) -> tuple:
        """Discrete entropy <J E, 1> and dissipation integral (volume part)."""
        out = np.empty((self.mesh.n_elements, 2))
        kernels.entropy_pass(
            fields.q, fields.g, fields.wvars, fields.big_g,
            self.mesh.jacobian, *self._w, out, *self._phys)
        return float(out[:, 0].sum()), float(out[:, 1].sum())

    def concentration_total(self, fields: FieldStorage) -> float:
        """Quadrature of J c over the domain (conserved to roundoff)."""
        w0, w1, w2 = self._w
        wt = w0[:, None, None] * w1[None, :, None] * w2[None, None, :]
        return float(np.sum(fields.q[:, 0] * self.mesh.jacobian * wt))

    def wave_dt_bound(self, fields: FieldStorage) -> float:
        """Smallest per-node stable-step bound (before the CFL factor)."""
        out = np.empty(self.mesh.n_elements)
        kernels.wave_dt_pass(
            fields.q, self.mesh.contravariant, self.mesh.jacobian,
            self._orders, out, *self._phys)
        return float(out.min())

    def mixture_density(self, c: np.ndarray) -> np.ndarray:
        return mixture(c, self.phases.rho1, self.phases.rho2)
