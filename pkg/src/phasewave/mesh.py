"""Structured hexahedral meshes with curl-form metric terms.

Meshes are tensor products of per-axis element grids (optionally graded
toward a plane, optionally smoothly curved).  1D and 2D configurations are
degenerate 3D meshes: a collapsed axis has a single element spanning a unit
extent and a single collocation node, which is exact for fields constant
along that axis.

The contravariant metric fields J a^i_n are built in curl form so the
discrete metric identities hold to machine precision, which in turn gives
discrete free-stream preservation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .basis import NodalBasis, gauss_lobatto, point_basis

#: face index convention: (-x, +x, -y, +y, -z, +z)
FACE_NAMES = ("left", "right", "bottom", "top", "back", "front")


@dataclass(frozen=True)
class AxisGrading:
    """Geometric refinement toward a plane on one axis.

    Element widths shrink by ``ratio`` per element as they approach
    ``plane``.  The plane may be an edge of the extent or lie inside it (the
    grid then places an element edge exactly on the plane and grades both
    sides).
    """

    plane: float
    ratio: float

    def __post_init__(self):
        if self.ratio <= 0:
            raise ValueError(f"grading ratio must be > 0, got {self.ratio}")


@dataclass
class FaceGeometry:
    """Unit normal, tangents and surface Jacobian on one element face."""

    normal: np.ndarray        # (3, *face_shape), outward unit normal
    tangent1: np.ndarray      # (3, *face_shape)
    tangent2: np.ndarray      # (3, *face_shape)
    surface_jacobian: np.ndarray  # (*face_shape,)


@dataclass
class ElementGeometry:
    """Mapping, Jacobian, curl-form metrics and face geometry of one element."""

    mapping_nodes: np.ndarray   # (3, n1, n2, n3) physical coordinates
    jacobian: np.ndarray        # (n1, n2, n3), > 0
    contravariant: np.ndarray   # (3, 3, n1, n2, n3): [i, n] = J a^i_n
    faces: list                 # 6 FaceGeometry entries, FACE_NAMES order


def _apply_diff(values: np.ndarray, dmat: np.ndarray, axis: int) -> np.ndarray:
    """Apply a 1D derivative matrix along one tensor axis."""
    moved = np.moveaxis(values, axis, -1)
    return np.moveaxis(moved @ dmat.T, -1, axis)


def covariant_vectors(mapping_nodes: np.ndarray,
                      bases: tuple[NodalBasis, NodalBasis, NodalBasis]) -> np.ndarray:
    """Covariant basis a_d[n] = d X_n / d xi_d at every node; shape (3, 3, ...)."""
    out = np.empty((3,) + mapping_nodes.shape)
    for d in range(3):
        for n in range(3):
            out[d, n] = _apply_diff(mapping_nodes[n], bases[d].diff_matrix, d)
    return out


def cross_product_contravariant(mapping_nodes: np.ndarray,
                                bases) -> np.ndarray:
    """Naive contravariant metrics J a^i = a_j x a_k (cyclic).

    Provided for comparison only: this form does not satisfy the discrete
    metric identities on curved elements because the product is of degree 2N.
    """
    a = covariant_vectors(mapping_nodes, bases)
    out = np.empty((3, 3) + mapping_nodes.shape[1:])
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        out[i] = np.cross(a[j], a[k], axisa=0, axisb=0).transpose(
            (3, 0, 1, 2))
    return out


def curl_form_contravariant(mapping_nodes: np.ndarray, bases) -> np.ndarray:
    """Curl-form contravariant metrics, J a^i_n, shape (3, 3, n1, n2, n3).

    J a^i_n = -e_i . curl_xi( I^N(X_l grad_xi X_m) ), (n, m, l) cyclic,
    which satisfies sum_i d(J a^i_n)/d xi_i = 0 discretely.
    """
    a = covariant_vectors(mapping_nodes, bases)
    shape = mapping_nodes.shape[1:]
    out = np.empty((3, 3) + shape)
    for n in range(3):
        m, l = (n + 1) % 3, (n + 2) % 3
        # V_d = X_l * dX_m/dxi_d, interpolated by collocation
        v = mapping_nodes[l][None] * a[:, m]
        curl = np.empty((3,) + shape)
        curl[0] = _apply_diff(v[2], bases[1].diff_matrix, 1) - \
            _apply_diff(v[1], bases[2].diff_matrix, 2)
        curl[1] = _apply_diff(v[0], bases[2].diff_matrix, 2) - \
            _apply_diff(v[2], bases[0].diff_matrix, 0)
        curl[2] = _apply_diff(v[1], bases[0].diff_matrix, 0) - \
            _apply_diff(v[0], bases[1].diff_matrix, 1)
        out[:, n] = -curl
    return out


def _face_slices(shape):
    """Index tuples selecting each of the 6 faces of an (n1, n2, n3) block."""
    n1, n2, n3 = shape
    return [
        (0, slice(None), slice(None)), (n1 - 1, slice(None), slice(None)),
        (slice(None), 0, slice(None)), (slice(None), n2 - 1, slice(None)),
        (slice(None), slice(None), 0), (slice(None), slice(None), n3 - 1),
    ]


def _triad_from_normal(normal: np.ndarray, face_axis: int):
    """Deterministic orthonormal (t1, t2) completing the outward normal.

    t1 is the normalized projection of the first reference tangential
    coordinate direction onto the face; t2 = n x t1.
    """
    d1 = 1 if face_axis == 0 else 0
    ref = np.zeros(3)
    ref[d1] = 1.0
    proj = ref[:, None] - normal * np.tensordot(ref, normal, axes=(0, 0))
    t1 = proj / np.linalg.norm(proj, axis=0)
    t2 = np.cross(normal, t1, axisa=0, axisb=0).T
    return t1, t2


def face_geometry_from_metrics(contravariant: np.ndarray) -> list:
    """Face normals, tangents and surface Jacobians from restricted metrics.

    The face geometry is the volume metric J a^d restricted to the face, so
    surface and volume integrals telescope exactly (free-stream holds).
    """
    faces = []
    slices = _face_slices(contravariant.shape[2:])
    for f, sl in enumerate(slices):
        d, sign = f // 2, (-1.0 if f % 2 == 0 else 1.0)
        scaled = sign * contravariant[(d, slice(None)) + sl]  # (3, *face)
        s_jac = np.sqrt(np.sum(scaled**2, axis=0))
        normal = scaled / s_jac
        flat_n = normal.reshape(3, -1)
        t1, t2 = _triad_from_normal(flat_n, d)
        faces.append(FaceGeometry(
            normal=normal,
            tangent1=t1.reshape(normal.shape),
            tangent2=t2.reshape(normal.shape),
            surface_jacobian=s_jac,
        ))
    return faces


def compute_metrics(mapping_nodes: np.ndarray, bases) -> ElementGeometry:
    """Curl-form metrics, Jacobian and face geometry for one element.

    ``bases`` is either a single NodalBasis (isotropic) or a 3-tuple of
    per-axis bases.  Raises on non-positive Jacobian (inverted element).
    """
    if isinstance(bases, NodalBasis):
        bases = (bases, bases, bases)
    a = covariant_vectors(mapping_nodes, bases)
    jac = np.einsum('n...,n...->...', a[0],
                    np.cross(a[1], a[2], axisa=0, axisb=0)
                    .transpose((3, 0, 1, 2)))
    if np.any(jac <= 0):
        bad = np.unravel_index(np.argmin(jac), jac.shape)
        raise ValueError(f"non-positive Jacobian {jac[bad]:.3e} at node {bad}")
    contra = curl_form_contravariant(mapping_nodes, bases)
    return ElementGeometry(mapping_nodes=mapping_nodes, jacobian=jac,
                           contravariant=contra,
                           faces=face_geometry_from_metrics(contra))


@dataclass
class Mesh:
    """Structured mesh with packed per-element arrays.

    Arrays are element-major so residual kernels can iterate elements in
    parallel with no shared writes.
    """

    bases: tuple                 # 3 per-axis NodalBasis (point basis if collapsed)
    counts: tuple                # elements per axis
    extents: tuple               # ((x0,x1), (y0,y1), (z0,z1))
    x: np.ndarray                # (K, 3, n1, n2, n3)
    jacobian: np.ndarray         # (K, n1, n2, n3)
    contravariant: np.ndarray    # (K, 3, 3, n1, n2, n3)
    neighbors: np.ndarray        # (K, 6) int64, -1 at boundaries
    boundary_tag_ids: np.ndarray  # (K, 6) int8, -1 interior, else FACE_NAMES idx
    is_cartesian: bool
    collapsed: tuple             # per-axis bool
    element_widths: np.ndarray = field(default=None, repr=False)  # (K, 3)
    axis_edges: tuple = None     # per-axis element edge coordinates

    @property
    def n_elements(self) -> int:
        return self.x.shape[0]

    @property
    def node_shape(self) -> tuple:
        return self.x.shape[2:]

    @property
    def orders(self) -> tuple:
        return tuple(b.order for b in self.bases)

    def element_geometry(self, e: int) -> ElementGeometry:
        contra = self.contravariant[e]
        return ElementGeometry(
            mapping_nodes=self.x[e], jacobian=self.jacobian[e],
            contravariant=contra, faces=face_geometry_from_metrics(contra))

    def boundary_tag(self, e: int, f: int) -> Optional[str]:
        tid = self.boundary_tag_ids[e, f]
        return None if tid < 0 else FACE_NAMES[tid]


def _graded_widths(length: float, n: int, ratio: float,
                   toward_low: bool) -> np.ndarray:
    """Geometric widths summing to length, smallest next to the graded end."""
    r = np.full(n, ratio) ** np.arange(n)
    widths = r / r.sum() * length
    # widths[0] is the largest; reverse so the smallest sits at the low end
    return widths[::-1].copy() if toward_low else widths


def _axis_edges(lo: float, hi: float, n: int,
                grading: Optional[AxisGrading]) -> np.ndarray:
    if grading is None:
        return np.linspace(lo, hi, n + 1)
    plane, ratio = grading.plane, grading.ratio
    if plane <= lo + 1e-15 * (hi - lo):
        widths = _graded_widths(hi - lo, n, ratio, toward_low=True)
    elif plane >= hi - 1e-15 * (hi - lo):
        widths = _graded_widths(hi - lo, n, ratio, toward_low=False)
    else:
        n_lo = min(max(int(round(n * (plane - lo) / (hi - lo))), 1), n - 1)
        w_lo = _graded_widths(plane - lo, n_lo, ratio, toward_low=False)
        w_hi = _graded_widths(hi - plane, n - n_lo, ratio, toward_low=True)
        widths = np.concatenate([w_lo, w_hi])
    return lo + np.concatenate([[0.0], np.cumsum(widths)])


def build_cartesian_mesh(extents, counts, order: int,
                         grading: Optional[dict] = None,
                         curve: Optional[Callable] = None) -> Mesh:
    """Tensor-product mesh of axis-aligned hexahedra.

    Parameters
    ----------
    extents : three (lo, hi) pairs in meters.
    counts : three positive element counts; an axis with count 1 is treated
        as collapsed (single constant node, symmetry closure).
    order : polynomial order on active axes.
    grading : optional {axis_index: AxisGrading} refinement.
    curve : optional smooth map applied to node coordinates; requires all
        axes active.  Metrics are then computed in curl form per element.
    """
    counts = tuple(int(c) for c in counts)
    if any(c < 1 for c in counts):
        raise ValueError(f"element counts must be >= 1, got {counts}")
    extents = tuple((float(lo), float(hi)) for lo, hi in extents)
    if any(hi <= lo for lo, hi in extents):
        raise ValueError(f"inverted or empty extents: {extents}")
    grading = grading or {}

    # an axis with a single element is collapsed: one constant node
    collapsed = tuple(c == 1 for c in counts)
    if curve is not None and any(collapsed):
        raise ValueError("curved meshes require all axes active (counts > 1)")

    bases = tuple(point_basis() if collapsed[d] else gauss_lobatto(order)
                  for d in range(3))
    edges = [_axis_edges(extents[d][0], extents[d][1], counts[d],
                         grading.get(d)) for d in range(3)]

    nx, ny, nz = counts
    k_total = nx * ny * nz
    shape = tuple(b.n_nodes for b in bases)
    x = np.empty((k_total, 3) + shape)
    widths = np.empty((k_total, 3))

    ref = [0.5 * (b.nodes + 1.0) for b in bases]  # node positions in [0, 1]
    for iz in range(nz):
        for iy in range(ny):
            for ix in range(nx):
                e = ix + nx * (iy + ny * iz)
                idx = (ix, iy, iz)
                for d in range(3):
                    lo, hi = edges[d][idx[d]], edges[d][idx[d] + 1]
                    widths[e, d] = hi - lo
                    coord = lo + (hi - lo) * ref[d]
                    shape_d = [1, 1, 1]
                    shape_d[d] = shape[d]
                    x[e, d] = np.broadcast_to(coord.reshape(shape_d), shape)

    if curve is not None:
        x = curve(x)

    jacobian = np.empty((k_total,) + shape)
    contravariant = np.zeros((k_total, 3, 3) + shape)
    if curve is None:
        for e in range(k_total):
            hx, hy, hz = widths[e]
            jacobian[e] = hx * hy * hz / 8.0
            contravariant[e, 0, 0] = hy * hz / 4.0
            contravariant[e, 1, 1] = hx * hz / 4.0
            contravariant[e, 2, 2] = hx * hy / 4.0
    else:
        for e in range(k_total):
            geo = compute_metrics(x[e], bases)
            jacobian[e] = geo.jacobian
            contravariant[e] = geo.contravariant

    neighbors = np.full((k_total, 6), -1, dtype=np.int64)
    tag_ids = np.full((k_total, 6), -1, dtype=np.int8)
    strides = (1, nx, nx * ny)
    for iz in range(nz):
        for iy in range(ny):
            for ix in range(nx):
                e = ix + nx * (iy + ny * iz)
                idx = [ix, iy, iz]
                for d in range(3):
                    for side, step in ((0, -1), (1, +1)):
                        f = 2 * d + side
                        j = idx[d] + step
                        if 0 <= j < counts[d]:
                            neighbors[e, f] = e + step * strides[d]
                        else:
                            tag_ids[e, f] = f

    return Mesh(bases=bases, counts=counts, extents=extents, x=x,
                jacobian=jacobian, contravariant=contravariant,
                neighbors=neighbors, boundary_tag_ids=tag_ids,
                is_cartesian=(curve is None), collapsed=collapsed,
                element_widths=widths, axis_edges=tuple(edges))


def metric_identity_residual(mesh: Mesh) -> float:
    """Max metric-identity violation, relative to the metric magnitude.

    Evaluates max |sum_d d(J a^d_n)/d xi_d| over all elements, nodes and
    Cartesian components n with the nodal derivative matrices, scaled by the
    largest metric entry so the result is mesh-size independent.
    """
    scale = np.max(np.abs(mesh.contravariant))
    worst = 0.0
    for e in range(mesh.n_elements):
        for n in range(3):
            acc = np.zeros(mesh.node_shape)
            for d in range(3):
                acc += _apply_diff(mesh.contravariant[e, d, n],
                                   mesh.bases[d].diff_matrix, d)
            worst = max(worst, np.max(np.abs(acc)))
    return worst / scale


def sinusoidal_curve(amplitude: float, lengths=(1.0, 1.0, 1.0)):
    """Smooth coordinate perturbation for metric stress tests.

    Each component is perturbed by an independent sinusoid product (distinct
    wavenumbers per component) so the mapping Jacobian is a generic smooth
    field; with a common perturbation the naive cross-product metrics would
    accidentally stay identity-satisfying.
    """
    lx, ly, lz = lengths

    def curve(x):
        u = np.pi * x[:, 0] / lx
        v = np.pi * x[:, 1] / ly
        w = np.pi * x[:, 2] / lz
        out = x.copy()
        out[:, 0] += amplitude * lx * np.sin(u) * np.sin(v) * np.sin(w)
        out[:, 1] += amplitude * ly * np.sin(2 * u) * np.sin(v) * np.sin(2 * w)
        out[:, 2] += amplitude * lz * np.sin(u) * np.sin(2 * v) * np.sin(w)
        return out

    return curve


def mesh_summary(mesh: Mesh) -> str:
    """Plain-text mesh report: sizes, Jacobian range, identity residual."""
    lines = [
        f"elements: {mesh.n_elements} "
        f"({mesh.counts[0]} x {mesh.counts[1]} x {mesh.counts[2]})",
        f"orders: {mesh.orders}  collapsed axes: {mesh.collapsed}",
        f"jacobian min/max: {mesh.jacobian.min():.6e} / {mesh.jacobian.max():.6e}",
        f"metric identity residual: {metric_identity_residual(mesh):.3e}",
    ]
    return "\n".join(lines)
