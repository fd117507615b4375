"""Mesh construction, curl-form metrics and discrete metric identities."""
import numpy as np
import pytest

from phasewave.basis import gauss_lobatto
from phasewave.mesh import (
    AxisGrading,
    build_cartesian_mesh,
    compute_metrics,
    cross_product_contravariant,
    face_geometry_from_metrics,
    metric_identity_residual,
    sinusoidal_curve,
)


def unit_box_element(h, order):
    """Mapping nodes of an affine [0, h]^3 element."""
    b = gauss_lobatto(order)
    ref = 0.5 * (b.nodes + 1.0) * h
    x = np.empty((3, order + 1, order + 1, order + 1))
    x[0] = ref[:, None, None]
    x[1] = ref[None, :, None]
    x[2] = ref[None, None, :]
    return x, (b, b, b)


def test_affine_element_metrics():
    h = 0.3
    x, bases = unit_box_element(h, 4)
    geo = compute_metrics(x, bases)
    assert np.allclose(geo.jacobian, h**3 / 8.0, rtol=1e-13)
    expected = np.zeros((3, 3))
    np.fill_diagonal(expected, h * h / 4.0)
    for i in range(3):
        for n in range(3):
            assert np.allclose(geo.contravariant[i, n], expected[i, n],
                               atol=1e-13 * h * h)


def test_inverted_element_rejected():
    x, bases = unit_box_element(1.0, 2)
    x[0] = -x[0]
    with pytest.raises(ValueError, match="Jacobian"):
        compute_metrics(x, bases)


def test_uniform_mesh_counts_and_widths():
    mesh = build_cartesian_mesh([(-2, 2), (0, 1), (0, 1)], (4, 1, 1), order=3)
    assert mesh.n_elements == 4
    assert np.allclose(mesh.element_widths[:, 0], 1.0)
    assert mesh.collapsed == (False, True, True)


def test_2d_mesh_face_combinatorics():
    mesh = build_cartesian_mesh([(0, 1), (0, 1), (0, 1)], (2, 2, 1), order=2)
    assert mesh.n_elements == 4
    interior = np.sum(mesh.neighbors >= 0) // 2
    # in-plane boundary faces only (z faces of a collapsed axis excluded)
    xy_boundary = np.sum((mesh.neighbors[:, :4] < 0))
    assert interior == 4
    assert xy_boundary == 8


def test_graded_widths_geometric():
    ratio, n, length = 0.8, 4, 1.0
    mesh = build_cartesian_mesh(
        [(0, length), (0, 1), (0, 1)], (n, 1, 1), order=2,
        grading={0: AxisGrading(plane=0.0, ratio=ratio)})
    widths = mesh.element_widths[:, 0]
    # oracle: closed-form geometric sequence summing to the extent
    w_far = length * (1 - ratio) / (1 - ratio**n)
    expected = w_far * ratio ** np.arange(n - 1, -1, -1)
    assert np.allclose(widths, expected, rtol=1e-12)
    assert abs(widths.sum() - length) < 1e-12
    # smallest element sits against the graded plane
    assert widths[0] == widths.min()


def test_grading_interior_plane_places_edge_on_plane():
    mesh = build_cartesian_mesh(
        [(0, 1), (0, 1), (-0.25, 0.25)], (2, 2, 8), order=2,
        grading={2: AxisGrading(plane=0.0, ratio=0.75)})
    z_edges = np.unique(np.round(mesh.x[:, 2], 12))
    assert np.any(np.abs(z_edges) < 1e-12)


def test_bad_arguments_rejected():
    with pytest.raises(ValueError):
        build_cartesian_mesh([(0, 1), (0, 1), (0, 1)], (0, 1, 1), order=2)
    with pytest.raises(ValueError):
        build_cartesian_mesh([(1, 0), (0, 1), (0, 1)], (2, 1, 1), order=2)
    with pytest.raises(ValueError):
        AxisGrading(plane=0.0, ratio=-0.5)


@pytest.mark.parametrize("grading", [None, {0: AxisGrading(0.0, 0.85)}])
def test_metric_identities_cartesian(grading):
    mesh = build_cartesian_mesh([(0, 1), (0, 1), (0, 1)], (3, 2, 2), order=4,
                                grading=grading)
    assert metric_identity_residual(mesh) < 1e-13


def test_metric_identities_curved_mesh():
    mesh = build_cartesian_mesh([(0, 1), (0, 1), (0, 1)], (2, 2, 2), order=5,
                                curve=sinusoidal_curve(0.05))
    assert metric_identity_residual(mesh) < 1e-12


def test_curl_form_beats_cross_product_on_curved_element():
    # single curved element: curl form keeps the identities, the naive
    # cross-product form does not
    order = 5
    x, bases = unit_box_element(1.0, order)
    curve = sinusoidal_curve(0.05)
    xc = curve(x[None])[0]
    geo = compute_metrics(xc, bases)

    def identity_residual(contra):
        from phasewave.mesh import _apply_diff
        worst = 0.0
        for n in range(3):
            acc = np.zeros(contra.shape[2:])
            for d in range(3):
                acc += _apply_diff(contra[d, n], bases[d].diff_matrix, d)
            worst = max(worst, np.max(np.abs(acc)))
        return worst / np.max(np.abs(contra))

    assert identity_residual(geo.contravariant) < 1e-12
    naive = cross_product_contravariant(xc, bases)
    assert identity_residual(naive) > 1e-6


def test_face_triads_orthonormal_right_handed():
    mesh = build_cartesian_mesh([(0, 1), (0, 1), (0, 1)], (2, 2, 2), order=3,
                                curve=sinusoidal_curve(0.05))
    for e in (0, 3, 7):
        geo = mesh.element_geometry(e)
        for fg in geo.faces:
            n, t1, t2 = fg.normal, fg.tangent1, fg.tangent2
            rot = np.stack([n, t1, t2], axis=0)  # (3 vec, 3 comp, *face)
            flat = rot.reshape(3, 3, -1)
            for p in range(flat.shape[2]):
                t = flat[:, :, p]
                assert np.max(np.abs(t @ t.T - np.eye(3))) < 1e-13
                assert abs(np.linalg.det(t) - 1.0) < 1e-13


def test_shared_face_geometry_agrees():
    mesh = build_cartesian_mesh([(0, 1), (0, 1), (0, 1)], (2, 2, 2), order=4,
                                curve=sinusoidal_curve(0.04))
    slices = {0: (0, slice(None), slice(None)),
              1: (-1, slice(None), slice(None)),
              2: (slice(None), 0, slice(None)),
              3: (slice(None), -1, slice(None)),
              4: (slice(None), slice(None), 0),
              5: (slice(None), slice(None), -1)}
    for e in range(mesh.n_elements):
        geo = mesh.element_geometry(e)
        for f in range(6):
            nb = mesh.neighbors[e, f]
            if nb < 0:
                continue
            fb = f ^ 1  # opposite face on the neighbor
            geo_nb = mesh.element_geometry(int(nb))
            # node coordinates coincide
            xa = mesh.x[e][(slice(None),) + slices[f]]
            xb = mesh.x[nb][(slice(None),) + slices[fb]]
            assert np.max(np.abs(xa - xb)) < 1e-12
            # surface Jacobians agree, normals oppose
            sa = geo.faces[f].surface_jacobian
            sb = geo_nb.faces[fb].surface_jacobian
            assert np.max(np.abs(sa - sb)) < 1e-12 * sa.max()
            na = geo.faces[f].normal
            nb_ = geo_nb.faces[fb].normal
            assert np.max(np.abs(na + nb_)) < 1e-12


def test_cartesian_metrics_match_curl_form():
    # the analytic Cartesian fill agrees with the general curl-form path
    mesh = build_cartesian_mesh([(0, 2), (0, 1), (0, 1)], (3, 2, 2), order=3,
                                grading={0: AxisGrading(0.0, 0.8)})
    for e in (0, 5, 11):
        geo = compute_metrics(mesh.x[e], mesh.bases)
        assert np.allclose(geo.jacobian, mesh.jacobian[e], rtol=1e-12)
        assert np.allclose(geo.contravariant, mesh.contravariant[e],
                           atol=1e-13 * np.max(mesh.contravariant[e]))
