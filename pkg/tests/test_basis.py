"""Unit tests for the Gauss-Lobatto basis machinery."""
import numpy as np
import pytest

from phasewave.basis import (
    MAX_ORDER,
    derivative_matrix,
    gauss_lobatto,
    lagrange_eval_vector,
    point_basis,
)


def analytic_moment(k: int) -> float:
    """Exact integral of xi^k over [-1, 1]."""
    return 0.0 if k % 2 else 2.0 / (k + 1)


def test_order_one_is_endpoints():
    b = gauss_lobatto(1)
    assert np.allclose(b.nodes, [-1.0, 1.0])
    assert np.allclose(b.weights, [1.0, 1.0])


def test_order_two_weights_from_exactness():
    # independent oracle: impose quadrature exactness on 1, xi, xi^2 at the
    # known nodes {-1, 0, 1} and solve for the weights
    nodes = np.array([-1.0, 0.0, 1.0])
    vander = np.array([nodes**0, nodes**1, nodes**2])
    moments = np.array([analytic_moment(0), analytic_moment(1), analytic_moment(2)])
    expected = np.linalg.solve(vander, moments)
    assert np.allclose(expected, [1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0])

    b = gauss_lobatto(2)
    assert np.allclose(b.nodes, nodes, atol=1e-15)
    assert np.allclose(b.weights, expected, atol=1e-14)


def test_order_four_degree_six_moment():
    b = gauss_lobatto(4)
    assert abs(np.sum(b.weights * b.nodes**6) - 2.0 / 7.0) < 1e-13


@pytest.mark.parametrize("order", range(1, MAX_ORDER + 1))
def test_node_and_weight_invariants(order):
    b = gauss_lobatto(order)
    assert b.nodes[0] == -1.0 and b.nodes[-1] == 1.0
    assert np.all(np.diff(b.nodes) > 0)
    assert np.all(b.weights > 0)
    assert abs(np.sum(b.weights) - 2.0) < 1e-14


@pytest.mark.parametrize("order", range(1, MAX_ORDER + 1))
def test_quadrature_exactness(order):
    b = gauss_lobatto(order)
    for k in range(2 * order):
        assert abs(np.sum(b.weights * b.nodes**k) - analytic_moment(k)) < 1e-12


@pytest.mark.parametrize("order", range(1, 9))
def test_summation_by_parts(order):
    b = gauss_lobatto(order)
    q = np.diag(b.weights) @ b.diff_matrix
    boundary = np.zeros((order + 1, order + 1))
    boundary[0, 0], boundary[-1, -1] = -1.0, 1.0
    assert np.max(np.abs(q + q.T - boundary)) < 1e-12


@pytest.mark.parametrize("order", range(1, MAX_ORDER + 1))
def test_derivative_matrix_rows_sum_to_zero(order):
    b = gauss_lobatto(order)
    assert np.max(np.abs(b.diff_matrix.sum(axis=1))) < 1e-12


def test_derivative_exact_for_polynomials():
    b = gauss_lobatto(5)
    d = derivative_matrix(b)
    assert np.max(np.abs(d @ np.ones(6))) < 1e-13
    assert np.max(np.abs(d @ b.nodes - 1.0)) < 1e-13
    # degree-5 polynomial differentiates exactly at the nodes
    rng = np.random.default_rng(7)
    coeffs = rng.standard_normal(6)
    p = np.polynomial.Polynomial(coeffs)
    assert np.max(np.abs(d @ p(b.nodes) - p.deriv()(b.nodes))) < 1e-11


def test_derivative_of_square_order_two():
    # d/dxi xi^2 = 2 xi at {-1, 0, 1}
    b = gauss_lobatto(2)
    assert np.allclose(b.diff_matrix @ b.nodes**2, [-2.0, 0.0, 2.0], atol=1e-13)


def test_lagrange_cardinality_and_unity():
    b = gauss_lobatto(6)
    for k in range(7):
        vec = lagrange_eval_vector(b, b.nodes[k])
        expected = np.zeros(7)
        expected[k] = 1.0
        assert np.allclose(vec, expected)
    rng = np.random.default_rng(3)
    for point in rng.uniform(-1, 1, 20):
        assert abs(np.sum(lagrange_eval_vector(b, point)) - 1.0) < 1e-14


def test_lagrange_linear_midpoint():
    b = gauss_lobatto(1)
    assert np.allclose(lagrange_eval_vector(b, 0.0), [0.5, 0.5])


@pytest.mark.parametrize("order", [1, 3, 6, 8])
def test_interpolation_reproduces_polynomials(order):
    b = gauss_lobatto(order)
    rng = np.random.default_rng(order)
    coeffs = rng.standard_normal(order + 1)
    p = np.polynomial.Polynomial(coeffs)
    samples = p(b.nodes)
    for point in rng.uniform(-1, 1, 50):
        value = np.dot(lagrange_eval_vector(b, point), samples)
        assert abs(value - p(point)) < 1e-12 * max(1.0, np.abs(samples).max())


def test_rejects_bad_orders():
    with pytest.raises(ValueError):
        gauss_lobatto(0)
    with pytest.raises(ValueError):
        gauss_lobatto(MAX_ORDER + 1)


def test_point_basis_is_constant_axis():
    b = point_basis()
    assert b.n_nodes == 1
    assert b.weights[0] == 2.0
    assert b.diff_matrix[0, 0] == 0.0
