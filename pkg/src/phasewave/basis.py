"""Gauss-Lobatto nodal bases: quadrature, interpolation and differentiation.

All operators live on the reference interval [-1, 1].  The collocation
derivative matrix together with the diagonal quadrature weights satisfies the
summation-by-parts identity Q + Q^T = B, which the rest of the solver relies
on for stability.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Highest supported polynomial order. Keeps the test matrix bounded; the
#: validation cases use N <= 7.
MAX_ORDER = 12

_NEWTON_TOL = 1e-14
_NEWTON_MAXIT = 100


@dataclass(frozen=True)
class NodalBasis:
    """Gauss-Lobatto nodes, quadrature weights and derivative matrix.

    Attributes
    ----------
    order : int
        Polynomial order N >= 1 (N+1 nodes).
    nodes : ndarray, shape (N+1,)
        Strictly increasing, nodes[0] = -1, nodes[-1] = +1.
    weights : ndarray, shape (N+1,)
        Positive quadrature weights summing to 2.
    diff_matrix : ndarray, shape (N+1, N+1)
        D[i, j] = l_j'(nodes[i]).
    bary_weights : ndarray, shape (N+1,)
        Barycentric weights of the node set (internal helper).
    """

    order: int
    nodes: np.ndarray
    weights: np.ndarray
    diff_matrix: np.ndarray
    bary_weights: np.ndarray = field(repr=False, default=None)

    @property
    def n_nodes(self) -> int:
        return self.order + 1


def _legendre_and_derivative(n: int, x: float) -> tuple[float, float]:
    """Evaluate P_n(x) and P_n'(x) by the three-term recurrence."""
    if n == 0:
        return 1.0, 0.0
    p_prev, p = 1.0, x
    dp_prev, dp = 0.0, 1.0
    for k in range(1, n):
        p_next = ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
        dp_next = dp_prev + (2 * k + 1) * p
        p_prev, p = p, p_next
        dp_prev, dp = dp, dp_next
    return p, dp


def _barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


def gauss_lobatto(order: int) -> NodalBasis:
    """Build the Gauss-Lobatto basis of the given polynomial order.

    Interior nodes are the roots of P_N', found by Newton iteration from
    Chebyshev-Gauss-Lobatto initial guesses (tolerance 1e-14).  Weights are
    w_i = 2 / (N (N+1) P_N(x_i)^2); the quadrature is exact for polynomials
    of degree <= 2N - 1.

    Raises
    ------
    ValueError
        If order < 1 or order > MAX_ORDER.
    RuntimeError
        If the Newton iteration fails to converge (should not happen for
        supported orders).
    """
    if order < 1:
        raise ValueError(f"polynomial order must be >= 1, got {order}")
    if order > MAX_ORDER:
        raise ValueError(f"polynomial order must be <= {MAX_ORDER}, got {order}")

    n = order
    nodes = np.empty(n + 1)
    nodes[0], nodes[n] = -1.0, 1.0
    for i in range(1, n):
        x = -np.cos(np.pi * i / n)  # Chebyshev-Gauss-Lobatto guess
        for _ in range(_NEWTON_MAXIT):
            p, dp = _legendre_and_derivative(n, x)
            # P_N'' from the Legendre ODE: (1-x^2) P'' = 2x P' - N(N+1) P
            d2p = (2.0 * x * dp - n * (n + 1) * p) / (1.0 - x * x)
            step = dp / d2p
            x -= step
            if abs(step) < _NEWTON_TOL:
                break
        else:
            raise RuntimeError(
                f"Gauss-Lobatto Newton iteration failed for order {order}"
            )
        nodes[i] = x
    # enforce exact symmetry of the node set
    nodes = 0.5 * (nodes - nodes[::-1])

    weights = np.empty(n + 1)
    for i in range(n + 1):
        p, _ = _legendre_and_derivative(n, nodes[i])
        weights[i] = 2.0 / (n * (n + 1) * p * p)

    bary = _barycentric_weights(nodes)
    dmat = _diff_matrix_from_barycentric(nodes, bary)
    return NodalBasis(order=n, nodes=nodes, weights=weights,
                      diff_matrix=dmat, bary_weights=bary)


def _diff_matrix_from_barycentric(nodes: np.ndarray,
                                  bary: np.ndarray) -> np.ndarray:
    n = len(nodes)
    dmat = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                dmat[i, j] = (bary[j] / bary[i]) / (nodes[i] - nodes[j])
        dmat[i, i] = -np.sum(dmat[i])
    return dmat


def derivative_matrix(basis: NodalBasis) -> np.ndarray:
    """Collocation derivative matrix D[i, j] = l_j'(nodes[i]).

    Built from barycentric weights for conditioning at higher orders; exact
    for polynomials of degree <= N sampled at the nodes.
    """
    return _diff_matrix_from_barycentric(basis.nodes, basis.bary_weights)


def lagrange_eval_vector(basis: NodalBasis, point: float) -> np.ndarray:
    """Values of all Lagrange cardinal polynomials at one point.

    Uses the second barycentric formula.  At a node the result is the
    corresponding Kronecker row; everywhere the entries sum to 1.
    """
    nodes, bary = basis.nodes, basis.bary_weights
    diff = point - nodes
    hit = np.abs(diff) < 1e-14
    if np.any(hit):
        out = np.zeros_like(nodes)
        out[np.argmax(hit)] = 1.0
        return out
    terms = bary / diff
    return terms / np.sum(terms)


def point_basis() -> NodalBasis:
    """Degenerate single-node axis used for collapsed (inactive) directions.

    One node at 0 with weight 2 and a zero derivative matrix: exact for
    fields constant along the axis.  Not a Gauss-Lobatto basis; never handed
    to users, only to tensor-product machinery for 1D/2D runs.
    """
    nodes = np.array([0.0])
    return NodalBasis(order=0, nodes=nodes, weights=np.array([2.0]),
                      diff_matrix=np.zeros((1, 1)),
                      bary_weights=np.array([1.0]))
