"""Kernel-side compression: moment matrix, smoothed basis, compression error.

The covariance operator is discretized by a Nystrom rule on [0,1]: with
quadrature nodes x_i and weights w_i, a function is a vector of node values,
the L2 inner product is (f, g) = sum w_i f_i g_i, and the operator acts as
(Kf)_i = sum_j k(x_i, x_j) w_j f_j. Operator norms are taken in this weighted
inner product, i.e. as spectral norms of W^(1/2) R W^(1/2) for symmetric R.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla
from scipy.special import gamma, kv

from .errors import DegenerateCompression, NumericalFailure
from .quadrature import composite_gauss


def exponential_kernel(rho=1.0, sigma=1.0):
    """k(x, y) = sigma^2 exp(-|x-y| / rho)."""
    if rho <= 0 or sigma <= 0:
        raise ValueError("kernel parameters must be positive")

    def k(x, y):
        return sigma ** 2 * np.exp(-np.abs(x - y) / rho)

    return k


def matern_kernel(nu, rho=1.0, sigma=1.0):
    """General Matern covariance; nu = 1/2 reduces to the exponential kernel."""
    if nu <= 0 or rho <= 0 or sigma <= 0:
        raise ValueError("kernel parameters must be positive")
    if abs(nu - 0.5) < 1e-14:
        return exponential_kernel(rho=rho, sigma=sigma)
    pref = sigma ** 2 * 2.0 ** (1.0 - nu) / gamma(nu)

    def k(x, y):
        r = np.sqrt(2.0 * nu) * np.abs(x - y) / rho
        small = r < 1e-10
        rs = np.where(small, 1.0, r)
        vals = pref * rs ** nu * kv(nu, rs)
        return np.where(small, sigma ** 2, vals)

    return k


@dataclass
class KernelOperator:
    kernel: object
    nodes: np.ndarray
    weights: np.ndarray
    matrix: np.ndarray        # k(x_i, x_j), symmetric

    @property
    def n_nodes(self):
        return len(self.nodes)

    def sqrt_weights(self):
        return np.sqrt(self.weights)

    def gram_action(self, f):
        """(Kf) at the nodes for node values f."""
        return self.matrix @ (self.weights * f)


def kernel_operator(kernel, n_points=4096, rule="midpoint"):
    """Discretize a symmetric kernel on [0,1] with n_points quadrature nodes."""
    if n_points < 2:
        raise ValueError("need at least 2 quadrature points")
    if rule == "midpoint":
        nodes = (np.arange(n_points) + 0.5) / n_points
        weights = np.full(n_points, 1.0 / n_points)
    elif rule == "gauss2":
        if n_points % 2:
            raise ValueError("gauss2 rule needs an even point count")
        nodes, weights = composite_gauss(n_points // 2, 2)
    else:
        raise ValueError("unknown quadrature rule %r" % (rule,))
    matrix = np.asarray(kernel(nodes[:, None], nodes[None, :]), dtype=float)
    return KernelOperator(kernel, nodes, weights, matrix)


@dataclass
class CompressedOperator:
    """Rank-n symmetric approximation psi @ middle @ psi.T of the operator."""

    psi: np.ndarray        # (n_nodes, n) node values of the range basis
    middle: np.ndarray     # (n, n) symmetric middle matrix
    theta: np.ndarray = None

    @property
    def rank(self):
        return self.psi.shape[1]


def poly_node_values(nodes, basis):
    """Values of every patch polynomial at 1D nodes, shape (n_nodes, m*Q)."""
    part = basis.partition
    if part.dim != 1:
        raise ValueError("kernel compression is implemented on the interval")
    m = part.m_per_axis
    patch = np.minimum((nodes * m).astype(int), m - 1)
    out = np.zeros((len(nodes), m * basis.Q))
    for j in range(m):
        sel = patch == j
        vals = basis.eval_patch(j, nodes[sel, None])   # (Q, n_sel)
        out[sel, j * basis.Q:(j + 1) * basis.Q] = vals.T
    return out


def nodal_poly_values(op, basis):
    return poly_node_values(op.nodes, basis)


def theta_by_quadrature(kernel, basis, n_points=16384, rule="gauss2",
                        block_rows=2048):
    """Moment matrix on a fine quadrature grid without storing the kernel matrix.

    Accumulates (W Phi)^T K (W Phi) over row blocks; useful when n_points is
    too large for a dense kernel matrix.
    """
    if rule == "midpoint":
        nodes = (np.arange(n_points) + 0.5) / n_points
        weights = np.full(n_points, 1.0 / n_points)
    elif rule == "gauss2":
        nodes, weights = composite_gauss(n_points // 2, 2)
    else:
        raise ValueError("unknown quadrature rule %r" % (rule,))
    wphi = weights[:, None] * poly_node_values(nodes, basis)
    n = wphi.shape[1]
    theta = np.zeros((n, n))
    for start in range(0, len(nodes), block_rows):
        stop = min(start + block_rows, len(nodes))
        kblock = kernel(nodes[start:stop, None], nodes[None, :])
        theta += wphi[start:stop].T @ (kblock @ wphi)
    return 0.5 * (theta + theta.T)


def theta_matrix(op, basis, phi=None):
    """Moment matrix Theta[(i,q),(j,q')] = (K phi_iq, phi_jq') by quadrature."""
    if phi is None:
        phi = nodal_poly_values(op, basis)
    wphi = op.weights[:, None] * phi
    theta = wphi.T @ (op.matrix @ wphi)
    theta = 0.5 * (theta + theta.T)
    eigvals = np.linalg.eigvalsh(theta)
    if eigvals[0] <= 1e-13 * max(eigvals[-1], 1e-300):
        raise DegenerateCompression(
            "moment matrix numerically singular: smallest eigenvalue %.3e "
            "(largest %.3e)" % (eigvals[0], eigvals[-1]))
    return theta


def compressed_operator(op, basis):
    """Smoothed basis Psi = (K Phi) Theta^{-1} and its compressed operator.

    The middle matrix equals Theta, so psi @ middle @ psi.T is the energy
    projection of the operator onto span(K Phi).
    """
    phi = nodal_poly_values(op, basis)
    theta = theta_matrix(op, basis, phi=phi)
    kphi = op.matrix @ (op.weights[:, None] * phi)
    cho = sla.cho_factor(theta)
    psi = sla.cho_solve(cho, kphi.T).T
    return CompressedOperator(psi=psi, middle=theta, theta=theta)


def compressed_from_family(op, psi_nodes, stiffness):
    """Compressed operator psi @ stiffness^{-1} @ psi.T for an external basis.

    stiffness is the energy Gram matrix of the basis members (e.g. assembled
    on a fine space); its inverse is the middle matrix.
    """
    stiffness = 0.5 * (stiffness + stiffness.T)
    try:
        cho = sla.cho_factor(stiffness)
        middle = sla.cho_solve(cho, np.eye(stiffness.shape[0]))
    except sla.LinAlgError as exc:
        raise DegenerateCompression("basis stiffness matrix not SPD") from exc
    return CompressedOperator(psi=np.asarray(psi_nodes, float), middle=middle)


def eigen_compressed(op, n):
    """Compressed operator built from the first n eigenfunctions."""
    vals, funcs = top_eigenpairs(op, n)
    return CompressedOperator(psi=funcs, middle=np.diag(vals))


def top_eigenpairs(op, n):
    """Leading n eigenvalues/eigenfunctions of the weighted kernel operator.

    Eigenfunctions are orthonormal in the quadrature inner product and
    returned as node values (n_nodes, n); eigenvalues in descending order.
    """
    if n < 0 or n >= op.n_nodes:
        raise ValueError("need 0 <= n < grid size %d, got %d" % (op.n_nodes, n))
    if n == 0:
        return np.zeros(0), np.zeros((op.n_nodes, 0))
    sw = op.sqrt_weights()
    sym = sw[:, None] * op.matrix * sw[None, :]
    vals, vecs = _symmetric_top_eigs(sym, n)
    return vals, vecs / sw[:, None]


def _symmetric_top_eigs(sym, k):
    n = sym.shape[0]
    if k > n - 1 or k > 0.2 * n:
        vals, vecs = sla.eigh(sym)
        order = np.argsort(vals)[::-1][:k]
        return vals[order], vecs[:, order]
    try:
        v0 = np.full(n, 1.0 / math.sqrt(n))
        vals, vecs = spla.eigsh(sym, k=k, which="LA", v0=v0)
    except spla.ArpackNoConvergence as exc:
        raise NumericalFailure("eigen iteration did not converge: %s" % exc) from exc
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def eigen_baseline(op, n):
    """(n+1)-th largest eigenvalue of the weighted kernel operator."""
    if n < 0 or n + 1 > op.n_nodes - 1:
        raise ValueError("need n + 1 < grid size %d, got n=%d" % (op.n_nodes, n))
    sw = op.sqrt_weights()
    sym = sw[:, None] * op.matrix * sw[None, :]
    vals, _ = _symmetric_top_eigs(sym, n + 1)
    return float(vals[n])


def compression_error(op, compressed):
    """Weighted L2 operator norm of (K - psi middle psi^T).

    Computed as the largest-magnitude eigenvalue of the symmetric matrix
    W^(1/2) R W^(1/2); the residual R is symmetric but in general indefinite.
    """
    sw = op.sqrt_weights()
    if compressed.rank == 0:
        resid = op.matrix
    else:
        low = compressed.psi @ compressed.middle @ compressed.psi.T
        resid = op.matrix - low
    sym = sw[:, None] * resid * sw[None, :]
    sym = 0.5 * (sym + sym.T)
    try:
        v0 = np.full(sym.shape[0], 1.0 / math.sqrt(sym.shape[0]))
        val = spla.eigsh(sym, k=1, which="LM", v0=v0,
                         return_eigenvectors=False)
    except spla.ArpackNoConvergence as exc:
        raise NumericalFailure(
            "operator norm iteration did not converge (residual %s)" % exc) from exc
    return float(abs(val[0]))
