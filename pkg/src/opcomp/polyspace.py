"""Per-patch orthonormal polynomial spaces and L2 projections onto them.

Each patch of a partition carries the same polynomial family of total degree
at most k-1, built by orthonormalizing monomials in centered patch-scaled
coordinates t = (x - x_i)/h. The family is normalized so that the patch Gram
matrix equals |tau_i| times the identity.
"""

import math
from dataclasses import dataclass

import numpy as np

from .fitting import rate_fit
from .quadrature import gauss_rule, tensor_rule

MAX_HALF_ORDER = 3


def poly_space_dim(k, dim):
    """Number of d-variate monomials of total degree <= k-1."""
    return math.comb(k + dim - 1, dim)


def _graded_exponents(k, dim):
    """Multi-indices of total degree <= k-1, graded then lexicographic."""
    out = []
    for total in range(k):
        if dim == 1:
            out.append((total,))
        else:
            for ax in range(total, -1, -1):
                out.append((ax, total - ax))
    return np.array(out, dtype=int)


def _monomial_gram(exponents):
    """Exact Gram of t^alpha monomials over [-1/2, 1/2]^dim."""
    def moment(n):
        if n % 2 == 1:
            return 0.0
        return (0.5 ** n) / (n + 1)

    q = len(exponents)
    G = np.empty((q, q))
    for a in range(q):
        for b in range(q):
            G[a, b] = np.prod([moment(int(n)) for n in exponents[a] + exponents[b]])
    return G


@dataclass(frozen=True)
class PolyBasis:
    """Orthonormalized polynomial family shared by all patches of a partition."""

    partition: object
    k: int
    Q: int
    exponents: np.ndarray  # (Q, dim)
    coef: np.ndarray       # (Q, Q): phi_q(t) = sum_j coef[q, j] * t^alpha_j

    @property
    def n_total(self):
        return self.partition.m * self.Q

    def eval_patch(self, i, points, deriv=None):
        """Values of all Q functions of patch i at points.

        points: (n, dim) physical coordinates assumed to lie inside patch i.
        deriv: per-axis derivative orders (defaults to plain values).
        Returns an array of shape (Q, n).
        """
        part = self.partition
        points = np.atleast_2d(np.asarray(points, dtype=float))
        t = (points - part.centroids[i]) / part.h
        if deriv is None:
            deriv = (0,) * part.dim
        powers = []
        for ax in range(part.dim):
            col = np.ones((self.Q, points.shape[0]))
            for q, alpha in enumerate(self.exponents[:, ax]):
                a, n = int(alpha), int(deriv[ax])
                if n > a:
                    col[q] = 0.0
                else:
                    fac = math.perm(a, n) / part.h ** n
                    col[q] = fac * t[:, ax] ** (a - n)
            powers.append(col)
        mono = powers[0]
        for col in powers[1:]:
            mono = mono * col
        return self.coef @ mono


def local_poly_basis(partition, k):
    """Orthonormal polynomial family of degree <= k-1 on every patch.

    The patch Gram condition int_tau phi_q phi_q' = |tau| delta_qq' holds by
    construction: orthonormalization is done in unit-cell coordinates where
    the cell has measure one.
    """
    if int(k) != k or k < 1:
        raise ValueError("half-order k must be a positive integer, got %r" % (k,))
    if k > MAX_HALF_ORDER:
        raise ValueError("half-order k=%d not supported (max %d)" % (k, MAX_HALF_ORDER))
    k = int(k)
    exponents = _graded_exponents(k, partition.dim)
    G = _monomial_gram(exponents)
    L = np.linalg.cholesky(G)
    coef = np.linalg.inv(L)  # rows: orthonormal combinations of monomials
    Q = poly_space_dim(k, partition.dim)
    assert coef.shape == (Q, Q)
    return PolyBasis(partition, k, Q, exponents, coef)


def patch_gauss_points(partition, i, n_gauss):
    """Tensor Gauss rule on patch i; returns points (N, dim) and weights (N,)."""
    ref_x, ref_w = gauss_rule(n_gauss)
    pts, w = tensor_rule(ref_x, ref_w, partition.dim)
    lo = partition.lows[i]
    size = partition.highs[i] - lo
    return lo + pts * size, w * float(partition.volumes[i])


def _call_on_points(u, points, dim):
    if dim == 1:
        return np.asarray(u(points[:, 0]), dtype=float)
    return np.asarray(u(points[:, 0], points[:, 1]), dtype=float)


def project_onto_poly(u, basis, n_gauss=10):
    """L2-project a function onto the per-patch polynomial space.

    u is a callable (1D: u(x); 2D: u(x, y)) or a pair (finespace, coefs).
    Returns coefficients of shape (m, Q) such that the projection on patch i
    is sum_q c[i, q] phi_{i,q}. Idempotent, exact on members of the space.
    """
    part = basis.partition
    if isinstance(u, tuple):
        fs, vec = u
        if fs.n_fine % part.m_per_axis != 0:
            raise ValueError(
                "fine grid (%d cells/axis) does not resolve the partition (%d patches/axis)"
                % (fs.n_fine, part.m_per_axis))
        u = fs.as_callable(vec)
    coefs = np.empty((part.m, basis.Q))
    for i in range(part.m):
        pts, w = patch_gauss_points(part, i, n_gauss)
        phi = basis.eval_patch(i, pts)
        vals = _call_on_points(u, pts, part.dim)
        coefs[i] = phi @ (w * vals) / float(part.volumes[i])
    return coefs


def projection_seminorm_error(u, basis, p=0, du=None, n_gauss=10):
    """Global seminorm |u - Pi u|_p over all patches (1D seminorms for p >= 1).

    du must supply the p-th derivative of u when p >= 1.
    """
    part = basis.partition
    if p < 0 or p >= basis.k:
        raise ValueError("seminorm order p=%d must satisfy 0 <= p < k=%d" % (p, basis.k))
    if p >= 1 and part.dim != 1:
        raise ValueError("derivative seminorms are implemented for 1D partitions only")
    if p >= 1 and du is None:
        raise ValueError("p=%d needs the p-th derivative callable du" % (p,))
    coefs = project_onto_poly(u, basis, n_gauss=n_gauss)
    total = 0.0
    deriv = None if p == 0 else (p,)
    target = u if p == 0 else du
    for i in range(part.m):
        pts, w = patch_gauss_points(part, i, n_gauss)
        proj = coefs[i] @ basis.eval_patch(i, pts, deriv=deriv)
        vals = _call_on_points(target, pts, part.dim)
        total += float(w @ (vals - proj) ** 2)
    return math.sqrt(total)


def projection_error_rate(k, p, u, levels, du=None, dim=1, n_gauss=10):
    """Fitted log-log slope of the projection seminorm error across mesh levels.

    levels are patch counts per axis (at least three). The expected slope for
    a smooth function is k - p.
    """
    from .mesh import build_uniform_partition

    levels = list(levels)
    if len(levels) < 3:
        raise ValueError("need at least 3 levels, got %d" % len(levels))
    points = []
    for m in levels:
        part = build_uniform_partition(dim, m)
        basis = local_poly_basis(part, k)
        err = projection_seminorm_error(u, basis, p=p, du=du, n_gauss=n_gauss)
        points.append((part.h, err))
    slope, intercept, r2 = rate_fit(points)
    return slope, points, r2
