"""Fine-scale conforming discretizations of the energy bilinear forms.

Three problem families share one container:

  robin-1d-order2   continuous piecewise-linear elements for the operator
                    (1 - d^2/dx^2)/2 with Robin boundary energy
                    (u(0)^2 + u(1)^2)/2 folded into the end elements;
  beam-1d-order4    cubic Hermite elements for (a(x) u'')'' with clamped
                    ends (value and slope DOFs removed);
  plate-2d-order4   tensor-product cubic B-splines on the unit square with
                    the clamped condition imposed by dropping every spline
                    whose support touches the boundary.

Element energy matrices are kept so local energies (tail sums, boundary
attribution) can be evaluated element by element; the assembled matrix is
exactly their scatter-sum.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse
from scipy.interpolate import BSpline

from .fields import constant_field
from .quadrature import gauss_rule

GAUSS_PER_AXIS = 5


@dataclass
class FineSpace:
    problem: str
    dim: int
    n_fine: int
    ndof: int
    A: sparse.csr_matrix
    M: sparse.csr_matrix
    element_A: np.ndarray        # (nel, ldof, ldof), includes boundary terms
    element_dofs: np.ndarray     # (nel, ldof), -1 marks a removed DOF
    element_cells: np.ndarray    # (nel, dim) integer cell indices per axis
    element_lo: np.ndarray       # (nel, dim)
    element_hi: np.ndarray       # (nel, dim)
    gauss_points: np.ndarray     # (nel, nq, dim) physical quadrature nodes
    gauss_weights: np.ndarray    # (nq,) weights including the cell measure
    basis_values: np.ndarray     # (ldof, nq), identical on every element
    coeff: object = None
    bc: str = ""
    _dof_degree: np.ndarray = field(default=None, repr=False)

    @property
    def n_elements(self):
        return self.element_dofs.shape[0]

    @property
    def h_fine(self):
        return 1.0 / self.n_fine

    def dof_adjacency_counts(self):
        """Number of adjacent elements per DOF (cached)."""
        if self._dof_degree is None:
            ids = self.element_dofs[self.element_dofs >= 0]
            self._dof_degree = np.bincount(ids, minlength=self.ndof)
        return self._dof_degree

    def element_energies(self, coefs):
        """Per-element energy u_e^T A_e u_e of a coefficient vector."""
        local = np.where(self.element_dofs >= 0, coefs[self.element_dofs], 0.0)
        return np.einsum("ei,eij,ej->e", local, self.element_A, local)

    def energy_norm(self, coefs):
        return float(np.sqrt(coefs @ (self.A @ coefs)))

    def load_vector(self, f):
        """Assemble int f v_a by the element Gauss rule. f follows eval_a/eval_plate conventions."""
        pts = self.gauss_points
        if self.dim == 1:
            vals = np.asarray(f(pts[:, :, 0]), dtype=float)
        else:
            vals = np.asarray(f(pts[:, :, 0], pts[:, :, 1]), dtype=float)
        contrib = (vals * self.gauss_weights[None, :]) @ self.basis_values.T
        b = np.zeros(self.ndof)
        valid = self.element_dofs >= 0
        np.add.at(b, self.element_dofs[valid], contrib[valid])
        return b

    def evaluate(self, coefs, x, y=None):
        """Point values of the fine-space function with the given coefficients."""
        if self.problem == "robin-1d-order2":
            nodes = np.arange(self.n_fine + 1) * self.h_fine
            return np.interp(np.asarray(x, dtype=float), nodes, coefs)
        if self.problem == "beam-1d-order4":
            return _hermite_evaluate(self, coefs, np.asarray(x, dtype=float))
        if self.problem == "plate-2d-order4":
            if y is None:
                raise ValueError("plate evaluation needs (x, y)")
            return _spline_evaluate(self, coefs, np.asarray(x, dtype=float),
                                    np.asarray(y, dtype=float))
        raise ValueError("no evaluator for problem %r" % (self.problem,))

    def as_callable(self, coefs):
        if self.dim == 1:
            return lambda x: self.evaluate(coefs, x)
        return lambda x, y: self.evaluate(coefs, x, y)


def _assemble(element_A, element_dofs, ndof):
    ldof = element_dofs.shape[1]
    rows = np.repeat(element_dofs[:, :, None], ldof, axis=2)
    cols = np.repeat(element_dofs[:, None, :], ldof, axis=1)
    valid = (rows >= 0) & (cols >= 0)
    A = sparse.coo_matrix(
        (element_A[valid], (rows[valid], cols[valid])), shape=(ndof, ndof)
    ).tocsr()
    lower = sparse.tril(A, -1)
    return (lower + lower.T + sparse.diags(A.diagonal())).tocsr()


# ----------------------------------------------------------------------
# robin-1d-order2: piecewise linear elements
# ----------------------------------------------------------------------

def _build_robin_1d(n_fine):
    h = 1.0 / n_fine
    gx, gw = gauss_rule(GAUSS_PER_AXIS)
    vals = np.vstack([1.0 - gx, gx])                      # (2, nq)
    grads = np.vstack([-np.ones_like(gx), np.ones_like(gx)]) / h
    w = gw * h
    ke = np.einsum("q,iq,jq->ij", w, grads, grads)
    me = np.einsum("q,iq,jq->ij", w, vals, vals)
    local = 0.5 * (ke + me)
    element_A = np.tile(local, (n_fine, 1, 1))
    element_A[0, 0, 0] += 0.5      # Robin energy at x=0
    element_A[-1, 1, 1] += 0.5     # Robin energy at x=1
    element_M = np.tile(me, (n_fine, 1, 1))
    cells = np.arange(n_fine)
    element_dofs = np.column_stack([cells, cells + 1])
    ndof = n_fine + 1
    A = _assemble(element_A, element_dofs, ndof)
    M = _assemble(element_M, element_dofs, ndof)
    lo = (cells * h)[:, None]
    pts = (lo + gx[None, :] * h)[:, :, None]
    return FineSpace(
        problem="robin-1d-order2", dim=1, n_fine=n_fine, ndof=ndof, A=A, M=M,
        element_A=element_A, element_dofs=element_dofs,
        element_cells=cells[:, None], element_lo=lo, element_hi=lo + h,
        gauss_points=pts, gauss_weights=w, basis_values=vals,
        coeff=None, bc="robin-both-ends")


# ----------------------------------------------------------------------
# beam-1d-order4: cubic Hermite elements, clamped ends
# ----------------------------------------------------------------------

def _hermite_shapes(s, h):
    """Hermite shape values and second derivatives at local coordinates s."""
    vals = np.vstack([
        1.0 - 3.0 * s ** 2 + 2.0 * s ** 3,
        h * (s - 2.0 * s ** 2 + s ** 3),
        3.0 * s ** 2 - 2.0 * s ** 3,
        h * (-(s ** 2) + s ** 3),
    ])
    curv = np.vstack([
        (-6.0 + 12.0 * s) / h ** 2,
        (-4.0 + 6.0 * s) / h,
        (6.0 - 12.0 * s) / h ** 2,
        (-2.0 + 6.0 * s) / h,
    ])
    return vals, curv


def _build_beam_1d(field_obj, n_fine):
    h = 1.0 / n_fine
    gx, gw = gauss_rule(GAUSS_PER_AXIS)
    vals, curv = _hermite_shapes(gx, h)
    w = gw * h
    cells = np.arange(n_fine)
    lo = (cells * h)[:, None]
    pts = (lo + gx[None, :] * h)[:, :, None]
    a_at_gauss = field_obj.eval_a(pts[:, :, 0])
    element_A = np.einsum("eq,iq,jq->eij", a_at_gauss * w[None, :], curv, curv)
    me = np.einsum("q,iq,jq->ij", w, vals, vals)
    element_M = np.tile(me, (n_fine, 1, 1))

    full = 2 * (n_fine + 1)
    keep = np.ones(full, dtype=bool)
    keep[[0, 1, full - 2, full - 1]] = False   # clamped: value and slope at both ends
    new_id = np.full(full, -1, dtype=int)
    new_id[keep] = np.arange(keep.sum())
    full_dofs = np.column_stack([2 * cells, 2 * cells + 1,
                                 2 * cells + 2, 2 * cells + 3])
    element_dofs = new_id[full_dofs]
    ndof = int(keep.sum())
    A = _assemble(element_A, element_dofs, ndof)
    M = _assemble(element_M, element_dofs, ndof)
    return FineSpace(
        problem="beam-1d-order4", dim=1, n_fine=n_fine, ndof=ndof, A=A, M=M,
        element_A=element_A, element_dofs=element_dofs,
        element_cells=cells[:, None], element_lo=lo, element_hi=lo + h,
        gauss_points=pts, gauss_weights=w, basis_values=vals,
        coeff=field_obj, bc="clamped-both-ends")


def _hermite_evaluate(fs, coefs, x):
    h = fs.h_fine
    x = np.atleast_1d(x)
    cell = np.clip((x / h).astype(int), 0, fs.n_fine - 1)
    s = x / h - cell
    vals, _ = _hermite_shapes(s, h)
    local = np.where(fs.element_dofs[cell] >= 0,
                     coefs[fs.element_dofs[cell]], 0.0)
    return np.einsum("ni,in->n", local, vals)


# ----------------------------------------------------------------------
# plate-2d-order4: clamped tensor-product cubic B-splines
# ----------------------------------------------------------------------

_CARDINAL_CUBIC = BSpline.basis_element(np.arange(5.0), extrapolate=False)
_CARDINAL_D1 = _CARDINAL_CUBIC.derivative(1)
_CARDINAL_D2 = _CARDINAL_CUBIC.derivative(2)


def _bspline_ref_tables(gx, h):
    """Per-slot spline values/derivatives at reference Gauss points.

    Slot a of a cell is the spline starting 3-a cells to the left, so its
    argument at local coordinate s is s + 3 - a.
    """
    offs = np.array([3.0, 2.0, 1.0, 0.0])
    args = gx[None, :] + offs[:, None]
    val = np.nan_to_num(_CARDINAL_CUBIC(args))
    d1 = np.nan_to_num(_CARDINAL_D1(args)) / h
    d2 = np.nan_to_num(_CARDINAL_D2(args)) / h ** 2
    return val, d1, d2


def _build_plate_2d(field_obj, n_fine):
    if n_fine < 8:
        raise ValueError("plate space needs at least 8 cells per axis, got %d" % (n_fine,))
    h = 1.0 / n_fine
    n_ax = n_fine - 3                      # splines fully inside [0,1] per axis
    gx, gw = gauss_rule(GAUSS_PER_AXIS)
    val, d1, d2 = _bspline_ref_tables(gx, h)
    nq1 = len(gx)
    w2 = np.outer(gw, gw).ravel() * h * h

    # tensor tables, local index (a, b) -> a*4 + b, gauss index (p, q) -> p*nq1 + q
    def tensor(tx, ty):
        return np.einsum("ap,bq->abpq", tx, ty).reshape(16, nq1 * nq1)

    t_val = tensor(val, val)
    t_xx = tensor(d2, val)
    t_yy = tensor(val, d2)
    t_xy = tensor(d1, d1)

    cx, cy = np.meshgrid(np.arange(n_fine), np.arange(n_fine), indexing="ij")
    cx = cx.ravel()
    cy = cy.ravel()
    nel = n_fine * n_fine
    lo = np.column_stack([cx, cy]) * h
    hi = lo + h
    ref_pts = np.column_stack([np.repeat(gx, nq1), np.tile(gx, nq1)])
    pts = lo[:, None, :] + ref_pts[None, :, :] * h

    a20, a02, a11 = field_obj.eval_plate(pts[:, :, 0], pts[:, :, 1])
    element_A = (
        np.einsum("eq,iq,jq->eij", a20 * w2[None, :], t_xx, t_xx)
        + np.einsum("eq,iq,jq->eij", a02 * w2[None, :], t_yy, t_yy)
        + 2.0 * np.einsum("eq,iq,jq->eij", a11 * w2[None, :], t_xy, t_xy)
    )
    me = np.einsum("q,iq,jq->ij", w2, t_val, t_val)
    element_M = np.tile(me, (nel, 1, 1))

    slots = np.arange(4)
    ix = cx[:, None] - 3 + slots[None, :]           # (nel, 4) spline index per x slot
    iy = cy[:, None] - 3 + slots[None, :]
    valid_x = (ix >= 0) & (ix < n_ax)
    valid_y = (iy >= 0) & (iy < n_ax)
    dof_x = np.where(valid_x, ix, -1)
    dof_y = np.where(valid_y, iy, -1)
    element_dofs = np.where(
        (dof_x[:, :, None] >= 0) & (dof_y[:, None, :] >= 0),
        dof_x[:, :, None] * n_ax + dof_y[:, None, :], -1,
    ).reshape(nel, 16)

    ndof = n_ax * n_ax
    A = _assemble(element_A, element_dofs, ndof)
    M = _assemble(element_M, element_dofs, ndof)
    return FineSpace(
        problem="plate-2d-order4", dim=2, n_fine=n_fine, ndof=ndof, A=A, M=M,
        element_A=element_A, element_dofs=element_dofs,
        element_cells=np.column_stack([cx, cy]), element_lo=lo, element_hi=hi,
        gauss_points=pts, gauss_weights=w2, basis_values=t_val,
        coeff=field_obj, bc="clamped-boundary-layer")


def _spline_evaluate(fs, coefs, x, y):
    h = fs.h_fine
    n_ax = fs.n_fine - 3
    x = np.atleast_1d(x).astype(float)
    y = np.atleast_1d(y).astype(float)
    cx = np.clip((x / h).astype(int), 0, fs.n_fine - 1)
    cy = np.clip((y / h).astype(int), 0, fs.n_fine - 1)
    sx = x / h - cx
    sy = y / h - cy
    out = np.zeros_like(x)
    for a in range(4):
        ix = cx - 3 + a
        bx = np.nan_to_num(_CARDINAL_CUBIC(sx + 3 - a))
        for b in range(4):
            iy = cy - 3 + b
            by = np.nan_to_num(_CARDINAL_CUBIC(sy + 3 - b))
            ok = (ix >= 0) & (ix < n_ax) & (iy >= 0) & (iy < n_ax)
            dof = np.where(ok, ix * n_ax + iy, 0)
            out += np.where(ok, coefs[dof] * bx * by, 0.0)
    return out


# ----------------------------------------------------------------------
# public builders and constraint assembly
# ----------------------------------------------------------------------

def build_fine_space(problem, field_obj=None, n_fine=None):
    """Build one of the supported fine discretizations on a uniform grid."""
    if n_fine is None or int(n_fine) != n_fine or n_fine < 1:
        raise ValueError("n_fine must be a positive integer, got %r" % (n_fine,))
    n_fine = int(n_fine)
    if problem == "robin-1d-order2":
        return _build_robin_1d(n_fine)
    if problem == "beam-1d-order4":
        return _build_beam_1d(field_obj or constant_field(1.0), n_fine)
    if problem == "plate-2d-order4":
        return _build_plate_2d(field_obj or constant_field(1.0, dim=2), n_fine)
    raise ValueError("unknown problem tag %r" % (problem,))


def element_patch_map(fs, partition):
    """Coarse patch index of every fine element; ratio must be integral."""
    if partition.dim != fs.dim:
        raise ValueError("partition dimension %d does not match fine space %d"
                         % (partition.dim, fs.dim))
    if fs.n_fine % partition.m_per_axis != 0:
        raise ValueError(
            "fine grid (%d cells/axis) is not an integer refinement of %d patches/axis"
            % (fs.n_fine, partition.m_per_axis))
    ratio = fs.n_fine // partition.m_per_axis
    axes = fs.element_cells // ratio
    if fs.dim == 1:
        return axes[:, 0].copy()
    return axes[:, 0] * partition.m_per_axis + axes[:, 1]


def assemble_constraint_matrix(fs, basis):
    """Sparse N x (m*Q) matrix of moments int v_a phi_{j,q}.

    Column (j, q) is supported on the DOFs whose basis functions meet patch j.
    """
    part = basis.partition
    patch_of = element_patch_map(fs, part)
    Q = basis.Q
    rows, cols, data = [], [], []
    weighted = fs.basis_values * fs.gauss_weights[None, :]   # (ldof, nq)
    for j in range(part.m):
        els = np.flatnonzero(patch_of == j)
        pts = fs.gauss_points[els].reshape(-1, fs.dim)
        phi = basis.eval_patch(j, pts).reshape(Q, len(els), -1)   # (Q, ne, nq)
        local = np.einsum("lq,keq->elk", weighted, phi)           # (ne, ldof, Q)
        dofs = fs.element_dofs[els]
        for col_q in range(Q):
            valid = dofs >= 0
            rows.append(dofs[valid])
            cols.append(np.full(valid.sum(), j * Q + col_q))
            data.append(local[:, :, col_q][valid])
    C = sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(fs.ndof, part.m * Q)).tocsr()
    return C
