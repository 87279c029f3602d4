"""Reference-shape solvers behind the inverse-energy scaling constant.

The constant is sqrt(lambda_max(M, S)) where, over a fixed shape,
M(i,j) = int p_i p_j and S(i,j) = int u_i p_j with u_i solving the pure
2k-th order operator with homogeneous Dirichlet (clamped for k=2) data and
right-hand side p_i. Monomials are centered at the shape centroid, which
makes the degree-1 constant translation invariant by construction.

Supported shapes: interval of length delta (d=1, k in {1,2}), polygonal disc
of diameter delta (d=2, k=1), unit square cell (d=2, k in {1,2}).
"""

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .errors import NumericalFailure
from .fields import constant_field
from .finespace import _hermite_shapes, build_fine_space
from .quadrature import gauss_rule

GAUSS_PER_AXIS = 5


def _monomials_1d(s, center):
    return [(lambda x, j=j: (x - center) ** j) for j in range(s)]


def _monomials_2d(s, center):
    if s == 1:
        return [lambda x, y: np.ones_like(x)]
    if s == 2:
        return [lambda x, y: np.ones_like(x),
                lambda x, y: x - center[0],
                lambda x, y: y - center[1]]
    raise ValueError("monomial degree s=%d not supported in 2D" % (s,))


def _generalized_max_eig(M, S):
    try:
        vals = sla.eigh(M, S, eigvals_only=True)
    except sla.LinAlgError as exc:
        raise NumericalFailure("generalized eigenproblem failed: %s" % exc) from exc
    return float(vals[-1])


# ----------------------------------------------------------------------
# 1D interval
# ----------------------------------------------------------------------

def interval_ms(k, s, length, n_cells, center=0.0):
    """(M, S) matrices on the interval [center - length/2, center + length/2]."""
    lo = center - 0.5 * length
    h = length / n_cells
    gx, gw = gauss_rule(GAUSS_PER_AXIS)
    w = gw * h
    cells = np.arange(n_cells)
    pts = lo + (cells[:, None] + gx[None, :]) * h
    monos = _monomials_1d(s, center)
    pvals = np.stack([p(pts) for p in monos])            # (s, nel, nq)

    if k == 1:
        grads = np.vstack([-np.ones_like(gx), np.ones_like(gx)]) / h
        vals = np.vstack([1.0 - gx, gx])
        local_A = np.einsum("q,iq,jq->ij", w, grads, grads)
        element_dofs = np.column_stack([cells, cells + 1])
        full = n_cells + 1
        drop = [0, full - 1]
    elif k == 2:
        vals, curv = _hermite_shapes(gx, h)
        local_A = np.einsum("q,iq,jq->ij", w, curv, curv)
        element_dofs = np.column_stack([2 * cells, 2 * cells + 1,
                                        2 * cells + 2, 2 * cells + 3])
        full = 2 * (n_cells + 1)
        drop = [0, 1, full - 2, full - 1]
    else:
        raise ValueError("interval shape supports k in {1, 2}, got %d" % (k,))

    keep = np.ones(full, dtype=bool)
    keep[drop] = False
    new_id = np.full(full, -1, dtype=int)
    new_id[keep] = np.arange(keep.sum())
    dofs = new_id[element_dofs]
    ndof = int(keep.sum())
    ldof = dofs.shape[1]
    rows = np.repeat(dofs[:, :, None], ldof, axis=2)
    cols = np.repeat(dofs[:, None, :], ldof, axis=1)
    valid = (rows >= 0) & (cols >= 0)
    data = np.tile(local_A, (n_cells, 1, 1))
    A = sparse.coo_matrix((data[valid], (rows[valid], cols[valid])),
                          shape=(ndof, ndof)).tocsc()

    loads = np.empty((s, ndof))
    for a, pv in enumerate(pvals):
        contrib = (pv * w[None, :]) @ vals.T
        b = np.zeros(ndof)
        ok = dofs >= 0
        np.add.at(b, dofs[ok], contrib[ok])
        loads[a] = b
    lu = spla.splu(A)
    sols = np.stack([lu.solve(b) for b in loads])
    S = loads @ sols.T
    M = np.einsum("aeq,beq,q->ab", pvals, pvals, w)
    return 0.5 * (M + M.T), 0.5 * (S + S.T)


# ----------------------------------------------------------------------
# 2D polygonal disc
# ----------------------------------------------------------------------

def disc_mesh(radius, n_rings, n_sectors):
    """Boundary-fitted polygonal triangulation of a disc around the origin."""
    angles = 2.0 * np.pi * np.arange(n_sectors) / n_sectors
    nodes = [np.zeros((1, 2))]
    for i in range(1, n_rings + 1):
        r = radius * i / n_rings
        nodes.append(np.column_stack([r * np.cos(angles), r * np.sin(angles)]))
    nodes = np.vstack(nodes)

    def ring_id(i, j):
        return 1 + (i - 1) * n_sectors + (j % n_sectors)

    tris = []
    for j in range(n_sectors):
        tris.append([0, ring_id(1, j), ring_id(1, j + 1)])
    for i in range(1, n_rings):
        for j in range(n_sectors):
            a, b = ring_id(i, j), ring_id(i, j + 1)
            c, d = ring_id(i + 1, j), ring_id(i + 1, j + 1)
            tris.append([a, c, d])
            tris.append([a, d, b])
    boundary = np.zeros(len(nodes), dtype=bool)
    boundary[ring_id(n_rings, 0):] = True
    return nodes, np.array(tris, dtype=int), boundary


def disc_ms(s, diameter, n_rings=96, n_sectors=192):
    """(M, S) for -Laplace on a polygonal disc with Dirichlet boundary."""
    nodes, tris, boundary = disc_mesh(0.5 * diameter, n_rings, n_sectors)
    P = nodes[tris]                                       # (T, 3, 2)
    e1 = P[:, 1] - P[:, 0]
    e2 = P[:, 2] - P[:, 0]
    area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    bvec = np.stack([P[:, 1, 1] - P[:, 2, 1],
                     P[:, 2, 1] - P[:, 0, 1],
                     P[:, 0, 1] - P[:, 1, 1]], axis=1)
    cvec = np.stack([P[:, 2, 0] - P[:, 1, 0],
                     P[:, 0, 0] - P[:, 2, 0],
                     P[:, 1, 0] - P[:, 0, 0]], axis=1)
    local = (np.einsum("ti,tj->tij", bvec, bvec)
             + np.einsum("ti,tj->tij", cvec, cvec)) / (4.0 * area)[:, None, None]

    new_id = np.full(len(nodes), -1, dtype=int)
    new_id[~boundary] = np.arange((~boundary).sum())
    dofs = new_id[tris]
    ndof = int((~boundary).sum())
    rows = np.repeat(dofs[:, :, None], 3, axis=2)
    cols = np.repeat(dofs[:, None, :], 3, axis=1)
    valid = (rows >= 0) & (cols >= 0)
    A = sparse.coo_matrix((local[valid], (rows[valid], cols[valid])),
                          shape=(ndof, ndof)).tocsc()

    # edge-midpoint rule (exact for quadratics) for loads and monomial masses
    mids = 0.5 * (P[:, [1, 2, 0]] + P[:, [2, 0, 1]])      # midpoint opposite vertex i
    monos = _monomials_2d(s, (0.0, 0.0))
    pmid = np.stack([p(mids[:, :, 0], mids[:, :, 1]) for p in monos])  # (n_mono, T, 3)
    n_mono = len(monos)
    loads = np.empty((n_mono, ndof))
    # hat_i vanishes at its opposite midpoint and equals 1/2 at the other two
    hat = 0.5 * (np.ones((3, 3)) - np.eye(3))
    for a in range(n_mono):
        contrib = (area[:, None] / 3.0) * (pmid[a] @ hat.T)
        b = np.zeros(ndof)
        ok = dofs >= 0
        np.add.at(b, dofs[ok], contrib[ok])
        loads[a] = b
    lu = spla.splu(A)
    sols = np.stack([lu.solve(b) for b in loads])
    S = loads @ sols.T
    M = np.einsum("atm,btm,t->ab", pmid, pmid, area / 3.0)
    return 0.5 * (M + M.T), 0.5 * (S + S.T)


# ----------------------------------------------------------------------
# unit square cell
# ----------------------------------------------------------------------

def square_ms(k, s, n_cells):
    """(M, S) on the unit square: Q1 Laplacian (k=1) or clamped splines (k=2)."""
    if k == 1:
        return _square_q1_ms(s, n_cells)
    if k == 2:
        return _square_spline_ms(s, n_cells)
    raise ValueError("square cell supports k in {1, 2}, got %d" % (k,))


def _square_q1_ms(s, n_cells):
    h = 1.0 / n_cells
    gx, gw = gauss_rule(GAUSS_PER_AXIS)
    nq = len(gx)
    xg = np.repeat(gx, nq)
    yg = np.tile(gx, nq)
    w = np.outer(gw, gw).ravel() * h * h
    shape = np.stack([(1 - xg) * (1 - yg), xg * (1 - yg),
                      (1 - xg) * yg, xg * yg])
    dx = np.stack([-(1 - yg), (1 - yg), -yg, yg]) / h
    dy = np.stack([-(1 - xg), -xg, (1 - xg), xg]) / h
    local = (np.einsum("q,iq,jq->ij", w, dx, dx)
             + np.einsum("q,iq,jq->ij", w, dy, dy))

    n_nodes = n_cells + 1
    cx, cy = np.meshgrid(np.arange(n_cells), np.arange(n_cells), indexing="ij")
    cx, cy = cx.ravel(), cy.ravel()
    node = lambda ix, iy: ix * n_nodes + iy
    element_nodes = np.column_stack([node(cx, cy), node(cx + 1, cy),
                                     node(cx, cy + 1), node(cx + 1, cy + 1)])
    ix, iy = np.meshgrid(np.arange(n_nodes), np.arange(n_nodes), indexing="ij")
    interior = ((ix > 0) & (ix < n_cells) & (iy > 0) & (iy < n_cells)).ravel()
    new_id = np.full(n_nodes * n_nodes, -1, dtype=int)
    new_id[interior] = np.arange(interior.sum())
    dofs = new_id[element_nodes]
    ndof = int(interior.sum())
    rows = np.repeat(dofs[:, :, None], 4, axis=2)
    cols = np.repeat(dofs[:, None, :], 4, axis=1)
    valid = (rows >= 0) & (cols >= 0)
    data = np.tile(local, (len(cx), 1, 1))
    A = sparse.coo_matrix((data[valid], (rows[valid], cols[valid])),
                          shape=(ndof, ndof)).tocsc()

    pts_x = (cx[:, None] + xg[None, :]) * h
    pts_y = (cy[:, None] + yg[None, :]) * h
    monos = _monomials_2d(s, (0.5, 0.5))
    pvals = np.stack([p(pts_x, pts_y) for p in monos])
    n_mono = len(monos)
    loads = np.empty((n_mono, ndof))
    for a in range(n_mono):
        contrib = (pvals[a] * w[None, :]) @ shape.T
        b = np.zeros(ndof)
        ok = dofs >= 0
        np.add.at(b, dofs[ok], contrib[ok])
        loads[a] = b
    lu = spla.splu(A)
    sols = np.stack([lu.solve(b) for b in loads])
    S = loads @ sols.T
    M = np.einsum("aeq,beq,q->ab", pvals, pvals, w)
    return 0.5 * (M + M.T), 0.5 * (S + S.T)


def _square_spline_ms(s, n_cells):
    # energy sum_{|sigma|=2} int D^sigma u D^sigma v: cross coefficient 1/2
    # against the plate convention of weighting the mixed term by 2.
    fs = build_fine_space("plate-2d-order4",
                          constant_field(1.0, dim=2, cross=0.5), n_cells)
    monos = _monomials_2d(s, (0.5, 0.5))
    n_mono = 1 if s == 1 else 3
    loads = np.empty((n_mono, fs.ndof))
    pvals = []
    for a in range(n_mono):
        loads[a] = fs.load_vector(monos[a])
        pvals.append(monos[a](fs.gauss_points[:, :, 0], fs.gauss_points[:, :, 1]))
    pvals = np.stack(pvals)
    lu = spla.splu(fs.A.tocsc())
    sols = np.stack([lu.solve(b) for b in loads])
    S = loads @ sols.T
    M = np.einsum("aeq,beq,q->ab", pvals, pvals, fs.gauss_weights)
    return 0.5 * (M + M.T), 0.5 * (S + S.T)
