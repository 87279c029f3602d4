"""Energy-minimizing basis functions on a fine space.

Each member minimizes the energy quadratic form subject to unit/zero moment
constraints against the patch polynomials. Global members are solved with
one sparse factorization of the energy matrix and a dense Schur complement
on the constraints; localized members restrict the problem to the DOFs whose
basis support lies inside an oversampling region, which imposes the zero
Dirichlet data on the region's internal boundary while DOFs on the domain
boundary keep the original boundary condition.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .errors import (DegenerateConstraints, FitUndefined,
                     InfeasibleLocalization, NumericalFailure)
from .finespace import assemble_constraint_matrix, element_patch_map
from .fitting import linear_fit
from .mesh import oversampling_region

CONSTRAINT_TOL = 1e-9


@dataclass
class BasisFamily:
    finespace: object
    polybasis: object
    vectors: np.ndarray          # (ndof, m*Q), member (i, q) in column i*Q + q
    locality: str                # "global" or "localized"
    radius: float = None
    schur: np.ndarray = None     # constraint Schur complement (global family)
    constraint_residual: float = 0.0

    @property
    def n_members(self):
        return self.vectors.shape[1]

    def member(self, i, q=0):
        return self.vectors[:, i * self.polybasis.Q + q]

    def energies(self):
        A = self.finespace.A
        return np.einsum("dj,dj->j", self.vectors, A @ self.vectors)

    def stiffness(self):
        """Energy Gram matrix of the family (coarse stiffness)."""
        A = self.finespace.A
        L = self.vectors.T @ (A @ self.vectors)
        return 0.5 * (L + L.T)


def _max_constraint_residual(C, vectors, target=None):
    res = C.T @ vectors
    if target is None:
        target = np.eye(vectors.shape[1])
    return float(np.abs(res - target).max())


def solve_global_basis(fs, polybasis, C=None):
    """Solve every member of the global energy-minimizing family.

    Factors the energy matrix once, forms the constraint Schur complement
    S = C^T A^{-1} C, and returns the family together with S: the energy Gram
    matrix of the members equals S^{-1}.
    """
    if C is None:
        C = assemble_constraint_matrix(fs, polybasis)
    try:
        lu = spla.splu(fs.A.tocsc())
        Y = lu.solve(C.toarray())
    except RuntimeError as exc:
        raise NumericalFailure("energy matrix factorization failed: %s" % exc) from exc
    S = C.T @ Y
    S = 0.5 * (S + S.T)
    try:
        cho = sla.cho_factor(S)
    except sla.LinAlgError as exc:
        raise DegenerateConstraints(
            "constraint matrix is rank deficient (Schur complement not SPD)") from exc
    vectors = sla.cho_solve(cho, Y.T).T
    # iterative refinement of the constraint defect; needed on the
    # ill-conditioned fourth-order systems
    target = np.eye(vectors.shape[1])
    resid = _max_constraint_residual(C, vectors, target)
    for _ in range(4):
        if resid <= 0.01 * CONSTRAINT_TOL:
            break
        defect = target - C.T @ vectors
        vectors = vectors + Y @ sla.cho_solve(cho, defect)
        resid = _max_constraint_residual(C, vectors, target)
    if resid > CONSTRAINT_TOL:
        raise NumericalFailure(
            "constraint residual %.3e exceeds %.1e" % (resid, CONSTRAINT_TOL))
    return BasisFamily(fs, polybasis, vectors, "global", schur=S,
                       constraint_residual=resid)


@dataclass
class LocalizationContext:
    """Shared geometry for localized solves on one (fine space, partition) pair."""

    fs: object
    polybasis: object
    C: sparse.csr_matrix
    patch_of_element: np.ndarray
    dof_degree: np.ndarray

    @classmethod
    def build(cls, fs, polybasis, C=None):
        if C is None:
            C = assemble_constraint_matrix(fs, polybasis)
        return cls(fs, polybasis, C.tocsc(),
                   element_patch_map(fs, polybasis.partition),
                   fs.dof_adjacency_counts())

    def kept_dofs(self, region_mask):
        """DOFs whose every adjacent element lies inside the region."""
        fs = self.fs
        inside = region_mask[self.patch_of_element]
        ids = fs.element_dofs[inside]
        ids = ids[ids >= 0]
        n_in = np.bincount(ids, minlength=fs.ndof)
        return np.flatnonzero((n_in > 0) & (n_in == self.dof_degree))


def solve_localized_basis(fs, polybasis, i, q, r, context=None):
    """One localized member: support restricted to the oversampling region."""
    if context is None:
        context = LocalizationContext.build(fs, polybasis)
    return _solve_localized_member(context, i, q, r)


def _solve_localized_member(ctx, i, q, r):
    part = ctx.polybasis.partition
    Q = ctx.polybasis.Q
    region = oversampling_region(part, i, r)
    mask = region.mask()
    kept = ctx.kept_dofs(mask)
    if len(kept) == 0:
        raise InfeasibleLocalization(
            "no interior DOFs in the region around patch %d at r=%.4g; "
            "increase the radius" % (i, r))
    cols = (region.indices[:, None] * Q + np.arange(Q)[None, :]).ravel()
    local_col = np.flatnonzero(cols == i * Q + q)[0]
    A_loc = ctx.fs.A[kept][:, kept].tocsc()
    C_loc = ctx.C[kept][:, cols].toarray()
    try:
        lu = spla.splu(A_loc)
        Y = lu.solve(C_loc)
    except RuntimeError as exc:
        raise NumericalFailure("local factorization failed: %s" % exc) from exc
    S = C_loc.T @ Y
    S = 0.5 * (S + S.T)
    rhs = np.zeros(len(cols))
    rhs[local_col] = 1.0
    try:
        cho = sla.cho_factor(S)
        mu = sla.cho_solve(cho, rhs)
    except sla.LinAlgError as exc:
        raise InfeasibleLocalization(
            "region around patch %d at r=%.4g cannot satisfy the constraints; "
            "increase the radius" % (i, r)) from exc
    psi_local = Y @ mu
    resid = float(np.abs(C_loc.T @ psi_local - rhs).max())
    for _ in range(4):
        if resid <= 0.01 * CONSTRAINT_TOL:
            break
        defect = rhs - C_loc.T @ psi_local
        psi_local = psi_local + Y @ sla.cho_solve(cho, defect)
        resid = float(np.abs(C_loc.T @ psi_local - rhs).max())
    if resid > CONSTRAINT_TOL:
        raise InfeasibleLocalization(
            "constraint residual %.3e in the region around patch %d at r=%.4g; "
            "increase the radius" % (resid, i, r))
    full = np.zeros(ctx.fs.ndof)
    full[kept] = psi_local
    return full


def solve_localized_family(fs, polybasis, r, context=None, threads=1):
    """All m*Q localized members at a common radius (members are decoupled)."""
    if context is None:
        context = LocalizationContext.build(fs, polybasis)
    part = polybasis.partition
    Q = polybasis.Q
    pairs = [(i, q) for i in range(part.m) for q in range(Q)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            columns = list(pool.map(
                lambda iq: _solve_localized_member(context, iq[0], iq[1], r), pairs))
    else:
        columns = [_solve_localized_member(context, i, q, r) for i, q in pairs]
    vectors = np.column_stack(columns)
    resid = _max_constraint_residual(context.C, vectors)
    return BasisFamily(fs, polybasis, vectors, "localized", radius=r,
                       constraint_residual=resid)


def localization_error(fs, psi, psi_loc):
    """Energy distance between a global member and its localized version.

    Returns (direct, via_energies): the A-norm of the difference and
    sqrt(|psi_loc|_A^2 - |psi|_A^2). The two agree because the difference is
    A-orthogonal to the global member.
    """
    diff = psi_loc - psi
    direct = math.sqrt(max(float(diff @ (fs.A @ diff)), 0.0))
    e_loc = float(psi_loc @ (fs.A @ psi_loc))
    e_glob = float(psi @ (fs.A @ psi))
    radicand = e_loc - e_glob
    scale = max(e_glob, 1e-300)
    if radicand < -1e-10 * scale:
        raise NumericalFailure(
            "localized energy below global energy (%.3e < %.3e): solver inconsistency"
            % (e_loc, e_glob))
    if abs(radicand) < 8 * np.finfo(float).eps * scale:
        radicand = 0.0   # below evaluation roundoff of the quadratic forms
    return direct, math.sqrt(max(radicand, 0.0))


def project_onto_family(family, psi_tilde, C=None):
    """Representer of psi_tilde in the family: sum_j w_j psi_j with w = C^T psi_tilde."""
    if C is None:
        C = assemble_constraint_matrix(family.finespace, family.polybasis)
    w = C.T @ psi_tilde
    return family.vectors @ w


@dataclass
class DecayProfile:
    center: int
    radii: np.ndarray
    tails: np.ndarray            # energy outside each ball radius
    decay_length: float          # fitted l in tail ~ exp(-r / (l h))
    r_squared: float
    total_energy: float

    def fit_points(self):
        keep = self.tails > 1e-14
        return self.radii[keep], self.tails[keep]


def decay_profile(fs, psi, partition, i, radii=None):
    """Tail energies of a member outside growing balls around its patch.

    An element contributes to the tail at radius r iff its closed box lies
    outside the open ball B(x_i, r); boundary energy terms were attributed to
    their boundary elements at assembly time. Fits log(tail) against r to
    extract the decay length l (in units of the patch size h).

    Default radii are multiples of the patch size for as long as the ball
    stays inside the domain: once the ball sticks out, the remaining tail
    region hugs the boundary and (for essential boundary conditions) drops
    much faster than the interior decay the fit is meant to measure. Pass
    radii explicitly to inspect that regime.
    """
    center = partition.centroids[i]
    gap = np.maximum(fs.element_lo - center, center - fs.element_hi)
    dist = np.linalg.norm(np.maximum(gap, 0.0), axis=1)
    energies = fs.element_energies(psi)
    if radii is None:
        r_inside = float(min(center.min(), (1.0 - center).min()))
        radii = np.arange(0.0, r_inside + 0.5 * partition.h, partition.h)
    radii = np.asarray(radii, dtype=float)
    order = np.argsort(dist)
    sorted_dist = dist[order]
    suffix = np.concatenate([np.cumsum(energies[order][::-1])[::-1], [0.0]])
    pos = np.searchsorted(sorted_dist, radii, side="left")
    tails = suffix[pos]
    if not np.any(tails > 0):
        raise FitUndefined("all tail energies vanish for patch %d" % (i,))
    keep = tails > 1e-14
    if keep.sum() < 2:
        raise FitUndefined("fewer than 2 usable tail energies for patch %d" % (i,))
    slope, _, r2 = linear_fit(radii[keep], np.log(tails[keep]))
    decay_length = math.inf if slope >= 0 else -1.0 / (slope * partition.h)
    return DecayProfile(center=i, radii=radii, tails=tails,
                        decay_length=decay_length, r_squared=r2,
                        total_energy=float(tails[0]))
