import numpy as np
import pytest

from opcomp.mesh import build_uniform_partition
from opcomp.polyspace import (local_poly_basis, patch_gauss_points,
                              poly_space_dim, project_onto_poly,
                              projection_error_rate,
                              projection_seminorm_error)


@pytest.mark.parametrize("dim,k,expected", [(1, 1, 1), (1, 2, 2), (2, 2, 3),
                                            (1, 3, 3), (2, 3, 6)])
def test_space_dimension(dim, k, expected):
    assert poly_space_dim(k, dim) == expected
    part = build_uniform_partition(dim, 4)
    assert local_poly_basis(part, k).Q == expected


@pytest.mark.parametrize("dim,k", [(1, 1), (1, 3), (2, 2)])
def test_patch_gram_identity(dim, k):
    part = build_uniform_partition(dim, 8 if dim == 1 else 4)
    basis = local_poly_basis(part, k)
    for i in [0, part.m // 2, part.m - 1]:
        pts, w = patch_gauss_points(part, i, 6)
        phi = basis.eval_patch(i, pts)
        gram = (phi * w) @ phi.T
        target = float(part.volumes[i]) * np.eye(basis.Q)
        assert np.abs(gram - target).max() <= 1e-10 * float(part.volumes[i])


def test_invalid_half_order():
    part = build_uniform_partition(1, 4)
    for bad in (0, -1, 4, 1.5):
        with pytest.raises(ValueError):
            local_poly_basis(part, bad)


def _member_callable(basis, i, q):
    part = basis.partition

    def u(x):
        x = np.asarray(x, dtype=float)
        inside = (x >= part.lows[i, 0]) & (x <= part.highs[i, 0])
        vals = basis.eval_patch(i, x[:, None])[q]
        return np.where(inside, vals, 0.0)

    return u


def test_projection_of_member_is_unit_vector():
    part = build_uniform_partition(1, 8)
    basis = local_poly_basis(part, 2)
    coefs = project_onto_poly(_member_callable(basis, 5, 1), basis)
    expected = np.zeros((8, 2))
    expected[5, 1] = 1.0
    assert np.abs(coefs - expected).max() < 1e-12


def test_constants_reproduced():
    part = build_uniform_partition(1, 8)
    basis = local_poly_basis(part, 1)
    coefs = project_onto_poly(lambda x: np.ones_like(x), basis)
    assert np.abs(coefs - 1.0).max() < 1e-13


def test_idempotence():
    part = build_uniform_partition(1, 8)
    basis = local_poly_basis(part, 2)
    first = project_onto_poly(lambda x: np.sin(2 * np.pi * x), basis)

    def proj_callable(x):
        x = np.asarray(x, dtype=float)
        patch = np.minimum((x * part.m).astype(int), part.m - 1)
        out = np.empty_like(x)
        for i in range(part.m):
            sel = patch == i
            if sel.any():
                out[sel] = first[i] @ basis.eval_patch(i, x[sel, None])
        return out

    second = project_onto_poly(proj_callable, basis)
    assert np.abs(second - first).max() < 1e-12


def test_degree_reproduction_global_polynomial():
    part = build_uniform_partition(1, 8)
    basis = local_poly_basis(part, 2)
    err = projection_seminorm_error(lambda x: 2.0 - 3.0 * x, basis, p=0)
    assert err <= 1e-10
    part2 = build_uniform_partition(2, 4)
    basis2 = local_poly_basis(part2, 2)
    err2 = projection_seminorm_error(lambda x, y: 1.0 + x - 2.0 * y, basis2, p=0)
    assert err2 <= 1e-10


def test_patch_means_against_quadrature_oracle():
    # independent oracle: 50-point Gauss per patch for the average of sin(pi x)
    part = build_uniform_partition(1, 8)
    basis = local_poly_basis(part, 1)
    coefs = project_onto_poly(lambda x: np.sin(np.pi * x), basis)
    gx, gw = np.polynomial.legendre.leggauss(50)
    for i in range(8):
        lo, hi = part.lows[i, 0], part.highs[i, 0]
        nodes = 0.5 * (hi - lo) * (gx + 1) + lo
        mean = 0.5 * np.sum(gw * np.sin(np.pi * nodes))  # (1/|tau|) * integral
        assert coefs[i, 0] == pytest.approx(mean, abs=1e-13)


def test_projection_exact_on_fine_space_argument():
    from opcomp.finespace import build_fine_space

    fs = build_fine_space("robin-1d-order2", None, 64)
    part = build_uniform_partition(1, 8)
    basis = local_poly_basis(part, 1)
    vec = np.linspace(0.0, 1.0, fs.ndof) ** 2
    coefs = project_onto_poly((fs, vec), basis)
    assert coefs.shape == (8, 1)
    part_bad = build_uniform_partition(1, 7)
    with pytest.raises(ValueError):
        project_onto_poly((fs, vec), local_poly_basis(part_bad, 1))


@pytest.mark.parametrize("k,p,expected", [(1, 0, 1.0), (2, 0, 2.0), (2, 1, 1.0)])
def test_projection_rates(k, p, expected):
    du = (lambda x: 2 * np.pi * np.cos(2 * np.pi * x)) if p == 1 else None
    slope, points, _ = projection_error_rate(
        k, p, lambda x: np.sin(2 * np.pi * x), [8, 16, 32, 64], du=du)
    assert abs(slope - expected) <= 0.2
    assert all(e > 0 for _, e in points)


def test_rate_errors():
    u = lambda x: np.sin(2 * np.pi * x)
    with pytest.raises(ValueError):
        projection_error_rate(1, 0, u, [8, 16])
    part = build_uniform_partition(1, 8)
    basis = local_poly_basis(part, 2)
    with pytest.raises(ValueError):
        projection_seminorm_error(u, basis, p=2, du=u)
    with pytest.raises(ValueError):
        projection_seminorm_error(u, basis, p=1)  # missing derivative
