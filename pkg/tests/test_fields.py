import numpy as np
import pytest

from opcomp.fields import (CoefficientField, check_strong_ellipticity,
                           constant_field, sample_flexural_coefficient,
                           sample_plate_coefficients)


def test_zero_modes_give_unit_coefficient():
    field = CoefficientField(kind="flexural-1d", k_modes=5,
                             zeta1=np.zeros(5), zeta2=np.zeros(5))
    x = np.linspace(0, 1, 101)
    assert np.all(field.eval_a(x) == 1.0)


def test_flexural_bounds():
    x = np.linspace(0, 1, 10_000)
    for seed in range(5):
        a = sample_flexural_coefficient(seed).eval_a(x)
        assert a.min() >= 0.5
        assert a.max() <= 1.5


def test_flexural_determinism_and_draw_order():
    f1 = sample_flexural_coefficient(42)
    f2 = sample_flexural_coefficient(42)
    assert f1.eval_a(np.array([0.5]))[0] == f2.eval_a(np.array([0.5]))[0]
    assert np.array_equal(f1.zeta1, f2.zeta1)
    # the sine block is drawn before the cosine block
    rng = np.random.default_rng(42)
    assert np.array_equal(f1.zeta1, rng.uniform(-0.5, 0.5, 40))
    assert np.array_equal(f1.zeta2, rng.uniform(-0.5, 0.5, 40))


def test_plate_symmetric_leading_coefficients():
    field = sample_plate_coefficients(9)
    x = np.linspace(0.01, 0.99, 57)
    xg, yg = np.meshgrid(x, x, indexing="ij")
    a20, a02, _ = field.eval_plate(xg, yg)
    assert np.array_equal(a20, a02)


def test_plate_zero_modes_cross_term():
    field = CoefficientField(kind="plate-2d", k_modes=3, zeta1=np.zeros(3),
                             zeta2=np.zeros(3), dim=2)
    _, _, a11 = field.eval_plate(np.array([0.3]), np.array([0.8]))
    assert a11[0] == 1.0


def test_plate_leading_coefficient_positive_on_grid():
    field = sample_plate_coefficients(4)
    g = (np.arange(256) + 0.5) / 256
    xg, yg = np.meshgrid(g, g, indexing="ij")
    a20, _, _ = field.eval_plate(xg, yg)
    assert a20.min() > 0


def test_ellipticity_constant():
    assert check_strong_ellipticity(constant_field(1.0)) == (1.0, 1.0)


def test_ellipticity_plate_cross_weight():
    field = CoefficientField(kind="plate-2d", k_modes=3, zeta1=np.zeros(3),
                             zeta2=np.zeros(3), dim=2)
    _, theta_max = check_strong_ellipticity(field, 64)
    assert theta_max >= 2.0


def test_ellipticity_flexural_seed42():
    theta_min, theta_max = check_strong_ellipticity(
        sample_flexural_coefficient(42), 10_000)
    assert 0.5 < theta_min < 1.0
    assert 1.0 < theta_max < 1.5


def test_ellipticity_positive_over_seeds():
    for seed in range(4):
        tmin, _ = check_strong_ellipticity(sample_flexural_coefficient(seed))
        assert tmin > 0
        tmin2, _ = check_strong_ellipticity(sample_plate_coefficients(seed))
        assert tmin2 > 0


def test_invalid_mode_count():
    with pytest.raises(ValueError):
        sample_flexural_coefficient(0, k_modes=0)
    with pytest.raises(ValueError):
        sample_plate_coefficients(0, k_modes=-1)
