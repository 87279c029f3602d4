"""Random coefficient fields for the 1D beam and 2D plate problems.

Sampling is deterministic per seed: both mode vectors are drawn i.i.d.
uniform on [-1/2, 1/2], first the sine block then the cosine block.
"""

from dataclasses import dataclass, field

import numpy as np

EPS_1 = 1.0 / 5.0
EPS_2 = 1.0 / 13.0
EPS_3 = 1.0 / 17.0
EPS_4 = 1.0 / 31.0


@dataclass(frozen=True)
class CoefficientField:
    kind: str                  # "constant" | "flexural-1d" | "plate-2d"
    seed: int | None = None
    k_modes: int = 0
    alpha: float = 0.0
    zeta1: np.ndarray = field(default_factory=lambda: np.zeros(0))
    zeta2: np.ndarray = field(default_factory=lambda: np.zeros(0))
    value: float = 1.0
    cross: float = None   # constant plate fields: a_11 override
    dim: int = 1

    def _mode_sum(self, sin_arg, cos_arg):
        ks = np.arange(1, self.k_modes + 1, dtype=float)
        w = ks ** (-self.alpha)
        s = np.sin(np.multiply.outer(sin_arg, ks)) @ (w * self.zeta1)
        c = np.cos(np.multiply.outer(cos_arg, ks)) @ (w * self.zeta2)
        return s + c

    def eval_a(self, x):
        """Scalar coefficient a(x) for 1D problems."""
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.value)
        if self.kind == "flexural-1d":
            return 1.0 + 0.5 * np.sin(self._mode_sum(x, x))
        raise ValueError("field kind %r has no 1D scalar coefficient" % (self.kind,))

    def eval_plate(self, x, y):
        """Coefficients (a_20, a_02, a_11) at points (x, y) for the plate."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "constant":
            a = np.full(np.broadcast(x, y).shape, self.value)
            a11 = a.copy() if self.cross is None else np.full_like(a, self.cross)
            return a, a.copy(), a11
        if self.kind != "plate-2d":
            raise ValueError("field kind %r has no plate coefficients" % (self.kind,))
        a20 = (1.0 / 6.0) * (
            (1.1 + np.sin(2 * np.pi * x / EPS_1)) / (1.1 + np.sin(2 * np.pi * y / EPS_1))
            + (1.1 + np.sin(2 * np.pi * y / EPS_2)) / (1.1 + np.cos(2 * np.pi * x / EPS_2))
            + (1.1 + np.cos(2 * np.pi * x / EPS_3)) / (1.1 + np.sin(2 * np.pi * y / EPS_3))
            + (1.1 + np.sin(2 * np.pi * y / EPS_4)) / (1.1 + np.cos(2 * np.pi * x / EPS_4))
            + np.sin(4.0 * x ** 2 * y ** 2)
            + 1.0
        )
        a11 = 1.0 + 0.5 * np.sin(self._mode_sum(x, y))
        return a20, a20.copy(), a11


def constant_field(value=1.0, dim=1, cross=None):
    return CoefficientField(kind="constant", value=float(value), dim=dim,
                            cross=None if cross is None else float(cross))


def sample_flexural_coefficient(seed, k_modes=40, alpha=0.0):
    """Oscillatory flexural rigidity a(x) = 1 + sin(random trig sum)/2."""
    if k_modes < 1:
        raise ValueError("k_modes must be >= 1, got %r" % (k_modes,))
    rng = np.random.default_rng(seed)
    zeta1 = rng.uniform(-0.5, 0.5, k_modes)
    zeta2 = rng.uniform(-0.5, 0.5, k_modes)
    return CoefficientField(kind="flexural-1d", seed=seed, k_modes=k_modes,
                            alpha=alpha, zeta1=zeta1, zeta2=zeta2, dim=1)


def sample_plate_coefficients(seed, k_modes=20, alpha=0.0):
    """Plate bending coefficients: deterministic a_20 = a_02, random a_11."""
    if k_modes < 1:
        raise ValueError("k_modes must be >= 1, got %r" % (k_modes,))
    rng = np.random.default_rng(seed)
    zeta1 = rng.uniform(-0.5, 0.5, k_modes)
    zeta2 = rng.uniform(-0.5, 0.5, k_modes)
    return CoefficientField(kind="plate-2d", seed=seed, k_modes=k_modes,
                            alpha=alpha, zeta1=zeta1, zeta2=zeta2, dim=2)


def check_strong_ellipticity(field, n_grid=256):
    """Extreme eigenvalues of the leading-order coefficient block on a grid.

    For 1D fields the block is the scalar a(x). For the plate it is the
    diagonal matrix diag(a_20, a_02, 2*a_11) acting on the second-derivative
    vector ordered (dxx, dyy, dxy), so the eigenvalues are the diagonal
    entries themselves. Returns (theta_min, theta_max) over the grid.
    """
    if field.dim == 1 and field.kind in ("constant", "flexural-1d"):
        x = (np.arange(n_grid) + 0.5) / n_grid
        a = field.eval_a(x)
        return float(a.min()), float(a.max())
    x = (np.arange(n_grid) + 0.5) / n_grid
    xg, yg = np.meshgrid(x, x, indexing="ij")
    a20, a02, a11 = field.eval_plate(xg, yg)
    diag = np.stack([a20, a02, 2.0 * a11])
    return float(diag.min()), float(diag.max())
