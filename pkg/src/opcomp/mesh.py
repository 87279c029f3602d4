"""Uniform partitions of the unit interval/square and oversampling regions.

Patches are axis-aligned cells indexed 0..m-1 (2D cells are flattened with
the y index fastest). A region around a patch collects every cell whose
closed box overlaps an open ball around the patch centroid with positive
measure, so cells touching the ball only at a point or edge stay out.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Patch:
    index: int
    lo: np.ndarray
    hi: np.ndarray
    centroid: np.ndarray
    volume: float


@dataclass(frozen=True)
class Partition:
    """Regular partition of [0,1]^dim into m_per_axis cells per axis."""

    dim: int
    m_per_axis: int
    h: float
    lows: np.ndarray       # (m, dim)
    highs: np.ndarray      # (m, dim)
    centroids: np.ndarray  # (m, dim)
    volumes: np.ndarray    # (m,)
    delta: float           # inscribed-ball diameter / cell diameter

    @property
    def m(self):
        return self.lows.shape[0]

    def patch(self, i):
        if not 0 <= i < self.m:
            raise ValueError("patch index %d out of range [0, %d)" % (i, self.m))
        return Patch(i, self.lows[i], self.highs[i], self.centroids[i],
                     float(self.volumes[i]))

    @property
    def patches(self):
        return [self.patch(i) for i in range(self.m)]

    def flat_index(self, axis_indices):
        """Flatten per-axis cell indices (1D: (ix,), 2D: (ix, iy))."""
        if self.dim == 1:
            return int(axis_indices[0])
        return int(axis_indices[0]) * self.m_per_axis + int(axis_indices[1])


@dataclass(frozen=True)
class PatchSet:
    """A subset of a partition's patches with its bounding box."""

    partition: Partition
    indices: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __contains__(self, i):
        return bool(np.isin(i, self.indices))

    def __len__(self):
        return len(self.indices)

    def mask(self):
        out = np.zeros(self.partition.m, dtype=bool)
        out[self.indices] = True
        return out


def build_uniform_partition(dim, m_per_axis):
    """Tile [0,1]^dim with m_per_axis^dim identical cells of side 1/m_per_axis."""
    if dim not in (1, 2):
        raise ValueError("dim must be 1 or 2, got %r" % (dim,))
    if int(m_per_axis) != m_per_axis or m_per_axis < 1:
        raise ValueError("m_per_axis must be a positive integer, got %r" % (m_per_axis,))
    m_axis = int(m_per_axis)
    h = 1.0 / m_axis
    edges = np.arange(m_axis + 1) * h
    if dim == 1:
        lows = edges[:-1, None]
        highs = edges[1:, None]
    else:
        ix, iy = np.meshgrid(np.arange(m_axis), np.arange(m_axis), indexing="ij")
        ix = ix.ravel()
        iy = iy.ravel()
        lows = np.column_stack([edges[ix], edges[iy]])
        highs = np.column_stack([edges[ix + 1], edges[iy + 1]])
    centroids = 0.5 * (lows + highs)
    volumes = np.prod(highs - lows, axis=1)
    # side h: inscribed ball diameter h; cell diameter h*sqrt(dim)
    delta = 1.0 / math.sqrt(dim)
    return Partition(dim, m_axis, h, lows, highs, centroids, volumes, delta)


def oversampling_region(partition, i, r):
    """Patches whose closed cell overlaps the open ball B(x_i, r) with positive measure.

    Always contains patch i itself. A cell is included iff the Euclidean
    distance from the centroid x_i to the cell box is strictly below r.
    """
    if not 0 <= i < partition.m:
        raise ValueError("patch index %d out of range [0, %d)" % (i, partition.m))
    if r <= 0:
        raise ValueError("radius must be positive, got %r" % (r,))
    center = partition.centroids[i]
    gap = np.maximum(partition.lows - center, center - partition.highs)
    dist = np.linalg.norm(np.maximum(gap, 0.0), axis=1)
    indices = np.flatnonzero(dist < r)
    return PatchSet(partition, indices,
                    partition.lows[indices].min(axis=0),
                    partition.highs[indices].max(axis=0))


def radius_from_schedule(h, c, schedule):
    """Oversampling radius from the mesh size: c*h (linear) or c*h*log2(1/h)."""
    if h <= 0:
        raise ValueError("mesh size must be positive, got %r" % (h,))
    if c <= 0:
        raise ValueError("schedule factor must be positive, got %r" % (c,))
    if schedule == "linear":
        return c * h
    if schedule == "log2":
        if h >= 1:
            raise ValueError("log2 schedule needs h < 1 (nonpositive radius for h=%r)" % (h,))
        return c * h * math.log2(1.0 / h)
    raise ValueError("unknown schedule %r (expected 'linear' or 'log2')" % (schedule,))
