"""Uniform periodic lattices and their dual frequency grids.

All spatial fields in the library live on the lattice
x_j = -extent + j * dx, j = 0..n-1, dx = 2 * extent / n, understood
periodically with period 2 * extent.  The dual lattice carries the
frequencies 2 pi k / (n dx) in FFT layout.  In dimension d the grid is the
tensor power of the one-dimensional lattice (same extent and n per axis).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SpatialGrid"]


@dataclass(frozen=True)
class SpatialGrid:
    """Periodic lattice on [-extent, extent)^dim with n points per axis."""

    extent: float
    n: int
    dim: int = 1

    def __post_init__(self):
        if self.extent <= 0:
            raise ValueError("extent must be positive")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    @property
    def dx(self) -> float:
        return 2.0 * self.extent / self.n

    @property
    def points(self) -> np.ndarray:
        """Lattice coordinates along one axis."""
        return -self.extent + np.arange(self.n) * self.dx

    @property
    def frequencies(self) -> np.ndarray:
        """Dual frequencies along one axis, FFT layout."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @property
    def nyquist(self) -> float:
        return np.pi / self.dx

    def frequency_mesh(self) -> np.ndarray:
        """Frequency vectors on the tensor lattice, shape (n,)*dim + (dim,)."""
        axes = [self.frequencies] * self.dim
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def cell_volume(self) -> float:
        return self.dx**self.dim
