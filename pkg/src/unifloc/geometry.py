"""RIS element layout and coordinate conventions.

The RIS lies in the Y-Z plane with its centre at the origin. Elements are
enumerated row-major: ``n = row * cols + col``, so ``y`` varies fastest.
Rows run along ``z`` and columns along ``y``.

Spherical coordinates follow the physics convention::

    x = R sin(theta) cos(phi)
    y = R sin(theta) sin(phi)
    z = R cos(theta)

Users live in the front half-space ``x >= 0``, i.e. ``theta in [0, pi]`` and
``phi in [-pi/2, pi/2]``. Points mirrored through the RIS plane produce
identical channels, so the back half-space is never modelled.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

PHI_MIN = -np.pi / 2
PHI_MAX = np.pi / 2


class GeometryError(ValueError):
    """Raised for invalid geometry inputs or degenerate distances."""


class CartesianPoint(NamedTuple):
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class SphericalLocation:
    """User position ``(R, theta, phi)`` about the RIS centre."""

    R: float
    theta: float
    phi: float

    def __post_init__(self):
        if not (np.isfinite(self.R) and self.R > 0):
            raise GeometryError(f"range must be positive, got {self.R}")
        if not (0.0 <= self.theta <= np.pi):
            raise GeometryError(f"polar angle {self.theta} outside [0, pi]")
        if not (PHI_MIN <= self.phi <= PHI_MAX):
            raise GeometryError(f"azimuth {self.phi} outside [-pi/2, pi/2]")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.R, self.theta, self.phi)


@dataclass(frozen=True)
class RisGeometry:
    """Uniform ``rows x cols`` planar RIS with square element spacing.

    Parameters
    ----------
    rows : int
        Number of element rows ``L`` (along z).
    cols : int
        Number of element columns ``M`` (along y).
    spacing : float
        Element spacing in metres.
    wavelength : float
        Carrier wavelength in metres.
    """

    rows: int
    cols: int
    spacing: float
    wavelength: float

    def __post_init__(self):
        if int(self.rows) != self.rows or self.rows < 1:
            raise GeometryError(f"rows must be a positive integer, got {self.rows}")
        if int(self.cols) != self.cols or self.cols < 1:
            raise GeometryError(f"cols must be a positive integer, got {self.cols}")
        if not self.spacing > 0:
            raise GeometryError(f"spacing must be positive, got {self.spacing}")
        if not self.wavelength > 0:
            raise GeometryError(f"wavelength must be positive, got {self.wavelength}")

    @classmethod
    def square(cls, side: int, frequency: float = 28e9, spacing_wavelengths: float = 0.5):
        """``side x side`` RIS at ``frequency`` with spacing given in wavelengths."""
        wavelength = SPEED_OF_LIGHT / frequency
        return cls(side, side, spacing_wavelengths * wavelength, wavelength)

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols

    @cached_property
    def y(self) -> np.ndarray:
        col = np.tile(np.arange(self.cols), self.rows)
        y = (col - (self.cols - 1) / 2.0) * self.spacing
        y.setflags(write=False)
        return y

    @cached_property
    def z(self) -> np.ndarray:
        row = np.repeat(np.arange(self.rows), self.cols)
        z = (row - (self.rows - 1) / 2.0) * self.spacing
        z.setflags(write=False)
        return z

    @property
    def max_radius(self) -> float:
        """Largest element distance from the RIS centre."""
        return float(np.sqrt(np.max(self.y**2 + self.z**2)))


def element_position(geom: RisGeometry, n: int) -> CartesianPoint:
    if not 0 <= n < geom.n_elements:
        raise IndexError(f"element index {n} out of range for N={geom.n_elements}")
    return CartesianPoint(0.0, float(geom.y[n]), float(geom.z[n]))


def spherical_to_cartesian(p: SphericalLocation) -> CartesianPoint:
    st = np.sin(p.theta)
    return CartesianPoint(
        p.R * st * np.cos(p.phi), p.R * st * np.sin(p.phi), p.R * np.cos(p.theta)
    )


def cartesian_to_spherical(pt: CartesianPoint) -> SphericalLocation:
    """Inverse of :func:`spherical_to_cartesian` on the front half-space."""
    x, y, z = pt
    if x < 0:
        raise GeometryError("point lies behind the RIS (x < 0)")
    R = float(np.sqrt(x * x + y * y + z * z))
    if R == 0:
        raise GeometryError("origin has no spherical representation")
    theta = float(np.arccos(np.clip(z / R, -1.0, 1.0)))
    phi = float(np.arctan2(y, x)) if (x or y) else 0.0
    return SphericalLocation(R, theta, phi)


def distances(geom: RisGeometry, R, theta, phi) -> np.ndarray:
    """Vectorised user-to-element distances.

    ``R``, ``theta`` and ``phi`` broadcast against each other; the element
    axis is appended last, so scalars give shape ``(N,)`` and arrays of shape
    ``s`` give ``s + (N,)``.
    """
    R = np.asarray(R, dtype=float)[..., None]
    theta = np.asarray(theta, dtype=float)[..., None]
    phi = np.asarray(phi, dtype=float)[..., None]
    st = np.sin(theta)
    x = R * st * np.cos(phi)
    y = R * st * np.sin(phi)
    z = R * np.cos(theta)
    return np.sqrt(x * x + (y - geom.y) ** 2 + (z - geom.z) ** 2)


def distance_to_element(geom: RisGeometry, p: SphericalLocation, n: int) -> float:
    e = element_position(geom, n)
    u = spherical_to_cartesian(p)
    d = float(np.sqrt((u.x - e.x) ** 2 + (u.y - e.y) ** 2 + (u.z - e.z) ** 2))
    # coincidence is judged relative to the coordinates' magnitude
    if d <= 1e-12 * max(p.R, abs(e.y) + abs(e.z)):
        raise GeometryError(f"user coincides with element {n}")
    return d
