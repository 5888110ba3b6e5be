"""Hexagonal cellular airspace: cell layout, rotation symmetry, unit conversions.

The airspace is a 19-cell hexagonal packing of circles of radius ``cell_radius``
(default 2,000 m), roughly 20 km across:

* cell 0 is the center cell,
* cells 1-6 form ring 1 (centroid distance ``2r`` from the origin),
* cells 7-18 form ring 2, alternating "corner" cells at distance ``4r`` and
  "edge" cells at distance ``2*sqrt(3)*r``.

Numbering starts at the northernmost cell of each ring and proceeds clockwise.
Ring-1 cells sit at azimuths 0, 60, ..., 300 degrees; ring-2 cells at azimuths
0, 30, ..., 330 degrees (even multiples of 30 are corners, odd are edges).
This orientation is a convention of this package: id-based tie-breaking rules
reference cell numbers, so the numbering must be fixed and documented even
though the lattice itself has six-fold symmetry.

Coordinates are meters east (x) and north (y) from the lattice center.
Altitude is carried in feet; the exact 0.3048 m/ft factor converts at the
configuration and reporting boundaries only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

N_CELLS = 19
RING2_CELLS = tuple(range(7, 19))

M_PER_FT = 0.3048

# Unit steps of the hex lattice, one per 60-degree sector clockwise from north.
# Cube coordinates (a, b, c) with a + b + c = 0; each step moves one cell.
_HEX_DIRS = (
    (0, 1, -1),
    (1, 0, -1),
    (1, -1, 0),
    (0, -1, 1),
    (-1, 0, 1),
    (-1, 1, 0),
)


class GeometryError(ValueError):
    """Raised for out-of-domain cell ids or malformed airspace parameters."""


def ring(cell: int) -> int:
    """Ring index of a cell id: 0 for the center, 1 for ids 1-6, 2 for 7-18."""
    if cell == 0:
        return 0
    if 1 <= cell <= 6:
        return 1
    if 7 <= cell <= 18:
        return 2
    raise GeometryError(f"cell id {cell!r} outside [0, 18]")


def _cube_coords(cell: int) -> tuple[int, int, int]:
    """Cube coordinates of a cell, consistent with the documented numbering."""
    r = ring(cell)
    if r == 0:
        return (0, 0, 0)
    if r == 1:
        return _HEX_DIRS[cell - 1]
    p = cell - 7  # position around ring 2, 30-degree steps clockwise
    if p % 2 == 0:
        a, b, c = _HEX_DIRS[p // 2]
        return (2 * a, 2 * b, 2 * c)
    u = _HEX_DIRS[(p - 1) // 2]
    v = _HEX_DIRS[((p - 1) // 2 + 1) % 6]
    return (u[0] + v[0], u[1] + v[1], u[2] + v[2])


def hex_distance(cell_a: int, cell_b: int) -> int:
    """Graph distance between two cells on the hex lattice (adjacent = 1)."""
    a = _cube_coords(cell_a)
    b = _cube_coords(cell_b)
    return (abs(a[0] - b[0]) + abs(a[1] - b[1]) + abs(a[2] - b[2])) // 2


@dataclass(frozen=True)
class Airspace:
    """Cell geometry for one scale of the lattice.

    ``cell_radius`` is in meters. Centroids are derived, not stored, so two
    airspaces with equal radius are interchangeable.
    """

    cell_radius: float = 2000.0
    _centroids: dict[int, tuple[float, float]] = field(
        default_factory=dict, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        if not (self.cell_radius > 0.0 and math.isfinite(self.cell_radius)):
            raise GeometryError(f"cell_radius must be positive, got {self.cell_radius}")

    def centroid(self, cell: int) -> tuple[float, float]:
        cached = self._centroids.get(cell)
        if cached is None:
            cached = cell_centroid(cell, self)
            self._centroids[cell] = cached
        return cached

    @property
    def diameter(self) -> float:
        """Outer extent: farthest centroid distance plus one cell radius, doubled."""
        return 2.0 * (4.0 * self.cell_radius + self.cell_radius)


def cell_centroid(cell: int, airspace: Airspace) -> tuple[float, float]:
    """Centroid (x east, y north) in meters of a cell in the given airspace.

    The center cell maps to the origin, ring-1 centroids to distance ``2r``,
    ring-2 corners to ``4r`` and ring-2 edges to ``2*sqrt(3)*r``, which makes
    every pair of adjacent circles exactly tangent.
    """
    r = ring(cell)
    radius = airspace.cell_radius
    if r == 0:
        return (0.0, 0.0)
    if r == 1:
        azimuth = math.radians(60.0 * (cell - 1))
        d = 2.0 * radius
    else:
        p = cell - 7
        azimuth = math.radians(30.0 * p)
        d = 4.0 * radius if p % 2 == 0 else 2.0 * math.sqrt(3.0) * radius
    return (d * math.sin(azimuth), d * math.cos(azimuth))


def rotate_cell(cell: int, k: int) -> int:
    """Cell whose centroid is the input's centroid rotated by k*60 deg clockwise.

    The rotation group has order 6: ring-2 corner and edge cells are
    geometrically distinct, so only multiples of 60 degrees map centroids onto
    centroids. The map is a ring-preserving permutation for every k.
    """
    r = ring(cell)
    if r == 0:
        return 0
    if r == 1:
        return 1 + (cell - 1 + k) % 6
    return 7 + (cell - 7 + 2 * k) % 12


def ft_to_m(value_ft: float) -> float:
    """Feet to meters, exact 0.3048 factor."""
    return value_ft * M_PER_FT


def m_to_ft(value_m: float) -> float:
    """Meters to feet, exact 0.3048 factor."""
    return value_m / M_PER_FT
