"""Finite windows into the integer lattice.

Functions on Z^d are represented on the box {x : max_i |x_i| <= L}.  Sites
outside the box are either treated as zero (the default, appropriate for
square-summable profiles that decay) or identified modulo 2L+1 (a torus,
used where exact translation invariance is wanted).
"""

from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Boundary",
    "LatticeGeometry",
    "Field",
    "norm",
    "shift",
    "interpolation_check",
    "boundary_shell_mass",
    "save_field",
    "load_field",
]


class Boundary(Enum):
    """Rule for sites outside the computational box."""

    ZERO_EXTENDED = "zero_extended"
    PERIODIC_WRAP = "periodic_wrap"


def _as_boundary(b) -> Boundary:
    if isinstance(b, Boundary):
        return b
    return Boundary(str(b))


@dataclass(frozen=True)
class LatticeGeometry:
    """Box of radius L in Z^d together with its boundary rule.

    The box holds (2L+1)^d sites indexed by multi-indices in [-L, L]^d;
    array index = site + L componentwise.
    """

    d: int
    L: int
    boundary: Boundary = Boundary.ZERO_EXTENDED

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d}")
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"box radius must be a positive integer, got {self.L}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "boundary", _as_boundary(self.boundary))

    @property
    def n_per_axis(self) -> int:
        return 2 * self.L + 1

    @property
    def shape(self) -> tuple:
        return (self.n_per_axis,) * self.d

    @property
    def site_count(self) -> int:
        return self.n_per_axis**self.d

    def site_coords(self) -> np.ndarray:
        """All sites as an (site_count, d) integer array, lexicographic order."""
        axes = [np.arange(-self.L, self.L + 1)] * self.d
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel(order="C") for g in grid], axis=-1)

    def is_periodic(self) -> bool:
        return self.boundary is Boundary.PERIODIC_WRAP


@dataclass(frozen=True)
class Field:
    """Real-valued function on the box, immutable once constructed."""

    geom: LatticeGeometry
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.geom.shape:
            raise ValueError(f"values shape {v.shape} does not match box shape {self.geom.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite (no NaN/Inf)")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, geom: LatticeGeometry) -> "Field":
        return cls(geom, np.zeros(geom.shape))

    @classmethod
    def delta(cls, geom: LatticeGeometry, site=None) -> "Field":
        """Indicator of a single site (the origin by default)."""
        v = np.zeros(geom.shape)
        if site is None:
            site = (0,) * geom.d
        idx = tuple(int(s) + geom.L for s in site)
        v[idx] = 1.0
        return cls(geom, v)

    @classmethod
    def from_values(cls, geom: LatticeGeometry, values) -> "Field":
        return cls(geom, np.asarray(values, dtype=np.float64).reshape(geom.shape))

    def value_at(self, site) -> float:
        idx = tuple(int(s) + self.geom.L for s in site)
        return float(self.values[idx])

    def flat(self) -> np.ndarray:
        """Values in lexicographic site order."""
        return self.values.ravel(order="C")

    def __add__(self, other: "Field") -> "Field":
        self._check_same_geom(other)
        return Field(self.geom, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        self._check_same_geom(other)
        return Field(self.geom, self.values - other.values)

    def __neg__(self) -> "Field":
        return Field(self.geom, -self.values)

    def __mul__(self, c) -> "Field":
        return Field(self.geom, self.values * float(c))

    __rmul__ = __mul__

    def _check_same_geom(self, other: "Field"):
        if other.geom != self.geom:
            raise ValueError("fields live on different geometries")


def norm(u: Field, s, compensated: bool = False) -> float:
    """l^s norm of the field, s in [1, inf].

    The sum runs over sites in lexicographic order through a fixed reduction
    tree, so repeated evaluations are bit-identical.  ``compensated=True``
    switches to exact (fsum) accumulation of the powered terms.
    """
    s = float(s)
    if s < 1.0:
        raise ValueError(f"norm order must be >= 1, got {s}")
    flat = np.abs(u.flat())
    if math.isinf(s):
        return float(flat.max(initial=0.0))
    powered = flat if s == 1.0 else flat**s
    total = math.fsum(powered.tolist()) if compensated else float(np.sum(powered))
    return float(total ** (1.0 / s))


def shift(u: Field, y) -> Field:
    """Translate: (shift u)(x) = u(x - y), under the geometry's boundary rule.

    Periodic shifts permute the site values exactly; zero-extended shifts
    drop whatever leaves the box.
    """
    geom = u.geom
    y = [int(c) for c in y]
    if len(y) != geom.d:
        raise ValueError(f"offset has {len(y)} components, expected {geom.d}")
    if any(abs(c) > 2 * geom.L for c in y):
        raise ValueError(f"offset components must satisfy |y_i| <= 2L = {2 * geom.L}")
    if geom.is_periodic():
        out = np.roll(u.values, shift=tuple(y), axis=tuple(range(geom.d)))
        return Field(geom, out)
    n = geom.n_per_axis
    out = np.zeros(geom.shape)
    src = []
    dst = []
    for c in y:
        if c >= 0:
            dst.append(slice(c, n))
            src.append(slice(0, n - c))
        else:
            dst.append(slice(0, n + c))
            src.append(slice(-c, n))
    if all(sl.start < sl.stop for sl in dst):
        out[tuple(dst)] = u.values[tuple(src)]
    return Field(geom, out)


def interpolation_check(u: Field, q: float):
    """Both sides of ||u||_q^q <= ||u||_2^2 ||u||_inf^(q-2), returned as (lhs, rhs)."""
    q = float(q)
    if q <= 2.0:
        raise ValueError(f"interpolation exponent must satisfy q > 2, got {q}")
    if not np.any(u.values):
        raise ValueError("interpolation check requires a nonzero field")
    lhs = norm(u, q) ** q
    rhs = norm(u, 2) ** 2 * norm(u, math.inf) ** (q - 2.0)
    return lhs, rhs


def boundary_shell_mass(u: Field) -> float:
    """Relative l^2 mass sitting on the outermost shell max_i |x_i| = L.

    Used as the truncation diagnostic: a converged profile with visible
    boundary mass means the box was too small.
    """
    total = norm(u, 2)
    if total == 0.0:
        return 0.0
    inner = u.values[(slice(1, -1),) * u.geom.d]
    shell_sq = float(np.sum(u.values**2)) - float(np.sum(inner**2))
    return math.sqrt(max(shell_sq, 0.0)) / total


# ---------------------------------------------------------------------------
# File format: CSV of nonzero sites plus a JSON geometry sidecar.


def _sidecar_path(path) -> str:
    base, _ = os.path.splitext(str(path))
    return base + ".json"


def atomic_write_text(path, text: str):
    """Write via temp file + rename so readers never see partial content."""
    path = str(path)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def save_field(u: Field, path):
    """Write the field as `x1,...,xd,value` rows (nonzero sites only)."""
    geom = u.geom
    header = ",".join(f"x{i + 1}" for i in range(geom.d)) + ",value"
    lines = [header]
    flat = u.flat()
    for coords, value in zip(geom.site_coords(), flat):
        if value != 0.0:
            lines.append(",".join(str(int(c)) for c in coords) + "," + repr(float(value)))
    atomic_write_text(path, "\n".join(lines) + "\n")
    meta = {"d": geom.d, "L": geom.L, "boundary": geom.boundary.value}
    atomic_write_text(_sidecar_path(path), json.dumps(meta, sort_keys=True) + "\n")


def load_field(path) -> Field:
    """Read a field CSV written by :func:`save_field` (sidecar required)."""
    with open(_sidecar_path(path)) as fh:
        meta = json.load(fh)
    geom = LatticeGeometry(d=meta["d"], L=meta["L"], boundary=meta["boundary"])
    values = np.zeros(geom.shape)
    with open(path) as fh:
        header = fh.readline()
        ncols = len(header.strip().split(","))
        if ncols != geom.d + 1:
            raise ValueError(f"field CSV has {ncols} columns, expected {geom.d + 1}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            site = tuple(int(p) + geom.L for p in parts[: geom.d])
            values[site] = float(parts[geom.d])
    return Field(geom, values)


def sites_within(radius: int, d: int):
    """Iterate integer offsets with max_i |x_i| <= radius, lexicographically."""
    rng = range(-radius, radius + 1)
    return itertools.product(rng, repeat=d)
