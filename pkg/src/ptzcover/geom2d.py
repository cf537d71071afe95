"""Planar geometry substrate: convex workspace, ellipses, polygon booleans, areas.

All shapes live in world units in R^2. Boolean set operations run on polygons
(ellipses are polygonized first); membership tests on ellipses use the exact
quadratic form, never the polygonized proxy. Every value here is immutable
after construction and every operation is a pure function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import shapely as _sh
from shapely.geometry import MultiPolygon, Point as _ShapelyPoint, Polygon as _ShapelyPolygon
from shapely.geometry.polygon import orient as _orient

# Point-on-boundary classification and degenerate-ring pruning tolerance (world units).
GEOM_EPS = 1e-9

# Default vertex count when an ellipse boundary is replaced by its inscribed polygon.
DEFAULT_POLYGONIZATION = 64

# A point is a float (2,) ndarray throughout; as_point() coerces and validates.
Point = np.ndarray


class DegenerateShapeError(ValueError):
    """Raised when shape parameters collapse the shape (e.g. ellipse axis <= 0)."""


def as_point(p) -> np.ndarray:
    """Coerce a coordinate pair to a float (2,) array, requiring finite values."""
    a = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite point: {p!r}")
    return a


def _ring_signed_area(ring: np.ndarray) -> float:
    """Shoelace signed area of a ring given as (k,2) vertices without closing repeat."""
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """Strictly convex polygon with counter-clockwise vertices, shape (n,2)."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValueError("ConvexPolygon needs >= 3 (x, y) vertices")
        if not np.all(np.isfinite(v)):
            raise ValueError("ConvexPolygon vertices must be finite")
        e = np.roll(v, -1, axis=0) - v
        e_next = np.roll(e, -1, axis=0)
        cross = e[:, 0] * e_next[:, 1] - e[:, 1] * e_next[:, 0]
        if not np.all(cross > 0):
            raise ValueError("vertices must be strictly convex, counter-clockwise")
        object.__setattr__(self, "vertices", _freeze(v))
        # Outward edge normals and offsets for the half-plane description x.n <= c.
        n = np.stack([e[:, 1], -e[:, 0]], axis=1)
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        object.__setattr__(self, "_normals", _freeze(n))
        object.__setattr__(self, "_offsets", _freeze(np.einsum("ij,ij->i", n, v)))

    @property
    def area(self) -> float:
        return _ring_signed_area(self.vertices)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        v = self.vertices
        return float(v[:, 0].min()), float(v[:, 1].min()), float(v[:, 0].max()), float(v[:, 1].max())

    def signed_depth(self, points) -> np.ndarray:
        """Max over edges of outward signed distance; <= 0 exactly on/inside."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (pts @ self._normals.T - self._offsets).max(axis=1)

    def contains_xy(self, points, strict: bool = False, eps: float = GEOM_EPS) -> np.ndarray:
        d = self.signed_depth(points)
        return d < -eps if strict else d <= eps

    def contains(self, p, strict: bool = False, eps: float = GEOM_EPS) -> bool:
        return bool(self.contains_xy(as_point(p)[None, :], strict, eps)[0])

    def project(self, p) -> np.ndarray:
        """Euclidean-nearest point of the polygon to p; identity when p is inside."""
        p = as_point(p)
        if self.contains(p, eps=0.0):
            return p
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        t = np.einsum("ij,ij->i", p[None, :] - v, e) / np.einsum("ij,ij->i", e, e)
        cand = v + np.clip(t, 0.0, 1.0)[:, None] * e
        d2 = np.einsum("ij,ij->i", cand - p, cand - p)
        return cand[int(np.argmin(d2))].copy()

    def to_shapely(self) -> _ShapelyPolygon:
        return _ShapelyPolygon(self.vertices)

    def to_region(self) -> "Region":
        return Region(((self.vertices, ()),))


@dataclass(frozen=True, eq=False)
class Ellipse:
    """Ellipse with center, semi-axes a >= b > 0 and major-axis direction theta (radians)."""

    center: np.ndarray
    a: float
    b: float
    theta: float = 0.0

    def __post_init__(self):
        if not (self.b > 0.0 and self.a >= self.b and math.isfinite(self.a)):
            raise DegenerateShapeError(f"need a >= b > 0, got a={self.a}, b={self.b}")
        object.__setattr__(self, "center", _freeze(as_point(self.center)))

    @property
    def area(self) -> float:
        return math.pi * self.a * self.b

    def quadratic_form(self, points) -> np.ndarray:
        """||diag(1/a, 1/b) R(theta)^T (p - c)||; the boundary is exactly 1."""
        pts = np.atleast_2d(np.asarray(points, dtype=float)) - self.center
        ct, st = math.cos(self.theta), math.sin(self.theta)
        u = (pts[:, 0] * ct + pts[:, 1] * st) / self.a
        w = (-pts[:, 0] * st + pts[:, 1] * ct) / self.b
        return np.hypot(u, w)

    def contains_xy(self, points, strict: bool = False, eps: float = GEOM_EPS) -> np.ndarray:
        # eps is a length; the quadratic form is dimensionless, so scale by the
        # minor axis (worst-case gradient of the form is 1/b).
        tol = eps / self.b
        q = self.quadratic_form(points)
        return q < 1.0 - tol if strict else q <= 1.0 + tol

    def contains(self, p, strict: bool = False, eps: float = GEOM_EPS) -> bool:
        return bool(self.contains_xy(as_point(p)[None, :], strict, eps)[0])

    def boundary_points(self, t) -> np.ndarray:
        """Points gamma(t) = c + R(theta) (a cos t, b sin t) for scalar or array t."""
        t = np.asarray(t, dtype=float)
        ct, st = math.cos(self.theta), math.sin(self.theta)
        x = self.a * np.cos(t)
        y = self.b * np.sin(t)
        return np.stack([ct * x - st * y, st * x + ct * y], axis=-1) + self.center


class Region:
    """Planar set as a union of simple polygons with holes.

    ``polygons`` is a tuple of (outer, holes): outer ring CCW, holes CW, each a
    read-only (k,2) float array without a repeated closing vertex. Immutable;
    the shapely conversion is computed once and cached.
    """

    __slots__ = ("polygons", "_cached")

    def __init__(self, polygons=()):
        norm = []
        for outer, holes in polygons:
            o = _freeze(np.array(outer, dtype=float))
            norm.append((o, tuple(_freeze(np.array(h, dtype=float)) for h in holes)))
        object.__setattr__(self, "polygons", tuple(norm))
        object.__setattr__(self, "_cached", None)

    def __setattr__(self, name, value):
        raise AttributeError("Region is immutable")

    @staticmethod
    def empty() -> "Region":
        return Region(())

    @staticmethod
    def from_polygon(outer, holes=()) -> "Region":
        return Region(((outer, tuple(holes)),))

    @staticmethod
    def from_shapely(geom) -> "Region":
        polys = []
        for part in _polygon_parts(geom):
            part = _orient(part, 1.0)  # CCW outer, CW holes
            outer = np.asarray(part.exterior.coords)[:-1]
            if abs(_ring_signed_area(outer)) <= GEOM_EPS:
                continue
            holes = tuple(
                r for r in (np.asarray(ring.coords)[:-1] for ring in part.interiors)
                if abs(_ring_signed_area(r)) > GEOM_EPS
            )
            polys.append((outer, holes))
        return Region(polys)

    def to_shapely(self):
        if self._cached is None:
            parts = [_ShapelyPolygon(outer, list(holes)) for outer, holes in self.polygons]
            geom = MultiPolygon(parts) if len(parts) != 1 else parts[0]
            if geom.is_empty:
                geom = _ShapelyPolygon()
            elif not geom.is_valid:
                geom = geom.buffer(0)
            object.__setattr__(self, "_cached", geom)
        return self._cached

    @property
    def is_empty(self) -> bool:
        return not self.polygons

    @property
    def area(self) -> float:
        """Exact shoelace area; CW holes contribute negatively."""
        return sum(
            _ring_signed_area(outer) + sum(_ring_signed_area(h) for h in holes)
            for outer, holes in self.polygons
        )

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        if self.is_empty:
            return (0.0, 0.0, 0.0, 0.0)
        allv = np.vstack([outer for outer, _ in self.polygons])
        return (
            float(allv[:, 0].min()), float(allv[:, 1].min()),
            float(allv[:, 0].max()), float(allv[:, 1].max()),
        )

    def contains(self, p, strict: bool = False, eps: float = GEOM_EPS) -> bool:
        if self.is_empty:
            return False
        pt = _ShapelyPoint(*as_point(p))
        geom = self.to_shapely()
        if geom.boundary.distance(pt) <= eps:
            return not strict
        return bool(geom.contains(pt))

    def contains_xy(self, points) -> np.ndarray:
        """Vectorized interior test (boundary points included, no eps widening)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.is_empty:
            return np.zeros(pts.shape[0], dtype=bool)
        return _sh.intersects_xy(self.to_shapely(), pts[:, 0], pts[:, 1])


def _polygon_parts(geom) -> list[_ShapelyPolygon]:
    """Flatten any shapely result to its polygonal parts, dropping lines/points."""
    if geom is None or geom.is_empty:
        return []
    if isinstance(geom, _ShapelyPolygon):
        return [geom]
    if hasattr(geom, "geoms"):
        out = []
        for g in geom.geoms:
            out.extend(_polygon_parts(g))
        return out
    return []


def _coerce_region(x) -> Region:
    if isinstance(x, Region):
        return x
    if isinstance(x, ConvexPolygon):
        return x.to_region()
    if isinstance(x, Ellipse):
        return ellipse_to_polygon(x, DEFAULT_POLYGONIZATION)
    raise TypeError(f"cannot interpret {type(x).__name__} as a Region")


def ellipse_to_polygon(e: Ellipse, n_vertices: int = DEFAULT_POLYGONIZATION) -> Region:
    """Inscribed polygon with vertices at uniform parameter angles t_k = 2 pi k / n."""
    if n_vertices < 4:
        raise ValueError(f"n_vertices must be at least 4, got {n_vertices}")
    t = np.linspace(0.0, 2.0 * math.pi, n_vertices, endpoint=False)
    return Region.from_polygon(e.boundary_points(t))


def region_intersect(A, B) -> Region:
    return Region.from_shapely(_coerce_region(A).to_shapely().intersection(_coerce_region(B).to_shapely()))


def region_union(A, B) -> Region:
    return Region.from_shapely(_coerce_region(A).to_shapely().union(_coerce_region(B).to_shapely()))


def region_difference(A, B) -> Region:
    return Region.from_shapely(_coerce_region(A).to_shapely().difference(_coerce_region(B).to_shapely()))


class DensityField:
    """Importance weight phi(q) >= 0: uniform constant, or grid samples with
    bilinear lookup (queries outside the grid clamp to the nearest node)."""

    __slots__ = ("value", "values", "x0", "y0", "dx", "dy")

    def __init__(self, value=None, values=None, x0=0.0, y0=0.0, dx=1.0, dy=1.0):
        if (value is None) == (values is None):
            raise ValueError("pass exactly one of value (uniform) or values (grid)")
        self.value = None if value is None else float(value)
        if values is not None:
            v = np.asarray(values, dtype=float)
            if v.ndim != 2 or v.shape[0] < 2 or v.shape[1] < 2:
                raise ValueError("grid density needs a (ny, nx) array, ny, nx >= 2")
            if np.any(v < 0):
                raise ValueError("density values must be nonnegative")
            if not (dx > 0 and dy > 0):
                raise ValueError("grid spacing must be positive")
            self.values = _freeze(v)
        else:
            self.values = None
        self.x0, self.y0, self.dx, self.dy = float(x0), float(y0), float(dx), float(dy)

    @staticmethod
    def uniform(value: float = 1.0) -> "DensityField":
        return DensityField(value=value)

    @staticmethod
    def from_grid(values, x0: float, y0: float, dx: float, dy: float) -> "DensityField":
        return DensityField(values=values, x0=x0, y0=y0, dx=dx, dy=dy)

    @staticmethod
    def from_file(path) -> "DensityField":
        """Plain-text matrix, row-major, whitespace-separated, after a header
        line "nx ny x0 y0 dx dy"."""
        with open(path) as fh:
            header = fh.readline().split()
            if len(header) != 6:
                raise ValueError("density header must be: nx ny x0 y0 dx dy")
            nx, ny = int(header[0]), int(header[1])
            x0, y0, dx, dy = map(float, header[2:])
            flat = np.array(fh.read().split(), dtype=float)
        if flat.size != nx * ny:
            raise ValueError(f"expected {nx * ny} density samples, found {flat.size}")
        return DensityField.from_grid(flat.reshape(ny, nx), x0, y0, dx, dy)

    @property
    def is_uniform(self) -> bool:
        return self.values is None

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.is_uniform:
            return np.full(pts.shape[0], self.value)
        ny, nx = self.values.shape
        fx = np.clip((pts[:, 0] - self.x0) / self.dx, 0.0, nx - 1.0)
        fy = np.clip((pts[:, 1] - self.y0) / self.dy, 0.0, ny - 1.0)
        i0 = np.minimum(fx.astype(int), nx - 2)
        j0 = np.minimum(fy.astype(int), ny - 2)
        tx, ty = fx - i0, fy - j0
        v = self.values
        return (
            v[j0, i0] * (1 - tx) * (1 - ty)
            + v[j0, i0 + 1] * tx * (1 - ty)
            + v[j0 + 1, i0] * (1 - tx) * ty
            + v[j0 + 1, i0 + 1] * tx * ty
        )


def area(R, density: DensityField | None = None) -> float:
    """Mass integral of the density over R.

    Uniform densities integrate exactly (shoelace area times the constant).
    Grid densities use midpoint-rule quadrature on the field's own lattice.
    """
    R = _coerce_region(R)
    if R.is_empty:
        return 0.0
    if density is None or density.is_uniform:
        return R.area * (1.0 if density is None else density.value)
    xmin, ymin, xmax, ymax = R.bounds
    # Cell centers of the field lattice covering the region's bounding box.
    i0 = math.floor((xmin - density.x0) / density.dx)
    i1 = math.ceil((xmax - density.x0) / density.dx)
    j0 = math.floor((ymin - density.y0) / density.dy)
    j1 = math.ceil((ymax - density.y0) / density.dy)
    cx = density.x0 + (np.arange(i0, i1) + 0.5) * density.dx
    cy = density.y0 + (np.arange(j0, j1) + 0.5) * density.dy
    gx, gy = np.meshgrid(cx, cy)
    centers = np.stack([gx.ravel(), gy.ravel()], axis=1)
    inside = R.contains_xy(centers)
    if not inside.any():
        return 0.0
    return float(np.sum(density(centers[inside]))) * density.dx * density.dy


def contains(shape, p, strict: bool = False) -> bool:
    """Membership test dispatching on shape type; ellipse uses the exact form."""
    if isinstance(shape, (Region, ConvexPolygon, Ellipse)):
        return shape.contains(p, strict=strict)
    raise TypeError(f"no containment test for {type(shape).__name__}")


def project_to_polygon(P: ConvexPolygon, p) -> np.ndarray:
    """Euclidean-nearest point of P to p; identity if p is in P."""
    return P.project(p)
