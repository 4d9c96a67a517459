"""Vector math, primitive records, and analytic ray intersection tests.

Points and directions are plain numpy float64 arrays of shape (3,). The
scalar kernels at the bottom are numba-compiled and shared with the BVH
traversal and the renderers, so the single-ray API and the hot loops go
through exactly the same arithmetic.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from numba import njit

DEFAULT_MAX_T = 1e30

_jit = njit(cache=True, nogil=True, error_model="numpy")
# the scalar tests sit inside traversal loops; numba only inlines across
# jitted functions when asked, and the call overhead is measurable there
_jit_inline = njit(cache=True, nogil=True, error_model="numpy", inline="always")


def vec3(x, y, z) -> np.ndarray:
    return np.array([x, y, z], dtype=np.float64)


def length(v) -> float:
    return math.sqrt(float(np.dot(v, v)))


def normalize(v) -> np.ndarray:
    n = length(v)
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return np.asarray(v, dtype=np.float64) / n


def _as_vec3(v, name):
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (3,):
        raise ValueError(f"{name} must have shape (3,), got {a.shape}")
    return a


@dataclass
class Ray:
    """A parametric ray origin + t * direction valid on [t_min, t_max]."""

    origin: np.ndarray
    direction: np.ndarray
    t_min: float = 0.0
    t_max: float = DEFAULT_MAX_T

    def __post_init__(self):
        self.origin = _as_vec3(self.origin, "origin")
        self.direction = _as_vec3(self.direction, "direction")
        if not np.all(np.isfinite(self.origin)):
            raise ValueError("ray origin must be finite")
        if not np.any(self.direction != 0.0):
            raise ValueError("ray direction must be nonzero")
        if not (self.t_min >= 0.0):
            raise ValueError("t_min must be >= 0")
        if not (self.t_max > self.t_min):
            raise ValueError("t_max must be > t_min")

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


@dataclass
class Triangle:
    """Indexed triangle referencing rows of a mesh vertex array."""

    i0: int
    i1: int
    i2: int
    material_id: int = 0

    def __post_init__(self):
        if len({self.i0, self.i1, self.i2}) != 3:
            raise ValueError("triangle indices must be pairwise distinct")


@dataclass
class Aabb:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = _as_vec3(self.lo, "lo")
        self.hi = _as_vec3(self.hi, "hi")

    @classmethod
    def empty(cls) -> "Aabb":
        return cls(np.full(3, np.inf), np.full(3, -np.inf))

    @property
    def is_empty(self) -> bool:
        return bool(np.any(self.lo > self.hi))

    def diagonal(self) -> np.ndarray:
        return self.hi - self.lo


@dataclass
class SpherePrim:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = _as_vec3(self.center, "center")
        if not (self.radius > 0.0):
            raise ValueError("sphere radius must be > 0")


@dataclass
class Hit:
    """Closest-intersection record in world space."""

    t: float
    prim_index: int
    instance_index: int
    normal: np.ndarray
    bary_u: float
    bary_v: float


class TriangleHit(NamedTuple):
    t: float
    bary_u: float
    bary_v: float
    normal: np.ndarray


class SphereHit(NamedTuple):
    t: float
    normal: np.ndarray


def intersect_ray_triangle(ray: Ray, v0, v1, v2) -> Optional[TriangleHit]:
    """Two-sided plane-and-edge-test intersection.

    Returns the plane parameter t together with barycentric coordinates
    (u weights v1, v weights v2) and the unit geometric normal, or None
    when the ray misses, is parallel, or the triangle is degenerate.
    """
    v0 = _as_vec3(v0, "v0")
    v1 = _as_vec3(v1, "v1")
    v2 = _as_vec3(v2, "v2")
    t, u, v, nx, ny, nz = _tri_hit(
        ray.origin[0], ray.origin[1], ray.origin[2],
        ray.direction[0], ray.direction[1], ray.direction[2],
        ray.t_min, ray.t_max,
        v0[0], v0[1], v0[2], v1[0], v1[1], v1[2], v2[0], v2[1], v2[2],
    )
    if t < 0.0:
        return None
    return TriangleHit(t, u, v, vec3(nx, ny, nz))


def inverse_direction(direction) -> np.ndarray:
    """Componentwise 1/d with signed infinities for zero components."""
    d = _as_vec3(direction, "direction")
    with np.errstate(divide="ignore"):
        return np.divide(1.0, d)


def intersect_ray_aabb(ray: Ray, box: Aabb, inv_dir) -> bool:
    """Conservative slab test: boundary touches count as hits."""
    inv_dir = _as_vec3(inv_dir, "inv_dir")
    return bool(
        _aabb_hit(
            ray.origin[0], ray.origin[1], ray.origin[2],
            inv_dir[0], inv_dir[1], inv_dir[2],
            ray.t_min, ray.t_max,
            box.lo[0], box.lo[1], box.lo[2],
            box.hi[0], box.hi[1], box.hi[2],
        )
    )


def intersect_ray_sphere(ray: Ray, sphere: SpherePrim) -> Optional[SphereHit]:
    """Smallest quadratic root inside [t_min, t_max], outward unit normal."""
    t, nx, ny, nz = _sphere_hit(
        ray.origin[0], ray.origin[1], ray.origin[2],
        ray.direction[0], ray.direction[1], ray.direction[2],
        ray.t_min, ray.t_max,
        sphere.center[0], sphere.center[1], sphere.center[2], sphere.radius,
    )
    if t < 0.0:
        return None
    return SphereHit(t, vec3(nx, ny, nz))


def triangle_area(v0, v1, v2) -> float:
    e1 = np.asarray(v1, dtype=np.float64) - v0
    e2 = np.asarray(v2, dtype=np.float64) - v0
    return 0.5 * length(np.cross(e1, e2))


def aabb_of_triangle(v0, v1, v2) -> Aabb:
    pts = np.stack([
        np.asarray(v0, dtype=np.float64),
        np.asarray(v1, dtype=np.float64),
        np.asarray(v2, dtype=np.float64),
    ])
    return Aabb(pts.min(axis=0), pts.max(axis=0))


def aabb_union(a: Aabb, b: Aabb) -> Aabb:
    return Aabb(np.minimum(a.lo, b.lo), np.maximum(a.hi, b.hi))


# ---------------------------------------------------------------------------
# scalar kernels
# ---------------------------------------------------------------------------

@_jit_inline
def _tri_hit(ox, oy, oz, dx, dy, dz, t_min, t_max,
             ax, ay, az, bx, by, bz, cx, cy, cz):
    """Plane hit followed by three signed edge tests.

    Returns (t, u, v, nx, ny, nz) with t < 0 meaning no hit. The edge
    functions double as barycentric numerators: with s = ea + eb + ec,
    u = ec / s is the weight of the second vertex and v = ea / s the
    weight of the third, so o + t*d == (1-u-v)*v0 + u*v1 + v*v2.
    """
    e0x = bx - ax
    e0y = by - ay
    e0z = bz - az
    e1x = cx - bx
    e1y = cy - by
    e1z = cz - bz
    nx = e0y * e1z - e0z * e1y
    ny = e0z * e1x - e0x * e1z
    nz = e0x * e1y - e0y * e1x
    denom = nx * dx + ny * dy + nz * dz
    if denom == 0.0:
        return -1.0, 0.0, 0.0, 0.0, 0.0, 0.0
    t = ((ax - ox) * nx + (ay - oy) * ny + (az - oz) * nz) / denom
    if not math.isfinite(t):
        return -1.0, 0.0, 0.0, 0.0, 0.0, 0.0
    if t < t_min or t > t_max:
        return -1.0, 0.0, 0.0, 0.0, 0.0, 0.0
    px = ox + dx * t
    py = oy + dy * t
    pz = oz + dz * t
    # edge v0->v1 against p - v0
    wx = px - ax
    wy = py - ay
    wz = pz - az
    ea = nx * (e0y * wz - e0z * wy) + ny * (e0z * wx - e0x * wz) + nz * (e0x * wy - e0y * wx)
    # edge v1->v2 against p - v1
    wx = px - bx
    wy = py - by
    wz = pz - bz
    eb = nx * (e1y * wz - e1z * wy) + ny * (e1z * wx - e1x * wz) + nz * (e1x * wy - e1y * wx)
    # edge v2->v0 against p - v2
    e2x = ax - cx
    e2y = ay - cy
    e2z = az - cz
    wx = px - cx
    wy = py - cy
    wz = pz - cz
    ec = nx * (e2y * wz - e2z * wy) + ny * (e2z * wx - e2x * wz) + nz * (e2x * wy - e2y * wx)
    if ea < 0.0 or eb < 0.0 or ec < 0.0:
        return -1.0, 0.0, 0.0, 0.0, 0.0, 0.0
    s = ea + eb + ec
    if s == 0.0:
        return -1.0, 0.0, 0.0, 0.0, 0.0, 0.0
    u = ec / s
    v = ea / s
    nlen = math.sqrt(nx * nx + ny * ny + nz * nz)
    return t, u, v, nx / nlen, ny / nlen, nz / nlen


@_jit_inline
def _aabb_hit(ox, oy, oz, ix, iy, iz, t_min, t_max,
              lox, loy, loz, hix, hiy, hiz):
    """Slab test against the valid ray interval; inclusive at boundaries.

    Infinite inverse components mark directions parallel to a slab and
    degrade to a containment check on that axis, which avoids 0 * inf.
    """
    tlo = t_min
    thi = t_max
    if math.isinf(ix):
        if ox < lox or ox > hix:
            return False
    else:
        t0 = (lox - ox) * ix
        t1 = (hix - ox) * ix
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > tlo:
            tlo = t0
        if t1 < thi:
            thi = t1
        if tlo > thi:
            return False
    if math.isinf(iy):
        if oy < loy or oy > hiy:
            return False
    else:
        t0 = (loy - oy) * iy
        t1 = (hiy - oy) * iy
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > tlo:
            tlo = t0
        if t1 < thi:
            thi = t1
        if tlo > thi:
            return False
    if math.isinf(iz):
        if oz < loz or oz > hiz:
            return False
    else:
        t0 = (loz - oz) * iz
        t1 = (hiz - oz) * iz
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > tlo:
            tlo = t0
        if t1 < thi:
            thi = t1
        if tlo > thi:
            return False
    return True


@_jit_inline
def _sphere_hit(ox, oy, oz, dx, dy, dz, t_min, t_max, cx, cy, cz, r):
    """Stable quadratic solve; returns (t, nx, ny, nz), t < 0 on miss."""
    lx = ox - cx
    ly = oy - cy
    lz = oz - cz
    a = dx * dx + dy * dy + dz * dz
    b = 2.0 * (lx * dx + ly * dy + lz * dz)
    c = lx * lx + ly * ly + lz * lz - r * r
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return -1.0, 0.0, 0.0, 0.0
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b))
    if q == 0.0:
        t0 = 0.0
        t1 = 0.0
    else:
        t0 = q / a
        t1 = c / q
    if t0 > t1:
        t0, t1 = t1, t0
    t = t0
    if t < t_min or t > t_max:
        t = t1
        if t < t_min or t > t_max:
            return -1.0, 0.0, 0.0, 0.0
    px = ox + dx * t
    py = oy + dy * t
    pz = oz + dz * t
    return t, (px - cx) / r, (py - cy) / r, (pz - cz) / r


# ---------------------------------------------------------------------------
# batch helpers
# ---------------------------------------------------------------------------

@_jit
def _tri_hit_batch(origins, dirs, t_min, t_max, v0, v1, v2, out):
    for i in range(origins.shape[0]):
        t, u, v, nx, ny, nz = _tri_hit(
            origins[i, 0], origins[i, 1], origins[i, 2],
            dirs[i, 0], dirs[i, 1], dirs[i, 2],
            t_min[i], t_max[i],
            v0[i, 0], v0[i, 1], v0[i, 2],
            v1[i, 0], v1[i, 1], v1[i, 2],
            v2[i, 0], v2[i, 1], v2[i, 2],
        )
        out[i, 0] = t
        out[i, 1] = u
        out[i, 2] = v
        out[i, 3] = nx
        out[i, 4] = ny
        out[i, 5] = nz


def intersect_ray_triangle_batch(origins, dirs, t_min, t_max, v0, v1, v2):
    """Vectorized form of intersect_ray_triangle for test and batch use.

    Returns an (n, 6) array of (t, u, v, nx, ny, nz) rows, t < 0 on miss.
    """
    origins = np.ascontiguousarray(origins, dtype=np.float64)
    n = origins.shape[0]
    out = np.empty((n, 6), dtype=np.float64)
    _tri_hit_batch(
        origins,
        np.ascontiguousarray(dirs, dtype=np.float64),
        np.ascontiguousarray(t_min, dtype=np.float64),
        np.ascontiguousarray(t_max, dtype=np.float64),
        np.ascontiguousarray(v0, dtype=np.float64),
        np.ascontiguousarray(v1, dtype=np.float64),
        np.ascontiguousarray(v2, dtype=np.float64),
        out,
    )
    return out
