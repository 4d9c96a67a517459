"""Two-level bounding volume hierarchy with instancing and stack traversal.

Bottom-level trees (Blas) are built over triangle meshes or user AABB
lists, top-level trees (Tlas) over transformed instances. Traversal runs
in flattened numba kernels; rays are transformed into instance-local space
with the cached inverse matrix and the local direction is deliberately not
renormalized so local t equals world t.

Custom primitives are resolved through an IntersectorRegistry keyed by
(geometry type, ray type). Registered intersectors must be numba-jitted
functions with the signature

    fn(data, prim, ox, oy, oz, dx, dy, dz, t_min, t_max)
        -> (t, nx, ny, nz)          # t < 0 means no hit

where data is the flat float64 array registered with the entry and prim is
the primitive's AABB-list index plus the owning Blas's data_offset.
"""

import math
import warnings
from collections import namedtuple
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from numba import njit, literal_unroll
from numba.core.errors import NumbaExperimentalFeatureWarning

from .geometry import DEFAULT_MAX_T, Hit, Ray, _aabb_hit, _as_vec3, _sphere_hit, _tri_hit, vec3

# first-class function tables trip numba's experimental-feature warning on
# every compile; the mechanism is the documented one for function arguments
warnings.filterwarnings("ignore", category=NumbaExperimentalFeatureWarning)

_jit = njit(cache=True, nogil=True, error_model="numpy")
_jit_inline = njit(cache=True, nogil=True, error_model="numpy", inline="always")

FULL_MASK = 0xFFFFFFFF
TRIANGLES = 0
CUSTOM = 1
SPHERE_GEOM_TYPE = 0
MAX_STACK_DEPTH = 64

_SAH_BINS = 16
_PRIM_SENTINEL = 1 << 62
_FORCE_MEDIAN_DEPTH = 32  # keeps worst-case depth under MAX_STACK_DEPTH


class BuildError(ValueError):
    pass


class RegistryError(LookupError):
    pass


# ---------------------------------------------------------------------------
# BVH construction (single-threaded, numpy-vectorized per node)
# ---------------------------------------------------------------------------

def _box_area(lo, hi):
    d = np.maximum(hi - lo, 0.0)
    return 2.0 * (d[0] * d[1] + d[1] * d[2] + d[2] * d[0])


def _build_bvh(box_lo, box_hi, quality, max_leaf=4,
               traversal_cost=1.0, intersect_cost=1.0):
    """Top-down build; returns node arrays plus the leaf primitive order.

    balanced: binned surface-area-heuristic split over the centroid extent's
    longest axis, median fallback when the heuristic refuses. fast: median
    split only. Nodes are stored in preorder so children always follow their
    parent, which the bottom-up refit relies on.
    """
    n = box_lo.shape[0]
    centroids = 0.5 * (box_lo + box_hi)
    bounds = []
    left = []
    right = []
    count = []
    axis = []
    order = np.empty(n, dtype=np.int64)
    cursor = 0
    deepest = 1

    def median_split(idx):
        c = centroids[idx]
        ext = c.max(axis=0) - c.min(axis=0)
        ax = int(np.argmax(ext))
        half = idx.shape[0] // 2
        if ext[ax] <= 0.0:
            return idx[:half], idx[half:], 0
        srt = np.argsort(c[:, ax], kind="stable")
        return idx[srt[:half]], idx[srt[half:]], ax

    def sah_split(idx, node_area):
        c = centroids[idx]
        cb_lo = c.min(axis=0)
        ext = c.max(axis=0) - cb_lo
        ax = int(np.argmax(ext))
        if ext[ax] <= 0.0:
            return None
        scale = _SAH_BINS / ext[ax]
        bin_id = np.minimum(((c[:, ax] - cb_lo[ax]) * scale).astype(np.int64),
                            _SAH_BINS - 1)
        counts = np.bincount(bin_id, minlength=_SAH_BINS)
        b_lo = np.full((_SAH_BINS, 3), np.inf)
        b_hi = np.full((_SAH_BINS, 3), -np.inf)
        np.minimum.at(b_lo, bin_id, box_lo[idx])
        np.maximum.at(b_hi, bin_id, box_hi[idx])

        # sweep prefix (left of split) and suffix (right of split)
        best_cost = np.inf
        best_k = -1
        l_lo = np.full(3, np.inf)
        l_hi = np.full(3, -np.inf)
        l_area = np.empty(_SAH_BINS - 1)
        l_count = np.empty(_SAH_BINS - 1, dtype=np.int64)
        for k in range(_SAH_BINS - 1):
            l_lo = np.minimum(l_lo, b_lo[k])
            l_hi = np.maximum(l_hi, b_hi[k])
            l_area[k] = _box_area(l_lo, l_hi)
            l_count[k] = counts[: k + 1].sum()
        r_lo = np.full(3, np.inf)
        r_hi = np.full(3, -np.inf)
        total = idx.shape[0]
        for k in range(_SAH_BINS - 2, -1, -1):
            r_lo = np.minimum(r_lo, b_lo[k + 1])
            r_hi = np.maximum(r_hi, b_hi[k + 1])
            nl = l_count[k]
            nr = total - nl
            if nl == 0 or nr == 0:
                continue
            cost = traversal_cost + intersect_cost * (
                l_area[k] * nl + _box_area(r_lo, r_hi) * nr) / node_area
            if cost <= best_cost:
                best_cost = cost
                best_k = k
        if best_k < 0 or best_cost >= intersect_cost * total:
            return None
        mask = bin_id <= best_k
        return idx[mask], idx[~mask], ax

    def build(idx, depth):
        nonlocal cursor, deepest
        if depth > MAX_STACK_DEPTH:
            raise BuildError(f"tree depth exceeded {MAX_STACK_DEPTH}")
        deepest = max(deepest, depth)
        slot = len(bounds)
        lo = box_lo[idx].min(axis=0)
        hi = box_hi[idx].max(axis=0)
        bounds.append(np.concatenate([lo, hi]))
        left.append(0)
        right.append(-1)
        count.append(0)
        axis.append(0)
        if idx.shape[0] <= max_leaf:
            left[slot] = cursor
            count[slot] = idx.shape[0]
            order[cursor:cursor + idx.shape[0]] = idx
            cursor += idx.shape[0]
            return slot
        split = None
        if quality == "balanced" and depth < _FORCE_MEDIAN_DEPTH:
            area = _box_area(lo, hi)
            if area > 0.0:
                split = sah_split(idx, area)
        if split is None:
            split = median_split(idx)
        li, ri, ax = split
        axis[slot] = ax
        left[slot] = build(li, depth + 1)
        right[slot] = build(ri, depth + 1)
        return slot

    build(np.arange(n, dtype=np.int64), 1)
    return {
        "bounds": np.ascontiguousarray(np.stack(bounds)),
        "left": np.array(left, dtype=np.int64),
        "right": np.array(right, dtype=np.int64),
        "count": np.array(count, dtype=np.int64),
        "axis": np.array(axis, dtype=np.int64),
        "order": order,
        "depth": deepest,
    }


def _triangle_boxes(vertices, faces):
    tri = vertices[faces]                      # (n, 3, 3)
    return tri.min(axis=1), tri.max(axis=1)


def _refit_boxes(nodes, box_lo, box_hi):
    bounds = nodes["bounds"]
    left = nodes["left"]
    right = nodes["right"]
    count = nodes["count"]
    order = nodes["order"]
    for i in range(bounds.shape[0] - 1, -1, -1):
        if count[i] > 0:
            sel = order[left[i]:left[i] + count[i]]
            bounds[i, :3] = box_lo[sel].min(axis=0)
            bounds[i, 3:] = box_hi[sel].max(axis=0)
        else:
            bounds[i, :3] = np.minimum(bounds[left[i], :3], bounds[right[i], :3])
            bounds[i, 3:] = np.maximum(bounds[left[i], 3:], bounds[right[i], 3:])


@dataclass
class Blas:
    """Bottom-level BVH over one triangle mesh or one AABB list."""

    nodes: dict
    kind: int
    geom_type: int = -1
    vertices: Optional[np.ndarray] = None
    faces: Optional[np.ndarray] = None
    aabbs: Optional[np.ndarray] = None
    data_offset: int = 0

    @classmethod
    def from_mesh(cls, vertices, faces, quality="balanced") -> "Blas":
        vertices = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.ascontiguousarray(faces, dtype=np.int64).reshape(-1, 3)
        if faces.shape[0] == 0:
            raise BuildError("cannot build over zero primitives")
        if faces.min() < 0 or faces.max() >= vertices.shape[0]:
            raise BuildError("face index out of range")
        lo, hi = _triangle_boxes(vertices, faces)
        bad = ~np.isfinite(lo).all(axis=1) | ~np.isfinite(hi).all(axis=1)
        if bad.any():
            raise BuildError(f"non-finite bounds for primitive {int(np.argmax(bad))}")
        nodes = _build_bvh(lo, hi, quality)
        return cls(nodes, TRIANGLES, vertices=vertices, faces=faces)

    @classmethod
    def from_aabbs(cls, aabbs, geom_type, quality="balanced", data_offset=0) -> "Blas":
        aabbs = np.ascontiguousarray(aabbs, dtype=np.float64).reshape(-1, 6)
        if aabbs.shape[0] == 0:
            raise BuildError("cannot build over zero primitives")
        bad = ~np.isfinite(aabbs).all(axis=1)
        if bad.any():
            raise BuildError(f"non-finite bounds for primitive {int(np.argmax(bad))}")
        nodes = _build_bvh(aabbs[:, :3].copy(), aabbs[:, 3:].copy(), quality)
        return cls(nodes, CUSTOM, geom_type=int(geom_type), aabbs=aabbs,
                   data_offset=int(data_offset))

    @property
    def prim_count(self) -> int:
        return self.faces.shape[0] if self.kind == TRIANGLES else self.aabbs.shape[0]

    @property
    def depth(self) -> int:
        return self.nodes["depth"]

    @property
    def root_box(self):
        from .geometry import Aabb
        return Aabb(self.nodes["bounds"][0, :3].copy(), self.nodes["bounds"][0, 3:].copy())

    def refit(self, vertices=None, aabbs=None):
        """Recompute boxes bottom-up for deformed geometry; topology is kept."""
        if self.kind == TRIANGLES:
            if vertices is None:
                raise ValueError("triangle refit needs updated vertex positions")
            vertices = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 3)
            if vertices.shape[0] != self.vertices.shape[0]:
                raise ValueError(
                    f"vertex count changed ({self.vertices.shape[0]} -> {vertices.shape[0]})")
            self.vertices = vertices
            lo, hi = _triangle_boxes(vertices, self.faces)
        else:
            if aabbs is None:
                raise ValueError("custom refit needs updated AABBs")
            aabbs = np.ascontiguousarray(aabbs, dtype=np.float64).reshape(-1, 6)
            if aabbs.shape[0] != self.aabbs.shape[0]:
                raise ValueError(
                    f"primitive count changed ({self.aabbs.shape[0]} -> {aabbs.shape[0]})")
            self.aabbs = aabbs
            lo, hi = aabbs[:, :3], aabbs[:, 3:]
        _refit_boxes(self.nodes, lo, hi)


# ---------------------------------------------------------------------------
# instance frames
# ---------------------------------------------------------------------------

@dataclass
class SrtFrame:
    """Scale, axis-angle rotation, translation; composed as T * R * S."""

    scale: np.ndarray = field(default_factory=lambda: np.ones(3))
    rotation_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    rotation_angle: float = 0.0
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.scale = _as_vec3(self.scale, "scale")
        self.rotation_axis = _as_vec3(self.rotation_axis, "rotation_axis")
        self.translation = _as_vec3(self.translation, "translation")
        if np.any(self.scale == 0.0):
            raise ValueError("scale components must be nonzero")
        if self.rotation_angle != 0.0:
            alen = math.sqrt(float(np.dot(self.rotation_axis, self.rotation_axis)))
            if abs(alen - 1.0) > 1e-6:
                raise ValueError("rotation axis must be unit length")


def frame_to_matrix(frame: SrtFrame) -> np.ndarray:
    """3x4 affine matrix for the frame, scale applied first in object space."""
    ax = frame.rotation_axis
    ang = frame.rotation_angle
    k = np.array([
        [0.0, -ax[2], ax[1]],
        [ax[2], 0.0, -ax[0]],
        [-ax[1], ax[0], 0.0],
    ])
    rot = np.eye(3) + math.sin(ang) * k + (1.0 - math.cos(ang)) * (k @ k)
    m = np.empty((3, 4))
    m[:, :3] = rot * frame.scale[None, :]
    m[:, 3] = frame.translation
    return m


def invert_affine(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    det = np.linalg.det(a[:, :3])
    if abs(det) <= 1e-12:
        raise ValueError("affine matrix is not invertible")
    inv3 = np.linalg.inv(a[:, :3])
    out = np.empty((3, 4))
    out[:, :3] = inv3
    out[:, 3] = -inv3 @ a[:, 3]
    return out


@dataclass
class Instance:
    blas_id: int
    frame: SrtFrame = field(default_factory=SrtFrame)
    mask: int = FULL_MASK

    def __post_init__(self):
        if not (0 <= self.mask <= FULL_MASK):
            raise ValueError("instance mask must fit in 32 bits")


def transform_ray_to_local(ray: Ray, inverse_matrix) -> Ray:
    """Map a world ray into instance-local space.

    The direction keeps the warped length so the local hit parameter equals
    the world hit parameter; t_min and t_max carry over unchanged.
    """
    inv = np.asarray(inverse_matrix, dtype=np.float64)
    origin = inv[:, :3] @ ray.origin + inv[:, 3]
    direction = inv[:, :3] @ ray.direction
    return Ray(origin, direction, ray.t_min, ray.t_max)


# ---------------------------------------------------------------------------
# custom intersection registry
# ---------------------------------------------------------------------------

class IntersectorRegistry:
    """Function table keyed by (geometry type, ray type).

    Entries pair a jitted intersector with its flat float64 data array. A
    missing entry only raises when a ray actually reaches an instance of
    that geometry type.
    """

    def __init__(self):
        self._entries = {}

    def register(self, geom_type: int, ray_type: int, fn, data):
        data = np.ascontiguousarray(data, dtype=np.float64).ravel()
        self._entries[(int(geom_type), int(ray_type))] = (fn, data)

    def resolve(self, geom_types, ray_type: int):
        """Dispatch table and geom_type -> slot map for one ray type."""
        present = sorted({int(g) for g in geom_types})
        size = (present[-1] + 1) if present else 0
        slots = np.full(size, -1, dtype=np.int64)
        table = []
        for g in present:
            entry = self._entries.get((g, int(ray_type)))
            if entry is not None:
                slots[g] = len(table)
                table.append(entry)
        return tuple(table), slots


@_jit
def sphere_intersector(data, prim, ox, oy, oz, dx, dy, dz, t_min, t_max):
    """Builtin custom primitive: data rows are (cx, cy, cz, radius)."""
    base = prim * 4
    return _sphere_hit(ox, oy, oz, dx, dy, dz, t_min, t_max,
                       data[base], data[base + 1], data[base + 2], data[base + 3])


def sphere_data(spheres) -> np.ndarray:
    """Flatten (center, radius) rows into intersector data."""
    arr = np.ascontiguousarray(spheres, dtype=np.float64).reshape(-1, 4)
    if np.any(arr[:, 3] <= 0.0):
        raise ValueError("sphere radius must be > 0")
    return arr.ravel().copy()


def sphere_aabbs(spheres) -> np.ndarray:
    arr = np.asarray(spheres, dtype=np.float64).reshape(-1, 4)
    out = np.empty((arr.shape[0], 6))
    out[:, :3] = arr[:, :3] - arr[:, 3:4]
    out[:, 3:] = arr[:, :3] + arr[:, 3:4]
    return out


def make_sphere_registry(data, ray_types=(0,)) -> IntersectorRegistry:
    reg = IntersectorRegistry()
    for rt in ray_types:
        reg.register(SPHERE_GEOM_TYPE, rt, sphere_intersector, data)
    return reg


# ---------------------------------------------------------------------------
# top level
# ---------------------------------------------------------------------------

TlasBundle = namedtuple("TlasBundle", [
    "t_bounds", "t_left", "t_right", "t_count", "t_axis", "t_order",
    "i_blas", "i_mask", "i_inv",
    "b_node_ofs", "b_prim_ofs", "b_kind", "b_geom", "b_data_ofs", "b_tri_ofs",
    "n_bounds", "n_left", "n_right", "n_count", "n_axis",
    "prim_order", "tri_vidx", "verts",
])


class Tlas:
    """Top-level BVH over transformed instances with cached inverses."""

    def __init__(self, instances, blases, quality="balanced"):
        if len(instances) == 0:
            raise BuildError("a scene needs at least one instance")
        self.instances = list(instances)
        self.blases = list(blases)
        n = len(self.instances)
        self.matrices = np.empty((n, 3, 4))
        self.inverses = np.empty((n, 3, 4))
        world_lo = np.empty((n, 3))
        world_hi = np.empty((n, 3))
        for i, inst in enumerate(self.instances):
            if not (0 <= inst.blas_id < len(self.blases)):
                raise BuildError(f"instance {i} references unknown blas {inst.blas_id}")
            m = frame_to_matrix(inst.frame)
            try:
                self.inverses[i] = invert_affine(m)
            except ValueError as exc:
                raise BuildError(f"instance {i} frame is not invertible") from exc
            self.matrices[i] = m
            root = self.blases[inst.blas_id].nodes["bounds"][0]
            corners = np.array([
                [root[3 * (s & 1)], root[1 + 3 * ((s >> 1) & 1)], root[2 + 3 * ((s >> 2) & 1)]]
                for s in range(8)
            ])
            pts = corners @ m[:, :3].T + m[:, 3]
            world_lo[i] = pts.min(axis=0)
            world_hi[i] = pts.max(axis=0)
        self.world_lo = world_lo
        self.world_hi = world_hi
        self.nodes = _build_bvh(world_lo, world_hi, quality)
        self.bundle = self._flatten()

    @property
    def root_box(self):
        from .geometry import Aabb
        return Aabb(self.nodes["bounds"][0, :3].copy(), self.nodes["bounds"][0, 3:].copy())

    def custom_geom_types(self):
        return sorted({b.geom_type for b in self.blases if b.kind == CUSTOM})

    def refresh_instance_bounds(self):
        """Refit the top level after blas refits or frame edits."""
        for i, inst in enumerate(self.instances):
            m = frame_to_matrix(inst.frame)
            self.matrices[i] = m
            self.inverses[i] = invert_affine(m)
            root = self.blases[inst.blas_id].nodes["bounds"][0]
            corners = np.array([
                [root[3 * (s & 1)], root[1 + 3 * ((s >> 1) & 1)], root[2 + 3 * ((s >> 2) & 1)]]
                for s in range(8)
            ])
            pts = corners @ m[:, :3].T + m[:, 3]
            self.world_lo[i] = pts.min(axis=0)
            self.world_hi[i] = pts.max(axis=0)
        _refit_boxes(self.nodes, self.world_lo, self.world_hi)
        self.bundle = self._flatten()

    def _flatten(self) -> TlasBundle:
        nb = len(self.blases)
        node_ofs = np.zeros(nb + 1, dtype=np.int64)
        prim_ofs = np.zeros(nb + 1, dtype=np.int64)
        tri_ofs = np.zeros(nb + 1, dtype=np.int64)
        kinds = np.zeros(nb, dtype=np.int64)
        geoms = np.full(nb, -1, dtype=np.int64)
        data_ofs = np.zeros(nb, dtype=np.int64)
        vert_ofs = 0
        n_bounds = []
        n_left = []
        n_right = []
        n_count = []
        n_axis = []
        orders = []
        vidx = []
        verts = []
        for b, blas in enumerate(self.blases):
            node_ofs[b + 1] = node_ofs[b] + blas.nodes["bounds"].shape[0]
            prim_ofs[b + 1] = prim_ofs[b] + blas.prim_count
            kinds[b] = blas.kind
            geoms[b] = blas.geom_type
            data_ofs[b] = blas.data_offset
            n_bounds.append(blas.nodes["bounds"])
            n_left.append(blas.nodes["left"])
            n_right.append(blas.nodes["right"])
            n_count.append(blas.nodes["count"])
            n_axis.append(blas.nodes["axis"])
            orders.append(blas.nodes["order"])
            if blas.kind == TRIANGLES:
                tri_ofs[b + 1] = tri_ofs[b] + blas.faces.shape[0]
                vidx.append(blas.faces + vert_ofs)
                verts.append(blas.vertices)
                vert_ofs += blas.vertices.shape[0]
            else:
                tri_ofs[b + 1] = tri_ofs[b]
        inst_blas = np.array([i.blas_id for i in self.instances], dtype=np.int64)
        inst_mask = np.array([i.mask for i in self.instances], dtype=np.uint64)
        return TlasBundle(
            np.ascontiguousarray(self.nodes["bounds"]),
            self.nodes["left"], self.nodes["right"],
            self.nodes["count"], self.nodes["axis"], self.nodes["order"],
            inst_blas, inst_mask, np.ascontiguousarray(self.inverses),
            node_ofs, prim_ofs, kinds, geoms, data_ofs, tri_ofs,
            np.ascontiguousarray(np.concatenate(n_bounds)),
            np.concatenate(n_left), np.concatenate(n_right),
            np.concatenate(n_count), np.concatenate(n_axis),
            np.concatenate(orders),
            np.ascontiguousarray(np.concatenate(vidx)) if vidx else np.zeros((0, 3), dtype=np.int64),
            np.ascontiguousarray(np.concatenate(verts)) if verts else np.zeros((0, 3)),
        )


def build_tlas(instances, blases, quality="balanced") -> Tlas:
    return Tlas(instances, blases, quality)


# ---------------------------------------------------------------------------
# traversal kernels
# ---------------------------------------------------------------------------

@njit(nogil=True, error_model="numpy", cache=True)
def _custom_hit(table, slot, prim, ox, oy, oz, dx, dy, dz, t_min, t_max):
    t = -1.0
    nx = 0.0
    ny = 0.0
    nz = 0.0
    if len(table) > 0:
        i = 0
        for fd in literal_unroll(table):
            if i == slot:
                t, nx, ny, nz = fd[0](fd[1], prim, ox, oy, oz, dx, dy, dz, t_min, t_max)
            i += 1
    return t, nx, ny, nz


@_jit_inline
def _blas_closest(bd, table, b, slot, ox, oy, oz, dx, dy, dz,
                  t_min, best_t, stack):
    """Best hit inside one blas; ties resolve to the lowest primitive index.

    Returns (found, t, prim, nx, ny, nz, u, v, tests, visits) with the
    normal in blas-local space.
    """
    node0 = bd.b_node_ofs[b]
    prim0 = bd.b_prim_ofs[b]
    kind = bd.b_kind[b]
    tri0 = bd.b_tri_ofs[b]
    data0 = bd.b_data_ofs[b]
    ix = 1.0 / dx
    iy = 1.0 / dy
    iz = 1.0 / dz
    found = 0
    cur_t = best_t
    cur_prim = _PRIM_SENTINEL
    hnx = hny = hnz = 0.0
    hu = hv = 0.0
    tests = 0
    visits = 0
    sp = 1
    stack[0] = 0
    while sp > 0:
        sp -= 1
        row = node0 + stack[sp]
        visits += 1
        if not _aabb_hit(ox, oy, oz, ix, iy, iz, t_min, cur_t,
                         bd.n_bounds[row, 0], bd.n_bounds[row, 1], bd.n_bounds[row, 2],
                         bd.n_bounds[row, 3], bd.n_bounds[row, 4], bd.n_bounds[row, 5]):
            continue
        cnt = bd.n_count[row]
        if cnt > 0:
            first = prim0 + bd.n_left[row]
            for k in range(cnt):
                prim = bd.prim_order[first + k]
                tests += 1
                if kind == TRIANGLES:
                    tri = tri0 + prim
                    ia = bd.tri_vidx[tri, 0]
                    ib = bd.tri_vidx[tri, 1]
                    ic = bd.tri_vidx[tri, 2]
                    t, u, v, nx, ny, nz = _tri_hit(
                        ox, oy, oz, dx, dy, dz, t_min, cur_t,
                        bd.verts[ia, 0], bd.verts[ia, 1], bd.verts[ia, 2],
                        bd.verts[ib, 0], bd.verts[ib, 1], bd.verts[ib, 2],
                        bd.verts[ic, 0], bd.verts[ic, 1], bd.verts[ic, 2])
                else:
                    t, nx, ny, nz = _custom_hit(table, slot, data0 + prim,
                                                ox, oy, oz, dx, dy, dz, t_min, cur_t)
                    u = 0.0
                    v = 0.0
                if t >= 0.0 and (t < cur_t or (t == cur_t and prim < cur_prim)):
                    found = 1
                    cur_t = t
                    cur_prim = prim
                    hnx = nx
                    hny = ny
                    hnz = nz
                    hu = u
                    hv = v
        else:
            ax = bd.n_axis[row]
            if ax == 0:
                d = dx
            elif ax == 1:
                d = dy
            else:
                d = dz
            if d >= 0.0:
                stack[sp] = bd.n_right[row]
                stack[sp + 1] = bd.n_left[row]
            else:
                stack[sp] = bd.n_left[row]
                stack[sp + 1] = bd.n_right[row]
            sp += 2
    return found, cur_t, cur_prim, hnx, hny, hnz, hu, hv, tests, visits


@_jit_inline
def _blas_any(bd, table, b, slot, ox, oy, oz, dx, dy, dz, t_min, t_max, stack):
    node0 = bd.b_node_ofs[b]
    prim0 = bd.b_prim_ofs[b]
    kind = bd.b_kind[b]
    tri0 = bd.b_tri_ofs[b]
    data0 = bd.b_data_ofs[b]
    ix = 1.0 / dx
    iy = 1.0 / dy
    iz = 1.0 / dz
    sp = 1
    stack[0] = 0
    while sp > 0:
        sp -= 1
        row = node0 + stack[sp]
        if not _aabb_hit(ox, oy, oz, ix, iy, iz, t_min, t_max,
                         bd.n_bounds[row, 0], bd.n_bounds[row, 1], bd.n_bounds[row, 2],
                         bd.n_bounds[row, 3], bd.n_bounds[row, 4], bd.n_bounds[row, 5]):
            continue
        cnt = bd.n_count[row]
        if cnt > 0:
            first = prim0 + bd.n_left[row]
            for k in range(cnt):
                prim = bd.prim_order[first + k]
                if kind == TRIANGLES:
                    tri = tri0 + prim
                    ia = bd.tri_vidx[tri, 0]
                    ib = bd.tri_vidx[tri, 1]
                    ic = bd.tri_vidx[tri, 2]
                    t, _, _, _, _, _ = _tri_hit(
                        ox, oy, oz, dx, dy, dz, t_min, t_max,
                        bd.verts[ia, 0], bd.verts[ia, 1], bd.verts[ia, 2],
                        bd.verts[ib, 0], bd.verts[ib, 1], bd.verts[ib, 2],
                        bd.verts[ic, 0], bd.verts[ic, 1], bd.verts[ic, 2])
                else:
                    t, _, _, _ = _custom_hit(table, slot, data0 + prim,
                                             ox, oy, oz, dx, dy, dz, t_min, t_max)
                if t >= 0.0:
                    return 1
        else:
            stack[sp] = bd.n_left[row]
            stack[sp + 1] = bd.n_right[row]
            sp += 2
    return 0


@_jit_inline
def _blas_collect(bd, table, b, slot, inst, ox, oy, oz, dx, dy, dz,
                  t_min, t_max, stack, n_found,
                  out_t, out_inst, out_prim, out_n, out_uv):
    node0 = bd.b_node_ofs[b]
    prim0 = bd.b_prim_ofs[b]
    kind = bd.b_kind[b]
    tri0 = bd.b_tri_ofs[b]
    data0 = bd.b_data_ofs[b]
    ix = 1.0 / dx
    iy = 1.0 / dy
    iz = 1.0 / dz
    cap = out_t.shape[0]
    sp = 1
    stack[0] = 0
    while sp > 0:
        sp -= 1
        row = node0 + stack[sp]
        if not _aabb_hit(ox, oy, oz, ix, iy, iz, t_min, t_max,
                         bd.n_bounds[row, 0], bd.n_bounds[row, 1], bd.n_bounds[row, 2],
                         bd.n_bounds[row, 3], bd.n_bounds[row, 4], bd.n_bounds[row, 5]):
            continue
        cnt = bd.n_count[row]
        if cnt > 0:
            first = prim0 + bd.n_left[row]
            for k in range(cnt):
                prim = bd.prim_order[first + k]
                if kind == TRIANGLES:
                    tri = tri0 + prim
                    ia = bd.tri_vidx[tri, 0]
                    ib = bd.tri_vidx[tri, 1]
                    ic = bd.tri_vidx[tri, 2]
                    t, u, v, nx, ny, nz = _tri_hit(
                        ox, oy, oz, dx, dy, dz, t_min, t_max,
                        bd.verts[ia, 0], bd.verts[ia, 1], bd.verts[ia, 2],
                        bd.verts[ib, 0], bd.verts[ib, 1], bd.verts[ib, 2],
                        bd.verts[ic, 0], bd.verts[ic, 1], bd.verts[ic, 2])
                else:
                    t, nx, ny, nz = _custom_hit(table, slot, data0 + prim,
                                                ox, oy, oz, dx, dy, dz, t_min, t_max)
                    u = 0.0
                    v = 0.0
                if t >= 0.0:
                    if n_found < cap:
                        out_t[n_found] = t
                        out_inst[n_found] = inst
                        out_prim[n_found] = prim
                        out_n[n_found, 0] = nx
                        out_n[n_found, 1] = ny
                        out_n[n_found, 2] = nz
                        out_uv[n_found, 0] = u
                        out_uv[n_found, 1] = v
                    n_found += 1
        else:
            stack[sp] = bd.n_left[row]
            stack[sp + 1] = bd.n_right[row]
            sp += 2
    return n_found


@njit(nogil=True, error_model="numpy", cache=True)
def _tlas_closest(bd, table, slots, ox, oy, oz, dx, dy, dz,
                  t_min, t_max, ray_mask, tstack, bstack):
    """Scene-wide closest hit.

    Returns (status, t, inst, prim, nx, ny, nz, u, v, tests, visits) with a
    world-space normal. status: 1 hit, 0 miss, -1 missing registry entry
    (the offending geometry type is returned in the inst field).
    """
    best_t = t_max
    best_inst = -1
    best_prim = -1
    lnx = lny = lnz = 0.0
    hu = hv = 0.0
    tests = 0
    visits = 0
    ix = 1.0 / dx
    iy = 1.0 / dy
    iz = 1.0 / dz
    sp = 1
    tstack[0] = 0
    while sp > 0:
        sp -= 1
        node = tstack[sp]
        visits += 1
        if not _aabb_hit(ox, oy, oz, ix, iy, iz, t_min, best_t,
                         bd.t_bounds[node, 0], bd.t_bounds[node, 1], bd.t_bounds[node, 2],
                         bd.t_bounds[node, 3], bd.t_bounds[node, 4], bd.t_bounds[node, 5]):
            continue
        cnt = bd.t_count[node]
        if cnt > 0:
            first = bd.t_left[node]
            for k in range(cnt):
                inst = bd.t_order[first + k]
                if (bd.i_mask[inst] & ray_mask) == np.uint64(0):
                    continue
                b = bd.i_blas[inst]
                slot = -1
                if bd.b_kind[b] == CUSTOM:
                    slot = slots[bd.b_geom[b]]
                    if slot < 0:
                        return -1, 0.0, bd.b_geom[b], -1, 0.0, 0.0, 0.0, 0.0, 0.0, tests, visits
                lox = bd.i_inv[inst, 0, 0] * ox + bd.i_inv[inst, 0, 1] * oy + bd.i_inv[inst, 0, 2] * oz + bd.i_inv[inst, 0, 3]
                loy = bd.i_inv[inst, 1, 0] * ox + bd.i_inv[inst, 1, 1] * oy + bd.i_inv[inst, 1, 2] * oz + bd.i_inv[inst, 1, 3]
                loz = bd.i_inv[inst, 2, 0] * ox + bd.i_inv[inst, 2, 1] * oy + bd.i_inv[inst, 2, 2] * oz + bd.i_inv[inst, 2, 3]
                ldx = bd.i_inv[inst, 0, 0] * dx + bd.i_inv[inst, 0, 1] * dy + bd.i_inv[inst, 0, 2] * dz
                ldy = bd.i_inv[inst, 1, 0] * dx + bd.i_inv[inst, 1, 1] * dy + bd.i_inv[inst, 1, 2] * dz
                ldz = bd.i_inv[inst, 2, 0] * dx + bd.i_inv[inst, 2, 1] * dy + bd.i_inv[inst, 2, 2] * dz
                found, t, prim, nx, ny, nz, u, v, tt, vv = _blas_closest(
                    bd, table, b, slot, lox, loy, loz, ldx, ldy, ldz,
                    t_min, best_t, bstack)
                tests += tt
                visits += vv
                if found == 1 and (t < best_t or (t == best_t and
                                                  (inst < best_inst or
                                                   (inst == best_inst and prim < best_prim)))):
                    best_t = t
                    best_inst = inst
                    best_prim = prim
                    lnx = nx
                    lny = ny
                    lnz = nz
                    hu = u
                    hv = v
        else:
            ax = bd.t_axis[node]
            if ax == 0:
                d = dx
            elif ax == 1:
                d = dy
            else:
                d = dz
            if d >= 0.0:
                tstack[sp] = bd.t_right[node]
                tstack[sp + 1] = bd.t_left[node]
            else:
                tstack[sp] = bd.t_left[node]
                tstack[sp + 1] = bd.t_right[node]
            sp += 2
    if best_inst < 0:
        return 0, 0.0, -1, -1, 0.0, 0.0, 0.0, 0.0, 0.0, tests, visits
    # world normal via the inverse transpose, renormalized
    wnx = bd.i_inv[best_inst, 0, 0] * lnx + bd.i_inv[best_inst, 1, 0] * lny + bd.i_inv[best_inst, 2, 0] * lnz
    wny = bd.i_inv[best_inst, 0, 1] * lnx + bd.i_inv[best_inst, 1, 1] * lny + bd.i_inv[best_inst, 2, 1] * lnz
    wnz = bd.i_inv[best_inst, 0, 2] * lnx + bd.i_inv[best_inst, 1, 2] * lny + bd.i_inv[best_inst, 2, 2] * lnz
    inv_len = 1.0 / math.sqrt(wnx * wnx + wny * wny + wnz * wnz)
    return (1, best_t, best_inst, best_prim,
            wnx * inv_len, wny * inv_len, wnz * inv_len, hu, hv, tests, visits)


@njit(nogil=True, error_model="numpy", cache=True)
def _tlas_any(bd, table, slots, ox, oy, oz, dx, dy, dz,
              t_min, t_max, ray_mask, tstack, bstack):
    """First accepted hit wins: 1 hit, 0 none, -1 missing registry entry."""
    ix = 1.0 / dx
    iy = 1.0 / dy
    iz = 1.0 / dz
    sp = 1
    tstack[0] = 0
    err_geom = -1
    while sp > 0:
        sp -= 1
        node = tstack[sp]
        if not _aabb_hit(ox, oy, oz, ix, iy, iz, t_min, t_max,
                         bd.t_bounds[node, 0], bd.t_bounds[node, 1], bd.t_bounds[node, 2],
                         bd.t_bounds[node, 3], bd.t_bounds[node, 4], bd.t_bounds[node, 5]):
            continue
        cnt = bd.t_count[node]
        if cnt > 0:
            first = bd.t_left[node]
            for k in range(cnt):
                inst = bd.t_order[first + k]
                if (bd.i_mask[inst] & ray_mask) == np.uint64(0):
                    continue
                b = bd.i_blas[inst]
                slot = -1
                if bd.b_kind[b] == CUSTOM:
                    slot = slots[bd.b_geom[b]]
                    if slot < 0:
                        return -1, bd.b_geom[b]
                lox = bd.i_inv[inst, 0, 0] * ox + bd.i_inv[inst, 0, 1] * oy + bd.i_inv[inst, 0, 2] * oz + bd.i_inv[inst, 0, 3]
                loy = bd.i_inv[inst, 1, 0] * ox + bd.i_inv[inst, 1, 1] * oy + bd.i_inv[inst, 1, 2] * oz + bd.i_inv[inst, 1, 3]
                loz = bd.i_inv[inst, 2, 0] * ox + bd.i_inv[inst, 2, 1] * oy + bd.i_inv[inst, 2, 2] * oz + bd.i_inv[inst, 2, 3]
                ldx = bd.i_inv[inst, 0, 0] * dx + bd.i_inv[inst, 0, 1] * dy + bd.i_inv[inst, 0, 2] * dz
                ldy = bd.i_inv[inst, 1, 0] * dx + bd.i_inv[inst, 1, 1] * dy + bd.i_inv[inst, 1, 2] * dz
                ldz = bd.i_inv[inst, 2, 0] * dx + bd.i_inv[inst, 2, 1] * dy + bd.i_inv[inst, 2, 2] * dz
                if _blas_any(bd, table, b, slot, lox, loy, loz, ldx, ldy, ldz,
                             t_min, t_max, bstack) == 1:
                    return 1, err_geom
        else:
            tstack[sp] = bd.t_left[node]
            tstack[sp + 1] = bd.t_right[node]
            sp += 2
    return 0, err_geom


@njit(nogil=True, error_model="numpy", cache=True)
def _tlas_collect(bd, table, slots, ox, oy, oz, dx, dy, dz,
                  t_min, t_max, ray_mask, tstack, bstack,
                  out_t, out_inst, out_prim, out_n, out_uv):
    """Enumerate every intersection once; returns (count, err_geom).

    Writes stop at capacity but counting continues so callers can grow the
    buffers and rerun. Normals are left in blas-local space.
    """
    ix = 1.0 / dx
    iy = 1.0 / dy
    iz = 1.0 / dz
    n_found = 0
    sp = 1
    tstack[0] = 0
    while sp > 0:
        sp -= 1
        node = tstack[sp]
        if not _aabb_hit(ox, oy, oz, ix, iy, iz, t_min, t_max,
                         bd.t_bounds[node, 0], bd.t_bounds[node, 1], bd.t_bounds[node, 2],
                         bd.t_bounds[node, 3], bd.t_bounds[node, 4], bd.t_bounds[node, 5]):
            continue
        cnt = bd.t_count[node]
        if cnt > 0:
            first = bd.t_left[node]
            for k in range(cnt):
                inst = bd.t_order[first + k]
                if (bd.i_mask[inst] & ray_mask) == np.uint64(0):
                    continue
                b = bd.i_blas[inst]
                slot = -1
                if bd.b_kind[b] == CUSTOM:
                    slot = slots[bd.b_geom[b]]
                    if slot < 0:
                        return -1, bd.b_geom[b]
                lox = bd.i_inv[inst, 0, 0] * ox + bd.i_inv[inst, 0, 1] * oy + bd.i_inv[inst, 0, 2] * oz + bd.i_inv[inst, 0, 3]
                loy = bd.i_inv[inst, 1, 0] * ox + bd.i_inv[inst, 1, 1] * oy + bd.i_inv[inst, 1, 2] * oz + bd.i_inv[inst, 1, 3]
                loz = bd.i_inv[inst, 2, 0] * ox + bd.i_inv[inst, 2, 1] * oy + bd.i_inv[inst, 2, 2] * oz + bd.i_inv[inst, 2, 3]
                ldx = bd.i_inv[inst, 0, 0] * dx + bd.i_inv[inst, 0, 1] * dy + bd.i_inv[inst, 0, 2] * dz
                ldy = bd.i_inv[inst, 1, 0] * dx + bd.i_inv[inst, 1, 1] * dy + bd.i_inv[inst, 1, 2] * dz
                ldz = bd.i_inv[inst, 2, 0] * dx + bd.i_inv[inst, 2, 1] * dy + bd.i_inv[inst, 2, 2] * dz
                n_found = _blas_collect(bd, table, b, slot, inst,
                                        lox, loy, loz, ldx, ldy, ldz,
                                        t_min, t_max, bstack, n_found,
                                        out_t, out_inst, out_prim, out_n, out_uv)
        else:
            tstack[sp] = bd.t_left[node]
            tstack[sp + 1] = bd.t_right[node]
            sp += 2
    return n_found, -1


@njit(nogil=True, error_model="numpy", cache=True)
def _closest_batch(bd, table, slots, origins, dirs, t_min, t_max, ray_mask,
                   out, out_n, stats):
    tstack = np.empty(MAX_STACK_DEPTH, dtype=np.int64)
    bstack = np.empty(MAX_STACK_DEPTH, dtype=np.int64)
    for i in range(origins.shape[0]):
        status, t, inst, prim, nx, ny, nz, u, v, tests, visits = _tlas_closest(
            bd, table, slots,
            origins[i, 0], origins[i, 1], origins[i, 2],
            dirs[i, 0], dirs[i, 1], dirs[i, 2],
            t_min[i], t_max[i], ray_mask, tstack, bstack)
        if status < 0:
            return inst
        if status == 0:
            out[i, 0] = -1.0
        else:
            out[i, 0] = t
            out[i, 1] = inst
            out[i, 2] = prim
            out[i, 3] = u
            out[i, 4] = v
            out_n[i, 0] = nx
            out_n[i, 1] = ny
            out_n[i, 2] = nz
        stats[i, 0] = tests
        stats[i, 1] = visits
    return -1


@njit(nogil=True, error_model="numpy", cache=True)
def _any_batch(bd, table, slots, origins, dirs, t_min, t_max, ray_mask, out):
    tstack = np.empty(MAX_STACK_DEPTH, dtype=np.int64)
    bstack = np.empty(MAX_STACK_DEPTH, dtype=np.int64)
    for i in range(origins.shape[0]):
        status, err = _tlas_any(
            bd, table, slots,
            origins[i, 0], origins[i, 1], origins[i, 2],
            dirs[i, 0], dirs[i, 1], dirs[i, 2],
            t_min[i], t_max[i], ray_mask, tstack, bstack)
        if status < 0:
            return err
        out[i] = status == 1
    return -1


# ---------------------------------------------------------------------------
# query API
# ---------------------------------------------------------------------------

_EMPTY_SLOTS = np.full(0, -1, dtype=np.int64)


def _dispatch_for(tlas, registry, ray_type):
    geoms = tlas.custom_geom_types()
    if not geoms:
        return (), _EMPTY_SLOTS
    if registry is None:
        return (), np.full(geoms[-1] + 1, -1, dtype=np.int64)
    return registry.resolve(geoms, ray_type)


def _registry_error(geom_type, ray_type):
    return RegistryError(
        f"no intersection function registered for geometry type {geom_type} "
        f"and ray type {ray_type}")


def _check_mask(ray_mask):
    if not (0 <= ray_mask <= FULL_MASK):
        raise ValueError("ray mask must fit in 32 bits")
    return np.uint64(ray_mask)


def closest_hit(tlas: Tlas, ray: Ray, ray_mask: int = FULL_MASK,
                ray_type: int = 0, registry: Optional[IntersectorRegistry] = None
                ) -> Optional[Hit]:
    """Minimum-t hit over all instances passing the mask test.

    Equal-t ties resolve to the lowest instance index, then the lowest
    primitive index.
    """
    table, slots = _dispatch_for(tlas, registry, ray_type)
    mask = _check_mask(ray_mask)
    tstack = np.empty(MAX_STACK_DEPTH, dtype=np.int64)
    bstack = np.empty(MAX_STACK_DEPTH, dtype=np.int64)
    status, t, inst, prim, nx, ny, nz, u, v, _, _ = _tlas_closest(
        tlas.bundle, table, slots,
        ray.origin[0], ray.origin[1], ray.origin[2],
        ray.direction[0], ray.direction[1], ray.direction[2],
        ray.t_min, ray.t_max, mask, tstack, bstack)
    if status < 0:
        raise _registry_error(inst, ray_type)
    if status == 0:
        return None
    return Hit(t, int(prim), int(inst), vec3(nx, ny, nz), u, v)


def any_hit(tlas: Tlas, ray: Ray, ray_mask: int = FULL_MASK,
            ray_type: int = 0, registry: Optional[IntersectorRegistry] = None) -> bool:
    """True iff any accepted intersection exists; stops at the first one."""
    table, slots = _dispatch_for(tlas, registry, ray_type)
    mask = _check_mask(ray_mask)
    tstack = np.empty(MAX_STACK_DEPTH, dtype=np.int64)
    bstack = np.empty(MAX_STACK_DEPTH, dtype=np.int64)
    status, err = _tlas_any(
        tlas.bundle, table, slots,
        ray.origin[0], ray.origin[1], ray.origin[2],
        ray.direction[0], ray.direction[1], ray.direction[2],
        ray.t_min, ray.t_max, mask, tstack, bstack)
    if status < 0:
        raise _registry_error(err, ray_type)
    return status == 1


class TraversalState(Enum):
    IN_PROGRESS = "inProgress"
    FINISHED = "finished"


class TraversalCursor:
    """Iterates every intersection along a ray exactly once, unordered."""

    def __init__(self, tlas: Tlas, ray: Ray, ray_mask: int = FULL_MASK,
                 ray_type: int = 0, registry: Optional[IntersectorRegistry] = None):
        table, slots = _dispatch_for(tlas, registry, ray_type)
        mask = _check_mask(ray_mask)
        tstack = np.empty(MAX_STACK_DEPTH, dtype=np.int64)
        bstack = np.empty(MAX_STACK_DEPTH, dtype=np.int64)
        cap = 256
        while True:
            out_t = np.empty(cap)
            out_inst = np.empty(cap, dtype=np.int64)
            out_prim = np.empty(cap, dtype=np.int64)
            out_n = np.empty((cap, 3))
            out_uv = np.empty((cap, 2))
            n, err = _tlas_collect(
                tlas.bundle, table, slots,
                ray.origin[0], ray.origin[1], ray.origin[2],
                ray.direction[0], ray.direction[1], ray.direction[2],
                ray.t_min, ray.t_max, mask, tstack, bstack,
                out_t, out_inst, out_prim, out_n, out_uv)
            if n < 0:
                raise _registry_error(err, ray_type)
            if n <= cap:
                break
            cap = n
        # normals come back blas-local; map through each inverse transpose
        self._hits = []
        for i in range(n):
            inst = int(out_inst[i])
            inv = tlas.inverses[inst]
            wn = inv[:, :3].T @ out_n[i]
            self._hits.append(Hit(out_t[i], int(out_prim[i]), inst,
                                  wn / np.linalg.norm(wn), out_uv[i, 0], out_uv[i, 1]))
        self._pos = 0

    def __iter__(self):
        while True:
            h = next_hit(self)
            if h is None:
                return
            yield h


def next_hit(cursor: TraversalCursor) -> Optional[Hit]:
    if cursor._pos >= len(cursor._hits):
        return None
    h = cursor._hits[cursor._pos]
    cursor._pos += 1
    return h


def traversal_state(cursor: TraversalCursor) -> TraversalState:
    if cursor._pos >= len(cursor._hits):
        return TraversalState.FINISHED
    return TraversalState.IN_PROGRESS


def closest_hit_batch(tlas: Tlas, origins, dirs, t_min=0.0, t_max=DEFAULT_MAX_T,
                      ray_mask: int = FULL_MASK, ray_type: int = 0,
                      registry: Optional[IntersectorRegistry] = None,
                      with_stats: bool = False):
    """Array-of-rays closest hit.

    Returns (t, inst, prim, u, v, normal) arrays with t < 0 flagging misses,
    plus per-ray (triangle tests, node visits) when with_stats is set.
    """
    origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    n = origins.shape[0]
    t_min = np.broadcast_to(np.asarray(t_min, dtype=np.float64), (n,))
    t_max = np.broadcast_to(np.asarray(t_max, dtype=np.float64), (n,))
    table, slots = _dispatch_for(tlas, registry, ray_type)
    mask = _check_mask(ray_mask)
    out = np.full((n, 5), -1.0)
    out_n = np.zeros((n, 3))
    stats = np.zeros((n, 2), dtype=np.int64)
    err = _closest_batch(tlas.bundle, table, slots, origins, dirs,
                         np.ascontiguousarray(t_min), np.ascontiguousarray(t_max),
                         mask, out, out_n, stats)
    if err >= 0:
        raise _registry_error(err, ray_type)
    result = (out[:, 0], out[:, 1].astype(np.int64), out[:, 2].astype(np.int64),
              out[:, 3], out[:, 4], out_n)
    if with_stats:
        return result + (stats,)
    return result


def any_hit_batch(tlas: Tlas, origins, dirs, t_min=0.0, t_max=DEFAULT_MAX_T,
                  ray_mask: int = FULL_MASK, ray_type: int = 0,
                  registry: Optional[IntersectorRegistry] = None) -> np.ndarray:
    origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    n = origins.shape[0]
    t_min = np.broadcast_to(np.asarray(t_min, dtype=np.float64), (n,))
    t_max = np.broadcast_to(np.asarray(t_max, dtype=np.float64), (n,))
    table, slots = _dispatch_for(tlas, registry, ray_type)
    mask = _check_mask(ray_mask)
    out = np.zeros(n, dtype=np.bool_)
    err = _any_batch(tlas.bundle, table, slots, origins, dirs,
                     np.ascontiguousarray(t_min), np.ascontiguousarray(t_max), mask, out)
    if err >= 0:
        raise _registry_error(err, ray_type)
    return out
