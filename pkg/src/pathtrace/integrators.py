"""The renderers: flat eye shading, ambient occlusion, and two path tracers.

Every sample owns a private random stream derived from (seed, pixel,
sample), and each pixel only ever writes its own accumulator slot, so a
frame is bit-identical for any worker count. Workers are plain threads
running nogil kernels over disjoint pixel ranges.
"""

import math
import warnings
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .accel import MAX_STACK_DEPTH, _tlas_any, _tlas_closest
from .camera import _primary_dir, pixel_to_uv
from .geometry import _as_vec3, vec3
from .sampling import RandomStream, _cosine_dir, _onb, _stream_for, _uniform
from .scene_io import AccumBuffer

_jit = njit(cache=True, nogil=True, error_model="numpy")
_jit_inline = njit(cache=True, nogil=True, error_model="numpy", inline="always")

_FULL = np.uint64(0xFFFFFFFF)
_RAY_FAR = 1e30

INTEGRATORS = ("eye", "ao", "pt", "pt-nee")


@dataclass
class Material:
    """Lambertian albedo plus optional emission."""

    color: np.ndarray
    emissive: np.ndarray = None

    def __post_init__(self):
        self.color = _as_vec3(self.color, "color")
        if self.emissive is None:
            self.emissive = np.zeros(3)
        self.emissive = _as_vec3(self.emissive, "emissive")
        if np.any(self.color < 0.0) or np.any(self.color > 1.0):
            raise ValueError("albedo components must be in [0, 1]")
        if np.any(self.emissive < 0.0):
            raise ValueError("emission must be nonnegative")

    @property
    def has_emission(self) -> bool:
        return bool(np.any(self.emissive > 0.0))


@dataclass
class IntegratorConfig:
    max_depth: int = 8
    sky_color: Optional[np.ndarray] = None      # None: use the scene sky
    ao_ray_count: int = 16
    ao_max_length: float = 1e30
    normal_offset: Optional[float] = None       # None: 1e-4 of the scene diagonal

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.ao_ray_count < 1:
            raise ValueError("ao_ray_count must be >= 1")
        if not (self.ao_max_length > 0.0):
            raise ValueError("ao_max_length must be > 0")
        if self.sky_color is not None:
            self.sky_color = _as_vec3(self.sky_color, "sky_color")
        if self.normal_offset is not None and not (self.normal_offset > 0.0):
            raise ValueError("normal_offset must be > 0")


@dataclass
class SurfaceInfo:
    p: np.ndarray
    n: np.ndarray          # unit shading normal, faces the incoming ray
    material: Material


def offset_ray_origin(p, n, offset: float) -> np.ndarray:
    """Nudge a spawn point off its surface to dodge self-intersection."""
    return _as_vec3(p, "p") + _as_vec3(n, "n") * offset


def geometry_term(p, n_p, q, n_q) -> float:
    """Cosine-cosine over squared distance between two surface patches."""
    p = _as_vec3(p, "p")
    q = _as_vec3(q, "q")
    n_p = _as_vec3(n_p, "n_p")
    n_q = _as_vec3(n_q, "n_q")
    return _geom_term(p[0], p[1], p[2], n_p[0], n_p[1], n_p[2],
                      q[0], q[1], q[2], n_q[0], n_q[1], n_q[2])


@_jit_inline
def _geom_term(px, py, pz, npx, npy, npz, qx, qy, qz, nqx, nqy, nqz):
    wx = qx - px
    wy = qy - py
    wz = qz - pz
    d2 = wx * wx + wy * wy + wz * wz
    if d2 <= 0.0:
        return 0.0
    inv = 1.0 / math.sqrt(d2)
    wx *= inv
    wy *= inv
    wz *= inv
    cos_p = npx * wx + npy * wy + npz * wz
    cos_q = -(nqx * wx + nqy * wy + nqz * wz)
    if cos_p <= 0.0 or cos_q <= 0.0:
        return 0.0
    return cos_p * cos_q / d2


ShadeData = namedtuple("ShadeData", [
    "mat_color", "mat_emissive", "inst_material",
    "lv0", "lv1", "lv2", "ln", "lemis", "larea",
    "sky", "background",
])


# ---------------------------------------------------------------------------
# per-sample kernels
# ---------------------------------------------------------------------------

@_jit
def _sample_eye(bd, table, slots, shade, cam, u, v, state, inc, tstack, bstack):
    dx, dy, dz, _ = _primary_dir(cam[3], cam[4], cam[5], cam[6], cam[7], cam[8],
                                 cam[9], cam[10], cam[11], cam[12], u, v)
    status, t, inst, prim, nx, ny, nz, hu, hv, tests, visits = _tlas_closest(
        bd, table, slots, cam[0], cam[1], cam[2], dx, dy, dz,
        0.0, _RAY_FAR, _FULL, tstack, bstack)
    if status < 0:
        return 0.0, 0.0, 0.0, state, 1, inst
    if status == 0:
        return shade.background[0], shade.background[1], shade.background[2], state, 1, -1
    m = shade.inst_material[inst]
    return shade.mat_color[m, 0], shade.mat_color[m, 1], shade.mat_color[m, 2], state, 1, -1


@_jit
def _sample_ao(bd, table, slots, shade, cam, ao_count, ao_length, normal_offset,
               u, v, state, inc, tstack, bstack):
    dx, dy, dz, _ = _primary_dir(cam[3], cam[4], cam[5], cam[6], cam[7], cam[8],
                                 cam[9], cam[10], cam[11], cam[12], u, v)
    status, t, inst, prim, nx, ny, nz, hu, hv, tests, visits = _tlas_closest(
        bd, table, slots, cam[0], cam[1], cam[2], dx, dy, dz,
        0.0, _RAY_FAR, _FULL, tstack, bstack)
    nrays = 1
    if status < 0:
        return 0.0, state, nrays, inst
    if status == 0:
        return 1.0, state, nrays, -1
    if nx * dx + ny * dy + nz * dz > 0.0:
        nx = -nx
        ny = -ny
        nz = -nz
    px = cam[0] + dx * t + nx * normal_offset
    py = cam[1] + dy * t + ny * normal_offset
    pz = cam[2] + dz * t + nz * normal_offset
    tx, ty, tz, bx, by, bz = _onb(nx, ny, nz)
    occluded = 0
    for _i in range(ao_count):
        x0, state = _uniform(state, inc)
        x1, state = _uniform(state, inc)
        sx, sy, sz = _cosine_dir(x0, x1)
        wx = tx * sx + nx * sy + bx * sz
        wy = ty * sx + ny * sy + by * sz
        wz = tz * sx + nz * sy + bz * sz
        st, err = _tlas_any(bd, table, slots, px, py, pz, wx, wy, wz,
                            0.0, ao_length, _FULL, tstack, bstack)
        nrays += 1
        if st < 0:
            return 0.0, state, nrays, err
        occluded += st
    return 1.0 - occluded / ao_count, state, nrays, -1


@_jit
def _sample_pt(bd, table, slots, shade, cam, max_depth, normal_offset,
               u, v, state, inc, tstack, bstack):
    dx, dy, dz, _ = _primary_dir(cam[3], cam[4], cam[5], cam[6], cam[7], cam[8],
                                 cam[9], cam[10], cam[11], cam[12], u, v)
    ox = cam[0]
    oy = cam[1]
    oz = cam[2]
    rr = rg = rb = 0.0
    tr = tg = tb = 1.0
    nrays = 0
    for _depth in range(max_depth):
        status, t, inst, prim, nx, ny, nz, hu, hv, tests, visits = _tlas_closest(
            bd, table, slots, ox, oy, oz, dx, dy, dz,
            0.0, _RAY_FAR, _FULL, tstack, bstack)
        nrays += 1
        if status < 0:
            return 0.0, 0.0, 0.0, state, nrays, inst
        if status == 0:
            rr += tr * shade.sky[0]
            rg += tg * shade.sky[1]
            rb += tb * shade.sky[2]
            break
        m = shade.inst_material[inst]
        er = shade.mat_emissive[m, 0]
        eg = shade.mat_emissive[m, 1]
        eb = shade.mat_emissive[m, 2]
        if er > 0.0 or eg > 0.0 or eb > 0.0:
            rr += tr * er
            rg += tg * eg
            rb += tb * eb
            break
        if nx * dx + ny * dy + nz * dz > 0.0:
            nx = -nx
            ny = -ny
            nz = -nz
        px = ox + dx * t
        py = oy + dy * t
        pz = oz + dz * t
        x0, state = _uniform(state, inc)
        x1, state = _uniform(state, inc)
        sx, sy, sz = _cosine_dir(x0, x1)
        tx, ty, tz, bx, by, bz = _onb(nx, ny, nz)
        # cosine-weighted sampling cancels the cos/pi BRDF weight exactly
        dx = tx * sx + nx * sy + bx * sz
        dy = ty * sx + ny * sy + by * sz
        dz = tz * sx + nz * sy + bz * sz
        tr *= shade.mat_color[m, 0]
        tg *= shade.mat_color[m, 1]
        tb *= shade.mat_color[m, 2]
        ox = px + nx * normal_offset
        oy = py + ny * normal_offset
        oz = pz + nz * normal_offset
    return rr, rg, rb, state, nrays, -1


@_jit
def _sample_ptnee(bd, table, slots, shade, cam, max_depth, normal_offset,
                  u, v, state, inc, tstack, bstack):
    dx, dy, dz, _ = _primary_dir(cam[3], cam[4], cam[5], cam[6], cam[7], cam[8],
                                 cam[9], cam[10], cam[11], cam[12], u, v)
    ox = cam[0]
    oy = cam[1]
    oz = cam[2]
    rr = rg = rb = 0.0
    tr = tg = tb = 1.0
    nrays = 0
    n_lights = shade.larea.shape[0]
    for depth in range(max_depth):
        status, t, inst, prim, nx, ny, nz, hu, hv, tests, visits = _tlas_closest(
            bd, table, slots, ox, oy, oz, dx, dy, dz,
            0.0, _RAY_FAR, _FULL, tstack, bstack)
        nrays += 1
        if status < 0:
            return 0.0, 0.0, 0.0, state, nrays, inst
        if status == 0:
            # the sky is never importance-sampled, so it still pays on miss
            rr += tr * shade.sky[0]
            rg += tg * shade.sky[1]
            rb += tb * shade.sky[2]
            break
        m = shade.inst_material[inst]
        er = shade.mat_emissive[m, 0]
        eg = shade.mat_emissive[m, 1]
        eb = shade.mat_emissive[m, 2]
        if er > 0.0 or eg > 0.0 or eb > 0.0:
            # light hits only count before any bounce, the shadow rays
            # already carry the rest
            if depth == 0:
                rr += tr * er
                rg += tg * eg
                rb += tb * eb
            break
        if nx * dx + ny * dy + nz * dz > 0.0:
            nx = -nx
            ny = -ny
            nz = -nz
        px = ox + dx * t
        py = oy + dy * t
        pz = oz + dz * t
        # explicit light connection
        x0, state = _uniform(state, inc)
        x1, state = _uniform(state, inc)
        x2, state = _uniform(state, inc)
        li = int(x0 * n_lights)
        if li > n_lights - 1:
            li = n_lights - 1
        s = math.sqrt(x1)
        w0 = 1.0 - s
        w1 = s * (1.0 - x2)
        w2 = s * x2
        qx = w0 * shade.lv0[li, 0] + w1 * shade.lv1[li, 0] + w2 * shade.lv2[li, 0]
        qy = w0 * shade.lv0[li, 1] + w1 * shade.lv1[li, 1] + w2 * shade.lv2[li, 1]
        qz = w0 * shade.lv0[li, 2] + w1 * shade.lv1[li, 2] + w2 * shade.lv2[li, 2]
        g = _geom_term(px, py, pz, nx, ny, nz, qx, qy, qz,
                       shade.ln[li, 0], shade.ln[li, 1], shade.ln[li, 2])
        if g > 0.0:
            spx = px + nx * normal_offset
            spy = py + ny * normal_offset
            spz = pz + nz * normal_offset
            sqx = qx + shade.ln[li, 0] * normal_offset
            sqy = qy + shade.ln[li, 1] * normal_offset
            sqz = qz + shade.ln[li, 2] * normal_offset
            st, err = _tlas_any(bd, table, slots, spx, spy, spz,
                                sqx - spx, sqy - spy, sqz - spz,
                                0.0, 1.0 - 1e-3, _FULL, tstack, bstack)
            nrays += 1
            if st < 0:
                return 0.0, 0.0, 0.0, state, nrays, err
            if st == 0:
                pdf = (1.0 / n_lights) * (1.0 / shade.larea[li])
                scale = g / (math.pi * pdf)
                rr += tr * shade.mat_color[m, 0] * shade.lemis[li, 0] * scale
                rg += tg * shade.mat_color[m, 1] * shade.lemis[li, 1] * scale
                rb += tb * shade.mat_color[m, 2] * shade.lemis[li, 2] * scale
        # diffuse bounce, same as plain path tracing
        x0, state = _uniform(state, inc)
        x1, state = _uniform(state, inc)
        sx, sy, sz = _cosine_dir(x0, x1)
        tx, ty, tz, bx, by, bz = _onb(nx, ny, nz)
        dx = tx * sx + nx * sy + bx * sz
        dy = ty * sx + ny * sy + by * sz
        dz = tz * sx + nz * sy + bz * sz
        tr *= shade.mat_color[m, 0]
        tg *= shade.mat_color[m, 1]
        tb *= shade.mat_color[m, 2]
        ox = px + nx * normal_offset
        oy = py + ny * normal_offset
        oz = pz + nz * normal_offset
    return rr, rg, rb, state, nrays, -1


@_jit
def _render_chunk(bd, table, slots, shade, cam, integ, max_depth, ao_count,
                  ao_length, normal_offset, width, height, spp, seed, jitter,
                  pix_lo, pix_hi, acc):
    tstack = np.empty(MAX_STACK_DEPTH, dtype=np.int64)
    bstack = np.empty(MAX_STACK_DEPTH, dtype=np.int64)
    total_rays = 0
    for pix in range(pix_lo, pix_hi):
        xi = pix % width
        yi = pix // width
        for s in range(spp):
            state, inc = _stream_for(seed, pix, s)
            if jitter:
                ju, state = _uniform(state, inc)
                jv, state = _uniform(state, inc)
            else:
                ju = 0.0
                jv = 0.0
            u = (xi + ju) / width
            v = (yi + jv) / height
            if integ == 0:
                r, g, b, state, nr, err = _sample_eye(
                    bd, table, slots, shade, cam, u, v, state, inc, tstack, bstack)
            elif integ == 1:
                a, state, nr, err = _sample_ao(
                    bd, table, slots, shade, cam, ao_count, ao_length,
                    normal_offset, u, v, state, inc, tstack, bstack)
                r = a
                g = a
                b = a
            elif integ == 2:
                r, g, b, state, nr, err = _sample_pt(
                    bd, table, slots, shade, cam, max_depth, normal_offset,
                    u, v, state, inc, tstack, bstack)
            else:
                r, g, b, state, nr, err = _sample_ptnee(
                    bd, table, slots, shade, cam, max_depth, normal_offset,
                    u, v, state, inc, tstack, bstack)
            if err >= 0:
                return total_rays, err
            acc[pix, 0] += r
            acc[pix, 1] += g
            acc[pix, 2] += b
            acc[pix, 3] += 1.0
            total_rays += nr
    return total_rays, -1


# ---------------------------------------------------------------------------
# python driver
# ---------------------------------------------------------------------------

def _shade_data(scene) -> ShadeData:
    lights = scene.lights
    return ShadeData(
        scene.mat_color, scene.mat_emissive, scene.inst_material,
        np.ascontiguousarray(lights.v0), np.ascontiguousarray(lights.v1),
        np.ascontiguousarray(lights.v2), np.ascontiguousarray(lights.normal),
        np.ascontiguousarray(lights.emissive), np.ascontiguousarray(lights.area),
        scene.sky, scene.background,
    )


def _cam_tuple(cam):
    return (float(cam.origin[0]), float(cam.origin[1]), float(cam.origin[2]),
            float(cam.right[0]), float(cam.right[1]), float(cam.right[2]),
            float(cam.up[0]), float(cam.up[1]), float(cam.up[2]),
            float(cam.forward[0]), float(cam.forward[1]), float(cam.forward[2]),
            float(cam.distortion))


def _resolve_config(scene, cfg):
    if cfg is None:
        cfg = IntegratorConfig()
    sky = cfg.sky_color if cfg.sky_color is not None else scene.sky
    offset = cfg.normal_offset
    if offset is None:
        diag = scene.diagonal()
        offset = 1e-4 * diag if diag > 0.0 else 1e-4
    return cfg, np.ascontiguousarray(sky, dtype=np.float64), float(offset)


def _integ_id(scene, integrator):
    if integrator not in INTEGRATORS:
        raise ValueError(f"unknown integrator {integrator!r}, expected one of {INTEGRATORS}")
    integ = INTEGRATORS.index(integrator)
    if integ == 3 and len(scene.lights) == 0:
        warnings.warn("scene has no emissive triangles, falling back to plain path tracing")
        integ = 2
    return integ


def render_frame(scene, width: int, height: int, spp: int, integrator: str = "pt",
                 seed: int = 0, workers: int = 1, cfg: Optional[IntegratorConfig] = None,
                 jitter: bool = True, return_stats: bool = False):
    """Render a full frame into a fresh accumulation buffer.

    The pixel range is split into one contiguous chunk per worker; chunk
    boundaries cannot influence any sample value, so output is bit-identical
    for every worker count.
    """
    if width < 1 or height < 1 or spp < 1:
        raise ValueError("width, height, and spp must all be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    integ = _integ_id(scene, integrator)
    cfg, sky, normal_offset = _resolve_config(scene, cfg)
    scene.camera.validate_distortion()
    shade = _shade_data(scene)._replace(sky=sky)
    cam = _cam_tuple(scene.camera)
    table, slots = scene.dispatch()
    bd = scene.tlas.bundle

    n_pix = width * height
    acc = np.zeros((n_pix, 4))
    bounds = np.linspace(0, n_pix, min(workers, n_pix) + 1, dtype=np.int64)

    def job(lo, hi):
        return _render_chunk(bd, table, slots, shade, cam, integ,
                             cfg.max_depth, cfg.ao_ray_count, cfg.ao_max_length,
                             normal_offset, width, height, spp, seed, jitter,
                             lo, hi, acc)

    if workers == 1:
        results = [job(0, n_pix)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(job, bounds[i], bounds[i + 1])
                       for i in range(len(bounds) - 1)]
            results = [f.result() for f in futures]
    total_rays = 0
    for nrays, err in results:
        total_rays += nrays
        if err >= 0:
            from .accel import _registry_error
            raise _registry_error(err, 0)
    buffer = AccumBuffer(width, height, acc.reshape(height, width, 4))
    if return_stats:
        return buffer, {"rays": total_rays}
    return buffer


def _single_sample(scene, x, y, width, height, stream, cfg, jitter, integ):
    cfg, sky, normal_offset = _resolve_config(scene, cfg)
    scene.camera.validate_distortion()
    shade = _shade_data(scene)._replace(sky=sky)
    cam = _cam_tuple(scene.camera)
    table, slots = scene.dispatch()
    bd = scene.tlas.bundle
    tstack = np.empty(MAX_STACK_DEPTH, dtype=np.int64)
    bstack = np.empty(MAX_STACK_DEPTH, dtype=np.int64)
    ju = stream.uniform() if jitter else 0.0
    jv = stream.uniform() if jitter else 0.0
    u, v = pixel_to_uv(x, y, width, height, ju, jv)
    state = np.uint64(stream._state)
    inc = np.uint64(stream._inc)
    if integ == 0:
        r, g, b, state, _, err = _sample_eye(
            bd, table, slots, shade, cam, u, v, state, inc, tstack, bstack)
        out = vec3(r, g, b)
    elif integ == 1:
        a, state, _, err = _sample_ao(
            bd, table, slots, shade, cam, cfg.ao_ray_count, cfg.ao_max_length,
            normal_offset, u, v, state, inc, tstack, bstack)
        out = float(a)
    elif integ == 2:
        r, g, b, state, _, err = _sample_pt(
            bd, table, slots, shade, cam, cfg.max_depth, normal_offset,
            u, v, state, inc, tstack, bstack)
        out = vec3(r, g, b)
    else:
        r, g, b, state, _, err = _sample_ptnee(
            bd, table, slots, shade, cam, cfg.max_depth, normal_offset,
            u, v, state, inc, tstack, bstack)
        out = vec3(r, g, b)
    stream._state = int(state)
    if err >= 0:
        from .accel import _registry_error
        raise _registry_error(err, 0)
    return out


def render_eye(scene, x, y, width, height, stream: RandomStream,
               cfg: Optional[IntegratorConfig] = None, jitter: bool = False):
    """One flat-shaded sample: hit color or the scene background."""
    return _single_sample(scene, x, y, width, height, stream, cfg, jitter, 0)


def render_ao(scene, x, y, width, height, stream: RandomStream,
              cfg: Optional[IntegratorConfig] = None, jitter: bool = False) -> float:
    """Unoccluded fraction of the cosine-weighted hemisphere in [0, 1]."""
    return _single_sample(scene, x, y, width, height, stream, cfg, jitter, 1)


def render_pt(scene, x, y, width, height, stream: RandomStream,
              cfg: Optional[IntegratorConfig] = None, jitter: bool = False):
    """One path-traced radiance sample."""
    return _single_sample(scene, x, y, width, height, stream, cfg, jitter, 2)


def render_ptnee(scene, x, y, width, height, stream: RandomStream,
                 cfg: Optional[IntegratorConfig] = None, jitter: bool = False):
    """One radiance sample with explicit light connections."""
    integ = _integ_id(scene, "pt-nee")
    return _single_sample(scene, x, y, width, height, stream, cfg, jitter, integ)
