"""Deterministic random streams and the sampling routines used by the renderers.

The generator is PCG32 (64-bit LCG state, XSH-RR output) so sequences are
reproducible from (seed, stream_id) with integer arithmetic only. Per-sample
streams are derived by splitmix64 hashing of (seed, pixel, sample), which is
what makes rendering independent of worker count and scheduling.
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .geometry import _as_vec3, vec3

_jit = njit(cache=True, nogil=True, error_model="numpy")
_jit_inline = njit(cache=True, nogil=True, error_model="numpy", inline="always")

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_PCG_MULT = 6364136223846793005
_MIX_GAMMA = 0x9E3779B97F4A7C15
_INV_2_32 = 2.0 ** -32


# ---------------------------------------------------------------------------
# PCG32 and stream derivation (python and jitted twins share the algorithm;
# test_sampling checks they emit identical sequences)
# ---------------------------------------------------------------------------

def _mix64_py(z: int) -> int:
    z = (z + _MIX_GAMMA) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


@_jit_inline
def _mix64(z):
    z = z + np.uint64(_MIX_GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@_jit_inline
def _pcg_next(state, inc):
    old = state
    state = old * np.uint64(_PCG_MULT) + inc
    xorshifted = np.uint32(((old >> np.uint64(18)) ^ old) >> np.uint64(27))
    rot = np.uint32(old >> np.uint64(59))
    # numba promotes 32-bit shifts to 64 bits, so truncate explicitly
    out = np.uint32((xorshifted >> rot) | (xorshifted << ((np.uint32(32) - rot) & np.uint32(31))))
    return state, out


@_jit_inline
def _pcg_init(initstate, initseq):
    inc = (initseq << np.uint64(1)) | np.uint64(1)
    state = np.uint64(0)
    state, _ = _pcg_next(state, inc)
    state = state + initstate
    state, _ = _pcg_next(state, inc)
    return state, inc


@_jit_inline
def _stream_for(seed, pixel, sample):
    """Collision-resistant (state, inc) for one pixel sample."""
    h = _mix64(np.uint64(seed))
    h = _mix64(h ^ np.uint64(pixel))
    h = _mix64(h ^ np.uint64(sample))
    return _pcg_init(h, _mix64(h ^ np.uint64(0xDA3E39CB94B95BDB)))


@_jit_inline
def _uniform(state, inc):
    state, out = _pcg_next(state, inc)
    return np.float64(out) * _INV_2_32, state


@_jit
def _fill_uniforms(state, inc, out):
    for i in range(out.shape[0]):
        state, word = _pcg_next(state, inc)
        out[i] = np.float64(word) * _INV_2_32
    return state


class RandomStream:
    """Single-owner PCG32 stream; identical (seed, stream_id) replays exactly."""

    __slots__ = ("seed", "stream_id", "_state", "_inc")

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = seed & 0xFFFFFFFFFFFFFFFF
        self.stream_id = stream_id & 0xFFFFFFFFFFFFFFFF
        inc = ((self.stream_id << 1) | 1) & 0xFFFFFFFFFFFFFFFF
        state = self._step(0, inc)
        state = (state + self.seed) & 0xFFFFFFFFFFFFFFFF
        self._state = self._step(state, inc)
        self._inc = inc

    @staticmethod
    def _step(state: int, inc: int) -> int:
        return (state * _PCG_MULT + inc) & 0xFFFFFFFFFFFFFFFF

    def next_u32(self) -> int:
        old = self._state
        self._state = self._step(old, self._inc)
        xorshifted = ((old >> 18) ^ old) >> 27 & 0xFFFFFFFF
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((32 - rot) & 31))) & 0xFFFFFFFF

    def uniform(self) -> float:
        return self.next_u32() * _INV_2_32

    def uniforms(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.float64)
        state = _fill_uniforms(np.uint64(self._state), np.uint64(self._inc), out)
        self._state = int(state)
        return out

    @classmethod
    def for_sample(cls, seed: int, pixel: int, sample: int) -> "RandomStream":
        h = _mix64_py(_mix64_py(_mix64_py(seed & 0xFFFFFFFFFFFFFFFF) ^ (pixel & 0xFFFFFFFFFFFFFFFF)) ^ (sample & 0xFFFFFFFFFFFFFFFF))
        return cls(h, _mix64_py(h ^ 0xDA3E39CB94B95BDB))


# ---------------------------------------------------------------------------
# direction and surface sampling
# ---------------------------------------------------------------------------

def sample_cosine_hemisphere(x0: float, x1: float) -> np.ndarray:
    """Unit direction in the y-up hemisphere with density cos(theta)/pi.

    A uniform point on the unit disc (phi = 2 pi x0, r = sqrt(x1)) is
    projected up onto the hemisphere, which produces the cosine weighting.
    """
    x, y, z = _cosine_dir(x0, x1)
    return vec3(x, y, z)


@_jit_inline
def _cosine_dir(x0, x1):
    phi = 2.0 * math.pi * x0
    r = math.sqrt(x1)
    x = math.cos(phi) * r
    z = math.sin(phi) * r
    y = math.sqrt(max(1.0 - r * r, 0.0))
    return x, y, z


@dataclass
class TangentBasis:
    tangent: np.ndarray
    bitangent: np.ndarray
    normal: np.ndarray


def make_tangent_basis(n) -> TangentBasis:
    """Right-handed orthonormal frame containing the unit normal n.

    Branchless construction from the normal alone; the diffuse lobe is
    azimuthally symmetric so any frame containing n samples identically.
    """
    n = _as_vec3(n, "normal")
    nn = float(np.dot(n, n))
    if nn < 0.25:
        raise ValueError("tangent basis requires a unit normal, got near-zero vector")
    tx, ty, tz, bx, by, bz = _onb(n[0], n[1], n[2])
    return TangentBasis(vec3(tx, ty, tz), vec3(bx, by, bz), n.copy())


@_jit_inline
def _onb(nx, ny, nz):
    s = math.copysign(1.0, nz)
    a = -1.0 / (s + nz)
    b = nx * ny * a
    tx = 1.0 + s * nx * nx * a
    ty = s * b
    tz = -s * nx
    bx = b
    by = s + ny * ny * a
    bz = -ny
    return tx, ty, tz, bx, by, bz


def to_world(basis: TangentBasis, local) -> np.ndarray:
    """Expand hemisphere-local (x, y, z) with y along the normal."""
    local = _as_vec3(local, "local")
    return (
        basis.tangent * local[0]
        + basis.normal * local[1]
        + basis.bitangent * local[2]
    )


def sample_uniform_triangle(x0: float, x1: float, v0, v1, v2):
    """Area-uniform point on a triangle plus its unit geometric normal."""
    v0 = _as_vec3(v0, "v0")
    v1 = _as_vec3(v1, "v1")
    v2 = _as_vec3(v2, "v2")
    n = np.cross(v1 - v0, v2 - v1)
    nlen = math.sqrt(float(np.dot(n, n)))
    if nlen == 0.0:
        raise ValueError("cannot sample a degenerate triangle")
    s = math.sqrt(x0)
    p = (1.0 - s) * v0 + s * (1.0 - x1) * v1 + s * x1 * v2
    return p, n / nlen


# ---------------------------------------------------------------------------
# light sampling
# ---------------------------------------------------------------------------

@dataclass
class LightTable:
    """World-space emissive triangles available for direct light sampling."""

    v0: np.ndarray        # (L, 3)
    v1: np.ndarray
    v2: np.ndarray
    normal: np.ndarray    # (L, 3) unit, emission side
    emissive: np.ndarray  # (L, 3)
    area: np.ndarray      # (L,)
    instance: np.ndarray  # (L,) owning instance index
    prim: np.ndarray      # (L,) triangle index inside the instance mesh

    def __len__(self):
        return self.v0.shape[0]

    @classmethod
    def from_triangles(cls, tris, emissive, instance=None, prim=None) -> "LightTable":
        """Build from an iterable of (v0, v1, v2) triples with one emission each."""
        tris = [tuple(_as_vec3(v, "vertex") for v in tri) for tri in tris]
        count = len(tris)
        v0 = np.array([t[0] for t in tris], dtype=np.float64).reshape(count, 3)
        v1 = np.array([t[1] for t in tris], dtype=np.float64).reshape(count, 3)
        v2 = np.array([t[2] for t in tris], dtype=np.float64).reshape(count, 3)
        n = np.cross(v1 - v0, v2 - v1)
        nlen = np.linalg.norm(n, axis=1)
        if np.any(nlen == 0.0):
            raise ValueError("light table contains a degenerate triangle")
        emissive = np.asarray(emissive, dtype=np.float64).reshape(count, 3)
        return cls(
            v0, v1, v2,
            n / nlen[:, None],
            emissive,
            0.5 * nlen,
            np.zeros(count, dtype=np.int64) if instance is None else np.asarray(instance, dtype=np.int64),
            np.arange(count, dtype=np.int64) if prim is None else np.asarray(prim, dtype=np.int64),
        )


@dataclass
class LightSample:
    p: np.ndarray
    n: np.ndarray
    emissive: np.ndarray
    pdf_area: float


def sample_light(lights: LightTable, x0: float, x1: float, x2: float) -> LightSample:
    """Pick a light uniformly, then an area-uniform point on it.

    pdf_area folds the 1/lightCount selection probability into the per-area
    density, so the direct-light estimator divides by it once.
    """
    count = len(lights)
    if count == 0:
        raise ValueError("direct light sampling requested in a scene with no lights")
    idx = min(int(x0 * count), count - 1)
    p, _ = sample_uniform_triangle(x1, x2, lights.v0[idx], lights.v1[idx], lights.v2[idx])
    pdf = (1.0 / count) * (1.0 / lights.area[idx])
    return LightSample(p, lights.normal[idx].copy(), lights.emissive[idx].copy(), pdf)
