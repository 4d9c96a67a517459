"""Primary-ray generation for a pinhole camera with optional radial distortion.

The film sits one unit along the forward axis and spans [-right, right] x
[-up, up]. Screen coordinates run u rightward and v downward, so v = 0 is
the top image row.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .geometry import DEFAULT_MAX_T, Ray, _as_vec3, normalize

_jit = njit(cache=True, nogil=True, error_model="numpy")
_jit_inline = njit(cache=True, nogil=True, error_model="numpy", inline="always")


class CameraError(ValueError):
    pass


@dataclass
class Camera:
    origin: np.ndarray
    right: np.ndarray
    up: np.ndarray
    distortion: float = 0.0
    forward: np.ndarray = field(init=False)

    def __post_init__(self):
        self.origin = _as_vec3(self.origin, "origin")
        self.right = _as_vec3(self.right, "right")
        self.up = _as_vec3(self.up, "up")
        fwd = np.cross(self.up, self.right)
        if not np.any(fwd != 0.0):
            raise CameraError("right and up are parallel, film is degenerate")
        self.forward = normalize(fwd)

    def validate_distortion(self):
        """Reject configurations where 1 + c reaches zero on the film.

        c = distortion * |p|^2 is most negative at the film corners, so
        checking the corner offset bounds every (u, v) in [0, 1]^2.
        """
        corner = float(np.dot(self.right + self.up, self.right + self.up))
        corner = max(corner, float(np.dot(self.right - self.up, self.right - self.up)))
        if 1.0 + self.distortion * corner <= 0.0:
            raise CameraError(
                f"distortion {self.distortion} collapses the lens mapping at the film corner"
            )


def pixel_to_uv(xi: int, yi: int, width: int, height: int,
                jitter_u: float = 0.0, jitter_v: float = 0.0):
    """Map integer pixel coordinates plus an in-pixel jitter to screen uv."""
    return (xi + jitter_u) / width, (yi + jitter_v) / height


def primary_ray(cam: Camera, u: float, v: float) -> Ray:
    """Ray from the lens through screen point (u, v).

    The in-film offset is p = lerp(-right, right, u) + lerp(up, -up, v);
    with distortion d the offset is warped to p / (1 + d * |p|^2) while the
    forward component stays fixed.
    """
    dx, dy, dz, ok = _primary_dir(
        cam.right[0], cam.right[1], cam.right[2],
        cam.up[0], cam.up[1], cam.up[2],
        cam.forward[0], cam.forward[1], cam.forward[2],
        cam.distortion, u, v,
    )
    if not ok:
        raise CameraError(
            f"distortion {cam.distortion} collapses the lens mapping at uv=({u}, {v})"
        )
    return Ray(cam.origin.copy(), np.array([dx, dy, dz]), 0.0, DEFAULT_MAX_T)


@_jit_inline
def _primary_dir(rx, ry, rz, ux, uy, uz, fx, fy, fz, distortion, u, v):
    # p = lerp(-right, right, u) + lerp(up, -up, v)
    su = 2.0 * u - 1.0
    sv = 1.0 - 2.0 * v
    px = rx * su + ux * sv
    py = ry * su + uy * sv
    pz = rz * su + uz * sv
    c = distortion * (px * px + py * py + pz * pz)
    denom = 1.0 + c
    if denom <= 0.0:
        return 0.0, 0.0, 0.0, False
    dx = fx + px / denom
    dy = fy + py / denom
    dz = fz + pz / denom
    inv = 1.0 / math.sqrt(dx * dx + dy * dy + dz * dz)
    return dx * inv, dy * inv, dz * inv, True
