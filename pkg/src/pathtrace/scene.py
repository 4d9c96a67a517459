"""Assemble a parsed scene description into render-ready structures.

One Blas per named mesh (shared across instances), one single-primitive
Blas per sphere declaration, a Tlas over all instances, a material table,
and the list of world-space emissive triangles for direct light sampling.
"""

import math
from dataclasses import dataclass

import numpy as np

from .accel import (
    CUSTOM,
    SPHERE_GEOM_TYPE,
    Blas,
    Instance,
    IntersectorRegistry,
    Tlas,
    frame_to_matrix,
    sphere_aabbs,
    sphere_data,
    sphere_intersector,
)
from .camera import Camera
from .sampling import LightTable
from .scene_io import SceneDescription


@dataclass
class Scene:
    camera: Camera
    tlas: Tlas
    registry: IntersectorRegistry
    mat_color: np.ndarray      # (M, 3)
    mat_emissive: np.ndarray   # (M, 3)
    inst_material: np.ndarray  # (instances,)
    lights: LightTable
    sky: np.ndarray
    background: np.ndarray

    def dispatch(self, ray_type: int = 0):
        return self.registry.resolve(self.tlas.custom_geom_types(), ray_type)

    def diagonal(self) -> float:
        box = self.tlas.root_box
        d = box.diagonal()
        return math.sqrt(float(d @ d))


def _empty_lights() -> LightTable:
    z3 = np.zeros((0, 3))
    z1 = np.zeros(0)
    zi = np.zeros(0, dtype=np.int64)
    return LightTable(z3.copy(), z3.copy(), z3.copy(), z3.copy(), z3.copy(), z1, zi, zi.copy())


def _light_rows(desc, inst_decls):
    """World-space emissive triangles; emissive spheres are not sampled."""
    rows = []
    for inst_index, decl in enumerate(inst_decls):
        mat = desc.materials[decl[0]]
        if not mat.has_emission or decl[2] is None:
            continue
        mesh = decl[2]
        m = frame_to_matrix(decl[1])
        world = mesh.vertices @ m[:, :3].T + m[:, 3]
        for prim, (i0, i1, i2) in enumerate(mesh.faces):
            w0, w1, w2 = world[i0], world[i1], world[i2]
            n = np.cross(w1 - w0, w2 - w1)
            nlen = math.sqrt(float(n @ n))
            if nlen == 0.0:
                continue
            rows.append((w0, w1, w2, n / nlen, mat.emissive, 0.5 * nlen,
                         inst_index, prim))
    return rows


def compile_scene(desc: SceneDescription, quality: str = "balanced") -> Scene:
    """Build every acceleration structure and flatten the shading tables."""
    mat_names = list(desc.materials)
    mat_index = {n: i for i, n in enumerate(mat_names)}
    mat_color = np.array([desc.materials[n].color for n in mat_names]).reshape(-1, 3)
    mat_emissive = np.array([desc.materials[n].emissive for n in mat_names]).reshape(-1, 3)

    blases = []
    blas_of_mesh = {}
    for name, mesh in desc.meshes.items():
        blas_of_mesh[name] = len(blases)
        blases.append(Blas.from_mesh(mesh.vertices, mesh.faces, quality))

    instances = []
    inst_material = []
    # (material name, frame, mesh or None) per instance, for the light list
    inst_decls = []
    for decl in desc.instances:
        instances.append(Instance(blas_of_mesh[decl.mesh], decl.frame, decl.mask))
        inst_material.append(mat_index[decl.material])
        inst_decls.append((decl.material, decl.frame, desc.meshes[decl.mesh]))

    registry = IntersectorRegistry()
    if desc.spheres:
        rows = np.array([[*sph.center, sph.radius] for sph in desc.spheres])
        data = sphere_data(rows)
        registry.register(SPHERE_GEOM_TYPE, 0, sphere_intersector, data)
        for i, sph in enumerate(desc.spheres):
            blas = Blas.from_aabbs(sphere_aabbs(rows[i:i + 1]), SPHERE_GEOM_TYPE,
                                   quality, data_offset=i)
            instances.append(Instance(len(blases), sph.frame, sph.mask))
            blases.append(blas)
            inst_material.append(mat_index[sph.material])
            inst_decls.append((sph.material, sph.frame, None))

    tlas = Tlas(instances, blases, quality)

    rows = _light_rows(desc, inst_decls)
    if rows:
        lights = LightTable(
            np.array([r[0] for r in rows]).reshape(-1, 3),
            np.array([r[1] for r in rows]).reshape(-1, 3),
            np.array([r[2] for r in rows]).reshape(-1, 3),
            np.array([r[3] for r in rows]).reshape(-1, 3),
            np.array([r[4] for r in rows]).reshape(-1, 3),
            np.array([r[5] for r in rows]),
            np.array([r[6] for r in rows], dtype=np.int64),
            np.array([r[7] for r in rows], dtype=np.int64),
        )
    else:
        lights = _empty_lights()

    return Scene(
        camera=desc.camera,
        tlas=tlas,
        registry=registry,
        mat_color=np.ascontiguousarray(mat_color),
        mat_emissive=np.ascontiguousarray(mat_emissive),
        inst_material=np.array(inst_material, dtype=np.int64),
        lights=lights,
        sky=np.ascontiguousarray(desc.sky, dtype=np.float64),
        background=np.ascontiguousarray(desc.background, dtype=np.float64),
    )
