"""CPU ray tracing library with a two-level BVH and deterministic rendering."""

from .geometry import (
    Aabb,
    Hit,
    Ray,
    SpherePrim,
    Triangle,
    aabb_of_triangle,
    aabb_union,
    intersect_ray_aabb,
    intersect_ray_sphere,
    intersect_ray_triangle,
    inverse_direction,
    triangle_area,
    vec3,
)
from .camera import Camera, CameraError, pixel_to_uv, primary_ray
from .sampling import (
    LightSample,
    LightTable,
    RandomStream,
    TangentBasis,
    make_tangent_basis,
    sample_cosine_hemisphere,
    sample_light,
    sample_uniform_triangle,
    to_world,
)
from .accel import (
    FULL_MASK,
    Blas,
    BuildError,
    Instance,
    IntersectorRegistry,
    RegistryError,
    SrtFrame,
    Tlas,
    TraversalCursor,
    TraversalState,
    any_hit,
    any_hit_batch,
    build_tlas,
    closest_hit,
    closest_hit_batch,
    next_hit,
    transform_ray_to_local,
    traversal_state,
)
from .integrators import (
    IntegratorConfig,
    Material,
    SurfaceInfo,
    geometry_term,
    offset_ray_origin,
    render_ao,
    render_eye,
    render_frame,
    render_pt,
    render_ptnee,
)
from .scene_io import (
    AccumBuffer,
    ParseError,
    SceneDescription,
    TriangleMesh,
    format_scene,
    load_obj,
    load_scene,
    parse_obj,
    parse_scene,
    ppm_bytes,
    resolve,
    write_ppm,
)
from .scene import Scene, compile_scene

__version__ = "0.1.0"
