"""Scene text parsing, OBJ ingestion, buffer resolve, and PPM output.

The scene format is line oriented: one directive per line, `#` comments,
whitespace-separated tokens.

    camera origin X Y Z right X Y Z up X Y Z [distortion D]
    mesh NAME PATH.obj
    material NAME color R G B [emissive R G B]
    instance MESHNAME MATNAME [translate X Y Z] [scale X Y Z]
                              [rotate AX AY AZ DEG] [mask HEX]
    sphere MATNAME center X Y Z radius R [translate ...]
    sky R G B
    background R G B
"""

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .accel import FULL_MASK, SrtFrame
from .camera import Camera

DEFAULT_BACKGROUND = np.full(3, 32.0 / 255.0)


class ParseError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class TriangleMesh:
    vertices: np.ndarray  # (V, 3) float64
    faces: np.ndarray     # (F, 3) int64


def parse_obj(text: str) -> TriangleMesh:
    """Minimal OBJ reader: `v` and `f` statements, everything else ignored.

    Quad faces split into (i, j, k) and (i, k, l); negative indices resolve
    against the vertices seen so far.
    """
    vertices = []
    faces = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        if tokens[0] == "v":
            if len(tokens) < 4:
                raise ParseError("vertex needs three coordinates", lineno)
            try:
                vertices.append([float(tokens[1]), float(tokens[2]), float(tokens[3])])
            except ValueError:
                raise ParseError(f"malformed vertex coordinate in {raw.strip()!r}", lineno)
        elif tokens[0] == "f":
            idx = []
            for tok in tokens[1:]:
                head = tok.split("/", 1)[0]
                try:
                    i = int(head)
                except ValueError:
                    raise ParseError(f"malformed face index {tok!r}", lineno)
                if i < 0:
                    i = len(vertices) + i
                else:
                    i = i - 1
                if not (0 <= i < len(vertices)):
                    raise ParseError(f"face index {tok} out of range", lineno)
                idx.append(i)
            if len(idx) < 3:
                raise ParseError("face needs at least three indices", lineno)
            if len(idx) > 4:
                raise ParseError("faces with more than four vertices are not supported", lineno)
            faces.append([idx[0], idx[1], idx[2]])
            if len(idx) == 4:
                faces.append([idx[0], idx[2], idx[3]])
    return TriangleMesh(
        np.array(vertices, dtype=np.float64).reshape(-1, 3),
        np.array(faces, dtype=np.int64).reshape(-1, 3),
    )


def load_obj(path) -> TriangleMesh:
    with open(path, "r") as fh:
        return parse_obj(fh.read())


@dataclass
class InstanceDecl:
    mesh: str
    material: str
    frame: SrtFrame = field(default_factory=SrtFrame)
    mask: int = FULL_MASK


@dataclass
class SphereDecl:
    material: str
    center: np.ndarray
    radius: float
    frame: SrtFrame = field(default_factory=SrtFrame)
    mask: int = FULL_MASK


@dataclass
class SceneDescription:
    camera: Camera
    meshes: dict                 # name -> TriangleMesh
    mesh_paths: dict             # name -> path as written in the file
    materials: dict              # name -> Material
    instances: list              # InstanceDecl
    spheres: list                # SphereDecl
    sky: np.ndarray
    background: np.ndarray


class _Cursor:
    def __init__(self, tokens, lineno):
        self.tokens = tokens
        self.pos = 0
        self.lineno = lineno

    @property
    def exhausted(self):
        return self.pos >= len(self.tokens)

    def word(self, what):
        if self.exhausted:
            raise ParseError(f"expected {what}", self.lineno)
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def number(self, what):
        tok = self.word(what)
        try:
            return float(tok)
        except ValueError:
            raise ParseError(f"malformed number {tok!r} for {what}", self.lineno)

    def vector(self, what):
        return np.array([self.number(what), self.number(what), self.number(what)])

    def keyword(self, expected):
        tok = self.word(expected)
        if tok != expected:
            raise ParseError(f"expected {expected!r}, got {tok!r}", self.lineno)


def _parse_frame_options(cur, allow_mask=True):
    translation = np.zeros(3)
    scale = np.ones(3)
    axis = np.array([0.0, 1.0, 0.0])
    angle = 0.0
    mask = FULL_MASK
    while not cur.exhausted:
        key = cur.word("option")
        if key == "translate":
            translation = cur.vector("translate")
        elif key == "scale":
            scale = cur.vector("scale")
        elif key == "rotate":
            axis = cur.vector("rotate axis")
            alen = math.sqrt(float(axis @ axis))
            if alen == 0.0:
                raise ParseError("rotation axis must be nonzero", cur.lineno)
            axis = axis / alen
            angle = math.radians(cur.number("rotate angle"))
        elif key == "mask" and allow_mask:
            tok = cur.word("mask")
            try:
                mask = int(tok, 16)
            except ValueError:
                raise ParseError(f"malformed mask {tok!r}", cur.lineno)
            if not (0 <= mask <= FULL_MASK):
                raise ParseError("mask must fit in 32 bits", cur.lineno)
        else:
            raise ParseError(f"unknown option {key!r}", cur.lineno)
    frame = SrtFrame(scale=scale, rotation_axis=axis,
                     rotation_angle=angle, translation=translation)
    return frame, mask


def parse_scene(text: str, base_dir=".") -> SceneDescription:
    from .integrators import Material

    camera = None
    meshes = {}
    mesh_paths = {}
    materials = {}
    instances = []
    spheres = []
    sky = np.zeros(3)
    background = DEFAULT_BACKGROUND.copy()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        cur = _Cursor(tokens[1:], lineno)
        directive = tokens[0]
        if directive == "camera":
            cur.keyword("origin")
            origin = cur.vector("origin")
            cur.keyword("right")
            right = cur.vector("right")
            cur.keyword("up")
            up = cur.vector("up")
            distortion = 0.0
            if not cur.exhausted:
                cur.keyword("distortion")
                distortion = cur.number("distortion")
            camera = Camera(origin, right, up, distortion)
        elif directive == "mesh":
            name = cur.word("mesh name")
            path = cur.word("mesh path")
            full = path if os.path.isabs(path) else os.path.join(base_dir, path)
            try:
                meshes[name] = load_obj(full)
            except OSError as exc:
                raise ParseError(f"cannot read mesh {path!r}: {exc}", lineno)
            mesh_paths[name] = path
        elif directive == "material":
            name = cur.word("material name")
            cur.keyword("color")
            color = cur.vector("color")
            emissive = np.zeros(3)
            if not cur.exhausted:
                cur.keyword("emissive")
                emissive = cur.vector("emissive")
            materials[name] = Material(color, emissive)
        elif directive == "instance":
            mesh_name = cur.word("mesh name")
            mat_name = cur.word("material name")
            frame, mask = _parse_frame_options(cur)
            if mesh_name not in meshes:
                raise ParseError(f"instance references unknown mesh {mesh_name!r}", lineno)
            if mat_name not in materials:
                raise ParseError(f"instance references unknown material {mat_name!r}", lineno)
            instances.append(InstanceDecl(mesh_name, mat_name, frame, mask))
        elif directive == "sphere":
            mat_name = cur.word("material name")
            cur.keyword("center")
            center = cur.vector("center")
            cur.keyword("radius")
            radius = cur.number("radius")
            if radius <= 0.0:
                raise ParseError("sphere radius must be > 0", lineno)
            frame, mask = _parse_frame_options(cur)
            if mat_name not in materials:
                raise ParseError(f"sphere references unknown material {mat_name!r}", lineno)
            spheres.append(SphereDecl(mat_name, center, radius, frame, mask))
        elif directive == "sky":
            sky = cur.vector("sky")
        elif directive == "background":
            background = cur.vector("background")
        else:
            raise ParseError(f"unknown directive {directive!r}", lineno)
        if not cur.exhausted:
            raise ParseError(f"trailing tokens after {directive}", lineno)

    if camera is None:
        raise ParseError("scene has no camera")
    if not instances and not spheres:
        raise ParseError("scene has no instances")
    return SceneDescription(camera, meshes, mesh_paths, materials,
                            instances, spheres, sky, background)


def load_scene(path) -> SceneDescription:
    with open(path, "r") as fh:
        text = fh.read()
    return parse_scene(text, base_dir=os.path.dirname(os.path.abspath(path)))


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _fmt3(v) -> str:
    return " ".join(_fmt(float(c)) for c in v)


def _frame_options(frame: SrtFrame, mask: int) -> str:
    parts = []
    if np.any(frame.translation != 0.0):
        parts.append(f"translate {_fmt3(frame.translation)}")
    if np.any(frame.scale != 1.0):
        parts.append(f"scale {_fmt3(frame.scale)}")
    if frame.rotation_angle != 0.0:
        parts.append(f"rotate {_fmt3(frame.rotation_axis)} "
                     f"{_fmt(math.degrees(frame.rotation_angle))}")
    if mask != FULL_MASK:
        parts.append(f"mask {mask:x}")
    return (" " + " ".join(parts)) if parts else ""


def format_scene(desc: SceneDescription) -> str:
    """Canonical text for a description; reparsing reproduces the structure."""
    cam = desc.camera
    lines = [f"camera origin {_fmt3(cam.origin)} right {_fmt3(cam.right)} "
             f"up {_fmt3(cam.up)} distortion {_fmt(cam.distortion)}"]
    for name in desc.meshes:
        lines.append(f"mesh {name} {desc.mesh_paths[name]}")
    for name, mat in desc.materials.items():
        line = f"material {name} color {_fmt3(mat.color)}"
        if np.any(mat.emissive > 0.0):
            line += f" emissive {_fmt3(mat.emissive)}"
        lines.append(line)
    for inst in desc.instances:
        lines.append(f"instance {inst.mesh} {inst.material}"
                     + _frame_options(inst.frame, inst.mask))
    for sph in desc.spheres:
        lines.append(f"sphere {sph.material} center {_fmt3(sph.center)} "
                     f"radius {_fmt(sph.radius)}"
                     + _frame_options(sph.frame, sph.mask))
    lines.append(f"sky {_fmt3(desc.sky)}")
    lines.append(f"background {_fmt3(desc.background)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# accumulation buffer and image output
# ---------------------------------------------------------------------------

@dataclass
class AccumBuffer:
    """Per-pixel running (r, g, b, sample count) in linear units, row 0 on top."""

    width: int
    height: int
    data: np.ndarray  # (height, width, 4) float64

    @classmethod
    def zeros(cls, width, height):
        return cls(width, height, np.zeros((height, width, 4)))

    def mean(self) -> np.ndarray:
        counts = self.data[:, :, 3:]
        if np.any(counts <= 0.0):
            raise ValueError("accumulation buffer has pixels with zero samples")
        return self.data[:, :, :3] / counts


def resolve(acc: AccumBuffer, gamma_encode: bool = True) -> np.ndarray:
    """Average, clamp to [0, 1], optionally gamma encode, quantize to bytes."""
    mean = acc.mean()
    v = np.clip(mean, 0.0, 1.0)
    if gamma_encode:
        v = v ** (1.0 / 2.2)
    return np.round(255.0 * v).astype(np.uint8)


def ppm_bytes(image: np.ndarray) -> bytes:
    image = np.ascontiguousarray(image)
    if image.dtype != np.uint8 or image.ndim != 3 or image.shape[2] != 3:
        raise ValueError("PPM output expects an (h, w, 3) uint8 image")
    h, w = image.shape[:2]
    return b"P6\n%d %d\n255\n" % (w, h) + image.tobytes()


def write_ppm(image: np.ndarray, sink) -> None:
    """Binary P6: header then rows top to bottom, pixels left to right, RGB."""
    sink.write(ppm_bytes(image))
