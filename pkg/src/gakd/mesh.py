"""Triangular terrain meshes: PLY I/O, per-face geometry and a procedural generator."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np


class MeshError(ValueError):
    """Base class for mesh construction and I/O failures."""


class PLYParseError(MeshError):
    pass


class PLYFormatError(MeshError):
    pass


class EmptyMeshError(MeshError):
    pass


class DegenerateFaceError(MeshError):
    def __init__(self, face_id: int):
        super().__init__(f"face {face_id} has zero area")
        self.face_id = face_id


@dataclass(frozen=True)
class Face:
    id: int
    normal: np.ndarray
    centroid: np.ndarray
    plane_offset: float


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray
    face_normals: np.ndarray = field(repr=False)
    face_centroids: np.ndarray = field(repr=False)
    plane_offsets: np.ndarray = field(repr=False)

    @classmethod
    def from_arrays(cls, vertices, faces) -> "TriangleMesh":
        """Validate raw arrays and precompute per-face geometry."""
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        faces = np.ascontiguousarray(faces, dtype=np.int64)
        if faces.size == 0:
            raise EmptyMeshError("mesh has no faces")
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError(f"vertices must be (V, 3), got {vertices.shape}")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise PLYFormatError(f"faces must be triangles, got shape {faces.shape}")
        if faces.min() < 0 or faces.max() >= len(vertices):
            raise MeshError("face references a vertex index out of range")
        normals, centroids, offsets = compute_face_data(vertices, faces)
        for arr in (vertices, faces, normals, centroids, offsets):
            arr.setflags(write=False)
        return cls(vertices, faces, normals, centroids, offsets)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def face(self, i: int) -> Face:
        i = int(i)
        return Face(i, self.face_normals[i], self.face_centroids[i], float(self.plane_offsets[i]))

    def mean_edge_length(self) -> float:
        v = self.vertices[self.faces]
        edges = np.concatenate([v[:, 1] - v[:, 0], v[:, 2] - v[:, 1], v[:, 0] - v[:, 2]])
        return float(np.linalg.norm(edges, axis=1).mean())


def _orient_up(n: np.ndarray) -> np.ndarray:
    # n_z > 0; on ties n_y > 0; then n_x > 0
    x, y, z = n[:, 0], n[:, 1], n[:, 2]
    flip = (z < 0) | ((z == 0) & (y < 0)) | ((z == 0) & (y == 0) & (x < 0))
    return np.where(flip[:, None], -n, n)


def compute_face_data(vertices, faces):
    """Return ``(normals, centroids, plane_offsets)`` for every face.

    Normals are unit length and canonicalized to point upward; the plane
    offset ``d`` satisfies ``n . x + d = 0`` on the face.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    v0, v1, v2 = vertices[faces[:, 0]], vertices[faces[:, 1]], vertices[faces[:, 2]]
    e1, e2 = v1 - v0, v2 - v0
    cross = np.cross(e1, e2)
    norm = np.linalg.norm(cross, axis=1)
    scale = np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1)
    bad = np.flatnonzero((norm == 0) | (norm <= 1e-12 * scale))
    if bad.size:
        raise DegenerateFaceError(int(bad[0]))
    normals = _orient_up(cross / norm[:, None])
    centroids = (v0 + v1 + v2) / 3.0
    offsets = -(normals[:, 0] * centroids[:, 0] + normals[:, 1] * centroids[:, 1]
                + normals[:, 2] * centroids[:, 2])
    return normals, centroids, offsets


# --------------------------------------------------------------------------- PLY

_PLY_TYPES = {
    "char": "b", "int8": "b", "uchar": "B", "uint8": "B",
    "short": "h", "int16": "h", "ushort": "H", "uint16": "H",
    "int": "i", "int32": "i", "uint": "I", "uint32": "I",
    "float": "f", "float32": "f", "double": "d", "float64": "d",
}


def _parse_header(fh):
    first = fh.readline().strip()
    if first != b"ply":
        raise PLYParseError("missing 'ply' magic")
    fmt = None
    elements = []  # (name, count, [(prop_name, kind, types)])
    while True:
        raw = fh.readline()
        if not raw:
            raise PLYParseError("unexpected end of header")
        tokens = raw.decode("ascii", errors="replace").split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        key = tokens[0]
        if key == "end_header":
            break
        if key == "format":
            if len(tokens) < 2 or tokens[1] not in ("ascii", "binary_little_endian"):
                raise PLYParseError(f"unsupported PLY format line: {raw!r}")
            fmt = tokens[1]
        elif key == "element":
            if len(tokens) != 3:
                raise PLYParseError(f"bad element line: {raw!r}")
            try:
                elements.append((tokens[1], int(tokens[2]), []))
            except ValueError as exc:
                raise PLYParseError(f"bad element count: {raw!r}") from exc
        elif key == "property":
            if not elements:
                raise PLYParseError("property before any element")
            if tokens[1] == "list":
                if len(tokens) != 5 or tokens[2] not in _PLY_TYPES or tokens[3] not in _PLY_TYPES:
                    raise PLYParseError(f"bad list property: {raw!r}")
                elements[-1][2].append((tokens[4], "list", (tokens[2], tokens[3])))
            else:
                if len(tokens) != 3 or tokens[1] not in _PLY_TYPES:
                    raise PLYParseError(f"bad property: {raw!r}")
                elements[-1][2].append((tokens[2], "scalar", tokens[1]))
        else:
            raise PLYParseError(f"unknown header keyword {key!r}")
    if fmt is None:
        raise PLYParseError("missing format line")
    return fmt, elements


def _read_ascii(fh, elements):
    lines = iter(fh.read().decode("ascii").split("\n"))
    data = {}
    for name, count, props in elements:
        rows = []
        for _ in range(count):
            line = next(lines, None)
            while line is not None and not line.strip():
                line = next(lines, None)
            if line is None:
                raise PLYParseError(f"truncated body in element {name!r}")
            tok = line.split()
            rec, pos = {}, 0
            try:
                for pname, kind, types in props:
                    if kind == "scalar":
                        rec[pname] = float(tok[pos])
                        pos += 1
                    else:
                        n = int(tok[pos])
                        rec[pname] = [int(t) for t in tok[pos + 1:pos + 1 + n]]
                        if len(rec[pname]) != n:
                            raise IndexError
                        pos += 1 + n
            except (IndexError, ValueError) as exc:
                raise PLYParseError(f"malformed row in element {name!r}: {line!r}") from exc
            rows.append(rec)
        data[name] = rows
    return data


def _read_binary(fh, elements):
    buf = fh.read()
    off = 0
    data = {}
    try:
        for name, count, props in elements:
            if all(kind == "scalar" for _, kind, _ in props):
                fmt = "<" + "".join(_PLY_TYPES[t] for _, _, t in props)
                size = struct.calcsize(fmt)
                rows = [dict(zip((p[0] for p in props), vals))
                        for vals in struct.iter_unpack(fmt, buf[off:off + size * count])]
                if len(rows) != count:
                    raise PLYParseError(f"truncated body in element {name!r}")
                off += size * count
                data[name] = rows
                continue
            rows = []
            for _ in range(count):
                rec = {}
                for pname, kind, types in props:
                    if kind == "scalar":
                        code = "<" + _PLY_TYPES[types]
                        (rec[pname],) = struct.unpack_from(code, buf, off)
                        off += struct.calcsize(code)
                    else:
                        ccode = "<" + _PLY_TYPES[types[0]]
                        (n,) = struct.unpack_from(ccode, buf, off)
                        off += struct.calcsize(ccode)
                        icode = "<%d%s" % (n, _PLY_TYPES[types[1]])
                        rec[pname] = list(struct.unpack_from(icode, buf, off))
                        off += struct.calcsize(icode)
                rows.append(rec)
            data[name] = rows
    except struct.error as exc:
        raise PLYParseError("truncated binary body") from exc
    return data


def load_ply(path) -> TriangleMesh:
    """Load a triangle mesh from an ASCII or binary little-endian PLY file."""
    with open(path, "rb") as fh:
        fmt, elements = _parse_header(fh)
        names = {e[0]: e for e in elements}
        if "vertex" not in names:
            raise PLYParseError("no vertex element")
        vprops = [p[0] for p in names["vertex"][2]]
        if not all(axis in vprops for axis in "xyz"):
            raise PLYParseError("vertex element lacks x/y/z")
        if "face" not in names or names["face"][1] == 0:
            raise EmptyMeshError("mesh has no faces")
        flist = [p for p in names["face"][2] if p[1] == "list"]
        if not flist:
            raise PLYParseError("face element has no index list")
        data = _read_ascii(fh, elements) if fmt == "ascii" else _read_binary(fh, elements)

    verts = np.array([[r["x"], r["y"], r["z"]] for r in data["vertex"]], dtype=np.float64)
    key = flist[0][0]
    faces = []
    for i, r in enumerate(data["face"]):
        idx = r[key]
        if len(idx) != 3:
            raise PLYFormatError(f"face {i} has {len(idx)} vertices; only triangles are supported")
        faces.append(idx)
    return TriangleMesh.from_arrays(verts, np.array(faces, dtype=np.int64))


def save_ply(mesh: TriangleMesh, path, binary: bool = False) -> None:
    """Write ``mesh`` as PLY. ASCII output uses 9 significant digits."""
    if mesh is None or len(mesh.faces) == 0:
        raise EmptyMeshError("refusing to write an empty mesh")
    vtype = "double" if binary else "float"
    header = (
        "ply\n"
        f"format {'binary_little_endian' if binary else 'ascii'} 1.0\n"
        f"element vertex {len(mesh.vertices)}\n"
        f"property {vtype} x\nproperty {vtype} y\nproperty {vtype} z\n"
        f"element face {len(mesh.faces)}\n"
        "property list uchar int vertex_indices\n"
        "end_header\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            fh.write(np.asarray(mesh.vertices, dtype="<f8").tobytes())
            rec = np.zeros(len(mesh.faces), dtype=[("n", "u1"), ("idx", "<i4", 3)])
            rec["n"] = 3
            rec["idx"] = mesh.faces
            fh.write(rec.tobytes())
        else:
            lines = ["%.9g %.9g %.9g" % tuple(v) for v in mesh.vertices]
            lines += ["3 %d %d %d" % tuple(f) for f in mesh.faces]
            fh.write(("\n".join(lines) + "\n").encode("ascii"))


# ----------------------------------------------------------------------- terrain

def _value_noise(rng: np.random.Generator, xs: np.ndarray, ys: np.ndarray, period: float) -> np.ndarray:
    """Smoothstep-interpolated lattice noise in [-1, 1] sampled at grid coordinates."""
    gx = xs / period
    gy = ys / period
    nxl = int(np.floor(gx.max())) + 2
    nyl = int(np.floor(gy.max())) + 2
    lattice = rng.uniform(-1.0, 1.0, size=(nxl, nyl))
    x0 = np.floor(gx).astype(int)
    y0 = np.floor(gy).astype(int)
    tx = gx - x0
    ty = gy - y0
    sx = tx * tx * (3 - 2 * tx)
    sy = ty * ty * (3 - 2 * ty)
    X0, Y0 = np.meshgrid(x0, y0, indexing="ij")
    SX, SY = np.meshgrid(sx, sy, indexing="ij")
    c00 = lattice[X0, Y0]
    c10 = lattice[X0 + 1, Y0]
    c01 = lattice[X0, Y0 + 1]
    c11 = lattice[X0 + 1, Y0 + 1]
    top = c00 + SX * (c10 - c00)
    bot = c01 + SX * (c11 - c01)
    return top + SY * (bot - top)


def terrain_heights(seed: int, nx: int, ny: int, amplitude: float, octaves: int = 4,
                    base_period: float | None = None, persistence: float = 0.5) -> np.ndarray:
    """Height samples (nx, ny) from summed value-noise octaves, scaled to ``amplitude``."""
    if octaves < 1:
        raise ValueError("octaves must be >= 1")
    rng = np.random.default_rng(seed)
    period = float(base_period) if base_period else max(nx, ny) / 4.0
    xs = np.arange(nx, dtype=np.float64)
    ys = np.arange(ny, dtype=np.float64)
    total = np.zeros((nx, ny))
    weight = 0.0
    amp = 1.0
    for _ in range(octaves):
        total += amp * _value_noise(rng, xs, ys, max(period, 1.0))
        weight += amp
        amp *= persistence
        period /= 2.0
    return amplitude * total / weight


def generate_terrain(seed: int, nx: int = 64, ny: int = 64, cell_size: float = 0.5,
                     amplitude: float = 2.0, octaves: int = 4,
                     base_period: float | None = None) -> TriangleMesh:
    """Deterministic heightfield mesh with ``2*(nx-1)*(ny-1)`` triangles, centred on the origin."""
    if nx < 2 or ny < 2:
        raise ValueError("nx and ny must be >= 2")
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    if cell_size <= 0:
        raise ValueError("cell_size must be > 0")
    if amplitude == 0:
        heights = np.zeros((nx, ny))
    else:
        heights = terrain_heights(seed, nx, ny, amplitude, octaves, base_period)
    xs = (np.arange(nx) - (nx - 1) / 2.0) * cell_size
    ys = (np.arange(ny) - (ny - 1) / 2.0) * cell_size
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    vertices = np.stack([X.ravel(), Y.ravel(), heights.ravel()], axis=1)

    ii, jj = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1), indexing="ij")
    a = (ii * ny + jj).ravel()
    b = ((ii + 1) * ny + jj).ravel()
    c = ((ii + 1) * ny + jj + 1).ravel()
    d = (ii * ny + jj + 1).ravel()
    faces = np.empty((2 * a.size, 3), dtype=np.int64)
    faces[0::2] = np.stack([a, b, c], axis=1)
    faces[1::2] = np.stack([a, c, d], axis=1)
    return TriangleMesh.from_arrays(vertices, faces)

