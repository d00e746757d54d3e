"""ASCII OFF and PLY mesh I/O, positions in micrometres."""

from pathlib import Path

import numpy as np

from ..errors import DataError
from .mesh import TriMesh


def write_mesh(mesh: TriMesh, path) -> None:
    """Write a mesh as ASCII OFF (.off) or PLY (.ply), chosen by extension."""
    path = Path(path)
    if path.suffix.lower() == ".off":
        _write_off(mesh, path)
    elif path.suffix.lower() == ".ply":
        _write_ply(mesh, path)
    else:
        raise DataError(f"unsupported mesh format: {path.suffix}")


def read_mesh(path) -> TriMesh:
    """Read an ASCII OFF or PLY file into a TriMesh."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"mesh file not found: {path}")
    if path.suffix.lower() == ".off":
        return _read_off(path)
    if path.suffix.lower() == ".ply":
        return _read_ply(path)
    raise DataError(f"unsupported mesh format: {path.suffix}")


def _write_off(mesh: TriMesh, path: Path) -> None:
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_faces} 0\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for f in mesh.faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")


def _read_off(path: Path) -> TriMesh:
    with open(path) as fh:
        tokens = []
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.extend(line.split())
    if not tokens or tokens[0] != "OFF":
        raise DataError(f"{path}: missing OFF header")
    try:
        n_v, n_f = int(tokens[1]), int(tokens[2])
        pos = 4
        verts = np.array(tokens[pos : pos + 3 * n_v], dtype=float).reshape(n_v, 3)
        pos += 3 * n_v
        faces = []
        for _ in range(n_f):
            k = int(tokens[pos])
            if k != 3:
                raise DataError(f"{path}: only triangle faces supported")
            faces.append([int(tokens[pos + 1]), int(tokens[pos + 2]), int(tokens[pos + 3])])
            pos += 1 + k
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: malformed OFF file") from exc
    return TriMesh(verts, np.array(faces, dtype=np.int64))


def _write_ply(mesh: TriMesh, path: Path) -> None:
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write("comment units um\n")
        fh.write(f"element vertex {mesh.n_vertices}\n")
        fh.write("property double x\nproperty double y\nproperty double z\n")
        fh.write(f"element face {mesh.n_faces}\n")
        fh.write("property list uchar int vertex_indices\n")
        fh.write("end_header\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for f in mesh.faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")


def _read_ply(path: Path) -> TriMesh:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise DataError(f"{path}: missing ply header")
    n_v = n_f = None
    body_at = None
    for i, line in enumerate(lines[1:], start=1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format" and parts[1] != "ascii":
            raise DataError(f"{path}: only ascii PLY supported")
        if parts[0] == "element" and parts[1] == "vertex":
            n_v = int(parts[2])
        elif parts[0] == "element" and parts[1] == "face":
            n_f = int(parts[2])
        elif parts[0] == "end_header":
            body_at = i + 1
            break
    if n_v is None or n_f is None or body_at is None:
        raise DataError(f"{path}: incomplete PLY header")
    try:
        verts = np.array(
            [lines[body_at + i].split()[:3] for i in range(n_v)], dtype=float
        )
        faces = []
        for i in range(n_f):
            parts = lines[body_at + n_v + i].split()
            if int(parts[0]) != 3:
                raise DataError(f"{path}: only triangle faces supported")
            faces.append([int(parts[1]), int(parts[2]), int(parts[3])])
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: malformed PLY body") from exc
    return TriMesh(verts, np.array(faces, dtype=np.int64))
