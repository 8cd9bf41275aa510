"""Plain-text mesh and field files.

Mesh layout::

    # spec: <family:key=value;...>        (optional)
    n N E F B h
    c0 c1 mass                            (N lines)
    i j length weight                     (E lines)
    i j k l0 l1 l2                        (F lines)
    b_0 b_1 ... b_{B-1}                   (one line, may be empty)

Floats are written with ``repr`` so a write/read round trip is bit-exact.
"""
from __future__ import annotations

import os
import tempfile

import numpy as np

from .mesh import DiscreteManifold
from .spec import ManifoldSpec


def atomic_write_text(path, text: str):
    """Write via a temporary file in the same directory, then rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _r(x):
    return repr(float(x))


def mesh_to_text(mesh: DiscreteManifold) -> str:
    lines = []
    if mesh.spec is not None:
        lines.append(f"# spec: {mesh.spec.to_string()}")
    lines.append(f"{mesh.n} {mesh.N} {mesh.edges.shape[0]} {mesh.faces.shape[0]} "
                 f"{mesh.boundary.size} {_r(mesh.h)}")
    for (c0, c1), m in zip(mesh.coords.tolist(), mesh.mass.tolist()):
        lines.append(f"{c0!r} {c1!r} {m!r}")
    for (i, j), l, w in zip(mesh.edges.tolist(), mesh.edge_lengths.tolist(),
                            mesh.edge_weights.tolist()):
        lines.append(f"{i} {j} {l!r} {w!r}")
    for (i, j, k), (a, b, c) in zip(mesh.faces.tolist(), mesh.face_lengths.tolist()):
        lines.append(f"{i} {j} {k} {a!r} {b!r} {c!r}")
    lines.append(" ".join(str(b) for b in mesh.boundary.tolist()))
    return "\n".join(lines) + "\n"


def write_mesh(mesh: DiscreteManifold, path):
    atomic_write_text(path, mesh_to_text(mesh))


def read_mesh(path) -> DiscreteManifold:
    """Inverse of :func:`write_mesh`."""
    with open(path) as fh:
        lines = fh.read().split("\n")
    spec = None
    pos = 0
    if lines and lines[0].startswith("#"):
        head = lines[0][1:].strip()
        if head.startswith("spec:"):
            spec = ManifoldSpec.from_string(head[len("spec:"):].strip())
        pos = 1
    try:
        n, N, E, F, B, h = lines[pos].split()
        n, N, E, F, B = int(n), int(N), int(E), int(F), int(B)
        h = float(h)
    except ValueError as exc:
        raise ValueError(f"{path}: malformed header") from exc
    pos += 1
    V = np.array([ln.split() for ln in lines[pos:pos + N]], dtype=float).reshape(N, 3)
    pos += N
    Es = [ln.split() for ln in lines[pos:pos + E]]
    pos += E
    Fs = [ln.split() for ln in lines[pos:pos + F]]
    pos += F
    bline = lines[pos] if pos < len(lines) else ""
    edges = np.array([e[:2] for e in Es], dtype=np.int64).reshape(E, 2)
    ew = np.array([e[2:] for e in Es], dtype=float).reshape(E, 2)
    faces = np.array([f[:3] for f in Fs], dtype=np.int64).reshape(F, 3)
    fl = np.array([f[3:] for f in Fs], dtype=float).reshape(F, 3)
    boundary = np.array(bline.split(), dtype=np.int64)
    if boundary.size != B:
        raise ValueError(f"{path}: expected {B} boundary vertices, found {boundary.size}")
    return DiscreteManifold(V[:, :2], V[:, 2], edges, ew[:, 0], ew[:, 1], faces, fl,
                            boundary, h=h, spec=spec, n=n)


def write_field(path, values, name="value"):
    """One ``vertex_id value`` line per vertex after a header line."""
    values = np.asarray(values, dtype=float)
    body = "\n".join(f"{i} {v!r}" for i, v in enumerate(values.tolist()))
    atomic_write_text(path, f"vertex_id {name}\n{body}\n")


def read_field(path) -> np.ndarray:
    data = np.loadtxt(path, skiprows=1, ndmin=2)
    return data[:, 1].copy()
