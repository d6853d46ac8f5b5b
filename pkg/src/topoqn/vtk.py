"""Legacy ASCII VTK output for triangle meshes with nodal fields."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import Mesh

__all__ = ["write_vtk", "read_vtk"]

_VTK_TRIANGLE = 5


def _fmt(values) -> str:
    return "\n".join(" ".join(repr(float(v)) for v in row) for row in np.atleast_2d(values))


def write_vtk(path, mesh: Mesh, fields: dict | None = None, title: str = "topoqn") -> Path:
    """Write ``mesh`` and nodal ``fields`` as an unstructured grid.

    Scalar fields have shape ``(n_nodes,)``; vector fields have shape
    ``(n_nodes, 2)`` and are written with a zero third component.

    Parameters
    ----------
    path : str or Path
    mesh : Mesh
    fields : dict of str to ndarray, optional
    title : str
        Header line; newlines are not allowed.

    Returns
    -------
    Path
        The written file.
    """
    path = Path(path)
    if "\n" in title:
        raise ValueError("title must be a single line")
    n = mesh.n_nodes
    blocks = []
    for name, values in (fields or {}).items():
        if not name or any(ch.isspace() for ch in name):
            raise ValueError(f"field name {name!r} must be non-empty without whitespace")
        values = np.asarray(values, dtype=float)
        if values.shape == (n,):
            blocks.append(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n"
                          + "\n".join(repr(float(v)) for v in values))
        elif values.shape == (n, 2):
            vec = np.column_stack([values, np.zeros(n)])
            blocks.append(f"VECTORS {name} double\n" + _fmt(vec))
        else:
            raise ValueError(f"field {name!r} has shape {values.shape}, expected ({n},) or ({n}, 2)")

    points = np.column_stack([mesh.nodes, np.zeros(n)])
    tris = mesh.triangles
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {n} double",
        _fmt(points),
        f"CELLS {len(tris)} {4 * len(tris)}",
        "\n".join(f"3 {a} {b} {c}" for a, b, c in tris),
        f"CELL_TYPES {len(tris)}",
        "\n".join([str(_VTK_TRIANGLE)] * len(tris)),
    ]
    if blocks:
        lines.append(f"POINT_DATA {n}")
        lines.extend(blocks)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk(path):
    """Parse a file written by :func:`write_vtk`.

    Returns
    -------
    points : ndarray of shape (n, 3)
    cells : ndarray of shape (m, 3)
    fields : dict
        Scalars as ``(n,)`` arrays, vectors as ``(n, 3)`` arrays.
    """
    tokens = Path(path).read_text().split("\n")
    if not tokens[0].startswith("# vtk DataFile"):
        raise ValueError("not a legacy VTK file")
    words = " ".join(tokens[2:]).split()
    pos = 0

    def take(k):
        nonlocal pos
        out = words[pos:pos + k]
        if len(out) < k:
            raise ValueError("unexpected end of VTK file")
        pos += k
        return out

    points = cells = None
    fields = {}
    n = 0
    while pos < len(words):
        key = take(1)[0]
        if key in ("ASCII", "DATASET", "UNSTRUCTURED_GRID"):
            continue
        if key == "POINTS":
            n, _ = int(take(1)[0]), take(1)
            points = np.array(take(3 * n), dtype=float).reshape(n, 3)
        elif key == "CELLS":
            m, size = int(take(1)[0]), int(take(1)[0])
            raw = np.array(take(size), dtype=int).reshape(m, -1)
            if not np.all(raw[:, 0] == 3):
                raise ValueError("only triangle cells are supported")
            cells = raw[:, 1:]
        elif key == "CELL_TYPES":
            m = int(take(1)[0])
            if not np.all(np.array(take(m), dtype=int) == _VTK_TRIANGLE):
                raise ValueError("only triangle cells are supported")
        elif key == "POINT_DATA":
            take(1)
        elif key == "SCALARS":
            name, _, _ = take(3)
            take(2)  # LOOKUP_TABLE default
            fields[name] = np.array(take(n), dtype=float)
        elif key == "VECTORS":
            name, _ = take(2)
            fields[name] = np.array(take(3 * n), dtype=float).reshape(n, 3)
        else:
            raise ValueError(f"unsupported VTK keyword {key!r}")
    return points, cells, fields
