"""Simplicial meshes of intervals, the unit square and disks.

Every mesh carries the exact distance to the boundary of the *true*
geometry at each node.  For disks the boundary is approximated by an
inscribed polygon, but ``node_distance`` is measured against the circle.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable P1 mesh.

    ``nodes`` has shape (n_nodes, dim); ``elements`` has shape
    (n_elements, dim + 1).  ``R`` and ``center`` describe a ball that
    contains the closed domain (used by the radial supersolution).
    """

    nodes: np.ndarray
    elements: np.ndarray
    boundary_flags: np.ndarray
    node_distance: np.ndarray
    kind: str = "interval"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        for arr in (self.nodes, self.elements, self.boundary_flags, self.node_distance):
            arr.setflags(write=False)
        _validate(self)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def interior(self) -> np.ndarray:
        """Indices of interior (free) nodes."""
        return self._cache("interior", lambda: np.flatnonzero(~self.boundary_flags))

    @property
    def element_measures(self) -> np.ndarray:
        return self._cache("measures", lambda: _element_geometry(self)[0])

    @property
    def basis_gradients(self) -> np.ndarray:
        """Constant gradients of the local hat functions, shape (ne, dim+1, dim)."""
        return self._cache("gradients", lambda: _element_geometry(self)[1])

    @property
    def lumped_mass(self) -> np.ndarray:
        """Row sums of the P1 mass matrix: |T|/(dim+1) summed over incident elements."""

        def build():
            k = self.dim + 1
            m = np.zeros(self.n_nodes)
            np.add.at(m, self.elements.ravel(), np.repeat(self.element_measures / k, k))
            return m

        return self._cache("lumped", build)

    @property
    def h_max(self) -> float:
        """Largest element diameter."""
        pts = self.nodes[self.elements]
        k = self.dim + 1
        diam = np.zeros(len(self.elements))
        for a in range(k):
            for b in range(a + 1, k):
                diam = np.maximum(diam, np.linalg.norm(pts[:, a] - pts[:, b], axis=1))
        return float(diam.max())

    @property
    def domain_measure(self) -> float:
        return float(self.element_measures.sum())

    @property
    def enclosing_ball(self) -> tuple[np.ndarray, float]:
        """Center (centroid of the nodes) and circumradius about it."""
        center = self.nodes.mean(axis=0)
        radius = float(np.linalg.norm(self.nodes - center, axis=1).max())
        return center, radius

    @property
    def inradius(self) -> float:
        return float(self.node_distance.max())

    def _cache(self, key, build):
        store = self.__dict__.setdefault("_cached", {})
        if key not in store:
            value = build()
            if isinstance(value, np.ndarray):
                value.setflags(write=False)
            store[key] = value
        return store[key]

    def to_csv(self, node_path, element_path) -> None:
        """Dump node table (id,x[,y],boundary,distance) and element table."""
        coords = ["x", "y"][: self.dim]
        with open(node_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", *coords, "boundary", "distance"])
            for i in range(self.n_nodes):
                w.writerow(
                    [i, *(f"{c:.17g}" for c in self.nodes[i]), int(self.boundary_flags[i]),
                     f"{self.node_distance[i]:.17g}"]
                )
        with open(element_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"n{j}" for j in range(self.dim + 1)])
            w.writerows(self.elements.tolist())


def _element_geometry(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    pts = mesh.nodes[mesh.elements]  # (ne, k, dim)
    if mesh.dim == 1:
        length = pts[:, 1, 0] - pts[:, 0, 0]
        with np.errstate(divide="ignore"):
            grads = np.stack([-1.0 / length, 1.0 / length], axis=1)[:, :, None]
        return np.abs(length), grads
    # 2D: solve for barycentric gradients
    e1 = pts[:, 1] - pts[:, 0]
    e2 = pts[:, 2] - pts[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    area = 0.5 * np.abs(det)
    with np.errstate(divide="ignore", invalid="ignore"):  # degenerate elements are rejected by _validate
        g1 = np.stack([e2[:, 1], -e2[:, 0]], axis=1) / det[:, None]
        g2 = np.stack([-e1[:, 1], e1[:, 0]], axis=1) / det[:, None]
        g0 = -(g1 + g2)
    return area, np.stack([g0, g1, g2], axis=1)


def _validate(mesh: Mesh) -> None:
    if mesh.elements.shape[1] != mesh.dim + 1:
        raise ValueError("element arity does not match spatial dimension")
    if len(mesh.boundary_flags) != mesh.n_nodes or len(mesh.node_distance) != mesh.n_nodes:
        raise ValueError("per-node arrays have wrong length")
    if np.any(_element_geometry(mesh)[0] <= 0):
        raise ValueError("mesh contains degenerate elements")
    d = mesh.node_distance
    if np.any(d < 0) or np.any(d[mesh.boundary_flags] != 0) or np.any(d[~mesh.boundary_flags] <= 0):
        raise ValueError("node_distance must vanish exactly on boundary nodes and be positive inside")


def build_interval_mesh(a: float, b: float, n: int) -> Mesh:
    """Uniform mesh of (a, b) with ``n`` elements."""
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    if int(n) != n or n < 2:
        raise ValueError(f"need at least 2 elements, got n={n}")
    n = int(n)
    x = a + (b - a) * np.arange(n + 1) / n
    x[-1] = b
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    flags = np.zeros(n + 1, dtype=bool)
    flags[[0, -1]] = True
    dist = np.minimum(x - a, b - x)
    dist[[0, -1]] = 0.0
    return Mesh(x[:, None], elements, flags, dist, kind="interval", params={"a": a, "b": b, "n": n})


def build_2d_mesh(shape: str, h_target: float, R: float = 1.0) -> Mesh:
    """Triangulate ``"unit_square"`` or ``"disk"`` (radius ``R``, centered at 0)."""
    if not h_target > 0:
        raise ValueError(f"h_target must be positive, got {h_target}")
    if shape == "unit_square":
        if h_target >= math.sqrt(2.0):
            raise ValueError("h_target must be smaller than the domain diameter")
        return _square_mesh(h_target)
    if shape == "disk":
        if R <= 0:
            raise ValueError("disk radius must be positive")
        if h_target >= 2 * R:
            raise ValueError("h_target must be smaller than the domain diameter")
        return _disk_mesh(R, h_target)
    raise ValueError(f"unknown shape {shape!r}")


def _square_mesh(h: float) -> Mesh:
    n = max(1, math.ceil(1.0 / h))
    t = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)  # idx[j, i] -> (x_i, y_j)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    elements = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="xy")
    flags = ((i == 0) | (i == n) | (j == 0) | (j == n)).ravel()
    x, y = nodes[:, 0], nodes[:, 1]
    dist = np.minimum.reduce([x, 1.0 - x, y, 1.0 - y])
    dist[flags] = 0.0
    return Mesh(nodes, elements, flags, dist, kind="unit_square", params={"h": h, "n": n})


def _disk_mesh(R: float, h: float) -> Mesh:
    n_rings = max(2, math.ceil(R / h))
    pts = [np.zeros((1, 2))]
    for k in range(1, n_rings + 1):
        r = R * k / n_rings
        m = max(6, math.ceil(2 * math.pi * r / h))
        theta = 2 * math.pi * np.arange(m) / m + (0.5 * math.pi / m) * (k % 2)
        pts.append(r * np.column_stack([np.cos(theta), np.sin(theta)]))
    nodes = np.concatenate(pts)
    n_boundary = len(pts[-1])
    flags = np.zeros(len(nodes), dtype=bool)
    flags[-n_boundary:] = True
    # Snap boundary ring exactly onto the circle.
    nodes[flags] *= R / np.linalg.norm(nodes[flags], axis=1)[:, None]
    tri = Delaunay(nodes)
    elements = tri.simplices.astype(np.int64)
    # Orient counter-clockwise for tidy output.
    p = nodes[elements]
    det = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (
        p[:, 2, 0] - p[:, 0, 0]
    )
    elements[det < 0] = elements[det < 0][:, [0, 2, 1]]
    dist = R - np.linalg.norm(nodes, axis=1)
    dist[flags] = 0.0
    return Mesh(nodes, elements, flags, dist, kind="disk", params={"R": R, "h": h})


def load_node_csv(path) -> dict[str, np.ndarray]:
    """Read back a node table written by :meth:`Mesh.to_csv` or the CLI."""
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}
