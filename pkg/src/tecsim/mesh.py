"""Structured triangulations of rectangles with tagged boundary regions.

The domain is an axis-aligned rectangle split into a regular nx-by-ny grid of
cells, each cut along its main diagonal into two triangles.  Boundary edges
carry one of four region tags:

* ``GammaA`` / ``GammaC`` -- the two electrode contact strips,
* ``GammaW`` -- radiating wall,
* ``GammaO`` -- open/insulated remainder.

Tags are assigned per side, either a single tag for the whole side or a list
of ``(start, stop, tag)`` intervals in side coordinates (x along bottom/top,
y along left/right).  Interval breakpoints must coincide with grid lines so
that every edge lies in exactly one region.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import LayoutMisaligned, SchemaError

GAMMA_A = "GammaA"
GAMMA_C = "GammaC"
GAMMA_W = "GammaW"
GAMMA_O = "GammaO"

#: all recognized boundary region tags
REGION_TAGS = (GAMMA_A, GAMMA_C, GAMMA_W, GAMMA_O)

#: the electrode contact region (where the surface current acts)
ELECTRODES = (GAMMA_A, GAMMA_C)

_SIDES = ("bottom", "right", "top", "left")


@dataclass(frozen=True)
class DomainSpec:
    """Rectangle geometry plus the boundary-region layout.

    ``layout`` maps each side name to either a region tag or a sequence of
    ``(start, stop, tag)`` intervals covering the side exactly.
    """

    width: float = 1.0
    height: float = 1.0
    layout: Mapping[str, object] = field(
        default_factory=lambda: {s: GAMMA_O for s in _SIDES}
    )

    def __post_init__(self):
        if not (self.width > 0.0 and self.height > 0.0):
            raise SchemaError("domain width and height must be positive")
        for side in self.layout:
            if side not in _SIDES:
                raise SchemaError(f"unknown side {side!r} in boundary layout")

    def side_intervals(self, side: str) -> list[tuple[float, float, str]]:
        """Normalized interval list for one side (whole-side tag expanded)."""
        length = self.width if side in ("bottom", "top") else self.height
        entry = self.layout.get(side, GAMMA_O)
        if isinstance(entry, str):
            intervals = [(0.0, length, entry)]
        else:
            intervals = [(float(a), float(b), str(tag)) for a, b, tag in entry]
        pos = 0.0
        for a, b, tag in intervals:
            if tag not in REGION_TAGS:
                raise SchemaError(f"unknown region tag {tag!r} on side {side!r}")
            if abs(a - pos) > 1e-12 * max(1.0, length) or b <= a:
                raise SchemaError(
                    f"intervals on side {side!r} must cover [0, {length:g}] "
                    f"in order without gaps"
                )
            pos = b
        if abs(pos - length) > 1e-12 * max(1.0, length):
            raise SchemaError(f"intervals on side {side!r} do not reach {length:g}")
        return intervals


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming P1 triangulation with tagged boundary edges.

    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counterclockwise
    edges : (ne, 2) int array of boundary edges, ordered along each side
    edge_tags : tuple of region tags, parallel to ``edges``
    """

    spec: DomainSpec
    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_tags: tuple[str, ...]

    def __post_init__(self):
        areas = triangle_areas(self)
        if not np.all(areas > 0.0):
            raise SchemaError("mesh contains a degenerate or flipped triangle")

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    def edges_in(self, regions: Sequence[str]) -> np.ndarray:
        """Indices into ``edges`` whose tag is in ``regions``."""
        wanted = set(regions)
        return np.array(
            [k for k, tag in enumerate(self.edge_tags) if tag in wanted], dtype=int
        )

    def region_lengths(self) -> dict[str, float]:
        """Total boundary measure carried by each present tag."""
        v = self.vertices
        d = v[self.edges[:, 1]] - v[self.edges[:, 0]]
        lengths = np.hypot(d[:, 0], d[:, 1])
        out: dict[str, float] = {}
        for k, tag in enumerate(self.edge_tags):
            out[tag] = out.get(tag, 0.0) + lengths[k]
        return out


def triangle_areas(mesh: Mesh) -> np.ndarray:
    """Signed areas of all triangles (positive for CCW orientation)."""
    p = mesh.vertices[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _tag_for(intervals, mid, side, h):
    # breakpoints were already checked to sit on grid lines, so every edge
    # midpoint lies strictly inside exactly one interval
    for a, b, tag in intervals:
        if a < mid < b:
            return tag
    raise LayoutMisaligned(
        f"no region interval on side {side!r} contains edge midpoint {mid:g} "
        f"(spacing {h:g})"
    )


def build_rect_mesh(spec: DomainSpec, nx: int, ny: int) -> Mesh:
    """Uniform nx-by-ny triangulation of the rectangle in ``spec``.

    Each grid cell is split along the diagonal from its lower-left to its
    upper-right corner.  Boundary intervals in ``spec.layout`` must align
    with the grid, otherwise :class:`LayoutMisaligned` is raised.
    """
    if nx < 1 or ny < 1:
        raise SchemaError("nx and ny must be at least 1")
    xs = np.linspace(0.0, spec.width, nx + 1)
    ys = np.linspace(0.0, spec.height, ny + 1)
    X, Y = np.meshgrid(xs, ys)  # row j = constant y
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    k = 0
    for j in range(ny):
        for i in range(nx):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            tris[k] = (v00, v10, v11)
            tris[k + 1] = (v00, v11, v01)
            k += 2

    edges: list[tuple[int, int]] = []
    tags: list[str] = []
    per_side = {
        "bottom": ([(vid(i, 0), vid(i + 1, 0)) for i in range(nx)], xs, spec.width / nx),
        "top": ([(vid(i, ny), vid(i + 1, ny)) for i in range(nx)], xs, spec.width / nx),
        "left": ([(vid(0, j), vid(0, j + 1)) for j in range(ny)], ys, spec.height / ny),
        "right": (
            [(vid(nx, j), vid(nx, j + 1)) for j in range(ny)],
            ys,
            spec.height / ny,
        ),
    }
    for side in _SIDES:
        side_edges, coords, h = per_side[side]
        intervals = spec.side_intervals(side)
        # breakpoints must sit on grid lines
        for a, b, _ in intervals:
            for brk in (a, b):
                if np.min(np.abs(coords - brk)) > 1e-9 * max(1.0, h):
                    raise LayoutMisaligned(
                        f"breakpoint {brk:g} on side {side!r} is not a grid line"
                    )
        for n, e in enumerate(side_edges):
            mid = 0.5 * (coords[n] + coords[n + 1])
            edges.append(e)
            tags.append(_tag_for(intervals, mid, side, h))

    return Mesh(
        spec=spec,
        vertices=vertices,
        triangles=tris,
        edges=np.asarray(edges, dtype=np.int64),
        edge_tags=tuple(tags),
    )


def refine_uniform(mesh: Mesh) -> Mesh:
    """Red refinement: every triangle into four via edge midpoints.

    Boundary edges split in two and keep their region tag, so region measures
    are preserved exactly.
    """
    verts = [mesh.vertices]
    midpoint: dict[tuple[int, int], int] = {}
    next_id = mesh.num_vertices
    new_pts: list[np.ndarray] = []

    def mid(a: int, b: int) -> int:
        nonlocal next_id
        key = (a, b) if a < b else (b, a)
        idx = midpoint.get(key)
        if idx is None:
            idx = next_id
            midpoint[key] = idx
            new_pts.append(0.5 * (mesh.vertices[a] + mesh.vertices[b]))
            next_id += 1
        return idx

    tris = np.empty((4 * mesh.num_triangles, 3), dtype=np.int64)
    for t, (a, b, c) in enumerate(mesh.triangles):
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        tris[4 * t + 0] = (a, ab, ca)
        tris[4 * t + 1] = (ab, b, bc)
        tris[4 * t + 2] = (ca, bc, c)
        tris[4 * t + 3] = (ab, bc, ca)

    edges = np.empty((2 * mesh.edges.shape[0], 2), dtype=np.int64)
    tags: list[str] = []
    for k, (a, b) in enumerate(mesh.edges):
        m = mid(int(a), int(b))
        edges[2 * k] = (a, m)
        edges[2 * k + 1] = (m, b)
        tags.extend([mesh.edge_tags[k]] * 2)

    vertices = np.vstack(verts + [np.asarray(new_pts)]) if new_pts else mesh.vertices
    return Mesh(
        spec=mesh.spec,
        vertices=vertices,
        triangles=tris,
        edges=edges,
        edge_tags=tuple(tags),
    )


def boundary_measure(mesh: Mesh, regions: Sequence[str]) -> float:
    """Total length of all boundary edges tagged with any of ``regions``."""
    idx = mesh.edges_in(regions)
    if idx.size == 0:
        return 0.0
    v = mesh.vertices
    e = mesh.edges[idx]
    d = v[e[:, 1]] - v[e[:, 0]]
    return float(np.sum(np.hypot(d[:, 0], d[:, 1])))
