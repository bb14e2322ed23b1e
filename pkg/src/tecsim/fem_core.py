"""P1 finite-element kernels on triangulated rectangles.

Conventions
-----------
* Fields are vertex-valued arrays wrapped in :class:`Field`.
* Coefficients are vectorized callables ``f(x, y, e) -> array`` where ``x``,
  ``y`` are point-coordinate arrays and ``e`` is a tuple of state arrays
  evaluated at the same points (species concentrations then temperature).
  A plain number works anywhere a callable does.
* Coefficient values inside mass/stiffness forms are frozen at triangle
  centroids, so constant coefficients reproduce the closed-form element
  matrices exactly:

  - mass:      (area/12) * [[2,1,1],[1,2,1],[1,1,2]]
  - stiffness on the unit right triangle: (1/2) * [[2,-1,-1],[-1,1,0],[-1,0,1]]
  - boundary edge mass: (length/6) * [[2,1],[1,2]]

* Boundary bilinear forms and loads use 2-point Gauss per edge (exact through
  cubics); Lp boundary norms use 4-point Gauss.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import EigenNoConvergence, NonFiniteValue, SingularSystem
from .mesh import Mesh, triangle_areas

# 2-point and 4-point Gauss-Legendre rules mapped to [0, 1]
_GL2_X, _GL2_W = np.polynomial.legendre.leggauss(2)
_GL2_X = 0.5 * (_GL2_X + 1.0)
_GL2_W = 0.5 * _GL2_W
_GL4_X, _GL4_W = np.polynomial.legendre.leggauss(4)
_GL4_X = 0.5 * (_GL4_X + 1.0)
_GL4_W = 0.5 * _GL4_W


@dataclass
class Field:
    """A P1 function: one value per mesh vertex."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.num_vertices,):
            raise ValueError("field length does not match vertex count")

    def copy(self) -> "Field":
        return Field(self.mesh, self.values.copy())


def field_from_function(mesh: Mesh, f) -> Field:
    """Nodal interpolation of ``f(x, y)`` (or a constant)."""
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    vals = _call_coeff(f, x, y, None)
    return Field(mesh, np.broadcast_to(vals, x.shape).astype(float))


def _call_coeff(coeff, x, y, e):
    """Evaluate a coefficient (callable or constant) on point arrays."""
    if callable(coeff):
        out = coeff(x, y, e) if e is not None else coeff(x, y)
        out = np.asarray(out, dtype=float)
        if out.ndim == 0:
            out = np.full(np.shape(x), float(out))
    else:
        out = np.full(np.shape(x), float(coeff))
    if not np.all(np.isfinite(out)):
        raise NonFiniteValue("coefficient evaluated to a non-finite value")
    return out


class _Geometry:
    """Per-mesh geometric factors, computed once and cached on the mesh id."""

    def __init__(self, mesh: Mesh):
        p = mesh.vertices[mesh.triangles]  # (nt, 3, 2)
        self.area = triangle_areas(mesh)
        # grad(lambda_i) = perp(p_{i+2} - p_{i+1}) / (2 A), perp(x,y)=(-y,x)
        edge = np.stack(
            [p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1
        )
        perp = np.stack([-edge[..., 1], edge[..., 0]], axis=-1)
        self.grads = perp / (2.0 * self.area)[:, None, None]  # (nt, 3, 2)
        self.centroid = p.mean(axis=1)  # (nt, 2)
        self.rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
        self.cols = np.tile(mesh.triangles, (1, 3)).ravel()


def _geometry(mesh: Mesh) -> _Geometry:
    geo = getattr(mesh, "_geo", None)
    if geo is None:
        geo = _Geometry(mesh)
        object.__setattr__(mesh, "_geo", geo)  # cache on the frozen instance
    return geo


def _state_at_centroids(mesh: Mesh, state) -> tuple | None:
    if state is None:
        return None
    tri = mesh.triangles
    return tuple(np.asarray(s, dtype=float)[tri].mean(axis=1) for s in state)


_REF_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def assemble_mass(mesh: Mesh, weight=1.0, state=None) -> sp.csr_matrix:
    """Weighted mass matrix, weight frozen at centroids.

    ``weight`` may be a constant or ``f(x, y, e)``; ``state`` is the tuple of
    nodal state arrays the weight depends on (or None).
    """
    geo = _geometry(mesh)
    e_c = _state_at_centroids(mesh, state)
    w = _call_coeff(weight, geo.centroid[:, 0], geo.centroid[:, 1], e_c)
    elem = (w * geo.area)[:, None, None] * _REF_MASS[None, :, :]
    n = mesh.num_vertices
    return sp.coo_matrix((elem.ravel(), (geo.rows, geo.cols)), shape=(n, n)).tocsr()


def assemble_mass_midpoint(mesh: Mesh, weight=1.0, state=None) -> sp.csr_matrix:
    """One-point (centroid) quadrature mass matrix, weight frozen there.

    Entry pattern (w_c A/9) per element block: this is the exact Jacobian of
    the centroid-rule load of an antiderivative with density ``weight``, so a
    fixed-point linearization built with it is Newton-consistent.  Rank one
    per element, positive semidefinite; any stiffness restores definiteness.
    """
    geo = _geometry(mesh)
    e_c = _state_at_centroids(mesh, state)
    w = _call_coeff(weight, geo.centroid[:, 0], geo.centroid[:, 1], e_c)
    elem = (w * geo.area / 9.0)[:, None, None] * np.ones((1, 3, 3))
    n = mesh.num_vertices
    return sp.coo_matrix((elem.ravel(), (geo.rows, geo.cols)), shape=(n, n)).tocsr()


def assemble_stiffness(mesh: Mesh, coeff=1.0, state=None) -> sp.csr_matrix:
    """Scalar-coefficient stiffness matrix, coefficient frozen at centroids."""
    geo = _geometry(mesh)
    e_c = _state_at_centroids(mesh, state)
    c = _call_coeff(coeff, geo.centroid[:, 0], geo.centroid[:, 1], e_c)
    gg = np.einsum("tid,tjd->tij", geo.grads, geo.grads)
    elem = (c * geo.area)[:, None, None] * gg
    n = mesh.num_vertices
    return sp.coo_matrix((elem.ravel(), (geo.rows, geo.cols)), shape=(n, n)).tocsr()


def _edge_geometry(mesh: Mesh, regions: Sequence[str]):
    idx = mesh.edges_in(regions)
    e = mesh.edges[idx]
    p0 = mesh.vertices[e[:, 0]]
    p1 = mesh.vertices[e[:, 1]]
    d = p1 - p0
    length = np.hypot(d[:, 0], d[:, 1])
    return e, p0, p1, length


def assemble_boundary_form(mesh: Mesh, regions, weight=1.0, state=None) -> sp.csr_matrix:
    """Boundary bilinear form  (w u, v) over the given regions, 2-pt Gauss.

    ``weight`` sees the trace of ``state`` at the quadrature points; for a
    constant weight the edge-mass closed form (length/6)[[2,1],[1,2]] is
    reproduced exactly.
    """
    n = mesh.num_vertices
    e, p0, p1, length = _edge_geometry(mesh, regions)
    if e.shape[0] == 0:
        return sp.csr_matrix((n, n))
    elem = np.zeros((e.shape[0], 2, 2))
    for xi, wgt in zip(_GL2_X, _GL2_W):
        xq = p0 + xi * (p1 - p0)
        if state is None:
            e_q = None
        else:
            e_q = tuple(
                (1.0 - xi) * np.asarray(s)[e[:, 0]] + xi * np.asarray(s)[e[:, 1]]
                for s in state
            )
        wv = _call_coeff(weight, xq[:, 0], xq[:, 1], e_q)
        shape = np.array([1.0 - xi, xi])
        elem += (wgt * wv * length)[:, None, None] * np.outer(shape, shape)
    rows = np.repeat(e, 2, axis=1).ravel()
    cols = np.tile(e, (1, 2)).ravel()
    return sp.coo_matrix((elem.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_boundary_load(mesh: Mesh, regions, data) -> np.ndarray:
    """Load vector  v -> (data, v) over the given boundary regions, 2-pt Gauss.

    ``data`` is ``f(x, y)`` (already time-averaged upstream) or a constant.
    """
    n = mesh.num_vertices
    out = np.zeros(n)
    e, p0, p1, length = _edge_geometry(mesh, regions)
    if e.shape[0] == 0:
        return out
    for xi, wgt in zip(_GL2_X, _GL2_W):
        xq = p0 + xi * (p1 - p0)
        g = _call_coeff(data, xq[:, 0], xq[:, 1], None)
        np.add.at(out, e[:, 0], wgt * length * g * (1.0 - xi))
        np.add.at(out, e[:, 1], wgt * length * g * xi)
    return out


# ---------------------------------------------------------------------------
# integrals and norms
# ---------------------------------------------------------------------------


def volume_load_vector(mesh: Mesh) -> np.ndarray:
    """Vector of exact volume integrals of the P1 basis functions."""
    geo = _geometry(mesh)
    out = np.zeros(mesh.num_vertices)
    contrib = np.repeat(geo.area / 3.0, 3)
    np.add.at(out, mesh.triangles.ravel(), contrib)
    return out


def boundary_load_vector(mesh: Mesh, regions) -> np.ndarray:
    """Vector of exact boundary integrals of the basis traces over regions."""
    out = np.zeros(mesh.num_vertices)
    e, _, _, length = _edge_geometry(mesh, regions)
    if e.shape[0]:
        half = np.repeat(length / 2.0, 2)
        np.add.at(out, e.ravel(), half)
    return out


def integrate(field: Field) -> float:
    """Exact integral of a P1 field over the domain."""
    return float(volume_load_vector(field.mesh) @ field.values)


def integrate_cellwise(mesh: Mesh, cell_values: np.ndarray) -> float:
    """Midpoint-rule integral of per-triangle values."""
    return float(np.sum(_geometry(mesh).area * cell_values))


def cell_means(mesh: Mesh, nodal: np.ndarray) -> np.ndarray:
    """Per-triangle average of the three vertex values (centroid value)."""
    return np.asarray(nodal, dtype=float)[mesh.triangles].mean(axis=1)


def norm_l2(field: Field) -> float:
    """Exact L2(domain) norm of a P1 field."""
    v = field.values[field.mesh.triangles]
    s = np.sum(v * v, axis=1) + v[:, 0] * v[:, 1] + v[:, 1] * v[:, 2] + v[:, 0] * v[:, 2]
    return float(np.sqrt(np.sum(_geometry(field.mesh).area / 6.0 * s)))


def norm_h1_semi(field: Field) -> float:
    """Exact L2 norm of the (piecewise constant) gradient."""
    geo = _geometry(field.mesh)
    g = np.einsum("ti,tid->td", field.values[field.mesh.triangles], geo.grads)
    return float(np.sqrt(np.sum(geo.area * np.sum(g * g, axis=1))))


def norm_lp_boundary(field: Field, regions, p: float) -> float:
    """Lp norm of the trace over regions, 4-point Gauss per edge."""
    e, p0, p1, length = _edge_geometry(field.mesh, regions)
    if e.shape[0] == 0:
        return 0.0
    acc = 0.0
    v0 = field.values[e[:, 0]]
    v1 = field.values[e[:, 1]]
    for xi, wgt in zip(_GL4_X, _GL4_W):
        vq = (1.0 - xi) * v0 + xi * v1
        acc += float(np.sum(wgt * length * np.abs(vq) ** p))
    return acc ** (1.0 / p)


def norm_lp_boundary_data(mesh: Mesh, regions, data, p: float) -> float:
    """Lp norm over regions of an arbitrary function ``f(x, y)``, 4-pt Gauss."""
    e, p0, p1, length = _edge_geometry(mesh, regions)
    if e.shape[0] == 0:
        return 0.0
    acc = 0.0
    for xi, wgt in zip(_GL4_X, _GL4_W):
        xq = p0 + xi * (p1 - p0)
        g = _call_coeff(data, xq[:, 0], xq[:, 1], None)
        acc += float(np.sum(wgt * length * np.abs(g) ** p))
    return acc ** (1.0 / p)


def boundary_quad(mesh: Mesh, regions, npts: int = 2):
    """Boundary Gauss data over regions: edge vertex pairs, node coordinates,
    and weights (edge length folded in).

    Returns ``(edges, shape0, xq, yq, wq)`` with arrays shaped (E, npts);
    a trace evaluates as ``values[edges[:,0,None]]*shape0 +
    values[edges[:,1,None]]*(1-shape0)``.  Empty region sets give E = 0.
    """
    if npts == 2:
        nodes, weights = _GL2_X, _GL2_W
    elif npts == 4:
        nodes, weights = _GL4_X, _GL4_W
    else:
        raw_n, raw_w = np.polynomial.legendre.leggauss(npts)
        nodes, weights = 0.5 * (raw_n + 1.0), 0.5 * raw_w
    e, p0, p1, length = _edge_geometry(mesh, regions)
    xi = nodes[None, :]
    xq = p0[:, 0:1] + xi * (p1[:, 0:1] - p0[:, 0:1])
    yq = p0[:, 1:2] + xi * (p1[:, 1:2] - p0[:, 1:2])
    wq = length[:, None] * weights[None, :]
    shape0 = np.broadcast_to(1.0 - xi, wq.shape)
    return e, shape0, xq, yq, wq


def trace_at_quad(values: np.ndarray, edges: np.ndarray, shape0: np.ndarray):
    """P1 trace values at the boundary quadrature nodes of ``boundary_quad``."""
    v = np.asarray(values, dtype=float)
    return v[edges[:, 0], None] * shape0 + v[edges[:, 1], None] * (1.0 - shape0)


# ---------------------------------------------------------------------------
# discrete functional-inequality constants
# ---------------------------------------------------------------------------


def estimate_P2(mesh: Mesh, tol: float = 1e-8, max_iter: int = 500) -> float:
    """Mean-zero Poincare constant: 1/sqrt(lambda_1) of the Neumann Laplacian.

    Inverse power iteration on the stiffness/mass pencil restricted to the
    mean-zero subspace (enforced by a Lagrange multiplier row against the
    exact volume functional).  Deterministic start vector.
    """
    K = assemble_stiffness(mesh).tocsc()
    M = assemble_mass(mesh).tocsr()
    c = volume_load_vector(mesh)
    n = mesh.num_vertices
    aug = sp.bmat([[K, c[:, None]], [c[None, :], None]], format="csc")
    lu = spla.splu(aug)

    x = mesh.vertices[:, 0] + 0.37 * mesh.vertices[:, 1] ** 2
    x -= (c @ x) / c.sum()
    x /= np.sqrt(x @ (M @ x))
    lam_old = np.inf
    for _ in range(max_iter):
        rhs = np.concatenate([M @ x, [0.0]])
        y = lu.solve(rhs)[:n]
        y /= np.sqrt(y @ (M @ y))
        lam = (y @ (K @ y)) / (y @ (M @ y))
        if abs(lam - lam_old) <= tol * abs(lam):
            return 1.0 / np.sqrt(lam)
        lam_old, x = lam, y
    raise EigenNoConvergence("Poincare-constant inverse iteration did not converge")


def estimate_K2(
    mesh: Mesh, trace_regions=None, tol: float = 1e-8, max_iter: int = 2000
) -> float:
    """Trace constant: sqrt of the largest mu with  B v = mu (M + K) v.

    ``B`` is the boundary mass over ``trace_regions`` (full boundary when
    None), giving |v|_{2,boundary} <= K2 (|v|_2 + |grad v|_2) since
    a^2 + b^2 <= (a + b)^2 for nonnegative a, b.
    """
    from .mesh import REGION_TAGS

    regions = REGION_TAGS if trace_regions is None else trace_regions
    B = assemble_boundary_form(mesh, regions).tocsr()
    G = (assemble_mass(mesh) + assemble_stiffness(mesh)).tocsc()
    lu = spla.splu(G)

    x = 1.0 + mesh.vertices[:, 0]
    x /= np.sqrt(x @ (G @ x))
    mu_old = np.inf
    for _ in range(max_iter):
        y = lu.solve(B @ x)
        nrm = np.sqrt(y @ (G @ y))
        if nrm == 0.0:
            raise EigenNoConvergence("trace pencil iteration collapsed to zero")
        y /= nrm
        mu = (y @ (B @ y)) / (y @ (G @ y))
        if abs(mu - mu_old) <= tol * abs(mu):
            return float(np.sqrt(mu))
        mu_old, x = mu, y
    raise EigenNoConvergence("trace-constant pencil iteration did not converge")


# ---------------------------------------------------------------------------
# block systems with gauge constraints
# ---------------------------------------------------------------------------


@dataclass
class GaugeConstraint:
    """One scalar functional pinned on one block: weights . u_field = target."""

    field: int
    weights: np.ndarray
    target: float = 0.0


@dataclass
class BlockSystem:
    """Square block-sparse system over ``n_fields`` vertex-valued unknowns.

    ``blocks[(i, j)]`` holds the (i, j) coupling matrix (missing = zero),
    ``rhs[i]`` the per-field load, ``constraints`` the gauge functionals,
    each adding one Lagrange multiplier (symmetric bordering).
    """

    n_fields: int
    n: int
    blocks: dict
    rhs: list
    constraints: list


def solve_block(system: BlockSystem) -> tuple[list[np.ndarray], np.ndarray]:
    """Direct sparse solve; returns per-field solutions and multipliers."""
    nf, n = system.n_fields, system.n
    grid = [[None] * nf for _ in range(nf)]
    for (i, j), mat in system.blocks.items():
        grid[i][j] = mat
    for i in range(nf):
        if all(g is None for g in grid[i]):
            raise SingularSystem(f"field {i} has an empty equation row")
    A = sp.bmat(grid, format="csr")
    b = np.concatenate(system.rhs)

    nc = len(system.constraints)
    if nc:
        C = sp.lil_matrix((A.shape[0], nc))
        targets = np.zeros(nc)
        for k, con in enumerate(system.constraints):
            sl = slice(con.field * n, (con.field + 1) * n)
            C[sl, k] = con.weights[:, None]
            targets[k] = con.target
        C = C.tocsr()
        A = sp.bmat([[A, C], [C.T, None]], format="csr")
        b = np.concatenate([b, targets])

    try:
        lu = spla.splu(A.tocsc())
        x = lu.solve(b)
    except RuntimeError as exc:  # factorization breakdown
        raise SingularSystem(f"block factorization failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem("block solve produced non-finite values")
    resid = np.linalg.norm(A @ x - b) / (1.0 + np.linalg.norm(b))
    if resid > 1e-6:
        raise SingularSystem(f"block solve residual {resid:.2e} too large")
    fields = [x[i * n : (i + 1) * n] for i in range(nf)]
    multipliers = x[nf * n :]
    return fields, multipliers
