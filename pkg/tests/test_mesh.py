"""Mesh geometry: area partition, region bookkeeping, refinement, conformity."""

import numpy as np
import pytest

from tecsim.errors import LayoutMisaligned, SchemaError
from tecsim.mesh import (
    ELECTRODES,
    DomainSpec,
    boundary_measure,
    build_rect_mesh,
    refine_uniform,
    triangle_areas,
)

ROBIN_LAYOUT = {
    "bottom": "GammaW",
    "top": "GammaW",
    "left": "GammaA",
    "right": "GammaC",
}


@pytest.mark.parametrize(
    "w,h,nx,ny",
    [(1.0, 1.0, 8, 8), (2.0, 1.0, 5, 3), (0.3, 1.7, 4, 9), (1.0, 1.0, 1, 1)],
)
def test_triangle_areas_partition_domain(w, h, nx, ny):
    mesh = build_rect_mesh(DomainSpec(width=w, height=h), nx, ny)
    assert mesh.num_triangles == 2 * nx * ny
    np.testing.assert_allclose(triangle_areas(mesh).sum(), w * h, rtol=1e-12)


def test_region_lengths_and_measures():
    mesh = build_rect_mesh(DomainSpec(layout=ROBIN_LAYOUT), 8, 8)
    lengths = mesh.region_lengths()
    np.testing.assert_allclose(lengths["GammaW"], 2.0, rtol=1e-12)
    np.testing.assert_allclose(lengths["GammaA"], 1.0, rtol=1e-12)
    np.testing.assert_allclose(lengths["GammaC"], 1.0, rtol=1e-12)
    np.testing.assert_allclose(boundary_measure(mesh, ELECTRODES), 2.0, rtol=1e-12)
    np.testing.assert_allclose(
        boundary_measure(mesh, ["GammaA", "GammaC", "GammaW"]), 4.0, rtol=1e-12
    )


def test_split_side_layout():
    # bottom side carries two tags, break aligned with the 8-point grid
    layout = dict(ROBIN_LAYOUT)
    layout["bottom"] = [(0.0, 0.5, "GammaA"), (0.5, 1.0, "GammaO")]
    mesh = build_rect_mesh(DomainSpec(layout=layout), 8, 8)
    lengths = mesh.region_lengths()
    np.testing.assert_allclose(lengths["GammaA"], 1.0 + 0.5, rtol=1e-12)
    np.testing.assert_allclose(lengths["GammaO"], 0.5, rtol=1e-12)


def test_refinement_preserves_measures():
    mesh = build_rect_mesh(DomainSpec(width=1.5, layout=ROBIN_LAYOUT), 4, 3)
    fine = refine_uniform(mesh)
    assert fine.num_triangles == 4 * mesh.num_triangles
    np.testing.assert_allclose(
        triangle_areas(fine).sum(), triangle_areas(mesh).sum(), rtol=1e-12
    )
    coarse_len = mesh.region_lengths()
    fine_len = fine.region_lengths()
    assert set(coarse_len) == set(fine_len)
    for tag in coarse_len:
        np.testing.assert_allclose(fine_len[tag], coarse_len[tag], rtol=1e-12)


@pytest.mark.parametrize("nx,ny", [(1, 1), (4, 3), (8, 8)])
def test_conformity_edge_sharing(nx, ny):
    mesh = build_rect_mesh(DomainSpec(), nx, ny)
    counts = {}
    for tri in mesh.triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            counts[key] = counts.get(key, 0) + 1
    assert set(counts.values()) <= {1, 2}
    boundary = {tuple(sorted(e)) for e in mesh.edges.tolist()}
    once = {k for k, c in counts.items() if c == 1}
    assert once == boundary  # every boundary edge appears in exactly 1 triangle


def test_layout_validation():
    with pytest.raises(SchemaError):
        DomainSpec(layout={"bottom": "NotARegion"}).side_intervals("bottom")
    gappy = DomainSpec(layout={"bottom": [(0.0, 0.4, "GammaA"), (0.6, 1.0, "GammaO")]})
    with pytest.raises(SchemaError):
        gappy.side_intervals("bottom")
    with pytest.raises(SchemaError):
        DomainSpec(width=-1.0)
    with pytest.raises(SchemaError):
        DomainSpec(layout={"diagonal": "GammaO"})


def test_misaligned_interval_break_rejected():
    layout = {"bottom": [(0.0, 0.3, "GammaA"), (0.3, 1.0, "GammaO")]}
    with pytest.raises(LayoutMisaligned):
        build_rect_mesh(DomainSpec(layout=layout), 8, 8)


def test_edges_in_selects_tagged_edges():
    mesh = build_rect_mesh(DomainSpec(layout=ROBIN_LAYOUT), 4, 4)
    idx = mesh.edges_in(["GammaA"])
    assert len(idx) == 4
    v = mesh.vertices
    for k in idx:
        a, b = mesh.edges[k]
        assert v[a, 0] == 0.0 and v[b, 0] == 0.0  # left side only
    assert len(mesh.edges_in([])) == 0
