from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kagome_vqe.errors import InvalidArgument
from kagome_vqe.lattice import (
    Edge,
    LatticeFragment,
    Site,
    build_star,
    build_triangle,
    bz_vertices,
    in_brillouin_zone,
    load_fragment,
    momentum_grid,
    star_rotation,
)


def test_triangle_counts_and_edges():
    tri = build_triangle()
    assert tri.num_sites == 3
    assert len(tri.edges) == 3
    assert set(tri.pairs) == {(0, 1), (1, 2), (0, 2)}


def test_triangle_all_pairwise_distances_unit():
    pos = build_triangle().positions
    for i, j in itertools.combinations(range(3), 2):
        assert np.linalg.norm(pos[i] - pos[j]) == pytest.approx(1.0, abs=1e-12)


def test_star_counts():
    star = build_star()
    assert star.num_sites == 12
    assert len(star.edges) == 18


def test_star_degrees_and_triangles():
    star = build_star()
    # tips have degree 2, shared hexagon corners degree 4
    assert sorted(star.degrees()) == [2] * 6 + [4] * 6
    tris = star.triangles()
    assert len(tris) == 6
    corners = [k for k, d in enumerate(star.degrees()) if d == 4]
    for k in corners:
        assert sum(k in t for t in tris) == 2


def test_star_edges_have_unit_length():
    star = build_star()
    pos = star.positions
    for i, j in star.pairs:
        assert np.linalg.norm(pos[i] - pos[j]) == pytest.approx(1.0, abs=1e-12)


def test_star_adjacent_labels_are_bonds():
    pairs = set(build_star().pairs)
    for k in range(12):
        assert tuple(sorted((k, (k + 1) % 12))) in pairs


def test_star_edge_set_invariant_under_rotation():
    star = build_star()
    perm = star_rotation()
    edges = {frozenset(p) for p in star.pairs}
    rotated = {frozenset((perm[i], perm[j])) for i, j in star.pairs}
    assert rotated == edges


def test_star_rotation_is_geometric():
    star = build_star()
    pos = star.positions
    c, s = np.cos(np.pi / 3), np.sin(np.pi / 3)
    rot = np.array([[c, -s], [s, c]])
    perm = star_rotation()
    for k in range(12):
        assert np.allclose(rot @ pos[k], pos[perm[k]], atol=1e-12)


def test_builders_are_deterministic():
    assert build_star() == build_star()
    assert build_triangle() == build_triangle()


def test_fragment_text_round_trip(tmp_path):
    star = build_star()
    path = tmp_path / "star.txt"
    path.write_text(star.to_text())
    loaded = load_fragment(path)
    assert loaded.name == "star"
    assert loaded.pairs == star.pairs
    assert np.allclose(loaded.positions, star.positions, atol=0)


def test_fragment_rejects_bad_edges():
    sites = (Site(0, (0.0, 0.0)), Site(1, (2.0, 0.0)))
    with pytest.raises(InvalidArgument):
        LatticeFragment("bad", sites, (Edge(0, 1),))
    with pytest.raises(InvalidArgument):
        Edge(1, 1)
    with pytest.raises(InvalidArgument):
        LatticeFragment("bad", (Site(0, (0.0, 0.0)), Site(1, (1.0, 0.0))), (Edge(0, 1, -1.0),))


def test_fragment_rejects_disconnected_graph():
    sites = (Site(0, (0.0, 0.0)), Site(1, (1.0, 0.0)), Site(2, (5.0, 0.0)))
    with pytest.raises(InvalidArgument):
        LatticeFragment("bad", sites, (Edge(0, 1),))


def test_load_fragment_errors(tmp_path):
    with pytest.raises(InvalidArgument):
        load_fragment(tmp_path / "missing.txt")
    bad = tmp_path / "bad.txt"
    bad.write_text("[sites]\n0,zero,0\n")
    with pytest.raises(InvalidArgument):
        load_fragment(bad)


def test_momentum_grid_size_and_origin():
    grid = momentum_grid(11)
    assert len(grid) == 121
    centre = np.flatnonzero(np.all(np.abs(grid.points) < 1e-12, axis=1))
    assert centre.size == 1 and grid.inside_bz[centre[0]]


def test_momentum_grid_rejects_small_resolution():
    with pytest.raises(InvalidArgument):
        momentum_grid(1)
    with pytest.raises(InvalidArgument):
        momentum_grid(5, extent=0.0)


def test_bz_vertices_are_inside_closed_zone():
    for v in bz_vertices():
        assert in_brillouin_zone(v)
        assert not in_brillouin_zone(1.01 * v)


def test_default_grid_covers_zone():
    grid = momentum_grid(41)
    half = np.abs(grid.points).max()
    assert half >= np.abs(bz_vertices()).max()


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_brillouin_zone_has_sixfold_symmetry(x, y):
    q = np.array([x, y])
    c, s = np.cos(np.pi / 3), np.sin(np.pi / 3)
    rq = np.array([[c, -s], [s, c]]) @ q
    margin = 1e-6
    # skip points numerically on the boundary
    if abs(np.linalg.norm(q) - np.linalg.norm(bz_vertices()[0])) < margin:
        return
    assert in_brillouin_zone(q) == in_brillouin_zone(rq) or _near_boundary(q)


def _near_boundary(q):
    return in_brillouin_zone(q * (1 + 1e-6)) != in_brillouin_zone(q * (1 - 1e-6))
