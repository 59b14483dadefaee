import cmath

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kleinz.exact import resolve_orientation
from kleinz.graph import EmbeddedGraph, Edge, build_cover, build_torus_cover, lattice, orientation_cover
from kleinz.orient import (OrientationError, bipartite_block, check_curve_condition, check_kasteleyn,
                           check_klein_orientation, clockwise_count, disagreements, faces,
                           find_klein_orientation, find_orientation, flip_vertex, klein_matrix,
                           lift_orientation, torus_matrix)
from kleinz.poly import det

from conftest import DIMER_LATTICES, weighted

unit = st.floats(0, 2 * np.pi).map(lambda t: complex(np.exp(1j * t)))
positive = st.floats(0.05, 4.0)


def torus_graphs():
    for name in DIMER_LATTICES:
        g = lattice(name)
        yield orientation_cover(g)
        yield orientation_cover(build_cover(g, 2, 3))
        yield build_torus_cover(orientation_cover(g), 2, 2)


@pytest.mark.parametrize("gt", list(torus_graphs()), ids=lambda gt: gt.name)
def test_found_orientation_is_kasteleyn(gt):
    assert check_kasteleyn(gt, find_orientation(gt))


def test_square_faces_have_odd_clockwise_count():
    gt = orientation_cover(lattice("square_2x1"))
    K = find_orientation(gt)
    fs = faces(gt)
    assert all(len(f) == 4 for f in fs)
    assert all(clockwise_count(gt, K, f) in (1, 3) for f in fs)


@pytest.mark.parametrize("name", DIMER_LATTICES)
def test_single_flip_breaks_kasteleyn(name):
    gt = orientation_cover(lattice(name))
    K = list(find_orientation(gt))
    for k in range(gt.n_edges):
        ends = {2 * k, 2 * k + 1}
        sides = [f for f in faces(gt) if ends & set(f)]
        # an edge with the same face on both sides keeps every parity
        if len(sides) == 2:
            K2 = K.copy()
            K2[k] = -K2[k]
            assert not check_kasteleyn(gt, K2)


@pytest.mark.parametrize("name", DIMER_LATTICES)
def test_bundled_orientations_pass(name):
    g = lattice(name)
    assert check_klein_orientation(g, g.orientation)
    assert check_klein_orientation(g, find_klein_orientation(g))


def test_curve_condition_on_square_2x1():
    g = lattice("square_2x1")
    K = g.orientation
    C, Cp = g.curves["C"], g.curves["Cp"]
    assert disagreements(g, K, C) + disagreements(g, K, Cp) == 2
    assert check_curve_condition(g, K, C, Cp) == 0
    # edge 1 lies on C only
    K1 = list(K)
    K1[1] = -K1[1]
    assert check_curve_condition(g, K1, C, Cp) == 1
    # edge 3 lies on both curves
    K3 = list(K)
    K3[3] = -K3[3]
    assert check_curve_condition(g, K3, C, Cp) == 0


def test_curve_must_close():
    g = lattice("square_2x1")
    with pytest.raises(OrientationError):
        check_curve_condition(g, g.orientation, [3], [3, 0])


def test_klein_matrix_square_2x1_entry():
    x1, x2, y1, y2 = 1.3, 0.7, 0.9, 1.6
    g = lattice("square_2x1", x1=x1, x2=x2, y1=y1, y2=y2)
    for z in (2.0, 0.5 + 0.3j, cmath.exp(0.4j)):
        for w in (1, -1):
            A = klein_matrix(g, g.orientation, z, w)
            assert A[0, 1] == pytest.approx(1j * y1 + 1j * y2 * w + x1 * z + x2 / z, abs=1e-14)
            assert A[1, 0] == pytest.approx(-(1j * y1 + 1j * y2 * w + x1 / z + x2 * z), abs=1e-14)


def test_klein_matrix_square_1x2_loops_cancel():
    x1, x2 = 1.3, 0.7
    g = lattice("square_1x2", x1=x1, x2=x2, y1=0.9, y2=1.6)
    for z in (2.0, cmath.exp(1.1j)):
        A = klein_matrix(g, g.orientation, z, 1)
        assert A[0, 0] == 0 and A[1, 1] == 0
        assert A[0, 1] == pytest.approx(1j * x1 + x2 / z, abs=1e-14)


def test_klein_matrix_rejects_other_w():
    g = lattice("square_2x1")
    with pytest.raises(ValueError):
        klein_matrix(g, g.orientation, 1.0, 0.5j)


def test_missing_orientation_rejected():
    g = lattice("hexagonal").with_orientation(None)
    with pytest.raises(OrientationError):
        klein_matrix(g)


@pytest.mark.parametrize("name", DIMER_LATTICES)
@given(z=unit)
def test_klein_det_conjugation(name, z):
    g = weighted(name, 5)
    for w in (1, -1):
        a = det(klein_matrix(g, g.orientation, -z, w))
        b = det(klein_matrix(g, g.orientation, z, w))
        assert abs(a - b.conjugate()) <= 1e-10 * max(1.0, abs(b))


def test_hexagonal_block():
    n1, n2, n3 = 1.1, 0.8, 1.7
    g = lattice("hexagonal", nu1=n1, nu2=n2, nu3=n3)
    gt, Kt = lift_orientation(g, g.orientation)
    black = [v for v, c in enumerate(gt.colors) if c == 0]
    white = [v for v, c in enumerate(gt.colors) if c == 1]
    for z, w in [(cmath.exp(0.3j), cmath.exp(1.2j)), (1.7, 0.6 + 0.2j)]:
        B = torus_matrix(gt, Kt, z, w)[np.ix_(black, white)]
        ref = np.array([[n1 + n3 * w, -n2], [n2 * z, n1 + n3 / w]])
        assert np.linalg.det(B) == pytest.approx(np.linalg.det(ref), abs=1e-12)
        # equal entries up to the vertex gauge and the direction of w
        ref_w = np.array([[n1 + n3 / w, -n2], [n2 * z, n1 + n3 * w]])
        assert np.allclose(np.abs(B), np.abs(ref_w), atol=1e-14)


@pytest.mark.parametrize("name", DIMER_LATTICES)
@given(z=unit, w=unit)
def test_torus_matrix_symmetries(name, z, w):
    g = weighted(name, 9)
    gt, Kt = lift_orientation(g, g.orientation)
    A = torus_matrix(gt, Kt, z, w)
    assert np.allclose(A.T, -torus_matrix(gt, Kt, 1 / z, 1 / w), atol=1e-14)
    d = det(A)
    assert abs(d.imag) <= 1e-10 * max(1.0, abs(d))


@given(st.sampled_from(DIMER_LATTICES), st.lists(positive, min_size=6, max_size=6))
def test_torus_det_nonnegative(name, ws):
    g = lattice(name)
    g = g.with_weights(ws[:g.n_edges])
    gt, Kt = lift_orientation(g, g.orientation)
    assert det(torus_matrix(gt, Kt, 1.0, 1.0)).real >= -1e-10


@pytest.mark.parametrize("name", DIMER_LATTICES)
def test_vertex_flip_keeps_determinant(name):
    g = weighted(name, 2)
    K = g.orientation
    for v in range(g.vertex_count):
        K2 = flip_vertex(g, K, v)
        assert check_klein_orientation(g, K2)
        for w in (1, -1):
            a = det(klein_matrix(g, K, 0.3 + 0.9j, w))
            b = det(klein_matrix(g, K2, 0.3 + 0.9j, w))
            assert abs(a - b) <= 1e-12 * abs(a)
    gt, Kt = lift_orientation(g, K)
    Kt2 = flip_vertex(gt, Kt, 0)
    assert check_kasteleyn(gt, Kt2)
    assert det(torus_matrix(gt, Kt, 0.4j, 1.3)) == pytest.approx(det(torus_matrix(gt, Kt2, 0.4j, 1.3)))


@pytest.mark.parametrize("name", ["square_2x1", "hexagonal"])
def test_bipartite_matrices_are_block_off_diagonal(name):
    g = weighted(name, 4)
    order = sorted(range(g.vertex_count), key=lambda v: g.colors[v])
    A = klein_matrix(g, g.orientation, 0.7j, -1)[np.ix_(order, order)]
    h = g.colors.count(0)
    assert not A[:h, :h].any() and not A[h:, h:].any()
    gt, Kt = lift_orientation(g, g.orientation)
    order = sorted(range(gt.vertex_count), key=lambda v: gt.colors[v])
    At = torus_matrix(gt, Kt, 1.3, 0.2j)[np.ix_(order, order)]
    h = gt.colors.count(0)
    assert not At[:h, :h].any() and not At[h:, h:].any()
    assert bipartite_block(gt, torus_matrix(gt, Kt)).shape == (h, h)


def test_find_orientation_needs_rotation_and_connectivity():
    gt = orientation_cover(lattice("square_2x1"))
    bare = EmbeddedGraph("torus", gt.vertex_count, gt.edges)
    with pytest.raises(OrientationError, match="rotation"):
        find_orientation(bare)
    two = EmbeddedGraph("torus", 4, (Edge(0, 1, tb=1), Edge(0, 1), Edge(2, 3, tb=1), Edge(2, 3)),
                        rotation=((0, 2), (1, 3), (4, 6), (5, 7)))
    with pytest.raises(OrientationError):
        find_orientation(two)


@pytest.mark.parametrize("name", DIMER_LATTICES)
@pytest.mark.parametrize("m,n", [(2, 1), (3, 3)])
def test_cover_orientation_resolves(name, m, n):
    c = build_cover(lattice(name), m, n)
    assert check_klein_orientation(c, resolve_orientation(c))
