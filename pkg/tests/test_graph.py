import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kleinz.exact import pmn_value, z_bruteforce
from kleinz.graph import (BUNDLED, Edge, EmbeddedGraph, GraphError, build_cover, build_torus_cover,
                          fisher_graph, graph_from_dict, graph_to_dict, lattice, load_graph,
                          orientation_cover, save_graph, square_lattice, two_coloring, validate)
from kleinz.orient import lift_orientation, torus_matrix
from kleinz.poly import det, extract_P

from conftest import DIMER_LATTICES, weighted

KLEIN_LATTICES = DIMER_LATTICES + ("ising_square",)


def adjacency_spectrum(g):
    A = np.zeros((g.vertex_count, g.vertex_count))
    for e in g.edges:
        A[e.u, e.v] += e.weight
        A[e.v, e.u] += e.weight
    return np.sort(np.linalg.eigvalsh(A))


@pytest.mark.parametrize("name", DIMER_LATTICES)
def test_bundled_lattices_are_valid(name):
    assert validate(lattice(name)).ok


def test_spin_graph_needs_odd_vertex_allowance():
    g = lattice("ising_square")
    assert validate(g).violations == ["odd vertex count"]
    assert validate(g, require_even=False).ok


def test_three_vertices_reported_as_odd():
    g = EmbeddedGraph("klein", 3, (Edge(0, 1), Edge(1, 2)))
    assert "odd vertex count" in validate(g).violations


def test_parity_violation_reported():
    # endpoints in the same half: a + ap must match b
    g = EmbeddedGraph("klein", 2, (Edge(0, 1), Edge(0, 1, a=1, ap=0, b=0)), upper=(0, 0))
    rep = validate(g)
    assert not rep.ok
    assert any("mod-2 parity" in v for v in rep.violations)
    inferred = EmbeddedGraph("klein", 2, (Edge(0, 1), Edge(0, 1, a=1, ap=0, b=0)))
    assert any("mod-2 parity" in v for v in validate(inferred).violations)


def test_parity_violation_on_a_loop():
    g = EmbeddedGraph("klein", 2, (Edge(0, 1), Edge(0, 0, a=1)))
    assert any("mod-2 parity" in v for v in validate(g).violations)


def test_validation_collects_every_violation():
    g = EmbeddedGraph("klein", 3, (Edge(0, 5), Edge(0, 1, weight=-1.0)), colors=(0, 0, 1))
    rep = validate(g)
    assert len(rep.violations) >= 3
    assert not rep


def test_color_conflict_reported():
    g = lattice("square_2x1")
    bad = EmbeddedGraph(g.surface, g.vertex_count, g.edges, colors=(0, 0), upper=g.upper)
    assert any("same color" in v for v in validate(bad).violations)


@pytest.mark.parametrize("name", KLEIN_LATTICES)
def test_json_round_trip(tmp_path, name):
    g = lattice(name, weights=list(np.linspace(0.5, 1.5, lattice(name).n_edges)))
    path = tmp_path / "g.json"
    save_graph(g, path)
    again = load_graph(path)
    assert again == g
    save_graph(again, path)
    assert load_graph(path) == g
    assert graph_from_dict(graph_to_dict(g)) == g


def test_label_weights():
    g = lattice("square_2x1", x1=1.3, x2=0.7)
    assert g.weights() == [1.0, 1.0, 1.3, 0.7]
    with pytest.raises(KeyError):
        lattice("no_such_lattice")


def test_orientation_cover_square_2x1():
    gt = orientation_cover(lattice("square_2x1"))
    assert gt.vertex_count == 4 and gt.n_edges == 8
    assert not gt.is_klein


@pytest.mark.parametrize("name", DIMER_LATTICES)
def test_orientation_cover_doubles(name):
    g = lattice(name)
    gt = orientation_cover(g)
    assert gt.vertex_count == 2 * g.vertex_count
    assert gt.n_edges == 2 * g.n_edges
    # both lifts of a b-crossing switch sheets, but only one crosses the outer side
    N = g.vertex_count
    switching = sum(1 for e in gt.edges if (e.u < N) != (e.v < N))
    assert switching == 2 * sum(abs(e.b) for e in g.edges)
    assert sum(abs(e.tb) for e in gt.edges) == sum(abs(e.b) for e in g.edges)
    assert validate(gt).ok
    if g.colors is not None:
        assert gt.colors == tuple(g.colors) * 2


def test_hexagonal_cover_block_shape():
    gt = orientation_cover(lattice("hexagonal"))
    assert gt.vertex_count == 4
    assert sorted(gt.colors) == [0, 0, 1, 1]


@pytest.mark.parametrize("name", DIMER_LATTICES)
def test_trivial_cover_is_identity(name):
    g = lattice(name)
    c = build_cover(g, 1, 1)
    assert c.vertex_count == g.vertex_count
    assert [(e.u, e.v, e.a, e.ap, e.b) for e in c.edges] == [(e.u, e.v, e.a, e.ap, e.b) for e in g.edges]


def test_square_2x1_double_cover_count():
    x, y = 1.4, 0.6
    c = build_cover(lattice("square_2x1", x1=x, x2=x, y1=y, y2=y), 2, 1)
    assert c.vertex_count == 4
    assert z_bruteforce(c) == pytest.approx(4 * x * x + 4 * x * y + 2 * y * y, rel=1e-12)


@pytest.mark.parametrize("name", DIMER_LATTICES)
@pytest.mark.parametrize("m,n", [(1, 3), (2, 1), (2, 3), (3, 1), (4, 3), (3, 5)])
def test_cover_counts_and_parity(name, m, n):
    g = lattice(name)
    c = build_cover(g, m, n)
    assert c.vertex_count == m * n * g.vertex_count
    assert c.n_edges == m * n * g.n_edges
    assert validate(c).ok
    assert sum(1 for e in c.edges if e.b) == m * sum(1 for e in g.edges if e.b)
    assert sum(1 for e in c.edges if e.a) == n * sum(1 for e in g.edges if e.a)
    assert all(e.weight == g.edges[k % g.n_edges].weight for k, e in enumerate(c.edges))


def test_even_n_cover_rejected():
    with pytest.raises(GraphError, match="torus tooling"):
        build_cover(lattice("square_2x1"), 2, 2)


@pytest.mark.parametrize("name", DIMER_LATTICES)
@pytest.mark.parametrize("m,n", [(1, 3), (2, 1), (3, 3), (2, 5)])
def test_cover_commutes_with_orientation_cover(name, m, n):
    g = weighted(name, 11)
    left = orientation_cover(build_cover(g, m, n))
    right = build_torus_cover(orientation_cover(g), m, n)
    assert left.vertex_count == right.vertex_count and left.n_edges == right.n_edges
    assert np.allclose(adjacency_spectrum(left), adjacency_spectrum(right), atol=1e-10)


def test_trivial_torus_cover_is_identity():
    gt = orientation_cover(lattice("triangular"))
    assert build_torus_cover(gt, 1, 1).edges == gt.edges


@pytest.mark.parametrize("name", DIMER_LATTICES)
@pytest.mark.parametrize("m,n", [(1, 2), (2, 1), (2, 3), (3, 3)])
def test_torus_cover_determinant_is_product_of_P(name, m, n):
    g = weighted(name, 3)
    gt, Kt = lift_orientation(g, g.orientation)
    cover = build_torus_cover(gt, m, n)
    assert cover.vertex_count == m * n * gt.vertex_count
    K = Kt * (m * n)
    d = det(torus_matrix(cover, K, 1.0, 1.0))
    expected = pmn_value(extract_P(g), m, n)
    assert math.log(abs(d)) == pytest.approx(expected.log_modulus, abs=1e-9)
    assert d.real >= 0


def test_fisher_weights():
    g = lattice("ising_square")
    assert [e.weight for e in fisher_graph(g, beta=0.0).edges[:2]] == [0.0, 0.0]
    assert all(abs(e.weight - 1) < 1e-12 for e in fisher_graph(g, beta=40.0).edges[:2])
    bc = 0.5 * math.log(1 + math.sqrt(2))
    F = fisher_graph(g, beta=bc)
    assert F.edges[0].weight == pytest.approx(math.sqrt(2) - 1, rel=1e-14)
    assert all(e.weight == 1.0 for e in F.edges[2:])


@pytest.mark.parametrize("name", KLEIN_LATTICES)
def test_fisher_graph_shape_and_parity(name):
    g = lattice(name)
    F = fisher_graph(g, beta=0.7)
    assert F.vertex_count == 4 * g.n_edges
    assert F.n_edges == g.n_edges + 6 * g.n_edges
    assert validate(F).ok
    for k, e in enumerate(g.edges):
        assert (F.edges[k].a, F.edges[k].ap, F.edges[k].b) == (e.a, e.ap, e.b)
    assert all((e.a, e.ap, e.b) == (0, 0, 0) for e in F.edges[g.n_edges:])


def test_fisher_needs_rotation():
    g = lattice("ising_square")
    bare = EmbeddedGraph(g.surface, g.vertex_count, g.edges, upper=g.upper)
    with pytest.raises(GraphError, match="rotation"):
        fisher_graph(bare)


def gadgets(g):
    """Each gadget of fisher_graph(g) as (vertex list, edge list, external vertices)."""
    F = fisher_graph(g)
    E = g.n_edges
    inner = F.edges[E:]
    parent = list(range(F.vertex_count))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in inner:
        parent[find(e.u)] = find(e.v)
    ends = {e.u for e in F.edges[:E]} | {e.v for e in F.edges[:E]}
    groups = {}
    for v in range(F.vertex_count):
        groups.setdefault(find(v), []).append(v)
    for vs in groups.values():
        yield vs, [e for e in inner if e.u in vs], [v for v in vs if v in ends]


def matchings_avoiding(vs, edges, removed):
    keep = [v for v in vs if v not in removed]
    idx = {v: k for k, v in enumerate(keep)}
    sub = [Edge(idx[e.u], idx[e.v]) for e in edges if e.u in idx and e.v in idx]
    return z_bruteforce(EmbeddedGraph("torus", len(keep), tuple(sub)))


@pytest.mark.parametrize("name,degree", [("hexagonal", 3), ("ising_square", 4), ("triangular", 6)])
def test_gadget_matchings_encode_even_subsets(name, degree):
    for vs, edges, ext in gadgets(lattice(name)):
        assert len(ext) == degree
        for mask in range(1 << degree):
            removed = {ext[k] for k in range(degree) if mask >> k & 1}
            count = matchings_avoiding(vs, edges, removed)
            # two matchings per even subset: the factor 2 per spin vertex
            assert count == (2.0 if len(removed) % 2 == 0 else 0.0)


def test_square_lattice_builder():
    for M, N in [(2, 1), (2, 3), (3, 2), (4, 4)]:
        g = square_lattice(M, N, 1.2, 0.9)
        assert validate(g).ok
        assert g.vertex_count == M * N and g.n_edges == 2 * M * N
        if M % 2 == 0 and N % 2:
            assert g.colors is not None
    assert square_lattice(3, 2).colors is None
    with pytest.raises(GraphError):
        square_lattice(0, 2)


def test_two_coloring():
    assert two_coloring(lattice("hexagonal")) is not None
    assert two_coloring(lattice("triangular")) is None
    assert two_coloring(orientation_cover(lattice("hexagonal"))) is not None


@given(st.lists(st.floats(0.05, 5.0), min_size=4, max_size=4), st.integers(1, 4), st.sampled_from([1, 3]))
def test_cover_preserves_weights_property(ws, m, n):
    g = lattice("square_2x1", weights=ws)
    c = build_cover(g, m, n)
    assert sorted(c.weights()) == sorted(ws * (m * n))
    assert validate(c).ok
