"""Weighted graphs drawn in a rectangular fundamental domain of the Klein bottle
or the torus, together with their covers and Fisher decorations.

Conventions
-----------
Klein bottle domain: the unit square with (x, 0) ~ (x, 1) and (1, y) ~ (0, 1 - y).
An edge u -> v records

* ``a``  - 1 if it crosses the horizontal side (top/bottom), else 0
* ``ap`` - 1 if it crosses the horizontal midline, else 0
* ``b``  - +1 / -1 if it crosses the vertical side left-to-right / right-to-left

Every vertex sits either in the lower or the upper half of the domain.  The
``upper`` flags are optional in the JSON form; they are inferred from the
crossing data when missing (vertex 0 in the lower half), since crossing any of
the three curves switches halves.

For an edge crossing both horizontal curves the winding cannot be read off the
halves, so such edges are stored with u -> v running upward.

Torus domain: edges carry signed intersection numbers ``ta`` (bottom-to-top
across the horizontal side) and ``tb`` (left-to-right across the vertical side).

Rotation systems list, for each vertex, its edge-ends in counterclockwise
order as drawn.  End ``2e`` is the u-end of edge ``e``, end ``2e + 1`` its v-end.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

KLEIN = "klein"
TORUS = "torus"


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    weight: float = 1.0
    a: int = 0
    ap: int = 0
    b: int = 0
    ta: int = 0
    tb: int = 0

    @property
    def is_loop(self):
        return self.u == self.v


@dataclass(frozen=True)
class EmbeddedGraph:
    surface: str
    vertex_count: int
    edges: tuple
    name: str = ""
    colors: Optional[tuple] = None
    rotation: Optional[tuple] = None
    orientation: Optional[tuple] = None
    curves: Optional[dict] = None
    upper: Optional[tuple] = None
    labels: Optional[tuple] = None

    @property
    def is_klein(self):
        return self.surface == KLEIN

    @property
    def n_edges(self):
        return len(self.edges)

    def weights(self):
        return [e.weight for e in self.edges]

    def with_weights(self, weights):
        """Return a copy with new edge weights (sequence or {label: value})."""
        if isinstance(weights, dict):
            if self.labels is None:
                raise ValueError("graph has no weight labels")
            new = [weights.get(lab, e.weight) for e, lab in zip(self.edges, self.labels)]
        else:
            new = list(weights)
            if len(new) != self.n_edges:
                raise ValueError("weight count does not match edge count")
        edges = tuple(replace(e, weight=float(w)) for e, w in zip(self.edges, new))
        return replace(self, edges=edges)

    def with_orientation(self, orientation):
        return replace(self, orientation=None if orientation is None else tuple(int(s) for s in orientation))

    def halves(self):
        """Upper-half flags per vertex (given or inferred)."""
        if self.upper is not None:
            return tuple(self.upper)
        return infer_halves(self)

    def degree(self, v):
        return sum((e.u == v) + (e.v == v) for e in self.edges)


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok


class GraphError(ValueError):
    pass


# ----------------------------------------------------------------------------
# JSON

def graph_from_dict(d):
    surface = d.get("surface", KLEIN)
    edges = []
    for ed in d["edges"]:
        edges.append(Edge(
            u=int(ed["u"]), v=int(ed["v"]), weight=float(ed.get("w", 1.0)),
            a=int(ed.get("a", 0)), ap=int(ed.get("ap", 0)), b=int(ed.get("b", 0)),
            ta=int(ed.get("ta", 0)), tb=int(ed.get("tb", 0)),
        ))
    colors = d.get("colors")
    rotation = d.get("rotation")
    orientation = d.get("orientation")
    return EmbeddedGraph(
        surface=surface,
        vertex_count=int(d["vertices"]),
        edges=tuple(edges),
        name=d.get("name", ""),
        colors=None if colors is None else tuple(int(c) for c in colors),
        rotation=None if rotation is None else tuple(tuple(int(h) for h in r) for r in rotation),
        orientation=None if orientation is None else tuple(int(s) for s in orientation),
        curves=d.get("curves"),
        upper=None if d.get("upper") is None else tuple(int(x) for x in d["upper"]),
        labels=None if d.get("labels") is None else tuple(d["labels"]),
    )


def graph_to_dict(g):
    edges = []
    for e in g.edges:
        ed = {"u": e.u, "v": e.v, "w": e.weight}
        if g.is_klein:
            ed.update(a=e.a, ap=e.ap, b=e.b)
        else:
            ed.update(ta=e.ta, tb=e.tb)
        edges.append(ed)
    d = {"name": g.name, "surface": g.surface, "vertices": g.vertex_count, "edges": edges}
    if g.colors is not None:
        d["colors"] = list(g.colors)
    if g.rotation is not None:
        d["rotation"] = [list(r) for r in g.rotation]
    if g.orientation is not None:
        d["orientation"] = list(g.orientation)
    if g.curves is not None:
        d["curves"] = g.curves
    if g.upper is not None:
        d["upper"] = list(g.upper)
    if g.labels is not None:
        d["labels"] = list(g.labels)
    return d


def load_graph(path):
    with open(path) as fh:
        return graph_from_dict(json.load(fh))


def save_graph(g, path):
    Path(path).write_text(json.dumps(graph_to_dict(g), indent=1))


BUNDLED = ("square_2x1", "square_1x2", "hexagonal", "triangular", "ising_square")


def lattice(name, weights=None, **kw):
    """Load a bundled lattice; weights may be a per-edge sequence or a label dict."""
    if name not in BUNDLED:
        raise KeyError(f"unknown lattice {name!r}; choose from {BUNDLED}")
    text = resources.files("kleinz.lattices").joinpath(name + ".json").read_text()
    g = graph_from_dict(json.loads(text))
    if weights is not None and not isinstance(weights, dict):
        g = g.with_weights(list(weights))
        weights = None
    w = dict(weights or {})
    w.update(kw)
    if w:
        g = g.with_weights(w)
    return g


def square_lattice(M, N, x=1.0, y=1.0):
    """M x N square lattice in the Klein bottle (M rows, N columns).

    Vertex (r, c) has index r * N + c.  Horizontal edges wrap from column N-1
    of row r to column 0 of row M-1-r; vertical edges wrap from the top row to
    the bottom one.  For odd M the midline runs through row (M-1)//2, which is
    split between the halves at column (N-1)//2.
    """
    if M < 1 or N < 1:
        raise GraphError("lattice sizes must be positive")
    mid, c0 = (M - 1) // 2, (N - 1) // 2

    def upper(r, c):
        if M % 2 == 0:
            return int(r >= M // 2)
        return int(r > mid or (r == mid and c > c0))

    edges, east, west, north, south = [], {}, {}, {}, {}
    for r in range(M):
        for c in range(N):
            if c + 1 < N:
                t, b = (r, c + 1), 0
            else:
                t, b = (M - 1 - r, 0), 1
            ap = (upper(r, c) ^ upper(*t) ^ b) & 1
            east[(r, c)] = 2 * len(edges)
            west[t] = 2 * len(edges) + 1
            edges.append(Edge(r * N + c, t[0] * N + t[1], float(x), a=0, ap=ap, b=b))
    for r in range(M):
        for c in range(N):
            t, a = ((r + 1, c), 0) if r + 1 < M else ((0, c), 1)
            ap = (upper(r, c) ^ upper(*t) ^ a) & 1
            north[(r, c)] = 2 * len(edges)
            south[t] = 2 * len(edges) + 1
            edges.append(Edge(r * N + c, t[0] * N + t[1], float(y), a=a, ap=ap, b=0))
    cells = [(r, c) for r in range(M) for c in range(N)]
    rot = tuple((east[v], north[v], west[v], south[v]) for v in cells)
    labels = tuple(["x"] * (M * N) + ["y"] * (M * N))
    # the wraps preserve the checkerboard exactly when M is even and N odd
    colors = tuple((r + c) % 2 for r, c in cells) if M % 2 == 0 and N % 2 else None
    return EmbeddedGraph(KLEIN, M * N, tuple(edges), name=f"square_{M}x{N}", colors=colors,
                         rotation=rot, upper=tuple(upper(*v) for v in cells), labels=labels)


# ----------------------------------------------------------------------------
# halves and validation

def _half_step(e):
    # crossing a, a' or b each switches between the lower and upper half
    return (e.a + e.ap + abs(e.b)) % 2


def infer_halves(g):
    """Assign lower/upper halves from the crossing data (vertex 0 lower)."""
    n = g.vertex_count
    adj = [[] for _ in range(n)]
    for e in g.edges:
        s = _half_step(e)
        adj[e.u].append((e.v, s))
        adj[e.v].append((e.u, s))
    half = [None] * n
    for root in range(n):
        if half[root] is not None:
            continue
        half[root] = 0
        queue = deque([root])
        while queue:
            x = queue.popleft()
            for y, s in adj[x]:
                want = half[x] ^ s
                if half[y] is None:
                    half[y] = want
                    queue.append(y)
                elif half[y] != want:
                    raise GraphError("crossing data violates the mod-2 parity relation on a cycle")
    return tuple(half)


def validate(g, require_even=True):
    """Collect every violated structural assumption."""
    rep = ValidationReport()
    n = g.vertex_count
    if require_even and n % 2:
        rep.violations.append("odd vertex count")
    for k, e in enumerate(g.edges):
        if not (0 <= e.u < n and 0 <= e.v < n):
            rep.violations.append(f"edge {k}: endpoint out of range")
            continue
        if e.weight < 0:
            rep.violations.append(f"edge {k}: negative weight")
        if g.is_klein:
            if e.a not in (0, 1) or e.ap not in (0, 1) or e.b not in (-1, 0, 1):
                rep.violations.append(f"edge {k}: crossing numbers out of range")
            elif e.is_loop and _half_step(e):
                rep.violations.append(f"edge {k}: mod-2 parity violation (a + ap != b mod 2 on a loop)")
    if g.is_klein and not any("out of range" in s for s in rep.violations):
        if g.upper is not None:
            if len(g.upper) != n:
                rep.violations.append("upper flags length mismatch")
            else:
                for k, e in enumerate(g.edges):
                    if (g.upper[e.u] ^ g.upper[e.v]) != _half_step(e):
                        rep.violations.append(f"edge {k}: mod-2 parity violation against vertex halves")
        else:
            try:
                infer_halves(g)
            except GraphError:
                rep.violations.append("mod-2 parity violation: a + ap and b disagree around a cycle")
    if g.colors is not None:
        if len(g.colors) != n:
            rep.violations.append("colors length mismatch")
        else:
            for k, e in enumerate(g.edges):
                if 0 <= e.u < n and 0 <= e.v < n and g.colors[e.u] == g.colors[e.v]:
                    rep.violations.append(f"edge {k}: joins two vertices of the same color")
    if g.rotation is not None:
        ends = sorted(h for r in g.rotation for h in r)
        if ends != list(range(2 * g.n_edges)):
            rep.violations.append("rotation system does not list every edge-end once")
        else:
            for v, r in enumerate(g.rotation):
                for h in r:
                    e = g.edges[h // 2]
                    if (e.v if h % 2 else e.u) != v:
                        rep.violations.append(f"rotation of vertex {v} lists a foreign edge-end {h}")
    if g.orientation is not None and len(g.orientation) != g.n_edges:
        rep.violations.append("orientation length mismatch")
    return rep


def require_valid(g, require_even=True):
    rep = validate(g, require_even)
    if not rep.ok:
        raise GraphError("; ".join(rep.violations))
    return g


def two_coloring(g):
    """A proper 2-coloring as a tuple of 0/1, or None when an odd cycle exists."""
    adj = [[] for _ in range(g.vertex_count)]
    for e in g.edges:
        adj[e.u].append(e.v)
        adj[e.v].append(e.u)
    color = [-1] * g.vertex_count
    for root in range(g.vertex_count):
        if color[root] >= 0:
            continue
        color[root] = 0
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for u in adj[v]:
                if color[u] < 0:
                    color[u] = 1 - color[v]
                    queue.append(u)
                elif color[u] == color[v]:
                    return None
    return tuple(color)


def a_direction(e, half_u):
    """Vertical direction (+1 up, -1 down) in which the edge crosses the
    horizontal side, read in the picture where the vertical side is crossed
    first.  Zero if the edge does not cross it."""
    if not e.a:
        return 0
    if e.ap:
        return 1 if e.b == 0 else -1
    return 1 if (half_u ^ abs(e.b)) else -1


# ----------------------------------------------------------------------------
# rotation helpers

def _lift_rotation(g, n_copies, vertex_of, edge_of, reflected):
    """Lift a rotation system.

    vertex_of(v, c) -> lifted vertex, edge_of(e, c) -> (lift index, arrival copy),
    reflected(c) -> whether copy c is a mirror image.
    """
    if g.rotation is None:
        return None
    E = g.n_edges
    arrive = {}
    for e in range(E):
        for c in range(n_copies):
            k, c2 = edge_of(e, c)
            arrive[(e, c2)] = k
    total = g.vertex_count * n_copies
    rot = [None] * total
    for c in range(n_copies):
        for v in range(g.vertex_count):
            r = []
            for h in g.rotation[v]:
                e = h // 2
                if h % 2 == 0:
                    r.append(2 * edge_of(e, c)[0])
                else:
                    r.append(2 * arrive[(e, c)] + 1)
            if reflected(c):
                r = r[::-1]
            rot[vertex_of(v, c)] = tuple(r)
    return tuple(rot)


# ----------------------------------------------------------------------------
# orientation double cover

def orientation_cover(g):
    """Torus double cover: two copies of the domain glued along a vertical side.

    Copy 0 is the domain itself, copy 1 its mirror image placed to the right.
    Vertex v lifts to v (copy 0) and v + N (copy 1); edge e lifts to e (starting
    in copy 0) and e + E (starting in copy 1).
    """
    require_valid(g)
    if not g.is_klein:
        raise GraphError("orientation cover needs a Klein bottle graph")
    N, E = g.vertex_count, g.n_edges
    half = g.halves()
    edges = []
    for c in (0, 1):
        for e in g.edges:
            c2 = c ^ abs(e.b)
            d = a_direction(e, half[e.u])
            ta0 = d * (-1) ** abs(e.b)
            ta = ta0 if c == 0 else -ta0
            if e.b == 1:
                tb = 1 if c == 1 else 0
            elif e.b == -1:
                tb = -1 if c == 0 else 0
            else:
                tb = 0
            edges.append(Edge(e.u + c * N, e.v + c2 * N, e.weight, ta=ta, tb=tb))
    rot = _lift_rotation(
        g, 2,
        vertex_of=lambda v, c: v + c * N,
        edge_of=lambda e, c: (e + c * E, c ^ abs(g.edges[e].b)),
        reflected=lambda c: c == 1,
    )
    colors = None if g.colors is None else tuple(g.colors) * 2
    upper = tuple(half) + tuple(1 - h for h in half)
    labels = None if g.labels is None else tuple(g.labels) * 2
    return EmbeddedGraph(TORUS, 2 * N, tuple(edges), name=(g.name + "~") if g.name else "",
                         colors=colors, rotation=rot, upper=upper, labels=labels)


# ----------------------------------------------------------------------------
# m x n covers

@dataclass(frozen=True)
class CoverIndex:
    row: int
    col: int

    @property
    def reflected(self):
        return self.col % 2 == 1


def cover_vertex(v, i, j, n, N):
    return (i * n + j) * N + v


def _klein_lift(g, half, e, i, j, m, n):
    """Lift of edge e starting in cell (i, j) of the m x n Klein cover.

    Returns (row, col, a, ap, b) of the arrival cell and new crossing numbers.
    """
    # rows are updated as if the horizontal crossings came before the
    # vertical one; the other order gives the same arrival cell
    r = j % 2
    cell_upper = half[e.u] ^ r
    a_mn = ap_mn = b_mn = 0
    row = i
    mid = (m - 1) // 2 if m % 2 else None
    if e.a:
        if e.ap:
            dirn = 1 if r == 0 else -1
        else:
            dirn = 1 if cell_upper else -1
        new = row + dirn
        if m % 2 == 0 and ((row == m // 2 - 1 and dirn == 1) or (row == m // 2 and dirn == -1)):
            ap_mn = 1
        if e.ap and m % 2:
            # the midline crossing happens before the row change iff the
            # edge starts on the side of its row facing the move
            ap_row = row if (dirn == 1) != bool(cell_upper) else new % m
            ap_mn = int(ap_row == mid)
        if new < 0 or new >= m:
            a_mn = 1
        row = new % m
    elif e.ap and m % 2 and i == mid:
        ap_mn = 1
    col = j + e.b
    if col < 0 or col >= n:
        col %= n
        row = m - 1 - row
        b_mn = e.b
    return row, col, a_mn, ap_mn, b_mn


def build_cover(g, m, n, require_even=True):
    """Lift of a Klein bottle graph to the m x n cover (n odd).

    Copies sit on an m x n grid; odd columns are mirror images, and wrapping
    around horizontally sends row i to row m - 1 - i.  Spin graphs for the
    Ising model may have an odd vertex count; pass require_even=False.
    """
    require_valid(g, require_even=require_even)
    if not g.is_klein:
        raise GraphError("build_cover expects a Klein bottle graph; use build_torus_cover")
    if m < 1 or n < 1:
        raise GraphError("cover sizes must be positive")
    if n % 2 == 0:
        raise GraphError("n must be odd for Klein bottle covers (use torus tooling for even n)")
    N, E = g.vertex_count, g.n_edges
    half = g.halves()
    edges = []
    targets = {}
    for i in range(m):
        for j in range(n):
            for k, e in enumerate(g.edges):
                row, col, a_mn, ap_mn, b_mn = _klein_lift(g, half, e, i, j, m, n)
                targets[(k, i, j)] = (row, col)
                edges.append(Edge(cover_vertex(e.u, i, j, n, N), cover_vertex(e.v, row, col, n, N),
                                  e.weight, a=a_mn, ap=ap_mn, b=b_mn))
    upper = []
    for i in range(m):
        for j in range(n):
            for v in range(N):
                local = half[v] ^ (j % 2)
                if m % 2 == 0:
                    upper.append(int(i >= m // 2))
                else:
                    mid = (m - 1) // 2
                    upper.append(int(i > mid or (i == mid and local)))
    cell = lambda c: divmod(c, n)
    rot = _lift_rotation(
        g, m * n,
        vertex_of=lambda v, c: c * N + v,
        edge_of=lambda e, c: (c * E + e, targets[(e,) + cell(c)][0] * n + targets[(e,) + cell(c)][1]),
        reflected=lambda c: (c % n) % 2 == 1,
    )
    colors = None if g.colors is None else tuple(g.colors) * (m * n)
    labels = None if g.labels is None else tuple(g.labels) * (m * n)
    name = f"{g.name}[{m}x{n}]" if g.name else ""
    return EmbeddedGraph(KLEIN, m * n * N, tuple(edges), name=name, colors=colors,
                         rotation=rot, upper=tuple(upper), labels=labels)


def build_torus_cover(g, m, n):
    """Standard m x n translation cover of a torus graph (m rows, n columns)."""
    require_valid(g)
    if g.is_klein:
        raise GraphError("build_torus_cover expects a torus graph")
    N, E = g.vertex_count, g.n_edges
    edges = []
    targets = {}
    for i in range(m):
        for j in range(n):
            for k, e in enumerate(g.edges):
                ri, rj = i + e.ta, j + e.tb
                targets[(k, i, j)] = (ri % m) * n + (rj % n)
                edges.append(Edge(cover_vertex(e.u, i, j, n, N), cover_vertex(e.v, ri % m, rj % n, n, N),
                                  e.weight, ta=ri // m, tb=rj // n))
    rot = _lift_rotation(
        g, m * n,
        vertex_of=lambda v, c: c * N + v,
        edge_of=lambda e, c: (c * E + e, targets[(e,) + divmod(c, n)]),
        reflected=lambda c: False,
    )
    upper = None
    if g.upper is not None:
        upper = tuple(g.upper) * (m * n)
    colors = None if g.colors is None else tuple(g.colors) * (m * n)
    labels = None if g.labels is None else tuple(g.labels) * (m * n)
    return EmbeddedGraph(TORUS, m * n * N, tuple(edges), name=f"{g.name}[{m}x{n}]" if g.name else "",
                         colors=colors, rotation=rot, upper=upper, labels=labels)


# ----------------------------------------------------------------------------
# Fisher graph

def fisher_graph(g, couplings=None, beta=1.0):
    """Replace every vertex of degree d by a ring of d triangles.

    Each edge-end gets a vertex p joined to two consecutive ring vertices q;
    consecutive ring vertices are joined as well.  Ring and spoke edges have
    weight 1, the original edges carry tanh(beta * J).  Edge k of the result
    is the original edge k; gadget edges follow.
    """
    require_valid(g, require_even=False)
    if g.rotation is None:
        raise GraphError("fisher_graph needs a rotation system")
    E = g.n_edges
    J = [1.0] * E if couplings is None else [float(c) for c in couplings]
    if len(J) != E:
        raise GraphError("coupling count does not match edge count")
    half = g.halves() if g.is_klein else (g.upper or (0,) * g.vertex_count)

    p_of = {}
    q_of = {}
    nv = 0
    vhalf = []
    for v in range(g.vertex_count):
        ends = g.rotation[v]
        for h in ends:
            p_of[h] = nv
            nv += 1
            vhalf.append(half[v])
        for k in range(len(ends)):
            q_of[(v, k)] = nv
            nv += 1
            vhalf.append(half[v])

    edges = []
    for k, e in enumerate(g.edges):
        x = math.tanh(beta * J[k])
        edges.append(replace(e, u=p_of[2 * k], v=p_of[2 * k + 1], weight=x))
    rot = [None] * nv
    for v in range(g.vertex_count):
        ends = g.rotation[v]
        d = len(ends)
        base = len(edges)
        # per end k: A_k = p_k -> q_k, B_k = p_k -> q_{k+1}, C_k = q_k -> q_{k+1}
        for k, h in enumerate(ends):
            p, q0, q1 = p_of[h], q_of[(v, k)], q_of[(v, (k + 1) % d)]
            edges.append(Edge(p, q0, 1.0))
            edges.append(Edge(p, q1, 1.0))
            edges.append(Edge(q0, q1, 1.0))
        A = lambda k: base + 3 * (k % d)
        B = lambda k: base + 3 * (k % d) + 1
        C = lambda k: base + 3 * (k % d) + 2
        for k, h in enumerate(ends):
            rot[p_of[h]] = (h, 2 * B(k), 2 * A(k))
            rot[q_of[(v, k)]] = (2 * B(k - 1) + 1, 2 * A(k) + 1, 2 * C(k), 2 * C(k - 1) + 1)
    upper = tuple(vhalf) if g.is_klein else None
    return EmbeddedGraph(g.surface, nv, tuple(edges), name=(g.name + "^F") if g.name else "",
                         rotation=tuple(rot), upper=upper)


def fisher_original_edges(g):
    """Indices of the original (non-gadget) edges in fisher_graph(g)."""
    return list(range(g.n_edges))
