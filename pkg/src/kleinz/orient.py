"""Kasteleyn orientations and twisted Kasteleyn matrices.

An orientation is a tuple of signs, +1 when edge k points u -> v.

For a Klein bottle graph the orientation K is judged on the orientation
cover: lift K to both sheets, reverse every lifted edge whose two endpoints
lie in the upper half of the torus domain, and ask that every face has an odd
number of clockwise boundary edges.
"""

from __future__ import annotations

import numpy as np

from .graph import EmbeddedGraph, GraphError, orientation_cover, a_direction


class OrientationError(ValueError):
    pass


# ----------------------------------------------------------------------------
# faces

def faces(gt):
    """Faces of an orientable embedding as lists of edge-ends.

    Each face is a list of ends h; walking the face means leaving through h
    and arriving through h ^ 1.  The next end is the counterclockwise
    successor of the arrival end, so faces are traversed clockwise.
    """
    if gt.rotation is None:
        raise OrientationError("a rotation system is required")
    succ = {}
    for r in gt.rotation:
        for k, h in enumerate(r):
            succ[h] = r[(k + 1) % len(r)]
    seen = set()
    out = []
    for start in range(2 * gt.n_edges):
        if start in seen:
            continue
        face = []
        h = start
        while h not in seen:
            seen.add(h)
            face.append(h)
            h = succ[h ^ 1]
        out.append(face)
    return out


def euler_characteristic(gt):
    return gt.vertex_count - gt.n_edges + len(faces(gt))


def face_homology(gt, face):
    """Total (ta, tb) crossing along a face walk; zero for a genuine disc."""
    ta = tb = 0
    for h in face:
        e = gt.edges[h // 2]
        s = 1 if h % 2 == 0 else -1
        ta += s * e.ta
        tb += s * e.tb
    return ta, tb


def clockwise_count(gt, K, face):
    # a face is walked clockwise; an edge is clockwise when the walk follows K
    return sum(1 for h in face if (K[h // 2] == 1) == (h % 2 == 0))


def check_kasteleyn(gt, K):
    """True iff every face has an odd number of clockwise edges."""
    K = tuple(K)
    if len(K) != gt.n_edges:
        raise OrientationError("orientation length mismatch")
    return all(clockwise_count(gt, K, f) % 2 == 1 for f in faces(gt))


# ----------------------------------------------------------------------------
# lifting Klein orientations

def lift_signs(g):
    """Per lifted edge of orientation_cover(g): -1 if it joins two upper vertices."""
    gt = orientation_cover(g)
    up = gt.upper
    return gt, [(-1 if (up[e.u] and up[e.v]) else 1) for e in gt.edges]


def lift_orientation(g, K):
    gt, s = lift_signs(g)
    E = g.n_edges
    return gt, tuple(K[k % E] * s[k] for k in range(2 * E))


def check_klein_orientation(g, K):
    gt, Kt = lift_orientation(g, K)
    return check_kasteleyn(gt, Kt)


# ----------------------------------------------------------------------------
# GF(2) solving

def _solve_gf2(rows, rhs, nvars):
    """Solve a linear system over GF(2); rows are lists of variable indices.

    Returns one solution (free variables set to 0) and a kernel basis, or
    raises if inconsistent.
    """
    A = np.zeros((len(rows), nvars + 1), dtype=np.uint8)
    for r, (vars_, b) in enumerate(zip(rows, rhs)):
        for x in vars_:
            A[r, x] ^= 1
        A[r, nvars] = b & 1
    pivots = []
    r = 0
    for c in range(nvars):
        hit = np.nonzero(A[r:, c])[0]
        if hit.size == 0:
            continue
        p = r + hit[0]
        if p != r:
            A[[r, p]] = A[[p, r]]
        mask = A[:, c].astype(bool)
        mask[r] = False
        A[mask] ^= A[r]
        pivots.append(c)
        r += 1
        if r == A.shape[0]:
            break
    if np.any(A[r:, nvars]):
        raise OrientationError("no orientation satisfies the face conditions")
    x = np.zeros(nvars, dtype=np.uint8)
    for k, c in enumerate(pivots):
        x[c] = A[k, nvars]
    free = [c for c in range(nvars) if c not in set(pivots)]
    kernel = []
    for f in free:
        y = np.zeros(nvars, dtype=np.uint8)
        y[f] = 1
        for k, c in enumerate(pivots):
            y[c] = A[k, f]
        kernel.append(y)
    return x, kernel


def _face_system(gt, var_of, fixed_flip):
    """Rows expressing 'odd clockwise count' per face.

    Edge k of gt has orientation (-1)^(x[var_of[k]] + fixed_flip[k]).
    """
    rows, rhs = [], []
    for f in faces(gt):
        vars_ = []
        const = 1
        for h in f:
            k = h // 2
            # clockwise iff orientation sign matches walking direction
            vars_.append(var_of[k])
            const += 1 + fixed_flip[k] + (h % 2)
        rows.append(vars_)
        rhs.append(const % 2)
    return rows, rhs


def _torus_checks(gt):
    if gt.rotation is None:
        raise OrientationError("a rotation system is required")
    if euler_characteristic(gt) != 0:
        raise OrientationError("rotation system does not describe a cellular torus embedding")
    if not is_connected(gt):
        raise OrientationError("graph is disconnected")


def is_connected(g):
    adj = [[] for _ in range(g.vertex_count)]
    for e in g.edges:
        adj[e.u].append(e.v)
        adj[e.v].append(e.u)
    seen = {0}
    stack = [0]
    while stack:
        for y in adj[stack.pop()]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return len(seen) == g.vertex_count


def find_orientation(gt):
    """A Kasteleyn orientation of a torus graph (one per edge)."""
    if gt.is_klein:
        raise OrientationError("find_orientation expects a torus graph; use find_klein_orientation")
    _torus_checks(gt)
    E = gt.n_edges
    rows, rhs = _face_system(gt, list(range(E)), [0] * E)
    x, _ = _solve_gf2(rows, rhs, E)
    return tuple(1 - 2 * int(t) for t in x)


def klein_orientation_space(g):
    """Particular solution and kernel for orientations of a Klein graph whose
    lift (with upper-half reversal) is Kasteleyn."""
    gt, s = lift_signs(g)
    _torus_checks(gt)
    E = g.n_edges
    var_of = [k % E for k in range(2 * E)]
    flip = [0 if s[k] == 1 else 1 for k in range(2 * E)]
    rows, rhs = _face_system(gt, var_of, flip)
    return _solve_gf2(rows, rhs, E)


def find_klein_orientation(g):
    x, _ = klein_orientation_space(g)
    return tuple(1 - 2 * int(t) for t in x)


def flip_across(g, K, which="a"):
    """Reverse every edge crossing the horizontal side ('a') or the vertical
    side ('b')."""
    out = []
    for s, e in zip(K, g.edges):
        hit = e.a if which == "a" else abs(e.b)
        out.append(-s if hit else s)
    return tuple(out)


def flip_vertex(g, K, v):
    return tuple(-s if (e.u == v) != (e.v == v) else s for s, e in zip(K, g.edges))


# ----------------------------------------------------------------------------
# curve condition

def _walk(g, path):
    """Turn a list of edge ids (or [id, dir] pairs) into oriented steps."""
    steps = []
    cur = None
    for item in path:
        if isinstance(item, (list, tuple)):
            k, d = int(item[0]), int(item[1])
        else:
            k = int(item)
            e = g.edges[k]
            if cur is None:
                d = 1
            elif e.u == cur:
                d = 1
            elif e.v == cur:
                d = -1
            else:
                raise OrientationError(f"edge {k} does not continue the path")
        e = g.edges[k]
        start, end = (e.u, e.v) if d == 1 else (e.v, e.u)
        if cur is not None and start != cur:
            raise OrientationError(f"edge {k} does not continue the path")
        steps.append((k, d))
        cur = end
    first = g.edges[steps[0][0]]
    origin = first.u if steps[0][1] == 1 else first.v
    if cur != origin:
        raise OrientationError("curve is not closed")
    return steps


def disagreements(g, K, path):
    return sum(1 for k, d in _walk(g, path) if K[k] != d)


def check_curve_condition(g, K, C, Cp):
    """Parity of the number of edges of C and C' where K disagrees with them."""
    return (disagreements(g, K, C) + disagreements(g, K, Cp)) % 2


# ----------------------------------------------------------------------------
# matrices

def _orientation_or_die(g, K):
    if K is None:
        K = g.orientation
    if K is None:
        raise OrientationError("no orientation supplied")
    if len(K) != g.n_edges:
        raise OrientationError("orientation length mismatch")
    return K


def klein_matrix(g, K=None, z=1.0, w=1):
    """Twisted Kasteleyn matrix A(z, w) of a Klein bottle graph (w = +-1)."""
    if w not in (1, -1):
        raise ValueError("w must be +1 or -1 for Klein bottle matrices")
    K = _orientation_or_die(g, K)
    N = g.vertex_count
    A = np.zeros((N, N), dtype=complex)
    z = complex(z)
    for s, e in zip(K, g.edges):
        c = (1j ** ((e.a + e.ap) % 2)) * e.weight * (w ** e.a)
        A[e.u, e.v] += s * c * z ** e.b
        A[e.v, e.u] -= s * c * z ** (-e.b)
    return A


def torus_matrix(gt, K=None, z=1.0, w=1.0):
    """Kasteleyn matrix of a torus graph twisted by (z, w)."""
    K = _orientation_or_die(gt, K)
    N = gt.vertex_count
    A = np.zeros((N, N), dtype=complex)
    z, w = complex(z), complex(w)
    for s, e in zip(K, gt.edges):
        A[e.u, e.v] += s * e.weight * z ** e.tb * w ** e.ta
        A[e.v, e.u] -= s * e.weight * z ** (-e.tb) * w ** (-e.ta)
    return A


def bipartite_block(gt, A):
    """Rows indexed by white (color 1), columns by black (color 0)."""
    if gt.colors is None:
        raise OrientationError("graph has no bipartite coloring")
    white = [v for v, c in enumerate(gt.colors) if c == 1]
    black = [v for v, c in enumerate(gt.colors) if c == 0]
    if len(white) != len(black):
        raise OrientationError("unbalanced bipartite graph")
    return A[np.ix_(white, black)]


def twisted_matrix2(g, K=None, z=1.0, w=1.0):
    """Kasteleyn matrix twisted by a 2-dimensional representation.

    Crossing the vertical side swaps the two components with factor z;
    crossing the horizontal side upward multiplies them by (w, 1/w).
    """
    K = _orientation_or_die(g, K)
    half = g.halves()
    N = g.vertex_count
    z, w = complex(z), complex(w)
    swap = np.array([[0, z], [z, 0]])
    up = np.diag([w, 1 / w])
    M = np.zeros((2 * N, 2 * N), dtype=complex)
    for s, e in zip(K, g.edges):
        phi = np.eye(2, dtype=complex)
        if e.b:
            phi = phi @ np.linalg.matrix_power(swap, 1) if e.b == 1 else phi @ np.linalg.inv(swap)
        d = a_direction(e, half[e.u])
        if d:
            phi = phi @ (up if d == 1 else np.linalg.inv(up))
        c = s * (1j ** ((e.a + e.ap) % 2)) * e.weight
        M[2 * e.u:2 * e.u + 2, 2 * e.v:2 * e.v + 2] += c * phi
        M[2 * e.v:2 * e.v + 2, 2 * e.u:2 * e.u + 2] -= c * np.linalg.inv(phi)
    return M


# ----------------------------------------------------------------------------
# orientations on covers

def cover_orientation(g, K, m, n, gc=None):
    """Orientation of the m x n cover induced by an orientation K of g.

    The torus double cover of the m x n cover also covers the torus double
    cover of g.  The result is the orientation whose own lift agrees, up to
    reversing all edges at some vertices, with the periodic lift of the lift
    of K.  This fixes the class of the orientation, not only its face parities.
    """
    from .graph import build_cover
    if gc is None:
        gc = build_cover(g, m, n)
    N, E = g.vertex_count, g.n_edges
    Nc, Ec = gc.vertex_count, gc.n_edges
    half = g.halves()
    gt = orientation_cover(gc)
    up = gt.upper

    def base_upper(x):
        # cover vertex (cell, v) on sheet s sits over copy (column + s) of the base
        sheet, local = divmod(x, Nc)
        cell, v = divmod(local, N)
        col = cell % n
        return half[v] ^ ((col + sheet) % 2)

    rows, rhs = [], []
    for k, e in enumerate(gt.edges):
        kc = k % Ec
        kb = kc % E
        inv_base = base_upper(e.u) & base_upper(e.v)
        inv_cover = up[e.u] & up[e.v]
        target = (0 if K[kb] == 1 else 1) ^ inv_base ^ inv_cover
        rows.append([kc, Ec + e.u, Ec + e.v] if e.u != e.v else [kc])
        rhs.append(target)
    x, _ = _solve_gf2(rows, rhs, Ec + 2 * Nc)
    Kc = tuple(1 - 2 * int(t) for t in x[:Ec])
    if not check_klein_orientation(gc, Kc):
        raise OrientationError("lifted orientation fails the face condition")
    return gc, Kc
