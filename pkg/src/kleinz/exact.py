"""Exact partition functions and their oracles."""

from __future__ import annotations

import cmath
import enum
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .graph import EmbeddedGraph, GraphError, build_cover, fisher_graph, require_valid
from .orient import (OrientationError, check_klein_orientation, cover_orientation,
                     find_klein_orientation, flip_across, klein_matrix, lift_orientation,
                     torus_matrix, twisted_matrix2, _orientation_or_die)
from .poly import BiLaurentPoly, LaurentPoly, det, extract_P, extract_R

MAX_DIMER_VERTICES = 32
MAX_SPINS = 20


def _wrap(theta):
    """Angle reduced to (-pi, pi]."""
    t = math.remainder(theta, 2 * math.pi)
    return math.pi if t == -math.pi else t


@dataclass(frozen=True)
class LogComplex:
    """Nonzero complex number stored as (log |x|, arg x); zero has log_modulus -inf."""
    log_modulus: float
    argument: float = 0.0

    @classmethod
    def from_complex(cls, x):
        x = complex(x)
        if x == 0:
            return cls(-math.inf, 0.0)
        return cls(math.log(abs(x)), cmath.phase(x))

    @classmethod
    def product(cls, values):
        """Product of complex values, accumulated without overflow."""
        v = np.asarray(values, dtype=complex).ravel()
        if np.any(v == 0):
            return cls(-math.inf, 0.0)
        return cls(float(np.sum(np.log(np.abs(v)))), _wrap(float(np.sum(np.angle(v)))))

    def __mul__(self, other):
        return LogComplex(self.log_modulus + other.log_modulus, _wrap(self.argument + other.argument))

    def conjugate(self):
        return LogComplex(self.log_modulus, _wrap(-self.argument))

    def root(self, k):
        """Principal k-th root of the modulus (argument divided by k)."""
        return LogComplex(self.log_modulus / k, self.argument / k)

    @property
    def modulus(self):
        return math.exp(self.log_modulus)

    def to_complex(self):
        if self.log_modulus > 700:
            raise OverflowError("modulus too large for a float")
        return cmath.rect(self.modulus, self.argument)

    def is_zero(self):
        return self.log_modulus == -math.inf


class Branch(str, enum.Enum):
    STANDARD = "standard"
    SWAPPED = "swapped"


# ----------------------------------------------------------------------------
# oracles

def z_bruteforce(g):
    """Weighted count of perfect matchings by recursion on the lowest free vertex."""
    N = g.vertex_count
    if N > MAX_DIMER_VERTICES:
        raise ValueError(f"brute force limited to {MAX_DIMER_VERTICES} vertices")
    if N % 2:
        return 0.0
    adj = [[] for _ in range(N)]
    for e in g.edges:
        if e.u != e.v and e.weight != 0:
            adj[e.u].append((e.v, e.weight))
            adj[e.v].append((e.u, e.weight))
    full = (1 << N) - 1

    @lru_cache(maxsize=None)
    def count(mask):
        if mask == full:
            return 1.0
        v = 0
        while mask >> v & 1:
            v += 1
        total = 0.0
        for y, w in adj[v]:
            if not mask >> y & 1:
                total += w * count(mask | 1 << v | 1 << y)
        return total

    return count(0)


def z_pfaffian(g, K=None):
    """Dimer partition function from R(1, 1) and R(1, -1)."""
    K = _orientation_or_die(g, K)
    r1 = det(klein_matrix(g, K, 1.0, 1))
    rm1 = det(klein_matrix(g, K, 1.0, -1))
    return abs(cmath.sqrt(r1).imag) + abs(cmath.sqrt(rm1).real)


# ----------------------------------------------------------------------------
# orientation classes

def _generic_weights(g, seed=7):
    rng = np.random.default_rng(seed)
    return g.with_weights(list(rng.uniform(0.5, 1.5, g.n_edges)))


def _agrees(a, b, rtol=1e-9):
    return abs(a - b) <= rtol * max(abs(a), abs(b), 1e-300)


def resolve_orientation(g, K=None):
    """An orientation satisfying both Kasteleyn conditions.

    The face condition is solved or checked directly.  The remaining binary
    choice (reversing every edge crossing the horizontal side) is fixed by the
    user-supplied curves when present, otherwise by comparing the Pfaffian
    formula with brute force at generic weights.
    """
    from .orient import check_curve_condition
    K = K if K is not None else g.orientation
    if K is None or not check_klein_orientation(g, K):
        K = find_klein_orientation(g)
    other = flip_across(g, K, "a")
    if g.curves and "C" in g.curves and "Cp" in g.curves:
        return K if check_curve_condition(g, K, g.curves["C"], g.curves["Cp"]) == 0 else other
    if g.vertex_count > MAX_DIMER_VERTICES:
        raise OrientationError("graph too large to fix the orientation class by enumeration; "
                               "supply curves C and Cp")
    gg = _generic_weights(g)
    truth = z_bruteforce(gg)
    if _agrees(z_pfaffian(gg, K), truth):
        return K
    if _agrees(z_pfaffian(gg, other), truth):
        return other
    raise OrientationError("no orientation class reproduces the matching count")


# ----------------------------------------------------------------------------
# product formulas

def _roots(n, at=1.0):
    """All z with z^n = at (|at| = 1)."""
    base = cmath.phase(complex(at)) / n
    return np.exp(1j * (base + 2 * np.pi * np.arange(n) / n))


def pmn_value(P, m, n, zeta=1.0, xi=1.0):
    """Product of P(z, w) over z^n = zeta and w^m = xi."""
    zs = _roots(n, zeta)
    ws = _roots(m, xi)
    Z, W = np.meshgrid(zs, ws, indexing="ij")
    return LogComplex.product(P(Z, W))


def _r_product(R, n, conj=False):
    v = R(_roots(n))
    return LogComplex.product(np.conj(v) if conj else v)


def _p_ring(P, m, n, parity):
    zeta = np.exp(1j * np.pi / m)
    ks = [k for k in range(1, m) if k % 2 == parity]
    if not ks:
        return LogComplex(0.0, 0.0)
    Z, W = np.meshgrid(_roots(n), zeta ** np.array(ks), indexing="ij")
    return LogComplex.product(P(Z, W))


def rmn_product(R1, Rm1, P, m, n):
    """R_mn(1, 1) and R_mn(1, -1) of the m x n cover from base polynomials."""
    if n % 2 == 0:
        raise ValueError("n must be odd")
    even = _p_ring(P, m, n, 0)
    odd = _p_ring(P, m, n, 1)
    if m % 2:
        return _r_product(R1, n) * even, _r_product(Rm1, n, conj=True) * odd
    return _r_product(R1, n) * _r_product(Rm1, n, conj=True) * even, odd


def alphas(R1, Rm1, n):
    return _r_product(R1, n).argument, _r_product(Rm1, n).argument


def zmn(R1, Rm1, P, m, n, branch=Branch.STANDARD, log=False):
    """Dimer partition function of the m x n cover (n odd)."""
    if n % 2 == 0:
        raise ValueError("n must be odd (use torus tooling for even n)")
    a, ap = alphas(R1, Rm1, n)
    p1 = pmn_value(P, m, n, 1.0, 1.0).log_modulus / 4
    pm1 = pmn_value(P, m, n, 1.0, -1.0).log_modulus / 4
    if m % 2:
        if Branch(branch) is Branch.SWAPPED:
            a, ap = ap, a
        terms = [(abs(math.sin(a / 2)), p1), (abs(math.cos(ap / 2)), pm1)]
    else:
        terms = [(abs(math.sin((a - ap) / 2)), p1), (1.0, pm1)]
    logs = [math.log(c) + l for c, l in terms if c > 0 and l > -math.inf]
    if not logs:
        return -math.inf if log else 0.0
    top = max(logs)
    total = top + math.log(sum(math.exp(l - top) for l in logs))
    return total if log else math.exp(total)


@dataclass(frozen=True)
class Polys:
    """Base data needed by the product formulas."""
    R1: LaurentPoly
    Rm1: LaurentPoly
    P: BiLaurentPoly
    K: tuple
    branch: Branch = Branch.STANDARD


def polys_for(g, K=None, calibrate=True):
    K = resolve_orientation(g, K)
    R1, Rm1 = extract_R(g, K)
    P = extract_P(g, K)
    branch = calibrate_branch(g, K) if calibrate else Branch.STANDARD
    return Polys(R1, Rm1, P, K, branch)


def calibrate_branch(g, K=None):
    """Which variant of the product formula holds for odd m.

    Both variants are compared against the exact count on the 3 x 1 cover at
    generic weights; ties (the variants coincide) resolve to standard.
    """
    K = resolve_orientation(g, K)
    gg = _generic_weights(g)
    R1, Rm1 = extract_R(gg, K)
    P = extract_P(gg, K)
    if not _agrees(zmn(R1, Rm1, P, 1, 1), z_pfaffian(gg, K)):
        raise OrientationError("product formula fails on the trivial cover")
    cover = build_cover(gg, 3, 1)
    if cover.vertex_count <= MAX_DIMER_VERTICES:
        truth = z_bruteforce(cover)
    else:
        raise ValueError("graph too large to calibrate by enumeration; supply curves C and Cp")
    standard = zmn(R1, Rm1, P, 3, 1, Branch.STANDARD)
    swapped = zmn(R1, Rm1, P, 3, 1, Branch.SWAPPED)
    if _agrees(standard, truth):
        return Branch.STANDARD
    if _agrees(swapped, truth):
        return Branch.SWAPPED
    raise OrientationError("neither branch reproduces the 3 x 1 cover")


def cover_matrix_orientation(g, K, m, n, branch=Branch.STANDARD):
    """Cover graph with an orientation satisfying both conditions."""
    gc, Kc = cover_orientation(g, K, m, n)
    if m % 2 and Branch(branch) is Branch.SWAPPED:
        Kc = flip_across(gc, Kc, "a")
    return gc, Kc


def z_cover(g, m, n, method="product", K=None):
    """Z of the m x n cover by the product formula, the Pfaffian formula on the
    cover, or enumeration."""
    if n % 2 == 0:
        raise ValueError("n must be odd for Klein bottle covers (use torus tooling for even n)")
    if method == "brute":
        return z_bruteforce(build_cover(g, m, n))
    data = polys_for(g, K)
    if method == "product":
        return zmn(data.R1, data.Rm1, data.P, m, n, data.branch)
    if method == "pfaffian":
        gc, Kc = cover_matrix_orientation(g, data.K, m, n, data.branch)
        return z_pfaffian(gc, Kc)
    raise ValueError(f"unknown method {method!r}")


# ----------------------------------------------------------------------------
# two-dimensional twist

def twisted_det2(g, K=None, z=1.0, w=1.0):
    """Determinant of the Kasteleyn matrix twisted by the 2-dimensional
    representation; equals P(z^2, w)."""
    return det(twisted_matrix2(g, K, z, w))


# ----------------------------------------------------------------------------
# torus partition function and ratios

def pfaffian(A):
    """Pfaffian of a skew-symmetric matrix by pivoted elimination."""
    A = np.array(A, dtype=complex if np.iscomplexobj(A) else float)
    n = A.shape[0]
    if n % 2:
        return 0.0
    pf = 1.0
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.argmax(np.abs(A[k + 1:, k])))
        if kp != k + 1:
            A[[k + 1, kp], :] = A[[kp, k + 1], :]
            A[:, [k + 1, kp]] = A[:, [kp, k + 1]]
            pf = -pf
        if A[k + 1, k] == 0:
            return 0.0 * pf
        pf *= A[k, k + 1]
        if k + 2 < n:
            t = A[k, k + 2:] / A[k, k + 1]
            col = A[k + 2:, k + 1].copy()
            A[k + 2:, k + 2:] += np.outer(t, col) - np.outer(col, t)
    return pf


TWISTS = ((1, 1), (-1, 1), (1, -1), (-1, -1))


def _best_combination(values):
    """max over sign patterns with one odd sign of |sum s_i v_i| / 2.

    The correct pattern counts every matching once; any other pattern counts
    some of them with a minus sign, so the maximum is the partition function.
    """
    best = 0.0
    for k in range(4):
        s = [1, 1, 1, 1]
        s[k] = -1
        best = max(best, abs(sum(a * b for a, b in zip(s, values))) / 2)
    return best


def torus_partition(gt, Kt=None):
    """Dimer partition function of a torus graph from the four Pfaffians."""
    from .orient import find_orientation
    if Kt is None:
        Kt = find_orientation(gt)
    vals = [pfaffian(torus_matrix(gt, Kt, z, w).real) for z, w in TWISTS]
    return _best_combination(vals)


def _signed_log_sum(terms):
    """log |sum s_i exp(l_i)| for (sign, log) pairs."""
    live = [(s, l) for s, l in terms if s and l > -math.inf]
    if not live:
        return -math.inf
    top = max(l for _, l in live)
    total = sum(s * math.exp(l - top) for s, l in live)
    return top + math.log(abs(total)) if total else -math.inf


def _qmn_signed(Q, m, n, zeta, xi):
    """Q_mn(zeta, xi) as (sign, log modulus); real because roots pair up."""
    v = pmn_value(Q, m, n, zeta, xi)
    if v.is_zero():
        return 0, -math.inf
    return (1 if math.cos(v.argument) > 0 else -1), v.log_modulus


def torus_cover_partition(g, m, n, K=None, log=False, method="auto"):
    """Z of the torus double cover of the m x n Klein cover.

    method "pfaffian" builds the cover; "product" uses the bipartite
    polynomial Q and needs a bipartite graph; "auto" picks by size.
    """
    from .poly import extract_Q
    if n % 2 == 0:
        raise ValueError("n must be odd for Klein bottle covers (use torus tooling for even n)")
    if method == "auto":
        method = "pfaffian" if m * n * g.vertex_count <= 400 or g.colors is None else "product"
    if method == "pfaffian":
        from .graph import orientation_cover
        gc = build_cover(g, m, n) if (m, n) != (1, 1) else g
        gt, Kt = lift_orientation(gc, resolve_orientation(gc) if (m, n) == (1, 1)
                                  else cover_orientation(g, resolve_orientation(g, K), m, n)[1])
        z = torus_partition(gt, Kt)
        return math.log(z) if log else z
    if method != "product":
        raise ValueError(f"unknown method {method!r}")
    if g.colors is None:
        raise ValueError("product route for the torus cover needs a bipartite graph")
    Q = extract_Q(g, resolve_orientation(g, K))
    terms = [_qmn_signed(Q, m, n, z, w) for z, w in TWISTS]
    best = -math.inf
    for k in range(4):
        signed = [(s * (-1 if j == k else 1), l) for j, (s, l) in enumerate(terms)]
        best = max(best, _signed_log_sum(signed))
    best -= math.log(2)
    return best if log else math.exp(best)


def finite_ratio(g, m=1, n=1, K=None, method="auto"):
    """Z(Gamma_mn)^2 / Z(torus double cover of Gamma_mn)."""
    if method == "auto":
        method = "pfaffian" if m * n * g.vertex_count <= 400 or g.colors is None else "product"
    if method == "pfaffian":
        gc = build_cover(g, m, n) if (m, n) != (1, 1) else g
        Kc = resolve_orientation(gc) if (m, n) == (1, 1) else \
            cover_matrix_orientation(g, resolve_orientation(g, K), m, n, calibrate_branch(g, K))[1]
        zk = math.log(z_pfaffian(gc, Kc))
    else:
        zk = z_cover_log(g, m, n, K)
    zt = torus_cover_partition(g, m, n, K, log=True, method=method)
    return math.exp(2 * zk - zt)


def z_cover_log(g, m, n, K=None):
    data = polys_for(g, K)
    return zmn(data.R1, data.Rm1, data.P, m, n, data.branch, log=True)


# ----------------------------------------------------------------------------
# Ising

def ising_bruteforce(g, couplings=None, beta=1.0):
    """Sum of exp(beta * sum_e J_e s_u s_v) over all spin assignments."""
    N = g.vertex_count
    if N > MAX_SPINS:
        raise ValueError(f"spin enumeration limited to {MAX_SPINS} spins")
    J = np.ones(g.n_edges) if couplings is None else np.asarray(couplings, dtype=float)
    us = np.array([e.u for e in g.edges], dtype=int)
    vs = np.array([e.v for e in g.edges], dtype=int)
    total = 0.0
    for bits in range(1 << N):
        s = np.array([1 if bits >> k & 1 else -1 for k in range(N)])
        total += math.exp(beta * float(np.sum(J * s[us] * s[vs])))
    return total


def even_subgraph_sum(g, weights):
    """Sum over edge sets with every vertex of even degree of the weight product."""
    E = g.n_edges
    if E > 24:
        raise ValueError("even-subgraph enumeration limited to 24 edges")
    total = 0.0
    for mask in range(1 << E):
        deg = [0] * g.vertex_count
        prod = 1.0
        for k in range(E):
            if mask >> k & 1:
                e = g.edges[k]
                deg[e.u] += 1
                deg[e.v] += 1
                prod *= weights[k]
        if all(d % 2 == 0 for d in deg):
            total += prod
    return total


def _couplings(g, couplings):
    return [1.0] * g.n_edges if couplings is None else [float(c) for c in couplings]


def ising_cover_graph(g, m, n):
    """The m x n cover of the spin graph itself."""
    return build_cover(g, m, n, require_even=False)


def fisher_data(g, couplings=None, beta=1.0, K=None):
    """Polynomials of the Fisher graph at inverse temperature beta."""
    F = fisher_graph(g, couplings, beta)
    skeleton = fisher_graph(g, couplings, 1.0)
    if K is None:
        K = resolve_orientation(skeleton)
        branch = calibrate_branch(skeleton, K)
    else:
        branch = Branch.STANDARD
    R1, Rm1 = extract_R(F, K)
    P = extract_P(F, K)
    return Polys(R1, Rm1, P, K, branch)


def ising_partition(g, couplings=None, beta=1.0, m=1, n=1, log=False, data=None):
    """Ising partition function of the m x n cover through the Fisher graph."""
    J = _couplings(g, couplings)
    if data is None:
        data = fisher_data(g, J, beta)
    logz = zmn(data.R1, data.Rm1, data.P, m, n, data.branch, log=True)
    logz += m * n * sum(math.log(math.cosh(beta * j)) for j in J)
    return logz if log else math.exp(logz)
