"""Laurent polynomials and their extraction from Kasteleyn determinants.

Polynomials are recovered by evaluating determinants on a grid of offset
roots of unity and inverting the discrete Fourier transform.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .graph import two_coloring
from .orient import klein_matrix, torus_matrix, lift_orientation, _orientation_or_die

PRUNE = 1e-12
RESIDUAL = 1e-9


class InterpolationError(RuntimeError):
    pass


def det(M):
    """Determinant via LU with partial pivoting."""
    if M.shape[0] == 0:
        return 1.0 + 0j
    return complex(np.linalg.det(M))


def _pruned(coeffs, tol=PRUNE):
    if not coeffs:
        return {}
    scale = max(abs(c) for c in coeffs.values())
    if scale == 0:
        return {}
    return {k: c for k, c in coeffs.items() if abs(c) > tol * scale}


# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class LaurentPoly:
    """Complex Laurent polynomial in one variable, stored as exponent -> coefficient."""
    coeffs: dict = field(default_factory=dict)

    @classmethod
    def from_coeffs(cls, coeffs, tol=PRUNE):
        return cls(_pruned({int(k): complex(v) for k, v in coeffs.items()}, tol))

    @property
    def lo(self):
        return min(self.coeffs) if self.coeffs else 0

    @property
    def hi(self):
        return max(self.coeffs) if self.coeffs else 0

    def is_zero(self):
        return not self.coeffs

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for k, c in self.coeffs.items():
            out = out + c * z ** k
        return out if out.ndim else complex(out)

    def __getitem__(self, k):
        return self.coeffs.get(k, 0j)

    def __mul__(self, other):
        if not isinstance(other, LaurentPoly):
            return LaurentPoly.from_coeffs({k: c * other for k, c in self.coeffs.items()})
        out = {}
        for i, a in self.coeffs.items():
            for j, b in other.coeffs.items():
                out[i + j] = out.get(i + j, 0) + a * b
        return LaurentPoly.from_coeffs(out)

    __rmul__ = __mul__

    def __add__(self, other):
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0) + c
        return LaurentPoly.from_coeffs(out)

    def __neg__(self):
        return LaurentPoly({k: -c for k, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def substitute(self, scale=1.0, invert=False):
        """p(scale * z), or p(scale / z) when invert is set."""
        sgn = -1 if invert else 1
        return LaurentPoly.from_coeffs({sgn * k: c * scale ** k for k, c in self.coeffs.items()})

    def conj_coeffs(self):
        return LaurentPoly({k: c.conjugate() for k, c in self.coeffs.items()})

    def derivative(self):
        return LaurentPoly.from_coeffs({k - 1: k * c for k, c in self.coeffs.items() if k})

    def leading(self):
        return self.coeffs[self.hi] if self.coeffs else 0j

    def polynomial_part(self):
        """Coefficients of z^(-lo) * p in numpy order (highest first)."""
        if not self.coeffs:
            return np.zeros(1, dtype=complex)
        return np.array([self[k] for k in range(self.hi, self.lo - 1, -1)], dtype=complex)

    def close_to(self, other, rtol=1e-9):
        keys = set(self.coeffs) | set(other.coeffs)
        scale = max([abs(c) for c in self.coeffs.values()] + [abs(c) for c in other.coeffs.values()] + [1e-300])
        return all(abs(self[k] - other[k]) <= rtol * scale for k in keys)

    def to_dict(self):
        return {"terms": [{"i": k, "j": 0, "re": c.real, "im": c.imag}
                          for k, c in sorted(self.coeffs.items())]}

    @classmethod
    def from_dict(cls, d):
        return cls.from_coeffs({t["i"]: complex(t["re"], t.get("im", 0.0)) for t in d["terms"]})

    def __repr__(self):
        return f"LaurentPoly({dict(sorted(self.coeffs.items()))})"


@dataclass(frozen=True)
class BiLaurentPoly:
    """Real Laurent polynomial in (z, w); keys (i, j) are exponents of z and w."""
    coeffs: dict = field(default_factory=dict)

    @classmethod
    def from_coeffs(cls, coeffs, tol=PRUNE):
        return cls(_pruned({(int(i), int(j)): float(np.real(v)) for (i, j), v in coeffs.items()}, tol))

    def __getitem__(self, key):
        return self.coeffs.get(key, 0.0)

    def __call__(self, z, w):
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        out = np.zeros(np.broadcast(z, w).shape, dtype=complex)
        for (i, j), c in self.coeffs.items():
            out = out + c * z ** i * w ** j
        return out if out.ndim else complex(out)

    def __mul__(self, other):
        if not isinstance(other, BiLaurentPoly):
            return BiLaurentPoly.from_coeffs({k: c * other for k, c in self.coeffs.items()})
        out = {}
        for (i, j), a in self.coeffs.items():
            for (k, l), b in other.coeffs.items():
                out[(i + k, j + l)] = out.get((i + k, j + l), 0.0) + a * b
        return BiLaurentPoly.from_coeffs(out)

    __rmul__ = __mul__

    def __add__(self, other):
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0.0) + c
        return BiLaurentPoly.from_coeffs(out)

    def __neg__(self):
        return BiLaurentPoly({k: -c for k, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def inverted(self, z=True, w=True):
        """p(z^-1, w^-1) (or only one variable inverted)."""
        return BiLaurentPoly({((-i if z else i), (-j if w else j)): c for (i, j), c in self.coeffs.items()})

    def scale_vars(self, sz=1.0, sw=1.0):
        return BiLaurentPoly.from_coeffs({(i, j): c * sz ** i * sw ** j for (i, j), c in self.coeffs.items()})

    def derivative(self, var, order=1):
        """Partial derivative d/dz (var='z') or d/dw."""
        coeffs = dict(self.coeffs)
        for _ in range(order):
            nxt = {}
            for (i, j), c in coeffs.items():
                if var == "z" and i:
                    nxt[(i - 1, j)] = nxt.get((i - 1, j), 0.0) + i * c
                elif var == "w" and j:
                    nxt[(i, j - 1)] = nxt.get((i, j - 1), 0.0) + j * c
            coeffs = nxt
        return BiLaurentPoly(coeffs)

    def slice_w(self, z0):
        """One-variable polynomial w -> p(z0, w)."""
        out = {}
        for (i, j), c in self.coeffs.items():
            out[j] = out.get(j, 0j) + c * complex(z0) ** i
        return LaurentPoly.from_coeffs(out)

    def slice_z(self, w0):
        out = {}
        for (i, j), c in self.coeffs.items():
            out[i] = out.get(i, 0j) + c * complex(w0) ** j
        return LaurentPoly.from_coeffs(out)

    def newton_area(self):
        """Area of the Newton polygon (convex hull of exponents)."""
        pts = sorted(set(self.coeffs))
        if len(pts) < 3:
            return 0.0

        def cross(o, a, b):
            return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

        lower, upper = [], []
        for p in pts:
            while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
                lower.pop()
            lower.append(p)
        for p in reversed(pts):
            while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
                upper.pop()
            upper.append(p)
        hull = lower[:-1] + upper[:-1]
        area = 0.0
        for k in range(len(hull)):
            x1, y1 = hull[k]
            x2, y2 = hull[(k + 1) % len(hull)]
            area += x1 * y2 - x2 * y1
        return abs(area) / 2

    def scale(self):
        return max((abs(c) for c in self.coeffs.values()), default=0.0)

    def close_to(self, other, rtol=1e-9):
        keys = set(self.coeffs) | set(other.coeffs)
        s = max(self.scale(), other.scale(), 1e-300)
        return all(abs(self[k] - other[k]) <= rtol * s for k in keys)

    def to_dict(self):
        return {"terms": [{"i": i, "j": j, "re": c, "im": 0.0}
                          for (i, j), c in sorted(self.coeffs.items())]}

    @classmethod
    def from_dict(cls, d):
        return cls.from_coeffs({(t["i"], t["j"]): t["re"] for t in d["terms"]})

    def __repr__(self):
        return f"BiLaurentPoly({dict(sorted(self.coeffs.items()))})"


def dumps(p):
    return json.dumps(p.to_dict())


# ----------------------------------------------------------------------------
# interpolation

def _grid(n):
    offset = np.exp(1j * np.pi / (2 * n))
    return offset * np.exp(2j * np.pi * np.arange(n) / n), offset


def interpolate_1d(f, degree):
    """Coefficients of a Laurent polynomial with exponents in [-degree, degree]."""
    n = 2 * degree + 1
    pts, offset = _grid(n)
    vals = np.array([f(z) for z in pts])
    c = np.fft.fft(vals) / n
    coeffs = {}
    for k in range(-degree, degree + 1):
        coeffs[k] = c[k % n] / offset ** k
    p = LaurentPoly.from_coeffs(coeffs)
    _check_1d(p, f)
    return p


def _check_1d(p, f, count=3):
    rng = np.random.default_rng(12345)
    for t in rng.uniform(0, 2 * np.pi, count):
        z = np.exp(1j * t) * (1.0 + 0.1 * np.sin(3 * t))
        exact = f(z)
        scale = max(abs(exact), sum(abs(c) * abs(z) ** k for k, c in p.coeffs.items()), 1e-300)
        if abs(p(z) - exact) > RESIDUAL * scale:
            raise InterpolationError("interpolation residual above threshold; degree bound too small?")


def interpolate_2d(f, deg_z, deg_w, real=True):
    nz, nw = 2 * deg_z + 1, 2 * deg_w + 1
    zs, oz = _grid(nz)
    ws, ow = _grid(nw)
    vals = np.array([[f(z, w) for w in ws] for z in zs])
    c = np.fft.fft2(vals) / (nz * nw)
    coeffs = {}
    biggest = np.max(np.abs(c)) if c.size else 0.0
    for i in range(-deg_z, deg_z + 1):
        for j in range(-deg_w, deg_w + 1):
            v = c[i % nz, j % nw] / (oz ** i * ow ** j)
            if real and abs(v.imag) > RESIDUAL * max(biggest, 1e-300) * 10:
                raise InterpolationError("polynomial expected to be real has complex coefficients")
            coeffs[(i, j)] = v
    p = BiLaurentPoly.from_coeffs(coeffs)
    rng = np.random.default_rng(54321)
    for t, s in rng.uniform(0, 2 * np.pi, (3, 2)):
        z, w = np.exp(1j * t), np.exp(1j * s)
        exact = f(z, w)
        scale = max(abs(exact), sum(abs(v) for v in p.coeffs.values()), 1e-300)
        if abs(p(z, w) - exact) > RESIDUAL * scale:
            raise InterpolationError("interpolation residual above threshold")
    return p


# ----------------------------------------------------------------------------
# extraction

def extract_R(g, K=None):
    """(R(z, 1), R(z, -1)) as Laurent polynomials in z."""
    K = _orientation_or_die(g, K)
    deg = sum(abs(e.b) for e in g.edges)
    return tuple(interpolate_1d(lambda z, w=w: det(klein_matrix(g, K, z, w)), deg) for w in (1, -1))


def _torus_data(g, K):
    if g.is_klein:
        return lift_orientation(g, _orientation_or_die(g, K))
    return g, _orientation_or_die(g, K)


def extract_P(g, K=None):
    """Toric characteristic polynomial of a torus graph, or of the orientation
    cover when a Klein bottle graph is given."""
    gt, Kt = _torus_data(g, K)
    dz = sum(abs(e.tb) for e in gt.edges)
    dw = sum(abs(e.ta) for e in gt.edges)
    return interpolate_2d(lambda z, w: det(torus_matrix(gt, Kt, z, w)), dz, dw)


def bipartite_block_bw(g, A):
    """Block with rows indexed by black vertices (color 0), columns by white."""
    black = [v for v, c in enumerate(g.colors) if c == 0]
    white = [v for v, c in enumerate(g.colors) if c == 1]
    if len(black) != len(white):
        raise ValueError("unbalanced bipartite graph")
    return A[np.ix_(black, white)]


def _block_det(g, A):
    return det(bipartite_block_bw(g, A))


def _raw_Q(gt, Kt):
    dz = sum(abs(e.tb) for e in gt.edges)
    dw = sum(abs(e.ta) for e in gt.edges)
    return interpolate_2d(lambda z, w: _block_det(gt, torus_matrix(gt, Kt, z, w)), dz, dw)


def _raw_S(g, K):
    deg = sum(abs(e.b) for e in g.edges)
    return tuple(interpolate_1d(lambda z, w=w: _block_det(g, klein_matrix(g, K, z, w)), deg)
                 for w in (1, -1))


def _conj_antisymmetric(S):
    """Coefficient rule S(-z) = -conj(S)(z), i.e. c_k (-1)^k = -conj(c_k)."""
    s = max((abs(c) for c in S.coeffs.values()), default=1.0)
    return all(abs(c * (-1) ** k + c.conjugate()) <= 1e-9 * s for k, c in S.coeffs.items())


def _normalize_S(S):
    for phase in (1, 1j):
        T = S * phase
        if _conj_antisymmetric(T):
            return T
    raise InterpolationError("no unit phase brings S to the conjugation-antisymmetric gauge")


def extract_S(g, K=None):
    """(S(z, 1), S(z, -1)) normalized so that S(-z) = -conj(S)(z).

    In this gauge Q(z^2, w) = -S(z, w) S(-z, w), so |S(z)|^2 = Q(z^2) for z > 0.
    """
    if g.colors is None:
        raise ValueError("bipartite coloring required")
    K = _orientation_or_die(g, K)
    return tuple(_normalize_S(S) for S in _raw_S(g, K))


def extract_Q(g, K=None):
    """Bipartite toric polynomial; for a Klein graph its sign is chosen so that
    Q(z^2, w) = -S(z, w) S(-z, w) at w = 1."""
    if g.colors is None:
        raise ValueError("bipartite coloring required")
    gt, Kt = _torus_data(g, K)
    Q = _raw_Q(gt, Kt)
    if not g.is_klein:
        return Q
    S1, _ = extract_S(g, K)
    z0 = 0.83 * np.exp(0.61j)
    target = -S1(z0) * S1(-z0)
    val = Q(z0 ** 2, 1.0)
    if abs(val + target) < abs(val - target):
        Q = -Q
    return Q


def extract_cover_Q(g, K=None):
    """Q of the orientation cover when that cover is bipartite, else None.

    Used for Klein graphs that are not bipartite themselves; the overall sign
    is left as it comes out of the determinant.
    """
    gt, Kt = _torus_data(g, K)
    colors = two_coloring(gt)
    if colors is None or 2 * sum(colors) != len(colors):
        return None
    return _raw_Q(replace(gt, colors=colors), Kt)


# ----------------------------------------------------------------------------
# identities

def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def poly_identity_suite(g, K=None, points=32, tol=1e-9, seed=0, R=None, P=None):
    """Check the algebraic relations between R, P (and S, Q when bipartite).

    R = (R1, Rm1) and P may be passed in to audit polynomials from elsewhere.
    Returns a dict mapping check name to (passed, worst relative error).
    """
    K = _orientation_or_die(g, K)
    R1, Rm1 = extract_R(g, K) if R is None else R
    P = extract_P(g, K) if P is None else P
    rng = np.random.default_rng(seed)
    zs = np.exp(2j * np.pi * rng.random(points))
    ws = np.exp(2j * np.pi * rng.random(points))
    Rs = {1: R1, -1: Rm1}
    errs = {}

    def record(name, e):
        errs[name] = max(errs.get(name, 0.0), e)

    for z, w in zip(zs, ws):
        for sgn, R in Rs.items():
            record("R(-z)=conj R(z)", _rel(R(-z), np.conj(R(z))))
            r = np.sqrt(z)
            record("R(z^1/2)R(-z^1/2)=P(z)", _rel(R(r) * R(-r), P(z, sgn)))
        record("P(z,w)=P(z,1/w)", _rel(P(z, w), P(z, 1 / w)))
    for sgn, R in Rs.items():
        record("P(1,w)=|R(1,w)|^2", _rel(P(1.0, sgn), abs(R(1.0)) ** 2))
        record("P(1,w)=|R(-1,w)|^2", _rel(P(1.0, sgn), abs(R(-1.0)) ** 2))

    if g.colors is not None:
        S = extract_S(g, K)
        Q = extract_Q(g, K)
        Qi = Q.inverted()
        for z, w in zip(zs, ws):
            record("P=Q(z,w)Q(1/z,1/w)", _rel(P(z, w), Q(z, w) * Qi(z, w)))
            record("Q(z,w)=Q(z,1/w)", _rel(Q(z, w), Q(z, 1 / w)))
            for sgn, Sx, R in ((1, S[0], R1), (-1, S[1], Rm1)):
                # the S gauge multiplies S by a unit phase, so only R = +-S(z)S(1/z) survives
                prod = Sx(z) * Sx(1 / z)
                record("R(z)=+-S(z)S(1/z)", min(_rel(R(z), prod), _rel(R(z), -prod)))
                record("Q(z^2)=-S(z)S(-z)", _rel(Q(z * z, sgn), -Sx(z) * Sx(-z)))
        for Sx in S:
            record("S(-z)=-conj S(z)", 0.0 if _conj_antisymmetric(Sx) else 1.0)
    return {k: (v <= tol, v) for k, v in errs.items()}
