"""Roots of characteristic polynomials and zeros of spectral curves on the unit torus."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .poly import BiLaurentPoly, LaurentPoly

ROOT_TOL = 1e-10
SNAP_I = 1e-8
MERGE = 1e-6
ZERO_TOL = 1e-9
MAX_ITER = 2000


class RootError(RuntimeError):
    """Aberth iteration did not converge."""


class ConjectureViolation(RuntimeError):
    """A unit-torus zero sits where the asymptotic analysis does not allow it."""


# ----------------------------------------------------------------------------
# polynomial roots

@dataclass(frozen=True)
class RootSet:
    roots: tuple  # of (complex root, multiplicity)
    tol: float

    def __iter__(self):
        return iter(self.roots)

    def __len__(self):
        return sum(k for _, k in self.roots)

    def flat(self):
        return [z for z, k in self.roots for _ in range(k)]


def _aberth(c, tol):
    """All roots of the polynomial with numpy-ordered coefficients c."""
    d = len(c) - 1
    dc = np.polyder(c)
    # scaled circle: radius from the product of the roots, angles offset
    radius = abs(c[-1] / c[0]) ** (1.0 / d)
    z = radius * np.exp(1j * (2 * np.pi * np.arange(d) / d + 0.4))
    absc = np.abs(c)
    for _ in range(MAX_ITER):
        p = np.polyval(c, z)
        # multiple roots stall at roundoff; accept residuals at the evaluation floor
        floor = 64 * np.finfo(float).eps * np.polyval(absc, np.abs(z))
        dp = np.polyval(dc, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = p / dp
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            repulse = (1.0 / diff).sum(axis=1) - 1.0
            step = ratio / (1.0 - ratio * repulse)
        step[~np.isfinite(step)] = 0.0
        z = z - step
        if np.all((np.abs(step) <= tol * np.maximum(1.0, np.abs(z))) | (np.abs(p) <= floor)):
            return z
    raise RootError("Aberth iteration did not converge")


def _polish(c, z):
    dc = np.polyder(c)
    out = []
    for r in z:
        dp = np.polyval(dc, r)
        if abs(dp) > 1e-8 * np.sum(np.abs(dc)) * max(1.0, abs(r)) ** (len(c) - 2):
            nr = r - np.polyval(c, r) / dp
            if abs(np.polyval(c, nr)) <= abs(np.polyval(c, r)):
                r = nr
        out.append(r)
    return np.array(out)


def _snap(r, tol):
    for target in (1j, -1j):
        if abs(r - target) < SNAP_I:
            return target
    if abs(abs(r) - 1.0) < tol:
        return r / abs(r)
    return r


def roots(p: LaurentPoly, tol: float = ROOT_TOL, merge: float = MERGE) -> RootSet:
    """Nonzero roots of a Laurent polynomial with multiplicities."""
    if p.is_zero():
        raise ValueError("zero polynomial has no root set")
    c = p.polynomial_part()
    if len(c) == 1:
        return RootSet((), tol)
    z = _polish(c, _aberth(c, tol))
    clusters = []
    for r in z:
        r = complex(r)
        for cl in clusters:
            if abs(cl[0] - r) < merge * max(1.0, abs(r)):
                cl.append(r)
                break
        else:
            clusters.append([r])
    # the mean of a cluster is far more accurate than its members
    out = [(_snap(complex(np.mean(cl)), tol), len(cl)) for cl in clusters]
    out.sort(key=lambda t: (t[0].imag, t[0].real))
    return RootSet(tuple(out), tol)


# ----------------------------------------------------------------------------
# mod 4 invariants

@dataclass(frozen=True)
class Components:
    lam: int
    p: int
    r_minus: int
    r_plus: int
    half_m: int  # (m_- - m_+) / 2

    @property
    def value(self):
        return (self.lam + 2 * self.p + self.r_minus - self.r_plus + self.half_m) % 4


@dataclass(frozen=True)
class ModFourInvariant:
    A: int
    Ap: int
    parts: Components
    parts_p: Components

    def swapped(self):
        return ModFourInvariant(self.Ap, self.A, self.parts_p, self.parts)


def leading_quarter_turns(p: LaurentPoly, tol=1e-6):
    """Argument of the leading coefficient as a multiple of pi/2."""
    x = cmath.phase(p.leading()) / (math.pi / 2)
    k = round(x)
    if abs(x - k) > tol:
        raise ValueError(f"leading coefficient argument {x:.6f} * pi/2 is not a multiple of pi/2")
    return k % 4


def _on_axis(r, tol=1e-7):
    return abs(r.real) <= tol * max(1.0, abs(r))


def components(R: LaurentPoly, tol=ROOT_TOL) -> Components:
    if R.is_zero():
        raise ValueError("polynomial vanishes identically")
    lam = leading_quarter_turns(R)
    p2 = r_plus = r_minus = m_plus = m_minus = 0
    for z, k in roots(R, tol):
        if z == 1j:
            m_plus += k
            continue
        if z == -1j:
            m_minus += k
            continue
        if abs(abs(z) - 1.0) < tol:
            raise ConjectureViolation(f"unit-circle root {z:.6g} away from +-i")
        if abs(z) < 1.0:
            continue
        if _on_axis(z):
            if z.imag > 0:
                r_plus += k
            else:
                r_minus += k
        else:
            p2 += k
    if p2 % 2 or (m_minus - m_plus) % 2:
        raise ValueError("root configuration lacks the symmetry z -> -conj(z)")
    return Components(lam, p2 // 2, r_minus, r_plus, (m_minus - m_plus) // 2)


def mod4_invariants(R1: LaurentPoly, Rm1: LaurentPoly, tol=ROOT_TOL) -> ModFourInvariant:
    """The integers A and A' (mod 4) read off from R(z, 1) and R(z, -1)."""
    a, b = components(R1, tol), components(Rm1, tol)
    return ModFourInvariant(a.value, b.value, a, b)


def bipartite_components(S: LaurentPoly, tol=ROOT_TOL):
    """(lambda, r) for a bipartite polynomial; r counts roots of modulus > 1."""
    lam = leading_quarter_turns(S)
    r = sum(k for z, k in roots(S, tol) if abs(z) > 1.0 + tol)
    return lam, r


def bipartite_invariants(S1: LaurentPoly, Sm1: LaurentPoly, tol=ROOT_TOL):
    """(A, A') = (lambda + r, lambda' + r') mod 4 from S(z, 1) and S(z, -1)."""
    l1, r1 = bipartite_components(S1, tol)
    l2, r2 = bipartite_components(Sm1, tol)
    return (l1 + r1) % 4, (l2 + r2) % 4


def alpha_asymptotic(c: Components, n: int):
    """Predicted Arg of the product of R over the n-th roots of unity (n odd)."""
    sign = (-1) ** ((n - 1) // 2)
    return ((c.lam + 2 * c.p + c.r_minus - c.r_plus) * n + sign * c.half_m) * math.pi / 2


def interlacing_check(S1: LaurentPoly, Sm1: LaurentPoly, tol=1e-7) -> bool:
    """All roots purely imaginary and simple, alternating along the axis."""
    try:
        a, b = roots(S1), roots(Sm1)
    except (RootError, ValueError):
        return False
    tagged = []
    for tag, rs in ((0, a), (1, b)):
        for z, k in rs:
            if k != 1 or not _on_axis(z, tol):
                return False
            tagged.append((z.imag, tag))
    tagged.sort()
    ys = [y for y, _ in tagged]
    if any(abs(y2 - y1) < tol * max(1.0, abs(y1)) for y1, y2 in zip(ys, ys[1:])):
        return False
    return all(t1 != t2 for (_, t1), (_, t2) in zip(tagged, tagged[1:]))


# ----------------------------------------------------------------------------
# zeros on the unit torus

class _TorusFn:
    """f(theta, phi) = Re p(e^{i theta}, e^{i phi}) with derivatives."""

    def __init__(self, p: BiLaurentPoly):
        keys = list(p.coeffs)
        self.I = np.array([k[0] for k in keys], dtype=float)
        self.J = np.array([k[1] for k in keys], dtype=float)
        self.C = np.array([p.coeffs[k] for k in keys], dtype=complex)
        self.scale = float(np.sum(np.abs(self.C))) or 1.0

    def d(self, t, f, a=0, b=0):
        t = np.asarray(t, dtype=float)[..., None]
        f = np.asarray(f, dtype=float)[..., None]
        e = np.exp(1j * (self.I * t + self.J * f))
        return np.real(np.sum(self.C * (1j * self.I) ** a * (1j * self.J) ** b * e, axis=-1))


def _minimize_1d(fn, t_fixed, grid=2048, iters=200):
    """Local minima of phi -> f(t_fixed, phi), refined by Newton on f'."""
    phi = 2 * np.pi * np.arange(grid) / grid
    vals = fn.d(np.full(grid, t_fixed), phi)
    left, right = np.roll(vals, 1), np.roll(vals, -1)
    out = []
    for k in np.nonzero((vals <= left) & (vals <= right))[0]:
        x = phi[k]
        for _ in range(iters):
            g1 = fn.d(t_fixed, x, 0, 1)
            g2 = fn.d(t_fixed, x, 0, 2)
            if g2 <= 0:
                break
            step = g1 / g2
            x -= step
            if abs(step) < 1e-15:
                break
        out.append((float(np.mod(x, 2 * np.pi)), float(fn.d(t_fixed, x))))
    return out


def _minimize_2d(fn, t, f, iters=200):
    """Damped Newton descent for a local minimum of f(theta, phi)."""
    x = np.array([t, f], dtype=float)
    val = fn.d(*x)
    for _ in range(iters):
        g = np.array([fn.d(*x, 1, 0), fn.d(*x, 0, 1)])
        H = np.array([[fn.d(*x, 2, 0), fn.d(*x, 1, 1)], [fn.d(*x, 1, 1), fn.d(*x, 0, 2)]])
        try:
            step = np.linalg.solve(H, g) if np.all(np.linalg.eigvalsh(H) > 0) else g / max(1.0, fn.scale)
        except np.linalg.LinAlgError:
            step = g / max(1.0, fn.scale)
        lam = 1.0
        while lam > 1e-12:
            y = x - lam * step
            vy = fn.d(*y)
            if vy <= val:
                break
            lam /= 2
        else:
            break
        if np.max(np.abs(x - y)) < 1e-15:
            x, val = y, vy
            break
        x, val = y, vy
    return float(np.mod(x[0], 2 * np.pi)), float(np.mod(x[1], 2 * np.pi)), float(val)


def _angle_dist(a, b):
    d = abs(a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


@dataclass(frozen=True)
class UnitZero:
    z0: complex
    w0: complex
    kind: str                 # "simple-pair" or "real-node"
    psi: float                # w0 = exp(2 pi i psi)
    tau_unit: complex         # tau for m / n = 1
    dz: complex               # derivative data used for tau (first or second order)
    dw: complex
    weight: int = 1           # multiplicity as a zero of P

    def tau(self, m, n):
        return self.tau_unit * (m / n)

    def to_dict(self):
        return {"z0": [self.z0.real, self.z0.imag], "w0": [self.w0.real, self.w0.imag],
                "type": self.kind, "psi": self.psi, "tau_per_aspect": self.tau_unit.imag,
                "dz": [self.dz.real, self.dz.imag], "dw": [self.dw.real, self.dw.imag]}


@dataclass(frozen=True)
class NodeReport:
    zeros: tuple
    source: str               # "P" or "Q"
    hessians: tuple = field(default=())

    @property
    def case(self):
        if not self.zeros:
            return "no-zeros"
        if any(z.kind == "simple-pair" for z in self.zeros):
            return "two-zeros"
        return "real-node"

    def to_dict(self):
        return {"case": self.case, "source": self.source, "zeros": [z.to_dict() for z in self.zeros]}


def _psi(w):
    return (cmath.phase(w) / (2 * math.pi)) % 1.0


def _snap_pm1(phi, tol=1e-5):
    if _angle_dist(phi, 0.0) < tol:
        return 0.0
    if _angle_dist(phi, math.pi) < tol:
        return math.pi
    return phi


def _safety_scan(fn, tol, grid):
    """Coarse torus scan; any zero with z != -1 is a violation."""
    t = 2 * np.pi * (np.arange(grid) + 0.5) / grid
    T, F = np.meshgrid(t, t, indexing="ij")
    V = fn.d(T, F)
    is_min = np.ones_like(V, dtype=bool)
    for dt in (-1, 0, 1):
        for df in (-1, 0, 1):
            if dt or df:
                is_min &= V <= np.roll(np.roll(V, dt, 0), df, 1)
    for i, j in zip(*np.nonzero(is_min)):
        th, ph, val = _minimize_2d(fn, T[i, j], F[i, j])
        # degenerate (quartic) nodes converge slowly, hence the wide margin
        if val < tol * fn.scale and _angle_dist(th, math.pi) > 1e-3:
            raise ConjectureViolation(
                f"zero of the spectral curve at z = {cmath.exp(1j * th):.6g}, "
                f"w = {cmath.exp(1j * ph):.6g}, off the line z = -1")


def _zeros_on_slice(fn, tol):
    found = []
    for phi, val in _minimize_1d(fn, math.pi):
        if val < tol * fn.scale:
            phi = _snap_pm1(phi)
            if all(_angle_dist(phi, q) > 1e-7 for q in found):
                found.append(phi)
    return sorted(found)


def unit_torus_zeros(P: BiLaurentPoly, Q: BiLaurentPoly | None = None, tol=ZERO_TOL, grid=64) -> NodeReport:
    """Locate and classify the zeros of the spectral curve on the unit torus.

    With Q given (bipartite graphs) the zeros of Q are analysed and tau uses
    first derivatives at simple zeros; otherwise P is used and every zero must
    be a positive node.
    """
    target = P if Q is None else Q * Q.inverted()
    fn = _TorusFn(target)
    _safety_scan(fn, tol, grid)
    phis = _zeros_on_slice(fn, tol)
    zeros = []
    hess = []
    if Q is None:
        for phi in phis:
            w0 = cmath.exp(1j * phi)
            H = np.array([[fn.d(math.pi, phi, 2, 0), fn.d(math.pi, phi, 1, 1)],
                          [fn.d(math.pi, phi, 1, 1), fn.d(math.pi, phi, 0, 2)]])
            hess.append(tuple(map(float, H.ravel())))
            s = fn.scale
            if H[0, 0] <= tol * s or H[1, 1] <= tol * s or np.linalg.det(H) <= (tol * s) ** 2:
                raise ConjectureViolation(f"zero at (-1, {w0:.6g}) is not a positive node")
            dz = complex(P.derivative("z", 2)(-1, w0))
            dw = complex(P.derivative("w", 2)(-1, w0))
            if abs(dw) == 0:
                raise ValueError("vanishing w-derivative at a node")
            kind = "real-node" if phi in (0.0, math.pi) else "simple-pair"
            tu = 1j * math.sqrt(abs(dz / dw))
            zeros.append(UnitZero(-1 + 0j, w0 if kind == "simple-pair" else complex(round(w0.real)), kind,
                                  _psi(w0), tu, dz, dw))
        return NodeReport(tuple(zeros), "P", tuple(hess))
    for phi in phis:
        w0 = cmath.exp(1j * phi)
        if phi in (0.0, math.pi):
            w0 = complex(round(w0.real))
            dz = complex(Q.derivative("z", 2)(-1, w0))
            dw = complex(Q.derivative("w", 2)(-1, w0))
            if abs(dw) == 0:
                raise ValueError("vanishing w-derivative at a node")
            zeros.append(UnitZero(-1 + 0j, w0, "real-node", _psi(w0), 1j * math.sqrt(abs(dz / dw)), dz, dw, 2))
        else:
            dz = complex(Q.derivative("z")(-1, w0))
            dw = complex(Q.derivative("w")(-1, w0))
            if abs(dw) == 0:
                raise ValueError("vanishing w-derivative at a zero")
            zeros.append(UnitZero(-1 + 0j, w0, "simple-pair", _psi(w0), 1j * abs(dz / dw), dz, dw))
    return NodeReport(tuple(zeros), "Q")


def tau(zero: UnitZero, m: int, n: int) -> complex:
    """tau parameter of a unit-torus zero for the m x n cover."""
    return zero.tau(m, n)
