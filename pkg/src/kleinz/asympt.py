"""Large-cover asymptotics: bulk free energy, finite-size corrections, ratios."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np

from . import specfun
from .exact import Branch, fisher_data, polys_for, pmn_value, _couplings
from .poly import BiLaurentPoly, extract_Q, extract_cover_Q
from .spectra import NodeReport, mod4_invariants, unit_torus_zeros

ASPECT_RANGE = (0.1, 10.0)
BETA_BRACKET = (1e-4, 10.0)


class AspectWarning(UserWarning):
    pass


def check_aspect(m, n):
    lo, hi = ASPECT_RANGE
    if not lo <= m / n <= hi:
        warnings.warn(f"aspect ratio m/n = {m / n:.3g} outside [{lo}, {hi}]; "
                      "the asymptotic expansion assumes it stays bounded", AspectWarning, stacklevel=3)


@dataclass(frozen=True)
class AsymptoticReport:
    f0: float
    fsc: float
    FSC: float
    case: str
    m: int
    n: int
    taus: tuple = ()
    psis: tuple = ()
    A: int | None = None
    Ap: int | None = None
    branch: str = Branch.STANDARD.value
    regime: str | None = None

    def log_z(self):
        """Leading two terms of log Z_mn."""
        return self.m * self.n * self.f0 / 2 + self.fsc

    def to_dict(self):
        d = asdict(self)
        d["taus"] = [t.imag for t in self.taus]
        return d


# ----------------------------------------------------------------------------
# bulk free energy

def _torus_values(P: BiLaurentPoly, grid, s, t):
    arr = np.zeros((grid, grid), dtype=complex)
    for (i, j), c in P.coeffs.items():
        arr[i % grid, j % grid] += c * np.exp(2j * np.pi * (i * s + j * t) / grid)
    return np.fft.ifft2(arr).real * grid * grid


def _grid_average(P, grid, tol):
    scale = sum(abs(c) for c in P.coeffs.values())
    total = 0.0
    for s, t in ((0.25, 0.25), (0.5, 0.5)):
        V = _torus_values(P, grid, s, t)
        if V.min() < -tol * scale:
            raise ValueError(f"P takes the negative value {V.min():.3g} on the unit torus")
        total += np.mean(np.log(np.maximum(np.abs(V), 1e-300)))
    return total / 4


def bulk_free_energy(P: BiLaurentPoly, grid: int = 1024, tol: float = 1e-9, richardson: bool = True) -> float:
    """Half the average of log P over the unit torus.

    Two offset midpoint grids are averaged; neither meets z = -1, where the
    nodes of the spectral curve sit.  The error is O(grid^-2) even with
    nodes, so one Richardson step against grid / 2 removes most of it.
    """
    if grid < 4 or grid % 4:
        raise ValueError("grid must be a positive multiple of 4")
    if not P.coeffs:
        raise ValueError("P vanishes identically")
    fine = float(_grid_average(P, grid, tol))
    if not richardson:
        return fine
    return (4 * fine - float(_grid_average(P, grid // 2, tol))) / 3


# ----------------------------------------------------------------------------
# finite-size corrections

def _theta_half_product(kind, zeros, m, n):
    out = 1.0
    for z in zeros:
        out *= specfun.theta_ratio(kind, m * z.psi, z.tau(m, n)) ** (z.weight / 2)
    return out


def fsc_general(report: NodeReport, mod4, m: int, n: int, branch=Branch.STANDARD, f0=float("nan")):
    """Finite-size correction when every unit-torus zero is a positive node at z = -1.

    A report read off Q (non-bipartite graph, bipartite orientation cover)
    is accepted too; a real node of Q is a double zero of P and enters the
    theta products with exponent 1 instead of 1/2.
    """
    check_aspect(m, n)
    A, Ap = mod4.A, mod4.Ap
    if m % 2 and Branch(branch) is Branch.SWAPPED:
        A, Ap = Ap, A
    zs = report.zeros
    t01 = _theta_half_product("01", zs, m, n)
    t00 = _theta_half_product("00", zs, m, n)
    if m % 2:
        FSC = abs(math.sin(A * math.pi / 4)) * t01 + abs(math.cos(Ap * math.pi / 4)) * t00
    else:
        FSC = abs(math.sin((A - Ap) * math.pi / 4)) * t01 + t00
    return AsymptoticReport(f0, math.log(FSC), FSC, f"{report.case}/m-{'odd' if m % 2 else 'even'}",
                            m, n, tuple(z.tau(m, n) for z in zs), tuple(z.psi for z in zs),
                            mod4.A, mod4.Ap, Branch(branch).value)


def fsc_bipartite(report: NodeReport, m: int, n: int, f0=float("nan")):
    """Finite-size correction of a bipartite graph from the zeros of Q."""
    check_aspect(m, n)
    if report.source != "Q":
        raise ValueError("fsc_bipartite needs the node report of Q")
    zs = report.zeros
    if not zs:
        FSC, taus, psis = 1.0, (), ()
    else:
        z = zs[0]
        t = z.tau(m, n)
        FSC = specfun.theta_ratio("00", m * z.psi, t) + specfun.theta_ratio("01", m * z.psi, t)
        taus, psis = (t,), (z.psi,)
    return AsymptoticReport(f0, math.log(FSC), FSC, report.case, m, n, taus, psis)


def node_report_for(g, data):
    """Unit-torus zeros, read off Q whenever the graph or its orientation cover is bipartite."""
    Q = extract_Q(g, data.K) if g.colors is not None else extract_cover_Q(g, data.K)
    return unit_torus_zeros(data.P, Q)


def asymptotic_report(g, m: int, n: int, K=None, grid=1024):
    """f0 and fsc for a Klein bottle graph, bipartite or not.

    n may be any positive real when only the shape tau = tau_unit * m / n
    matters (aspect sweeps); m enters through its parity and through m * psi.
    """
    data = polys_for(g, K)
    f0 = bulk_free_energy(data.P, grid)
    report = node_report_for(g, data)
    if g.colors is not None:
        return fsc_bipartite(report, m, n, f0)
    return fsc_general(report, mod4_invariants(data.R1, data.Rm1), m, n, data.branch, f0)


def square_lattice_fsc(parity: str, tau: complex) -> float:
    """Closed-form fsc of the M x N square lattice; parity is "even-even",
    "even-odd" or "odd-even" for (M, N) and tau = i M x / (2 N y)."""
    t00 = specfun.theta_ratio("00", 0.0, tau)
    if parity == "even-even":
        return math.log(t00)
    if parity == "even-odd":
        return math.log(t00 + specfun.theta_ratio("01", 0.0, tau))
    if parity == "odd-even":
        return 0.5 * math.log(2 * specfun.theta_ratio("01", 0.0, 2 * tau))
    raise ValueError(f"no closed form for parity {parity!r} (M and N both odd has odd vertex count)")


# ----------------------------------------------------------------------------
# Ising

def _fisher_sign(g, J, beta, K):
    d = fisher_data(g, J, beta, K)
    return d.R1(1j).real, d


def ising_critical_beta(g, couplings=None, tol: float = 1e-12, bracket=BETA_BRACKET) -> float:
    """Critical inverse temperature by bisection.

    P(-1, 1; beta) = R(i, 1; beta)^2 with R(i, 1) real, and R(i, 1) changes
    sign exactly at the critical point, which gives a genuine bracket.
    """
    J = _couplings(g, couplings)
    K = fisher_data(g, J, 1.0).K
    lo, hi = bracket
    slo, _ = _fisher_sign(g, J, lo, K)
    shi, _ = _fisher_sign(g, J, hi, K)
    if slo == 0:
        return lo
    if shi == 0:
        return hi
    if (slo > 0) == (shi > 0):
        raise ValueError(f"no sign change of P(-1, 1; beta) structure in ({lo}, {hi})")
    while hi - lo > tol * max(1.0, lo):
        mid = (lo + hi) / 2
        s, _ = _fisher_sign(g, J, mid, K)
        if s == 0:
            return mid
        if (s > 0) == (slo > 0):
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def critical_ising_fsc(tau: complex) -> float:
    return math.log(specfun.theta_ratio("00", 0.0, tau) ** 0.5
                    + (specfun.theta_ratio("01", 0.0, tau) / 2) ** 0.5)


def ising_bulk(g, couplings, beta, grid=1024, data=None):
    J = _couplings(g, couplings)
    data = data or fisher_data(g, J, beta)
    return 2 * sum(math.log(math.cosh(beta * j)) for j in J) + bulk_free_energy(data.P, grid)


def fsc_ising(g, couplings=None, beta: float = 1.0, m: int = 1, n: int = 1,
              beta_c: float | None = None, beta_tol: float = 1e-9, grid=1024):
    """Asymptotic report for the Ising model on the m x n cover."""
    check_aspect(m, n)
    J = _couplings(g, couplings)
    if beta_c is None:
        beta_c = ising_critical_beta(g, J)
    data = fisher_data(g, J, beta)
    f0 = ising_bulk(g, J, beta, grid, data)
    if abs(beta - beta_c) <= beta_tol * max(1.0, beta_c):
        report = unit_torus_zeros(data.P)
        node = [z for z in report.zeros if z.kind == "real-node" and z.w0 == 1]
        if not node:
            raise ValueError("no node at (-1, 1) at the critical point")
        t = node[0].tau(m, n)
        fsc = critical_ising_fsc(t)
        return AsymptoticReport(f0, fsc, math.exp(fsc), "real-node", m, n, (t,), (0.0,),
                                regime="critical")
    if beta < beta_c:
        return AsymptoticReport(f0, 0.0, 1.0, "no-zeros", m, n, regime="sub")
    return AsymptoticReport(f0, math.log(2), 2.0, "no-zeros", m, n, regime="super")


# ----------------------------------------------------------------------------
# ratios and the KSW expansion

def ratio_limit(case: str, tau: complex = 1j, nu: float = 0.0) -> float:
    """lim Z(Gamma_mn)^2 / Z(torus cover) for the known classes.

    case: "no-zeros", "two-zeros", "real-node" (bipartite), "square-even"
    (M and N even), "square-odd" (N even, M odd), "ising-off" and
    "ising-critical".
    """
    if case in ("no-zeros", "ising-off"):
        return 1.0
    if case == "square-odd":
        return 2.0
    t = {k: specfun.theta_ratio(k, nu, tau) for k in ("00", "01", "10", "11")}
    if case == "two-zeros":
        return 2 * (t["00"] + t["01"]) ** 2 / (t["00"] ** 2 + t["01"] ** 2 + t["10"] ** 2 + t["11"] ** 2)
    if case == "real-node":
        return 2 * (t["00"] + t["01"]) ** 2 / (t["00"] ** 2 + t["01"] ** 2 + t["10"] ** 2)
    if case == "square-even":
        return 2 * t["00"] ** 2 / (t["00"] ** 2 + t["01"] ** 2 + t["10"] ** 2)
    if case == "ising-critical":
        return ((2 * t["00"] + math.sqrt(2 * t["00"] * t["01"]) + t["01"])
                / (t["00"] + t["01"] + t["10"]))
    raise ValueError(f"unknown ratio class {case!r}")


def ksw_logpmn(P: BiLaurentPoly, report: NodeReport, m: int, n: int, zeta=1.0, xi=1.0, f0=None):
    """Leading terms of log P_mn(zeta, xi) from the unit-torus zeros."""
    if f0 is None:
        f0 = bulk_free_energy(P)
    total = 2 * m * n * f0
    for z in report.zeros:
        u = complex(zeta) / z.z0 ** n
        v = complex(xi) / z.w0 ** m
        total += 2 * z.weight * math.log(specfun.xi_at(u, v, z.tau(m, n)))
    return total


def exact_logpmn(P, m, n, zeta=1.0, xi=1.0):
    return pmn_value(P, m, n, zeta, xi).log_modulus
