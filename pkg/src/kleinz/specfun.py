"""Jacobi theta functions, Dedekind eta and the Xi factor of the torus expansion.

Only the regime needed here is supported: real (or mildly complex) first
argument and a modular parameter in the upper half plane.  For very flat
parameters (Im tau < 0.05) the modular transformation tau -> -1/tau is
applied once before summing.
"""

import cmath
import math

SMALL_TAU = 0.05
_EPS = 1e-17


def _check_tau(tau):
    tau = complex(tau)
    if not tau.imag > 0:
        raise ValueError(f"theta functions need Im(tau) > 0, got {tau}")
    return tau


def _theta_series(nu, tau):
    # sum over j of exp(pi i (j^2 tau + 2 j nu)), summed outward from the
    # index with the largest term so shifted arguments converge just as fast
    center = int(round(-nu.imag / tau.imag)) if tau.imag > 0 else 0

    def term(j):
        return cmath.exp(1j * math.pi * (j * j * tau + 2 * j * nu))

    total = term(center)
    scale = abs(total)
    k = 1
    while True:
        t_hi = term(center + k)
        t_lo = term(center - k)
        total += t_hi + t_lo
        scale = max(scale, abs(total))
        if max(abs(t_hi), abs(t_lo)) < _EPS * scale and k > 2:
            break
        k += 1
        if k > 100000:
            raise RuntimeError("theta series failed to converge")
    return total


def theta(nu, tau):
    """Return theta(nu | tau) = sum_j exp(pi i (j^2 tau + 2 j nu))."""
    tau = _check_tau(tau)
    nu = complex(nu)
    if tau.imag < SMALL_TAU:
        # theta(nu|tau) = (-i tau)^(-1/2) exp(-pi i nu^2 / tau) theta(nu/tau | -1/tau)
        pref = cmath.sqrt(-1j * tau) ** -1 * cmath.exp(-1j * math.pi * nu * nu / tau)
        return pref * _theta_series(nu / tau, -1.0 / tau)
    return _theta_series(nu, tau)


def theta00(nu, tau):
    return theta(nu, tau)


def theta01(nu, tau):
    return theta(complex(nu) + 0.5, tau)


def theta10(nu, tau):
    tau = _check_tau(tau)
    nu = complex(nu)
    return cmath.exp(1j * math.pi * (nu + tau / 4)) * theta(nu + tau / 2, tau)


def theta11(nu, tau):
    tau = _check_tau(tau)
    nu = complex(nu)
    return 1j * cmath.exp(1j * math.pi * (nu + tau / 4)) * theta(nu + tau / 2 + 0.5, tau)


def _eta_product(tau):
    q = cmath.exp(2j * math.pi * tau)
    prod = 1.0 + 0j
    qj = q
    while abs(qj) >= _EPS:
        prod *= 1.0 - qj
        qj *= q
    return cmath.exp(1j * math.pi * tau / 12) * prod


def eta(tau):
    """Dedekind eta function."""
    tau = _check_tau(tau)
    if tau.imag < SMALL_TAU:
        # eta(-1/tau) = sqrt(-i tau) eta(tau)
        return _eta_product(-1.0 / tau) / cmath.sqrt(-1j * tau)
    return _eta_product(tau)


def xi(phi, psi, tau):
    """Xi(-exp(2 pi i phi), -exp(2 pi i psi) | tau) as a positive real."""
    tau = _check_tau(tau)
    val = theta(phi * tau - psi, tau) * cmath.exp(1j * math.pi * tau * phi * phi) / eta(tau)
    return abs(val)


def xi_at(zeta, xi_, tau):
    """Xi evaluated at two unit complex numbers (zeta, xi)."""
    phi = cmath.phase(-complex(zeta)) / (2 * math.pi)
    psi = cmath.phase(-complex(xi_)) / (2 * math.pi)
    return xi(phi, psi, tau)


def theta_ratio(kind, nu, tau):
    """Real ratio theta_kind(nu|tau) / eta(tau) for purely imaginary tau."""
    fn = {"00": theta00, "01": theta01, "10": theta10, "11": theta11}[kind]
    return (fn(nu, tau) / eta(tau)).real
