"""Cut-off bubble test functions and their Nehari-normalized energy.

The bubble is ``φ_p(x) = √e (1 + z(x/ε_p)/p)`` with
``z(y) = -2 log(1 + e^{θ/2}|y|²/8)`` and ``ε_p^{-2} = p e^{(p-1)/2}``; it is
cut off by a quintic smoothstep ``η`` equal to 1 on ``B_r`` and 0 outside
``B_{2r}``.  Everything is radial, so the energy integrals are 1-D
quadratures in ``s = log|x|``.
"""

import math

import numpy as np
from scipy.integrate import quad

from ..errors import GeometryError, InvalidParameterError

HALF = 0.5  # log √e


def log_eps(p):
    return -0.5 * (math.log(p) + 0.5 * (p - 1.0))


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t ** 3 * (10.0 - 15.0 * t + 6.0 * t * t)


def _smoothstep_d1(t):
    t = np.clip(t, 0.0, 1.0)
    return 30.0 * t * t * (1.0 - t) ** 2


def _smoothstep_d2(t):
    t = np.clip(t, 0.0, 1.0)
    return 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)


def cutoff(rho, r):
    """``η(ρ)`` and its radial first and second derivatives."""
    t = (rho - r) / r
    return 1.0 - _smoothstep(t), -_smoothstep_d1(t) / r, -_smoothstep_d2(t) / r ** 2


def bubble(rho, p, theta):
    """``φ_p`` and its radial derivatives at radius ``rho`` (arrays allowed)."""
    c = math.exp(theta / 2.0) / 8.0
    leps = log_eps(p)
    y2 = np.exp(2.0 * (np.log(rho) - leps)) if np.ndim(rho) else math.exp(2.0 * (math.log(rho) - leps))
    den = 1.0 + c * y2
    se = math.sqrt(math.e)
    phi = se * (1.0 - 2.0 * np.log1p(c * y2) / p)
    # d/dρ z(ρ/ε) = -4 c ρ / (ε² (1 + c y²))
    dphi = se * (-4.0 * c * rho / (den * math.exp(2 * leps))) / p
    lap = -se * 8.0 * c / (den * den * math.exp(2 * leps)) / p
    return phi, dphi, lap


def bubble_guess(points, p, theta, seeds, radii, amplitude=1.0):
    """Superposition of cut-off bubbles centred at ``seeds`` evaluated at ``points``."""
    points = np.atleast_2d(points)
    out = np.zeros(len(points))
    for x0, r0 in zip(np.atleast_2d(seeds), np.atleast_1d(radii)):
        rho = np.linalg.norm(points - x0, axis=1)
        inside = rho < 2 * r0
        rr = np.maximum(rho[inside], 1e-300)
        phi, _, _ = bubble(rr, p, theta)
        eta, _, _ = cutoff(rr, r0)
        out[inside] += amplitude * eta * np.maximum(phi, 0.0)
    return out


def _log_abs_lap_inner(s, p, theta):
    # log|Δφ_p| at |x| = e^s, stable for |x| << ε_p and |x| >> ε_p
    c = math.exp(theta / 2.0) / 8.0
    leps = log_eps(p)
    y2 = math.exp(min(2.0 * (s - leps), 700.0))
    return HALF - math.log(p) + math.log(8.0 * c) - 2.0 * leps - 2.0 * math.log1p(c * y2)


def test_function_energy(p, theta, domain, center=(0.0, 0.0), r=0.3):
    """Energy of the Nehari-normalized test function ``t_p ψ_p``.

    Returns ``int_lap = ∫|Δψ_p|^{1+1/p}``, ``int_power = ∫|ψ_p|^{q+1}``,
    ``t_p`` solving ``t^{1+1/p} int_lap = t^{q+1} int_power`` and
    ``scaled_energy = p t_p^{1+1/p} int_lap``, plus the split of ``int_lap``
    into the plateau ``|x| < r`` and the cut-off annulus.
    """
    if p < 2:
        raise InvalidParameterError("test function energy needs p >= 2")
    if theta < 0 or not r > 0:
        raise InvalidParameterError("need theta >= 0 and r > 0")
    center = np.asarray(center, dtype=float)
    if not domain.contains(center[None])[0] or domain.boundary_distance(center[None])[0] < 2 * r:
        raise GeometryError(f"B_2r(center) with r={r} is not contained in the domain")
    q = p + theta
    e1 = 1.0 + 1.0 / p
    leps = log_eps(p)
    log2pi = math.log(2.0 * math.pi)
    s_lo = leps - 40.0
    lr, l2r = math.log(r), math.log(2.0 * r)
    breaks = [leps + k for k in range(-8, 12, 2) if leps + k < lr]

    def f_inner(s):
        return math.exp(e1 * _log_abs_lap_inner(s, p, theta) + 2.0 * s + log2pi)

    def f_annulus(s):
        rho = math.exp(s)
        phi, dphi, lap = bubble(rho, p, theta)
        eta, deta, d2eta = cutoff(rho, r)
        lap_eta = d2eta + deta / rho
        val = eta * lap + 2.0 * dphi * deta + phi * lap_eta
        return abs(val) ** e1 * 2.0 * math.pi * rho * rho

    def f_power(s):
        rho = math.exp(s)
        phi, _, _ = bubble(rho, p, theta)
        eta = cutoff(rho, r)[0] if s > lr else 1.0
        val = abs(phi * eta)
        if val == 0.0:
            return 0.0
        return math.exp((q + 1.0) * math.log(val) + 2.0 * s + log2pi)

    opts = dict(epsabs=0.0, epsrel=1e-12, limit=400)
    inner = quad(f_inner, s_lo, lr, points=breaks, **opts)[0]
    annulus = quad(f_annulus, lr, l2r, **opts)[0]
    power = (quad(f_power, s_lo, lr, points=breaks, **opts)[0]
             + quad(f_power, lr, l2r, **opts)[0])
    int_lap = inner + annulus
    t_p = (int_lap / power) ** (p / (p * q - 1.0))
    return {
        "p": float(p),
        "theta": float(theta),
        "r": float(r),
        "int_lap": float(int_lap),
        "int_lap_inner": float(inner),
        "int_lap_annulus": float(annulus),
        "int_power": float(power),
        "t_p": float(t_p),
        "scaled_energy": float(p * t_p ** e1 * int_lap),
    }
