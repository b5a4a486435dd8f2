"""Radial Lane-Emden system on the unit disk by shooting in s = log r.

With ``s = log r`` the radial Laplacian becomes ``e^{-2s} d^2/ds^2``, so the
system ``-Δu = v^p, -Δv = u^q`` reads::

    u_ss = -e^{2s} v_+^p,    v_ss = -e^{2s} u_+^q,

integrated outward from ``s_min`` (far below the bubble scale) to ``s = 0``
where the Dirichlet condition ``u = v = 0`` must hold.  The shooting unknowns
are the central values ``a = u(0)`` and ``b = v(0)``.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson, solve_ivp

from .errors import (ConvergenceError, InvalidParameterError,
                     SingularJacobianError, SolverOverflowError,
                     StiffnessError)

log = logging.getLogger(__name__)

DEFAULT_RTOL = 1e-13
DEFAULT_ATOL = 1e-15
FD_REL_STEP = 1e-7
MAX_HALVINGS = 30
# number of e-foldings below the estimated bubble scale where integration starts
SMIN_OFFSET = 10.0
N_GRID = 20001


@dataclass
class RadialSolution:
    """Radial solution pair on the log-radius grid ``s in [s_min, 0]``."""

    p: float
    theta: float
    a: float
    b: float
    s: np.ndarray
    u: np.ndarray
    v: np.ndarray
    u_s: np.ndarray
    v_s: np.ndarray
    bc_residual: tuple
    s_min: float
    iterations: int = 0
    history: list = field(default_factory=list)
    dense: object = field(default=None, repr=False, compare=False)

    @property
    def q(self):
        return self.p + self.theta

    @property
    def r(self):
        return np.exp(self.s)

    def evaluate(self, r):
        """Return ``(u, v, u_r, v_r)`` at radii ``r`` (array-like, ``0 <= r <= 1``).

        Uses the integrator's dense output when available, otherwise cubic
        interpolation on the stored grid.  Radii below ``e^{s_min}`` get the
        inner expansion.
        """
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r < 0) or np.any(r > 1 + 1e-12):
            raise InvalidParameterError("radii must lie in [0, 1]")
        out = np.empty((4, r.size))
        inner = r <= math.exp(self.s_min)
        rr = np.where(inner, 1.0, np.minimum(r, 1.0))
        s = np.log(rr)
        if self.dense is not None:
            y = self.dense(s)
        else:
            y = np.vstack([np.interp(s, self.s, f) for f in (self.u, self.u_s, self.v, self.v_s)])
        out[0], out[2] = y[0], y[2]
        with np.errstate(divide="ignore", invalid="ignore"):
            out[1] = np.where(r > 0, y[1] / rr, 0.0)
            out[3] = np.where(r > 0, y[3] / rr, 0.0)
        if np.any(inner):
            ri = r[inner]
            bp = math.exp(self.p * math.log(self.b))
            aq = math.exp(self.q * math.log(self.a))
            out[0, inner] = self.a - bp * ri ** 2 / 4
            out[2, inner] = self.b - aq * ri ** 2 / 4
            out[1, inner] = -bp * ri / 2
            out[3, inner] = -aq * ri / 2
        return out


def _rhs(p, q):
    exp, logf, isfinite = math.exp, math.log, math.isfinite

    def f(s, y):
        u, us, v, vs = y
        try:
            fv = exp(2.0 * s + p * logf(v)) if v > 0.0 else 0.0
            fu = exp(2.0 * s + q * logf(u)) if u > 0.0 else 0.0
        except OverflowError:
            fv = fu = math.inf
        if not (isfinite(fv) and isfinite(fu)):
            raise SolverOverflowError(f"source term overflow at s={s:.6g}")
        return [us, -fv, vs, -fu]

    return f


def auto_smin(p, a):
    """``log(mu_hat) - 10`` with ``mu_hat^-2 = p a^(p-1)``, capped at -4."""
    log_mu = -0.5 * (math.log(p) + (p - 1.0) * math.log(a))
    return min(log_mu - SMIN_OFFSET, -4.0)


def _check_params(p, theta):
    if not p > 1:
        raise InvalidParameterError(f"p must exceed 1, got {p}")
    if theta < 0:
        raise InvalidParameterError(f"theta must be nonnegative, got {theta}")


def initial_state(p, q, a, b, s_min):
    e2 = 2.0 * s_min
    bp = math.exp(p * math.log(b) + e2)
    aq = math.exp(q * math.log(a) + e2)
    return [a - bp / 4, -bp / 2, b - aq / 4, -aq / 2]


def integrate_shoot(p, theta, a, b, s_min, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                    dense=False, n_grid=N_GRID):
    """Integrate the radial IVP from ``s_min`` to 0.

    Returns ``(u1, v1, trajectory)`` where ``u1, v1`` are the values at r = 1.
    ``trajectory`` is a :class:`RadialSolution` (with ``bc_residual`` set) when
    ``dense`` is true, else ``None``.
    """
    _check_params(p, theta)
    if not (a > 0 and b > 0):
        raise InvalidParameterError("shooting values a, b must be positive")
    if not s_min < -3:
        raise InvalidParameterError(f"s_min must be below -3, got {s_min}")
    q = p + theta
    y0 = initial_state(p, q, a, b, s_min)
    sol = solve_ivp(_rhs(p, q), (s_min, 0.0), y0, method="DOP853", rtol=rtol,
                    atol=atol, dense_output=dense)
    if sol.status != 0:
        raise StiffnessError(f"integration failed: {sol.message}", s=float(sol.t[-1]))
    yend = sol.y[:, -1]
    if not np.all(np.isfinite(yend)):
        raise SolverOverflowError("non-finite state at r = 1")
    u1, v1 = float(yend[0]), float(yend[2])
    if not dense:
        return u1, v1, None
    s = np.linspace(s_min, 0.0, n_grid)
    y = sol.sol(s)
    traj = RadialSolution(p=p, theta=theta, a=a, b=b, s=s, u=y[0], v=y[2],
                          u_s=y[1], v_s=y[3], bc_residual=(abs(u1), abs(v1)),
                          s_min=s_min, dense=sol.sol)
    return u1, v1, traj


def solve_radial(p, theta=0.0, init=(2.0, 2.0), tol=1e-10, rtol=DEFAULT_RTOL,
                 max_iter=60, n_grid=N_GRID):
    """Damped Newton on ``(a, b) -> (u(1), v(1))``.

    The Jacobian is built from forward differences with relative step 1e-7;
    each step is halved (at most 30 times) until the boundary residual
    decreases and both unknowns stay positive.
    """
    _check_params(p, theta)
    if tol <= 0:
        raise InvalidParameterError("tol must be positive")
    x = np.array(init, dtype=float)
    if np.any(x <= 0):
        raise InvalidParameterError("initial (a, b) must be positive")
    history = []

    def shoot(z, smin):
        u1, v1, _ = integrate_shoot(p, theta, z[0], z[1], smin, rtol=rtol)
        return np.array([u1, v1])

    s_min = auto_smin(p, x[0])
    F = shoot(x, s_min)
    for it in range(max_iter):
        res = float(np.max(np.abs(F)))
        history.append(res)
        log.debug("radial p=%g theta=%g it=%d a=%.15g b=%.15g res=%.3e", p, theta, it, x[0], x[1], res)
        if res <= tol:
            break
        J = np.empty((2, 2))
        for j in range(2):
            dz = np.zeros(2)
            dz[j] = FD_REL_STEP * x[j]
            J[:, j] = (shoot(x + dz, s_min) - F) / dz[j]
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobianError("singular shooting Jacobian", history, x.copy(),
                                        {"jacobian": J.tolist()}) from exc
        if not np.all(np.isfinite(step)):
            raise SingularJacobianError("non-finite Newton step", history, x.copy(),
                                        {"jacobian": J.tolist(), "cond": float(np.linalg.cond(J))})
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            cand = x + lam * step
            if np.all(cand > 0):
                smin_c = auto_smin(p, cand[0])
                try:
                    Fc = shoot(cand, smin_c)
                except (SolverOverflowError, StiffnessError):
                    Fc = None
                if Fc is not None and np.max(np.abs(Fc)) < res:
                    break
            lam *= 0.5
        else:
            raise ConvergenceError(f"line search failed at p={p}", history, x.copy())
        x, F, s_min = cand, Fc, smin_c
    else:
        raise ConvergenceError(f"Newton did not converge at p={p} after {max_iter} iterations",
                               history, x.copy())
    _, _, traj = integrate_shoot(p, theta, x[0], x[1], s_min, rtol=rtol, dense=True, n_grid=n_grid)
    traj.iterations = len(history) - 1
    traj.history = history
    return traj


def continuation_radial(p_grid, theta=0.0, tol=1e-10, init=(2.0, 2.0), min_step=1e-3,
                        rtol=DEFAULT_RTOL, n_grid=N_GRID):
    """Solve along an increasing ``p_grid`` warm-starting each p from the previous one.

    On failure the p-step is halved (down to ``min_step``) by inserting
    intermediate solves that are not returned.  Returns ``(solutions, failure)``
    where ``failure`` is ``None`` or a dict describing where continuation stopped.
    """
    p_grid = [float(p) for p in p_grid]
    if not p_grid:
        raise InvalidParameterError("empty p_grid")
    if any(b <= a for a, b in zip(p_grid, p_grid[1:])):
        raise InvalidParameterError("p_grid must be strictly increasing")
    if p_grid[0] > 10:
        raise InvalidParameterError("first p in the continuation grid must be <= 10")
    out = []
    p_prev, ab = None, tuple(init)
    for target in p_grid:
        if p_prev is None:
            try:
                sol = solve_radial(target, theta, ab, tol, rtol=rtol, n_grid=n_grid)
            except (ConvergenceError, SolverOverflowError, StiffnessError) as exc:
                return out, {"p": target, "error": str(exc)}
            out.append(sol)
            p_prev, ab = target, (sol.a, sol.b)
            continue
        p_cur = p_prev
        step = target - p_prev
        while p_cur < target:
            p_try = min(p_cur + step, target)
            try:
                sol = solve_radial(p_try, theta, _predict(ab, p_cur, p_try), tol,
                                   rtol=rtol, n_grid=n_grid)
            except (ConvergenceError, SolverOverflowError, StiffnessError) as exc:
                step *= 0.5
                log.info("continuation: halving p-step to %g at p=%g", step, p_cur)
                if step < min_step:
                    return out, {"p": p_try, "error": str(exc)}
                continue
            p_cur, ab = p_try, (sol.a, sol.b)
        out.append(sol)
        p_prev = target
    return out, None


def _predict(ab, p_old, p_new):
    """Warm start for p_new from (a, b) at p_old.

    Keeps ``a`` and rescales the gap ``b - a`` like ``1/p``, matching the
    leading-order behaviour of the peak gap.
    """
    a, b = ab
    return (a, a + (b - a) * p_old / p_new)


def _radial_integral(sol, f):
    """``2π ∫_0^1 f r dr`` as ``2π ∫ f e^{2s} ds`` on the trajectory grid.

    The disk ``r < e^{s_min}`` is added with the value of ``f`` at the first
    grid point.
    """
    w = np.exp(2.0 * sol.s)
    inner = 0.5 * f[0] * w[0]
    return 2.0 * np.pi * (simpson(f * w, x=sol.s) + inner)


def _pos_pow(x, k):
    x = np.maximum(x, 0.0)
    with np.errstate(divide="ignore"):
        return np.where(x > 0, np.exp(k * np.log(np.where(x > 0, x, 1.0))), 0.0)


def radial_diagnostics(sol, probe_radii=()):
    """Energy, mass and scale diagnostics of a converged radial solution.

    All area integrals are Simpson quadratures in ``s``.  Gradient integrals
    use ``∫ u_r v_r r dr = ∫ u_s v_s ds``.
    """
    p, q = sol.p, sol.q
    u, v = sol.u, sol.v
    integ = lambda f: _radial_integral(sol, f)
    int_vp1 = integ(_pos_pow(v, p + 1))
    int_uq1 = integ(_pos_pow(u, q + 1))
    int_vp = integ(_pos_pow(v, p))
    int_uq = integ(_pos_pow(u, q))
    # gradient terms: the e^{2s} weight cancels against 1/r^2
    gint = lambda f: 2.0 * np.pi * simpson(f, x=sol.s)
    int_guv = gint(sol.u_s * sol.v_s)
    int_guu = gint(sol.u_s ** 2)
    int_gvv = gint(sol.v_s ** 2)
    L_p = max(p * int_uq / (np.e * int_vp ** (1.0 / p)),
              q * int_vp / (np.e * int_uq ** (1.0 / q)))
    I_p = int_guv - int_vp1 / (p + 1) - int_uq1 / (q + 1)
    mu = (p * sol.a ** (p - 1)) ** -0.5
    mu_tilde = (p * sol.b ** (p - 1)) ** -0.5
    rec = {
        "p": float(p),
        "theta": float(sol.theta),
        "a": float(sol.a),
        "b": float(sol.b),
        "energy_v": float(p * int_vp1),
        "energy_u": float(p * int_uq1),
        "energy_uv": float(p * int_guv),
        "energy_grad_u": float(p * int_guu),
        "energy_grad_v": float(p * int_gvv),
        "mass_u": float(p * int_uq),
        "mass_v": float(p * int_vp),
        "L_p": float(L_p),
        "I_p": float(I_p),
        "mu": float(mu),
        "mu_tilde": float(mu_tilde),
        "scaled_gap": float(p * (sol.b - sol.a)),
        "bc_residual": [float(x) for x in sol.bc_residual],
        # flux identity: ∫ v^p = -2π u_r(1)
        "mass_v_flux": float(-2.0 * np.pi * p * sol.u_s[-1]),
        "mass_u_flux": float(-2.0 * np.pi * p * sol.v_s[-1]),
        "probes": [],
    }
    if len(probe_radii):
        vals = sol.evaluate(np.asarray(probe_radii, dtype=float))
        for r, uu, vv in zip(probe_radii, vals[0], vals[2]):
            rec["probes"].append({"r": float(r), "pu": float(p * uu), "pv": float(p * vv)})
    return rec
