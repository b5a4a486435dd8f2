"""Continuation in ``p`` for 2-D solutions, with peak-graded remeshing."""

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConvergenceError, GeometryError, InvalidParameterError, SolverOverflowError
from .mesh import generate_mesh
from .solver import interior_system, interpolate_field, newton_solve
from .test_function import bubble_guess

log = logging.getLogger(__name__)

# target element size at a peak, in units of the bubble scale mu
PEAK_RES = 0.35
# first p tried when no starting guess converges at the requested one
P_BOOT = 3.0
# max u below this counts as the trivial solution
TRIVIAL = 1e-6


@dataclass
class ContinuationFailure:
    """Why a continuation stopped: the last target ``p`` and the Newton history."""

    p_last_converged: float
    p_failed: float
    message: str
    history: list = field(default_factory=list)


def cutoff_radii(domain, seeds):
    """Cut-off radii ``r0`` with ``B_{2 r0}`` inside the domain and bubbles disjoint."""
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    if not np.all(domain.contains(seeds)):
        raise GeometryError("seed points must lie inside the domain")
    r = 0.45 * domain.boundary_distance(seeds)
    if len(seeds) > 1:
        d = np.linalg.norm(seeds[:, None] - seeds[None], axis=-1)
        np.fill_diagonal(d, np.inf)
        if np.min(d) == 0:
            raise GeometryError("seed points must be distinct")
        r = np.minimum(r, 0.24 * np.min(d, axis=1))
    return r


def local_peaks(mesh, u, seeds):
    """Node of maximal ``u`` in the Voronoi cell of each seed."""
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    owner = np.argmin(np.linalg.norm(mesh.nodes[:, None] - seeds[None], axis=-1), axis=1)
    out = []
    for k in range(len(seeds)):
        idx = np.flatnonzero(owner == k)
        out.append(mesh.nodes[idx[np.argmax(u[idx])]])
    return np.array(out)


def _graded_mesh(domain, h_target, centers, ratio):
    return generate_mesh(domain, h_target, (centers, ratio))


def initial_guess(mesh, p, theta, seeds, radii):
    u0 = bubble_guess(mesh.nodes, p, theta, seeds, radii)
    u0[mesh.boundary_mask] = 0.0
    v0 = bubble_guess(mesh.nodes, p + theta, theta, seeds, radii) if theta else u0.copy()
    v0[mesh.boundary_mask] = 0.0
    return u0, v0


def _nehari_scaled(system, mesh, u, v, p):
    # t (u, v) with t^2 ∫∇u·∇v = t^(p+1) ∫v^(p+1)
    A, m = system[0], system[1]
    I = mesh.interior
    num = float(u[I] @ (A @ v[I]))
    den = float(m @ np.maximum(v[I], 0.0) ** (p + 1))
    if not (num > 0 and den > 0):
        return u, v
    t = (num / den) ** (1.0 / (p - 1.0))
    return t * u, t * v


def _torsion(mesh, system):
    # -Δw = 1, w = 0 on the boundary
    w = np.zeros(mesh.n_nodes)
    w[mesh.interior] = system[2].solve(np.asarray(system[1], dtype=float))
    return w


def _nontrivial(sol):
    if not np.max(sol.u) > TRIVIAL:
        raise ConvergenceError(f"Newton converged to the trivial solution at p={sol.p:g}",
                               sol.history)
    return sol


def first_solve(mesh, p, theta, seeds, radii, tol=1e-10, max_iter=80, system=None):
    """Newton from a short list of starting guesses; the first nontrivial solution wins.

    The guesses are the cut-off bubbles, the same rescaled onto the Nehari
    manifold, and (one seed only) the rescaled torsion function.  At small
    ``p`` the bubbles are wider than their cut-off balls and the unscaled
    guess tends to collapse onto ``u = v = 0``.
    """
    if system is None:
        system = interior_system(mesh, factor=True)
    u0, v0 = initial_guess(mesh, p, theta, seeds, radii)
    guesses = [(u0, v0), _nehari_scaled(system, mesh, u0, v0, p)]
    if len(np.atleast_2d(seeds)) == 1:
        w = _torsion(mesh, system)
        guesses.append(_nehari_scaled(system, mesh, w, w, p))
    err = None
    for u, v in guesses:
        try:
            return _nontrivial(newton_solve(mesh, p, theta, u, v, tol=tol, max_iter=max_iter,
                                            system=system))
        except (ConvergenceError, SolverOverflowError) as exc:
            err = exc
    raise err


def _mu(sol):
    a = float(np.max(sol.u))
    return (sol.p * a ** (sol.p - 1.0)) ** -0.5


def _local_h(mesh, points):
    # largest element diameter among elements touching the nodes nearest to points
    idx = mesh.node_tree.query(points)[1]
    touching = np.isin(mesh.triangles, idx).any(axis=1)
    return float(np.max(mesh.element_diameters[touching]))


def _peak_ratio(sol, h_target, grading_ratio):
    # grade so the element size at a peak stays a fraction of the bubble scale
    return float(min(grading_ratio, max(PEAK_RES * _mu(sol) / h_target, 1e-4)))


def _predict(sol, prev, p_new):
    # secant extrapolation in p, clipped at zero; plain warm start otherwise
    if prev is None or prev.mesh is not sol.mesh:
        return sol.u, sol.v
    t = (p_new - sol.p) / (sol.p - prev.p)
    u = np.maximum(sol.u + t * (sol.u - prev.u), 0.0)
    v = np.maximum(sol.v + t * (sol.v - prev.v), 0.0)
    return u, v


def continuation_2d(domain, p_grid, theta, seed_points, h_target=0.05, grading_ratio=0.1,
                    tol=1e-10, regrade_every=3, initial_step=1.0, min_step=0.1, max_iter=80,
                    mesh=None):
    """Track a solution family over ``p_grid``.

    The first solve starts from cut-off bubbles at ``seed_points``; later
    ones warm-start from a secant prediction.  The ``p`` step starts at
    ``initial_step``, doubles after each success and halves on failure down
    to ``min_step``; grid points are always hit exactly.  Every ``regrade_every`` accepted steps the
    mesh is regenerated, graded at the current peaks, and the fields are
    interpolated onto it.

    Returns ``(solutions, failure)`` where ``failure`` is ``None`` or a
    :class:`ContinuationFailure`; the solutions reached so far are kept.
    """
    p_grid = [float(p) for p in p_grid]
    if not p_grid or any(b <= a for a, b in zip(p_grid, p_grid[1:])) or p_grid[0] <= 1:
        raise InvalidParameterError("p_grid must be increasing with entries > 1")
    if theta < 0:
        raise InvalidParameterError("theta must be nonnegative")
    seeds = np.atleast_2d(np.asarray(seed_points, dtype=float))
    radii = cutoff_radii(domain, seeds)
    if mesh is None:
        mesh = _graded_mesh(domain, h_target, seeds, grading_ratio)
    system = interior_system(mesh, factor=True)
    p0 = p_grid[0]
    try:
        sol = first_solve(mesh, p0, theta, seeds, radii, tol=tol, max_iter=max_iter, system=system)
    except (ConvergenceError, SolverOverflowError) as exc:
        if p0 <= P_BOOT:
            return [], ContinuationFailure(float("nan"), p0, str(exc), getattr(exc, "history", []))
        # no guess works at p0: start where the Nehari-scaled guess is reliable
        log.info("continuation: first solve failed at p=%g, bootstrapping from p=%g", p0, P_BOOT)
        boot, fail = continuation_2d(domain, [P_BOOT, p0], theta, seeds, h_target, grading_ratio,
                                     tol, regrade_every, initial_step, min_step, max_iter, mesh)
        if fail is not None:
            return [], ContinuationFailure(fail.p_last_converged, fail.p_failed,
                                           f"bootstrap from p={P_BOOT:g}: {fail.message}",
                                           fail.history)
        sol = boot[-1]
        system = interior_system(sol.mesh, factor=True)
    out = [sol]
    prev = None  # previous solution on the current mesh, for the secant predictor
    steps = 0
    dp = initial_step
    for target in p_grid[1:]:
        while sol.p < target:
            p_try = min(target, sol.p + dp)
            while True:
                u0, v0 = _predict(sol, prev, p_try)
                try:
                    new = _nontrivial(newton_solve(sol.mesh, p_try, theta, u0, v0, tol=tol,
                                                   max_iter=max_iter, system=system))
                    break
                except (ConvergenceError, SolverOverflowError) as exc:
                    step = dp = 0.5 * (p_try - sol.p)
                    log.info("continuation: failed at p=%g, halving step", p_try)
                    if step < min_step:
                        return out, ContinuationFailure(sol.p, p_try, str(exc),
                                                        getattr(exc, "history", []))
                    p_try = sol.p + step
            dp = 2.0 * (p_try - sol.p)
            prev, sol = sol, new
            steps += 1
            peaks = local_peaks(sol.mesh, sol.u, seeds)
            ratio = _peak_ratio(sol, h_target, grading_ratio)
            h_peak = _local_h(sol.mesh, peaks)
            if (regrade_every and steps % regrade_every == 0) or h_peak > PEAK_RES * _mu(sol) * 1.5:
                mesh = _graded_mesh(domain, h_target, peaks, ratio)
                u = interpolate_field(sol.mesh, sol.u, mesh.nodes)
                v = interpolate_field(sol.mesh, sol.v, mesh.nodes)
                u[mesh.boundary_mask] = v[mesh.boundary_mask] = 0.0
                system = interior_system(mesh, factor=True)
                prev = None
                try:
                    sol = _nontrivial(newton_solve(mesh, sol.p, theta, u, v, tol=tol,
                                                   max_iter=max_iter, system=system))
                except (ConvergenceError, SolverOverflowError) as exc:
                    return out, ContinuationFailure(sol.p, sol.p, f"re-solve after remeshing: {exc}",
                                                    getattr(exc, "history", []))
        out.append(sol)
    return out, None
