"""Green and Robin functions and the Kirchhoff-Routh stationarity system.

Sign convention: ``G(x, y) = -(1/2π) log|x - y| - H(x, y)`` with ``H`` the
harmonic function whose boundary values are ``-(1/2π) log|x - y|``, so that
``R(x) = H(x, x)``.  On the unit disk everything is closed form (method of
images); other domains use P1 Laplace solves for ``H(·, y)``, one per source
point, evaluated off the nodes by a moving-least-squares fit in harmonic
polynomials so the oracle is smooth enough for Newton.
"""

import json
import logging
import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .domains import DomainSpec
from .errors import (ConvergenceError, DomainError, GeometryError, InvalidParameterError,
                     NearBoundaryError, SingularEvaluationError, SingularJacobianError)

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
# relative step of the centred differences for ∇R and ∇_x H
H_R_REL = 1e-4
# MLS support radius in units of the mesh size
MLS_SUPPORT = 3.0


def _pt(x):
    x = np.asarray(x, dtype=float)
    if x.shape != (2,):
        raise InvalidParameterError(f"expected a planar point, got shape {x.shape}")
    return x


# ---------------------------------------------------------------- unit disk
def _check_disk(x, name):
    r = float(np.hypot(*x))
    if r > 1.0 + 1e-14:
        raise DomainError(f"{name}={tuple(x)} lies outside the closed unit disk")
    return r


def green_disk(x, y):
    """Closed-form Green function of the unit disk."""
    x, y = _pt(x), _pt(y)
    _check_disk(x, "x")
    _check_disk(y, "y")
    d = float(np.hypot(*(x - y)))
    if d == 0.0:
        raise SingularEvaluationError("G(x, y) is singular at x = y")
    return -np.log(d) / TWO_PI - _h_disk(x, y)


def _h_disk(x, y):
    # -(1/2π) log(|y| |x - y/|y|²|), written without the division so y = 0 is fine
    return -np.log(max(1.0 - 2.0 * (x @ y) + (x @ x) * (y @ y), 0.0)) / (2.0 * TWO_PI)


def _grad_h_disk(x, y):
    den = 1.0 - 2.0 * (x @ y) + (x @ x) * (y @ y)
    return -(-2.0 * y + 2.0 * (y @ y) * x) / (2.0 * TWO_PI * den)


# ---------------------------------------------------------------- MLS
_MLS_DEG = 7


def _harmonic_basis(xi):
    x, y = xi[..., 0], xi[..., 1]
    return np.stack([np.ones_like(x), x, y, x * x - y * y, x * y,
                     x ** 3 - 3 * x * y * y, 3 * x * x * y - y ** 3], axis=-1)


def mls_matrix(nodes, tree, points, radius):
    """Sparse rows mapping nodal data to MLS values at ``points``.

    Harmonic cubic basis, weight ``(1 - (d/ρ)²)^4``; the row for a point is
    ``e_0ᵀ (BᵀWB)^{-1} BᵀW``, so it reproduces harmonic cubics exactly.
    """
    points = np.atleast_2d(points)
    neigh = tree.query_ball_point(points, radius)
    rows, cols, vals = [], [], []
    for k, (x, idx) in enumerate(zip(points, neigh)):
        idx = np.asarray(idx, dtype=int)
        if len(idx) < _MLS_DEG + 3:
            raise GeometryError(f"too few mesh nodes near {tuple(x)} for the MLS fit")
        xi = (nodes[idx] - x) / radius
        w = np.clip(1.0 - np.sum(xi * xi, axis=1), 0.0, None) ** 4
        B = _harmonic_basis(xi)
        BW = B.T * w
        coef = np.linalg.solve(BW @ B, BW)[0]
        rows.append(np.full(len(idx), k))
        cols.append(idx)
        vals.append(coef)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(len(points), len(nodes)))


# ---------------------------------------------------------------- oracle
class GreenOracle:
    """Evaluator for ``G``, ``∇_x G``, ``H``, ``R`` and ``∇R`` on a domain.

    The unit disk uses closed forms unless ``numeric=True``.  The numeric
    path meshes the domain uniformly with size ``h`` and caches one harmonic
    extension per source point, keyed by the point rounded to 1e-12; the cache
    is guarded by a lock, everything else is read-only.
    """

    def __init__(self, domain, h=0.02, numeric=None, mesh=None):
        if isinstance(domain, dict):
            domain = DomainSpec.from_dict(domain)
        self.domain = domain
        self.numeric = (not domain.is_disk) if numeric is None else bool(numeric)
        self.h = float(h)
        self.h_R = H_R_REL * domain.diameter()
        self._mesh = mesh
        self._lock = threading.Lock()
        self._cache = {}
        self._setup_done = False

    # -- numeric machinery
    def _setup(self):
        with self._lock:
            if self._setup_done:
                return
            from .fem.mesh import generate_mesh
            from .fem.solver import assemble, factor_laplacian
            if self._mesh is None:
                self._mesh = generate_mesh(self.domain, self.h)
                if self.domain.is_disk:
                    # snap boundary nodes onto the circle so the only error is P1
                    m = self._mesh
                    b = m.boundary_mask
                    m.nodes[b] /= np.hypot(*m.nodes[b].T)[:, None]
                    for k in ("signed_areas", "gradients", "element_diameters", "node_tree",
                              "centroids", "_centroid_tree"):
                        m.__dict__.pop(k, None)
            m = self._mesh
            A, _ = assemble(m)
            I, B = m.interior, np.flatnonzero(m.boundary_mask)
            self._A_IB = A[I][:, B].tocsr()
            self._lu = factor_laplacian(A[I][:, I])
            self._I, self._B = I, B
            self._radius = MLS_SUPPORT * max(m.h_max, self.h)
            self._setup_done = True

    @property
    def mesh(self):
        if not self._setup_done:
            self._setup()
        return self._mesh

    @property
    def cache_size(self):
        return len(self._cache)

    def harmonic_part(self, y):
        """Nodal values of ``H(·, y)`` (numeric path), cached per source point."""
        y = _pt(y)
        key = tuple(int(k) for k in np.round(y * 1e12))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        mesh = self.mesh
        g = -np.log(np.hypot(*(mesh.nodes[self._B] - y).T)) / TWO_PI
        Hn = np.empty(mesh.n_nodes)
        Hn[self._B] = g
        Hn[self._I] = self._lu.solve(-(self._A_IB @ g))
        Hn.setflags(write=False)
        with self._lock:
            return self._cache.setdefault(key, Hn)

    def mls(self, points):
        return mls_matrix(self.mesh.nodes, self.mesh.node_tree, points, self._radius)

    def _check_interior(self, x, margin=0.0):
        if not self.domain.contains(x[None])[0]:
            raise DomainError(f"point {tuple(x)} is not inside the domain")
        if margin > 0 and self.domain.boundary_distance(x[None])[0] <= margin:
            raise NearBoundaryError(f"point {tuple(x)} is within {margin:g} of the boundary")

    # -- public evaluators
    def H(self, x, y):
        x, y = _pt(x), _pt(y)
        if not self.numeric:
            return float(_h_disk(x, y))
        return float((self.mls(x) @ self.harmonic_part(y))[0])

    def grad_H(self, x, y):
        x, y = _pt(x), _pt(y)
        if not self.numeric:
            return _grad_h_disk(x, y)
        e = self.h_R * np.eye(2)
        pts = np.array([x + e[0], x - e[0], x + e[1], x - e[1]])
        vals = self.mls(pts) @ self.harmonic_part(y)
        return np.array([vals[0] - vals[1], vals[2] - vals[3]]) / (2.0 * self.h_R)

    def G(self, x, y):
        x, y = _pt(x), _pt(y)
        d = float(np.hypot(*(x - y)))
        if d == 0.0:
            raise SingularEvaluationError("G(x, y) is singular at x = y")
        if not self.numeric:
            return green_disk(x, y)
        return -np.log(d) / TWO_PI - self.H(x, y)

    def grad_G(self, x, y):
        """``∇_x G(x, y)``."""
        x, y = _pt(x), _pt(y)
        d = x - y
        r2 = float(d @ d)
        if r2 == 0.0:
            raise SingularEvaluationError("∇G(x, y) is singular at x = y")
        return -d / (TWO_PI * r2) - self.grad_H(x, y)

    def R(self, x):
        x = _pt(x)
        if not self.numeric:
            return float(-np.log(1.0 - x @ x) / TWO_PI)
        return self.H(x, x)

    def grad_R(self, x):
        x = _pt(x)
        if not self.numeric:
            return x / (np.pi * (1.0 - x @ x))
        e = self.h_R * np.eye(2)
        return np.array([self.R(x + e[i]) - self.R(x - e[i]) for i in range(2)]) / (2.0 * self.h_R)


def robin(oracle, x):
    """``(R(x), ∇R(x))``; raises :class:`NearBoundaryError` within ``h_R`` of the boundary."""
    x = _pt(x)
    oracle._check_interior(x, oracle.h_R)
    return oracle.R(x), oracle.grad_R(x)


def green_numeric(oracle, y, x):
    """``(G(x, y), ∇_x G(x, y))`` from the mesh-based harmonic extension."""
    if not oracle.numeric:
        raise InvalidParameterError("green_numeric needs an oracle built with numeric=True")
    x, y = _pt(x), _pt(y)
    if np.array_equal(x, y):
        raise SingularEvaluationError("G(x, y) is singular at x = y")
    return oracle.G(x, y), oracle.grad_G(x, y)


def green_values(oracle, xs, y):
    """``G(x, y)`` for many ``x`` at once (one MLS matrix, one cached solve)."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    y = _pt(y)
    d = np.hypot(*(xs - y).T)
    if np.any(d == 0):
        raise SingularEvaluationError("G(x, y) is singular at x = y")
    if not oracle.numeric:
        return np.array([green_disk(x, y) for x in xs])
    return -np.log(d) / TWO_PI - oracle.mls(xs) @ oracle.harmonic_part(y)


# ---------------------------------------------------------------- Kirchhoff-Routh
def _as_points(points):
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.ndim != 2 or P.shape[1] != 2:
        raise InvalidParameterError("points must be an (k, 2) array")
    return P


def kirchhoff_routh(oracle, points):
    """``Φ = Σ R(x_i) - 2 Σ_{i<j} G(x_i, x_j)`` and its gradient blocks."""
    P = _as_points(points)
    k = len(P)
    for i in range(k):
        for j in range(i + 1, k):
            if np.array_equal(P[i], P[j]):
                raise SingularEvaluationError(f"points {i} and {j} coincide")
    phi = 0.0
    grad = np.zeros((k, 2))
    for i in range(k):
        phi += oracle.R(P[i])
        grad[i] += oracle.grad_R(P[i])
        for j in range(k):
            if j == i:
                continue
            if j > i:
                phi -= 2.0 * oracle.G(P[i], P[j])
            grad[i] -= 2.0 * oracle.grad_G(P[i], P[j])
    return float(phi), grad


@dataclass
class ConcentrationResult:
    """Outcome of the stationarity solve; ``converged`` False is a divergence report."""

    points: np.ndarray
    residual_norm: float
    converged: bool
    iterations: int
    history: list = field(default_factory=list)
    message: str = ""

    def to_json(self):
        return json.dumps({"points": self.points.tolist(), "residual_norm": self.residual_norm,
                           "converged": self.converged, "iterations": self.iterations,
                           "message": self.message}, indent=2)


def _admissible(oracle, P, margin):
    if not np.all(oracle.domain.contains(P)):
        return False
    if np.any(oracle.domain.boundary_distance(P) <= margin):
        return False
    if len(P) > 1:
        d = np.linalg.norm(P[:, None] - P[None], axis=-1)
        np.fill_diagonal(d, np.inf)
        if np.min(d) <= margin:
            return False
    return True


def solve_concentration_points(oracle, k, init, tol=1e-8, max_iter=50, fd_step=None,
                               max_halvings=30):
    """Damped Newton on ``∇R(x_i) - 2 Σ_{j≠i} ∇G(x_i, x_j) = 0``.

    The Jacobian is formed by centred finite differences of the gradient.
    Steps that leave the domain, approach the boundary or make points collide
    are halved.  Never raises on divergence: the returned
    :class:`ConcentrationResult` has ``converged=False`` and the history.
    """
    P = _as_points(init).copy()
    if len(P) != k:
        raise InvalidParameterError(f"init has {len(P)} points, expected k={k}")
    if not tol > 0:
        raise InvalidParameterError("tol must be positive")
    margin = 4.0 * oracle.h_R
    if not _admissible(oracle, P, margin):
        raise GeometryError("initial points must be distinct interior points")
    step = fd_step or 10.0 * oracle.h_R
    n = 2 * k

    def F(Q):
        return kirchhoff_routh(oracle, Q.reshape(k, 2))[1].ravel()

    x = P.ravel()
    g = F(x)
    history = []
    for it in range(max_iter + 1):
        res = float(np.max(np.abs(g)))
        history.append(res)
        log.debug("concentration it=%d res=%.3e", it, res)
        if res <= tol:
            return ConcentrationResult(x.reshape(k, 2), res, True, it, history, "converged")
        if it == max_iter:
            break
        J = np.empty((n, n))
        for c in range(n):
            e = np.zeros(n)
            e[c] = step
            if not (_admissible(oracle, (x + e).reshape(k, 2), margin)
                    and _admissible(oracle, (x - e).reshape(k, 2), margin)):
                return ConcentrationResult(x.reshape(k, 2), res, False, it, history,
                                           "finite-difference stencil left the domain")
            J[:, c] = (F(x + e) - F(x - e)) / (2.0 * step)
        try:
            if np.linalg.cond(J) > 1e13:
                raise SingularJacobianError("stationarity Jacobian is singular")
            dx = np.linalg.solve(J, -g)
        except (np.linalg.LinAlgError, SingularJacobianError) as exc:
            return ConcentrationResult(x.reshape(k, 2), res, False, it, history,
                                       f"singular Jacobian: {exc}")
        lam = 1.0
        for _ in range(max_halvings + 1):
            xc = x + lam * dx
            if _admissible(oracle, xc.reshape(k, 2), margin):
                gc = F(xc)
                if np.linalg.norm(gc) < np.linalg.norm(g):
                    break
            lam *= 0.5
        else:
            return ConcentrationResult(x.reshape(k, 2), res, False, it, history,
                                       "step rejected after the maximum number of halvings")
        x, g = xc, gc
    return ConcentrationResult(x.reshape(k, 2), history[-1], False, max_iter, history,
                               f"no convergence in {max_iter} iterations")


def grid_scan_pairs(oracle, lobe_a, lobe_b):
    """Brute-force minimiser of ``Φ(x_1, x_2)`` over ``lobe_a × lobe_b`` point sets.

    Returns ``(x_1, x_2, Φ_min, Φ_table)``.  Used as an independent oracle for
    the two-point stationarity solve.
    """
    A = _as_points(lobe_a)
    B = _as_points(lobe_b)
    RA = np.array([oracle.R(x) for x in A])
    RB = np.array([oracle.R(x) for x in B])
    if oracle.numeric:
        W = oracle.mls(B)
        Hab = np.column_stack([W @ oracle.harmonic_part(a) for a in A])  # H(b, a)
        d = np.linalg.norm(B[:, None] - A[None], axis=-1)
        Gba = -np.log(d) / TWO_PI - Hab
    else:
        Gba = np.array([[green_disk(b, a) for a in A] for b in B])
    table = RA[None, :] + RB[:, None] - 2.0 * Gba
    ib, ia = np.unravel_index(np.argmin(table), table.shape)
    return A[ia], B[ib], float(table[ib, ia]), table


def save_points_json(points, path):
    with open(path, "w") as fh:
        json.dump(np.asarray(points, dtype=float).tolist(), fh)
        fh.write("\n")


def raise_if_failed(result):
    """Turn a divergence report into a :class:`ConvergenceError`."""
    if not result.converged:
        raise ConvergenceError(result.message, result.history, result.points)
    return result
