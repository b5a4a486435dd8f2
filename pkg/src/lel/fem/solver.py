"""P1 finite elements for the Lane-Emden system ``-Δu = v^p, -Δv = u^q``."""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, gmres, splu

from ..errors import ConvergenceError, InvalidParameterError, SingularJacobianError

log = logging.getLogger(__name__)

LINEAR_RTOL = 1e-10


def assemble(mesh):
    """Global P1 stiffness matrix (CSR, all nodes) and lumped mass diagonal.

    Dirichlet conditions are imposed by the callers, which restrict to
    ``mesh.interior``.
    """
    g = mesh.gradients
    area = mesh.areas
    Ke = np.einsum("eik,ejk->eij", g, g) * area[:, None, None]
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_nodes
    A = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    mass = np.bincount(t.ravel(), weights=np.repeat(area / 3.0, 3), minlength=n)
    return A, mass


def interior_system(mesh, A=None, mass=None, factor=False):
    """Interior stiffness block and mass; with ``factor`` also its LU factors."""
    if A is None:
        A, mass = assemble(mesh)
    I = mesh.interior
    A_ii = A[I][:, I].tocsc()
    if factor:
        return A_ii, mass[I], factor_laplacian(A_ii)
    return A_ii, mass[I]


@dataclass(eq=False)
class SolutionPair:
    mesh: object
    p: float
    theta: float
    u: np.ndarray
    v: np.ndarray
    newton_residual: float
    history: list = field(default_factory=list)
    energy_cache: dict = None

    @property
    def q(self):
        return self.p + self.theta

    def with_fields(self, u, v):
        return SolutionPair(self.mesh, self.p, self.theta, u, v, self.newton_residual, list(self.history))


def _pos_pow(x, k):
    xp = np.maximum(x, 0.0)
    return xp ** k


def lane_emden_residual(A_ii, m_i, u_i, v_i, p, q):
    return np.concatenate([A_ii @ u_i - m_i * _pos_pow(v_i, p),
                           A_ii @ v_i - m_i * _pos_pow(u_i, q)])


def factor_laplacian(A_ii):
    try:
        return splu(A_ii.tocsc(), permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SingularJacobianError(f"stiffness factorization failed: {exc}") from exc


def _solve_direct(J, rhs):
    try:
        lu = splu(J.tocsc(), permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SingularJacobianError(f"Jacobian factorization failed: {exc}") from exc
    x = lu.solve(rhs)
    # one step of iterative refinement
    x += lu.solve(rhs - J @ x)
    return x


def _solve_linear(J, rhs, lap_lu=None):
    """Solve the block Newton system to relative residual ``LINEAR_RTOL``.

    With a factorized stiffness matrix the system is solved by GMRES
    preconditioned with ``diag(A^{-1}, A^{-1})``; the preconditioned operator
    is identity plus a low-rank-ish coupling, so few iterations are needed.
    Falls back to a direct factorization of the whole block matrix.
    """
    nb = np.linalg.norm(rhs)
    if nb == 0:
        return np.zeros_like(rhs)
    x = None
    if lap_lu is not None:
        n = len(rhs) // 2
        P = LinearOperator(J.shape, matvec=lambda z: np.concatenate([lap_lu.solve(z[:n]),
                                                                     lap_lu.solve(z[n:])]))
        x, info = gmres(J, rhs, M=P, rtol=0.1 * LINEAR_RTOL, atol=0.0, restart=150, maxiter=4)
        if info != 0 or np.linalg.norm(rhs - J @ x) > LINEAR_RTOL * nb:
            log.debug("gmres did not reach tolerance (info=%d); direct fallback", info)
            x = None
    if x is None:
        x = _solve_direct(J, rhs)
        if np.linalg.norm(rhs - J @ x) > LINEAR_RTOL * nb:
            log.warning("linear solve relative residual %.2e", np.linalg.norm(rhs - J @ x) / nb)
    if not np.all(np.isfinite(x)):
        raise SingularJacobianError("non-finite Newton update")
    return x


def newton_solve(mesh, p, theta, u0, v0, tol=1e-10, max_iter=80, forcing=None,
                 system=None):
    """Damped Newton on the discrete system with lumped mass.

    ``forcing`` optionally adds ``(f_u, f_v)`` nodal loads (already
    mass-weighted) to the right-hand side, used for manufactured solutions.
    Returns a :class:`SolutionPair`; raises :class:`ConvergenceError` with the
    residual history on divergence.
    """
    if not p > 1 or theta < 0:
        raise InvalidParameterError("need p > 1 and theta >= 0")
    if not tol > 0:
        raise InvalidParameterError("tol must be positive")
    q = p + theta
    u0 = np.asarray(u0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    bm = mesh.boundary_mask
    if np.any(u0[bm] != 0) or np.any(v0[bm] != 0):
        raise InvalidParameterError("initial fields must vanish on the boundary")
    if system is None:
        system = interior_system(mesh)
    A_ii, m_i = system[:2]
    lap_lu = system[2] if len(system) > 2 else factor_laplacian(A_ii)
    I = mesh.interior
    n = len(I)
    x = np.concatenate([u0[I], v0[I]])
    fu = fv = None
    if forcing is not None:
        fu, fv = (np.asarray(f, dtype=float)[I] for f in forcing)

    def residual(z):
        F = lane_emden_residual(A_ii, m_i, z[:n], z[n:], p, q)
        if forcing is not None:
            F[:n] -= fu
            F[n:] -= fv
        return F

    F = residual(x)
    history = []
    for it in range(max_iter + 1):
        res = float(np.max(np.abs(F)))
        history.append(res)
        log.debug("fem newton p=%g it=%d res=%.3e", p, it, res)
        if not np.isfinite(res):
            raise ConvergenceError("non-finite residual", history, x)
        if res <= tol:
            break
        # a sharp bubble drifts slowly along its nearly neutral translation
        # mode, so only a long plateau counts as stagnation
        if it >= 15 and res > 0.95 * history[-11]:
            raise ConvergenceError(f"Newton stagnated at p={p}", history, x)
        if it == max_iter:
            raise ConvergenceError(f"Newton did not converge in {max_iter} iterations at p={p}",
                                   history, x)
        uu, vv = np.maximum(x[:n], 0.0), np.maximum(x[n:], 0.0)
        Duv = sp.diags(-p * m_i * vv ** (p - 1))
        Dvu = sp.diags(-q * m_i * uu ** (q - 1))
        J = sp.bmat([[A_ii, Duv], [Dvu, A_ii]], format="csr")
        dx = _solve_linear(J, -F, lap_lu)
        lam = 1.0
        norm0 = np.linalg.norm(F)
        for _ in range(31):
            xc = x + lam * dx
            Fc = residual(xc)
            if np.linalg.norm(Fc) < norm0:
                break
            lam *= 0.5
        else:
            raise ConvergenceError(f"line search stalled at p={p}", history, x)
        log.debug("fem newton step lambda=%g |dx|=%.3e", lam, np.max(np.abs(dx)))
        x, F = xc, Fc
    u = np.zeros(mesh.n_nodes)
    v = np.zeros(mesh.n_nodes)
    u[I], v[I] = x[:n], x[n:]
    return SolutionPair(mesh, float(p), float(theta), u, v, history[-1], history)


def interpolate(sol, x):
    """P1 values and element gradients of ``(u, v)`` at points ``x``.

    Returns ``(u, v, grad_u, grad_v)`` with gradients of shape ``(n, 2)``.
    """
    mesh = sol.mesh
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    elem, bary = mesh.locate(pts)
    t = mesh.triangles[elem]
    g = mesh.gradients[elem]
    uu = np.sum(bary * sol.u[t], axis=1)
    vv = np.sum(bary * sol.v[t], axis=1)
    gu = np.einsum("ei,eik->ek", sol.u[t], g)
    gv = np.einsum("ei,eik->ek", sol.v[t], g)
    return uu, vv, gu, gv


def interpolate_field(mesh, f, x):
    elem, bary = mesh.locate(np.atleast_2d(np.asarray(x, dtype=float)))
    return np.sum(bary * f[mesh.triangles[elem]], axis=1)


def energies(sol):
    """Discrete energy integrals of a solution, unscaled by ``p``.

    Gradient terms are exact for P1 fields; power integrals use the lumped
    mass, matching the discrete equations.
    """
    A, mass = assemble(sol.mesh)
    p, q = sol.p, sol.q
    up, vp = np.maximum(sol.u, 0.0), np.maximum(sol.v, 0.0)
    return {
        "grad_uv": float(sol.u @ (A @ sol.v)),
        "grad_uu": float(sol.u @ (A @ sol.u)),
        "grad_vv": float(sol.v @ (A @ sol.v)),
        "int_vp1": float(mass @ vp ** (p + 1)),
        "int_uq1": float(mass @ up ** (q + 1)),
        "int_vp": float(mass @ vp ** p),
        "int_uq": float(mass @ up ** q),
    }


def save_solution_csv(sol, path):
    """Write ``node_index,x,y,u,v`` rows with round-trip float formatting."""
    with open(path, "w") as fh:
        fh.write("node_index,x,y,u,v\n")
        for i, ((x, y), u, v) in enumerate(zip(sol.mesh.nodes, sol.u, sol.v)):
            fh.write(f"{i},{float(x)!r},{float(y)!r},{float(u)!r},{float(v)!r}\n")


def load_solution_csv(path, mesh, p, theta):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if len(data) != mesh.n_nodes:
        raise InvalidParameterError(f"{path}: {len(data)} rows for a mesh with {mesh.n_nodes} nodes")
    return SolutionPair(mesh, float(p), float(theta), data[:, 3].copy(), data[:, 4].copy(), float("nan"))
