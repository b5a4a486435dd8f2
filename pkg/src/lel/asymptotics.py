"""Peak detection, rescaled profiles and the large-``p`` diagnostics.

Everything here reads solutions (radial or finite-element) and turns them
into numbers that can be compared with the limiting constants
``u(x_p) → √e`` and ``p ∫ ∇u·∇v → 8πe`` per peak.
"""

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import simpson

from .errors import EmptyPeakError, FitError, GeometryError, InvalidParameterError, LocationError
from .liouville import SQRT_E, profile_pair
from .radial import RadialSolution, radial_diagnostics

EIGHT_PI_E = 8.0 * math.pi * math.e
EIGHT_PI_SQRT_E = 8.0 * math.pi * SQRT_E
CLUSTER_FACTOR = 10.0
N_CIRCLE = 256

FAMILY_COLUMNS = ["p", "theta", "k", "u_max", "v_max", "scaled_gap", "energy_uv", "energy_u",
                  "energy_v", "L_p", "profile_err_w", "profile_err_z", "pohozaev_23",
                  "outer_err_u", "stationarity_max"]


# ---------------------------------------------------------------- sampling
def _is_radial(sol):
    return isinstance(sol, RadialSolution)


def sample_fields(sol, pts):
    """``(u, v, ∇u, ∇v)`` at points for either kind of solution."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if _is_radial(sol):
        r = np.hypot(pts[:, 0], pts[:, 1])
        if np.any(r > 1.0 + 1e-12):
            raise GeometryError("sample point outside the unit disk")
        u, ur, v, vr = sol.evaluate(np.minimum(r, 1.0))
        with np.errstate(invalid="ignore", divide="ignore"):
            e = np.where(r[:, None] > 0, pts / r[:, None], 0.0)
        return u, v, ur[:, None] * e, vr[:, None] * e
    from .fem.solver import interpolate
    try:
        return interpolate(sol, pts)
    except LocationError as exc:
        raise GeometryError(str(exc)) from exc


# ---------------------------------------------------------------- peaks
@dataclass
class Peak:
    x_peak: tuple
    y_peak: tuple
    u_max: float
    v_max: float
    mu: float
    mu_tilde: float


@dataclass
class PeakSet:
    peaks: list
    cluster_radius: float

    def __len__(self):
        return len(self.peaks)

    def __iter__(self):
        return iter(self.peaks)

    def __getitem__(self, i):
        return self.peaks[i]

    @property
    def k(self):
        return len(self.peaks)

    def centers(self):
        return np.array([pk.x_peak for pk in self.peaks], dtype=float)


def _scale(p, value):
    return (p * value ** (p - 1.0)) ** -0.5


def _node_adjacency(mesh):
    t = mesh.triangles
    i = np.concatenate([t[:, 0], t[:, 1], t[:, 2], t[:, 1], t[:, 2], t[:, 0]])
    j = np.concatenate([t[:, 1], t[:, 2], t[:, 0], t[:, 0], t[:, 1], t[:, 2]])
    n = mesh.n_nodes
    return sp.csr_matrix((np.ones(len(i)), (i, j)), shape=(n, n))


def _local_maxima(mesh, f, adj, threshold):
    # strict nodal maxima above the threshold
    cand = np.flatnonzero((f >= threshold) & ~mesh.boundary_mask)
    keep = []
    for c in cand:
        nb = adj.indices[adj.indptr[c]:adj.indptr[c + 1]]
        if np.all(f[c] > f[nb[nb != c]]):
            keep.append(c)
    return np.array(keep, dtype=int)


def _cluster(points, values, radius):
    order = np.argsort(-values, kind="stable")
    chosen = []
    for i in order:
        if all(np.linalg.norm(points[i] - points[j]) >= 2.0 * radius for j in chosen):
            chosen.append(i)
    return chosen


def detect_peaks(sol, delta=0.5):
    """Peaks of ``u`` above ``delta · max u``, each paired with the nearest ``v`` peak."""
    if not 0 < delta < 1:
        raise InvalidParameterError("delta must lie in (0, 1)")
    p = sol.p
    if _is_radial(sol):
        if not (sol.a > 0 and sol.b > 0):
            raise EmptyPeakError("radial solution has no positive maximum")
        mu, mut = _scale(p, sol.a), _scale(p, sol.b)
        pk = Peak((0.0, 0.0), (0.0, 0.0), float(sol.a), float(sol.b), float(mu), float(mut))
        return PeakSet([pk], float(CLUSTER_FACTOR * max(mu, mut)))
    mesh = sol.mesh
    umax, vmax = float(np.max(sol.u)), float(np.max(sol.v))
    if not (umax > 0 and vmax > 0):
        raise EmptyPeakError("solution has no positive maximum")
    adj = _node_adjacency(mesh)
    iu = _local_maxima(mesh, sol.u, adj, delta * umax)
    iv = _local_maxima(mesh, sol.v, adj, delta * vmax)
    if len(iu) == 0 or len(iv) == 0:
        raise EmptyPeakError(f"no strict local maximum above delta={delta}")
    mus = [_scale(p, sol.u[i]) for i in iu] + [_scale(p, sol.v[i]) for i in iv]
    radius = CLUSTER_FACTOR * max(mus)
    cu = iu[_cluster(mesh.nodes[iu], sol.u[iu], radius)]
    cv = iv[_cluster(mesh.nodes[iv], sol.v[iv], radius)]
    peaks = []
    for i in cu:
        j = cv[np.argmin(np.linalg.norm(mesh.nodes[cv] - mesh.nodes[i], axis=1))]
        peaks.append(Peak(tuple(map(float, mesh.nodes[i])), tuple(map(float, mesh.nodes[j])),
                          float(sol.u[i]), float(sol.v[j]), float(_scale(p, sol.u[i])),
                          float(_scale(p, sol.v[j]))))
    peaks.sort(key=lambda pk: pk.x_peak)
    return PeakSet(peaks, float(radius))


# ---------------------------------------------------------------- profiles
def rescale_profile(sol, peak, R=5.0, n=41):
    """Sample ``w_p`` and ``z_p`` on an ``n × n`` grid restricted to ``|x| <= R``.

    ``w_p(x) = p (u(x_p + μx) - u(x_p)) / u(x_p)``, ``z_p`` likewise with ``v``
    in the numerator and the same normalization.
    """
    g = np.linspace(-R, R, n)
    X, Y = np.meshgrid(g, g, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    pts = pts[np.hypot(pts[:, 0], pts[:, 1]) <= R + 1e-12]
    x0 = np.asarray(peak.x_peak, dtype=float)
    phys = x0 + peak.mu * pts
    u, v, _, _ = sample_fields(sol, phys)
    p, um = sol.p, peak.u_max
    w = p * (u - um) / um
    z = p * (v - um) / um
    at0 = np.all(pts == 0, axis=1)
    w[at0] = 0.0  # the peak value itself, so w(0) = 0 exactly
    return {"points": pts, "w": w, "z": z, "R": float(R)}


def profile_error(samples, theta, l=SQRT_E, R=None):
    """Sup distances of sampled ``(w, z)`` to ``(U_θ, V_θ)`` over ``|x| <= R``."""
    pts = np.asarray(samples["points"], dtype=float)
    R = samples.get("R", np.inf) if R is None else R
    sel = np.hypot(pts[:, 0], pts[:, 1]) <= R + 1e-12
    U, V = profile_pair(theta, l, pts[sel])
    return (float(np.max(np.abs(np.asarray(samples["w"])[sel] - U))),
            float(np.max(np.abs(np.asarray(samples["z"])[sel] - V))))


def decay_samples(sol, peak, r_inner=4.0, r_outer=0.25, n=64):
    """``w_p`` along four rays for ``r_inner <= |x| <= r_outer / μ``."""
    R_out = r_outer / peak.mu
    if R_out <= r_inner:
        raise GeometryError("annulus is empty at this p")
    rho = np.geomspace(r_inner, R_out, n)
    dirs = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]], dtype=float)
    pts = (rho[:, None, None] * dirs[None]).reshape(-1, 2)
    u, _, _, _ = sample_fields(sol, np.asarray(peak.x_peak) + peak.mu * pts)
    return pts, sol.p * (u - peak.u_max) / peak.u_max


def decay_check(points, w, gamma, C_ref=None):
    """Smallest ``C`` with ``w(x) <= γ log(1/|x|) + C`` on the samples.

    Returns ``(ok, C_fit, max_violation)``; ``max_violation`` is measured
    against ``C_ref`` when given (0 otherwise).
    """
    if not 0 < gamma < 4:
        raise InvalidParameterError("gamma must lie in (0, 4)")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise GeometryError("empty annulus")
    r = np.hypot(pts[:, 0], pts[:, 1])
    excess = np.asarray(w, dtype=float) + gamma * np.log(r)
    C = float(np.max(excess))
    viol = 0.0 if C_ref is None else float(max(0.0, C - C_ref))
    return bool(np.isfinite(C)), C, viol


# ---------------------------------------------------------------- Pohozaev
# degree-4 rule on the reference triangle (Dunavant, 6 points)
_Q_BARY = np.array([[0.108103018168070, 0.445948490915965, 0.445948490915965],
                    [0.445948490915965, 0.108103018168070, 0.445948490915965],
                    [0.445948490915965, 0.445948490915965, 0.108103018168070],
                    [0.816847572980459, 0.091576213509771, 0.091576213509771],
                    [0.091576213509771, 0.816847572980459, 0.091576213509771],
                    [0.091576213509771, 0.091576213509771, 0.816847572980459]])
_Q_W = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)


def _ball_integrals_fem(sol, center, d):
    mesh = sol.mesh
    t = mesh.triangles
    P = mesh.nodes[t]
    qp = np.einsum("qk,ekd->eqd", _Q_BARY, P)
    inside = np.hypot(*(qp - center).transpose(2, 0, 1)) < d
    u = np.maximum(np.einsum("qk,ek->eq", _Q_BARY, sol.u[t]), 0.0)
    v = np.maximum(np.einsum("qk,ek->eq", _Q_BARY, sol.v[t]), 0.0)
    wgt = mesh.areas[:, None] * _Q_W[None, :] * inside
    return float(np.sum(wgt * v ** (sol.p + 1))), float(np.sum(wgt * u ** (sol.q + 1)))


def _ball_integrals_radial(sol, center, d):
    if np.any(np.asarray(center) != 0):
        raise GeometryError("radial solutions support balls centred at the origin only")
    s = np.linspace(sol.s_min, math.log(d), 8001)
    u, _, v, _ = sol.evaluate(np.exp(s))
    w = 2.0 * math.pi * np.exp(2.0 * s)
    f = lambda g: simpson(g * w, x=s) + 0.5 * g[0] * w[0]
    return (float(f(np.maximum(v, 0.0) ** (sol.p + 1))),
            float(f(np.maximum(u, 0.0) ** (sol.q + 1))))


def _check_ball(sol, center, d):
    if not d > 0:
        raise InvalidParameterError("radius must be positive")
    if _is_radial(sol):
        if np.hypot(*center) + d > 1.0:
            raise GeometryError("circle exits the unit disk")
        return
    from .fem.solver import interpolate
    ring = center + d * np.column_stack([np.cos(np.linspace(0, 2 * np.pi, 64)),
                                         np.sin(np.linspace(0, 2 * np.pi, 64))])
    bnodes = sol.mesh.nodes[sol.mesh.boundary_mask]
    if np.min(np.hypot(*(bnodes - center).T)) <= d:
        raise GeometryError("circle exits the domain")
    try:
        interpolate(sol, ring)
    except LocationError as exc:
        raise GeometryError(str(exc)) from exc


def pohozaev_residual(sol, center=(0.0, 0.0), d=0.3, scaled=False):
    """Both Pohozaev identities on ``B_d(center)`` with ``y = center``.

    Returns ``(res_23, res_24, parts)``: ``res_23 = |LHS - RHS|`` of the
    radial identity, ``res_24`` the two components of the translational
    identity's imbalance, and ``parts`` the individual terms (including
    ``dominant``, the largest boundary term in magnitude).  With ``scaled``
    every term is multiplied by ``p²``.
    """
    center = np.asarray(center, dtype=float)
    _check_ball(sol, center, d)
    p, q = sol.p, sol.q
    th = 2.0 * np.pi * (np.arange(N_CIRCLE) + 0.5) / N_CIRCLE
    nu = np.column_stack([np.cos(th), np.sin(th)])
    u, v, gu, gv = sample_fields(sol, center + d * nu)
    u, v = np.maximum(u, 0.0), np.maximum(v, 0.0)
    ds = 2.0 * np.pi * d / N_CIRCLE
    un = np.sum(gu * nu, axis=1)
    vn = np.sum(gv * nu, axis=1)
    guv = np.sum(gu * gv, axis=1)
    pw = v ** (p + 1) / (p + 1) + u ** (q + 1) / (q + 1)
    iv, iu = (_ball_integrals_radial if _is_radial(sol) else _ball_integrals_fem)(sol, center, d)
    lhs = 2.0 / (p + 1) * iv + 2.0 / (q + 1) * iu
    b_cross = float(np.sum(2.0 * d * un * vn) * ds)  # <∇v, x - y> = d ∂_ν v on the circle
    b_grad = float(-d * np.sum(guv) * ds)
    b_pow = float(d * np.sum(pw) * ds)
    res_23 = abs(lhs - (b_cross + b_grad + b_pow))
    t1 = -np.sum(un[:, None] * gv + vn[:, None] * gu, axis=0) * ds
    t2 = np.sum(guv[:, None] * nu, axis=0) * ds
    t3 = np.sum(pw[:, None] * nu, axis=0) * ds
    res_24 = t1 + t2 - t3
    s = p * p if scaled else 1.0
    parts = {"lhs": s * lhs, "boundary_cross": s * b_cross, "boundary_grad": s * b_grad,
             "boundary_power": s * b_pow,
             "dominant": s * max(abs(b_cross), abs(b_grad), abs(b_pow)),
             "power_flux_24": (s * t3).tolist()}
    return s * res_23, (s * res_24).tolist(), parts


# ---------------------------------------------------------------- outer field, stationarity
def outer_field_error(sol, peaks, oracle, probes):
    """Max over probes of ``|p u(x) - 8π√e Σ_i G(x, x_i)|`` and the same for ``v``."""
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    centers = peaks.centers()
    dmin = np.min(np.linalg.norm(probes[:, None] - centers[None], axis=-1))
    if dmin < 5.0 * peaks.cluster_radius:
        raise GeometryError("probe too close to a peak")
    u, v, _, _ = sample_fields(sol, probes)
    target = np.zeros(len(probes))
    on_bdry = ~oracle.domain.contains(probes) | (oracle.domain.boundary_distance(probes) < 1e-12)
    for c in centers:
        for k, x in enumerate(probes):
            if not on_bdry[k]:
                target[k] += EIGHT_PI_SQRT_E * oracle.G(x, c)
    p = sol.p
    return float(np.max(np.abs(p * u - target))), float(np.max(np.abs(p * v - target)))


def stationarity_check(peaks, oracle):
    """``|∇R(x_i) - 2 Σ_{j≠i} ∇G(x_i, x_j)|`` at each detected peak."""
    from .greens import kirchhoff_routh
    centers = peaks.centers()
    if len(centers) == 0:
        raise EmptyPeakError("no peaks")
    if np.any(oracle.domain.boundary_distance(centers) <= oracle.h_R) or \
            not np.all(oracle.domain.contains(centers)):
        raise GeometryError("peak on or next to the boundary")
    _, grad = kirchhoff_routh(oracle, centers)
    return [float(np.linalg.norm(g)) for g in grad]


# ---------------------------------------------------------------- extrapolation
def extrapolate_limit(p_values, values, order=1, log_term=False):
    """Least-squares fit ``value ≈ a0 + a1/p (+ a2/p²) (+ c log(p)/p)``.

    Returns ``(a0, coeffs, fit_residual)`` with ``coeffs`` the full
    coefficient vector and ``fit_residual`` the RMS misfit.
    """
    p = np.asarray(p_values, dtype=float)
    y = np.asarray(values, dtype=float)
    if order not in (1, 2):
        raise InvalidParameterError("order must be 1 or 2")
    if p.shape != y.shape or p.ndim != 1:
        raise InvalidParameterError("p_values and values must be 1-D of equal length")
    ncol = order + 1 + int(log_term)
    if len(p) < order + 2 or len(p) < ncol:
        raise FitError("too few data points for the requested model", {"n": len(p)})
    if np.any(np.diff(p) <= 0):
        raise InvalidParameterError("p_values must be distinct and increasing")
    cols = [np.ones_like(p), 1.0 / p]
    if order == 2:
        cols.append(1.0 / p ** 2)
    if log_term:
        cols.append(np.log(p) / p)
    X = np.column_stack(cols)
    coef, _, rank, sv = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise FitError("rank-deficient extrapolation design", {"singular_values": sv.tolist()})
    resid = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    return float(coef[0]), coef.tolist(), resid


def peak_gap(sol, peak):
    """``(p (v_max - u_max), |x_peak - y_peak| / μ)``."""
    dist = float(np.linalg.norm(np.subtract(peak.x_peak, peak.y_peak)))
    return float(sol.p * (peak.v_max - peak.u_max)), dist / peak.mu


def beta_bound(beta):
    """``⌈β / (8πe)⌉``, the largest peak count compatible with the energy budget."""
    if not beta > 0:
        raise InvalidParameterError("beta must be positive")
    return int(math.ceil(beta / EIGHT_PI_E))


# ---------------------------------------------------------------- energies and masses
def solution_energies(sol):
    """``p``-scaled global energies, ``L_p`` and ``I_p`` for either kind of solution."""
    if _is_radial(sol):
        d = radial_diagnostics(sol)
        return {k: d[k] for k in ("energy_uv", "energy_u", "energy_v", "energy_grad_u",
                                  "energy_grad_v", "mass_u", "mass_v", "L_p", "I_p")}
    from .fem.solver import energies
    e = energies(sol)
    p, q = sol.p, sol.q
    L_p = max(p * e["int_uq"] / (math.e * e["int_vp"] ** (1.0 / p)),
              q * e["int_vp"] / (math.e * e["int_uq"] ** (1.0 / q)))
    return {"energy_uv": p * e["grad_uv"], "energy_u": p * e["int_uq1"],
            "energy_v": p * e["int_vp1"], "energy_grad_u": p * e["grad_uu"],
            "energy_grad_v": p * e["grad_vv"], "mass_u": p * e["int_uq"],
            "mass_v": p * e["int_vp"], "L_p": L_p,
            "I_p": e["grad_uv"] - e["int_vp1"] / (p + 1) - e["int_uq1"] / (q + 1)}


def peak_masses(sol, peak, d):
    """``(p ∫_{B_d} v^p, p ∫_{B_d} u^q)`` around a peak; both tend to ``8π√e``."""
    c = np.asarray(peak.x_peak, dtype=float)
    p, q = sol.p, sol.q
    if _is_radial(sol):
        s = np.linspace(sol.s_min, math.log(d), 8001)
        u, _, v, _ = sol.evaluate(np.exp(s))
        w = 2.0 * math.pi * np.exp(2.0 * s)
        f = lambda g: simpson(g * w, x=s) + 0.5 * g[0] * w[0]
        return float(p * f(np.maximum(v, 0) ** p)), float(p * f(np.maximum(u, 0) ** q))
    mesh = sol.mesh
    t = mesh.triangles
    qp = np.einsum("qk,ekd->eqd", _Q_BARY, mesh.nodes[t])
    inside = np.hypot(*(qp - c).transpose(2, 0, 1)) < d
    u = np.maximum(np.einsum("qk,ek->eq", _Q_BARY, sol.u[t]), 0.0)
    v = np.maximum(np.einsum("qk,ek->eq", _Q_BARY, sol.v[t]), 0.0)
    wgt = mesh.areas[:, None] * _Q_W[None, :] * inside
    return float(p * np.sum(wgt * v ** p)), float(p * np.sum(wgt * u ** q))


# ---------------------------------------------------------------- report
@dataclass
class AsymptoticsReport:
    p: float
    theta: float
    k: int
    peaks: list
    energies: dict
    profile_errors: list = field(default_factory=list)
    decay: list = field(default_factory=list)
    pohozaev: dict = field(default_factory=dict)
    outer_field: dict = field(default_factory=dict)
    stationarity: list = field(default_factory=list)
    masses: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    beta_budget: dict = field(default_factory=dict)

    def to_dict(self):
        return _jsonable(asdict(self))

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary_row(self):
        pk = self.peaks[0] if self.peaks else {}
        return {
            "p": self.p, "theta": self.theta, "k": self.k,
            "u_max": pk.get("u_max", float("nan")), "v_max": pk.get("v_max", float("nan")),
            "scaled_gap": self.gaps[0][0] if self.gaps else float("nan"),
            "energy_uv": self.energies.get("energy_uv"), "energy_u": self.energies.get("energy_u"),
            "energy_v": self.energies.get("energy_v"), "L_p": self.energies.get("L_p"),
            "profile_err_w": max((e[0] for e in self.profile_errors), default=float("nan")),
            "profile_err_z": max((e[1] for e in self.profile_errors), default=float("nan")),
            "pohozaev_23": self.pohozaev.get("relative_23", float("nan")),
            "outer_err_u": self.outer_field.get("err_u", float("nan")),
            "stationarity_max": max(self.stationarity, default=float("nan")),
        }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def analyze(sol, oracle=None, probes=(), beta=None, delta=0.5, R=5.0, d=0.3, gamma=3.5,
            mass_radius=0.2):
    """Run every per-solution diagnostic and collect an :class:`AsymptoticsReport`.

    Diagnostics that do not apply (no oracle, ball outside the domain) are
    skipped rather than failing the whole report.
    """
    peaks = detect_peaks(sol, delta)
    rep = AsymptoticsReport(p=float(sol.p), theta=float(sol.theta), k=peaks.k,
                            peaks=[asdict(pk) for pk in peaks], energies=solution_energies(sol))
    for pk in peaks:
        try:
            rep.profile_errors.append(profile_error(rescale_profile(sol, pk, R), sol.theta))
        except GeometryError:
            rep.profile_errors.append((float("nan"), float("nan")))
        try:
            ok, C, _ = decay_check(*decay_samples(sol, pk), gamma)
            rep.decay.append({"ok": ok, "C_fit": C, "gamma": gamma})
        except GeometryError:
            pass
        rep.gaps.append(peak_gap(sol, pk))
        try:
            rep.masses.append(peak_masses(sol, pk, mass_radius))
        except GeometryError:
            pass
    try:
        c = peaks[0].x_peak if peaks.k == 1 else (0.0, 0.0)
        r23, r24, parts = pohozaev_residual(sol, c, d)
        rel = r23 / parts["dominant"] if parts["dominant"] > 0 else float("nan")
        rep.pohozaev = {"center": list(c), "d": d, "res_23": r23, "relative_23": rel,
                        "res_24": r24, "parts": parts}
    except GeometryError:
        pass
    if oracle is not None:
        if len(probes):
            try:
                eu, ev = outer_field_error(sol, peaks, oracle, probes)
                rep.outer_field = {"err_u": eu, "err_v": ev, "probes": np.asarray(probes).tolist()}
            except GeometryError:
                pass
        try:
            rep.stationarity = stationarity_check(peaks, oracle)
        except GeometryError:
            pass
    if beta is not None:
        bound = beta_bound(beta)
        rep.beta_budget = {"beta": float(beta), "bound": bound, "ok": peaks.k <= bound}
    return rep


def write_family_csv(reports, path):
    """One row per report with the fixed family-summary columns."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(FAMILY_COLUMNS)
        for rep in reports:
            row = rep.summary_row()
            wr.writerow([_fmt(row[c]) for c in FAMILY_COLUMNS])


def _fmt(x):
    if x is None:
        return "nan"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))
