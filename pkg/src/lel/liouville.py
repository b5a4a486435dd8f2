"""Entire solutions of the Liouville system and their masses.

Every solution of ``-ΔU = e^V, -ΔV = e^U`` on the plane with finite masses is
``U = V = log(8λ² / (1 + λ²|x - y|²)²)``.  The blow-up limits of the
Lane-Emden system are the shifted pair::

    U_θ(x) = -2 log(1 + (l^θ / 8)|x|²),    V_θ = U_θ + θ log l.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import least_squares

from .errors import FitError, InvalidInputError, InvalidParameterError

SQRT_E = float(np.sqrt(np.e))


@dataclass(frozen=True)
class BubbleProfile:
    theta: float
    l: float
    lam: float
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.theta < 0 or self.l <= 0 or self.lam <= 0:
            raise InvalidParameterError("need theta >= 0, l > 0, lambda > 0")

    @classmethod
    def limit_profile(cls, theta, l=SQRT_E):
        """The blow-up profile, whose scale satisfies ``λ² = l^θ / 8``."""
        return cls(theta=theta, l=l, lam=float(np.sqrt(l ** theta / 8.0)))

    def values(self, x):
        return profile_pair(self.theta, self.l, np.asarray(x, dtype=float) - self.center)


def _sqdist(x, center=(0.0, 0.0)):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2:
        raise InvalidInputError("points must have a trailing dimension of 2")
    d = x - np.asarray(center, dtype=float)
    return np.sum(d * d, axis=-1)


def liouville_value(lam, center, x):
    """``log(8λ² / (1 + λ²|x - center|²)²)``, vectorized over points ``x``."""
    if not lam > 0:
        raise InvalidParameterError(f"lambda must be positive, got {lam}")
    r2 = _sqdist(x, center)
    return np.log(8.0 * lam * lam) - 2.0 * np.log1p(lam * lam * r2)


def profile_pair(theta, l, x):
    """Return ``(U_θ(x), V_θ(x))`` for peak height ``l``."""
    if theta < 0:
        raise InvalidParameterError("theta must be nonnegative")
    if not l > 0:
        raise InvalidParameterError(f"l must be positive, got {l}")
    U = -2.0 * np.log1p(l ** theta / 8.0 * _sqdist(x))
    return U, U + theta * np.log(l)


def bubble_mass_numeric(theta, l, R_cut):
    """``(∫_{|x|<R} e^{U_θ}, ∫_{|x|<R} e^{V_θ})`` by adaptive radial quadrature.

    ``R_cut = inf`` is allowed.  The infinite-plane values are ``8π l^{-θ}``
    and ``8π``.
    """
    if R_cut < 0:
        raise InvalidParameterError("R_cut must be nonnegative")
    if theta < 0 or not l > 0:
        raise InvalidParameterError("need theta >= 0 and l > 0")
    if R_cut == 0:
        return 0.0, 0.0
    c = l ** theta / 8.0
    f = lambda r: 2.0 * np.pi * r / (1.0 + c * r * r) ** 2
    # the integrand peaks at r ~ 1/sqrt(c); split there so quad sees the bulk
    r0 = 1.0 / np.sqrt(c)
    if np.isinf(R_cut):
        mU = quad(f, 0.0, r0, epsabs=0, epsrel=1e-13)[0] + quad(f, r0, np.inf, epsabs=0, epsrel=1e-13)[0]
    else:
        pts = [r0] if r0 < R_cut else None
        mU = quad(f, 0.0, R_cut, points=pts, epsabs=0, epsrel=1e-13, limit=200)[0]
    return float(mU), float(mU * l ** theta)


def bubble_mass_tail(theta, l, R_cut):
    """Leading-order mass outside ``|x| > R_cut``: ``π / (c² R²)`` for ``e^U``."""
    c = l ** theta / 8.0
    tU = np.pi / (c * c * R_cut * R_cut)
    return float(tU), float(tU * l ** theta)


def _bubble_model(params, pts):
    loglam, cx, cy, const = params
    lam2 = np.exp(2.0 * loglam)
    d2 = (pts[:, 0] - cx) ** 2 + (pts[:, 1] - cy) ** 2
    return const - 2.0 * np.log1p(lam2 * d2)


def _bubble_jac(params, pts):
    loglam, cx, cy, _ = params
    lam2 = np.exp(2.0 * loglam)
    dx, dy = pts[:, 0] - cx, pts[:, 1] - cy
    d2 = dx * dx + dy * dy
    den = 1.0 + lam2 * d2
    J = np.empty((len(pts), 4))
    J[:, 0] = -4.0 * lam2 * d2 / den
    J[:, 1] = 4.0 * lam2 * dx / den
    J[:, 2] = 4.0 * lam2 * dy / den
    J[:, 3] = 1.0
    return J


def _initial_guess(pts, vals):
    i = int(np.argmax(vals))
    c = pts[i]
    d2 = np.sum((pts - c) ** 2, axis=1)
    near = np.argsort(d2)[: min(len(pts), 9)]
    # local model f ~ f0 - k |x - c|^2 gives λ² ~ k / 2
    A = np.column_stack([np.ones(len(near)), -d2[near]])
    (f0, k), *_ = np.linalg.lstsq(A, vals[near], rcond=None)
    if not k > 0:
        spread = np.sqrt(np.mean(d2)) or 1.0
        k = 2.0 / spread ** 2
    return np.array([0.5 * np.log(k / 2.0), c[0], c[1], vals[i]])


def fit_bubble(samples, theta, values=None):
    """Least-squares fit of ``const - 2 log(1 + λ²|x - c|²)`` to sampled data.

    ``samples`` is either a sequence of ``((x, y), value)`` pairs or, when
    ``values`` is given, an ``(n, 2)`` array of points.  Returns
    ``(lam, center, l, rms)``; ``l = (8λ²)^{1/θ}`` is the peak height implied
    by the limit-profile relation and is ``nan`` for ``θ = 0``.
    """
    if values is None:
        pts = np.array([s[0] for s in samples], dtype=float)
        vals = np.array([s[1] for s in samples], dtype=float)
    else:
        pts = np.asarray(samples, dtype=float)
        vals = np.asarray(values, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) != len(vals):
        raise InvalidInputError("samples must be (n, 2) points with n values")
    if len(pts) < 4:
        raise FitError("need at least 4 samples", {"n_samples": len(pts)})
    if np.ptp(vals) == 0:
        raise FitError("constant sample values determine no bubble", {"n_samples": len(pts)})
    x0 = _initial_guess(pts, vals)
    res = least_squares(lambda q: _bubble_model(q, pts) - vals, x0,
                        jac=lambda q: _bubble_jac(q, pts), method="lm",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    J = _bubble_jac(res.x, pts)
    sv = np.linalg.svd(J, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    diag = {"cond": cond, "singular_values": sv.tolist(), "nfev": int(res.nfev),
            "status": int(res.status), "params": res.x.tolist()}
    if not np.isfinite(cond) or cond > 1e10:
        raise FitError("bubble fit is underdetermined", diag)
    if res.status <= 0:
        raise FitError(f"bubble fit failed: {res.message}", diag)
    lam = float(np.exp(res.x[0]))
    rms = float(np.sqrt(np.mean(res.fun ** 2)))
    l = float((8.0 * lam * lam) ** (1.0 / theta)) if theta > 0 else float("nan")
    return lam, (float(res.x[1]), float(res.x[2])), l, rms


def five_point_laplacian(F, h):
    return (F[2:, 1:-1] + F[:-2, 1:-1] + F[1:-1, 2:] + F[1:-1, :-2] - 4.0 * F[1:-1, 1:-1]) / (h * h)


def liouville_residual(U, V, h):
    """Max-norm residuals of ``-ΔU - e^V`` and ``-ΔV - e^U`` over interior grid nodes."""
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    if U.shape != V.shape or U.ndim != 2:
        raise InvalidInputError("U and V must be 2-D arrays of equal shape")
    if min(U.shape) < 3:
        raise InvalidInputError("grid must be at least 3x3")
    if not h > 0:
        raise InvalidParameterError("grid spacing must be positive")
    rU = -five_point_laplacian(U, h) - np.exp(V[1:-1, 1:-1])
    rV = -five_point_laplacian(V, h) - np.exp(U[1:-1, 1:-1])
    return float(np.max(np.abs(rU))), float(np.max(np.abs(rV)))
