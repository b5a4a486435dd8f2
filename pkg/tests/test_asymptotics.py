import csv
import json
import math

import numpy as np
import pytest

from lel import asymptotics as asy
from lel.domains import DomainSpec
from lel.errors import EmptyPeakError, FitError, GeometryError, InvalidParameterError
from lel.fem.mesh import generate_mesh
from lel.fem.solver import SolutionPair
from lel.greens import GreenOracle
from lel.liouville import SQRT_E, profile_pair
from lel.radial import continuation_radial

EIGHT_PI_E = 8 * math.pi * math.e


@pytest.fixture(scope="module")
def rect_mesh():
    return generate_mesh(DomainSpec.rectangle(2.0, 1.0), 0.02)


def _bumps(mesh, centers, p=50.0, amp=SQRT_E, width=0.08):
    x = mesh.nodes
    u = sum(amp * np.exp(-np.sum((x - c) ** 2, axis=1) / width ** 2) for c in centers)
    u[mesh.boundary_mask] = 0.0
    return SolutionPair(mesh, p, 0.0, u, u.copy(), 0.0)


@pytest.fixture(scope="module")
def radial10():
    return continuation_radial([10], 0.0)[0][0]


# ---------------------------------------------------------------- peaks
def test_single_synthetic_peak(rect_mesh):
    sol = _bumps(rect_mesh, [(1.0, 0.5)])
    pk = asy.detect_peaks(sol)
    assert pk.k == 1
    node = rect_mesh.nodes[np.argmin(np.linalg.norm(rect_mesh.nodes - [1.0, 0.5], axis=1))]
    assert np.allclose(pk[0].x_peak, node) and np.allclose(pk[0].y_peak, node)
    assert pk[0].mu == pytest.approx((50 * pk[0].u_max ** 49) ** -0.5)


def test_two_synthetic_peaks(rect_mesh):
    sol = _bumps(rect_mesh, [(0.6, 0.5), (1.4, 0.5)])
    pk = asy.detect_peaks(sol)
    assert pk.k == 2
    c = pk.centers()
    assert np.linalg.norm(c[0] - c[1]) == pytest.approx(0.8, abs=0.03)
    # the small spurious bump sits below the delta threshold
    sol2 = _bumps(rect_mesh, [(0.6, 0.5), (1.4, 0.5)])
    sol2.u += 0.3 * np.exp(-np.sum((rect_mesh.nodes - [1.0, 0.2]) ** 2, axis=1) / 0.003)
    sol2.u[rect_mesh.boundary_mask] = 0
    assert asy.detect_peaks(sol2).k == 2


def test_peak_errors(rect_mesh):
    zero = SolutionPair(rect_mesh, 5.0, 0.0, np.zeros(rect_mesh.n_nodes),
                        np.zeros(rect_mesh.n_nodes), 0.0)
    with pytest.raises(EmptyPeakError):
        asy.detect_peaks(zero)
    with pytest.raises(InvalidParameterError):
        asy.detect_peaks(_bumps(rect_mesh, [(1, 0.5)]), delta=1.5)


def test_radial_peak(radial10):
    pk = asy.detect_peaks(radial10)
    assert pk.k == 1 and pk[0].u_max == radial10.a and pk[0].x_peak == (0.0, 0.0)


# ---------------------------------------------------------------- profiles
def test_rescaled_profile_vanishes_at_origin(radial10):
    pk = asy.detect_peaks(radial10)[0]
    s = asy.rescale_profile(radial10, pk, R=5.0, n=41)
    at0 = np.all(s["points"] == 0, axis=1)
    assert at0.sum() == 1 and s["w"][at0][0] == 0.0
    assert np.all(np.hypot(*s["points"].T) <= 5.0 + 1e-12)
    assert np.all(s["w"] <= 1e-12)


def test_profile_error_of_shifted_profile():
    g = np.linspace(-3, 3, 13)
    pts = np.array([(a, b) for a in g for b in g])
    for theta in (0.0, 1.0):
        U, V = profile_pair(theta, SQRT_E, pts)
        s = {"points": pts, "w": U + 0.25, "z": V - 0.5, "R": 3.0}
        ew, ez = asy.profile_error(s, theta)
        assert ew == pytest.approx(0.25, abs=1e-12) and ez == pytest.approx(0.5, abs=1e-12)


def test_radial_profile_error_decreases():
    sols, _ = continuation_radial([10, 50, 200], 0.0)
    errs = []
    for s in sols:
        pk = asy.detect_peaks(s)[0]
        errs.append(asy.profile_error(asy.rescale_profile(s, pk, R=3.0, n=21), 0.0)[0])
    assert errs[0] > errs[1] > errs[2]


# ---------------------------------------------------------------- decay
def test_decay_check_examples():
    r = np.geomspace(4, 100, 30)
    pts = np.column_stack([r, np.zeros_like(r)])
    w = -4 * np.log(r) + 1.0
    ok, C, viol = asy.decay_check(pts, w, 3.5)
    assert ok and C == pytest.approx(1.0 - 0.5 * math.log(4.0))
    assert asy.decay_check(pts, w, 3.5, C_ref=0.0)[2] == pytest.approx(C)
    assert asy.decay_check(pts, w, 3.5, C_ref=10.0)[2] == 0.0
    with pytest.raises(InvalidParameterError):
        asy.decay_check(pts, w, 4.0)
    with pytest.raises(GeometryError):
        asy.decay_check(np.zeros((0, 2)), [], 3.5)


def test_decay_samples_on_radial():
    s = continuation_radial([10, 100], 0.0)[0][1]
    pk = asy.detect_peaks(s)[0]
    pts, w = asy.decay_samples(s, pk)
    ok, C, _ = asy.decay_check(pts, w, 3.5)
    assert ok and C < 5.0


# ---------------------------------------------------------------- extrapolation and bounds
def test_extrapolate_exact_data():
    p = np.array([50.0, 100.0, 200.0, 400.0])
    a0, coef, rms = asy.extrapolate_limit(p, 3.0 - 7.0 / p)
    assert a0 == pytest.approx(3.0, abs=1e-12) and coef[1] == pytest.approx(-7.0)
    assert rms < 1e-12
    a0, coef, _ = asy.extrapolate_limit(p, 1.0 + 2 / p - 5 / p ** 2, order=2)
    assert a0 == pytest.approx(1.0, abs=1e-10)
    a0, _, _ = asy.extrapolate_limit(p, 2.0 + np.log(p) / p + 1 / p, log_term=True)
    assert a0 == pytest.approx(2.0, abs=1e-10)
    a0, coef, _ = asy.extrapolate_limit(p, np.full(4, 5.0))
    assert a0 == pytest.approx(5.0) and abs(coef[1]) < 1e-9


def test_extrapolate_errors():
    with pytest.raises(FitError):
        asy.extrapolate_limit([50.0, 100.0], [1.0, 2.0])
    with pytest.raises(FitError):
        asy.extrapolate_limit([50.0, 100.0, 200.0], [1, 2, 3], order=2)
    with pytest.raises(InvalidParameterError):
        asy.extrapolate_limit([100.0, 50.0, 200.0], [1, 2, 3])
    with pytest.raises(InvalidParameterError):
        asy.extrapolate_limit([50.0, 100.0, 200.0], [1, 2, 3], order=3)


def test_beta_bound():
    assert asy.beta_bound(100.0) == 2
    assert asy.beta_bound(EIGHT_PI_E) == 1
    assert asy.beta_bound(30.0) == 1
    with pytest.raises(InvalidParameterError):
        asy.beta_bound(0.0)


def test_beta_budget_flags_two_peaks(rect_mesh):
    sol = _bumps(rect_mesh, [(0.6, 0.5), (1.4, 0.5)])
    rep = asy.analyze(sol, beta=30.0)
    assert rep.k == 2 and rep.beta_budget == {"beta": 30.0, "bound": 1, "ok": False}
    assert asy.analyze(sol, beta=140.0).beta_budget["ok"]


# ---------------------------------------------------------------- Green-based checks
def test_stationarity_on_disk():
    o = GreenOracle(DomainSpec.unit_disk())
    good = asy.PeakSet([asy.Peak((0.0, 0.0), (0.0, 0.0), 1.6, 1.6, 1e-3, 1e-3)], 1e-2)
    assert asy.stationarity_check(good, o)[0] < 1e-8
    # negative control: off-centre peak is not a critical point of R
    bad = asy.PeakSet([asy.Peak((0.3, 0.0), (0.3, 0.0), 1.6, 1.6, 1e-3, 1e-3)], 1e-2)
    assert asy.stationarity_check(bad, o)[0] == pytest.approx(0.3 / (0.91 * math.pi), rel=1e-6)
    edge = asy.PeakSet([asy.Peak((1.0, 0.0), (1.0, 0.0), 1.6, 1.6, 1e-3, 1e-3)], 1e-2)
    with pytest.raises(GeometryError):
        asy.stationarity_check(edge, o)


def test_outer_field_radial():
    s = continuation_radial([10, 100], 0.0)[0][1]
    pk = asy.detect_peaks(s)
    o = GreenOracle(DomainSpec.unit_disk())
    eu, ev = asy.outer_field_error(s, pk, o, [(0.5, 0.0)])
    assert eu < 0.2 and ev < 0.2
    with pytest.raises(GeometryError):
        asy.outer_field_error(s, pk, o, [(0.0, 0.0)])


# ---------------------------------------------------------------- Pohozaev
def test_pohozaev_on_solution(radial10):
    r23, r24, parts = asy.pohozaev_residual(radial10, (0.0, 0.0), 0.3)
    assert r23 / parts["dominant"] < 1e-4
    assert np.max(np.abs(r24)) < 1e-6 * parts["dominant"]
    r23s, _, parts_s = asy.pohozaev_residual(radial10, (0.0, 0.0), 0.3, scaled=True)
    assert r23s == pytest.approx(100 * r23)
    assert parts_s["dominant"] == pytest.approx(100 * parts["dominant"])


def test_pohozaev_negative_control():
    # the torsion-like sine is not a Lane-Emden solution, so the identity fails
    m = generate_mesh(DomainSpec.square(), 0.02)
    x, y = m.nodes.T
    u = np.sin(np.pi * x) * np.sin(np.pi * y)
    sol = SolutionPair(m, 3.0, 0.0, u, u.copy(), 0.0)
    r23, _, parts = asy.pohozaev_residual(sol, (0.5, 0.5), 0.3)
    assert r23 / parts["dominant"] > 0.1


def test_pohozaev_geometry_errors(radial10):
    with pytest.raises(GeometryError):
        asy.pohozaev_residual(radial10, (0.0, 0.0), 1.5)
    with pytest.raises(GeometryError):
        asy.pohozaev_residual(radial10, (0.2, 0.0), 0.3)
    with pytest.raises(InvalidParameterError):
        asy.pohozaev_residual(radial10, (0.0, 0.0), -1.0)


# ---------------------------------------------------------------- energies and reports
def test_gap_theta_zero(radial10):
    pk = asy.detect_peaks(radial10)[0]
    gap, dist = asy.peak_gap(radial10, pk)
    assert abs(gap) < 1e-8 and dist == 0.0


def test_peak_masses_radial():
    s = continuation_radial([10, 200], 0.0)[0][1]
    mv, mu = asy.peak_masses(s, asy.detect_peaks(s)[0], 0.2)
    target = 8 * math.pi * SQRT_E
    assert abs(mv - target) / target < 0.1 and abs(mu - mv) < 1e-6 * mv


def test_report_serialization(tmp_path, radial10):
    o = GreenOracle(DomainSpec.unit_disk())
    rep = asy.analyze(radial10, o, probes=[(0.9, 0.0)], beta=100.0)
    d = json.loads(rep.to_json())
    for key in ("p", "theta", "k", "peaks", "energies", "pohozaev", "beta_budget", "gaps"):
        assert key in d
    assert d["k"] == 1 and d["beta_budget"]["ok"]
    path = tmp_path / "family.csv"
    asy.write_family_csv([rep, rep], path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == asy.FAMILY_COLUMNS and len(rows) == 3
    assert float(rows[1][0]) == 10.0 and rows[1] == rows[2]
