import json
import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lel.domains import DomainSpec
from lel.errors import (ConvergenceError, DomainError, GeometryError, NearBoundaryError,
                        SingularEvaluationError)
from lel.greens import (GreenOracle, green_disk, green_numeric, green_values, grid_scan_pairs,
                        kirchhoff_routh, raise_if_failed, robin, save_points_json,
                        solve_concentration_points)

TWO_PI = 2 * math.pi
interior = st.tuples(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9)).filter(
    lambda x: x[0] ** 2 + x[1] ** 2 < 0.81)


def _probes(sources, h=0.1, rmax=0.95, min_dist=0.1):
    g = np.arange(-1, 1 + h / 2, h)
    X, Y = np.meshgrid(g, g)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    pts = pts[np.hypot(*pts.T) <= rmax]
    return [(y, pts[np.linalg.norm(pts - y, axis=1) >= min_dist]) for y in sources]


SOURCES = np.array([[0.0, 0.0], [0.3, 0.2], [-0.5, 0.4], [0.1, -0.7]])


def numeric_disk_error(h):
    o = GreenOracle(DomainSpec.unit_disk(), h=h, numeric=True)
    err = 0.0
    for y, xs in _probes(SOURCES):
        exact = np.array([green_disk(x, y) for x in xs])
        err = max(err, float(np.max(np.abs(green_values(o, xs, y) - exact))))
    return err


# ---------------------------------------------------------------- closed form
def test_green_disk_examples():
    assert green_disk((0.5, 0.0), (0.0, 0.0)) == pytest.approx(-math.log(0.5) / TWO_PI, abs=1e-15)
    assert green_disk((0.5, 0.0), (0.0, 0.0)) == pytest.approx(0.110318, abs=1e-6)
    for t in np.linspace(0, 2 * np.pi, 7):
        assert abs(green_disk((math.cos(t), math.sin(t)), (0.2, -0.4))) < 1e-14
    with pytest.raises(SingularEvaluationError):
        green_disk((0.1, 0.1), (0.1, 0.1))
    with pytest.raises(DomainError):
        green_disk((1.2, 0.0), (0.0, 0.0))


@given(x=interior, y=interior)
def test_green_disk_symmetric(x, y):
    if x == y:
        return
    assert green_disk(x, y) == pytest.approx(green_disk(y, x), rel=1e-12, abs=1e-14)


@given(x=interior, y=interior)
def test_green_bound(x, y):
    d = math.dist(x, y)
    if d < 1e-9:
        return
    assert abs(green_disk(x, y)) <= 1.0 * (1 + abs(math.log(d)))


def test_robin_disk_closed_form(disk):
    o = GreenOracle(disk)
    R, g = robin(o, (0.0, 0.0))
    assert R == 0.0 and np.allclose(g, 0.0)
    R, _ = robin(o, (0.5, 0.0))
    assert R == pytest.approx(-math.log(0.75) / TWO_PI, abs=1e-15)
    with pytest.raises(NearBoundaryError):
        robin(o, (1.0 - 1e-5, 0.0))


def test_kirchhoff_routh_examples(disk):
    o = GreenOracle(disk)
    _, g = kirchhoff_routh(o, [(0.0, 0.0)])
    assert np.allclose(g, 0.0)
    _, g = kirchhoff_routh(o, [(0.3, 0.0)])
    assert g[0, 0] == pytest.approx(0.3 / (math.pi * 0.91), abs=1e-12)
    with pytest.raises(SingularEvaluationError):
        kirchhoff_routh(o, [(0.1, 0.0), (0.1, 0.0)])


@settings(max_examples=20, deadline=None)
@given(a=interior, b=interior)
def test_kirchhoff_routh_gradient_matches_fd(a, b):
    if math.dist(a, b) < 0.1:
        return
    o = GreenOracle(DomainSpec.unit_disk())
    P = np.array([a, b])
    if np.max(np.hypot(*P.T)) > 0.85:
        return
    _, g = kirchhoff_routh(o, P)
    step = 1e-5
    fd = np.zeros_like(P)
    for i in range(2):
        for c in range(2):
            Q1, Q2 = P.copy(), P.copy()
            Q1[i, c] += step
            Q2[i, c] -= step
            fd[i, c] = (kirchhoff_routh(o, Q1)[0] - kirchhoff_routh(o, Q2)[0]) / (2 * step)
    assert np.allclose(g, fd, atol=1e-6 * max(1, np.max(np.abs(g))))


# ---------------------------------------------------------------- numeric path
def test_numeric_green_disk_refines():
    e1, e2 = numeric_disk_error(0.08), numeric_disk_error(0.04)
    assert e2 < e1 and e2 < 2e-2


def test_numeric_boundary_and_harmonicity(square):
    from lel.fem.solver import assemble
    o = GreenOracle(square, h=0.05)
    y = np.array([0.3, 0.6])
    m = o.mesh
    Hn = o.harmonic_part(y)
    G_b = -np.log(np.hypot(*(m.nodes[m.boundary_mask] - y).T)) / TWO_PI - Hn[m.boundary_mask]
    assert np.max(np.abs(G_b)) < 1e-13
    A, _ = assemble(m)
    assert np.max(np.abs((A @ Hn)[m.interior])) < 1e-10
    assert o.cache_size == 1
    o.harmonic_part(y.copy())
    assert o.cache_size == 1


def test_numeric_symmetry(square):
    o = GreenOracle(square, h=0.03)
    x, y = np.array([0.2, 0.3]), np.array([0.7, 0.55])
    assert abs(o.G(x, y) - o.G(y, x)) < 2e-3
    G, g = green_numeric(o, y, x)
    assert G == pytest.approx(o.G(x, y))
    with pytest.raises(SingularEvaluationError):
        green_numeric(o, y, y)


def test_numeric_disk_robin_close_to_closed_form():
    o = GreenOracle(DomainSpec.unit_disk(), h=0.04, numeric=True)
    for x in [(0.0, 0.0), (0.3, 0.1), (-0.4, 0.5)]:
        assert o.R(x) == pytest.approx(-math.log(1 - np.dot(x, x)) / TWO_PI, abs=5e-3)


def test_square_center_is_critical(square):
    o = GreenOracle(square, h=0.03)
    _, g = robin(o, (0.5, 0.5))
    assert np.max(np.abs(g)) < 1e-6


def test_cache_is_thread_safe(square):
    o = GreenOracle(square, h=0.05)
    ys = [np.array([0.2 + 0.1 * k, 0.4]) for k in range(4)] * 3
    out = [None] * len(ys)

    def work(i):
        out[i] = o.harmonic_part(ys[i])

    ts = [threading.Thread(target=work, args=(i,)) for i in range(len(ys))]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    assert o.cache_size == 4
    for i in range(4):
        assert out[i] is out[i + 4] is out[i + 8]


# ---------------------------------------------------------------- stationarity
def test_concentration_disk(disk):
    res = solve_concentration_points(GreenOracle(disk), 1, [(0.4, 0.1)])
    assert res.converged and np.allclose(res.points, 0.0, atol=1e-6)
    assert json.loads(res.to_json())["converged"] is True


def test_concentration_square(square):
    res = solve_concentration_points(GreenOracle(square, h=0.03), 1, [(0.3, 0.65)])
    assert res.converged and np.allclose(res.points[0], (0.5, 0.5), atol=1e-6)


def test_concentration_disk_two_points_reports_divergence(disk):
    # the symmetric two-point system on the disk has no admissible solution
    res = solve_concentration_points(GreenOracle(disk), 2, [(-0.3, 0.0), (0.3, 0.0)])
    assert not res.converged and res.message
    with pytest.raises(ConvergenceError):
        raise_if_failed(res)


def test_concentration_rejects_bad_init(disk):
    with pytest.raises(GeometryError):
        solve_concentration_points(GreenOracle(disk), 1, [(1.5, 0.0)])


def test_save_points_json(tmp_path):
    path = tmp_path / "pts.json"
    save_points_json([[0.1, 0.2], [0.3, 0.4]], path)
    assert json.loads(path.read_text()) == [[0.1, 0.2], [0.3, 0.4]]


def test_grid_scan_disk_pairs(disk):
    o = GreenOracle(disk)
    a = np.array([[-0.5, 0.0], [-0.3, 0.0]])
    b = np.array([[0.3, 0.0], [0.5, 0.0]])
    x1, x2, phi, table = grid_scan_pairs(o, a, b)
    assert table.shape == (2, 2)
    assert phi == pytest.approx(kirchhoff_routh(o, [x1, x2])[0])
