"""Triangulations of polygonal domains with optional grading toward points."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import triangle
from scipy.spatial import cKDTree

from ..errors import LocationError, MeshError

# minimum angle passed to Triangle's quality refinement
MIN_ANGLE = 30


@dataclass(eq=False)
class Mesh:
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_mask: np.ndarray

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        self.boundary_mask = np.asarray(self.boundary_mask, dtype=bool)
        a = self.signed_areas
        if np.any(a < 0):
            flip = a < 0
            self.triangles[flip] = self.triangles[flip][:, [0, 2, 1]]
            self.__dict__.pop("signed_areas", None)
        if np.any(self.signed_areas <= 0):
            raise MeshError("degenerate triangle in mesh")

    @property
    def n_nodes(self):
        return len(self.nodes)

    @cached_property
    def signed_areas(self):
        p = self.nodes[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def areas(self):
        return self.signed_areas

    @cached_property
    def element_diameters(self):
        p = self.nodes[self.triangles]
        e = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
        return np.sqrt(np.max(np.sum(e * e, axis=-1), axis=1))

    @property
    def h_max(self):
        return float(np.max(self.element_diameters))

    @cached_property
    def interior(self):
        return np.flatnonzero(~self.boundary_mask)

    @cached_property
    def centroids(self):
        return self.nodes[self.triangles].mean(axis=1)

    @cached_property
    def _centroid_tree(self):
        return cKDTree(self.centroids)

    @cached_property
    def node_tree(self):
        return cKDTree(self.nodes)

    @cached_property
    def gradients(self):
        """Per-element gradients of the three P1 basis functions, shape (M, 3, 2)."""
        p = self.nodes[self.triangles]
        x, y = p[..., 0], p[..., 1]
        two_a = 2.0 * self.signed_areas
        g = np.empty(p.shape)
        g[:, 0, 0] = y[:, 1] - y[:, 2]
        g[:, 1, 0] = y[:, 2] - y[:, 0]
        g[:, 2, 0] = y[:, 0] - y[:, 1]
        g[:, 0, 1] = x[:, 2] - x[:, 1]
        g[:, 1, 1] = x[:, 0] - x[:, 2]
        g[:, 2, 1] = x[:, 1] - x[:, 0]
        return g / two_a[:, None, None]

    def barycentric(self, elem, x):
        p = self.nodes[self.triangles[elem]]
        T = np.stack([p[..., 1, :] - p[..., 0, :], p[..., 2, :] - p[..., 0, :]], axis=-1)
        lam12 = np.linalg.solve(T, (x - p[..., 0, :])[..., None])[..., 0]
        return np.concatenate([1.0 - lam12.sum(axis=-1, keepdims=True), lam12], axis=-1)

    def locate(self, x, tol=1e-10):
        """Containing element and barycentric coordinates for each point.

        Raises :class:`LocationError` for points outside the mesh.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        k = min(12, len(self.triangles))
        _, cand = self._centroid_tree.query(x, k=k)
        cand = cand.reshape(len(x), k)
        elem = np.full(len(x), -1)
        bary = np.zeros((len(x), 3))
        for j in range(k):
            todo = elem < 0
            if not np.any(todo):
                break
            e = cand[todo, j]
            lam = self.barycentric(e, x[todo])
            ok = np.all(lam >= -tol, axis=1)
            idx = np.flatnonzero(todo)[ok]
            elem[idx] = e[ok]
            bary[idx] = lam[ok]
        for i in np.flatnonzero(elem < 0):
            lam = self.barycentric(np.arange(len(self.triangles)), np.broadcast_to(x[i], (len(self.triangles), 2)))
            ok = np.flatnonzero(np.all(lam >= -tol, axis=1))
            if len(ok) == 0:
                raise LocationError(f"point {tuple(x[i])} lies outside the mesh")
            elem[i] = ok[0]
            bary[i] = lam[ok[0]]
        return elem, bary

    def boundary_edges(self):
        t = self.triangles
        edges = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        uniq, counts = np.unique(edges, axis=0, return_counts=True)
        return uniq[counts == 1]

    # plain-text I/O ------------------------------------------------------
    def save(self, path):
        with open(path, "w") as fh:
            fh.write(f"{self.n_nodes} {len(self.triangles)}\n")
            for (x, y), b in zip(self.nodes, self.boundary_mask):
                fh.write(f"{float(x)!r} {float(y)!r} {int(b)}\n")
            for i, j, k in self.triangles:
                fh.write(f"{i} {j} {k}\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise MeshError(f"{path}: first line must be 'N_nodes N_tris'")
            n, m = int(header[0]), int(header[1])
            node_rows = [fh.readline().split() for _ in range(n)]
            tri_rows = [fh.readline().split() for _ in range(m)]
        if any(len(r) != 3 for r in node_rows) or any(len(r) != 3 for r in tri_rows):
            raise MeshError(f"{path}: truncated or malformed mesh file")
        nodes = np.array([[float(r[0]), float(r[1])] for r in node_rows])
        bmask = np.array([int(r[2]) != 0 for r in node_rows])
        tris = np.array([[int(c) for c in r] for r in tri_rows], dtype=np.int64)
        if tris.size and (tris.min() < 0 or tris.max() >= n):
            raise MeshError(f"{path}: triangle references a missing node")
        return cls(nodes, tris, bmask)


def size_field(h_target, grading, diameter):
    """Target element size as a function of position.

    With ``grading = (centers, ratio)`` the size ramps linearly from
    ``ratio * h_target`` at the nearest centre up to ``h_target`` at distance
    ``4 sqrt(ratio) * diameter``.
    """
    if grading is None:
        return lambda x: np.full(len(x), h_target)
    centers, ratio = grading
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radius = 4.0 * np.sqrt(ratio) * diameter

    def f(x):
        d = np.min(np.linalg.norm(x[:, None, :] - centers[None], axis=-1), axis=1)
        return h_target * np.minimum(1.0, ratio + (1.0 - ratio) * d / radius)

    return f


def _structured_rectangle(domain, h_target):
    # criss-cross cells (corner nodes + cell centres): symmetric under both
    # mid-line reflections, so symmetric data give exactly symmetric solutions
    w, h = domain.params.get("width", 1.0), domain.params.get("height", 1.0)
    x0, y0 = domain.params.get("origin", (0.0, 0.0))
    nx = max(2, int(np.ceil(w / h_target)))
    ny = max(2, int(np.ceil(h / h_target)))
    # longest edge of a criss-cross triangle is the cell side
    while max(w / nx, h / ny) > h_target:
        nx, ny = nx + 1, ny + 1
    xs = x0 + w * np.arange(nx + 1) / nx
    ys = y0 + h * np.arange(ny + 1) / ny
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    corners = np.column_stack([X.ravel(), Y.ravel()])
    cx = 0.5 * (xs[:-1] + xs[1:])
    cy = 0.5 * (ys[:-1] + ys[1:])
    CX, CY = np.meshgrid(cx, cy, indexing="ij")
    centres = np.column_stack([CX.ravel(), CY.ravel()])
    nodes = np.vstack([corners, centres])
    cid = lambda i, j: i * (ny + 1) + j
    tris = []
    base = len(corners)
    for i in range(nx):
        for j in range(ny):
            c = base + i * ny + j
            a, b, d, e = cid(i, j), cid(i + 1, j), cid(i + 1, j + 1), cid(i, j + 1)
            tris += [[a, b, c], [b, d, c], [d, e, c], [e, a, c]]
    tris = np.array(tris)
    bmask = np.zeros(len(nodes), dtype=bool)
    bmask[: len(corners)] = ((X == xs[0]) | (X == xs[-1]) | (Y == ys[0]) | (Y == ys[-1])).ravel()
    return Mesh(nodes, tris, bmask)


def _ring_patches(domain, grading, hfun):
    # Concentric rings of nodes around each grading centre.  A locally
    # symmetric patch keeps the discrete peak position well defined; on fully
    # unstructured meshes Newton stalls on the nearly neutral translation mode
    # of sharp bubbles.
    centers = np.atleast_2d(np.asarray(grading[0], dtype=float))
    centers = centers[domain.contains(centers)]
    if len(centers) == 0:
        return np.zeros((0, 2))
    reach = 0.45 * domain.boundary_distance(centers)
    if len(centers) > 1:
        d = np.linalg.norm(centers[:, None] - centers[None], axis=-1)
        np.fill_diagonal(d, np.inf)
        reach = np.minimum(reach, 0.45 * np.min(d, axis=1))
    out = []
    for c, R in zip(centers, reach):
        out.append(c[None])
        rho, k = 0.0, 0
        while True:
            h = float(hfun((c + [rho, 0.0])[None])[0])
            rho += 0.75 * h
            if rho > R:
                break
            n = 6 * max(1, int(np.ceil(2 * np.pi * rho / (6 * 0.85 * h))))
            t = 2 * np.pi * np.arange(n) / n + (np.pi / n) * (k % 2)
            out.append(c + rho * np.column_stack([np.cos(t), np.sin(t)]))
            k += 1
    return np.vstack(out)


def generate_mesh(domain, h_target, grading=None, max_rounds=40):
    """Quality Delaunay triangulation of ``domain`` with element diameter <= size field.

    ``grading`` is ``None`` or ``(centers, ratio)`` with ``0 < ratio <= 1``.
    Ungraded rectangles get a structured symmetric criss-cross mesh.
    """
    if not h_target > 0:
        raise MeshError("h_target must be positive")
    if grading is not None:
        centers, ratio = grading
        if not 0 < ratio <= 1:
            raise MeshError("grading ratio must lie in (0, 1]")
        if len(np.atleast_2d(centers)) == 0:
            grading = None
    if domain.kind == "rectangle" and grading is None:
        return _structured_rectangle(domain, h_target)
    poly = domain.polygon()
    n = len(poly)
    hfun = size_field(h_target, grading, domain.diameter())
    # pre-split boundary segments to the local size so Triangle need not
    pts, segs = [], []
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        L = np.linalg.norm(b - a)
        hs = float(np.min(hfun(np.array([a, b, 0.5 * (a + b)]))))
        m = max(1, int(np.ceil(L / (0.9 * hs))))
        for k in range(m):
            pts.append(a + (b - a) * k / m)
    pts = np.array(pts)
    segs = np.column_stack([np.arange(len(pts)), (np.arange(len(pts)) + 1) % len(pts)])
    if grading is not None:
        pts = np.vstack([pts, _ring_patches(domain, grading, hfun)])
    geom = {"vertices": pts, "segments": segs}
    A0 = 0.35 * h_target ** 2
    try:
        tri = triangle.triangulate(geom, f"pq{MIN_ANGLE}a{A0:.17g}Q")
    except Exception as exc:  # Triangle signals bad input with generic errors
        raise MeshError(f"triangulation failed: {exc}") from exc
    for _ in range(max_rounds):
        V, T = tri["vertices"], tri["triangles"]
        p = V[T]
        e = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
        diam = np.sqrt(np.max(np.sum(e * e, axis=-1), axis=1))
        target = hfun(p.mean(axis=1))
        # sizes at the vertices too, so a triangle never exceeds the field anywhere on it
        target = np.minimum(target, np.min(hfun(p.reshape(-1, 2)).reshape(-1, 3), axis=1))
        bad = diam > target
        if not np.any(bad):
            break
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        maxa = np.where(bad, np.minimum(0.8 * area, 0.42 * target ** 2), -1.0)
        tri = triangle.triangulate({"vertices": V, "triangles": T, "segments": tri["segments"],
                                    "triangle_max_area": maxa}, f"rpq{MIN_ANGLE}aQ")
    else:
        raise MeshError("size-field refinement did not terminate")
    V, T = tri["vertices"], tri["triangles"]
    mesh = Mesh(V, T, np.zeros(len(V), dtype=bool))
    bmask = np.zeros(len(V), dtype=bool)
    bmask[np.unique(mesh.boundary_edges())] = True
    mesh.boundary_mask = bmask
    mesh.__dict__.pop("interior", None)
    if len(mesh.interior) == 0:
        raise MeshError("mesh has no interior nodes")
    return mesh
