"""Planar domain descriptions.

Every domain is ultimately a simple counterclockwise polygon; the unit disk is
additionally flagged so that closed-form Green functions can be used.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvalidParameterError

DISK_SIDES = 256
ARC_POINTS = 96


def _segments_intersect(p1, p2, p3, p4):
    def orient(a, b, c):
        return np.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    return (orient(p1, p2, p3) * orient(p1, p2, p4) < 0
            and orient(p3, p4, p1) * orient(p3, p4, p2) < 0)


def signed_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def is_simple(poly):
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_intersect(a, b, poly[j], poly[(j + 1) % n]):
                return False
    return True


def _dumbbell_polygon(rho, w, L, n_arc):
    # disks of radius rho whose circles meet the neck edges y = +-w/2 exactly
    # at x = +-L/2, so the straight neck has length L
    half = 0.5 * w
    off = np.sqrt(rho * rho - half * half)
    cx = 0.5 * L + off
    phi0 = np.arcsin(half / rho)
    # right lobe: from angle pi - phi0 going clockwise... walk CCW around the whole shape
    t = np.linspace(-np.pi + phi0, np.pi - phi0, n_arc)
    right = np.column_stack([cx + rho * np.cos(t), rho * np.sin(t)])
    left = -right
    return np.vstack([right, left])


@dataclass(frozen=True)
class DomainSpec:
    """A bounded planar domain.

    kind : ``"unit-disk"``, ``"rectangle"``, ``"polygon"`` or ``"dumbbell"``.
    params : geometry; ``width``/``height``/``origin`` for rectangles,
        ``vertices`` for polygons, ``rho``/``w``/``L`` for dumbbells.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("unit-disk", "rectangle", "polygon", "dumbbell"):
            raise DomainError(f"unknown domain kind {self.kind!r}")
        if self.kind == "rectangle":
            if not (self.params.get("width", 1.0) > 0 and self.params.get("height", 1.0) > 0):
                raise DomainError("rectangle sides must be positive")
        if self.kind == "dumbbell":
            rho, w = self.params.get("rho", 1.0), self.params.get("w", 0.3)
            if not 0 < w < 2 * rho:
                raise DomainError("dumbbell neck width must satisfy 0 < w < 2 rho")
            if self.params.get("L", 2.0) <= 0:
                raise DomainError("dumbbell neck length must be positive")
        poly = self.polygon()
        if len(poly) < 3:
            raise DomainError("polygon needs at least three vertices")
        if signed_area(poly) <= 0:
            raise DomainError("polygon must be counterclockwise with positive area")
        if self.kind == "polygon" and not is_simple(poly):
            raise DomainError("polygon is self-intersecting")

    # constructors -------------------------------------------------------
    @classmethod
    def unit_disk(cls):
        return cls("unit-disk")

    @classmethod
    def rectangle(cls, width=1.0, height=1.0, origin=(0.0, 0.0)):
        return cls("rectangle", {"width": float(width), "height": float(height),
                                 "origin": tuple(float(c) for c in origin)})

    @classmethod
    def square(cls):
        return cls.rectangle(1.0, 1.0)

    @classmethod
    def from_vertices(cls, vertices):
        return cls("polygon", {"vertices": [tuple(map(float, v)) for v in vertices]})

    @classmethod
    def dumbbell(cls, rho=1.0, w=0.3, L=2.0, n_arc=ARC_POINTS):
        return cls("dumbbell", {"rho": float(rho), "w": float(w), "L": float(L), "n_arc": int(n_arc)})

    def to_dict(self):
        d = {"kind": self.kind}
        d.update({k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()})
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind", None)
        if kind == "unit-disk":
            if d:
                raise InvalidParameterError(f"unit-disk takes no parameters, got {sorted(d)}")
            return cls.unit_disk()
        if kind == "rectangle":
            return cls.rectangle(**d)
        if kind == "polygon":
            return cls.from_vertices(d["vertices"])
        if kind == "dumbbell":
            return cls.dumbbell(**d)
        raise DomainError(f"unknown domain kind {kind!r}")

    # geometry -----------------------------------------------------------
    @property
    def is_disk(self):
        return self.kind == "unit-disk"

    def polygon(self):
        if self.kind == "unit-disk":
            t = 2 * np.pi * np.arange(DISK_SIDES) / DISK_SIDES
            return np.column_stack([np.cos(t), np.sin(t)])
        if self.kind == "rectangle":
            w, h = self.params.get("width", 1.0), self.params.get("height", 1.0)
            x0, y0 = self.params.get("origin", (0.0, 0.0))
            return np.array([[x0, y0], [x0 + w, y0], [x0 + w, y0 + h], [x0, y0 + h]], dtype=float)
        if self.kind == "polygon":
            return np.asarray(self.params["vertices"], dtype=float)
        return _dumbbell_polygon(self.params.get("rho", 1.0), self.params.get("w", 0.3),
                                 self.params.get("L", 2.0), self.params.get("n_arc", ARC_POINTS))

    def area(self):
        return signed_area(self.polygon())

    def diameter(self):
        if self.is_disk:
            return 2.0
        poly = self.polygon()
        d = poly[:, None, :] - poly[None, :, :]
        return float(np.sqrt(np.max(np.sum(d * d, axis=-1))))

    def boundary_distance(self, x):
        """Distance from points ``x`` to the boundary (exact circle for the disk)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.is_disk:
            return np.abs(1.0 - np.hypot(x[:, 0], x[:, 1]))
        poly = self.polygon()
        a = poly
        b = np.roll(poly, -1, axis=0)
        ab = b - a
        ap = x[:, None, :] - a[None, :, :]
        t = np.clip(np.sum(ap * ab, axis=-1) / np.sum(ab * ab, axis=-1), 0.0, 1.0)
        proj = a[None] + t[..., None] * ab[None]
        return np.sqrt(np.min(np.sum((x[:, None, :] - proj) ** 2, axis=-1), axis=1))

    def contains(self, x):
        """Strict interior test (exact circle for the disk, polygon otherwise)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.is_disk:
            return np.hypot(x[:, 0], x[:, 1]) < 1.0
        poly = self.polygon()
        inside = np.zeros(len(x), dtype=bool)
        xs, ys = x[:, 0], x[:, 1]
        n = len(poly)
        for i in range(n):
            (x1, y1), (x2, y2) = poly[i], poly[(i + 1) % n]
            cond = (y1 > ys) != (y2 > ys)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = x1 + (ys - y1) * (x2 - x1) / (y2 - y1)
            inside ^= cond & (xs < xint)
        return inside & (self.boundary_distance(x) > 0)

    def lobe_centers(self):
        """Centres of the two dumbbell disks."""
        if self.kind != "dumbbell":
            raise DomainError("lobe centres are defined for dumbbells only")
        rho, w, L = self.params.get("rho", 1.0), self.params.get("w", 0.3), self.params.get("L", 2.0)
        cx = 0.5 * L + np.sqrt(rho * rho - 0.25 * w * w)
        return np.array([[-cx, 0.0], [cx, 0.0]])
