"""Four-parameter family of fixed-area quadrilaterals.

A member of the family is determined by (a1, a2, c, S1) together with the
half-area scale S: it is the quadrilateral with vertices

    (-c, 0), (a1, S1/c), (c, 0), (a2, -S2/c),      S2 = 2S - S1,

listed counterclockwise.  Its area is always 2S.  The distinguished member
(0, 0, sqrt(S), S) is the rotated square of side sqrt(2S).  The module also
provides the piecewise linear maps between the rotated reference square and a
general member, the pullback inner-product identities those maps satisfy, and
an approximate Hausdorff distance to the equal-area square.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ._quadrature import integrate_triangles, segment_rule
from .errors import ContractError, GeometryError, ParameterDomainError

__all__ = [
    "QuadParams",
    "EdgeId",
    "EDGE_IDS",
    "PiecewiseLinearMap",
    "quad_vertices",
    "reference_square_vertices",
    "polygon_area",
    "polygon_centroid",
    "edge_endpoints",
    "edge_length",
    "perimeter",
    "interior_angles",
    "is_convex",
    "map_forward",
    "map_inverse",
    "pullback_inner_products",
    "PullbackCheck",
    "hausdorff_distance_to_square",
]


@dataclass(frozen=True)
class QuadParams:
    """Parameters (a1, a2, c, S1; S) of one quadrilateral of area 2S."""

    a1: float
    a2: float
    c: float
    S1: float
    S: float = 1.0

    def __post_init__(self):
        for name in ("a1", "a2", "c", "S1", "S"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterDomainError(f"{name} must be finite, got {value!r}")
        if self.S <= 0.0:
            raise ParameterDomainError(f"S must be positive, got {self.S}")
        if self.c <= 0.0:
            raise ParameterDomainError(f"c must be positive, got {self.c}")
        if not 0.0 < self.S1 < 2.0 * self.S:
            raise ParameterDomainError(
                f"S1 must lie in (0, 2S) = (0, {2.0 * self.S}), got {self.S1}"
            )

    @property
    def S2(self) -> float:
        return 2.0 * self.S - self.S1

    @property
    def b1(self) -> float:
        return self.S1 / self.c

    @property
    def b2(self) -> float:
        return self.S2 / self.c

    @property
    def c0(self) -> float:
        """c-value of the square member, sqrt(S)."""
        return math.sqrt(self.S)

    @classmethod
    def square(cls, S: float = 1.0) -> "QuadParams":
        return cls(0.0, 0.0, math.sqrt(S), S, S)

    def is_square(self, tol: float = 0.0) -> bool:
        return (
            abs(self.a1) <= tol
            and abs(self.a2) <= tol
            and abs(self.c - self.c0) <= tol
            and abs(self.S1 - self.S) <= tol
        )

    def reflected(self) -> "QuadParams":
        """The mirror image across the x-axis, (a2, a1, c, S2)."""
        return QuadParams(self.a2, self.a1, self.c, self.S2, self.S)

    def to_dict(self) -> dict:
        return {"a1": self.a1, "a2": self.a2, "c": self.c, "S1": self.S1, "S": self.S}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "QuadParams":
        return cls(
            a1=float(data["a1"]),
            a2=float(data["a2"]),
            c=float(data["c"]),
            S1=float(data["S1"]),
            S=float(data.get("S", 1.0)),
        )

    @classmethod
    def from_json(cls, text: str) -> "QuadParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class EdgeId:
    """Boundary segment label (i, j): half j in {1: upper, 2: lower}, leg i.

    Leg i = 1 runs from (-c, 0) to the apex of half j; leg i = 2 runs from the
    apex to (c, 0).  The four labels enumerate the boundary exactly once.
    """

    i: int
    j: int

    def __post_init__(self):
        if self.i not in (1, 2) or self.j not in (1, 2):
            raise ParameterDomainError(f"edge indices must be in {{1,2}}, got {self}")

    @property
    def sign(self) -> float:
        """(-1)^(i+1): +1 for the leg meeting (-c,0), -1 for the one at (c,0)."""
        return 1.0 if self.i == 1 else -1.0


EDGE_IDS = (EdgeId(1, 1), EdgeId(2, 1), EdgeId(1, 2), EdgeId(2, 2))


def reference_square_vertices(S: float = 1.0) -> np.ndarray:
    """Vertices of the rotated reference square, CCW from (-sqrt(S), 0)."""
    r = math.sqrt(S)
    return np.array([[-r, 0.0], [0.0, r], [r, 0.0], [0.0, -r]])


def quad_vertices(p: QuadParams) -> np.ndarray:
    """Vertices (4, 2) of the quadrilateral in boundary-label order.

    Starts at (-c, 0) and follows the upper half first, so that the segment
    from vertex k to vertex k+1 carries the k-th label of EDGE_IDS.  This
    traversal runs clockwise; the signed shoelace area is -2S.
    """
    return np.array(
        [
            [-p.c, 0.0],
            [p.a1, p.S1 / p.c],
            [p.c, 0.0],
            [p.a2, -p.S2 / p.c],
        ]
    )


def polygon_area(vertices: np.ndarray) -> float:
    """Signed shoelace area (positive for CCW orientation)."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def polygon_centroid(vertices: np.ndarray) -> np.ndarray:
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    area = 0.5 * cross.sum()
    cx = np.dot(x + np.roll(x, -1), cross) / (6.0 * area)
    cy = np.dot(y + np.roll(y, -1), cross) / (6.0 * area)
    return np.array([cx, cy])


def edge_endpoints(p: QuadParams, e: EdgeId) -> tuple[np.ndarray, np.ndarray]:
    """Endpoints of the boundary segment labelled e, in leg order."""
    aj = p.a1 if e.j == 1 else p.a2
    Sj = p.S1 if e.j == 1 else p.S2
    apex = np.array([aj, Sj / p.c if e.j == 1 else -Sj / p.c])
    if e.i == 1:
        return np.array([-p.c, 0.0]), apex
    return apex, np.array([p.c, 0.0])


def edge_length(p: QuadParams, e: EdgeId) -> float:
    """Length of boundary segment e: sqrt(Sj^2/c^2 + (aj + (-1)^(i+1) c)^2)."""
    aj = p.a1 if e.j == 1 else p.a2
    Sj = p.S1 if e.j == 1 else p.S2
    return math.hypot(Sj / p.c, aj + e.sign * p.c)


def perimeter(p: QuadParams) -> float:
    return sum(edge_length(p, e) for e in EDGE_IDS)


def interior_angles(p: QuadParams) -> np.ndarray:
    """Interior angles at the four vertices, in radians, each in (0, 2*pi).

    Works for the non-convex members of the family too (a reflex vertex
    reports its angle above pi).  Raises GeometryError for a collinear
    vertex triple, i.e. a degenerate quadrilateral.
    """
    v = quad_vertices(p)
    orientation = 1.0 if polygon_area(v) > 0.0 else -1.0
    angles = np.empty(4)
    for k in range(4):
        e_in = v[k] - v[k - 1]
        e_out = v[(k + 1) % 4] - v[k]
        cross = e_in[0] * e_out[1] - e_in[1] * e_out[0]
        dot = float(np.dot(e_in, e_out))
        scale = float(np.linalg.norm(e_in) * np.linalg.norm(e_out))
        if scale == 0.0 or abs(cross) <= 1e-14 * scale:
            raise GeometryError(f"collinear vertex triple at vertex {k} of {p}")
        angles[k] = math.pi - math.atan2(orientation * cross, dot)
    return angles


def is_convex(p: QuadParams) -> bool:
    try:
        return bool(np.all(interior_angles(p) < math.pi))
    except GeometryError:
        return False


@dataclass(frozen=True)
class PiecewiseLinearMap:
    """A linear map per closed half-plane, continuous across y = 0.

    ``upper`` applies where y >= 0, ``lower`` where y < 0 (the halves agree on
    the shared segment, so the choice at y = 0 is immaterial).
    """

    upper: np.ndarray
    lower: np.ndarray

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        out = np.where(
            (pts[:, 1] >= 0.0)[:, None],
            pts @ self.upper.T,
            pts @ self.lower.T,
        )
        return out[0] if single else out

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.apply(points)


def map_forward(p: QuadParams) -> PiecewiseLinearMap:
    """Map from the reference square onto the quadrilateral.

    Sends (+-sqrt(S), 0) to (+-c, 0) and (0, +-sqrt(S)) to the apexes.  The
    upper block has determinant S1/S, the lower S2/S.
    """
    c0 = p.c0
    upper = np.array(
        [[p.c / c0, p.a1 * c0 / p.S], [0.0, c0 * p.S1 / (p.c * p.S)]]
    )
    lower = np.array(
        [[p.c / c0, -p.a2 * c0 / p.S], [0.0, c0 * p.S2 / (p.c * p.S)]]
    )
    return PiecewiseLinearMap(upper, lower)


def map_inverse(p: QuadParams) -> PiecewiseLinearMap:
    """Map from the quadrilateral back onto the reference square."""
    c0 = p.c0
    upper = np.array(
        [[c0 / p.c, -p.a1 * c0 / p.S1], [0.0, p.c * p.S / (c0 * p.S1)]]
    )
    lower = np.array(
        [[c0 / p.c, p.a2 * c0 / p.S2], [0.0, p.c * p.S / (c0 * p.S2)]]
    )
    return PiecewiseLinearMap(upper, lower)


@dataclass(frozen=True)
class PullbackCheck:
    """Both sides of the interior and per-edge pullback identities."""

    interior_lhs: float
    interior_rhs: float
    edge_lhs: np.ndarray
    edge_rhs: np.ndarray

    @property
    def interior_mismatch(self) -> float:
        return abs(self.interior_lhs - self.interior_rhs)

    @property
    def edge_mismatch(self) -> np.ndarray:
        return np.abs(self.edge_lhs - self.edge_rhs)


def pullback_inner_products(
    p: QuadParams, u, v, order: int = 24, cross_order: int = 31
) -> PullbackCheck:
    """Evaluate both sides of the change-of-variables identities numerically.

    Interior:  <u o L, v o L>_{ref square} against
               (S/S1) <u, v>_{upper half} + (S/S2) <u, v>_{lower half},
    per edge:  <u, v>_{edge} against (|edge| / |ref edge|) <u o L, v o L>
               over the matching reference edge.

    ``u`` and ``v`` are callables taking an (k, 2) array of points on the
    quadrilateral.  The two sides use quadrature rules of different order
    (``order`` vs ``cross_order``) so the agreement is a genuine check rather
    than an algebraic identity of one point set.
    """
    fwd = map_forward(p)
    rS = math.sqrt(p.S)
    ref_upper = [(np.array([-rS, 0.0]), np.array([rS, 0.0]), np.array([0.0, rS]))]
    ref_lower = [(np.array([-rS, 0.0]), np.array([rS, 0.0]), np.array([0.0, -rS]))]

    def composed(pts):
        values = u(fwd.apply(pts)) * v(fwd.apply(pts))
        if not np.all(np.isfinite(values)):
            raise ContractError("sample functions returned non-finite values")
        return values

    lhs = integrate_triangles(composed, ref_upper + ref_lower, order=order)

    verts = quad_vertices(p)
    phys_upper = [(verts[0], verts[2], verts[1])]
    phys_lower = [(verts[0], verts[2], verts[3])]

    def product(pts):
        values = u(pts) * v(pts)
        if not np.all(np.isfinite(values)):
            raise ContractError("sample functions returned non-finite values")
        return values

    rhs = (p.S / p.S1) * integrate_triangles(product, phys_upper, order=cross_order)
    rhs += (p.S / p.S2) * integrate_triangles(product, phys_lower, order=cross_order)

    ref_len = math.sqrt(2.0 * p.S)
    square = QuadParams.square(p.S)
    edge_lhs = np.empty(4)
    edge_rhs = np.empty(4)
    for k, e in enumerate(EDGE_IDS):
        q0, q1 = edge_endpoints(p, e)
        pts, w = segment_rule(q0, q1, cross_order)
        edge_lhs[k] = float(np.dot(w, product(pts)))
        r0, r1 = edge_endpoints(square, e)
        pts0, w0 = segment_rule(r0, r1, order)
        ratio = edge_length(p, e) / ref_len
        edge_rhs[k] = ratio * float(np.dot(w0, composed(pts0)))
    return PullbackCheck(lhs, rhs, edge_lhs, edge_rhs)


def _sample_boundary(vertices: np.ndarray, per_edge: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, per_edge, endpoint=False)
    chunks = []
    for k in range(len(vertices)):
        a = vertices[k]
        b = vertices[(k + 1) % len(vertices)]
        chunks.append(a[None, :] + t[:, None] * (b - a)[None, :])
    return np.concatenate(chunks, axis=0)


def _points_in_polygon(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Crossing-number containment test for a simple polygon (vectorized)."""
    x, y = points[:, 0], points[:, 1]
    inside = np.zeros(len(points), dtype=bool)
    n = len(vertices)
    for k in range(n):
        x0, y0 = vertices[k]
        x1, y1 = vertices[(k + 1) % n]
        crosses = (y0 > y) != (y1 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (x < np.where(crosses, xi, np.inf))
    return inside


def _dist_to_boundary(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Distance from each point to the polygon boundary (min over segments)."""
    best = np.full(len(points), np.inf)
    n = len(vertices)
    for k in range(n):
        a = vertices[k]
        b = vertices[(k + 1) % n]
        ab = b - a
        denom = float(np.dot(ab, ab))
        t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
        proj = a[None, :] + t[:, None] * ab[None, :]
        best = np.minimum(best, np.linalg.norm(points - proj, axis=1))
    return best


def _directed_hausdorff(samples: np.ndarray, target: np.ndarray) -> float:
    d = _dist_to_boundary(samples, target)
    d[_points_in_polygon(samples, target)] = 0.0
    return float(d.max())


def hausdorff_distance_to_square(
    p: QuadParams, rotations: int = 720, samples_per_edge: int = 1000
) -> float:
    """Approximate Hausdorff distance to the equal-area square.

    Aligns centroids, then minimises over a uniform grid of rotations, with
    the boundary of each polygon densely sampled.  The result is an
    approximation of the isometry-minimised set distance; the translation
    and rotation searches are discrete, the per-alignment distance is a
    sampled supremum.
    """
    square = reference_square_vertices(p.S)
    quad = quad_vertices(p) - polygon_centroid(quad_vertices(p))
    quad_samples = _sample_boundary(quad, samples_per_edge)
    square_samples = _sample_boundary(square, samples_per_edge)

    best = np.inf
    angles = np.linspace(0.0, 2.0 * math.pi, rotations, endpoint=False)
    for theta in angles:
        rot = np.array(
            [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
        )
        rq_vertices = quad @ rot.T
        rq_samples = quad_samples @ rot.T
        d = max(
            _directed_hausdorff(rq_samples, square),
            _directed_hausdorff(square_samples, rq_vertices),
        )
        best = min(best, d)
    return best
