"""Symmetric crisscross triangulation of the rotated reference square.

The square is meshed in the rotated frame u = (x+y)/sqrt(2), v = (y-x)/sqrt(2)
where it becomes [-L, L]^2, L = sqrt(S/2): an n-by-n grid of cells, each cut
into four triangles by its diagonals.  Every node coordinate is L*q/n for an
integer q, so the three reflections x -> -x, y -> -y and (x, y) -> (y, x) map
the node set onto itself exactly (they act on the integer labels).  The line
y = 0 is the anti-diagonal v = -u of the grid and is a union of element
edges, so no triangle straddles it: piecewise-constant coefficients per half
are constant per triangle.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ParameterDomainError
from .geometry import EDGE_IDS, EdgeId

__all__ = ["Mesh", "build_mesh", "refine_mesh", "symmetry_permutation"]

_INV_SQRT2 = 1.0 / math.sqrt(2.0)

# boundary side order matches EDGE_IDS: (1,1) v=L, (2,1) u=L, (1,2) u=-L, (2,2) v=-L
_SIDE_OF_EDGE = {e: k for k, e in enumerate(EDGE_IDS)}


@dataclass
class Mesh:
    """Triangulation of the rotated square of area 2S.

    nodes          (N, 2) x-y coordinates
    triangles      (T, 3) node indices, counterclockwise
    bedge_nodes    (B, 2) node indices of boundary segments
    bedge_side     (B,)   index into EDGE_IDS for each boundary segment
    tri_upper      (T,)   True where the triangle lies in {y >= 0}
    refinement_level  nodes per half-diagonal; mesh size h = sqrt(2S)/level
    """

    nodes: np.ndarray
    triangles: np.ndarray
    bedge_nodes: np.ndarray
    bedge_side: np.ndarray
    tri_upper: np.ndarray
    refinement_level: int
    S: float
    # integer labels (u, v) = L*(qu, qv)/q_den; kept for exact symmetry lookups
    qu: np.ndarray = field(repr=False, default=None)
    qv: np.ndarray = field(repr=False, default=None)
    q_den: int = 0

    @property
    def dof_count(self) -> int:
        return len(self.nodes)

    @property
    def h(self) -> float:
        return math.sqrt(2.0 * self.S) / self.refinement_level

    @property
    def boundary_edges(self) -> list[tuple[tuple[int, int], EdgeId]]:
        return [
            ((int(a), int(b)), EDGE_IDS[s])
            for (a, b), s in zip(self.bedge_nodes, self.bedge_side)
        ]

    def triangle_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def to_dict(self) -> dict:
        return {
            "refinement_level": self.refinement_level,
            "S": self.S,
            "nodes": self.nodes.tolist(),
            "triangles": self.triangles.tolist(),
            "boundary_edges": [
                {"nodes": [int(a), int(b)], "i": EDGE_IDS[s].i, "j": EDGE_IDS[s].j}
                for (a, b), s in zip(self.bedge_nodes, self.bedge_side)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def save_text(self, path) -> None:
        """Whitespace node/element lists: counts, then nodes, then triangles."""
        with open(path, "w") as fh:
            fh.write(f"{len(self.nodes)} {len(self.triangles)}\n")
            for x, y in self.nodes:
                fh.write(f"{float(x)!r} {float(y)!r}\n")
            for i, j, k in self.triangles:
                fh.write(f"{i} {j} {k}\n")


def build_mesh(n: int, S: float = 1.0) -> Mesh:
    """Crisscross mesh with n cells per grid direction (h = sqrt(2S)/n)."""
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ParameterDomainError(f"refinement level must be an integer >= 2, got {n}")
    if S <= 0.0:
        raise ParameterDomainError(f"S must be positive, got {S}")
    n = int(n)
    L = math.sqrt(S / 2.0)

    # integer u,v labels: corners at even multiples, cell centres at odd ones
    corner = np.arange(-n, n + 1, 2, dtype=np.int64)
    centre = np.arange(-n + 1, n, 2, dtype=np.int64)
    qu_c, qv_c = np.meshgrid(corner, corner, indexing="ij")
    qu_m, qv_m = np.meshgrid(centre, centre, indexing="ij")
    qu = np.concatenate([qu_c.ravel(), qu_m.ravel()])
    qv = np.concatenate([qv_c.ravel(), qv_m.ravel()])

    def cid(iu, iv):  # corner node id
        return iu * (n + 1) + iv

    def mid(iu, iv):  # cell-centre node id
        return (n + 1) * (n + 1) + iu * n + iv

    tris = []
    upper = []
    bnodes = []
    bside = []
    for iu in range(n):
        for iv in range(n):
            sw, se = cid(iu, iv), cid(iu + 1, iv)
            ne, nw = cid(iu + 1, iv + 1), cid(iu, iv + 1)
            ctr = mid(iu, iv)
            for tri in ((sw, se, ctr), (se, ne, ctr), (ne, nw, ctr), (nw, sw, ctr)):
                tris.append(tri)
                qsum = int(qu[tri[0]] + qv[tri[0]] + qu[tri[1]] + qv[tri[1]]
                           + qu[tri[2]] + qv[tri[2]])
                upper.append(qsum > 0)
            if iv == n - 1:
                bnodes.append((ne, nw)); bside.append(0)   # v = +L
            if iu == n - 1:
                bnodes.append((se, ne)); bside.append(1)   # u = +L
            if iu == 0:
                bnodes.append((nw, sw)); bside.append(2)   # u = -L
            if iv == 0:
                bnodes.append((sw, se)); bside.append(3)   # v = -L

    u = L * qu / n
    v = L * qv / n
    nodes = np.column_stack([(u - v) * _INV_SQRT2, (u + v) * _INV_SQRT2])
    return Mesh(
        nodes=nodes,
        triangles=np.array(tris, dtype=np.int64),
        bedge_nodes=np.array(bnodes, dtype=np.int64),
        bedge_side=np.array(bside, dtype=np.int64),
        tri_upper=np.array(upper, dtype=bool),
        refinement_level=n,
        S=S,
        qu=qu,
        qv=qv,
        q_den=n,
    )


def refine_mesh(mesh: Mesh) -> Mesh:
    """Midpoint (red) refinement: nested, symmetry- and split-preserving.

    Each triangle is divided into four congruent children, so discrete
    eigenvalues are non-increasing from mesh to refine_mesh(mesh).  The
    result has mesh size h/2 but a different topology from
    build_mesh(2 * level).
    """
    if mesh.qu is None:
        raise ContractError("mesh lacks integer labels; cannot refine")
    L = math.sqrt(mesh.S / 2.0)
    den = 2 * mesh.q_den
    key_to_id = {(2 * int(a), 2 * int(b)): i
                 for i, (a, b) in enumerate(zip(mesh.qu, mesh.qv))}
    qu = [2 * int(a) for a in mesh.qu]
    qv = [2 * int(b) for b in mesh.qv]

    def midpoint(i, j):
        key = (qu[i] + qu[j]) // 2, (qv[i] + qv[j]) // 2
        node = key_to_id.get(key)
        if node is None:
            node = len(qu)
            key_to_id[key] = node
            qu.append(key[0])
            qv.append(key[1])
        return node

    tris = []
    upper = []
    for (i, j, k), up in zip(mesh.triangles, mesh.tri_upper):
        mij, mjk, mki = midpoint(i, j), midpoint(j, k), midpoint(k, i)
        tris.extend([(i, mij, mki), (mij, j, mjk), (mki, mjk, k), (mij, mjk, mki)])
        upper.extend([up] * 4)

    bnodes = []
    bside = []
    for (a, b), s in zip(mesh.bedge_nodes, mesh.bedge_side):
        m = midpoint(int(a), int(b))
        bnodes.extend([(int(a), m), (m, int(b))])
        bside.extend([s, s])

    qu = np.array(qu, dtype=np.int64)
    qv = np.array(qv, dtype=np.int64)
    u = L * qu / den
    v = L * qv / den
    nodes = np.column_stack([(u - v) * _INV_SQRT2, (u + v) * _INV_SQRT2])
    return Mesh(
        nodes=nodes,
        triangles=np.array(tris, dtype=np.int64),
        bedge_nodes=np.array(bnodes, dtype=np.int64),
        bedge_side=np.array(bside, dtype=np.int64),
        tri_upper=np.array(upper, dtype=bool),
        refinement_level=2 * mesh.refinement_level,
        S=mesh.S,
        qu=qu,
        qv=qv,
        q_den=den,
    )


def symmetry_permutation(mesh: Mesh, which: str) -> np.ndarray:
    """Node permutation realising a reflection of the square.

    which = "x":    x -> -x        (u, v) -> (v, u)
    which = "y":    y -> -y        (u, v) -> (-v, -u)
    which = "swap": (x, y) -> (y, x):  (u, v) -> (u, -v)

    Exact because nodes carry integer (u, v) labels.
    """
    if mesh.qu is None:
        raise ContractError("mesh lacks integer labels")
    lookup = {(int(a), int(b)): i for i, (a, b) in enumerate(zip(mesh.qu, mesh.qv))}
    perm = np.empty(len(mesh.qu), dtype=np.int64)
    for i, (a, b) in enumerate(zip(mesh.qu, mesh.qv)):
        a, b = int(a), int(b)
        if which == "x":
            key = (b, a)
        elif which == "y":
            key = (-b, -a)
        elif which == "swap":
            key = (a, -b)
        else:
            raise ValueError(f"unknown symmetry {which!r}")
        perm[i] = lookup[key]
    return perm
