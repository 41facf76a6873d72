"""P1 finite-element assembly of the Robin forms on the reference square.

Three assemblies of the same spectral problem are provided.

``assemble_transformed``
    The pullback of the Robin form through the piecewise linear map, with the
    per-half weights that make the transport unitary: interior coefficient
    (Sj/S) * Ginv_j, boundary weight alpha * |edge| / |ref edge| and a
    (Sj/S)-weighted mass.  Its generalized eigenvalues coincide with those of
    the direct assembly on the mapped mesh exactly (same matrices up to
    roundoff), realising the isospectral reduction at the discrete level.

``assemble_direct``
    Standard Robin assembly on the physical quadrilateral, using the mesh
    pushed forward through the map.  Shares no coefficient formulas with the
    transformed route; agreement between the two is a real cross-check.

``assemble_plain_mass``
    The pullback form in its plain-mass normalisation: interior coefficient
    Ginv_j, boundary weight alpha * S * |edge| / (Sj * |ref edge|), unweighted
    mass.  For S1 = S it coincides entrywise with the transported system
    (weights are 1), in particular on the square.  For S1 != S it is a
    different pencil: the plain-mass normalisation hides a weight jump across
    y = 0, and its lowest eigenvalue lies strictly below the quadrilateral's.
    It is exposed because several closed-form identities (for instance the
    all-ones Rayleigh quotient (alpha/2) * l(p)) are identities of this form.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._quadrature import gauss_legendre
from .errors import ContractError
from .geometry import QuadParams, edge_length, map_forward, EDGE_IDS
from .mesh import Mesh

__all__ = [
    "AssembledSystem",
    "BoundaryLayerWarning",
    "assemble_transformed",
    "assemble_direct",
    "assemble_plain_mass",
    "pullback_matrices",
    "boundary_weights_transformed",
    "stiffness_matrix",
    "weighted_mass_matrix",
    "boundary_mass_matrices",
    "directional_stiffness",
    "export_coo",
]


class BoundaryLayerWarning(UserWarning):
    """Mesh too coarse for the O(1/|alpha|) boundary layer."""


@dataclass
class AssembledSystem:
    """Sparse pencil (stiffness_plus_boundary, mass) for one (p, alpha, mesh)."""

    stiffness_plus_boundary: sp.csr_matrix
    mass: sp.csr_matrix
    dof_count: int
    params: QuadParams
    alpha: float
    mesh: Mesh
    kind: str  # "transformed" | "direct" | "plain"


def _check_mesh(p: QuadParams, mesh: Mesh) -> None:
    if abs(mesh.S - p.S) > 1e-12 * max(1.0, p.S):
        raise ContractError(f"mesh built for S={mesh.S}, parameters have S={p.S}")
    y = mesh.nodes[mesh.triangles][:, :, 1]
    tol = 1e-12 * math.sqrt(p.S)
    bad_up = mesh.tri_upper & (y < -tol).any(axis=1)
    bad_dn = ~mesh.tri_upper & (y > tol).any(axis=1)
    if bad_up.any() or bad_dn.any():
        raise ContractError("mesh has triangles crossing the line y = 0")


def _warn_boundary_layer(p: QuadParams, alpha: float, mesh: Mesh) -> None:
    if abs(alpha) * math.sqrt(2.0 * p.S) > 30.0 and mesh.h > 0.2 / abs(alpha):
        warnings.warn(
            f"mesh size h={mesh.h:.3g} does not resolve the boundary layer "
            f"width ~{1.0 / abs(alpha):.3g}; refine to h <= {0.2 / abs(alpha):.3g}",
            BoundaryLayerWarning,
            stacklevel=3,
        )


def _triangle_geometry(nodes: np.ndarray, triangles: np.ndarray):
    p = nodes[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    area = 0.5 * det
    # gradients of the three barycentric basis functions, shape (T, 3, 2)
    grads = np.empty((len(triangles), 3, 2))
    grads[:, 1, 0] = d2[:, 1]
    grads[:, 1, 1] = -d2[:, 0]
    grads[:, 2, 0] = -d1[:, 1]
    grads[:, 2, 1] = d1[:, 0]
    grads[:, 1:] /= det[:, None, None]
    grads[:, 0] = -grads[:, 1] - grads[:, 2]
    return area, grads


def _scatter(local: np.ndarray, triangles: np.ndarray, n: int) -> sp.csr_matrix:
    rows = np.repeat(triangles, 3, axis=1).ravel()
    cols = np.tile(triangles, (1, 3)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    return mat


def _stiffness_from(nodes, triangles, n, G: np.ndarray) -> sp.csr_matrix:
    """Assemble sum_T area_T grad^T G_T grad with G of shape (T, 2, 2)."""
    area, grads = _triangle_geometry(nodes, triangles)
    local = np.einsum("t,tai,tij,tbj->tab", area, grads, G, grads, optimize=True)
    local = 0.5 * (local + np.transpose(local, (0, 2, 1)))
    return _scatter(local, triangles, n)


_MASS_PATTERN = (np.ones((3, 3)) + np.eye(3)) / 12.0


def _mass_from(nodes, triangles, n, weights: np.ndarray) -> sp.csr_matrix:
    area, _ = _triangle_geometry(nodes, triangles)
    local = (weights * area)[:, None, None] * _MASS_PATTERN[None, :, :]
    return _scatter(local, triangles, n)


def _boundary_from(nodes, bedge_nodes, n, edge_weights: np.ndarray) -> sp.csr_matrix:
    """1-D mass matrices on boundary segments, 3-point Gauss per segment."""
    if len(bedge_nodes) == 0:
        return sp.csr_matrix((n, n))
    t, w = gauss_legendre(3)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    shape = np.stack([1.0 - t, t])  # (2, q)
    pattern = np.einsum("q,aq,bq->ab", w, shape, shape)
    a = nodes[bedge_nodes[:, 0]]
    b = nodes[bedge_nodes[:, 1]]
    lengths = np.linalg.norm(b - a, axis=1)
    local = (edge_weights * lengths)[:, None, None] * pattern[None, :, :]
    rows = np.repeat(bedge_nodes, 2, axis=1).ravel()
    cols = np.tile(bedge_nodes, (1, 2)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    return mat


def stiffness_matrix(mesh: Mesh, G_upper: np.ndarray, G_lower: np.ndarray) -> sp.csr_matrix:
    """Stiffness with a constant 2x2 coefficient matrix per half."""
    G = np.where(mesh.tri_upper[:, None, None], G_upper[None], G_lower[None])
    return _stiffness_from(mesh.nodes, mesh.triangles, mesh.dof_count, G)


def weighted_mass_matrix(mesh: Mesh, w_upper: float, w_lower: float) -> sp.csr_matrix:
    w = np.where(mesh.tri_upper, w_upper, w_lower)
    return _mass_from(mesh.nodes, mesh.triangles, mesh.dof_count, w)


def boundary_mass_matrices(mesh: Mesh) -> list[sp.csr_matrix]:
    """Unit-weight boundary mass matrix for each of the four edge labels."""
    out = []
    for s in range(4):
        sel = mesh.bedge_side == s
        out.append(
            _boundary_from(
                mesh.nodes, mesh.bedge_nodes[sel], mesh.dof_count, np.ones(sel.sum())
            )
        )
    return out


def directional_stiffness(mesh: Mesh, i: int, j: int, half: str | None = None) -> sp.csr_matrix:
    """Assembled form  int (d_i phi)(d_j phi)  over the square or one half.

    Used by the symmetry checks on discrete eigenvectors; i, j in {1, 2}.
    """
    E = np.zeros((2, 2))
    E[i - 1, j - 1] += 0.5
    E[j - 1, i - 1] += 0.5
    if half is None:
        keep = np.ones(len(mesh.triangles), dtype=bool)
    elif half == "upper":
        keep = mesh.tri_upper
    elif half == "lower":
        keep = ~mesh.tri_upper
    else:
        raise ValueError(f"unknown half {half!r}")
    tris = mesh.triangles[keep]
    G = np.broadcast_to(E, (len(tris), 2, 2))
    return _stiffness_from(mesh.nodes, tris, mesh.dof_count, G)


def pullback_matrices(p: QuadParams, transported: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Constant interior coefficient matrices (upper, lower) of the pullback.

    With ``transported`` the (Sj/S) weight is included:
        [[Sj/c^2 + aj^2/Sj,  e aj c/Sj], [e aj c/Sj, c^2/Sj]],  e = -1, +1;
    without it the matrices are the plain Dinv Dinv^T of the inverse map.
    """
    out = []
    for aj, Sj, eps in ((p.a1, p.S1, -1.0), (p.a2, p.S2, 1.0)):
        G = np.array(
            [
                [Sj / p.c**2 + aj**2 / Sj, eps * aj * p.c / Sj],
                [eps * aj * p.c / Sj, p.c**2 / Sj],
            ]
        )
        if not transported:
            G *= p.S / Sj
        out.append(G)
    return out[0], out[1]


def boundary_weights_transformed(p: QuadParams, alpha: float, transported: bool = True) -> np.ndarray:
    """Per-edge boundary weights, in EDGE_IDS order.

    Transported:  alpha * |edge| / |ref edge|;
    plain-mass:   alpha * S * |edge| / (Sj * |ref edge|).
    """
    ell0 = math.sqrt(2.0 * p.S)
    w = np.empty(4)
    for k, e in enumerate(EDGE_IDS):
        Sj = p.S1 if e.j == 1 else p.S2
        w[k] = alpha * edge_length(p, e) / ell0
        if not transported:
            w[k] *= p.S / Sj
    return w


def _assemble_pullback(p, alpha, mesh, transported: bool, kind: str) -> AssembledSystem:
    _check_mesh(p, mesh)
    _warn_boundary_layer(p, alpha, mesh)
    Gu, Gl = pullback_matrices(p, transported=transported)
    K = stiffness_matrix(mesh, Gu, Gl)
    weights = boundary_weights_transformed(p, alpha, transported=transported)
    for s, B in enumerate(boundary_mass_matrices(mesh)):
        K = K + weights[s] * B
    if transported:
        M = weighted_mass_matrix(mesh, p.S1 / p.S, p.S2 / p.S)
    else:
        M = weighted_mass_matrix(mesh, 1.0, 1.0)
    return AssembledSystem(K.tocsr(), M.tocsr(), mesh.dof_count, p, alpha, mesh, kind)


def assemble_transformed(p: QuadParams, alpha: float, mesh: Mesh) -> AssembledSystem:
    """Pullback assembly on the reference square (unitary normalisation).

    Interior coefficient per half from ``pullback_matrices``, boundary weight
    alpha |edge|/|ref edge| per edge label, (Sj/S)-weighted mass.  At the
    square all weights reduce to the plain Robin form on the reference
    square.  Generalized eigenvalues agree with ``assemble_direct`` to
    roundoff on the matched mesh.
    """
    return _assemble_pullback(p, alpha, mesh, transported=True, kind="transformed")


def assemble_plain_mass(p: QuadParams, alpha: float, mesh: Mesh) -> AssembledSystem:
    """Pullback assembly in the plain-mass normalisation (see module docs)."""
    return _assemble_pullback(p, alpha, mesh, transported=False, kind="plain")


def assemble_direct(p: QuadParams, alpha: float, mesh: Mesh) -> AssembledSystem:
    """Standard Robin assembly on the mapped (physical) mesh."""
    _check_mesh(p, mesh)
    _warn_boundary_layer(p, alpha, mesh)
    phys = map_forward(p).apply(mesh.nodes)
    n = mesh.dof_count
    G = np.broadcast_to(np.eye(2), (len(mesh.triangles), 2, 2))
    K = _stiffness_from(phys, mesh.triangles, n, G)
    K = K + _boundary_from(
        phys, mesh.bedge_nodes, n, np.full(len(mesh.bedge_nodes), alpha)
    )
    M = _mass_from(phys, mesh.triangles, n, np.ones(len(mesh.triangles)))
    return AssembledSystem(K.tocsr(), M.tocsr(), n, p, alpha, mesh, "direct")


def export_coo(matrix: sp.spmatrix, path) -> None:
    """Write a matrix as whitespace 'row col value' lines (0-based indices)."""
    coo = matrix.tocoo()
    with open(path, "w") as fh:
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {float(v)!r}\n")
