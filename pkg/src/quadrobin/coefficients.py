"""Closed-form parameter derivatives of the pullback coefficients.

The transported stiffness uses, per half j (eps = -1 for the upper half,
+1 for the lower, Sj the half area),

    Ghat_j = [[Sj/c^2 + aj^2/Sj,  eps aj c / Sj],
              [eps aj c / Sj,     c^2 / Sj     ]],

per-edge boundary factors |edge|/|ref edge| and per-half mass weights Sj/S.
First and second derivatives of all of these in (a1, a2, c, S1) are generated
symbolically once (S2 = 2S - S1 keeps the chain rule honest) and evaluated as
plain floats per parameter point.  No coefficient is ever differenced
numerically; finite differences exist only as a validation oracle elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import QuadParams

__all__ = ["PARAMS", "PAIRS", "CoefficientDerivatives", "first_tables", "second_tables"]

PARAMS = ("a1", "a2", "c", "S1")
PAIRS = tuple(
    (PARAMS[i], PARAMS[j]) for i in range(4) for j in range(i, 4)
)


@dataclass(frozen=True)
class CoefficientDerivatives:
    """Derivative of every assembly coefficient in one parameter direction.

    G_upper / G_lower   (2, 2) interior coefficient derivative per half
    edge                (4,)   derivative of |edge|/|ref edge| per edge label
    mass                (2,)   derivative of the per-half mass weight Sj/S
    """

    G_upper: np.ndarray
    G_lower: np.ndarray
    edge: np.ndarray
    mass: np.ndarray


@lru_cache(maxsize=1)
def _lambdified():
    import sympy as sym

    a1, a2, c, S1, S = sym.symbols("a1 a2 c S1 S", real=True)
    S2 = 2 * S - S1
    halves = ((a1, S1, -1), (a2, S2, +1))

    G = []
    for aj, Sj, eps in halves:
        G.append(
            sym.Matrix(
                [
                    [Sj / c**2 + aj**2 / Sj, eps * aj * c / Sj],
                    [eps * aj * c / Sj, c**2 / Sj],
                ]
            )
        )
    ell0 = sym.sqrt(2 * S)
    # boundary-label order (1,1), (2,1), (1,2), (2,2): sign +, -, +, -
    edge_ratio = [
        sym.sqrt(S1**2 / c**2 + (a1 + c) ** 2) / ell0,
        sym.sqrt(S1**2 / c**2 + (a1 - c) ** 2) / ell0,
        sym.sqrt(S2**2 / c**2 + (a2 + c) ** 2) / ell0,
        sym.sqrt(S2**2 / c**2 + (a2 - c) ** 2) / ell0,
    ]
    mass_w = [S1 / S, S2 / S]
    directions = (a1, a2, c, S1)

    def bundle(exprs):
        return [
            [sym.diff(G[0], v).tolist(), sym.diff(G[1], v).tolist()]
            + [[sym.diff(r, v) for r in edge_ratio]]
            + [[sym.diff(w, v) for w in mass_w]]
            for v in exprs
        ]

    first = bundle(directions)
    second = []
    for i, v1 in enumerate(directions):
        for v2 in directions[i:]:
            second.append(
                [
                    sym.diff(G[0], v1, v2).tolist(),
                    sym.diff(G[1], v1, v2).tolist(),
                    [sym.diff(r, v1, v2) for r in edge_ratio],
                    [sym.diff(w, v1, v2) for w in mass_w],
                ]
            )
    args = (a1, a2, c, S1, S)
    return (
        sym.lambdify(args, first, modules="math"),
        sym.lambdify(args, second, modules="math"),
    )


def _pack(raw) -> CoefficientDerivatives:
    gu, gl, edge, mass = raw
    return CoefficientDerivatives(
        G_upper=np.array(gu, dtype=float),
        G_lower=np.array(gl, dtype=float),
        edge=np.array(edge, dtype=float),
        mass=np.array(mass, dtype=float),
    )


def first_tables(p: QuadParams) -> dict[str, CoefficientDerivatives]:
    """Coefficient derivatives d/dv at p, keyed by parameter name."""
    f1, _ = _lambdified()
    raw = f1(p.a1, p.a2, p.c, p.S1, p.S)
    return {v: _pack(entry) for v, entry in zip(PARAMS, raw)}


def second_tables(p: QuadParams) -> dict[tuple[str, str], CoefficientDerivatives]:
    """Coefficient derivatives d^2/dv1 dv2 at p, keyed by ordered pair."""
    _, f2 = _lambdified()
    raw = f2(p.a1, p.a2, p.c, p.S1, p.S)
    out = {}
    for pair, entry in zip(PAIRS, raw):
        packed = _pack(entry)
        out[pair] = packed
        out[(pair[1], pair[0])] = packed
    return out
