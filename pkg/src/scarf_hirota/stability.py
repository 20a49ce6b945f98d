"""Closed-form stability theory for the price-adjustment family.

Global stability of ``p* = (1, 1, 1)`` is governed by
``H = 4(d1 d2 + d2 d3 + d3 d1) - (d1 + d2 + d3)^2`` and local stability by
``Hhat = H + (K - L)^2``. Boundary behaviour of the price-scaled process
(``gamma = 1``) is read off from the fixed points on the edges of the price
simplex.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .economy import (
    B,
    EndowmentMatrix,
    EndowmentParams,
    IDENTITY_TOL,
    PriceVector,
    _edge_index,
    as_matrix,
    as_prices,
    condition_a_residual,
    excess_demand,
    from_params,
)
from .errors import (
    ConditionAViolation,
    DegenerateDenominator,
    DegenerateEdge,
    InternalError,
    PreconditionViolation,
)

DISCRIMINANT_TOL = 1e-10
HHAT_TOL = 1e-12
S_TOL = 1e-12
EDGE_CROSSCHECK_TOL = 1e-8


class LocalClass(str, Enum):
    STABLE_FOCUS = "StableFocus"
    STABLE_NODE = "StableNode"
    SADDLE = "Saddle"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class StabilityReport:
    H: float
    Hhat: float
    S: float
    jacobian_eigenvalues: tuple[complex, complex]
    C_eigenvalues: tuple[float, float]
    local_class: LocalClass
    globally_stable: bool

    def to_dict(self) -> dict:
        return {
            "H": self.H,
            "Hhat": self.Hhat,
            "S": self.S,
            "jacobian_eigenvalues": [[z.real, z.imag] for z in self.jacobian_eigenvalues],
            "C_eigenvalues": list(self.C_eigenvalues),
            "local_class": self.local_class.value,
            "globally_stable": self.globally_stable,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "StabilityReport":
        return cls(
            H=data["H"],
            Hhat=data["Hhat"],
            S=data["S"],
            jacobian_eigenvalues=tuple(complex(re, im) for re, im in data["jacobian_eigenvalues"]),
            C_eigenvalues=tuple(data["C_eigenvalues"]),
            local_class=LocalClass(data["local_class"]),
            globally_stable=data["globally_stable"],
        )


def criteria(params: EndowmentParams) -> tuple[float, float]:
    """Return ``(H, Hhat)``."""
    d1, d2, d3 = params.d
    S = d1 + d2 + d3
    H = 4.0 * (d1 * d2 + d2 * d3 + d3 * d1) - S * S
    return H, H + params.k**2


def lemma1_lhs(p, A) -> np.ndarray:
    """``[p2 p3, p1 p3, p1 p2] . E(p)``, the Lyapunov-derivative numerator."""
    p = as_prices(p)
    return np.sum(_cofactor_products(p) * excess_demand(p, A), axis=-1)


def _cofactor_products(p) -> np.ndarray:
    return np.stack(
        [p[..., 1] * p[..., 2], p[..., 0] * p[..., 2], p[..., 0] * p[..., 1]], axis=-1
    )


def lemma1_rhs(p, A) -> np.ndarray:
    """Quadratic form ``p^T (A - B/2) p``."""
    p = as_prices(p)
    M = as_matrix(A) - 0.5 * B
    return np.einsum("...i,ij,...j->...", p, M, p)


def c_matrix(params: EndowmentParams) -> np.ndarray:
    """Symmetric matrix of the ``lemma1_rhs`` quadratic form expressed in ``d`` only."""
    d1, d2, d3 = params.d
    return np.array(
        [
            [d1, (d3 - d1 - d2) / 2, (d2 - d1 - d3) / 2],
            [(d3 - d1 - d2) / 2, d2, (d1 - d2 - d3) / 2],
            [(d2 - d1 - d3) / 2, (d1 - d2 - d3) / 2, d3],
        ]
    )


def c_quadratic_form(p, params: EndowmentParams) -> np.ndarray:
    p = as_prices(p)
    return np.einsum("...i,ij,...j->...", p, c_matrix(params), p)


def c_eigenvalues(params: EndowmentParams) -> tuple[float, float]:
    """Nonzero eigenvalues of ``C``: roots of ``t^2 - S t + (3/4) H``, larger first.

    ``C`` is symmetric so the discriminant ``S^2 - 3H`` is nonnegative in exact
    arithmetic; rounding below zero is clipped.
    """
    H, _ = criteria(params)
    S = params.S
    disc = math.sqrt(max(S * S - 3.0 * H, 0.0))
    return ((S + disc) / 2.0, (S - disc) / 2.0)


def share_derivatives_at_equilibrium(A) -> np.ndarray:
    """``D[j, h] = d f_h / d p_j`` at ``p*``, equal to ``(2 a_jh - (1 - delta_jh)) / 4``."""
    a = _require_condition_a(A)
    return (2.0 * a - B) / 4.0


def jacobian_at_equilibrium(A) -> np.ndarray:
    """Jacobian of ``p_i^gamma E_i`` at ``p*``; the same for every ``gamma``.

    ``J[i, j] = (-2 a_ji + 1 - delta_ij) / 4``.
    """
    a = _require_condition_a(A)
    return (-2.0 * a.T + B) / 4.0


def _require_condition_a(A) -> np.ndarray:
    a = as_matrix(A)
    residual = condition_a_residual(a)
    if residual > IDENTITY_TOL:
        raise ConditionAViolation(f"Condition A residual {residual:.3e} exceeds {IDENTITY_TOL:.1e}")
    return a


def jacobian_eigenvalues(params: EndowmentParams) -> tuple[complex, complex]:
    """Nonzero eigenvalues of ``J``: roots of ``t^2 + 2 S t + 3 Hhat`` divided by 4.

    The root with the larger real part (``+`` branch) comes first. Both are
    always complex-typed.
    """
    _, Hhat = criteria(params)
    S = params.S
    root = cmath.sqrt(complex(S * S - 3.0 * Hhat))
    return (complex((-S + root) / 4.0), complex((-S - root) / 4.0))


def classify_local(S: float, Hhat: float) -> LocalClass:
    if S <= S_TOL or abs(Hhat) <= HHAT_TOL or abs(3.0 * Hhat - S * S) <= DISCRIMINANT_TOL:
        return LocalClass.DEGENERATE
    if 3.0 * Hhat > S * S:
        return LocalClass.STABLE_FOCUS
    if Hhat > 0:
        return LocalClass.STABLE_NODE
    return LocalClass.SADDLE


def classify(params: EndowmentParams) -> StabilityReport:
    H, Hhat = criteria(params)
    S = params.S
    return StabilityReport(
        H=H,
        Hhat=Hhat,
        S=S,
        jacobian_eigenvalues=jacobian_eigenvalues(params),
        C_eigenvalues=c_eigenvalues(params),
        local_class=classify_local(S, Hhat),
        globally_stable=bool(H > 0 and S > 0),
    )


def first_integral(p, gamma: float) -> np.ndarray:
    """Conserved quantity: ``sum p_i^(2 - gamma)``, or ``p1 p2 p3`` when ``gamma == 2``."""
    p = as_prices(p)
    if gamma == 2:
        return np.prod(p, axis=-1)
    return np.sum(p ** (2.0 - gamma), axis=-1)


def lyapunov(p, gamma: float) -> np.ndarray:
    """``sum p_i^-gamma`` for ``gamma > 0``; ``-p1 p2 p3`` for ``gamma == 0``."""
    p = as_prices(p)
    if gamma == 0:
        return -np.prod(p, axis=-1)
    if np.any(p <= 0):
        raise DegenerateDenominator(f"Lyapunov function with gamma={gamma} needs p > 0, got {p.tolist()}")
    return np.sum(p ** (-float(gamma)), axis=-1)


def equilibrium_scale(g: float, gamma: float) -> float:
    """Scale ``c`` such that ``c (1, 1, 1)`` has first-integral value ``g``."""
    if gamma == 2:
        return g ** (1.0 / 3.0)
    return (g / 3.0) ** (1.0 / (2.0 - gamma))


# --- edges of the simplex ----------------------------------------------------


def _cyclic(edge: int) -> tuple[int, int, int]:
    i = _edge_index(edge)
    return i, (i + 1) % 3, (i + 2) % 3


class EdgeMinimum(NamedTuple):
    """Minimum of ``E_edge`` over the open edge ``p_edge = 0``.

    ``argmin_ratio`` is ``p_{edge+2} / p_{edge+1}`` (indices cyclic), i.e.
    ``p3 / p2`` on edge 1.
    """

    min_value: float
    argmin_ratio: float


def edge_min_excess(edge: int, A) -> EdgeMinimum:
    a = _require_condition_a(A)
    _, j, k = _cyclic(edge)
    ajj, akk = a[j, j], a[k, k]
    if ajj <= 0 or akk <= 0:
        # E_edge = akk s + ajj / s + const in s = p_k / p_j: linear in one of s, 1/s.
        corner = j + 1 if ajj <= 0 else k + 1
        raise DegenerateEdge(
            f"a{j + 1}{j + 1} = {ajj!r}, a{k + 1}{k + 1} = {akk!r}: the infimum of E{edge} on edge "
            f"{edge} is approached at node {corner}, not attained in the open edge",
            corner=corner,
        )
    return EdgeMinimum(2.0 * math.sqrt(ajj * akk) + a[j, k] + a[k, j] - 1.0, math.sqrt(ajj / akk))


def edge_positivity_condition(edge: int, params: EndowmentParams) -> bool:
    """``H > 0`` or ``-d_edge + d_other1 + d_other2 < 0``: ``E_edge > 0`` on the whole edge."""
    d = params.d
    i, j, k = _cyclic(edge)
    H, _ = criteria(params)
    return bool(H > 0 or (-d[i] + d[j] + d[k]) < 0)


def edge_exclusion_signs(params: EndowmentParams) -> tuple[float, float, float]:
    """``d_e - d_others`` for each edge; at most two of them can be positive."""
    d1, d2, d3 = params.d
    return (d1 - d2 - d3, -d1 + d2 - d3, -d1 - d2 + d3)


@dataclass(frozen=True)
class EdgeFixedPoint:
    """Rest point of the ``gamma = 1`` dynamics on the edge ``p_edge = 0`` of the simplex."""

    edge: int
    point: PriceVector
    own_excess: float
    locally_stable_on_simplex: bool
    own_excess_direct: float
    leading_coefficient: float
    branch: str
    U: float

    def to_dict(self) -> dict:
        return {
            "edge": self.edge,
            "point": list(self.point),
            "own_excess": self.own_excess,
            "own_excess_direct": self.own_excess_direct,
            "locally_stable_on_simplex": self.locally_stable_on_simplex,
            "leading_coefficient": self.leading_coefficient,
            "branch": self.branch,
            "U": self.U,
        }


def edge_fixed_point(edge: int, params: EndowmentParams) -> EdgeFixedPoint:
    """Closed-form fixed point on edge ``edge`` and the sign of ``E_edge`` there.

    Works in coordinates where ``edge`` is commodity 1 (cyclic relabeling).
    With ``c = -a21 + a31`` the point is ``(0, u, 1 - u)`` solving
    ``c u^2 + (a32 - a23 + 2 a33) u - a33 = 0``; when ``c > 0`` the mirrored
    equation in ``v = p3`` is used instead. Roots are taken in the
    rationalized form ``u = 2 a33 / (b + sqrt(b^2 + 4 c a33))``, which is the
    admissible branch and reduces to the linear root at ``c = 0``.
    """
    if min(params.d) <= 0:
        raise PreconditionViolation(f"edge fixed points require d1, d2, d3 > 0, got {params.d}")
    r = params.rotated(edge)
    d1, d2, d3, k = r.d1, r.d2, r.d3, r.k
    c = d2 - d3 - k  # -a21 + a31 in rotated coordinates
    root = math.sqrt(4.0 * d2 * d3 + k * k)
    if c <= 0:
        b = 2.0 * d3 + k
        U = (-b + root) / 2.0
        u = 2.0 * d3 / (b + root)
        q2, q3, branch = u, 1.0 - u, "u"
    else:
        b = 2.0 * d2 - k
        U = (-b + root) / 2.0
        v = 2.0 * d2 / (b + root)
        q2, q3, branch = 1.0 - v, v, "v"
    own = d1 - d2 - d3 + root

    i, j, m = _cyclic(edge)
    p = np.zeros(3)
    p[j], p[m] = q2, q3
    point = PriceVector.boundary(*p)
    direct = float(excess_demand(p, from_params(params, strict=False))[i])
    if not abs(direct - own) <= EDGE_CROSSCHECK_TOL:
        raise InternalError(
            f"edge {edge}: closed-form E{edge} = {own!r} but direct evaluation gives {direct!r}"
        )
    return EdgeFixedPoint(
        edge=edge,
        point=point,
        own_excess=own,
        locally_stable_on_simplex=bool(own < 0),
        own_excess_direct=direct,
        leading_coefficient=c,
        branch=branch,
        U=U,
    )


def edge_repulsion_predicate(edge: int, params: EndowmentParams) -> bool:
    """``Hhat > 0`` or ``d_edge - d_others > 0``: predicts ``own_excess > 0``."""
    _, Hhat = criteria(params)
    return bool(Hhat > 0 or edge_exclusion_signs(params)[_edge_index(edge)] > 0)
