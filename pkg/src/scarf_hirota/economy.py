"""The three-consumer, three-commodity Leontief exchange economy.

Convention: ``A[i, j]`` is the endowment of commodity ``i`` held by consumer
``j``, so the columns of ``A`` are the consumers' endowment vectors ``a_h``.
Consumer ``h`` wants every commodity except its own (``b_h`` has a zero in
position ``h``) in equal amounts.

Commodity, consumer and edge labels are 1-based throughout the public API.
Numeric functions take either the typed wrappers below or plain arrays; price
arrays may carry leading batch dimensions, ``(..., 3)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    ConditionAViolation,
    ConstraintViolation,
    DegenerateDenominator,
    NegativeEndowment,
)

IDENTITY_TOL = 1e-12
DENOMINATOR_FLOOR = 1e-300

U = np.ones(3)
U.flags.writeable = False

B = np.ones((3, 3)) - np.eye(3)
B.flags.writeable = False


@dataclass(frozen=True)
class EndowmentParams:
    """Five-scalar parametrization ``(d1, d2, d3, K, L)`` of a Condition-A matrix."""

    d1: float
    d2: float
    d3: float
    K: float
    L: float

    def __post_init__(self):
        for name in ("d1", "d2", "d3", "K", "L"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ConstraintViolation(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        for name in ("d1", "d2", "d3"):
            if getattr(self, name) < 0:
                raise NegativeEndowment(f"{name} = {getattr(self, name)!r} < 0")
        total = self.d1 + self.d2 + self.d3 + self.K + self.L
        if abs(total - 1.0) > IDENTITY_TOL:
            raise ConstraintViolation(
                f"d1 + d2 + d3 + K + L = {total!r}, must equal 1 (tolerance {IDENTITY_TOL})"
            )

    @property
    def d(self) -> tuple[float, float, float]:
        return (self.d1, self.d2, self.d3)

    @property
    def S(self) -> float:
        """Trace-like sum ``d1 + d2 + d3``."""
        return self.d1 + self.d2 + self.d3

    @property
    def k(self) -> float:
        """Off-diagonal asymmetry ``K - L``."""
        return self.K - self.L

    def rotated(self, edge: int) -> "EndowmentParams":
        """Relabel commodities so that ``edge`` becomes commodity 1.

        The cyclic relabeling keeps the matrix in parametrized form with the
        diagonal rotated and ``K``, ``L`` unchanged.
        """
        d = self.d
        i = _edge_index(edge)
        return EndowmentParams(d[i], d[(i + 1) % 3], d[(i + 2) % 3], self.K, self.L)

    def to_dict(self) -> dict:
        return {"d1": self.d1, "d2": self.d2, "d3": self.d3, "K": self.K, "L": self.L}

    @classmethod
    def from_dict(cls, data: dict) -> "EndowmentParams":
        if "d" in data:
            d1, d2, d3 = data["d"]
        else:
            d1, d2, d3 = data["d1"], data["d2"], data["d3"]
        return cls(d1, d2, d3, data["K"], data["L"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "EndowmentParams":
        return cls.from_dict(json.loads(text))


class EndowmentMatrix:
    """Immutable 3x3 endowment matrix satisfying Condition A (``Au = u``, ``u^T A = u^T``)."""

    __slots__ = ("_a",)

    def __init__(self, a, strict: bool = True, tol: float = IDENTITY_TOL):
        arr = np.array(a, dtype=float)
        if arr.shape == (9,):
            arr = arr.reshape(3, 3)
        if arr.shape != (3, 3) or not np.all(np.isfinite(arr)):
            raise ConditionAViolation(f"endowment matrix must be a finite 3x3 array, got {arr!r}")
        residual = condition_a_residual(arr)
        if residual > tol:
            raise ConditionAViolation(
                f"Condition A residual {residual:.3e} exceeds {tol:.1e}; "
                f"row sums {arr.sum(axis=1)}, column sums {arr.sum(axis=0)}"
            )
        if strict and np.any(arr < 0):
            i, j = np.argwhere(arr < 0)[0]
            raise NegativeEndowment(f"a{i + 1}{j + 1} = {arr[i, j]!r} < 0 (strict mode)")
        arr.flags.writeable = False
        self._a = arr

    @property
    def a(self) -> np.ndarray:
        return self._a

    def __array__(self, dtype=None, copy=None):
        if copy or dtype is not None:
            return self._a.astype(dtype or float, copy=True)
        return self._a

    def __getitem__(self, key):
        return self._a[key]

    def __eq__(self, other):
        if not isinstance(other, EndowmentMatrix):
            return NotImplemented
        return bool(np.array_equal(self._a, other._a))

    def __hash__(self):
        return hash(self._a.tobytes())

    def __repr__(self):
        return f"EndowmentMatrix({self._a.tolist()!r})"

    def column(self, h: int) -> np.ndarray:
        """Endowment vector ``a_h`` of consumer ``h`` (1-based)."""
        return self._a[:, _edge_index(h)]

    def transposed(self) -> "EndowmentMatrix":
        """Swap the roles of consumers and commodities (``K`` and ``L`` trade places)."""
        return EndowmentMatrix(self._a.T, strict=False)

    def to_dict(self) -> dict:
        return {"matrix": self._a.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str, strict: bool = True) -> "EndowmentMatrix":
        return cls(json.loads(text)["matrix"], strict=strict)


@dataclass(frozen=True)
class PriceVector:
    """Nominal prices. The default constructor requires strictly positive entries."""

    p1: float
    p2: float
    p3: float

    def __post_init__(self):
        vals = tuple(float(v) for v in (self.p1, self.p2, self.p3))
        if not all(math.isfinite(v) and v > 0 for v in vals):
            raise ValueError(f"interior prices must be finite and > 0, got {vals}")
        object.__setattr__(self, "p1", vals[0])
        object.__setattr__(self, "p2", vals[1])
        object.__setattr__(self, "p3", vals[2])

    @classmethod
    def boundary(cls, p1: float, p2: float, p3: float) -> "PriceVector":
        """Price vector with exactly one zero coordinate and the other two positive."""
        vals = tuple(float(v) for v in (p1, p2, p3))
        if not all(math.isfinite(v) and v >= 0 for v in vals):
            raise ValueError(f"boundary prices must be finite and >= 0, got {vals}")
        zeros = sum(v == 0.0 for v in vals)
        if zeros != 1:
            raise ValueError(f"a boundary price vector has exactly one zero entry, got {vals}")
        obj = object.__new__(cls)
        for name, v in zip(("p1", "p2", "p3"), vals):
            object.__setattr__(obj, name, v)
        return obj

    @classmethod
    def from_array(cls, p) -> "PriceVector":
        p1, p2, p3 = (float(v) for v in np.asarray(p, dtype=float).reshape(3))
        if min(p1, p2, p3) == 0.0:
            return cls.boundary(p1, p2, p3)
        return cls(p1, p2, p3)

    @property
    def is_interior(self) -> bool:
        return min(self.p1, self.p2, self.p3) > 0

    def as_array(self) -> np.ndarray:
        return np.array([self.p1, self.p2, self.p3])

    def __array__(self, dtype=None, copy=None):
        return self.as_array() if dtype is None else self.as_array().astype(dtype)

    def __iter__(self):
        return iter((self.p1, self.p2, self.p3))


EQUILIBRIUM = PriceVector(1.0, 1.0, 1.0)

PriceLike = Union[PriceVector, np.ndarray, "list[float]", "tuple[float, float, float]"]
MatrixLike = Union[EndowmentMatrix, np.ndarray]


def _edge_index(label: int) -> int:
    if label not in (1, 2, 3):
        raise ValueError(f"index must be 1, 2 or 3, got {label!r}")
    return label - 1


def as_prices(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.shape[-1:] != (3,):
        raise ValueError(f"price array must have trailing dimension 3, got shape {arr.shape}")
    return arr


def as_matrix(A) -> np.ndarray:
    arr = np.asarray(A, dtype=float)
    if arr.shape != (3, 3):
        raise ValueError(f"endowment matrix must be 3x3, got shape {arr.shape}")
    return arr


def condition_a_residual(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(max(np.max(np.abs(a.sum(axis=1) - 1.0)), np.max(np.abs(a.sum(axis=0) - 1.0))))


def from_params(params: EndowmentParams, strict: bool = True) -> EndowmentMatrix:
    """Build the endowment matrix from ``(d1, d2, d3, K, L)``.

    Raises ``NegativeEndowment`` in strict mode when an off-diagonal entry such
    as ``d3 + L`` is negative.
    """
    d1, d2, d3, K, L = params.d1, params.d2, params.d3, params.K, params.L
    a = np.array(
        [
            [d1, d3 + L, d2 + K],
            [d3 + K, d2, d1 + L],
            [d2 + L, d1 + K, d3],
        ]
    )
    # Row/column sums equal the constraint sum, so they are 1 up to its tolerance plus rounding.
    return EndowmentMatrix(a, strict=strict, tol=IDENTITY_TOL + 16 * np.finfo(float).eps)


def to_params(A: MatrixLike, tol: float = IDENTITY_TOL) -> EndowmentParams:
    a = np.asarray(A, dtype=float)
    residual = condition_a_residual(a)
    if residual > tol:
        raise ConditionAViolation(f"Condition A residual {residual:.3e} exceeds {tol:.1e}")
    d1, d2, d3 = a[0, 0], a[1, 1], a[2, 2]
    K = a[1, 0] - a[2, 2]
    L = a[0, 1] - a[2, 2]
    # The five values sum to 1 only up to the Condition-A residual; absorb it in L.
    L += 1.0 - (d1 + d2 + d3 + K + L)
    return EndowmentParams(d1, d2, d3, K, L)


def budgets(p) -> np.ndarray:
    """``p^T b_h`` for each consumer: the price of the bundle consumer ``h`` buys."""
    p = as_prices(p)
    return p.sum(axis=-1, keepdims=True) - p


def demand_shares(p, A, floor: float = DENOMINATOR_FLOOR) -> np.ndarray:
    """Budget-share ratios ``f_h = p^T a_h / p^T b_h``, shape ``(..., 3)``."""
    p = as_prices(p)
    a = as_matrix(A)
    denom = budgets(p)
    if np.any(denom <= floor):
        raise DegenerateDenominator(
            f"p^T b_h <= {floor:g} for some consumer (prices {p.tolist()}); "
            "at most one price may be zero"
        )
    return (p @ a) / denom


def excess_demand(p, A, floor: float = DENOMINATOR_FLOOR) -> np.ndarray:
    """Total excess demand ``E(p) = B f - A u``. Valid for any matrix ``A``."""
    f = demand_shares(p, A, floor)
    a = as_matrix(A)
    return f.sum(axis=-1, keepdims=True) - f - a.sum(axis=1)


def excess_demand_reduced(p, A, floor: float = DENOMINATOR_FLOOR) -> np.ndarray:
    """Condition-A form ``E_i = f1 + f2 + f3 - f_i - 1``."""
    f = demand_shares(p, A, floor)
    return f.sum(axis=-1, keepdims=True) - f - 1.0


def consumption(p, A, floor: float = DENOMINATOR_FLOOR) -> np.ndarray:
    """Optimal bundles ``x_h = f_h b_h``.

    Returns shape ``(..., 3, 3)`` with column ``h`` holding ``x_h``, matching
    the column convention of ``A``.
    """
    f = demand_shares(p, A, floor)
    return B * f[..., np.newaxis, :]


def utility(x, consumer: int) -> float:
    """Leontief utility: the smaller of the two commodities the consumer does not own."""
    x = np.asarray(x, dtype=float)
    h = _edge_index(consumer)
    others = [i for i in range(3) if i != h]
    return float(min(x[others[0]], x[others[1]]))
