"""Numerical integration of ``dp_i/dt = p_i^gamma E_i(p)``.

``gamma = 0`` is the classical process, ``gamma = 1`` the price-scaled one
(which conserves ``p1 + p2 + p3``). The first integral ``g_gamma`` is
monitored at every accepted step and the Lyapunov function ``phi_gamma`` is
recorded at every sample.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from . import _ode
from .economy import as_matrix, as_prices, demand_shares
from .errors import DomainError, InsufficientCrossings
from .stability import equilibrium_scale, first_integral

CSV_HEADER = ("t", "p1", "p2", "p3", "E1", "E2", "E3", "g", "phi")
FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class IntegrationConfig:
    gamma: float = 1.0
    t_span: tuple[float, float] = (0.0, 100.0)
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    boundary_floor: float = 1e-12
    convergence_radius: float = 1e-8
    max_samples: int = 200_000
    stop_on_convergence: bool = True
    renormalize: bool = False
    sample_every: Optional[float] = None
    extrapolate_node_time: bool = True

    def __post_init__(self):
        t0, t1 = (float(v) for v in self.t_span)
        object.__setattr__(self, "t_span", (t0, t1))
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be a finite nonnegative number, got {self.gamma!r}")
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.max_step > 0):
            raise ValueError("rel_tol, abs_tol and max_step must be positive")
        if not self.boundary_floor >= 0:
            raise ValueError("boundary_floor must be >= 0")
        if not self.convergence_radius > 0:
            raise ValueError("convergence_radius must be > 0")
        if self.max_samples < 2:
            raise ValueError("max_samples must be >= 2")
        if self.sample_every is not None and not self.sample_every > 0:
            raise ValueError("sample_every must be positive")
        if t0 == t1:
            raise ValueError("t_span must have nonzero length")

    @property
    def backward(self) -> bool:
        return self.t_span[1] < self.t_span[0]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["t_span"] = list(self.t_span)
        if math.isinf(self.max_step):
            d["max_step"] = None
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "IntegrationConfig":
        data = dict(data)
        if data.get("max_step", 0) is None:
            data["max_step"] = math.inf
        if "t_span" in data:
            data["t_span"] = tuple(data["t_span"])
        return cls(**data)

    def with_overrides(self, **kwargs) -> "IntegrationConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


class TerminationKind(str, Enum):
    CONVERGED = "ConvergedToEquilibriumRay"
    REACHED_BOUNDARY = "ReachedBoundary"
    PRICE_WENT_NEGATIVE = "PriceWentNegative"
    TIME_EXHAUSTED = "TimeExhausted"
    LIMIT_CYCLE_SUSPECTED = "LimitCycleSuspected"
    STEP_FAILURE = "StepFailure"


@dataclass(frozen=True)
class Termination:
    """How an integration ended. ``index`` is a 1-based commodity (edge) or node label."""

    kind: TerminationKind
    index: Optional[int] = None
    node: bool = False

    def __str__(self) -> str:
        if self.kind is TerminationKind.REACHED_BOUNDARY:
            return f"ReachedBoundary({'node' if self.node else 'edge'} {self.index})"
        if self.kind is TerminationKind.PRICE_WENT_NEGATIVE:
            return f"PriceWentNegative({self.index})"
        return self.kind.value

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "index": self.index, "node": self.node, "label": str(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "Termination":
        return cls(TerminationKind(data["kind"]), data.get("index"), bool(data.get("node", False)))


@dataclass
class Trajectory:
    """Sampled solution curve with diagnostics.

    Arrays are aligned: ``p``, ``E`` have shape ``(n, 3)``; ``t``, ``g``,
    ``phi`` have shape ``(n,)``.
    """

    t: np.ndarray
    p: np.ndarray
    E: np.ndarray
    g: np.ndarray
    phi: np.ndarray
    termination: Termination
    gamma: float
    max_drift: float = 0.0
    t_event: Optional[float] = None
    node_time_estimate: Optional[float] = None
    node_time_error: Optional[float] = None
    n_steps: int = 0
    n_rejected: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    def samples(self) -> Iterator[tuple]:
        for i in range(len(self.t)):
            yield (float(self.t[i]), self.p[i], self.E[i], float(self.g[i]), float(self.phi[i]))

    @property
    def final(self) -> np.ndarray:
        return self.p[-1]

    @property
    def t_final(self) -> float:
        return float(self.t[-1])

    def relative_drift(self) -> np.ndarray:
        """``|g(t) - g(t0)| / |g(t0)|`` at every sample."""
        return np.abs(self.g - self.g[0]) / abs(self.g[0])

    def simplex_points(self) -> np.ndarray:
        return self.p / self.p.sum(axis=1, keepdims=True)

    def metadata(self) -> dict:
        return {
            "gamma": self.gamma,
            "termination": self.termination.to_dict(),
            "max_drift": self.max_drift,
            "t_event": self.t_event,
            "node_time_estimate": self.node_time_estimate,
            "node_time_error": self.node_time_error,
            "n_steps": self.n_steps,
            "n_rejected": self.n_rejected,
            **({"meta": self.meta} if self.meta else {}),
        }

    def to_csv(self, dest=None) -> Optional[str]:
        """Write ``t,p1,p2,p3,E1,E2,E3,g,phi`` rows with 17 significant digits.

        ``dest`` may be a path or a text stream; with ``None`` the CSV text is returned.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        rows = np.column_stack([self.t, self.p, self.E, self.g, self.phi])
        for row in rows:
            writer.writerow([FLOAT_FMT % v for v in row])
        return _emit(buf.getvalue(), dest)

    def to_dict(self) -> dict:
        return {
            **self.metadata(),
            "fields": list(CSV_HEADER),
            "samples": np.column_stack([self.t, self.p, self.E, self.g, self.phi]).tolist(),
        }

    def to_json(self, dest=None) -> Optional[str]:
        return _emit(json.dumps(self.to_dict()), dest)

    @classmethod
    def from_csv(cls, src, gamma: float, termination: Optional[Termination] = None) -> "Trajectory":
        text = _read(src)
        rows = list(csv.reader(io.StringIO(text)))
        if tuple(rows[0]) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {rows[0]}")
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        term = termination or Termination(TerminationKind.TIME_EXHAUSTED)
        return cls._from_columns(data, term, gamma)

    @classmethod
    def from_json(cls, src) -> "Trajectory":
        d = json.loads(_read(src))
        data = np.array(d["samples"], dtype=float).reshape(-1, len(CSV_HEADER))
        traj = cls._from_columns(data, Termination.from_dict(d["termination"]), d["gamma"])
        for key in ("max_drift", "t_event", "node_time_estimate", "node_time_error", "n_steps", "n_rejected"):
            setattr(traj, key, d.get(key, getattr(traj, key)))
        traj.meta = d.get("meta", {})
        return traj

    @classmethod
    def _from_columns(cls, data, termination, gamma) -> "Trajectory":
        return cls(
            t=data[:, 0],
            p=data[:, 1:4],
            E=data[:, 4:7],
            g=data[:, 7],
            phi=data[:, 8],
            termination=termination,
            gamma=gamma,
        )


def _emit(text: str, dest):
    if dest is None:
        return text
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text)
    else:
        dest.write(text)
    return None


def _is_path(src) -> bool:
    if isinstance(src, Path):
        return True
    if not isinstance(src, str) or "\n" in src or src.lstrip().startswith("{"):
        return False
    try:
        return Path(src).exists()
    except OSError:
        return False


def _read(src) -> str:
    if _is_path(src):
        return Path(src).read_text()
    if hasattr(src, "read"):
        return src.read()
    return src


# --- vector field -------------------------------------------------------------


def rhs(p, gamma: float, A) -> np.ndarray:
    """``p_i^gamma E_i(p)`` componentwise, with ``0^0 = 1``."""
    p = as_prices(p)
    if np.any(p < 0) and float(gamma) != int(gamma):
        raise DomainError(f"p^gamma is undefined for negative prices when gamma={gamma}")
    f = demand_shares(p, A)
    E = f.sum(axis=-1, keepdims=True) - f - as_matrix(A).sum(axis=1)
    return _price_power(p, gamma) * E


def _price_power(p, gamma):
    if gamma == 0:
        return np.ones_like(p)
    if gamma == 1:
        return p
    return p**gamma


def make_field(A, gamma: float, sign: float = 1.0):
    """Fast closure over a fixed economy for the integrator's hot loop."""
    a = np.array(as_matrix(A), dtype=float)
    rows = a.sum(axis=1)
    gamma = float(gamma)

    def field(t, p):
        s = p[0] + p[1] + p[2]
        f = (p @ a) / (s - p)
        E = (f[0] + f[1] + f[2]) - f - rows
        if gamma == 0.0:
            return sign * E
        if gamma == 1.0:
            return sign * (p * E)
        return sign * (p**gamma * E)

    return field


def _diagnostics(P, A, gamma):
    a = as_matrix(A)
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = P.sum(axis=1, keepdims=True) - P
        f = (P @ a) / denom
        E = f.sum(axis=1, keepdims=True) - f - a.sum(axis=1)
        if gamma == 2:
            g = np.prod(P, axis=1)
        elif gamma == 0:
            g = np.sum(P * P, axis=1)
        else:
            g = np.sum(np.abs(P) ** (2.0 - gamma), axis=1)
        if gamma == 0:
            phi = -np.prod(P, axis=1)
        else:
            phi = np.where(np.all(P > 0, axis=1), np.sum(np.abs(P) ** (-gamma), axis=1), np.nan)
    return E, g, phi


def distance_to_ray(p, gamma: float) -> float:
    """Infinity-norm distance from ``p`` to the equilibrium with the same first integral."""
    p = np.asarray(p, dtype=float)
    c = equilibrium_scale(float(first_integral(p, gamma)), gamma)
    return float(np.max(np.abs(p - c)))


def _sorted_simplex(y):
    s = y[0] + y[1] + y[2]
    q = sorted((y[0] / s, y[1] / s, y[2] / s))
    return q


def integrate(p0, A, cfg: IntegrationConfig) -> Trajectory:
    """Adaptive integration of the gamma-family from ``p0``.

    Terminates on the first of: a price crossing zero (``gamma = 0``), two
    normalized prices below ``boundary_floor`` (node), one normalized price
    below the floor with the others clear of it (edge, ``gamma > 0``),
    arrival within ``convergence_radius`` of the equilibrium ray, or the end
    of ``t_span``. Backward spans integrate the time-negated field.
    """
    y0 = np.array(as_prices(p0), dtype=float).reshape(3)
    gamma = float(cfg.gamma)
    if np.any(y0 < 0) or np.sum(y0 == 0) > (1 if gamma >= 1 else 0):
        raise DomainError(
            f"initial prices {y0.tolist()} must be interior"
            + (" or have a single zero (gamma >= 1)" if gamma >= 1 else "")
        )
    t0, t1 = cfg.t_span
    direction = -1.0 if cfg.backward else 1.0
    field_fn = make_field(A, gamma, sign=direction)
    floor = cfg.boundary_floor
    node_zone = math.sqrt(floor) if floor > 0 else 0.0
    active = y0 > 0

    g0 = float(first_integral(y0, gamma))
    c0 = equilibrium_scale(g0, gamma)

    def ev_negative(t, y):
        return min(y[0], y[1], y[2])

    def ev_node(t, y):
        return _sorted_simplex(y)[1] - floor

    def ev_edge(t, y):
        q = _sorted_simplex(y)
        if q[1] <= node_zone:
            return 1.0
        s = y[0] + y[1] + y[2]
        return min(y[i] / s for i in range(3) if active[i]) - floor

    def ev_converged(t, y):
        if cfg.renormalize:
            c = c0
        else:
            c = equilibrium_scale(float(first_integral(y, gamma)), gamma)
        return max(abs(y[0] - c), abs(y[1] - c), abs(y[2] - c)) - cfg.convergence_radius

    events = [_ode.Event("node", ev_node)]
    if gamma == 0:
        events.insert(0, _ode.Event("negative", ev_negative))
    else:
        events.append(_ode.Event("edge", ev_edge))
    if cfg.stop_on_convergence:
        events.append(_ode.Event("converged", ev_converged))

    drift = [0.0]

    def on_step(tau, y):
        g = float(first_integral(y, gamma)) if gamma != 1 else float(y[0] + y[1] + y[2])
        d = abs(g - g0) / abs(g0)
        if d > drift[0]:
            drift[0] = d
        if cfg.renormalize and d > 0 and g > 0:
            if gamma == 2:
                return y * (g0 / g) ** (1.0 / 3.0)
            return y * (g0 / g) ** (1.0 / (2.0 - gamma))
        return None

    span = abs(t1 - t0)
    # Trial stages may step past zero; non-finite values there just reject the step.
    with np.errstate(invalid="ignore", divide="ignore"):
        sol = _ode.solve(
            field_fn,
            0.0,
            y0,
            span,
            rtol=cfg.rel_tol,
            atol=cfg.abs_tol,
            max_step=cfg.max_step,
            events=events,
            sample_every=cfg.sample_every,
            on_step=on_step,
        )
    if sol.y_event is not None:
        on_step(sol.t_event, sol.y_event)

    Y = np.array(sol.y)
    tau = np.array(sol.t)
    T = t0 + direction * tau

    termination, t_event = _termination(sol, Y[-1], active, t0, direction)
    node_estimate = node_error = None
    if termination.node and cfg.extrapolate_node_time and floor > 0:
        node_estimate, node_error = _extrapolate_node_time(
            field_fn, sol.t_event, sol.y_event, floor, cfg, sol.last_h
        )
        if node_estimate is not None:
            node_estimate = t0 + direction * node_estimate
            node_error = abs(node_error)

    if len(T) > cfg.max_samples:
        keep = np.unique(np.linspace(0, len(T) - 1, cfg.max_samples).round().astype(int))
        T, Y = T[keep], Y[keep]

    E, g, phi = _diagnostics(Y, A, gamma)
    return Trajectory(
        t=T,
        p=Y,
        E=E,
        g=g,
        phi=phi,
        termination=termination,
        gamma=gamma,
        max_drift=drift[0],
        t_event=t_event,
        node_time_estimate=node_estimate,
        node_time_error=node_error,
        n_steps=sol.n_steps,
        n_rejected=sol.n_rejected,
        meta={"message": sol.message} if sol.message else {},
    )


def _termination(sol, y_last, active, t0, direction):
    if sol.status == "completed":
        return Termination(TerminationKind.TIME_EXHAUSTED), None
    if sol.status == "step_failure":
        return Termination(TerminationKind.STEP_FAILURE), None
    t_event = t0 + direction * sol.t_event
    y = sol.y_event
    if sol.event == "negative":
        return Termination(TerminationKind.PRICE_WENT_NEGATIVE, int(np.argmin(y)) + 1), t_event
    if sol.event == "node":
        return Termination(TerminationKind.REACHED_BOUNDARY, int(np.argmax(y)) + 1, node=True), t_event
    if sol.event == "edge":
        masked = np.where(active, y, np.inf)
        return Termination(TerminationKind.REACHED_BOUNDARY, int(np.argmin(masked)) + 1), t_event
    return Termination(TerminationKind.CONVERGED), t_event


def _extrapolate_node_time(field_fn, tau_e, y_e, floor, cfg, h_last):
    """Richardson estimate of the time at which the node itself is reached.

    Near a node the two small prices shrink linearly in time, so the crossing
    times of ``floor``, ``floor/2`` and ``floor/4`` extrapolate linearly to the
    arrival time. Returns ``(estimate, difference between the two estimates)``.
    """
    crossings = [tau_e]
    y, tau = y_e, tau_e
    for level in (floor / 2, floor / 4):
        ev = _ode.Event("level", lambda t, yy, lv=level: _sorted_simplex(yy)[1] - lv)
        horizon = tau + 10.0 * max(abs(tau - crossings[0]), 1.0)
        sol = _ode.solve(
            field_fn, tau, y, horizon, rtol=cfg.rel_tol, atol=cfg.abs_tol * 1e-3,
            first_step=min(h_last, 1e-3), events=[ev],
        )
        if sol.status != "event":
            return None, None
        tau, y = sol.t_event, sol.y_event
        crossings.append(tau)
    t_e, t_half, t_quarter = crossings
    coarse = 2 * t_half - t_e
    fine = 2 * t_quarter - t_half
    return fine, fine - coarse


# --- limit cycles ---------------------------------------------------------------


@dataclass
class CycleReport:
    detected: bool
    period_estimate: float
    section_points: np.ndarray
    closure_residual: float
    return_radii: np.ndarray
    return_times: np.ndarray

    def to_dict(self) -> dict:
        return {
            "detected": self.detected,
            "period_estimate": self.period_estimate,
            "closure_residual": self.closure_residual,
            "section_points": np.asarray(self.section_points).tolist(),
            "return_radii": np.asarray(self.return_radii).tolist(),
            "return_times": np.asarray(self.return_times).tolist(),
        }


_BASIS = np.array(
    [
        [1 / math.sqrt(2), -1 / math.sqrt(2), 0.0],
        [1 / math.sqrt(6), 1 / math.sqrt(6), -2 / math.sqrt(6)],
    ]
)


def simplex_plane_coords(q) -> np.ndarray:
    """Orthonormal planar coordinates of simplex points relative to the barycenter."""
    q = np.asarray(q, dtype=float)
    return (q - 1.0 / 3.0) @ _BASIS.T


def _refine_crossings(t, xy, across, idx):
    """Locate section crossings by cubic interpolation through the four surrounding samples."""
    times = np.empty(len(idx))
    pts = np.empty((len(idx), 2))
    n = len(t)
    for m, i in enumerate(idx):
        w = across[i] / (across[i] - across[i + 1])
        tc = t[i] + w * (t[i + 1] - t[i])
        lo, hi = i - 1, i + 3
        if lo >= 0 and hi <= n:
            tt = t[lo:hi] - t[i]
            c_across = np.polyfit(tt, across[lo:hi], 3)
            s = tc - t[i]
            for _ in range(8):  # Newton from the linear estimate
                slope = np.polyval(np.polyder(c_across), s)
                if slope == 0:
                    break
                s -= np.polyval(c_across, s) / slope
            if 0 <= s <= t[i + 1] - t[i]:
                tc = t[i] + s
                times[m] = tc
                pts[m] = [np.polyval(np.polyfit(tt, xy[lo:hi, k], 3), s) for k in (0, 1)]
                continue
        times[m] = tc
        pts[m] = xy[i] + w * (xy[i + 1] - xy[i])
    return times, pts


def detect_limit_cycle(
    traj: Trajectory,
    section_tol: float = 1e-6,
    min_radius: float = 1e-3,
) -> CycleReport:
    """Poincare-section analysis on the half-line from the barycenter toward node 1.

    Works in normalized simplex coordinates. Crossings in the dominant
    rotation sense are located by cubic interpolation through the surrounding
    samples, so trajectories should be sampled on a grid (``sample_every``)
    that is fine relative to their period.
    """
    xy = simplex_plane_coords(traj.simplex_points())
    # Half-line toward node 1: polar angle of node 1 in the planar frame.
    axis = simplex_plane_coords(np.array([1.0, 0.0, 0.0]))
    axis = axis / np.linalg.norm(axis)
    normal = np.array([-axis[1], axis[0]])
    along = xy @ axis
    across = xy @ normal
    up = np.nonzero((across[:-1] < 0) & (across[1:] >= 0) & (along[1:] > 0))[0]
    down = np.nonzero((across[:-1] >= 0) & (across[1:] < 0) & (along[1:] > 0))[0]
    idx = up if len(up) >= len(down) else down
    if len(idx) < 3:
        raise InsufficientCrossings(f"only {len(idx)} section crossings found (need 3)")

    times, pts = _refine_crossings(traj.t, xy, across, idx)
    radii = pts @ axis
    simplex_pts = 1.0 / 3.0 + pts @ _BASIS
    residual = float(abs(radii[-1] - radii[-2]))
    period = float(abs(times[-1] - times[-2]))
    detected = bool(residual <= section_tol and min(radii[-1], radii[-2]) >= min_radius)
    return CycleReport(
        detected=detected,
        period_estimate=period,
        section_points=simplex_pts,
        closure_residual=residual,
        return_radii=radii,
        return_times=times,
    )
