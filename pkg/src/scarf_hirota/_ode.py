"""Dormand-Prince 5(4) integrator with PI step control, dense output and events.

Forward time only; callers integrate backward by negating the field. Events
are terminal and fire when a scalar function of the state drops from positive
to nonpositive; the crossing is localized by bisection on the dense
interpolant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

# Butcher tableau (Dormand & Prince 1980).
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
# Continuous extension (Hairer, Norsett & Wanner, dopri5).
D1, D3, D4 = -12715105075 / 11282082432, 87487479700 / 32700410799, -10690763975 / 1880347072
D5, D6, D7 = 701980252875 / 199316789632, -1453857185 / 822651844, 69997945 / 29380423

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0
BETA = 0.04
EXPO = 0.2 - 0.75 * BETA

EventFn = Callable[[float, np.ndarray], float]


@dataclass
class Event:
    name: str
    fn: EventFn


@dataclass
class Interpolant:
    """Dense output over one accepted step ``[t0, t0 + h]``."""

    t0: float
    h: float
    r1: np.ndarray
    r2: np.ndarray
    r3: np.ndarray
    r4: np.ndarray
    r5: np.ndarray

    def __call__(self, t: float) -> np.ndarray:
        th = (t - self.t0) / self.h
        th1 = 1.0 - th
        return self.r1 + th * (self.r2 + th1 * (self.r3 + th * (self.r4 + th1 * self.r5)))


@dataclass
class Solution:
    t: list = field(default_factory=list)
    y: list = field(default_factory=list)
    status: str = "running"  # "completed" | "event" | "step_failure"
    event: Optional[str] = None
    t_event: Optional[float] = None
    y_event: Optional[np.ndarray] = None
    n_steps: int = 0
    n_rejected: int = 0
    n_fev: int = 0
    message: str = ""
    last_h: float = 0.0


def _initial_step(f, t0, y0, f0, rtol, atol, max_step):
    sc = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / sc) ** 2))
    d1 = np.sqrt(np.mean((f0 / sc) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, max_step)
    f1 = f(t0 + h0, y0 + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / sc) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, max_step)


def _bisect(fn, dense: Interpolant, ta, tb, tol):
    # fn(ta) > 0 >= fn(tb)
    while tb - ta > tol:
        tm = 0.5 * (ta + tb)
        if fn(tm, dense(tm)) > 0:
            ta = tm
        else:
            tb = tm
    return tb


def solve(
    f: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0,
    t1: float,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    max_step: float = math.inf,
    first_step: Optional[float] = None,
    events: Sequence[Event] = (),
    event_tol: float = 1e-10,
    sample_every: Optional[float] = None,
    on_step: Optional[Callable[[float, np.ndarray], Optional[np.ndarray]]] = None,
    max_steps: int = 10_000_000,
) -> Solution:
    """Integrate ``y' = f(t, y)`` from ``t0`` to ``t1 > t0``.

    Samples are recorded at every accepted step, or on the uniform grid
    ``t0 + k * sample_every`` when given; the initial and final states are
    always included. ``on_step(t, y)`` runs after each accepted step and may
    return a replacement state (used for projection).
    """
    if not t1 > t0:
        raise ValueError(f"need t1 > t0, got t0={t0}, t1={t1}")
    y = np.array(y0, dtype=float)
    sol = Solution()
    sol.t.append(t0)
    sol.y.append(y.copy())

    values = [ev.fn(t0, y) for ev in events]
    for ev, v in zip(events, values):
        if v <= 0:
            sol.status, sol.event, sol.t_event, sol.y_event = "event", ev.name, t0, y.copy()
            return sol

    k1 = f(t0, y)
    sol.n_fev += 1
    if not np.all(np.isfinite(k1)):
        sol.status, sol.message = "step_failure", "vector field is not finite at the initial state"
        return sol
    h = first_step if first_step else _initial_step(f, t0, y, k1, rtol, atol, max_step)
    sol.n_fev += 1
    t = t0
    facold = 1e-4
    rejected_last = False
    next_sample = t0 + sample_every if sample_every else None

    while t < t1:
        if sol.n_steps >= max_steps:
            sol.status, sol.message = "step_failure", f"exceeded {max_steps} steps"
            break
        h = min(h, max_step, t1 - t)
        if h <= 16 * np.finfo(float).eps * max(abs(t), 1.0):
            sol.status, sol.message = "step_failure", f"step size underflow at t={t!r}"
            break

        y2 = y + h * A21 * k1
        k2 = f(t + C2 * h, y2)
        y3 = y + h * (A31 * k1 + A32 * k2)
        k3 = f(t + C3 * h, y3)
        y4 = y + h * (A41 * k1 + A42 * k2 + A43 * k3)
        k4 = f(t + C4 * h, y4)
        y5 = y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4)
        k5 = f(t + C5 * h, y5)
        y6 = y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5)
        k6 = f(t + h, y6)
        ynew = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
        k7 = f(t + h, ynew)
        sol.n_fev += 6

        errvec = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(ynew))
        err = math.sqrt(float(np.mean((errvec / sc) ** 2)))
        if not math.isfinite(err) or not np.all(np.isfinite(ynew)):
            h *= FAC_MIN
            sol.n_rejected += 1
            rejected_last = True
            continue

        fac11 = err**EXPO if err > 0 else 0.0
        if err <= 1.0:
            fac = fac11 / facold**BETA if fac11 > 0 else 0.0
            fac = min(1.0 / FAC_MIN, max(1.0 / FAC_MAX, fac / SAFETY))
            hnew = h / fac
            if rejected_last:
                hnew = min(hnew, h)
            facold = max(err, 1e-4)
            rejected_last = False

            ydiff = ynew - y
            bspl = h * k1 - ydiff
            dense = Interpolant(
                t0=t,
                h=h,
                r1=y,
                r2=ydiff,
                r3=bspl,
                r4=ydiff - h * k7 - bspl,
                r5=h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7),
            )
            tnew = t + h
            if tnew >= t1 or abs(t1 - tnew) <= 16 * np.finfo(float).eps * max(abs(t1), 1.0):
                tnew = t1
            sol.n_steps += 1

            fired = None
            for ev in events:
                if ev.fn(tnew, ynew) <= 0:
                    te = _bisect(ev.fn, dense, t, tnew, event_tol)
                    if fired is None or te < fired[1]:
                        fired = (ev, te)

            stop_t = fired[1] if fired else tnew
            if next_sample is not None:
                while next_sample < stop_t:
                    sol.t.append(next_sample)
                    sol.y.append(dense(next_sample))
                    next_sample = t0 + (round((next_sample - t0) / sample_every) + 1) * sample_every

            if fired:
                ye = dense(fired[1])
                sol.t.append(fired[1])
                sol.y.append(ye)
                sol.status, sol.event, sol.t_event, sol.y_event = "event", fired[0].name, fired[1], ye
                sol.last_h = h
                return sol

            t, y, k1 = tnew, ynew, k7
            if on_step is not None:
                replaced = on_step(t, y)
                if replaced is not None:
                    y = np.asarray(replaced, dtype=float)
                    k1 = f(t, y)
                    sol.n_fev += 1
            if next_sample is None or t == t1:
                sol.t.append(t)
                sol.y.append(y.copy())
            h = hnew
        else:
            hnew = h / min(1.0 / FAC_MIN, fac11 / SAFETY)
            h = hnew
            sol.n_rejected += 1
            rejected_last = True

    if sol.status == "running":
        sol.status = "completed"
    elif sol.status == "step_failure" and sol.t[-1] != t:
        sol.t.append(t)
        sol.y.append(y.copy())
    sol.last_h = h
    return sol
