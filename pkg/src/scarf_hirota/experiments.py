"""Experiment drivers: Figure 1, conjecture sweeps, boundary escape, edge probes."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.optimize import least_squares

from . import _ode
from .dynamics import (
    IntegrationConfig,
    Termination,
    TerminationKind,
    Trajectory,
    detect_limit_cycle,
    distance_to_ray,
    integrate,
    make_field,
    simplex_plane_coords,
)
from .economy import EndowmentParams, excess_demand, from_params
from .errors import (
    InsufficientCrossings,
    NegativeEndowment,
    NotApplicable,
    PreconditionViolation,
    SamplingExhausted,
    TheoremViolation,
)
from .stability import (
    classify,
    criteria,
    edge_fixed_point,
    edge_min_excess,
    edge_positivity_condition,
    lyapunov,
)

log = logging.getLogger(__name__)

FIGURE1_PARAMS = EndowmentParams(0.1, 0.1, 0.5, 0.0, 0.3)
FIGURE1_START = (0.3, 0.2, 0.5)
FIGURE1_NODE_WINDOW = (-2.28, -2.08)


# --- Figure 1 ---------------------------------------------------------------------


@dataclass
class Figure1Result:
    forward: Trajectory
    backward: Trajectory
    verdict: dict

    @property
    def passed(self) -> bool:
        return self.verdict["verdict"] == "PASS"


def figure1_matrix(consumers: str = "rows"):
    """Endowment matrix for the Figure-1 parameters.

    ``consumers="rows"`` reads the parameter display with consumers as rows
    (the matrix handed to the dynamics is the transpose of the display);
    ``"columns"`` uses the display as is.
    """
    A = from_params(FIGURE1_PARAMS)
    if consumers == "rows":
        return A.transposed()
    if consumers == "columns":
        return A
    raise ValueError(f"consumers must be 'rows' or 'columns', got {consumers!r}")


def reproduce_figure1(
    consumers: str = "rows",
    forward_tol: float = 1e-6,
    node_floor: float = 1e-3,
) -> Figure1Result:
    """Run the Figure-1 economy forward to the equilibrium and backward to node 3.

    The verdict passes when the forward run ends within ``forward_tol`` of
    ``(1/3, 1/3, 1/3)`` and the backward run reaches node 3 with both small
    prices below ``node_floor`` at an extrapolated time inside
    ``FIGURE1_NODE_WINDOW``. The backward node time under the other matrix
    reading is reported alongside for comparison.
    """
    A = figure1_matrix(consumers)
    fwd_cfg = IntegrationConfig(gamma=1.0, t_span=(0.0, 5000.0), convergence_radius=forward_tol / 100)
    bwd_cfg = IntegrationConfig(gamma=1.0, t_span=(0.0, -10.0), boundary_floor=node_floor)
    forward = integrate(FIGURE1_START, A, fwd_cfg)
    backward = integrate(FIGURE1_START, A, bwd_cfg)

    other = "columns" if consumers == "rows" else "rows"
    alt = integrate(FIGURE1_START, figure1_matrix(other), bwd_cfg)

    H, Hhat = criteria(FIGURE1_PARAMS)
    fwd_err = float(np.max(np.abs(forward.final / forward.final.sum() - 1.0 / 3.0)))
    small = np.sort(backward.final / backward.final.sum())[:2]
    t_node = backward.node_time_estimate
    checks = {
        "forward_converged": forward.termination.kind is TerminationKind.CONVERGED and fwd_err <= forward_tol,
        "backward_reached_node3": str(backward.termination) == "ReachedBoundary(node 3)"
        and bool(np.all(small < node_floor * (1 + 1e-9))),
        "node_time_in_window": bool(
            t_node is not None and FIGURE1_NODE_WINDOW[0] <= t_node <= FIGURE1_NODE_WINDOW[1]
        ),
    }
    verdict = {
        "verdict": "PASS" if all(checks.values()) else "FAIL",
        "checks": checks,
        "consumers": consumers,
        "params": FIGURE1_PARAMS.to_dict(),
        "matrix": np.asarray(A).tolist(),
        "H": H,
        "Hhat": Hhat,
        "forward_final": forward.final.tolist(),
        "forward_t_final": forward.t_final,
        "forward_error_inf": fwd_err,
        "backward_termination": str(backward.termination),
        "backward_t_floor": backward.t_event,
        "backward_t_node_extrapolated": t_node,
        "backward_t_node_error": backward.node_time_error,
        "node_window": list(FIGURE1_NODE_WINDOW),
        f"{other}_reading_t_node_extrapolated": alt.node_time_estimate,
    }
    return Figure1Result(forward, backward, verdict)


# --- parameter sampling ----------------------------------------------------------


class Region(str, Enum):
    ANY = "any"
    GLOBALLY_STABLE = "globally-stable"  # H > 0
    CONJECTURE = "conjecture"  # H < 0 < Hhat
    UNSTABLE = "unstable"  # Hhat < 0

    def contains(self, params: EndowmentParams) -> bool:
        H, Hhat = criteria(params)
        if self is Region.GLOBALLY_STABLE:
            return H > 0 and params.S > 0
        if self is Region.CONJECTURE:
            return H < 0 < Hhat
        if self is Region.UNSTABLE:
            return Hhat < 0
        return True


SAMPLING_DESCRIPTION = (
    "(d1, d2, d3, K+L) ~ flat Dirichlet(1,1,1,1); K-L ~ Uniform over the interval keeping "
    "every matrix entry >= 0; reject unless min(d) >= delta and the region predicate holds"
)


def draw_candidate(rng: np.random.Generator) -> Optional[EndowmentParams]:
    d1, d2, d3, m = rng.dirichlet(np.ones(4))
    dmin = min(d1, d2, d3)
    half_width = m + 2.0 * dmin
    k = rng.uniform(-half_width, half_width)
    K = (m + k) / 2.0
    L = 1.0 - (d1 + d2 + d3) - K
    return EndowmentParams(d1, d2, d3, K, L)


def sample_params(
    rng: np.random.Generator,
    region: Region = Region.ANY,
    delta: float = 1e-3,
    max_draws: int = 1_000_000,
) -> tuple[EndowmentParams, int]:
    """Rejection-sample strict parameters in ``region``; returns ``(params, draws)``."""
    for draws in range(1, max_draws + 1):
        params = draw_candidate(rng)
        if min(params.d) < delta or not region.contains(params):
            continue
        try:
            from_params(params, strict=True)
        except NegativeEndowment:
            continue
        return params, draws
    raise SamplingExhausted(f"no parameters in region {region.value!r} after {max_draws} draws")


def check_region_acceptance(region: Region, seed_seq: np.random.SeedSequence, delta: float = 1e-3,
                            max_draws: int = 1_000_000, min_rate: float = 1e-3) -> float:
    """Estimate the rejection acceptance rate; raise ``SamplingExhausted`` if below ``min_rate``."""
    rng = np.random.default_rng(seed_seq)
    target = int(math.ceil(min_rate * max_draws))
    accepted = draws = 0
    while draws < max_draws:
        params = draw_candidate(rng)
        draws += 1
        if min(params.d) >= delta and region.contains(params):
            accepted += 1
            if accepted >= target:
                return accepted / draws
    rate = accepted / draws
    raise SamplingExhausted(
        f"acceptance rate {rate:.2e} for region {region.value!r} is below {min_rate:g} over {draws} draws"
    )


def random_simplex_start(rng: np.random.Generator, margin: float = 1e-3) -> np.ndarray:
    while True:
        q = rng.dirichlet(np.ones(3))
        if q.min() >= margin:
            return q


def near_edge_start(rng: np.random.Generator, offset: float = 1e-3) -> np.ndarray:
    edge = int(rng.integers(3))
    rest = rng.uniform(0.05, 0.95)
    q = np.empty(3)
    q[edge] = offset
    q[(edge + 1) % 3] = (1 - offset) * rest
    q[(edge + 2) % 3] = (1 - offset) * (1 - rest)
    return q


# --- conjecture sweep ---------------------------------------------------------------


@dataclass(frozen=True)
class SweepConfig:
    sample_count: int = 200
    seed: int = 0
    region_filter: Region = Region.CONJECTURE
    starts_per_sample: int = 5
    t_max: float = 500.0
    delta: float = 1e-3
    convergence_radius: float = 1e-6
    start_mode: str = "interior"  # or "near-edge"
    sample_every: float = 0.25
    stall_returns: int = 50
    extend_horizon: bool = True
    max_extension: float = 1e5

    def __post_init__(self):
        object.__setattr__(self, "region_filter", Region(self.region_filter))
        if self.sample_count <= 0 or self.starts_per_sample <= 0:
            raise ValueError("sample_count and starts_per_sample must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.start_mode not in ("interior", "near-edge"):
            raise ValueError(f"unknown start_mode {self.start_mode!r}")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")

    def to_dict(self) -> dict:
        return {
            "sample_count": self.sample_count,
            "seed": self.seed,
            "region_filter": self.region_filter.value,
            "starts_per_sample": self.starts_per_sample,
            "t_max": self.t_max,
            "delta": self.delta,
            "convergence_radius": self.convergence_radius,
            "start_mode": self.start_mode,
            "sample_every": self.sample_every,
            "stall_returns": self.stall_returns,
            "extend_horizon": self.extend_horizon,
            "max_extension": self.max_extension,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        return cls(**data)


@dataclass
class SweepOutcome:
    config: SweepConfig
    records: list
    counts: dict
    sampling: dict = field(default_factory=dict)

    def to_jsonl(self, dest=None) -> Optional[str]:
        text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)
        if dest is None:
            return text
        if hasattr(dest, "write"):
            dest.write(text)
        else:
            with open(dest, "w") as fh:
                fh.write(text)
        return None

    def summary(self) -> dict:
        n = len(self.records)
        converged = self.counts.get(TerminationKind.CONVERGED.value, 0)
        return {
            "config": self.config.to_dict(),
            "sampling": self.sampling,
            "trajectories": n,
            "counts": dict(sorted(self.counts.items())),
            "converged_fraction": converged / n if n else 0.0,
            "exceptions": [
                {k: r[k] for k in ("sample", "start", "params", "p0", "termination", "seed")}
                for r in self.records
                if r["termination"] != TerminationKind.CONVERGED.value
            ],
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2)


def _sweep_sample(args) -> list:
    cfg, index, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    params, draws = sample_params(rng, cfg.region_filter, cfg.delta)
    A = from_params(params)
    report = classify(params)
    icfg = IntegrationConfig(
        gamma=1.0,
        t_span=(0.0, cfg.t_max),
        convergence_radius=cfg.convergence_radius,
        sample_every=cfg.sample_every,
    )
    records = []
    for j in range(cfg.starts_per_sample):
        p0 = random_simplex_start(rng) if cfg.start_mode == "interior" else near_edge_start(rng)
        traj = integrate(p0, A, icfg)
        termination, cycle = classify_outcome(traj, cfg.stall_returns)
        extended_to = None
        if cfg.extend_horizon and termination.kind is TerminationKind.TIME_EXHAUSTED:
            traj, extended_to = extend_run(traj, A, report, cfg)
            termination, cycle = classify_outcome(traj, cfg.stall_returns)
        records.append(
            {
                "sample": index,
                "start": j,
                "seed": cfg.seed,
                "spawn_key": list(seed_seq.spawn_key),
                "draws": draws,
                "params": params.to_dict(),
                "H": report.H,
                "Hhat": report.Hhat,
                "local_class": report.local_class.value,
                "p0": p0.tolist(),
                "termination": termination.kind.value,
                "termination_label": str(termination),
                "t_final": traj.t_final,
                "final": traj.final.tolist(),
                "distance_to_ray": distance_to_ray(traj.final, 1.0),
                "convergence_time": traj.t_event if termination.kind is TerminationKind.CONVERGED else None,
                "max_drift": traj.max_drift,
                "cycle": cycle,
                "extended_to": extended_to,
            }
        )
    return records


def slowest_rate(report) -> float:
    """Smallest decay rate ``-Re(lambda)`` of the linearization at the equilibrium."""
    return float(min(-complex(lam).real for lam in report.jacobian_eigenvalues))


def extend_run(traj: Trajectory, A, report, cfg: SweepConfig) -> tuple[Trajectory, Optional[float]]:
    """Continue a time-exhausted run for about 20 e-folds of its slowest linear rate.

    Only used when the equilibrium is locally stable; the extension is capped
    at ``cfg.max_extension`` time units and sampled at accepted steps.
    """
    rate = slowest_rate(report)
    if not rate > 0:
        return traj, None
    d0 = max(distance_to_ray(traj.final, 1.0), cfg.convergence_radius)
    extra = min(cfg.max_extension, 20.0 * (1.0 + math.log(d0 / cfg.convergence_radius)) / rate)
    t0 = traj.t_final
    more = integrate(
        traj.final,
        A,
        IntegrationConfig(gamma=1.0, t_span=(t0, t0 + extra), convergence_radius=cfg.convergence_radius),
    )
    return more, t0 + extra


def classify_outcome(traj: Trajectory, stall_returns: int = 50) -> tuple[Termination, Optional[dict]]:
    """Upgrade ``TimeExhausted`` to ``LimitCycleSuspected`` when the section data call for it.

    A cycle is suspected when two consecutive section returns coincide away
    from the barycenter, or when the Lyapunov value at section returns has not
    decreased over the last ``stall_returns`` returns.
    """
    if traj.termination.kind is not TerminationKind.TIME_EXHAUSTED:
        return traj.termination, None
    try:
        report = detect_limit_cycle(traj)
    except InsufficientCrossings:
        return traj.termination, None
    info = {
        "detected": report.detected,
        "period_estimate": report.period_estimate,
        "closure_residual": report.closure_residual,
        "returns": int(len(report.return_radii)),
        "last_radius": float(report.return_radii[-1]),
    }
    stalled = False
    if len(report.return_radii) > stall_returns:
        phi = lyapunov(report.section_points, traj.gamma)
        stalled = bool(np.all(np.diff(phi[-(stall_returns + 1):]) >= 0))
    if report.detected or stalled:
        return Termination(TerminationKind.LIMIT_CYCLE_SUSPECTED), info
    return traj.termination, info


CONTRADICTING = {
    TerminationKind.REACHED_BOUNDARY.value,
    TerminationKind.PRICE_WENT_NEGATIVE.value,
    TerminationKind.LIMIT_CYCLE_SUSPECTED.value,
    TerminationKind.STEP_FAILURE.value,
}


def conjecture_sweep(
    cfg: SweepConfig,
    jobs: int = 1,
    progress: Optional[Callable[[int, int], None]] = None,
) -> SweepOutcome:
    """Sample economies in ``cfg.region_filter`` and integrate ``gamma = 1`` from random starts.

    Deterministic for a given config: every sample draws from its own child of
    ``SeedSequence(cfg.seed)``, and results are merged in sample order
    regardless of ``jobs``. In the globally stable region a trajectory that
    ends on the boundary, below zero, or on a suspected cycle raises
    ``TheoremViolation``; elsewhere exceptions are logged and reported.
    """
    root = np.random.SeedSequence(cfg.seed)
    children = root.spawn(cfg.sample_count + 1)
    rate = check_region_acceptance(cfg.region_filter, children[-1], cfg.delta)
    tasks = [(cfg, i, children[i]) for i in range(cfg.sample_count)]

    records = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for done, recs in enumerate(pool.map(_sweep_sample, tasks), 1):
                records.extend(recs)
                if progress:
                    progress(done, cfg.sample_count)
    else:
        for done, task in enumerate(tasks, 1):
            records.extend(_sweep_sample(task))
            if progress:
                progress(done, cfg.sample_count)

    counts: dict = {}
    for r in records:
        counts[r["termination"]] = counts.get(r["termination"], 0) + 1
        if r["termination"] == TerminationKind.CONVERGED.value:
            continue
        if cfg.region_filter is Region.GLOBALLY_STABLE and r["termination"] in CONTRADICTING:
            raise TheoremViolation(
                f"H > 0 trajectory ended with {r['termination_label']}: {json.dumps(r)}", record=r
            )
        log.warning("non-converged trajectory: %s", json.dumps(r, sort_keys=True))

    return SweepOutcome(
        config=cfg,
        records=records,
        counts=counts,
        sampling={"distribution": SAMPLING_DESCRIPTION, "acceptance_rate_estimate": rate},
    )


# --- gamma = 0 escape through the boundary --------------------------------------------


@dataclass
class EscapeDemo:
    edge: int
    min_excess: float
    argmin_ratio: float
    start: np.ndarray
    offset: float
    trajectory: Trajectory

    @property
    def index(self) -> Optional[int]:
        return self.trajectory.termination.index

    def to_dict(self) -> dict:
        return {
            "edge": self.edge,
            "min_excess": float(self.min_excess),
            "argmin_ratio": float(self.argmin_ratio),
            "start": self.start.tolist(),
            "offset": self.offset,
            "termination": str(self.trajectory.termination),
            "t_event": None if self.trajectory.t_event is None else float(self.trajectory.t_event),
        }


def escape_demo(params: EndowmentParams, edge: Optional[int] = None, t_max: float = 50.0) -> EscapeDemo:
    """Classical dynamics pushed through an edge where the own excess demand dips below zero.

    Starts just inside the edge at the minimizer of ``E_edge``, halving the
    offset until the price crosses zero (at most 20 attempts).
    """
    H, _ = criteria(params)
    A = from_params(params, strict=False)
    candidates = []
    for e in (1, 2, 3):
        if edge is not None and e != edge:
            continue
        if edge_positivity_condition(e, params):
            continue
        m = edge_min_excess(e, A)
        if m.min_value < 0:
            candidates.append((m.min_value, e, m))
    if not candidates:
        raise NotApplicable(
            f"E_i stays positive on every requested edge (H = {H!r}); no boundary-crossing start exists"
        )
    _, e, m = min(candidates)
    i, j, k = e - 1, e % 3, (e + 1) % 3
    base = np.zeros(3)
    base[j], base[k] = 1.0 / (1.0 + m.argmin_ratio), m.argmin_ratio / (1.0 + m.argmin_ratio)
    offset = min(1e-3, 0.1 * abs(m.min_value))
    cfg = IntegrationConfig(gamma=0.0, t_span=(0.0, t_max))
    for _ in range(20):
        start = base.copy()
        start[i] = offset
        start /= start.sum()
        traj = integrate(start, A, cfg)
        if traj.termination.kind is TerminationKind.PRICE_WENT_NEGATIVE:
            return EscapeDemo(e, m.min_value, m.argmin_ratio, start, offset, traj)
        offset /= 2
    return EscapeDemo(e, m.min_value, m.argmin_ratio, start, offset, traj)


# --- edge fixed point probe ---------------------------------------------------------


@dataclass
class EdgeProbe:
    edge: int
    fixed_point: np.ndarray
    own_excess: float
    predicted: str
    verdict: str
    outcomes: list
    horizon: float

    @property
    def agrees(self) -> bool:
        return self.verdict == self.predicted

    def to_dict(self) -> dict:
        return {
            "edge": self.edge,
            "fixed_point": self.fixed_point.tolist(),
            "own_excess": self.own_excess,
            "predicted": self.predicted,
            "verdict": self.verdict,
            "agrees": self.agrees,
            "horizon": self.horizon,
            "outcomes": self.outcomes,
        }


def edge_stability_probe(
    edge: int,
    params: EndowmentParams,
    start_distance: float = 1e-3,
    attract_radius: float = 1e-5,
    escape_radius: float = 1e-2,
    max_horizon: float = 1e7,
) -> EdgeProbe:
    """Integrate ``gamma = 1`` from interior points near the edge fixed point.

    ``Attracting`` when every start comes within ``attract_radius`` of the
    fixed point; ``Repelling`` when any start leaves the ``escape_radius``
    ball. The horizon is scaled to the slower of the transverse and
    tangential linear rates so slow but definite behaviour is resolved.
    """
    if min(params.d) <= 0:
        raise PreconditionViolation(f"edge probes require d1, d2, d3 > 0, got {params.d}")
    fp = edge_fixed_point(edge, params)
    A = from_params(params, strict=False)
    q = fp.point.as_array()
    i, j, k = edge - 1, edge % 3, (edge + 1) % 3

    normal = -np.ones(3) / 2
    normal[i] = 1.0
    normal /= np.linalg.norm(normal)
    tangent = np.zeros(3)
    tangent[j], tangent[k] = 1.0, -1.0
    tangent /= np.linalg.norm(tangent)

    field_fn = make_field(A, 1.0)
    hh = 1e-6 * min(q[j], q[k])
    tangential_rate = float(tangent @ (field_fn(0, q + hh * tangent) - field_fn(0, q - hh * tangent)) / (2 * hh))
    slowest = min(abs(fp.own_excess), abs(tangential_rate))
    horizon = min(max_horizon, 100.0 + 20.0 * math.log(100.0) / max(slowest, 1e-300))

    outcomes = []
    for w in (normal, (normal + tangent) / math.sqrt(2), (normal - tangent) / math.sqrt(2)):
        r = start_distance
        while np.any(q + r * w <= 0):
            r /= 2
        p0 = q + r * w
        events = [
            _ode.Event("attracted", lambda t, y: float(np.linalg.norm(y - q)) - attract_radius),
            _ode.Event("escaped", lambda t, y: escape_radius - float(np.linalg.norm(y - q))),
        ]
        sol = _ode.solve(field_fn, 0.0, p0, horizon, rtol=1e-10, atol=1e-14, events=events)
        result = {"attracted": "Attracting", "escaped": "Repelling"}.get(sol.event, "Inconclusive")
        outcomes.append({"start": p0.tolist(), "distance": r, "result": result, "t": sol.t[-1]})

    results = [o["result"] for o in outcomes]
    if "Repelling" in results:
        verdict = "Repelling"
    elif all(res == "Attracting" for res in results):
        verdict = "Attracting"
    else:
        verdict = "Inconclusive"
    predicted = "Attracting" if fp.own_excess < 0 else "Repelling"
    return EdgeProbe(edge, q, fp.own_excess, predicted, verdict, outcomes, horizon)


# --- interior equilibrium uniqueness ------------------------------------------------------


@dataclass
class UniquenessReport:
    grid_n: int
    grid_minima: int
    zeros: list
    min_norm_outside_ball: float
    ball_radius: float

    @property
    def unique_at_barycenter(self) -> bool:
        return len(self.zeros) == 1 and np.allclose(self.zeros[0], 1.0 / 3.0, atol=1e-6)

    def to_dict(self) -> dict:
        return {
            "grid_n": self.grid_n,
            "grid_minima": self.grid_minima,
            "zeros": [list(z) for z in self.zeros],
            "min_norm_outside_ball": self.min_norm_outside_ball,
            "ball_radius": self.ball_radius,
            "unique_at_barycenter": self.unique_at_barycenter,
        }


def uniqueness_scan(
    params: EndowmentParams,
    grid_n: int = 200,
    margin: float = 1e-3,
    zero_tol: float = 1e-8,
    ball_radius: float = 1e-2,
) -> UniquenessReport:
    """Scan ``|E|`` over a barycentric grid and polish every grid-local minimum.

    Numerical evidence for a unique interior equilibrium, not a certificate.
    """
    if grid_n < 10:
        raise ValueError("grid_n must be >= 10")
    A = from_params(params, strict=False)
    N = grid_n - 1
    I, J = np.meshgrid(np.arange(N + 1), np.arange(N + 1), indexing="ij")
    mask = I + J <= N
    Kk = N - I - J
    Q = margin + (1 - 3 * margin) * np.stack([I, J, Kk], axis=-1) / N
    norms = np.full(I.shape, np.inf)
    norms[mask] = np.linalg.norm(excess_demand(Q[mask], A), axis=-1)

    padded = np.pad(norms, 1, constant_values=np.inf)
    center = padded[1:-1, 1:-1]
    neighbours = [
        padded[2:, 1:-1], padded[:-2, 1:-1], padded[1:-1, 2:], padded[1:-1, :-2],
        padded[2:, :-2], padded[:-2, 2:],
    ]
    is_min = mask.copy()
    for nb in neighbours:
        is_min &= center <= nb

    def residual(x):
        p = np.array([x[0], x[1], 1.0 - x[0] - x[1]])
        return excess_demand(p, A)

    zeros: list = []
    for a, b in zip(*np.nonzero(is_min)):
        q0 = Q[a, b]
        fit = least_squares(residual, q0[:2], xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            bounds=([margin / 2] * 2, [1 - margin] * 2))
        p = np.array([fit.x[0], fit.x[1], 1 - fit.x[0] - fit.x[1]])
        if p.min() > 0 and np.linalg.norm(residual(fit.x)) < zero_tol:
            if not any(np.max(np.abs(p - z)) < 1e-6 for z in zeros):
                zeros.append(p)

    dist = np.linalg.norm(Q - 1.0 / 3.0, axis=-1)
    outside = mask & (dist > ball_radius)
    return UniquenessReport(
        grid_n=grid_n,
        grid_minima=int(is_min.sum()),
        zeros=[z.tolist() for z in zeros],
        min_norm_outside_ball=float(norms[outside].min()),
        ball_radius=ball_radius,
    )
