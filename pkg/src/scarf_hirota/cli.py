"""Command-line front end.

Data goes to stdout (or ``--output``); one-line human summaries go to stderr.
Exit codes: 0 success, 2 input error, 3 numerical failure, 4 not applicable.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dynamics import IntegrationConfig, TerminationKind, integrate
from .economy import EndowmentMatrix, EndowmentParams, PriceVector, from_params, to_params
from .errors import DegenerateEdge, PreconditionViolation, ScarfHirotaError
from .experiments import (
    Region,
    SweepConfig,
    conjecture_sweep,
    edge_stability_probe,
    reproduce_figure1,
)
from .stability import classify, edge_fixed_point, edge_min_excess

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_NOT_APPLICABLE = 0, 2, 3, 4

log = logging.getLogger("scarf_hirota")


def _fmt(x: float) -> str:
    return "%.17g" % x


@dataclass
class RunConfig:
    """Resolved model, start and integration settings for ``simulate``."""

    params: Optional[EndowmentParams] = None
    matrix: Optional[EndowmentMatrix] = None
    gamma: float = 1.0
    initial: Optional[PriceVector] = None
    integration: dict = field(default_factory=dict)
    output: Optional[str] = None
    format: str = "csv"

    def __post_init__(self):
        if (self.params is None) == (self.matrix is None):
            raise ValueError("exactly one of params or matrix must be given")
        if self.format not in ("csv", "json"):
            raise ValueError(f"format must be 'csv' or 'json', got {self.format!r}")

    @property
    def A(self) -> EndowmentMatrix:
        return self.matrix if self.matrix is not None else from_params(self.params)


# --- argument helpers ---------------------------------------------------------------


def _floats(text: str, n: Optional[int] = None, name: str = "value") -> list:
    try:
        values = [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise ValueError(f"--{name} expects comma-separated numbers, got {text!r}") from None
    if n is not None and len(values) != n:
        raise ValueError(f"--{name} expects {n} numbers, got {len(values)}")
    return values


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return data


def _pick(args, cfg: dict, key: str, default=None):
    value = getattr(args, key, None)
    if value is not None:
        return value
    return cfg.get(key, default)


def _model(args, cfg: dict):
    """Return ``(params or None, matrix)``; flags win over the config file."""
    flag_params = any(getattr(args, k) is not None for k in ("d", "K", "L"))
    if args.matrix is not None and flag_params:
        raise ValueError("give either --d/--K/--L or --matrix, not both")
    matrix = args.matrix
    if matrix is None and not flag_params:
        matrix = cfg.get("matrix")
    if matrix is not None:
        values = _floats(matrix, 9, "matrix") if isinstance(matrix, str) else np.ravel(matrix).tolist()
        return None, EndowmentMatrix(values)

    base = dict(cfg.get("params", {}))
    base.update({k: cfg[k] for k in ("d", "d1", "d2", "d3", "K", "L") if k in cfg})
    if args.d is not None:
        base = {k: v for k, v in base.items() if k not in ("d1", "d2", "d3")}
        base["d"] = args.d
    if isinstance(base.get("d"), str):
        base["d"] = _floats(base["d"], 3, "d")
    if args.K is not None:
        base["K"] = args.K
    if args.L is not None:
        base["L"] = args.L
    if "d" not in base and "d1" not in base:
        raise ValueError("no model given: use --d/--K/--L or --matrix")
    base.setdefault("K", 0.0)
    base.setdefault("L", 0.0)
    params = EndowmentParams.from_dict(base)
    return params, from_params(params)


def _emit(text: str, output: Optional[str]):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


# --- commands -----------------------------------------------------------------------


def cmd_classify(args) -> int:
    cfg = _load_config(args.config)
    params, A = _model(args, cfg)
    if params is None:
        params = to_params(A)
    report = classify(params)
    _emit(report.to_json() + "\n", args.output)
    print(
        f"H={_fmt(report.H)} Hhat={_fmt(report.Hhat)} S={_fmt(report.S)} "
        f"local_class={report.local_class.value} globally_stable={str(report.globally_stable).lower()}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    params, A = _model(args, cfg)
    p0 = _pick(args, cfg, "p0")
    if p0 is None:
        raise ValueError("simulate needs a start: --p0 p1,p2,p3")
    p0 = _floats(p0, 3, "p0") if isinstance(p0, str) else [float(v) for v in p0]
    run = RunConfig(
        params=params,
        matrix=None if params is not None else A,
        gamma=float(_pick(args, cfg, "gamma", 1.0)),
        initial=PriceVector(*p0),
        integration=dict(cfg.get("integration", {})),
        output=_pick(args, cfg, "output"),
        format=_pick(args, cfg, "format", "csv"),
    )
    icfg = IntegrationConfig.from_dict({**run.integration, "gamma": run.gamma})
    t0 = float(_pick(args, cfg, "t0", icfg.t_span[0]))
    t1 = float(_pick(args, cfg, "t1", icfg.t_span[1]))
    icfg = icfg.with_overrides(
        t_span=(t0, t1),
        rel_tol=args.rtol,
        abs_tol=args.atol,
        max_step=args.max_step,
        boundary_floor=args.floor,
        convergence_radius=args.radius,
        sample_every=args.sample_every,
        renormalize=True if args.renormalize else None,
    )
    traj = integrate(run.initial.as_array(), run.A, icfg)
    text = traj.to_csv() if run.format == "csv" else traj.to_json()
    _emit(text if text.endswith("\n") else text + "\n", run.output)
    final = ",".join(_fmt(v) for v in traj.final)
    print(
        f"termination={traj.termination} t_final={_fmt(traj.t_final)} final=({final}) "
        f"max_drift={_fmt(traj.max_drift)}"
        + (f" t_node={_fmt(traj.node_time_estimate)}" if traj.node_time_estimate is not None else ""),
        file=sys.stderr,
    )
    return EXIT_NUMERICAL if traj.termination.kind is TerminationKind.STEP_FAILURE else EXIT_OK


def cmd_edge(args) -> int:
    cfg = _load_config(args.config)
    params, A = _model(args, cfg)
    if params is None:
        params = to_params(A)
    edges = (1, 2, 3) if args.edge == "all" else (int(args.edge),)
    out = []
    for e in edges:
        if e not in (1, 2, 3):
            raise ValueError(f"--edge must be 1, 2, 3 or all, got {args.edge!r}")
        entry = {"edge": e}
        try:
            m = edge_min_excess(e, A)
            entry["min_excess"] = float(m.min_value)
            entry["argmin_ratio"] = float(m.argmin_ratio)
        except DegenerateEdge as exc:
            entry["min_excess"] = None
            entry["degenerate_corner"] = exc.corner
        try:
            fp = edge_fixed_point(e, params)
        except PreconditionViolation:
            if len(edges) == 1:
                raise
            out.append(entry)
            continue
        entry.update(fp.to_dict())
        entry["prediction"] = "Attracting" if fp.own_excess < 0 else "Repelling"
        if args.probe:
            entry["probe"] = edge_stability_probe(e, params).to_dict()
        out.append(entry)
        pt = ",".join(_fmt(v) for v in entry["point"])
        print(
            f"edge {e}: point=({pt}) own_excess={_fmt(fp.own_excess)} prediction={entry['prediction']}"
            + (f" probe={entry['probe']['verdict']}" if "probe" in entry else ""),
            file=sys.stderr,
        )
    _emit(json.dumps(out if len(out) > 1 else out[0], indent=2) + "\n", args.output)
    return EXIT_OK


def cmd_fig1(args) -> int:
    result = reproduce_figure1(consumers=args.consumers)
    if args.output_dir:
        d = Path(args.output_dir)
        d.mkdir(parents=True, exist_ok=True)
        result.forward.to_csv(d / "forward.csv")
        result.backward.to_csv(d / "backward.csv")
        (d / "verdict.json").write_text(json.dumps(result.verdict, indent=2) + "\n")
    sys.stdout.write(json.dumps(result.verdict, indent=2) + "\n")
    v = result.verdict
    print(
        f"fig1 {v['verdict']}: forward error {_fmt(v['forward_error_inf'])}, "
        f"backward {v['backward_termination']} at t={_fmt(v['backward_t_node_extrapolated'])}",
        file=sys.stderr,
    )
    return EXIT_OK if result.passed else EXIT_NUMERICAL


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    overrides = {
        "sample_count": args.n,
        "seed": args.seed,
        "region_filter": args.region,
        "starts_per_sample": args.starts,
        "t_max": args.t_max,
        "start_mode": args.start_mode,
    }
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    jobs = int(cfg.pop("jobs", 1)) if args.jobs is None else args.jobs
    output = cfg.pop("output", None) if args.output is None else args.output
    summary_path = cfg.pop("summary", None) if args.summary is None else args.summary
    sweep_cfg = SweepConfig.from_dict(cfg)

    def progress(done, total):
        print(f"\rsweep {done}/{total}", end="" if done < total else "\n", file=sys.stderr, flush=True)

    outcome = conjecture_sweep(sweep_cfg, jobs=jobs, progress=progress if not args.quiet else None)
    _emit(outcome.to_jsonl(), output)
    if summary_path:
        Path(summary_path).write_text(outcome.summary_json() + "\n")
    s = outcome.summary()
    print(
        f"sweep region={sweep_cfg.region_filter.value} trajectories={s['trajectories']} "
        f"converged_fraction={_fmt(s['converged_fraction'])} counts={json.dumps(s['counts'])}",
        file=sys.stderr,
    )
    return EXIT_OK


# --- parser -------------------------------------------------------------------------


def _add_model(p: argparse.ArgumentParser):
    g = p.add_argument_group("model")
    g.add_argument("--d", help="diagonal endowments d1,d2,d3")
    g.add_argument("--K", type=float, help="off-diagonal offset K (default 0)")
    g.add_argument("--L", type=float, help="off-diagonal offset L (default 0)")
    g.add_argument("--matrix", help="nine comma-separated entries of a Condition-A matrix, row-major")
    p.add_argument("--config", help="JSON config file; explicit flags win")
    p.add_argument("--output", "-o", help="write data here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scarf-hirota",
        description="Three-commodity exchange economy under dp_i/dt = p_i^gamma E_i(p).",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="stability criteria and local classification")
    _add_model(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("simulate", help="integrate one trajectory")
    _add_model(p)
    p.add_argument("--gamma", type=float)
    p.add_argument("--p0", help="initial prices p1,p2,p3")
    p.add_argument("--t0", type=float)
    p.add_argument("--t1", type=float, help="end time; negative for backward runs")
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--max-step", dest="max_step", type=float)
    p.add_argument("--floor", type=float, help="boundary detection floor")
    p.add_argument("--radius", type=float, help="convergence radius around the equilibrium ray")
    p.add_argument("--sample-every", dest="sample_every", type=float)
    p.add_argument("--renormalize", action="store_true", help="project back onto the first-integral level set")
    p.add_argument("--format", choices=("csv", "json"))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("edge", help="edge minimum and edge fixed point analysis")
    _add_model(p)
    p.add_argument("--edge", default="all", help="1, 2, 3 or all (default)")
    p.add_argument("--probe", action="store_true", help="also run the behavioral stability probe")
    p.set_defaults(func=cmd_edge)

    p = sub.add_parser("fig1", help="reproduce the Figure-1 forward and backward runs")
    p.add_argument("--output-dir", help="write forward.csv, backward.csv and verdict.json here")
    p.add_argument("--consumers", choices=("rows", "columns"), default="rows",
                   help="matrix reading of the parameter display (default rows)")
    p.set_defaults(func=cmd_fig1)

    p = sub.add_parser("sweep", help="random-parameter convergence sweep")
    p.add_argument("--config", help="JSON SweepConfig; explicit flags win")
    p.add_argument("--region", choices=[r.value for r in Region])
    p.add_argument("-n", type=int, help="number of parameter samples")
    p.add_argument("--seed", type=int)
    p.add_argument("--starts", type=int, help="starts per sample")
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--start-mode", dest="start_mode", choices=("interior", "near-edge"))
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--output", "-o", help="JSON-lines records (default stdout)")
    p.add_argument("--summary", help="write summary JSON here")
    p.add_argument("--quiet", "-q", action="store_true", help="no progress output")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScarfHirotaError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, TypeError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FloatingPointError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
