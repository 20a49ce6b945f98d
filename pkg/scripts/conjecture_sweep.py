"""Run the random-parameter convergence sweep and print its summary."""

import argparse
import json
import sys
from pathlib import Path

from scarf_hirota.experiments import Region, SweepConfig, conjecture_sweep


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-n", type=int, default=200, help="parameter samples")
    ap.add_argument("--starts", type=int, default=5)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--region", choices=[r.value for r in Region], default=Region.CONJECTURE.value)
    ap.add_argument("--start-mode", choices=["interior", "near-edge"], default="interior")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("-o", "--output", type=Path, default=Path("sweep.jsonl"))
    args = ap.parse_args()

    cfg = SweepConfig(
        sample_count=args.n,
        seed=args.seed,
        region_filter=Region(args.region),
        starts_per_sample=args.starts,
        start_mode=args.start_mode,
    )

    def progress(done, total):
        print(f"\r{done}/{total} samples", end="", file=sys.stderr, flush=True)

    out = conjecture_sweep(cfg, jobs=args.jobs, progress=progress)
    print(file=sys.stderr)
    out.to_jsonl(args.output)
    print(json.dumps(out.summary(), indent=2))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
