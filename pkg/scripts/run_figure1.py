"""Reproduce the reference forward and backward runs and write CSV plus a verdict."""

import argparse
import json
from pathlib import Path

from scarf_hirota.experiments import reproduce_figure1


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--output-dir", type=Path, default=Path("figure1_out"))
    ap.add_argument("--consumers", choices=["rows", "columns"], default="rows")
    args = ap.parse_args()

    res = reproduce_figure1(consumers=args.consumers)
    args.output_dir.mkdir(parents=True, exist_ok=True)
    res.forward.to_csv(args.output_dir / "forward.csv")
    res.backward.to_csv(args.output_dir / "backward.csv")
    (args.output_dir / "verdict.json").write_text(json.dumps(res.verdict, indent=2))
    for name, ok in res.verdict["checks"].items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return 0 if res.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
