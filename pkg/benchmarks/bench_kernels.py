#!/usr/bin/env python3
"""Standalone benchmark runner: times every kernel on the numba path and
the pure-numpy fallback, plus the scene-inference loop end to end.

Equivalent to ``sketchscene bench run``; kept as a script so it can be
run from a checkout without installing the CLI entry point.
"""

import argparse
import json

from sketchscene import bench


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=bench.DEFAULT_KERNEL_SIZE,
                        help="square array size for kernel timings")
    parser.add_argument("--repeats", type=int, default=bench.DEFAULT_REPEATS)
    parser.add_argument("--inner", type=int, default=bench.DEFAULT_INNER)
    parser.add_argument("--seeds", type=int, nargs="*", default=None,
                        help="pipeline seeds (default 0..50)")
    parser.add_argument("--json", action="store_true", dest="as_json")
    args = parser.parse_args()

    seeds = bench.DEFAULT_SEEDS if args.seeds in (None, []) else args.seeds
    doc = bench.run(size=args.size, repeats=args.repeats, inner=args.inner, seeds=seeds)
    if args.as_json:
        print(json.dumps(doc, indent=2, sort_keys=True))
        return
    print(f"configured backend: {doc['configured_backend']}")
    print(f"paths: {', '.join(doc['paths'])}")
    for row in doc["results"]:
        times = "  ".join(
            f"{path} {seconds * 1e3:8.3f} ms" for path, seconds in row["seconds"].items()
        )
        speedup = f"  x{row['speedup']:.2f}" if "speedup" in row else ""
        print(f"{row['name']:<32} {times}{speedup}")


if __name__ == "__main__":
    main()
