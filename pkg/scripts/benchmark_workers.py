#!/usr/bin/env python3
"""Time dataset generation across worker counts and check output equality.

Generates the same scaled recipe once per worker count into separate
directories, reports wall time per configuration, and confirms the output
trees are byte-identical (the determinism contract).
"""

import argparse
import hashlib
import shutil
import time
from pathlib import Path

from synthface.dataset import generate_dataset, preset_config


def tree_digest(root: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--preset", default="syn-1m")
    parser.add_argument("--scale", type=int, default=2000, help="identity-count divisor")
    parser.add_argument("--workers", type=int, nargs="+", default=[1, 2, 4, 8])
    parser.add_argument("--out", default="bench_out")
    parser.add_argument("--keep", action="store_true", help="keep generated trees")
    args = parser.parse_args()

    root = Path(args.out)
    digests = {}
    baseline = None
    print(f"preset={args.preset} scale={args.scale}")
    for workers in args.workers:
        out = root / f"w{workers}"
        if out.exists():
            shutil.rmtree(out)
        config = preset_config(args.preset, scale=args.scale, output_dir=str(out))
        start = time.perf_counter()
        manifest = generate_dataset(config, workers=workers)
        elapsed = time.perf_counter() - start
        digests[workers] = tree_digest(out)
        if baseline is None:
            baseline = elapsed
        print(
            f"  workers={workers:2d}  {elapsed:7.1f}s  "
            f"{manifest['totals']['images'] / elapsed:6.1f} img/s  "
            f"speedup {baseline / elapsed:4.2f}x"
        )

    unique = set(digests.values())
    print(f"output trees identical across worker counts: {len(unique) == 1}")
    if not args.keep:
        shutil.rmtree(root, ignore_errors=True)


if __name__ == "__main__":
    main()
