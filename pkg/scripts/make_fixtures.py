"""Write the golden fixture, one directory per planted defect, and optionally the scale fixture."""

from __future__ import annotations

import argparse
from pathlib import Path

from dds_gate import synth


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-items", type=int, default=2000)
    ap.add_argument("--scale", type=int, default=0, help="also write a scale fixture with this many items")
    args = ap.parse_args()

    fx = synth.golden(synth.FixtureConfig(n_items=args.n_items, seed=args.seed))
    paths = synth.write_fixture(fx, args.out / "golden")
    print(f"golden  -> {paths.root}")
    for name, (rec, _) in synth.DEFECTS.items():
        p = synth.write_fixture(synth.planted(fx, name), args.out / name)
        print(f"{name:<28} REC {rec:>2} -> {p.root}")
    if args.scale:
        p = synth.write_fixture(synth.scale(args.scale, seed=args.seed), args.out / "scale")
        print(f"scale   -> {p.root}")
    print("check args:", " ".join(paths.check_args()))


if __name__ == "__main__":
    main()
