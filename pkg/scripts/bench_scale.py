"""Time `dds check --all` on a synthetic fixture of N items, with a CPU calibration figure."""

from __future__ import annotations

import argparse
import subprocess
import sys
import tempfile
import time
from pathlib import Path

from dds_gate import synth


def calibration() -> float:
    t = time.perf_counter()
    sum(range(3 * 10**7))
    return time.perf_counter() - t


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-items", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--repeat", type=int, default=1)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        paths = synth.write_fixture(synth.scale(args.n_items, seed=args.seed), Path(tmp) / "scale")
        argv = [sys.executable, "-m", "dds_gate.cli", "check", *paths.check_args(), "--all",
                "--output", str(Path(tmp) / "report.json")]
        print(f"calibration sum(range(3e7)): {calibration():.2f} s")
        for k in range(args.repeat):
            t = time.perf_counter()
            code = subprocess.run(argv).returncode
            print(f"run {k}: {args.n_items} items, exit {code}, {time.perf_counter() - t:.2f} s")


if __name__ == "__main__":
    main()
