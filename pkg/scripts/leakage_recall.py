"""Recall and precision of banded near-duplicate detection against an all-pairs scan.

Each trial draws random 64-bit hashes over three splits and plants cross-split
pairs a few bits apart; the banded search must return exactly the all-pairs set.
"""

from __future__ import annotations

import argparse
import itertools
import json
import random
import time

from dds_gate.integrity import sha256_digest
from dds_gate.manifest import load_manifest
from dds_gate.splits import near_duplicate_leakage

SPLITS = ("train", "validation", "test")
HEADER = {"schema_version": "1.0", "dataset_id": "recall", "created": "2024-01-01T00:00:00Z",
          "sources": [{"source_id": "cam", "acquisition_config_version": "1"}]}


def trial(rng: random.Random, n: int, planted: int, max_distance: int):
    rows = []
    for k in range(n):
        rows.append((f"r{k}", rng.choice(SPLITS), rng.getrandbits(64)))
    for k in range(planted):
        _, split, h = rows[rng.randrange(n)]
        for bit in rng.sample(range(64), rng.randint(0, max_distance)):
            h ^= 1 << bit
        rows.append((f"p{k}", rng.choice([s for s in SPLITS if s != split]), h))
    lines = [HEADER] + [{"id": i, "digest": sha256_digest(i.encode()), "source_id": "cam", "split": s,
                         "lineage": {"is_raw": True, "raw_uri": f"raw://{i}"}, "simhash64": h} for i, s, h in rows]
    manifest = load_manifest("\n".join(json.dumps(r) for r in lines).encode())
    truth = {tuple(sorted((a[0], b[0]))) for a, b in itertools.combinations(rows, 2)
             if a[1] != b[1] and bin(a[2] ^ b[2]).count("1") <= max_distance}
    t = time.perf_counter()
    found = {(p.item_a, p.item_b) for p in near_duplicate_leakage(manifest, max_distance, max_distance + 1)}
    return truth, found, time.perf_counter() - t


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--planted", type=int, default=10)
    ap.add_argument("--max-distance", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    tp = fp = fn = 0
    slowest = 0.0
    for _ in range(args.trials):
        truth, found, dt = trial(rng, args.n, args.planted, args.max_distance)
        tp += len(truth & found)
        fp += len(found - truth)
        fn += len(truth - found)
        slowest = max(slowest, dt)
    recall = tp / (tp + fn) if tp + fn else 1.0
    precision = tp / (tp + fp) if tp + fp else 1.0
    print(f"trials {args.trials}  pairs {tp + fn}  recall {recall:.4f}  precision {precision:.4f}  "
          f"slowest {slowest:.3f} s")


if __name__ == "__main__":
    main()
