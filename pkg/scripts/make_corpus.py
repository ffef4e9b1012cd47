"""Write a synthetic mixed input tree (DICOM, WSI, NIfTI, twix, PNG) plus a matching job config."""

import argparse
from collections import Counter
from pathlib import Path

import yaml

from medideid.synthetic import MIXED_TREE_STAGES, write_mixed_tree


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("root", type=Path, help="directory to create")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--copies", type=int, default=1, help="independent trees, each with its own seed")
    args = ap.parse_args()

    kinds = Counter()
    for i in range(args.copies):
        sub = args.root / "input" / f"tree_{i:03d}"
        kinds.update(write_mixed_tree(sub, seed=args.seed + i).values())
    job = {"inputs": ["input"], "output": "output", "stages": MIXED_TREE_STAGES, "workers": 4,
           "wsi_converted": [], "uid_map_path": "state/uid_map.json"}
    (args.root / "job.yaml").write_text(yaml.safe_dump(job, sort_keys=False))
    print(f"wrote {sum(kinds.values())} files under {args.root / 'input'}: "
          + ", ".join(f"{k}={n}" for k, n in sorted(kinds.items())))
    print(f"run with: medideid run --config {args.root / 'job.yaml'}")


if __name__ == "__main__":
    main()
