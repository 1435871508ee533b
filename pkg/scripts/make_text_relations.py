"""Write small synthetic publication relations (left, right, labels) for the text pipeline.

    python scripts/make_text_relations.py --out fixtures/text
"""

from __future__ import annotations

import argparse
from pathlib import Path

from ertransfer.data import save_dataset, save_labels
from ertransfer.synthetic import generate_text_relations


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="fixtures/text")
    ap.add_argument("--entities", type=int, default=40)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, seed in (("target", 1), ("source", 2)):
        left, right, labels = generate_text_relations(args.entities, seed=seed, prefix=name)
        save_dataset(left, out / f"{name}_left.csv")
        save_dataset(right, out / f"{name}_right.csv")
        save_labels(labels, out / f"{name}_labels.csv")
        print(f"{name}: {len(left)} x {len(right)} tuples, {len(labels)} labeled pairs")


if __name__ == "__main__":
    main()
