"""Regenerate the bundled fixture embedding store (about 200 words, d=16).

    python scripts/make_fixture_embeddings.py [out_path]
"""

import sys
from pathlib import Path

import numpy as np

WORDS = """
a an the of and for in on to with by at from data database databases relational
model models query queries processing system systems large scale shared banks
edgar codd communications acm vldb sigmod icde journal conference proceedings
transactions international workshop symposium review letters survey analysis
learning machine deep neural network networks entity resolution record linkage
matching duplicate detection cleaning integration schema mapping transfer
adaptation domain classifier classification feature features vector vectors
representation representations embedding embeddings word words semantic similarity
index indexing search retrieval information knowledge graph graphs mining pattern
patterns stream streams distributed parallel efficient fast scalable approximate
optimization algorithm algorithms theory practice management storage memory cache
transaction concurrency control recovery logging view views join joins aggregation
restaurant cafe grill kitchen bistro pizza sushi burger taco thai chinese italian
mexican french indian street avenue road boulevard drive new york san francisco
los angeles chicago boston seattle austin book books novel edition paperback
hardcover press publishing author authors volume series history science art music
song album artist band live love night day world life time
1970 1995 2001 2008 2012 2015 2016 2017 2018 2019
john david michael maria anna peter paul smith jones lee wang zhang kumar garcia
""".split()


def main(out: Path) -> None:
    rng = np.random.default_rng(20190101)
    seen = []
    for w in WORDS:
        if w not in seen:
            seen.append(w)
    vecs = rng.normal(0.0, 0.5, size=(len(seen), 16)).round(6)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(f"{len(seen)} 16\n")
        for w, v in zip(seen, vecs):
            fh.write(w + " " + " ".join(f"{x:.6f}" for x in v) + "\n")
    print(f"wrote {len(seen)} words to {out}")


if __name__ == "__main__":
    default = Path(__file__).resolve().parents[1] / "src" / "ertransfer" / "data" / "fixture_embeddings.txt"
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else default)
