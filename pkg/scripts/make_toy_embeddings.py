"""Regenerate src/gest/data/toy_embeddings.txt.

Words of one class share a random centre plus smaller per-word noise, so
synonyms and same-type entities land close together while classes stay apart.
"""

import sys
from pathlib import Path

import numpy as np

DIM = 16
SEED = 20240214

CLASSES = {
    "person": "john mary bob sandra daniel fred bill jeff julie emily jessica lily kate michael peter sarah "
    "antoine bernhard brian greg jason julius sumit yann gertrude winona".split(),
    "object": "football apple milk phone cup backpack notebook bag book ball box watch key pen".split(),
    "place": "kitchen office playground garden bathroom bedroom hallway park school cinema store room".split(),
    "motion": "go went move moved travel travelled traveled journey journeyed to back".split(),
    "location": "is in are be located".split(),
    "acquire": "pick picked up get got grab grabbed take took".split(),
    "release": "drop dropped discard discarded put down leave left".split(),
    "transfer": "give gave hand handed pass passed".split(),
    "existence": "exists exist".split(),
    "temporal": "next same time meanwhile before after during overlaps then".split(),
    "spatial": "on top behind left of right near".split(),
    "logical": "and or cause because".split(),
    "semantic": "entity same_entity".split(),
    "timeframe": "yesterday morning afternoon evening this".split(),
}


def build(seed=SEED, dim=DIM, spread=1.0):
    rng = np.random.default_rng(seed)
    rows = {}
    for _, words in CLASSES.items():
        centre = rng.normal(size=dim)
        centre /= np.linalg.norm(centre)
        for w in words:
            if w in rows:
                continue
            v = centre + spread * rng.normal(size=dim) / np.sqrt(dim)
            rows[w] = v / np.linalg.norm(v)
    return rows


def main(out=None):
    out = Path(out or Path(__file__).resolve().parents[1] / "src/gest/data/toy_embeddings.txt")
    rows = build()
    with open(out, "w", encoding="utf-8") as fh:
        for w, v in rows.items():
            fh.write(w + " " + " ".join(f"{x:.6f}" for x in v) + "\n")
    print(f"wrote {len(rows)} vectors of dimension {DIM} to {out}")


if __name__ == "__main__":
    main(*sys.argv[1:])
