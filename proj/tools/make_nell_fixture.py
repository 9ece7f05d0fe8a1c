#!/usr/bin/env python3
# Writes data/nell_fixture.tsv: a NELL-like graph of 817 entities and 1,860
# triples with gold labels (1,693 correct, accuracy 0.9102).
#
# Sizes: 300 singletons, 250 pairs, 150 triples, 101 clusters of 4, and 16
# larger clusters (6..19, adjusted so the total is 1,860). Small clusters get
# an accuracy drawn around 0.91; larger ones 0.97. Labels are then flipped at
# random positions until exactly 1,693 are correct.
#
# usage: make_nell_fixture.py [output] [seed]

import sys

import numpy as np

PREDICATES = [
    "concept:agentbelongstoorganization",
    "concept:athleteplaysforteam",
    "concept:citylocatedinstate",
    "concept:generalizations",
    "concept:haswikipediaurl",
    "concept:latitudelongitude",
    "concept:personborninlocation",
    "concept:proxyfor",
    "concept:subpartof",
    "concept:teamplaysinleague",
]


def make(seed):
    rng = np.random.default_rng(seed)
    small = [1] * 300 + [2] * 250 + [3] * 150 + [4] * 101
    big = list(rng.integers(6, 20, 16))
    sizes = np.array(small + big)
    diff = 1860 - sizes.sum()
    i = len(sizes) - 1
    while diff != 0:
        step = 1 if diff > 0 else -1
        if sizes[i] + step >= 6:
            sizes[i] += step
            diff -= step
        i = i - 1 if i > len(small) else len(sizes) - 1
    labels = []
    for sz in sizes:
        p = 0.97 if sz >= 5 else np.clip(0.91 + rng.normal(0, 0.1), 0, 1)
        labels.append((rng.random(sz) < p).astype(int))
    flat = np.concatenate(labels)
    target = 1693
    while flat.sum() != target:
        j = rng.integers(len(flat))
        if flat.sum() > target and flat[j] == 1:
            flat[j] = 0
        elif flat.sum() < target and flat[j] == 0:
            flat[j] = 1
    return sizes, flat


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "data/nell_fixture.tsv"
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 7
    sizes, flat = make(seed)
    pos = 0
    with open(out, "w") as f:
        f.write("# NELL-like fixture: subject, predicate, object, object_kind, label\n")
        for e, sz in enumerate(sizes):
            for k in range(sz):
                pred = PREDICATES[(e + k) % len(PREDICATES)]
                if k % 2 == 0:
                    obj, kind = f"concept:entity:n{(e * 7 + k * 13) % 817}", "entity"
                else:
                    obj, kind = f"literal_{e}_{k}", "data"
                f.write(f"concept:entity:n{e}\t{pred}\t{obj}\t{kind}\t{int(flat[pos])}\n")
                pos += 1
    print(f"wrote {pos} triples, {len(sizes)} entities, {int(flat.sum())} correct to {out}")


if __name__ == "__main__":
    main()
