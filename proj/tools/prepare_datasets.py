#!/usr/bin/env python3
"""Convert public node-classification datasets into the toolkit's text formats.

Inputs are the LINQS Cora distribution (cora.cites / cora.content) and the
Planetoid Citeseer pickles (ind.citeseer.*). Both ship inside the `pgl` wheel
on PyPI under pgl/data/, so

    pip download --no-deps pgl -d /tmp/pgl
    python3 tools/prepare_datasets.py --wheel /tmp/pgl/pgl-*.whl --out data

reproduces data/cora and data/citeseer. Pol.Blogs, PolBook and Dolphins use
plain edge/label files and only need a manifest (see data/README.md).
"""
import argparse
import json
import os
import pickle
import zipfile

import numpy as np


def write_manifest(out_dir, name, files, n, edges, classes, split_sizes):
    manifest = {
        "name": name,
        "edges": files["edges"],
        "labels": files["labels"],
        "expected_nodes": n,
        "expected_edges": edges,
        "expected_classes": classes,
        "split_sizes": split_sizes,
    }
    if "features" in files:
        manifest["features"] = files["features"]
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


def convert_cora(read, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    content = read("pgl/data/cora/cora.content").decode().splitlines()
    cites = read("pgl/data/cora/cora.cites").decode().splitlines()
    with open(os.path.join(out_dir, "cora.labels"), "w") as lab, \
            open(os.path.join(out_dir, "cora.features"), "w") as feat:
        for line in content:
            tok = line.split()
            lab.write(f"{tok[0]} {tok[-1]}\n")
            nz = [f"{k}:1" for k, v in enumerate(tok[1:-1]) if v != "0"]
            feat.write(" ".join([tok[0]] + nz) + "\n")
    with open(os.path.join(out_dir, "cora.edges"), "w") as f:
        for line in cites:
            a, b = line.split()
            f.write(f"{a} {b}\n")
    write_manifest(out_dir, "cora",
                   {"edges": "cora.edges", "labels": "cora.labels", "features": "cora.features"},
                   len(content), len(cites), 7, [267, 267, 2174])


def convert_citeseer(read, out_dir):
    os.makedirs(out_dir, exist_ok=True)

    def load(part):
        return pickle.loads(read(f"pgl/data/citeseer/ind.citeseer.{part}"), encoding="latin1")

    allx, ally, tx, ty, graph = (load(p) for p in ("allx", "ally", "tx", "ty", "graph"))
    test_index = [int(v) for v in read("pgl/data/citeseer/ind.citeseer.test.index").decode().split()]
    rows = {}
    allx = allx.tocsr()
    tx = tx.tocsr()
    for i in range(allx.shape[0]):
        rows[i] = (allx.getrow(i), int(np.argmax(ally[i])))
    for k, idx in enumerate(test_index):
        # Planetoid pads 15 isolated test slots with all-zero labels; they are not papers.
        if ty[k].sum() == 0:
            continue
        rows[idx] = (tx.getrow(k), int(np.argmax(ty[k])))
    nodes = sorted(rows)
    keep = set(nodes)
    with open(os.path.join(out_dir, "citeseer.labels"), "w") as lab, \
            open(os.path.join(out_dir, "citeseer.features"), "w") as feat:
        for v in nodes:
            row, y = rows[v]
            lab.write(f"{v} c{y}\n")
            nz = [f"{j}:{row[0, j]:g}" for j in sorted(row.indices)]
            feat.write(" ".join([str(v)] + nz) + "\n")
    pairs = set()
    for u, vs in graph.items():
        for v in vs:
            if u != v and u in keep and v in keep:
                pairs.add((min(u, v), max(u, v)))
    with open(os.path.join(out_dir, "citeseer.edges"), "w") as f:
        for u, v in sorted(pairs):
            f.write(f"{u} {v}\n")
    write_manifest(out_dir, "citeseer",
                   {"edges": "citeseer.edges", "labels": "citeseer.labels", "features": "citeseer.features"},
                   len(nodes), len(pairs), 6, [330, 330, 2652])


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--wheel", required=True, help="path to a pgl wheel")
    ap.add_argument("--out", default="data")
    args = ap.parse_args()
    archive = zipfile.ZipFile(args.wheel)
    convert_cora(archive.read, os.path.join(args.out, "cora"))
    convert_citeseer(archive.read, os.path.join(args.out, "citeseer"))


if __name__ == "__main__":
    main()
