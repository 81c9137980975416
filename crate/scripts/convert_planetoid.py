#!/usr/bin/env python3
"""Convert public citation-network file layouts into the canonical dataset
directory format used by this project (graph.edges / features.csv /
labels.csv / split.json).

Two source layouts are supported:

  planetoid  The pickled ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index}
             files (Cora, Citeseer, Pubmed). The standard split is emitted:
             the first len(y) nodes train, the next 500 validate, and the
             nodes listed in test.index test.

  geomgcn    The out1_node_feature_label.txt / out1_graph_edges.txt pair
             (Chameleon, Cornell, Texas, Wisconsin). No split file is
             written; use --split random at training time.

Usage:
  python3 scripts/convert_planetoid.py planetoid ind-files-dir cora out-dir
  python3 scripts/convert_planetoid.py geomgcn raw-dir out-dir

Requires numpy and scipy (the planetoid pickles hold scipy sparse matrices).
Isolated test nodes in Citeseer (ids in the test range missing from
test.index) receive zero features and the most common label of the test
block, matching the usual preprocessing.
"""

import json
import pickle
import sys
from pathlib import Path

import numpy as np


def _load_pickle(path: Path):
    with open(path, "rb") as handle:
        return pickle.load(handle, encoding="latin1")


def _write_features(path: Path, features: np.ndarray) -> None:
    with open(path, "w") as out:
        for row in features:
            out.write(",".join(repr(float(v)) for v in row))
            out.write("\n")


def _write_labels(path: Path, labels: np.ndarray) -> None:
    with open(path, "w") as out:
        for label in labels:
            out.write(f"{int(label)}\n")


def _write_edges(path: Path, edges) -> None:
    canonical = sorted({(min(u, v), max(u, v)) for u, v in edges if u != v})
    with open(path, "w") as out:
        for u, v in canonical:
            out.write(f"{u}\t{v}\n")


def convert_planetoid(src: Path, name: str, out: Path) -> None:
    parts = {}
    for suffix in ("x", "y", "tx", "ty", "allx", "ally", "graph"):
        parts[suffix] = _load_pickle(src / f"ind.{name}.{suffix}")
    test_index = np.loadtxt(src / f"ind.{name}.test.index", dtype=int)

    allx = parts["allx"].todense()
    tx = parts["tx"].todense()
    ally = np.asarray(parts["ally"])
    ty = np.asarray(parts["ty"])

    n_known = allx.shape[0]
    test_sorted = np.sort(test_index)
    n_total = int(test_sorted.max()) + 1
    q = allx.shape[1]
    c = ally.shape[1]

    features = np.zeros((n_total, q))
    features[:n_known] = allx
    one_hot = np.zeros((n_total, c))
    one_hot[:n_known] = ally
    # tx rows are ordered by test.index as given (possibly shuffled).
    for row, node in enumerate(test_index):
        features[node] = tx[row]
        one_hot[node] = ty[row]

    labels = np.argmax(one_hot, axis=1)
    # Citeseer has test-range ids that never appear in test.index; they keep
    # zero features and get the test block's most common label.
    present = np.zeros(n_total, dtype=bool)
    present[:n_known] = True
    present[test_index] = True
    if not present.all():
        fallback = np.bincount(labels[test_index]).argmax()
        labels[~present] = fallback
        print(f"note: {int((~present).sum())} isolated test ids filled with label {fallback}")

    edges = []
    for node, neighbors in parts["graph"].items():
        for neighbor in neighbors:
            if node < n_total and neighbor < n_total:
                edges.append((int(node), int(neighbor)))

    n_train = parts["y"].shape[0]
    in_test = set(int(i) for i in test_sorted)
    val = [i for i in range(n_train, n_total) if i not in in_test][:500]
    split = {
        "train": list(range(n_train)),
        "val": val,
        "test": [int(i) for i in test_sorted],
    }

    out.mkdir(parents=True, exist_ok=True)
    _write_edges(out / "graph.edges", edges)
    _write_features(out / "features.csv", np.asarray(features))
    _write_labels(out / "labels.csv", labels)
    with open(out / "split.json", "w") as handle:
        json.dump(split, handle)
        handle.write("\n")
    undirected = len({(min(u, v), max(u, v)) for u, v in edges if u != v})
    print(
        f"{name}: {n_total} nodes, {q} features, {c} classes, "
        f"{undirected} undirected edges -> {out}"
    )


def convert_geomgcn(src: Path, out: Path) -> None:
    node_file = src / "out1_node_feature_label.txt"
    edge_file = src / "out1_graph_edges.txt"

    features = {}
    labels = {}
    with open(node_file) as handle:
        next(handle)  # header: node_id feature label
        for line in handle:
            node_id, feature, label = line.strip().split("\t")
            features[int(node_id)] = [float(v) for v in feature.split(",")]
            labels[int(node_id)] = int(label)

    n = max(features) + 1
    q = len(next(iter(features.values())))
    matrix = np.zeros((n, q))
    label_vec = np.zeros(n, dtype=int)
    for node, row in features.items():
        matrix[node] = row
        label_vec[node] = labels[node]

    edges = []
    with open(edge_file) as handle:
        next(handle)  # header: id id
        for line in handle:
            u, v = line.strip().split("\t")
            edges.append((int(u), int(v)))

    out.mkdir(parents=True, exist_ok=True)
    _write_edges(out / "graph.edges", edges)
    _write_features(out / "features.csv", matrix)
    _write_labels(out / "labels.csv", label_vec)
    undirected = len({(min(u, v), max(u, v)) for u, v in edges if u != v})
    print(f"{src.name}: {n} nodes, {q} features -> {out} ({undirected} undirected edges)")


def main(argv):
    if len(argv) >= 2 and argv[1] == "planetoid" and len(argv) == 5:
        convert_planetoid(Path(argv[2]), argv[3], Path(argv[4]))
    elif len(argv) >= 2 and argv[1] == "geomgcn" and len(argv) == 4:
        convert_geomgcn(Path(argv[2]), Path(argv[3]))
    else:
        print(__doc__)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
