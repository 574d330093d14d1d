"""Build the vendored UCI CSVs and schema files under data/uci/.

Iris and Wine come from scikit-learn.  The other sets are read from
redistributed copies inside locally downloaded wheels:

    pip download --no-deps -d WHEELS orange3 keel_ds common_datasets

Banknote authentication is not bundled by any of these packages; drop a
``banknote.csv`` (columns variance, skewness, curtosis, entropy, class) into
data/uci/ and rerun with ``--banknote PATH`` to add it.
"""

from __future__ import annotations

import argparse
import csv
import glob
import io
import json
import os
import zipfile

from sklearn.datasets import load_iris, load_wine

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "data", "uci")


def _wheel(wheels, prefix):
    hits = sorted(glob.glob(os.path.join(wheels, prefix + "*.whl")))
    if not hits:
        raise SystemExit(f"no {prefix}*.whl under {wheels}")
    return zipfile.ZipFile(hits[-1])


def _write(name, header, rows, schema):
    os.makedirs(OUT, exist_ok=True)
    with open(os.path.join(OUT, f"{name}.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    with open(os.path.join(OUT, f"{name}.json"), "w") as fh:
        json.dump(schema, fh, indent=2, sort_keys=True)
        fh.write("\n")
    normals = sum(1 for r in rows if str(r[-1]) == str(schema["normal_value"]))
    print(f"{name:12s} n={len(rows):5d} normals={normals:4d} f={len(header) - 1}")


def _schema(label, normal, provenance, expected=None):
    out = {"label_column": label, "normal_value": normal, "provenance": provenance}
    if expected:
        out["expected"] = expected
    return out


def _keel_rows(z, name):
    text = z.read(f"keel_ds/data/balanced/raw/{name}.dat").decode()
    return [[c.strip() for c in line.split(",")] for line in text.splitlines()
            if line.strip() and not line.startswith("@")]


def build(wheels, banknote=None):
    iris = load_iris()
    rows = [[*map(repr, x), iris.target_names[t]] for x, t in zip(iris.data.tolist(), iris.target)]
    _write("iris", [*(c.replace(" (cm)", "").replace(" ", "_") for c in iris.feature_names), "class"],
           rows, _schema("class", "setosa", "scikit-learn load_iris (UCI Iris)",
                         {"n": 150, "normals": 50, "features": 4}))

    wine = load_wine()
    rows = [[*map(repr, x), f"class_{t + 1}"] for x, t in zip(wine.data.tolist(), wine.target)]
    _write("wine", [*wine.feature_names, "class"], rows,
           _schema("class", "class_2", "scikit-learn load_wine (UCI Wine); class_2 has 71 samples",
                   {"n": 178, "normals": 71, "features": 13}))

    z = _wheel(wheels, "orange3")
    lines = z.read("Orange/tests/datasets/ionosphere.tab").decode().splitlines()
    header = [*lines[0].split("\t")[:-1], "class"]
    rows = [line.split("\t") for line in lines[3:] if line.strip()]
    _write("ionosphere", header, rows,
           _schema("class", "g", "Orange3 test copy of UCI Ionosphere",
                   {"n": 351, "normals": 225, "features": 34}))

    z = _wheel(wheels, "common_datasets")
    text = z.read("common_datasets/data/classification/glass/glass.data.txt").decode()
    rows = [line.split(",")[1:] for line in text.splitlines() if line.strip()]
    _write("glass", ["RI", "Na", "Mg", "Al", "Si", "K", "Ca", "Ba", "Fe", "class"], rows,
           _schema("class", "2", "UCI glass.data via common_datasets; type 2 "
                   "(building windows, non-float) has 76 samples",
                   {"n": 214, "normals": 76, "features": 9}))

    z = _wheel(wheels, "keel_ds")
    rows = _keel_rows(z, "wisconsin")
    rows = [[*r[:-1], "benign" if r[-1] == "2" else "malignant"] for r in rows]
    cols = ["clump_thickness", "cell_size", "cell_shape", "adhesion", "epithelial_size",
            "bare_nuclei", "bland_chromatin", "normal_nucleoli", "mitoses", "class"]
    _write("bcw", cols, rows,
           _schema("class", "benign", "KEEL wisconsin.dat (UCI BCW with the 16 rows "
                   "containing missing values removed: 683 of 699)",
                   {"n": 683, "normals": 444, "features": 9}))

    rows = _keel_rows(z, "housevotes")
    rows = [[*("1" if c == "y" else "0" for c in r[:-1]), r[-1]] for r in rows]
    _write("vote", [*(f"vote_{i + 1}" for i in range(16)), "class"], rows,
           _schema("class", "democrat", "KEEL housevotes.dat (UCI house-votes-84 restricted "
                   "to the 232 complete records; votes coded y=1, n=0)",
                   {"n": 232, "normals": 124, "features": 16}))

    if banknote:
        with open(banknote) as fh:
            data = list(csv.reader(io.StringIO(fh.read())))
        if data and not data[0][0].replace(".", "").replace("-", "").isdigit():
            data = data[1:]
        _write("banknote", ["variance", "skewness", "curtosis", "entropy", "class"], data,
               _schema("class", "0", "UCI banknote authentication; genuine notes (0) are normal",
                       {"n": 1372, "normals": 762, "features": 4}))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--wheels", default="wheels", help="directory holding the downloaded wheels")
    ap.add_argument("--banknote", default=None, help="optional path to the raw banknote CSV")
    args = ap.parse_args()
    build(args.wheels, args.banknote)


if __name__ == "__main__":
    main()
