#!/usr/bin/env python3
"""Download the UCI datasets that are not bundled and write them as data/<name>.csv."""

import argparse
import csv
import io
import pathlib
import sys
import urllib.request
import zipfile

UCI = "https://archive.ics.uci.edu/ml/machine-learning-databases/"


def fetch(url):
    with urllib.request.urlopen(url, timeout=60) as r:
        return r.read()


def seeds():
    text = fetch(UCI + "00236/seeds_dataset.txt").decode()
    header = ["area", "perimeter", "compactness", "kernel_length", "kernel_width",
              "asymmetry", "groove_length", "class"]
    rows = [line.split() for line in text.splitlines() if line.strip()]
    return header, rows


def column():
    blob = fetch(UCI + "00212/vertebral_column_data.zip")
    with zipfile.ZipFile(io.BytesIO(blob)) as z:
        text = z.read("column_3C.dat").decode()
    header = ["pelvic_incidence", "pelvic_tilt", "lumbar_lordosis_angle", "sacral_slope",
              "pelvic_radius", "spondylolisthesis_grade", "class"]
    rows = [line.split() for line in text.splitlines() if line.strip()]
    return header, rows


def parkinsons():
    text = fetch(UCI + "parkinsons/parkinsons.data").decode()
    reader = list(csv.reader(io.StringIO(text)))
    names = reader[0]
    status = names.index("status")
    keep = [i for i in range(len(names)) if i not in (0, status)]
    header = [names[i].replace(":", "_").replace("(", "_").replace(")", "").replace("%", "pct")
              for i in keep] + ["class"]
    rows = [[r[i] for i in keep] + [r[status]] for r in reader[1:] if r]
    return header, rows


SOURCES = {"seeds": seeds, "column": column, "parkinsons": parkinsons}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("names", nargs="*", default=sorted(SOURCES))
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data"))
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    status = 0
    for name in args.names:
        if name not in SOURCES:
            print(f"unknown dataset '{name}'", file=sys.stderr)
            status = 1
            continue
        try:
            header, rows = SOURCES[name]()
        except Exception as e:
            print(f"{name}: download failed: {e}", file=sys.stderr)
            status = 1
            continue
        with open(out / f"{name}.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(header)
            w.writerows(rows)
        print(f"{name}: {len(rows)} records -> {out / (name + '.csv')}")
    return status


if __name__ == "__main__":
    sys.exit(main())
