#!/usr/bin/env python3
"""Fetch Coil20 and USPS and convert them to the formats the runner reads.

    python3 scripts/fetch_datasets.py [--out data]

Produces
  data/coil20/obj01 .. obj20/*.pgm   128x128 binary PGM, one directory per class
  data/usps.csv                      matrix CSV, header "16,16", labels 0..9

Needs network access and Pillow.
"""
import argparse
import bz2
import io
import re
import urllib.request
import zipfile
from pathlib import Path

COIL20_URL = "https://www.cs.columbia.edu/CAVE/databases/SLAM_coil-20_coil-100/coil-20/coil-20-proc.zip"
USPS_URLS = [
    "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/multiclass/usps.bz2",
    "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/multiclass/usps.t.bz2",
]


def fetch(url):
    print(f"downloading {url}")
    with urllib.request.urlopen(url) as r:
        return r.read()


def coil20(out):
    from PIL import Image

    archive = zipfile.ZipFile(io.BytesIO(fetch(COIL20_URL)))
    count = 0
    for name in archive.namelist():
        m = re.search(r"obj(\d+)__(\d+)\.png$", name)
        if not m:
            continue
        obj, pose = int(m.group(1)), int(m.group(2))
        target = out / "coil20" / f"obj{obj:02d}"
        target.mkdir(parents=True, exist_ok=True)
        img = Image.open(io.BytesIO(archive.read(name))).convert("L")
        img.save(target / f"{pose:03d}.pgm")
        count += 1
    print(f"coil20: {count} images")


def usps(out):
    rows = []
    for url in USPS_URLS:
        for line in bz2.decompress(fetch(url)).decode().splitlines():
            parts = line.split()
            if not parts:
                continue
            values = [0.0] * 256
            for item in parts[1:]:
                idx, val = item.split(":")
                values[int(idx) - 1] = (float(val) + 1.0) / 2.0
            # libsvm labels run 1..10
            rows.append((int(float(parts[0])) - 1, values))
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "usps.csv", "w") as f:
        f.write("16,16\n")
        for label, values in rows:
            f.write(",".join([str(label)] + [repr(v) for v in values]) + "\n")
    print(f"usps: {len(rows)} images")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data", type=Path)
    ap.add_argument("--only", choices=["coil20", "usps"])
    args = ap.parse_args()
    if args.only in (None, "coil20"):
        coil20(args.out)
    if args.only in (None, "usps"):
        usps(args.out)


if __name__ == "__main__":
    main()
