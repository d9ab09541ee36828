#!/usr/bin/env python3
"""Build the committed Fashion-MNIST subset (IDX files) from per-class JSON.

Source: the `fashion-mnist` npm package (version 1.1.0), whose
src/clothes/<c>.json files each hold {"data": [[784 uint8 pixels], ...]}
with 7000 images per class (rows concatenated train+test; class 0 ships
two extra empty rows, which are dropped).

Reconstruction (the upstream train/test assignment is not recoverable
from the JSON, so the split is rebuilt deterministically):
  1. per class, keep the 7000 well-formed rows (dropping trailing exact
     duplicates if a class somehow exceeds 7000);
  2. train = first 6000 entries, test = last 1000, in package order;
  3. any test image byte-identical to a train image is swapped with the
     last train image not otherwise duplicated, so no image appears in
     both splits.

Output: the four standard IDX containers (gzipped, fixed mtime so bytes
are reproducible) holding the selected classes back to back.

Usage: python3 scripts/build_dataset.py <clothes-json-dir> <out-dir> [classes...]
"""

import gzip
import hashlib
import json
import struct
import sys
from pathlib import Path

TRAIN_PER_CLASS = 6000
TEST_PER_CLASS = 1000
TOTAL_PER_CLASS = TRAIN_PER_CLASS + TEST_PER_CLASS


def load_class(json_dir, cls):
    with open(Path(json_dir) / f"{cls}.json") as f:
        rows = json.load(f)["data"]
    entries = [bytes(r) for r in rows if len(r) == 784]
    if len(entries) != len(rows):
        print(f"class {cls}: dropped {len(rows) - len(entries)} malformed rows")
    if len(entries) < TOTAL_PER_CLASS:
        raise SystemExit(f"class {cls}: only {len(entries)} entries")
    if len(entries) > TOTAL_PER_CLASS:
        first = {}
        dupes = []
        for i, e in enumerate(entries):
            h = hashlib.sha1(e).digest()
            if h in first:
                dupes.append(i)
            else:
                first[h] = i
        drop = set(sorted(dupes, reverse=True)[: len(entries) - TOTAL_PER_CLASS])
        if len(drop) < len(entries) - TOTAL_PER_CLASS:
            raise SystemExit(f"class {cls}: cannot trim to {TOTAL_PER_CLASS}")
        entries = [e for i, e in enumerate(entries) if i not in drop]
    return entries


def split_class(entries, cls):
    train = entries[:TRAIN_PER_CLASS]
    test = entries[TRAIN_PER_CLASS:]
    counts = {}
    for e in entries:
        h = hashlib.sha1(e).digest()
        counts[h] = counts.get(h, 0) + 1
    train_hashes = {hashlib.sha1(e).digest() for e in train}
    swap_src = TRAIN_PER_CLASS - 1
    swapped = 0
    for i, e in enumerate(test):
        if hashlib.sha1(e).digest() not in train_hashes:
            continue
        while swap_src >= 0 and counts[hashlib.sha1(train[swap_src]).digest()] > 1:
            swap_src -= 1
        if swap_src < 0:
            raise SystemExit(f"class {cls}: no unique train image left to swap")
        train[swap_src], test[i] = test[i], train[swap_src]
        swap_src -= 1
        swapped += 1
    train_hashes = {hashlib.sha1(e).digest() for e in train}
    leaks = sum(1 for e in test if hashlib.sha1(e).digest() in train_hashes)
    if leaks:
        raise SystemExit(f"class {cls}: {leaks} test images still present in train")
    print(f"class {cls}: train {len(train)}, test {len(test)}, swapped {swapped}")
    return train, test


def write_idx_gz(path, magic, dims, payload):
    header = struct.pack(f">{1 + len(dims)}i", magic, *dims)
    with open(path, "wb") as f:
        with gzip.GzipFile(fileobj=f, mode="wb", mtime=0) as gz:
            gz.write(header + payload)
    print(f"wrote {path} ({path.stat().st_size} bytes)")


def main(argv):
    if len(argv) < 3:
        raise SystemExit(__doc__)
    json_dir, out_dir = argv[1], Path(argv[2])
    classes = [int(c) for c in argv[3:]] or [0, 1, 2, 3]
    out_dir.mkdir(parents=True, exist_ok=True)

    splits = {"train": ([], []), "test": ([], [])}
    for cls in classes:
        train, test = split_class(load_class(json_dir, cls), cls)
        for name, entries in (("train", train), ("test", test)):
            images, labels = splits[name]
            images.extend(entries)
            labels.extend([cls] * len(entries))

    names = {"train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
             "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")}
    for name, (images, labels) in splits.items():
        img_file, lbl_file = names[name]
        write_idx_gz(out_dir / f"{img_file}.gz", 2051,
                     (len(images), 28, 28), b"".join(images))
        write_idx_gz(out_dir / f"{lbl_file}.gz", 2049,
                     (len(labels),), bytes(labels))


if __name__ == "__main__":
    main(sys.argv)
