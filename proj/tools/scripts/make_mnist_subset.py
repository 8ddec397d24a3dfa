#!/usr/bin/env python3
"""Build the class-balanced MNIST subset used by the smoke runs.

Two sources are accepted:

  --csv FILE    rows of 784 pixel values (0..255) followed by the label,
                optionally gzipped (e.g. the 5000-row mnist_5k.csv.gz that
                ships inside the mlxtend wheel)
  --idx DIR     the four official IDX files (train-images-idx3-ubyte, ...)

From each class the first --train-per-class samples become training data and
the next --test-per-class samples become test data (from the official test
file when --idx is used). Both splits are shuffled with a fixed seed and
written as IDX files.
"""

import argparse
import gzip
import struct
from pathlib import Path

import numpy as np


def open_maybe_gz(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def read_idx(path):
    with open_maybe_gz(path) as f:
        data = f.read()
    magic, count = struct.unpack(">II", data[:8])
    if magic == 0x00000803:
        rows, cols = struct.unpack(">II", data[8:16])
        return np.frombuffer(data, dtype=np.uint8, offset=16).reshape(count, rows * cols)
    if magic == 0x00000801:
        return np.frombuffer(data, dtype=np.uint8, offset=8)
    raise ValueError(f"{path}: unexpected IDX magic {magic:#010x}")


def write_idx(images, labels, image_path, label_path):
    side = int(round(np.sqrt(images.shape[1])))
    with open(image_path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), side, side))
        f.write(images.astype(np.uint8).tobytes())
    with open(label_path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def take_per_class(x, y, start, count):
    keep = []
    for k in range(10):
        idx = np.flatnonzero(y == k)[start:start + count]
        if len(idx) < count:
            raise SystemExit(f"class {k}: only {len(idx)} samples available from offset {start}")
        keep.append(idx)
    keep = np.concatenate(keep)
    return x[keep], y[keep]


def main():
    parser = argparse.ArgumentParser(description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--csv", type=Path)
    source.add_argument("--idx", type=Path)
    parser.add_argument("--out", type=Path, default=Path("data/mnist_subset"))
    parser.add_argument("--train-per-class", type=int, default=200)
    parser.add_argument("--test-per-class", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if args.csv:
        with open_maybe_gz(args.csv) as f:
            table = np.loadtxt(f, delimiter=",", dtype=np.int64)
        x, y = table[:, :784], table[:, 784]
        train = take_per_class(x, y, 0, args.train_per_class)
        test = take_per_class(x, y, args.train_per_class, args.test_per_class)
    else:
        d = args.idx
        x_tr = read_idx(next(d.glob("train-images*")))
        y_tr = read_idx(next(d.glob("train-labels*")))
        x_te = read_idx(next(d.glob("t10k-images*")))
        y_te = read_idx(next(d.glob("t10k-labels*")))
        train = take_per_class(x_tr, y_tr, 0, args.train_per_class)
        test = take_per_class(x_te, y_te, 0, args.test_per_class)

    if train[0].min() < 0 or train[0].max() > 255:
        raise SystemExit("pixel values must lie in 0..255")

    rng = np.random.default_rng(args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    for name, (x, y) in (("train", train), ("test", test)):
        order = rng.permutation(len(y))
        write_idx(x[order], y[order], args.out / f"{name}-images-idx3-ubyte",
                  args.out / f"{name}-labels-idx1-ubyte")
        print(f"{name}: {len(y)} samples, per-class counts {np.bincount(y, minlength=10).tolist()}")


if __name__ == "__main__":
    main()
