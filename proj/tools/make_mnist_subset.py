#!/usr/bin/env python3
"""Build MNIST IDX files from two redistributed MNIST samples.

train: the 5,000 digits of mlxtend's mnist_5k.csv.gz (pip package mlxtend).
t10k:  the digits of the npm package `mnist` (10,000 digits, 1,000 per class)
       that do not occur in the training file.

    pip download mlxtend==0.24.0 --no-deps -d /tmp/pk
    npm pack mnist@1.1.0 --pack-destination /tmp/pk
    python3 tools/make_mnist_subset.py /tmp/pk/mlxtend-0.24.0-py3-none-any.whl \
        /tmp/pk/mnist-1.1.0.tgz data/mnist
"""

import argparse
import gzip
import io
import json
import pathlib
import struct
import tarfile
import zipfile

import numpy as np


def mlxtend_digits(wheel):
    with zipfile.ZipFile(wheel) as zf:
        raw = gzip.decompress(zf.read("mlxtend/data/data/mnist_5k.csv.gz"))
    table = np.loadtxt(io.BytesIO(raw), delimiter=",", dtype=np.int64)
    images, labels = table[:, :784], table[:, 784]
    assert images.min() >= 0 and images.max() <= 255
    return images.astype(np.uint8), labels.astype(np.uint8)


def npm_digits(tgz):
    images, labels = [], []
    with tarfile.open(tgz) as tf:
        for digit in range(10):
            doc = json.load(tf.extractfile(f"package/src/digits/{digit}.json"))
            values = np.asarray(doc["data"], dtype=np.float64).reshape(-1, 784)
            images.append(np.rint(values * 255.0).astype(np.uint8))
            labels.append(np.full(len(values), digit, dtype=np.uint8))
    return np.concatenate(images), np.concatenate(labels)


def write_idx(path, array, magic):
    with open(path, "wb") as f:
        f.write(struct.pack(">I", magic))
        for extent in array.shape:
            f.write(struct.pack(">I", extent))
        f.write(array.tobytes())


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("wheel")
    ap.add_argument("tgz")
    ap.add_argument("out", type=pathlib.Path)
    args = ap.parse_args()

    train_x, train_y = mlxtend_digits(args.wheel)
    pool_x, pool_y = npm_digits(args.tgz)
    seen = {row.tobytes() for row in train_x}
    keep = np.array([row.tobytes() not in seen for row in pool_x])
    test_x, test_y = pool_x[keep], pool_y[keep]

    args.out.mkdir(parents=True, exist_ok=True)
    write_idx(args.out / "train-images-idx3-ubyte", train_x.reshape(-1, 28, 28), 0x00000803)
    write_idx(args.out / "train-labels-idx1-ubyte", train_y, 0x00000801)
    write_idx(args.out / "t10k-images-idx3-ubyte", test_x.reshape(-1, 28, 28), 0x00000803)
    write_idx(args.out / "t10k-labels-idx1-ubyte", test_y, 0x00000801)
    print(f"train {len(train_y)}  test {len(test_y)}  (pool {len(pool_y)}, overlap {int((~keep).sum())})")


if __name__ == "__main__":
    main()
