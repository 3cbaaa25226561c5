#!/usr/bin/env python3
"""Build the bundled MNIST subset (IDX, gzipped) from the `mnist` npm package.

The npm package (https://www.npmjs.com/package/mnist, MIT) ships 10,000 MNIST
digits as JSON arrays of 784 floats in [0, 1] with three decimals. We rescale
to bytes, shuffle with a fixed seed, and write 6000 training and 1000 test
items in the standard IDX layout.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/make_mnist_subset.py package/src/digits data/mnist_subset
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path

N_TRAIN = 6000
N_TEST = 1000
SEED = 20220101


def load(digits_dir):
    items = []
    for label in range(10):
        flat = json.loads((Path(digits_dir) / f"{label}.json").read_text())["data"]
        assert len(flat) % 784 == 0
        for i in range(0, len(flat), 784):
            pixels = bytes(min(255, max(0, round(v * 255))) for v in flat[i:i + 784])
            items.append((pixels, label))
    return items


def write_idx(path, items):
    images = gzip.GzipFile(str(path) + "-images-idx3-ubyte.gz", "wb", mtime=0)
    labels = gzip.GzipFile(str(path) + "-labels-idx1-ubyte.gz", "wb", mtime=0)
    images.write(struct.pack(">IIII", 0x00000803, len(items), 28, 28))
    labels.write(struct.pack(">II", 0x00000801, len(items)))
    for pixels, label in items:
        images.write(pixels)
        labels.write(bytes([label]))
    images.close()
    labels.close()


def main():
    src, out = sys.argv[1], Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    items = load(src)
    random.Random(SEED).shuffle(items)
    write_idx(out / "train", items[:N_TRAIN])
    write_idx(out / "t10k", items[N_TRAIN:N_TRAIN + N_TEST])


if __name__ == "__main__":
    main()
