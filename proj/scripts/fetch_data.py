#!/usr/bin/env python3
"""Materialize MNIST and Fashion-MNIST subsets as IDX files under data/.

Images come from the `mnist` and `fashion-mnist` npm packages, which bundle
the real datasets as JSON. The script installs them with npm if they are not
already available, then writes interleaved, class-balanced train/test splits
in the standard IDX byte format:

    data/mnist/train-images-idx3-ubyte      (+ labels, t10k-* test files)
    data/fashion/train-images-idx3-ubyte    (+ labels, t10k-* test files)

The split is deterministic: per class, the first items go to train, the next
to test, and classes are interleaved 0..9 so any prefix subset stays balanced.
"""

import json
import os
import struct
import subprocess
import sys

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA = os.path.join(ROOT, "data")

# The npm mnist package bundles 10k digits; the smallest class has 863, so
# 700 + 160 keeps every split fully class-balanced.
MNIST_TRAIN_PER_CLASS = 700
MNIST_TEST_PER_CLASS = 160
FASHION_TRAIN_PER_CLASS = 1000
FASHION_TEST_PER_CLASS = 200


def find_node_modules():
    candidates = [
        "/tmp/node_modules",
        os.path.join(ROOT, "node_modules"),
    ]
    for c in candidates:
        if os.path.isdir(os.path.join(c, "mnist")) and os.path.isdir(
            os.path.join(c, "fashion-mnist")
        ):
            return c
    prefix = "/tmp/ar_data_pkgs"
    os.makedirs(prefix, exist_ok=True)
    subprocess.run(
        ["npm", "install", "--prefix", prefix, "--no-save", "mnist", "fashion-mnist"],
        check=True,
    )
    return os.path.join(prefix, "node_modules")


def write_idx_images(path, images, rows=28, cols=28):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), rows, cols))
        for img in images:
            assert len(img) == rows * cols
            f.write(bytes(img))


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def interleave(per_class):
    """Round-robin items across classes so prefixes stay balanced."""
    images, labels = [], []
    longest = max(len(v) for v in per_class.values())
    for i in range(longest):
        for c in sorted(per_class):
            if i < len(per_class[c]):
                images.append(per_class[c][i])
                labels.append(c)
    return images, labels


def emit(name, train_by_class, test_by_class):
    out = os.path.join(DATA, name)
    os.makedirs(out, exist_ok=True)
    for prefix, by_class in (("train", train_by_class), ("t10k", test_by_class)):
        images, labels = interleave(by_class)
        write_idx_images(os.path.join(out, f"{prefix}-images-idx3-ubyte"), images)
        write_idx_labels(os.path.join(out, f"{prefix}-labels-idx1-ubyte"), labels)
        print(f"{name}/{prefix}: {len(images)} items")


def load_mnist(modules):
    train, test = {}, {}
    for c in range(10):
        path = os.path.join(modules, "mnist", "src", "digits", f"{c}.json")
        with open(path) as f:
            flat = json.load(f)["data"]
        # Pixels are stored as byte/255 rounded to 3 decimals; recover bytes.
        imgs = [
            [round(v * 255) for v in flat[i : i + 784]]
            for i in range(0, len(flat), 784)
        ]
        train[c] = imgs[:MNIST_TRAIN_PER_CLASS]
        test[c] = imgs[
            MNIST_TRAIN_PER_CLASS : MNIST_TRAIN_PER_CLASS + MNIST_TEST_PER_CLASS
        ]
    return train, test


def load_fashion(modules):
    train, test = {}, {}
    for c in range(10):
        path = os.path.join(modules, "fashion-mnist", "src", "clothes", f"{c}.json")
        with open(path) as f:
            raw = json.load(f)["data"]  # lists of 0..255 ints, some empty
        imgs = [img for img in raw if len(img) == 784]
        train[c] = imgs[:FASHION_TRAIN_PER_CLASS]
        test[c] = imgs[
            FASHION_TRAIN_PER_CLASS : FASHION_TRAIN_PER_CLASS + FASHION_TEST_PER_CLASS
        ]
    return train, test


def main():
    modules = find_node_modules()
    print(f"using packages from {modules}")
    emit("mnist", *load_mnist(modules))
    emit("fashion", *load_fashion(modules))


if __name__ == "__main__":
    sys.exit(main())
