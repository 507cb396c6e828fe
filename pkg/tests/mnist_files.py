"""Locate local MNIST IDX files; tests that need them skip when absent."""

import os
from pathlib import Path

NAMES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def find_mnist():
    candidates = [os.environ.get("ISGD_MNIST_DIR"), "data/mnist", "~/.cache/mnist"]
    for c in candidates:
        if not c:
            continue
        root = Path(c).expanduser()
        found = {}
        for key, name in NAMES.items():
            for suffix in ("", ".gz"):
                p = root / (name + suffix)
                if p.exists():
                    found[key] = p
                    break
        if len(found) == len(NAMES):
            return found
    return None
