"""Regenerates data/toy.libsvm: 200 samples, 10 features, labels drawn from a
noisy logistic model so the classes overlap."""

import sys

import numpy as np


def main(path="data/toy.libsvm"):
    rng = np.random.default_rng(20240611)
    m, d = 200, 10
    a = rng.normal(size=(m, d))
    a[rng.random(size=(m, d)) < 0.3] = 0.0
    a = np.round(a, 6)
    w = rng.normal(size=d)
    p = 1.0 / (1.0 + np.exp(-a @ w))
    y = np.where(rng.random(m) < p, 1, -1)
    with open(path, "w") as f:
        for row, label in zip(a, y):
            feats = " ".join(f"{j + 1}:{v:.6f}" for j, v in enumerate(row) if v != 0.0)
            f.write(f"{label:+d} {feats}".rstrip() + "\n")


if __name__ == "__main__":
    main(*sys.argv[1:])
