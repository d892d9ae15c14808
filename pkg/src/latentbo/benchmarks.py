"""Synthetic benchmark objectives and seeded candidate pools.

Three tasks, all posed as maximization over a fixed finite pool:

- ``rastrigin``: the negated Rastrigin function on [-5.12, 5.12]^d (d=2 by
  default), maximum 0 at the origin.
- ``sum_exp``: sum of e^{x_i} with standard-normal pool coordinates; the
  additive structure makes a 1-D latent space natural.
- ``max_area``: count of lit pixels in a binary s x s image; the pool is a
  seeded generator of axis-aligned rectangles and ellipses, matching the
  input format of the shapes task without any external dataset.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ._validation import check_matrix, check_vector


@dataclass
class BenchmarkInstance:
    """A pre-collected pool: inputs, exact labels, and the pool optimum."""

    name: str
    input_dim: int
    x: np.ndarray
    y: np.ndarray
    optimum: float
    seed: int

    def __post_init__(self):
        self.x = check_matrix(self.x, "x", n_cols=self.input_dim)
        self.y = check_vector(self.y, "y", n=self.x.shape[0])
        if self.optimum != float(self.y.max()):
            raise ValueError("pool optimum must equal the max pool label")

    @property
    def size(self) -> int:
        return self.x.shape[0]

    def export_csv(self, path) -> None:
        """One row per candidate: id, feature columns, label."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["id", *(f"x{i}" for i in range(self.input_dim)), "label"]
            )
            for i in range(self.size):
                writer.writerow(
                    [i, *(repr(float(v)) for v in self.x[i]), repr(float(self.y[i]))]
                )


def rastrigin(x) -> float:
    """Negated Rastrigin value: -(10d + sum(x_i^2 - 10 cos(2 pi x_i)))."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    d = x.shape[0]
    f = 10.0 * d + float((x * x - 10.0 * np.cos(2.0 * np.pi * x)).sum())
    return -f


def sum_exp(x) -> float:
    """Sum of coordinate-wise exponentials."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    return float(np.exp(x).sum())


def max_area(img) -> float:
    """Count of ones in a binary image given as a flat 0/1 vector."""
    img = np.asarray(img, dtype=np.float64).reshape(-1)
    if not np.all((img == 0.0) | (img == 1.0)):
        raise ValueError("max_area input must be binary (entries in {0, 1})")
    return float(img.sum())


RASTRIGIN_BOUND = 5.12

_DEFAULT_DIM = {"rastrigin": 2, "sum_exp": 20, "max_area": 64}
#: warm-start labeled subset sizes used by the driver when not configured
DEFAULT_N_INIT = {"rastrigin": 100, "sum_exp": 100, "max_area": 50}


def _rect_or_ellipse(rng: np.random.Generator, side: int) -> np.ndarray:
    img = np.zeros((side, side))
    if rng.integers(2) == 0:
        x0, y0 = rng.integers(0, side - 1, size=2)
        x1 = int(rng.integers(x0 + 1, side + 1))
        y1 = int(rng.integers(y0 + 1, side + 1))
        img[x0:x1, y0:y1] = 1.0
    else:
        cx, cy = rng.uniform(side * 0.15, side * 0.85, size=2)
        a, b = rng.uniform(1.0, side * 0.45, size=2)
        ii, jj = np.indices((side, side))
        img[((ii - cx) / a) ** 2 + ((jj - cy) / b) ** 2 <= 1.0] = 1.0
    return img.reshape(-1)


def make_pool(name: str, n: int, seed: int, dim: int | None = None) -> BenchmarkInstance:
    """Seeded candidate pool for a named benchmark.

    ``dim`` is the input dimension for rastrigin/sum_exp and the image side
    for max_area (input_dim = side^2). Labels are exact objective values.
    """
    if name not in _DEFAULT_DIM:
        raise ValueError(
            f"unknown benchmark {name!r}; known: {sorted(_DEFAULT_DIM)}"
        )
    if n < 2:
        raise ValueError(f"pool size must be >= 2, got {n}")
    d = int(dim) if dim is not None else _DEFAULT_DIM[name]
    if d < 1:
        raise ValueError(f"dim must be >= 1, got {d}")
    rng = np.random.default_rng(seed)
    if name == "rastrigin":
        x = rng.uniform(-RASTRIGIN_BOUND, RASTRIGIN_BOUND, size=(n, d))
        y = np.array([rastrigin(row) for row in x])
        input_dim = d
    elif name == "sum_exp":
        x = rng.standard_normal(size=(n, d))
        y = np.array([sum_exp(row) for row in x])
        input_dim = d
    else:
        x = np.stack([_rect_or_ellipse(rng, d) for _ in range(n)])
        y = np.array([max_area(row) for row in x])
        input_dim = d * d
    return BenchmarkInstance(
        name=name, input_dim=input_dim, x=x, y=y, optimum=float(y.max()), seed=seed
    )


def benchmark_names() -> list[str]:
    return sorted(_DEFAULT_DIM)


def default_dim(name: str) -> int:
    return _DEFAULT_DIM[name]
