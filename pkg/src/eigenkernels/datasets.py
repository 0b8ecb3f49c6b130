"""Toy dataset generators for experiments and the CLI."""

import numpy as np

from .errors import InvalidInputError
from .kernels import Dataset

GENERATORS = ("uniform", "two_moons", "circles")
DEFAULT_NOISE = 0.05


def _split(n: int):
    return n // 2, n - n // 2


def two_moons(n: int, noise: float, rng: np.random.Generator) -> Dataset:
    """Two interleaved half-circle arcs of radius 1 plus Gaussian noise.

    The second arc is the first one reflected and shifted by (1, -0.5),
    the usual construction; with noise 0 the points sit exactly on the arcs.
    """
    n0, n1 = _split(n)
    t0 = np.linspace(0.0, np.pi, n0)
    t1 = np.linspace(0.0, np.pi, n1)
    upper = np.stack([np.cos(t0), np.sin(t0)], axis=1)
    lower = np.stack([1.0 - np.cos(t1), 1.0 - np.sin(t1) - 0.5], axis=1)
    pts = np.concatenate([upper, lower], axis=0)
    if noise > 0.0:
        pts = pts + rng.normal(0.0, noise, size=pts.shape)
    labels = np.concatenate([np.zeros(n0, dtype=int), np.ones(n1, dtype=int)])
    return Dataset(pts, labels)


def circles(n: int, noise: float, rng: np.random.Generator,
            factor: float = 0.5) -> Dataset:
    """Two concentric circles, outer radius 1 and inner radius `factor`."""
    if not 0.0 < factor < 1.0:
        raise InvalidInputError("factor must lie in (0, 1)")
    n0, n1 = _split(n)
    t0 = np.linspace(0.0, 2.0 * np.pi, n0, endpoint=False)
    t1 = np.linspace(0.0, 2.0 * np.pi, n1, endpoint=False)
    outer = np.stack([np.cos(t0), np.sin(t0)], axis=1)
    inner = factor * np.stack([np.cos(t1), np.sin(t1)], axis=1)
    pts = np.concatenate([outer, inner], axis=0)
    if noise > 0.0:
        pts = pts + rng.normal(0.0, noise, size=pts.shape)
    labels = np.concatenate([np.zeros(n0, dtype=int), np.ones(n1, dtype=int)])
    return Dataset(pts, labels)


def uniform(n: int, bounds, rng: np.random.Generator, dim: int = 1) -> Dataset:
    """n points drawn uniformly from the box bounds^dim; unlabeled."""
    lo, hi = float(bounds[0]), float(bounds[1])
    if not lo < hi:
        raise InvalidInputError(f"bounds must satisfy lo < hi, got {bounds!r}")
    if dim < 1:
        raise InvalidInputError("dim must be >= 1")
    return Dataset(rng.uniform(lo, hi, size=(n, dim)))


def generate_dataset(kind: str, n: int, rng: np.random.Generator,
                     noise: float = DEFAULT_NOISE, bounds=(-1.0, 1.0),
                     dim: int = 1) -> Dataset:
    """Dispatch to one of the named generators."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    if noise < 0.0:
        raise InvalidInputError("noise must be nonnegative")
    if kind == "uniform":
        return uniform(n, bounds, rng, dim=dim)
    if kind == "two_moons":
        return two_moons(n, noise, rng)
    if kind == "circles":
        return circles(n, noise, rng)
    raise InvalidInputError(f"unknown dataset kind {kind!r}, expected one of {GENERATORS}")
