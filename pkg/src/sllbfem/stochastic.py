"""Seeded scalar Brownian increments with refinement-consistent coarsening.

A path is sampled once at its finest resolution from a counter-based
generator (Philox) keyed by the seed, so the same seed always reproduces the
same increments bit-exactly.  Coarse increments are block sums of fine ones,
computed by repeated pairwise halving whenever the factor is a power of two:
with that summation order, coarsening by 2 and then by 2 again gives exactly
the same floats as coarsening by 4 in one go, which keeps strong-error
comparisons between time resolutions bit-stable.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BrownianPath:
    """Finest-resolution increments of one scalar Wiener realisation."""

    seed: int
    T: float
    n_fine: int
    increments: np.ndarray

    def dump_csv(self, path):
        """Write the increments for audit: columns index, dW."""
        with open(path, "w", newline="") as fh:
            fh.write("index,dW\n")
            for i, w in enumerate(self.increments):
                fh.write("%d,%.17g\n" % (i, w))


def sample_path(seed, T, n_fine) -> BrownianPath:
    """Draw n_fine i.i.d. N(0, T/n_fine) increments keyed by ``seed``."""
    if n_fine < 1:
        raise ValueError("n_fine must be at least 1")
    if T <= 0.0:
        raise ValueError("T must be positive")
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    rng = np.random.Generator(np.random.Philox(key=seed))
    inc = rng.normal(0.0, np.sqrt(T / n_fine), size=n_fine)
    inc.setflags(write=False)
    return BrownianPath(seed=int(seed), T=float(T), n_fine=int(n_fine),
                        increments=inc)


def coarsen(path, factor) -> np.ndarray:
    """Sum fine increments in blocks of ``factor``.

    ``path`` may be a BrownianPath or a plain increments array.  Power-of-two
    factors reduce by repeated pairwise halving; other factors fall back to
    sequential left-to-right block sums.
    """
    inc = path.increments if isinstance(path, BrownianPath) else np.asarray(path)
    n = inc.shape[0]
    factor = int(factor)
    if factor < 1 or n % factor != 0:
        raise ValueError(f"factor {factor} does not divide {n} increments")
    if factor == 1:
        return inc.copy()
    if factor & (factor - 1) == 0:
        out = inc
        f = factor
        while f > 1:
            out = out[0::2] + out[1::2]
            f //= 2
        return out
    starts = np.arange(0, n, factor)
    return np.add.reduceat(inc, starts)
