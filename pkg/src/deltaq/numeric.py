"""Improper random variables on a uniform time lattice.

A :class:`DeltaQ` stores the probability of completing at each grid time
``k * dt`` for ``k = 0 .. n_bins``, plus two scalar buckets: ``overflow``
(completes, but after the grid horizon) and ``intangible`` (never completes).
Continuous delays are rounded to the nearest grid time when realized, so
sums, maxima and minima are exact on the lattice and the unit atom at
``t = 0`` is an exact identity for convolution.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import _backend
from .expr import Weight, as_fraction

MASS_TOL = 1e-9
FFT_THRESHOLD = 4096


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    dt: float
    n_bins: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"grid dt must be positive, got {self.dt}")
        if int(self.n_bins) != self.n_bins or self.n_bins < 1:
            raise ValueError(f"grid needs at least one bin, got {self.n_bins}")
        object.__setattr__(self, "n_bins", int(self.n_bins))

    @classmethod
    def from_tmax(cls, tmax: float, dt: float | None = None) -> "Grid":
        """Grid covering ``[0, tmax]``; ``dt`` defaults to ``tmax / 1000``."""
        if not tmax > 0:
            raise ValueError(f"tMax must be positive, got {tmax}")
        if dt is None:
            dt = tmax / 1000
        n = int(np.ceil(tmax / dt - 1e-9))
        return cls(float(dt), max(n, 1))

    @property
    def tmax(self) -> float:
        return self.n_bins * self.dt

    @property
    def size(self) -> int:
        return self.n_bins + 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.size) * self.dt

    def index(self, t: float) -> int:
        """Nearest grid index of a time (may exceed ``n_bins``)."""
        return int(np.floor(t / self.dt + 0.5))


class DeltaQ:
    """Immutable lattice IRV. Use the module functions to combine them."""

    __slots__ = ("grid", "mass", "overflow", "intangible")

    def __init__(self, grid: Grid, mass, overflow: float = 0.0, intangible: float = 0.0):
        mass = np.array(mass, dtype=np.float64)
        if mass.shape != (grid.size,):
            raise ValueError(f"mass must have {grid.size} entries, got {mass.shape}")
        if (mass < -MASS_TOL).any() or overflow < -MASS_TOL or intangible < -MASS_TOL:
            raise ValueError("DeltaQ components must be nonnegative")
        np.maximum(mass, 0.0, out=mass)
        total = float(mass.sum()) + overflow + intangible
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"DeltaQ mass must total 1, got {total!r}")
        mass.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "overflow", max(float(overflow), 0.0))
        object.__setattr__(self, "intangible", min(max(float(intangible), 0.0), 1.0))

    def __setattr__(self, name, value):
        raise AttributeError("DeltaQ is immutable")

    def __repr__(self):
        return (f"DeltaQ(dt={self.grid.dt}, n_bins={self.grid.n_bins}, "
                f"in_grid={self.in_grid:.6g}, overflow={self.overflow:.6g}, "
                f"intangible={self.intangible:.6g})")

    @property
    def cdf(self) -> np.ndarray:
        """``cdf[k]`` is the probability of completing by ``k * dt``."""
        return np.cumsum(self.mass)

    @property
    def in_grid(self) -> float:
        return float(self.mass.sum())

    @property
    def tangible(self) -> float:
        return 1.0 - self.intangible

    @property
    def tail(self) -> float:
        """Probability of finishing after the horizon or never."""
        return self.overflow + self.intangible

    def cdf_at(self, t: float) -> float:
        """CDF at an arbitrary time, linear between grid points."""
        if t < 0:
            return 0.0
        x = t / self.grid.dt
        if x > self.grid.n_bins + 1e-9:
            raise ValueError(f"time {t} is beyond the grid horizon {self.grid.tmax}")
        cdf = self.cdf
        k = int(np.floor(x))
        if k >= self.grid.n_bins:
            return float(cdf[-1])
        frac = x - k
        return float(cdf[k] + frac * (cdf[k + 1] - cdf[k]))

    def to_csv(self) -> str:
        """CSV with header ``t,cdf`` and trailing overflow/intangible comments."""
        buf = io.StringIO()
        buf.write("t,cdf\n")
        for t, c in zip(self.grid.times, self.cdf):
            buf.write(f"{float(t)!r},{float(c)!r}\n")
        buf.write(f"# overflow={self.overflow!r}\n")
        buf.write(f"# intangible={self.intangible!r}\n")
        return buf.getvalue()


def _same_grid(a: DeltaQ, b: DeltaQ) -> Grid:
    if a.grid != b.grid:
        raise GridMismatch(f"grid mismatch: {a.grid} vs {b.grid}")
    return a.grid


def perfection(grid: Grid) -> DeltaQ:
    mass = np.zeros(grid.size)
    mass[0] = 1.0
    return DeltaQ(grid, mass)


def failure(grid: Grid) -> DeltaQ:
    return DeltaQ(grid, np.zeros(grid.size), 0.0, 1.0)


def atom(grid: Grid, t: float, tangible: float = 1.0) -> DeltaQ:
    """All tangible mass at the grid time nearest ``t``."""
    mass = np.zeros(grid.size)
    k = grid.index(t)
    overflow = 0.0
    if k <= grid.n_bins:
        mass[k] = tangible
    else:
        overflow = tangible
    return DeltaQ(grid, mass, overflow, 1.0 - tangible)


def _fft_conv(a: np.ndarray, b: np.ndarray, n: int) -> tuple[np.ndarray, float]:
    size = len(a) + len(b) - 1
    nfft = 1 << (size - 1).bit_length()
    full = np.fft.irfft(np.fft.rfft(a, nfft) * np.fft.rfft(b, nfft), nfft)[:size]
    mass = np.maximum(full[: n + 1], 0.0)
    tail_b = np.concatenate((np.cumsum(b[::-1])[::-1], [0.0]))
    idx = np.clip(n - np.arange(len(a)) + 1, 0, len(b))
    return mass, float(np.dot(a, tail_b[idx]))


def convolve(a: DeltaQ, b: DeltaQ, method: str = "auto") -> DeltaQ:
    """Distribution of the sum of two independent delays.

    ``method`` is ``"direct"``, ``"fft"`` or ``"auto"`` (FFT above 4096 bins).
    """
    grid = _same_grid(a, b)
    n = grid.n_bins
    if method == "auto":
        method = "fft" if n > FFT_THRESHOLD else "direct"
    if method == "direct":
        mass, spill = _backend.kernels.conv_truncated(a.mass, b.mass, n)
    elif method == "fft":
        mass, spill = _fft_conv(a.mass, b.mass, n)
    else:
        raise ValueError(f"unknown convolution method {method!r}")
    overflow = a.overflow * b.tangible + a.in_grid * b.overflow + spill
    intangible = a.intangible + b.intangible - a.intangible * b.intangible
    return DeltaQ(grid, mass, overflow, intangible)


def mixture(a: DeltaQ, b: DeltaQ, m: Weight, m_prime: Weight) -> DeltaQ:
    """Convex combination with coefficients ``m/(m+m')`` and ``m'/(m+m')``."""
    grid = _same_grid(a, b)
    m, m_prime = as_fraction(m), as_fraction(m_prime)
    if m < 0 or m_prime < 0 or m + m_prime <= 0:
        raise ValueError("mixture weights must be nonnegative with positive total")
    wa = float(m / (m + m_prime))
    wb = float(m_prime / (m + m_prime))
    return DeltaQ(grid, wa * a.mass + wb * b.mass,
                  wa * a.overflow + wb * b.overflow,
                  wa * a.intangible + wb * b.intangible)


def all_to_finish(a: DeltaQ, b: DeltaQ) -> DeltaQ:
    """Product of CDFs: the later of two independent delays.

    The overflow bucket acts as an atom just past the horizon, so it
    dominates every in-grid time under the maximum.
    """
    grid = _same_grid(a, b)
    mass = _backend.kernels.max_combine(a.mass, b.mass)
    overflow = a.overflow * b.tangible + a.in_grid * b.overflow
    intangible = a.intangible + b.intangible - a.intangible * b.intangible
    return DeltaQ(grid, mass, overflow, intangible)


def any_to_finish(a: DeltaQ, b: DeltaQ) -> DeltaQ:
    """Inclusion-exclusion of CDFs: the earlier of two independent delays."""
    grid = _same_grid(a, b)
    mass = _backend.kernels.min_combine(a.mass, b.mass, a.tail, b.tail)
    overflow = (a.overflow * b.overflow + a.overflow * b.intangible
                + a.intangible * b.overflow)
    return DeltaQ(grid, mass, overflow, a.intangible * b.intangible)


def intangible_mass(a: DeltaQ) -> float:
    return a.intangible


def properise_irv(a: DeltaQ) -> DeltaQ:
    """Rescale the tangible part to total 1, removing the intangible mass."""
    if a.intangible >= 1.0:
        raise ValueError("cannot properise a DeltaQ with no tangible mass")
    scale = 1.0 / (a.in_grid + a.overflow)
    return DeltaQ(a.grid, a.mass * scale, a.overflow * scale, 0.0)


def leq(obs: DeltaQ, req: DeltaQ, tol: float = 1e-9) -> bool:
    """Timeliness order: ``obs`` is everywhere left of and above ``req``."""
    _same_grid(obs, req)
    if obs.intangible > req.intangible + tol:
        return False
    return bool((obs.cdf >= req.cdf - tol).all())


def cdf_distance(a: DeltaQ, b: DeltaQ) -> float:
    """L-infinity distance between CDFs, including the tangible limit."""
    _same_grid(a, b)
    grid_gap = float(np.max(np.abs(a.cdf - b.cdf)))
    return max(grid_gap, abs(a.tangible - b.tangible))
