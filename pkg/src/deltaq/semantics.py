"""Evaluation of outcome expressions to lattice DeltaQs.

A :class:`BasicAssignment` maps base-outcome names to a
:class:`DistributionSpec`, a ready-made :class:`DeltaQ`, or ``None``
(unassigned). Unassigned names and names missing from the map evaluate to
perfection; ``top`` and ``bot`` are fixed to perfection and failure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Union

import numpy as np

from .expr import (AllToFinish, AnyToFinish, Base, Bottom, OutcomeExpr, ProbChoice,
                   Seq, Top, Weight, as_fraction)
from .numeric import (DeltaQ, Grid, all_to_finish, any_to_finish, convolve, failure,
                      mixture, perfection, properise_irv)

KINDS = ("point", "uniform", "exponential", "table")


class SpecError(ValueError):
    pass


def _num(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, Decimal, Fraction, str)):
        raise SpecError(f"{what} must be a number, got {value!r}")
    x = float(value)
    if not math.isfinite(x):
        raise SpecError(f"{what} must be finite, got {value!r}")
    return x


@dataclass(frozen=True)
class DistributionSpec:
    """A delay distribution with a tangible fraction ``success``.

    ``params`` holds ``t`` for points, ``lo``/``hi`` for uniforms, ``rate`` for
    exponentials, and ``points`` (a tuple of ``(t, cumulative)`` pairs) for
    tables. A table's CDF is 0 before its first point, jumps to the first
    cumulative value there, is linear between points (a repeated time is a
    jump) and flat after the last one. A final cumulative value below 1 adds
    to the intangible mass.
    """

    kind: str
    params: tuple
    success: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "success", as_fraction(self.success))
        if not 0 <= self.success <= 1:
            raise SpecError(f"success must be in [0, 1], got {self.success}")
        p = dict(self.params)
        if self.kind == "point":
            if not p["t"] >= 0:
                raise SpecError("point time must be nonnegative")
        elif self.kind == "uniform":
            if not 0 <= p["lo"] <= p["hi"]:
                raise SpecError("uniform needs 0 <= lo <= hi")
        elif self.kind == "exponential":
            if not p["rate"] > 0:
                raise SpecError("exponential rate must be positive")
        elif self.kind == "table":
            pts = p["points"]
            if not pts:
                raise SpecError("table must have at least one point")
            prev_t, prev_c = 0.0, Fraction(0)
            for t, c in pts:
                if t < prev_t or c < prev_c:
                    raise SpecError("table must be nondecreasing in time and probability")
                if c > 1:
                    raise SpecError("table cumulative probability exceeds 1")
                prev_t, prev_c = t, c
        else:
            raise SpecError(f"unknown distribution kind {self.kind!r}")

    # constructors -----------------------------------------------------

    @classmethod
    def point(cls, t: float, success: Weight = 1) -> "DistributionSpec":
        return cls("point", (("t", float(t)),), success)

    @classmethod
    def uniform(cls, lo: float, hi: float, success: Weight = 1) -> "DistributionSpec":
        return cls("uniform", (("lo", float(lo)), ("hi", float(hi))), success)

    @classmethod
    def exponential(cls, rate: float, success: Weight = 1) -> "DistributionSpec":
        return cls("exponential", (("rate", float(rate)),), success)

    @classmethod
    def table(cls, points, success: Weight = 1) -> "DistributionSpec":
        pts = tuple((float(t), as_fraction(c)) for t, c in points)
        return cls("table", (("points", pts),), success)

    @classmethod
    def from_json(cls, data: Mapping) -> "DistributionSpec":
        if not isinstance(data, Mapping) or "kind" not in data:
            raise SpecError(f"distribution needs a 'kind', got {data!r}")
        kind = data["kind"]
        success = data.get("success", 1)
        if isinstance(success, bool) or not isinstance(success, (int, float, Decimal, str)):
            raise SpecError(f"success must be a number, got {success!r}")
        try:
            if kind == "point":
                return cls.point(_num(data["t"], "t"), success)
            if kind == "uniform":
                return cls.uniform(_num(data["lo"], "lo"), _num(data["hi"], "hi"), success)
            if kind == "exponential":
                return cls.exponential(_num(data["rate"], "rate"), success)
            if kind == "table":
                pts = []
                for row in data["points"]:
                    if isinstance(row, Mapping):
                        t, c = row["t"], row["p"]
                    else:
                        t, c = row
                    pts.append((_num(t, "table time"), as_fraction(c)))
                return cls.table(pts, success)
        except KeyError as exc:
            raise SpecError(f"{kind} distribution is missing field {exc.args[0]!r}") from None
        raise SpecError(f"unknown distribution kind {kind!r}")

    # queries ----------------------------------------------------------

    def __getitem__(self, key):
        return dict(self.params)[key]

    @property
    def completes(self) -> Fraction:
        """Probability that the underlying delay distribution terminates."""
        if self.kind == "table":
            return self["points"][-1][1]
        return Fraction(1)

    @property
    def failure(self) -> Fraction:
        """Exact intangible mass."""
        return 1 - self.success * self.completes

    def proper(self) -> "DistributionSpec":
        """Same delay shape conditioned on completion (intangible mass 0)."""
        if self.failure == 1:
            raise SpecError("cannot properise a distribution that never completes")
        if self.kind == "table":
            top = self.completes
            return DistributionSpec.table([(t, c / top) for t, c in self["points"]])
        return DistributionSpec(self.kind, self.params, 1)

    def delay_cdf_left(self, x: np.ndarray) -> np.ndarray:
        """``P(T < x)`` for the delay alone (not scaled by ``success``)."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "point":
            return (self["t"] < x).astype(np.float64)
        if self.kind == "uniform":
            lo, hi = self["lo"], self["hi"]
            if hi == lo:
                return (lo < x).astype(np.float64)
            return np.clip((x - lo) / (hi - lo), 0.0, 1.0)
        if self.kind == "exponential":
            return np.where(x > 0, -np.expm1(-self["rate"] * np.maximum(x, 0.0)), 0.0)
        ts = np.array([t for t, _ in self["points"]])
        cs = np.array([float(c) for _, c in self["points"]])
        # left limit: at a jump time the lower value applies
        i = np.searchsorted(ts, x, side="left")
        out = np.empty_like(x)
        before = i == 0
        after = i >= len(ts)
        mid = ~(before | after)
        out[before] = 0.0
        out[after] = cs[-1]
        if mid.any():
            j = i[mid]
            t0, t1 = ts[j - 1], ts[j]
            c0 = cs[j - 1]
            # c at t1 approached from the left: the first entry at t1
            c1 = cs[np.searchsorted(ts, t1, side="left")]
            out[mid] = c0 + (x[mid] - t0) / (t1 - t0) * (c1 - c0)
        return out

    def sample_inverse(self, u: float) -> float:
        """Delay for a uniform draw ``u``, conditioned on completion."""
        if self.kind == "point":
            return self["t"]
        if self.kind == "uniform":
            return self["lo"] + u * (self["hi"] - self["lo"])
        if self.kind == "exponential":
            return -math.log1p(-u) / self["rate"]
        raise NotImplementedError("table sampling lives in the oracle")


def realize(spec: Union[DistributionSpec, DeltaQ, None], grid: Grid) -> DeltaQ:
    """Discretize a distribution on the lattice by nearest-point rounding.

    Grid point ``k`` collects the delay mass in ``[(k - 1/2) dt, (k + 1/2) dt)``;
    anything at or after ``(n_bins + 1/2) dt`` is overflow.
    """
    if spec is None:
        return perfection(grid)
    if isinstance(spec, DeltaQ):
        if spec.grid != grid:
            raise SpecError(f"DeltaQ entry is on {spec.grid}, assignment uses {grid}")
        return spec
    if spec.success == 0 or spec.completes == 0:
        return failure(grid)
    edges = (np.arange(grid.size) + 0.5) * grid.dt
    cdf = spec.delay_cdf_left(edges)
    scale = float(spec.success)
    mass = np.diff(np.concatenate(([0.0], cdf))) * scale
    overflow = (float(spec.completes) - cdf[-1]) * scale
    return DeltaQ(grid, mass, max(overflow, 0.0), float(spec.failure))


Entry = Union[DistributionSpec, DeltaQ, None]


@dataclass
class BasicAssignment:
    grid: Grid
    entries: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        for name, entry in self.entries.items():
            if name in ("top", "bot"):
                raise SpecError("top and bot cannot be assigned")
            if entry is not None and not isinstance(entry, (DistributionSpec, DeltaQ)):
                raise SpecError(f"entry for {name!r} is not a distribution: {entry!r}")

    @classmethod
    def from_json(cls, data: Mapping, dt: float | None = None,
                  tmax: float | None = None) -> "BasicAssignment":
        grid_data = data.get("grid", {}) if isinstance(data, Mapping) else None
        if not isinstance(grid_data, Mapping):
            raise SpecError("assignment must be an object with a 'grid' object")
        file_tmax = grid_data.get("tMax")
        file_dt = grid_data.get("dt")
        tmax = tmax if tmax is not None else (float(file_tmax) if file_tmax is not None else None)
        dt = dt if dt is not None else (float(file_dt) if file_dt is not None else None)
        if tmax is None:
            if dt is None or "nBins" not in grid_data:
                raise SpecError("grid needs tMax (or dt and nBins)")
            grid = Grid(dt, int(grid_data["nBins"]))
        else:
            grid = Grid.from_tmax(tmax, dt)
        outcomes = data.get("outcomes", {})
        if not isinstance(outcomes, Mapping):
            raise SpecError("'outcomes' must be an object")
        entries = {}
        for name, spec in outcomes.items():
            entries[name] = None if spec is None else DistributionSpec.from_json(spec)
        return cls(grid, entries)

    @classmethod
    def load(cls, path, dt: float | None = None, tmax: float | None = None) -> "BasicAssignment":
        # Decimal keeps 0.9999999999999999 as written
        with open(Path(path), encoding="utf-8") as fh:
            data = json.load(fh, parse_float=Decimal)
        return cls.from_json(data, dt=dt, tmax=tmax)

    def names(self) -> list[str]:
        return list(self.entries)

    def is_assigned(self, name: str) -> bool:
        return self.entries.get(name) is not None

    def entry(self, name: str) -> Entry:
        return self.entries.get(name)

    def failure_of(self, name: str) -> Fraction:
        """Exact intangible mass of a name (0 when unassigned)."""
        entry = self.entries.get(name)
        if entry is None:
            return Fraction(0)
        if isinstance(entry, DeltaQ):
            return as_fraction(entry.intangible)
        return entry.failure

    def proper_entry(self, name: str) -> Entry:
        entry = self.entries.get(name)
        if entry is None:
            raise SpecError(f"{name!r} is unassigned")
        if isinstance(entry, DeltaQ):
            return properise_irv(entry)
        return entry.proper()

    def with_entries(self, **changes: Entry) -> "BasicAssignment":
        entries = dict(self.entries)
        entries.update(changes)
        return BasicAssignment(self.grid, entries)

    def realize(self, name: str) -> DeltaQ:
        dq = self._cache.get(name)
        if dq is None:
            dq = realize(self.entries.get(name), self.grid)
            self._cache[name] = dq
        return dq


def evaluate(expr: OutcomeExpr, assignment: BasicAssignment,
             memo: dict | None = None) -> DeltaQ:
    """Compositional semantics, memoized on structurally equal subtrees."""
    if memo is None:
        memo = {}
    return _eval(expr, assignment, memo)


def _eval(expr, assignment, memo):
    hit = memo.get(expr)
    if hit is not None:
        return hit
    grid = assignment.grid
    if isinstance(expr, Top):
        out = perfection(grid)
    elif isinstance(expr, Bottom):
        out = failure(grid)
    elif isinstance(expr, Base):
        out = assignment.realize(expr.name)
    else:
        left = _eval(expr.left, assignment, memo)
        right = _eval(expr.right, assignment, memo)
        if isinstance(expr, Seq):
            out = convolve(left, right)
        elif isinstance(expr, AllToFinish):
            out = all_to_finish(left, right)
        elif isinstance(expr, AnyToFinish):
            out = any_to_finish(left, right)
        elif isinstance(expr, ProbChoice):
            out = mixture(left, right, expr.w_left, expr.w_right)
        else:
            raise TypeError(f"not an outcome expression: {expr!r}")
    memo[expr] = out
    return out
