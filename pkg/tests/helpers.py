"""Random generators and an independent reference model for the tests."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from deltaq.expr import (BOT, TOP, AllToFinish, AnyToFinish, Base, ProbChoice, Seq)
from deltaq.numeric import DeltaQ, Grid, cdf_distance
from deltaq.semantics import BasicAssignment, DistributionSpec

NAMES = ("a", "b", "c", "d")


def random_dq(rng: np.random.Generator, grid: Grid, *, intangible=None,
              overflow=True) -> DeltaQ:
    """A random lattice IRV with a mix of atoms and smooth pieces."""
    n = grid.size
    mass = np.zeros(n)
    style = rng.integers(3)
    if style == 0:  # a few atoms
        k = rng.integers(1, 5)
        mass[rng.integers(0, n, size=k)] += rng.random(k)
    elif style == 1:  # a bump
        lo = rng.integers(0, n - 1)
        hi = rng.integers(lo + 1, n + 1)
        mass[lo:hi] = rng.random(hi - lo)
    else:  # sparse noise
        mask = rng.random(n) < 0.2
        mass[mask] = rng.random(mask.sum())
        mass[0] += rng.random()
    if mass.sum() == 0:
        mass[0] = 1.0
    ov = rng.random() * 0.2 if overflow and rng.random() < 0.3 else 0.0
    if intangible is None:
        intangible = rng.random() * 0.5 if rng.random() < 0.6 else 0.0
    tangible_in_grid = 1.0 - intangible - ov
    mass *= tangible_in_grid / mass.sum()
    return DeltaQ(grid, mass, ov, 1.0 - mass.sum() - ov)


def nontrivial_dq(rng, grid) -> DeltaQ:
    """A DeltaQ whose CDF is strictly between 0 and 1 somewhere."""
    while True:
        dq = random_dq(rng, grid)
        c = dq.cdf
        if ((c > 1e-3) & (c < 1 - 1e-3)).any():
            return dq


def random_weight(rng) -> tuple[Fraction, Fraction]:
    r = rng.random()
    if r < 0.1:
        return Fraction(int(rng.integers(1, 5))), Fraction(int(rng.integers(1, 5)))
    if r < 0.15:
        return (Fraction(1), Fraction(0)) if rng.random() < 0.5 else (Fraction(0), Fraction(1))
    p = Fraction(int(rng.integers(1, 20)), 20)
    return p, 1 - p


def random_expr(rng, depth: int, names=NAMES, constants: float = 0.15):
    """Random expression of at most ``depth`` levels over ``names``."""
    if depth <= 0 or rng.random() < 0.25:
        r = rng.random()
        if r < constants / 2:
            return TOP
        if r < constants:
            return BOT
        return Base(str(rng.choice(names)))
    left = random_expr(rng, depth - 1, names, constants)
    right = random_expr(rng, depth - 1, names, constants)
    op = rng.integers(4)
    if op == 0:
        return Seq(left, right)
    if op == 1:
        return AllToFinish(left, right)
    if op == 2:
        return AnyToFinish(left, right)
    m, mp = random_weight(rng)
    return ProbChoice(left, right, m, mp)


def random_dq_assignment(rng, grid, names=NAMES) -> BasicAssignment:
    return BasicAssignment(grid, {n: random_dq(rng, grid) for n in names})


def random_spec(rng, tmax: float, dt: float) -> DistributionSpec:
    """Distributions whose lattice rounding stays within one grid step."""
    success = Fraction(int(rng.integers(14, 21)), 20)
    kind = rng.integers(4)
    if kind == 0:
        t = dt * int(rng.integers(0, int(0.15 * tmax / dt)))
        return DistributionSpec.point(t, success)
    if kind == 1:
        lo = round(rng.random() * 0.1 * tmax, 2)
        return DistributionSpec.uniform(lo, lo + 1 + round(rng.random() * 0.1 * tmax, 2), success)
    if kind == 2:
        return DistributionSpec.exponential(0.3 + rng.random(), success)
    t1 = round(rng.random() * 2, 2)
    t2 = t1 + 1 + round(rng.random() * 3, 2)
    c1 = Fraction(int(rng.integers(1, 5)), 10)
    c2 = Fraction(int(rng.integers(6, 11)), 10)
    return DistributionSpec.table([(t1, c1), (t2, c2)], success)


def random_spec_assignment(rng, grid, names=NAMES) -> BasicAssignment:
    return BasicAssignment(grid, {n: random_spec(rng, grid.tmax, grid.dt) for n in names})


def assert_dq_close(a: DeltaQ, b: DeltaQ, tol=1e-9, im_tol=1e-12):
    gap = cdf_distance(a, b)
    assert gap <= tol, f"CDF gap {gap}"
    assert abs(a.intangible - b.intangible) <= im_tol, \
        f"intangible {a.intangible} vs {b.intangible}"
    assert abs(a.overflow - b.overflow) <= tol


# --------------------------------------------------------------------------
# Reference model: a DeltaQ as an explicit list of (outcome, probability)
# --------------------------------------------------------------------------

NEVER = None


def outcomes(dq: DeltaQ):
    """Outcomes are grid indices, ``inf`` for overflow and ``None`` for never."""
    out = [(k, float(m)) for k, m in enumerate(dq.mass) if m > 0]
    if dq.overflow > 0:
        out.append((math.inf, dq.overflow))
    if dq.intangible > 0:
        out.append((NEVER, dq.intangible))
    return out


def from_outcomes(grid: Grid, pairs) -> DeltaQ:
    mass = np.zeros(grid.size)
    ov = im = 0.0
    for k, p in pairs:
        if k is NEVER:
            im += p
        elif k > grid.n_bins:
            ov += p
        else:
            mass[k] += p
    return DeltaQ(grid, mass, ov, im)


def reference_binary(a: DeltaQ, b: DeltaQ, combine) -> DeltaQ:
    pairs = []
    for ka, pa in outcomes(a):
        for kb, pb in outcomes(b):
            pairs.append((combine(ka, kb), pa * pb))
    return from_outcomes(a.grid, pairs)


def ref_sum(x, y):
    return NEVER if x is NEVER or y is NEVER else x + y


def ref_max(x, y):
    return NEVER if x is NEVER or y is NEVER else max(x, y)


def ref_min(x, y):
    if x is NEVER:
        return y
    if y is NEVER:
        return x
    return min(x, y)


# --------------------------------------------------------------------------
# Rule instances
# --------------------------------------------------------------------------


def rule_instance(rng, rule, direction="ltr", depth=2, names=NAMES):
    """A random expression matching one side of ``rule``, with its rewrite.

    Returns ``(before, after)``; degenerate weight draws are retried.
    """
    from deltaq.rewrite import RuleMismatch, instantiate, pattern_vars, pattern_weights

    src = rule.lhs if direction == "ltr" else rule.rhs
    for _ in range(1000):
        exprs = {v: random_expr(rng, depth, names) for v in sorted(pattern_vars(src))}
        weights = {w: random_weight(rng) for w in sorted(pattern_weights(src))}
        before = instantiate(src, exprs, weights)
        try:
            after, _ = rule.apply(before, direction)
        except RuleMismatch:
            continue
        return before, after
    raise AssertionError(f"no instance for {rule.id}")


def compound_expr(rng, depth: int, min_size: int = 7, names=NAMES):
    """Like :func:`random_expr` but rejects small draws."""
    from deltaq.expr import size

    while True:
        e = random_expr(rng, depth, names)
        if size(e) >= min_size:
            return e
