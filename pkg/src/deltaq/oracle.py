"""Monte Carlo sampler: an operational reading of outcome expressions.

Each trial walks the expression once. Base outcomes fail with probability
``1 - success`` and otherwise draw a delay; sequencing adds delays,
all-to-finish takes the maximum, any-to-finish takes the minimum of the
branches that completed, and a choice picks a branch with its normalized
weight. A failed trial yields the :data:`FAILED` token.

Random numbers come from a counter-based generator (``splitmix64-counter-v1``):
the uniform for trial ``n`` at stream ``s`` is the top 53 bits of
``mix(mix(mix(seed) ^ n) ^ s)``, where ``mix`` is the splitmix64 finalizer.
Every node has a preorder index ``site``; a base outcome uses stream
``2*site`` for its failure draw and ``2*site + 1`` for its delay, and a
choice uses stream ``2*site``. Results therefore do not depend on trial
order, batching or backend.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from . import _pykernels as K
from .expr import (AllToFinish, AnyToFinish, Base, Bottom, OutcomeExpr, ProbChoice, Seq,
                   Top)
from .numeric import DeltaQ
from .semantics import BasicAssignment

RNG_NAME = "splitmix64-counter-v1"
SEED_MASK = (1 << 64) - 1


class _Failed:
    __slots__ = ()

    def __repr__(self):
        return "FAILED"

    def __bool__(self):
        return False


FAILED = _Failed()


@dataclass(frozen=True)
class Program:
    """Postfix form of an expression with per-site leaf parameters."""

    ops: np.ndarray
    args: np.ndarray
    weights: np.ndarray
    leaf_kind: np.ndarray
    leaf_p1: np.ndarray
    leaf_p2: np.ndarray
    leaf_ok: np.ndarray
    leaf_off: np.ndarray
    leaf_len: np.ndarray
    tab_t: np.ndarray
    tab_c: np.ndarray


def _table_for_dq(dq: DeltaQ):
    """Atoms of a lattice DeltaQ as a jump table conditioned on completion."""
    tangible = dq.in_grid + dq.overflow
    times = list(dq.grid.times[dq.mass > 0])
    probs = list(dq.mass[dq.mass > 0])
    if dq.overflow > 0:
        times.append(dq.grid.tmax + dq.grid.dt)
        probs.append(dq.overflow)
    cum = np.cumsum(probs) / tangible
    ts, cs = [], []
    prev = 0.0
    for t, c in zip(times, cum):
        ts += [t, t]
        cs += [prev, c]
        prev = c
    cs[-1] = 1.0
    return ts, cs, tangible


def compile_program(expr: OutcomeExpr, assignment: BasicAssignment) -> Program:
    """Sites are numbered in preorder by position, so repeated subtrees draw
    independently."""
    weights, kind, p1, p2, ok, off, ln = [], [], [], [], [], [], []
    tab_t: list = []
    tab_c: list = []
    ops, args = [], []

    def new_site():
        for arr, default in ((weights, 0.0), (kind, K.KIND_POINT), (p1, 0.0), (p2, 0.0),
                             (ok, 1.0), (off, 0), (ln, 0)):
            arr.append(default)
        return len(weights) - 1

    def leaf(site, node):
        entry = assignment.entry(node.name) if isinstance(node, Base) else None
        if entry is None:
            return
        if isinstance(entry, DeltaQ):
            if entry.tangible <= 0:
                ts, cs, tangible = [0.0], [1.0], 0.0
            else:
                ts, cs, tangible = _table_for_dq(entry)
            kind[site], ok[site] = K.KIND_TABLE, tangible
            off[site], ln[site] = len(tab_t), len(ts)
            tab_t.extend(ts)
            tab_c.extend(cs)
            return
        ok[site] = float(entry.success * entry.completes)
        if entry.kind == "point":
            kind[site], p1[site] = K.KIND_POINT, entry["t"]
        elif entry.kind == "uniform":
            kind[site], p1[site], p2[site] = K.KIND_UNIFORM, entry["lo"], entry["hi"]
        elif entry.kind == "exponential":
            kind[site], p1[site] = K.KIND_EXP, entry["rate"]
        else:
            pts = entry["points"]
            top = float(entry.completes) or 1.0
            kind[site] = K.KIND_TABLE
            off[site], ln[site] = len(tab_t), len(pts)
            tab_t.extend(t for t, _ in pts)
            tab_c.extend(float(c) / top for _, c in pts)

    # iterative traversal: preorder numbering, postorder emission
    stack = [(expr, None)]
    while stack:
        node, site = stack.pop()
        if site is not None:
            ops.append(_OPCODE[type(node)])
            args.append(site)
            continue
        site = new_site()
        if isinstance(node, (Top, Base)):
            leaf(site, node)
            ops.append(K.OP_LEAF)
            args.append(site)
        elif isinstance(node, Bottom):
            ops.append(K.OP_BOT)
            args.append(site)
        else:
            if isinstance(node, ProbChoice):
                weights[site] = float(node.p_left)
            stack.append((node, site))
            stack.append((node.right, None))
            stack.append((node.left, None))
    i64 = np.int64
    return Program(np.array(ops, dtype=i64), np.array(args, dtype=i64),
                   np.array(weights), np.array(kind, dtype=i64), np.array(p1),
                   np.array(p2), np.array(ok), np.array(off, dtype=i64),
                   np.array(ln, dtype=i64), np.array(tab_t, dtype=np.float64),
                   np.array(tab_c, dtype=np.float64))


_OPCODE = {Seq: K.OP_SEQ, AllToFinish: K.OP_ATF, AnyToFinish: K.OP_FTF,
           ProbChoice: K.OP_CHOICE}


def run(program: Program, seed: int, trials: int):
    """``(times, failed)`` arrays for trials ``0 .. trials-1``."""
    return _backend.kernels.run_program(
        program.ops, program.args, program.weights, program.leaf_kind, program.leaf_p1,
        program.leaf_p2, program.leaf_ok, program.leaf_off, program.leaf_len,
        program.tab_t, program.tab_c, seed & SEED_MASK, trials)


def _table_time(ts, cs, u):
    return float(K._leaf_times(K.KIND_TABLE, 0.0, 0.0, np.array([u]),
                               np.asarray(ts, dtype=np.float64),
                               np.asarray(cs, dtype=np.float64))[0])


def sample_once(expr: OutcomeExpr, assignment: BasicAssignment, seed: int, trial: int):
    """One trial by direct recursion; returns a delay or :data:`FAILED`.

    This is the reference reading; :func:`sample` runs the compiled program
    and agrees with it trial by trial.
    """
    seed &= SEED_MASK
    counter = iter(range(1 << 62))

    def u(stream):
        return K.uniform_scalar(seed, trial, stream)

    def go(node):
        site = next(counter)
        if isinstance(node, Bottom):
            return FAILED
        if isinstance(node, (Top, Base)):
            entry = assignment.entry(node.name) if isinstance(node, Base) else None
            fail_u, time_u = u(2 * site), u(2 * site + 1)
            if entry is None:
                return 0.0
            if isinstance(entry, DeltaQ):
                if entry.tangible <= 0:
                    return FAILED
                ts, cs, tangible = _table_for_dq(entry)
                return FAILED if fail_u >= tangible else _table_time(ts, cs, time_u)
            if fail_u >= float(entry.success * entry.completes):
                return FAILED
            if entry.kind == "table":
                top = float(entry.completes)
                pts = entry["points"]
                return _table_time([t for t, _ in pts], [float(c) / top for _, c in pts], time_u)
            return entry.sample_inverse(time_u)
        if isinstance(node, ProbChoice):
            # both branches are drawn so every site consumes its streams
            left, right = go(node.left), go(node.right)
            return left if u(2 * site) < float(node.p_left) else right
        left, right = go(node.left), go(node.right)
        if isinstance(node, Seq):
            return FAILED if left is FAILED or right is FAILED else left + right
        if isinstance(node, AllToFinish):
            return FAILED if left is FAILED or right is FAILED else max(left, right)
        if left is FAILED:
            return right
        if right is FAILED:
            return left
        return min(left, right)

    return go(expr)


@dataclass(frozen=True)
class SampleReport:
    trials: int
    completed: int
    failed: int
    overflow: int
    times: np.ndarray  # sorted completion times
    seed: int
    rng: str = RNG_NAME

    @property
    def failure_fraction(self) -> float:
        return self.failed / self.trials

    def empirical_cdf(self, t) -> np.ndarray:
        """Fraction of all trials completed by time ``t`` (inclusive)."""
        return np.searchsorted(self.times, np.asarray(t, dtype=np.float64),
                               side="right") / self.trials

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t\n")
        for t in self.times:
            buf.write(f"{float(t)!r}\n")
        buf.write(f"# trials={self.trials}\n# failed={self.failed}\n"
                  f"# overflow={self.overflow}\n# seed={self.seed}\n# rng={self.rng}\n")
        return buf.getvalue()


def sample(expr: OutcomeExpr, assignment: BasicAssignment, seed: int = 0,
           trials: int = 100_000) -> SampleReport:
    if trials < 1:
        raise ValueError("trials must be at least 1")
    seed &= SEED_MASK
    times, failed = run(compile_program(expr, assignment), seed, trials)
    failed = np.asarray(failed, dtype=bool)
    done = np.sort(np.asarray(times)[~failed])
    n_failed = int(failed.sum())
    overflow = int(np.count_nonzero(done > assignment.grid.tmax))
    return SampleReport(trials, trials - n_failed, n_failed, overflow, done, seed)


def dkw_epsilon(n: int, alpha: float = 0.01) -> float:
    """Band half-width giving a uniform ``1 - alpha`` confidence for an empirical CDF."""
    return math.sqrt(math.log(2 / alpha) / (2 * n))


@dataclass(frozen=True)
class OracleComparison:
    band_excess: float  # > 0 means the analytic CDF leaves the band
    epsilon: float
    failure_z: float
    agrees: bool


def compare_to_analytic(report: SampleReport, dq: DeltaQ, alpha: float = 0.01,
                        sigmas: float = 4.0) -> OracleComparison:
    """Check an analytic DeltaQ against a sample.

    The lattice rounds every delay to the nearest grid time, so the analytic
    CDF at ``t`` is compared with the empirical CDF shifted by one grid step
    either way, widened by the confidence half-width.
    """
    eps = dkw_epsilon(report.trials, alpha)
    t = dq.grid.times
    dt = dq.grid.dt
    cdf = dq.cdf
    lower = report.empirical_cdf(t - dt) - eps
    upper = report.empirical_cdf(t + dt) + eps
    excess = float(max(np.max(lower - cdf), np.max(cdf - upper), 0.0))
    p = dq.intangible
    sd = math.sqrt(max(p * (1 - p), 0.0) / report.trials)
    gap = abs(report.failure_fraction - p)
    z = 0.0 if gap <= 1e-12 else (math.inf if sd == 0 else gap / sd)
    return OracleComparison(excess, eps, z, excess == 0.0 and z <= sigmas)
