"""Finite-sample size and power studies.

Replicate ``r`` of a study with master seed ``s`` draws X from stream
``derive_seed(s, STREAM_REPLICATE, r, 0)`` and the unshifted Y from
``derive_seed(s, STREAM_REPLICATE, r, 1)``; every (shift, c) cell reuses
these draws, so power curves are computed with common random numbers.
Test calibration inside a replicate uses ``derive_seed(s, STREAM_CALIB, r)``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._rng import STREAM_CALIB, STREAM_REPLICATE, STREAM_SUBSAMPLE, derive_seed, stream
from .fspace import Grid, LpGeometry, Sample
from .meantests import MEAN_TESTS, mean_tests
from .simproc import SHIFT_KINDS, KlSpec, ShiftSpec, gen_values

TEST_IDS = ("WMW",) + MEAN_TESTS
THREADS_ENV = "FUNCWMW_THREADS"


@dataclass(frozen=True)
class TestOptions:
    __test__ = False  # not a pytest class

    p: float = 2.0
    gamma_mode: str = "pooled_rank"
    cumvar_threshold: float = 0.85
    L: int | None = None
    n_mc: int = 100_000
    trunc_tol: float = 1e-10

    def __post_init__(self):
        from .wmw import GAMMA_MODES

        if self.p < 2:
            raise ValueError("p must be >= 2")
        if self.gamma_mode not in GAMMA_MODES:
            raise ValueError(f"gamma_mode must be one of {GAMMA_MODES}")
        if not 0 < self.cumvar_threshold <= 1:
            raise ValueError("cumvar_threshold must lie in (0, 1]")
        if self.L is not None and self.L < 1:
            raise ValueError("L must be >= 1")
        if self.n_mc < 1:
            raise ValueError("n_mc must be >= 1")
        if self.trunc_tol < 0:
            raise ValueError("trunc_tol must be >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    m: int
    n: int
    grid: Grid
    distribution: KlSpec
    shifts: tuple[tuple[str | ShiftSpec, tuple[float, ...]], ...]  # kind or template, c grid
    tests: tuple[str, ...] = TEST_IDS
    replicates: int = 1000
    alpha: float = 0.05
    seed: int = 0
    options: TestOptions = field(default_factory=TestOptions)

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.m < 2 or self.n < 2:
            raise ValueError("m and n must be >= 2")
        for t in self.tests:
            if t not in TEST_IDS:
                raise ValueError(f"unknown test {t!r}")
        for kind, _ in self.shifts:
            if isinstance(kind, str) and kind not in SHIFT_KINDS[:3]:
                raise ValueError(f"shift {kind!r} must be one of {SHIFT_KINDS[:3]} "
                                 "or a ShiftSpec template")


@dataclass(frozen=True)
class PowerRow:
    test: str
    shift: str
    c: float
    rejection_rate: float | None
    mc_stderr: float | None
    replicates: int
    rejections: int | None = None


@dataclass(frozen=True)
class PowerTable:
    rows: tuple[PowerRow, ...]

    def get(self, test: str, shift: str, c: float) -> PowerRow:
        for r in self.rows:
            if r.test == test and r.shift == shift and r.c == c:
                return r
        raise KeyError((test, shift, c))

    def rate(self, test: str, shift: str, c: float) -> float:
        return self.get(test, shift, c).rejection_rate

    def __iter__(self):
        return iter(self.rows)


def make_row(test: str, shift: str, c: float, rejections: int, replicates: int) -> PowerRow:
    r = rejections / replicates
    return PowerRow(test, shift, float(c), r, math.sqrt(r * (1 - r) / replicates),
                    replicates, rejections)


def run_tests(X: Sample, Y: Sample, tests, alpha: float, seed: int,
              options: TestOptions = TestOptions()) -> dict[str, bool]:
    """Rejection decision of each requested test on one dataset."""
    from .wmw import wmw_test

    out = {}
    if "WMW" in tests:
        res = wmw_test(X, Y, LpGeometry(options.p), alpha, options.n_mc, seed,
                       options.gamma_mode, options.trunc_tol)
        out["WMW"] = res.reject
    mt = [t for t in tests if t in MEAN_TESTS]
    if mt:
        res = mean_tests(X, Y, mt, alpha, options.L, options.cumvar_threshold,
                         options.n_mc, seed, options.trunc_tol)
        out.update({k: v.reject for k, v in res.items()})
    return out


def _cells(config: ExperimentConfig) -> list[tuple[str, float, ShiftSpec]]:
    out = []
    for kind, cs in config.shifts:
        tmpl = kind if isinstance(kind, ShiftSpec) else ShiftSpec(kind, 1.0)
        out.extend((tmpl.kind, float(c), ShiftSpec(tmpl.kind, float(c), tmpl.custom_values))
                   for c in cs)
    return out


def _replicate(config: ExperimentConfig, r: int) -> np.ndarray:
    """Rejection indicators of shape (cells, tests) for replicate r."""
    g = config.grid
    X = Sample(g, gen_values(config.distribution, config.m, g,
                             derive_seed(config.seed, STREAM_REPLICATE, r, 0)))
    Y0 = gen_values(config.distribution, config.n, g,
                    derive_seed(config.seed, STREAM_REPLICATE, r, 1))
    calib = derive_seed(config.seed, STREAM_CALIB, r)
    cells = _cells(config)
    out = np.zeros((len(cells), len(config.tests)), dtype=np.int64)
    for ci, (kind, c, spec) in enumerate(cells):
        Y = Sample(g, Y0 + spec.values(g))
        try:
            dec = run_tests(X, Y, config.tests, config.alpha, calib, config.options)
        except Exception as exc:
            raise RuntimeError(f"replicate {r}, shift {kind}, c={c}: {exc}") from exc
        out[ci] = [dec[t] for t in config.tests]
    return out


def _replicate_block(args):
    config, lo, hi = args
    acc = None
    for r in range(lo, hi):
        x = _replicate(config, r)
        acc = x if acc is None else acc + x
    return acc


def _workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_power_study(config: ExperimentConfig, workers: int | None = None) -> PowerTable:
    nw = _workers(workers)
    R = config.replicates
    if nw == 1:
        counts = _replicate_block((config, 0, R))
    else:
        step = math.ceil(R / (4 * nw))
        blocks = [(config, lo, min(R, lo + step)) for lo in range(0, R, step)]
        with ProcessPoolExecutor(nw) as ex:
            counts = sum(ex.map(_replicate_block, blocks))
    rows = []
    for ci, (kind, c, _) in enumerate(_cells(config)):
        for ti, t in enumerate(config.tests):
            rows.append(make_row(t, kind, c, int(counts[ci, ti]), R))
    return PowerTable(tuple(rows))


def run_subsample_study(X: Sample, Y: Sample, fraction: float, repeats: int, tests=TEST_IDS,
                        alpha: float = 0.05, seed: int = 0,
                        options: TestOptions = TestOptions()) -> PowerTable:
    """Proportion of random subsamples (without replacement, per group) on
    which each test rejects. Subsample sizes are ``round(fraction * size)``,
    at least 3. Calibration uses the same seed on every repeat."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    ms = max(3, int(round(fraction * X.size)))
    ns = max(3, int(round(fraction * Y.size)))
    if ms > X.size or ns > Y.size:
        raise ValueError(f"subsample too small: groups of {X.size} and {Y.size} curves "
                         f"cannot give subsamples of size {ms} and {ns}")
    counts = dict.fromkeys(tests, 0)
    for r in range(repeats):
        g = stream(seed, STREAM_SUBSAMPLE, r)
        ix = np.sort(g.choice(X.size, ms, replace=False))
        iy = np.sort(g.choice(Y.size, ns, replace=False))
        dec = run_tests(Sample(X.grid, X.values[ix]), Sample(Y.grid, Y.values[iy]),
                        tests, alpha, seed, options)
        for t in tests:
            counts[t] += int(dec[t])
    label = f"subsample({fraction:g})"
    return PowerTable(tuple(make_row(t, label, fraction, counts[t], repeats) for t in tests))


@dataclass(frozen=True)
class RatioRow:
    test: str
    shift: str
    c: float
    ratio: float | None  # None when the baseline rate is zero
    rate: float
    baseline_rate: float


def power_ratio_table(table: PowerTable, baseline: str = "WMW") -> tuple[RatioRow, ...]:
    base = {(r.shift, r.c): r.rejection_rate for r in table if r.test == baseline}
    if not base:
        raise ValueError(f"baseline test {baseline!r} has no rows")
    out = []
    for r in table:
        b = base.get((r.shift, r.c))
        if b is None:
            raise ValueError(f"baseline {baseline!r} missing for shift {r.shift}, c={r.c}")
        out.append(RatioRow(r.test, r.shift, r.c, r.rejection_rate / b if b > 0 else None,
                            r.rejection_rate, b))
    return tuple(out)
