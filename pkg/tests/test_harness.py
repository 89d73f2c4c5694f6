import math

import numpy as np
import pytest

from funcwmw import Sample, ShiftSpec, sbm, unit_grid
from funcwmw.harness import (
    ExperimentConfig,
    PowerRow,
    PowerTable,
    TestOptions,
    make_row,
    power_ratio_table,
    run_power_study,
    run_subsample_study,
    run_tests,
)
from funcwmw.simproc import gen_values

FAST = TestOptions(n_mc=2000)


def config(**kw):
    base = dict(m=6, n=6, grid=unit_grid(12), distribution=sbm(50),
                shifts=(("delta1", (0.0, 1.5)),), replicates=8, seed=11, options=FAST)
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(p=1.5), dict(gamma_mode="x"), dict(cumvar_threshold=0),
                                    dict(L=0), dict(n_mc=0)])
    def test_invalid_options(self, kw):
        with pytest.raises(ValueError):
            TestOptions(**kw)

    @pytest.mark.parametrize("kw", [dict(replicates=0), dict(alpha=0.0), dict(alpha=1.0),
                                    dict(m=1), dict(tests=("WMW", "KS")),
                                    dict(shifts=(("custom", (1.0,)),))])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            config(**kw)


class TestPowerStudy:
    def test_deterministic(self):
        assert run_power_study(config()) == run_power_study(config())

    def test_table_shape_and_stderr(self):
        t = run_power_study(config())
        assert len(t.rows) == 2 * 4
        for r in t:
            assert 0 <= r.rejection_rate <= 1
            assert r.mc_stderr == pytest.approx(math.sqrt(r.rejection_rate
                                                          * (1 - r.rejection_rate) / 8))
            assert r.rejections == round(r.rejection_rate * 8)

    def test_single_replicate(self):
        t = run_power_study(config(replicates=1))
        assert {r.rejection_rate for r in t} <= {0.0, 1.0}

    def test_large_shift_detected(self):
        t = run_power_study(config(shifts=(("delta1", (5.0,)),), tests=("WMW", "CFF")))
        assert t.rate("WMW", "delta1", 5.0) == 1.0
        assert t.rate("CFF", "delta1", 5.0) == 1.0

    def test_workers_agree(self):
        cfg = config(replicates=6, tests=("WMW",))
        assert run_power_study(cfg, workers=2) == run_power_study(cfg, workers=1)

    def test_cells_share_draws(self):
        # the c=0 cell of a two-cell study equals a study with that cell alone
        both = run_power_study(config())
        alone = run_power_study(config(shifts=(("delta1", (0.0,)),)))
        for r in alone:
            assert both.get(r.test, "delta1", 0.0) == r

    def test_custom_shift_template(self):
        g = unit_grid(12)
        tmpl = ShiftSpec("custom", 1.0, tuple(np.ones(12)))
        a = run_power_study(config(shifts=((tmpl, (0.0, 1.5)),)))
        b = run_power_study(config())
        assert [r.rejections for r in a] == [r.rejections for r in b]
        assert {r.shift for r in a} == {"custom"}

    def test_get_missing(self):
        with pytest.raises(KeyError):
            run_power_study(config(replicates=1)).get("WMW", "delta2", 0.0)

    def test_error_context(self):
        cfg = config(options=TestOptions(n_mc=2000, L=40), tests=("HKR1",))
        with pytest.raises(RuntimeError, match="replicate 0"):
            run_power_study(cfg)


class TestRunTests:
    def test_decisions(self, rng):
        g = unit_grid(10)
        X = Sample(g, rng.normal(size=(8, 10)))
        Y = Sample(g, rng.normal(size=(8, 10)) + 3)
        dec = run_tests(X, Y, ("WMW", "CFF", "HKR1", "HKR2"), 0.05, 0, FAST)
        assert dec == {"WMW": True, "CFF": True, "HKR1": True, "HKR2": True}


class TestSubsample:
    def data(self, shift=0.0):
        g = unit_grid(15)
        return (Sample(g, gen_values(sbm(50), 12, g, 1)),
                Sample(g, gen_values(sbm(50), 10, g, 2) + shift))

    def test_full_fraction_matches_full_data(self):
        X, Y = self.data(0.6)
        full = run_tests(X, Y, ("WMW", "CFF"), 0.05, 9, FAST)
        t = run_subsample_study(X, Y, 1.0, 3, ("WMW", "CFF"), 0.05, 9, FAST)
        for test, rej in full.items():
            assert t.rate(test, "subsample(1)", 1.0) == float(rej)

    def test_deterministic(self):
        X, Y = self.data()
        a = run_subsample_study(X, Y, 0.5, 4, ("WMW",), seed=3, options=FAST)
        assert a == run_subsample_study(X, Y, 0.5, 4, ("WMW",), seed=3, options=FAST)

    @pytest.mark.parametrize("fraction,repeats", [(0.0, 1), (1.5, 1), (0.5, 0)])
    def test_invalid(self, fraction, repeats):
        X, Y = self.data()
        with pytest.raises(ValueError):
            run_subsample_study(X, Y, fraction, repeats)

    def test_too_small(self):
        g = unit_grid(5)
        X = Sample(g, np.zeros((2, 5)))
        with pytest.raises(ValueError, match="too small"):
            run_subsample_study(X, X, 0.5, 1)


class TestRatios:
    def table(self):
        return PowerTable((make_row("WMW", "delta1", 0.0, 5, 100),
                           make_row("CFF", "delta1", 0.0, 6, 100),
                           make_row("WMW", "delta1", 1.0, 0, 100),
                           make_row("CFF", "delta1", 1.0, 3, 100)))

    def test_self_ratio(self):
        for r in power_ratio_table(self.table()):
            if r.test == "WMW" and r.ratio is not None:
                assert r.ratio == 1.0

    def test_values(self):
        rows = {(r.test, r.c): r for r in power_ratio_table(self.table())}
        assert rows[("CFF", 0.0)].ratio == pytest.approx(1.2)
        assert rows[("CFF", 1.0)].ratio is None
        assert rows[("CFF", 1.0)].baseline_rate == 0.0

    def test_missing_baseline(self):
        with pytest.raises(ValueError, match="baseline"):
            power_ratio_table(self.table(), "HKR1")
        partial = PowerTable(self.table().rows + (PowerRow("CFF", "delta2", 0.0, 0.1, 0.03, 100),))
        with pytest.raises(ValueError, match="missing"):
            power_ratio_table(partial)
