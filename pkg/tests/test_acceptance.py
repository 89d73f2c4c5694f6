"""End-to-end acceptance checks.

Each test prints one ``[PASS]``/``[FAIL]`` line and then asserts. The whole
module takes roughly ten minutes on one core. Every randomized check uses
seed 1; shift sizes were fixed from pilot runs on other seeds.

The real-data check runs only when the curve files are supplied through
environment variables (``FUNCWMW_COFFEE_X``/``_Y``, ``FUNCWMW_GROWTH_X``/``_Y``,
``FUNCWMW_SPECTRO_X``/``_Y``; set ``FUNCWMW_GRID_HEADER=1`` when the first row
of each file holds grid coordinates).
"""

import json
import os

import numpy as np
import pytest
from scipy import stats

from funcwmw import (
    Curve,
    LpGeometry,
    Sample,
    dual_norm,
    lp_norm,
    pair,
    sbm,
    sgn,
    t_cff,
    t_hkr,
    t_process,
    t_wmw,
    unit_grid,
    wmw_test,
)
from funcwmw._rng import STREAM_REPLICATE, derive_seed
from funcwmw.asympt import (
    DistributionSpec,
    asymptotic_power_curves,
    gamma1_spectrum,
    j0_apply,
    j0_finite_difference,
)
from funcwmw.cli import main
from funcwmw.harness import ExperimentConfig, TestOptions, run_power_study, run_subsample_study
from funcwmw.meantests import mean_tests, pooled_spectrum
from funcwmw.simproc import gen_values
from funcwmw.spectral import gaussian_norm_draws

pytestmark = pytest.mark.acceptance

SEED = 1
ALL = ("WMW", "CFF", "HKR1", "HKR2")
STUDY_GRID = unit_grid(250)


def study(dist, shifts, tests=ALL, m=15, n=15, replicates=1000):
    cfg = ExperimentConfig(m, n, STUDY_GRID, dist, shifts, tests, replicates, 0.05, SEED,
                           TestOptions())
    return run_power_study(cfg)


def fmt(d):
    return ", ".join(f"{k}={v:.3f}" for k, v in d.items())


def test_geometry_identities(verdict):
    rng = np.random.default_rng(SEED)
    worst_dual = worst_pair = 0.0
    ratios = []
    for p in (2, 3, 4):
        geom = LpGeometry(p)
        for i in range(1000):
            g = unit_grid(int(rng.integers(1, 60)), ("euclidean", "trapezoid")[i % 2])
            x = Curve(g, rng.standard_t(3, g.d) * rng.uniform(0.01, 100))
            s = sgn(x, geom)
            worst_dual = max(worst_dual, abs(dual_norm(s, geom) - 1))
            worst_pair = max(worst_pair, abs(pair(s, x) - lp_norm(x, geom)) / lp_norm(x, geom))
        for _ in range(50):
            g = unit_grid(20)
            x, h = Curve(g, rng.normal(size=20)), Curve(g, rng.normal(size=20))
            deriv = pair(sgn(x, geom), h)
            errs = [abs((lp_norm(x + t * h, geom) - lp_norm(x, geom)) / t - deriv)
                    for t in (1e-2, 1e-3, 1e-4)]
            ratios += [errs[0] / errs[1], errs[1] / errs[2]]
    ratios = np.array(ratios)
    ok = worst_dual < 1e-10 and worst_pair < 1e-10 and bool(np.all((ratios > 5) & (ratios < 20)))
    verdict(1, "geometry identities", ok,
            f"max|dual-1|={worst_dual:.1e}, max rel|pair-norm|={worst_pair:.1e}, "
            f"error ratio per decade of t in [{ratios.min():.2f}, {ratios.max():.2f}]")
    assert ok


def test_exact_reductions(verdict):
    rng = np.random.default_rng(SEED)
    worst1 = worst2 = 0.0
    for i in range(200):
        d = int(rng.integers(2, 7))
        m, n = int(rng.integers(d + 2, 12)), int(rng.integers(d + 2, 12))
        g = unit_grid(d, ("euclidean", "trapezoid")[i % 2])
        X = Sample(g, rng.normal(size=(m, d)) @ rng.normal(size=(d, d)))
        Y = Sample(g, rng.normal(size=(n, d)) + rng.normal(size=d))
        h1, h2 = t_hkr(X, Y, d, pooled_spectrum(X, Y, 0.0))
        v = X.values.mean(axis=0) - Y.values.mean(axis=0)
        S = ((m - 1) * np.cov(X.values.T) + (n - 1) * np.cov(Y.values.T)) / (m + n - 2)
        hotelling = float(v @ np.linalg.solve(np.atleast_2d(S), v))
        worst1 = max(worst1, abs(h1 - t_cff(X, Y) / m) / h1)
        worst2 = max(worst2, abs(h2 - hotelling) / hotelling)
    ok = worst1 < 1e-8 and worst2 < 1e-8
    verdict(2, "HKR1 = CFF/m and HKR2 = Hotelling at L = d", ok,
            f"max rel err {worst1:.1e} and {worst2:.1e} over 200 instances")
    assert ok


def test_null_size_sbm(verdict):
    t = study(sbm(), (("delta1", (0.0,)),))
    sizes = {k: t.rate(k, "delta1", 0.0) for k in ALL}
    ok = all(0.035 <= s <= 0.065 for s in sizes.values())
    verdict(3, "null size under sBm in [0.035, 0.065]", ok, fmt(sizes))
    assert ok


def test_null_size_cauchy(verdict):
    t = study(t_process(1), (("delta1", (0.0,)),))
    sizes = {k: t.rate(k, "delta1", 0.0) for k in ALL}
    ok = 0.030 <= sizes["WMW"] <= 0.060 and all(sizes[k] <= 0.030 for k in ALL[1:])
    verdict(4, "null size under t(1): WMW in [0.030, 0.060], mean tests <= 0.030", ok,
            fmt(sizes))
    assert ok


def test_power_ordering(verdict):
    cells = (("delta1", 0.45), ("delta2", 1.0), ("delta3", 2.5))
    t5 = study(t_process(5), tuple((k, (c,)) for k, c in cells), ("WMW", "CFF", "HKR1"))
    details, ok = [], True
    for kind, c in cells:
        w = t5.get("WMW", kind, c)
        for other in ("CFF", "HKR1"):
            o = t5.get(other, kind, c)
            gap = w.rejection_rate - o.rejection_rate
            se = max(w.mc_stderr, o.mc_stderr)
            ok &= gap >= 2 * se
            details.append(f"t(5) {kind} c={c}: WMW-{other}={gap:+.3f} ({gap / se:+.1f} SE)")
        details.append(f"WMW={w.rejection_rate:.3f}")
    sb = study(sbm(), (("delta3", (2.0,)),), ("WMW", "HKR2"))
    w, h = sb.rate("WMW", "delta3", 2.0), sb.rate("HKR2", "delta3", 2.0)
    ok &= h >= w
    details.append(f"sBm delta3 c=2.0: HKR2={h:.3f}, WMW={w:.3f}")
    verdict(5, "power ordering", bool(ok), "; ".join(details))
    assert ok


@pytest.mark.parametrize("p", [2, 3])
def test_hessian_oracle(verdict, p):
    geom = LpGeometry(p)
    dist = DistributionSpec(sbm(), STUDY_GRID, mc_outer=100_000, seed=SEED)
    delta = Curve(STUDY_GRID, STUDY_GRID.points.copy())
    a = j0_apply(delta, dist, geom)
    b = j0_finite_difference(delta, dist, geom, t=1e-3)
    err = dual_norm(a - b, geom) / dual_norm(b, geom)
    ok = err <= 0.02
    verdict(6, f"J0 matches finite difference, p={p}", ok, f"relative error {err:.2e}")
    assert ok


def test_calibration_validity(verdict):
    m = n = 50
    g = unit_grid(50)
    geom = LpGeometry(2)
    scale = np.sqrt(m * n / (m + n))
    emp = np.empty(2000)
    for r in range(emp.size):
        X = Sample(g, gen_values(sbm(), m, g, derive_seed(SEED, STREAM_REPLICATE, r, 0)))
        Y = Sample(g, gen_values(sbm(), n, g, derive_seed(SEED, STREAM_REPLICATE, r, 1)))
        emp[r] = scale * dual_norm(t_wmw(X, Y, geom), geom)
    spec = gamma1_spectrum(DistributionSpec(sbm(), g, 10_000, 500, SEED), geom)
    ref = gaussian_norm_draws(spec, 200_000, SEED)
    ks = stats.ks_2samp(emp, ref).statistic
    ok = ks <= 0.06
    verdict(7, "null statistic vs population weighted chi-square norm", ok,
            f"KS distance {ks:.4f} (2000 replicates)")
    assert ok


def test_consistency(verdict):
    powers = {}
    for size in (15, 30, 60):
        t = study(sbm(), (("delta1", (0.75,)),), ("WMW",), size, size, 500)
        powers[f"m=n={size}"] = t.rate("WMW", "delta1", 0.75)
    vals = list(powers.values())
    ok = vals[0] <= vals[1] <= vals[2] and vals[2] >= 0.9
    verdict(8, "WMW power nondecreasing in m=n and >= 0.9 at 60", ok, fmt(powers))
    assert ok


def test_asymptotic_engine(verdict):
    dist = DistributionSpec(sbm(), unit_grid(100), 10_000, 500, SEED)
    curves = asymptotic_power_curves(dist, LpGeometry(2), ("delta1", "delta2", "delta3"),
                                     (0.0, 2.0, 6.0), ALL, 0.05, 100_000, SEED)
    pw = {(cv.test, cv.shift_kind, c): p for cv in curves
          for c, p in zip(cv.c_values, cv.powers)}
    null_dev = max(abs(p - 0.05) for (_, _, c), p in pw.items() if c == 0)
    r2 = pw[("CFF", "delta2", 2.0)] / pw[("WMW", "delta2", 2.0)]
    r3 = pw[("HKR2", "delta3", 6.0)] / pw[("WMW", "delta3", 6.0)]
    ok = null_dev <= 0.01 and 0.9 <= r2 <= 1.1 and r3 > 1
    verdict(9, "asymptotic powers", ok,
            f"max |power - alpha| at c=0 {null_dev:.4f}; CFF/WMW delta2 c=2: {r2:.3f}; "
            f"HKR2/WMW delta3 c=6: {r3:.3f}")
    assert ok


def _pair_from_env(name):
    from funcwmw.csvio import load_pair

    x, y = os.environ.get(f"FUNCWMW_{name}_X"), os.environ.get(f"FUNCWMW_{name}_Y")
    if not (x and y):
        return None
    return load_pair(x, y, os.environ.get("FUNCWMW_GRID_HEADER") == "1")[:2]


def test_real_data(verdict):
    data = {k: _pair_from_env(k) for k in ("COFFEE", "GROWTH", "SPECTRO")}
    if not any(data.values()):
        verdict(10, "real data", None, "no curve files supplied")
        pytest.skip("real-data curve files not supplied")
    ok, details = True, []

    def pvals(X, Y):
        res = mean_tests(X, Y, ALL[1:], seed=SEED)
        out = {k: v.p_value for k, v in res.items()}
        out["WMW"] = wmw_test(X, Y, seed=SEED).p_value
        return out

    if data["COFFEE"]:
        p = pvals(*data["COFFEE"])
        target = {"WMW": (0.072, 0.02), "CFF": (0.169, 0.03), "HKR1": (0.273, 0.05),
                  "HKR2": (0.273, 0.05)}
        ok &= all(abs(p[k] - v) <= tol for k, (v, tol) in target.items())
        details.append("coffee " + fmt(p))
    tables = {"GROWTH": (0.829, 0.476, (0.271, 0.292)), "SPECTRO": (0.832, 0.712, (0.744, 0.778))}
    for name, (w_ref, c_ref, hkr_ref) in tables.items():
        if not data[name]:
            continue
        X, Y = data[name]
        p = pvals(X, Y)
        ok &= all(v < 0.01 for v in p.values())
        t = run_subsample_study(X, Y, 0.2, 1000, ALL, 0.05, SEED)
        got = {k: t.rate(k, "subsample(0.2)", 0.2) for k in ALL}
        hk = (got["HKR1"], got["HKR2"])
        ok &= abs(got["WMW"] - w_ref) <= 0.05 and abs(got["CFF"] - c_ref) <= 0.05
        # the two HKR proportions are reported without saying which is which
        ok &= any(all(abs(a - b) <= 0.05 for a, b in zip(hk, ref))
                  for ref in (hkr_ref, hkr_ref[::-1]))
        details.append(f"{name.lower()} full p: {fmt(p)}; 20% subsamples: {fmt(got)}")
    verdict(10, "real data", bool(ok), "; ".join(details))
    assert ok


def test_determinism(verdict, tmp_path):
    checks = {}
    cfg = ExperimentConfig(8, 8, unit_grid(30), t_process(5), (("delta2", (0.0, 1.0)),),
                           ALL, 20, 0.05, SEED, TestOptions(n_mc=5000))
    checks["power study"] = run_power_study(cfg) == run_power_study(cfg)

    doc = {"m": 8, "n": 8, "grid": {"d": 30}, "distributions": [{"model": "sbm"}],
           "shifts": [{"kind": "delta1", "c": [0.0, 0.5]}], "replicates": 20, "seed": SEED,
           "n_mc": 5000}
    (tmp_path / "power.json").write_text(json.dumps(doc))
    adoc = {"grid": {"d": 30}, "distributions": [{"model": "sbm"}],
            "shift_kinds": ["delta2"], "c_values": [0.0, 2.0], "mc_outer": 2000,
            "mc_inner": 200, "n_mc": 20000, "seed": SEED}
    (tmp_path / "asym.json").write_text(json.dumps(adoc))

    x, y = str(tmp_path / "x.csv"), str(tmp_path / "y.csv")

    def outputs(tag):
        d = tmp_path / tag
        main(["simulate", "--d", "30", "--m", "9", "--n", "9", "--c", "0.5", "--seed",
              str(SEED), "-o", str(d / "sim")])
        if tag == "a":
            for f in ("x.csv", "y.csv"):
                (tmp_path / f).write_bytes((d / "sim" / f).read_bytes())
        main(["test", x, y, "--grid-header", "--seed", str(SEED), "-o", str(d / "test.json")])
        main(["power", str(tmp_path / "power.json"), "-o", str(d / "power")])
        main(["asymptotic", str(tmp_path / "asym.json"), "-o", str(d / "asym.csv")])
        main(["subsample", x, y, "--grid-header", "--fraction", "0.5", "--repeats", "5",
              "--n-mc", "5000", "--seed", str(SEED), "-o", str(d / "sub.csv")])
        return {p.relative_to(d).as_posix(): p.read_bytes()
                for p in sorted(d.rglob("*")) if p.is_file()}

    a, b = outputs("a"), outputs("b")
    checks["cli files"] = a.keys() == b.keys() and all(a[k] == b[k] for k in a)
    ok = all(checks.values()) and len(a) == 8
    verdict(11, "byte-identical reruns", ok,
            ", ".join(f"{k}: {'identical' if v else 'DIFFERENT'}" for k, v in checks.items())
            + f" ({len(a)} CLI output files)")
    assert ok
