"""
Acceptance suite. Each criterion prints one ``PASS``/``FAIL`` line (also
repeated in the pytest terminal summary) and then asserts.

Run standalone with ``python3 tests/test_acceptance.py`` to get only the
status lines.
"""

import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate

sys.path.insert(0, str(Path(__file__).parent))
from conftest import pair_exceedance_oracle  # noqa: E402

from stretchsum import dist, harness, theory  # noqa: E402
from stretchsum.dist import StretchedExpParams  # noqa: E402
from stretchsum.mc import largest_jump_mc, naive_mc  # noqa: E402
from stretchsum.weights import WeightFamily, WeightVector, realize  # noqa: E402

STD = StretchedExpParams(1.0, 0.5)
STUDY_CONFIG = Path(__file__).parents[1] / "configs" / "cramer_study.cfg"

RESULTS = []


def record(label, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


# -- 1. distribution exactness ----------------------------------------------------


def test_c1_distribution_exactness():
    t0 = time.perf_counter()
    x = dist.sample(STD, np.random.default_rng(20240601), 10**6)
    worst = 0.0
    for t in (1.0, 4.0, 9.0, 16.0):
        p = math.exp(-math.sqrt(t))
        z = abs(np.mean(x > t) - p) / math.sqrt(p * (1 - p) / x.size)
        worst = max(worst, z)
    z_mean = abs(x.mean() - 2.0) / (x.std(ddof=1) / math.sqrt(x.size))
    dt = time.perf_counter() - t0
    ok = worst <= 4 and z_mean <= 4 and dt < 10
    record("C1 distribution exactness", ok,
           f"max tail z={worst:.2f}, mean z={z_mean:.2f}, {dt:.1f}s")


# -- 2. truncated moment dominance -----------------------------------------------


def _quad_truncated_moment(a, b):
    # independent quadrature in t-space of E[(exp(b X^r) - 1); X > a]
    f = lambda t: (math.exp((b - 1) * math.sqrt(t)) - math.exp(-math.sqrt(t))) * 0.5 / math.sqrt(t)
    hi = max(4 * a, 100.0)
    head = integrate.quad(f, a, hi, epsabs=1e-13, epsrel=1e-11, limit=400)[0]
    tail = integrate.quad(f, hi, np.inf, epsabs=1e-13, epsrel=1e-11, limit=400)[0]
    return head + tail


def test_c2_elementary_bound_dominance():
    t0 = time.perf_counter()
    env = dist.tail_envelope(STD)
    worst = -math.inf
    for a in (0.5, 1.0, 2.0, 4.0, 8.0):
        for frac in (0.1, 0.3, 0.5, 0.7, 0.9):
            b = frac * env.B_prime
            lhs = _quad_truncated_moment(a, b)
            worst = max(worst, lhs - theory.elementary_bound(a, b, env, STD.r))
    dt = time.perf_counter() - t0
    record("C2 elementary bound dominance", worst <= 1e-6 and dt < 5,
           f"max(quadrature - bound)={worst:.3g} over 25 points, {dt:.1f}s")


# -- 3. small-instance oracle equivalence --------------------------------------


def test_c3_small_instance_oracle():
    t0 = time.perf_counter()
    wv = WeightVector(1, [0.6, 0.4])
    worst_z, sandwich, trivial = 0.0, True, []
    for x in (2.0, 3.0, 4.0, 5.0, 6.0):
        oracle = pair_exceedance_oracle(0.6, 0.4, x, STD)
        for est in (naive_mc, largest_jump_mc):
            e = est(wv, x, STD, 10**5, seed=1000 + int(x))
            worst_z = max(worst_z, abs(e.p_hat - oracle) / e.stderr)
        eps = theory.lower_epsilon_schedule(wv, STD)
        lo = theory.certified_lower_bound(wv, x, STD, eps).log_lower
        if x > wv.sum * dist.mean(STD):
            up = theory.certified_upper_bound(wv, x, STD).log_upper
        else:
            # boundary point A = 0: the Chernoff bound is undefined, use log P <= 0
            up, trivial = 0.0, trivial + [x]
        sandwich &= lo <= math.log(oracle) <= up
    dt = time.perf_counter() - t0
    record("C3 small-instance oracle", worst_z <= 4 and sandwich and dt < 30,
           f"max |p_hat - oracle|/stderr={worst_z:.2f}, bounds bracket oracle={sandwich}"
           f" (trivial upper bound at x={trivial}), {dt:.1f}s")


# -- 4. sup sandwich ------------------------------------------------------------------


C4_FAMILIES = {
    "cramer": (WeightFamily.cramer(), 0.0),
    "remainder-p3": (WeightFamily.remainder(3.0), 1e-6),
}


@pytest.mark.parametrize("x", [1.0, 2.0])
@pytest.mark.parametrize("name", list(C4_FAMILIES))
def test_c4_sup_sandwich(name, x):
    t0 = time.perf_counter()
    family, tol = C4_FAMILIES[name]
    ordered = True
    for n in (10, 100, 1000):
        wv = realize(family, n, tol)
        exact = theory.log_sup_exceedance_prob(wv, x, STD)
        ordered &= theory.sup_lower_bound(wv, x, STD) <= exact <= theory.sup_union_upper_bound(wv, x, STD)
    norm = wv.a_max**STD.r * exact
    target = -STD.kappa * x**STD.r
    gap = abs(norm - target) / abs(target)
    dt = time.perf_counter() - t0
    record(f"C4 sup sandwich [{name}, x={x:g}]", ordered and gap <= 0.2 and dt < 5,
           f"ordered={ordered}, normalized at n=1000={norm:.4f} vs {target:.4f} "
           f"(gap {gap:.1%}), {dt:.1f}s")


# -- 5, 7, 8. convergence study --------------------------------------------------------


@pytest.fixture(scope="module")
def study():
    cfg = harness.load_config(STUDY_CONFIG)
    t0 = time.perf_counter()
    report = harness.run_study(cfg, workers=1)
    return cfg, report, time.perf_counter() - t0


def _norm_stderr(row):
    return row["a_max"] ** STD.r * row["stderr"] / row["p_hat"]


@pytest.mark.slow
def test_c5_convergence(study):
    cfg, report, dt = study
    rows = report.rows
    dist_to_target = [abs(r["normalized_rate"] - r["predicted_rate"]) for r in rows]
    inversions, excused = 0, True
    for i in range(len(rows) - 1):
        if dist_to_target[i + 1] >= dist_to_target[i]:
            inversions += 1
            se = math.hypot(_norm_stderr(rows[i]), _norm_stderr(rows[i + 1]))
            excused &= dist_to_target[i + 1] - dist_to_target[i] <= se
    last_gap = dist_to_target[-1] / abs(rows[-1]["predicted_rate"])
    ok = inversions <= 1 and excused and last_gap <= 0.25 and dt < 600
    trail = ", ".join(f"n={r['n']}: {r['normalized_rate']:.4f}" for r in rows)
    record("C5 convergence to the rate", ok,
           f"{trail}; inversions={inversions} (within stderr={excused}), "
           f"gap at n={rows[-1]['n']}={last_gap:.1%}, {dt:.0f}s")


@pytest.mark.slow
def test_c6_sample_mean_direct_simulation(study):
    t0 = time.perf_counter()
    row = next(r for r in study[1].rows if r["n"] == 100)
    rng = np.random.default_rng(777)
    scale = STD.kappa ** (-1.0 / STD.r)
    hits, total = 0, 10**6
    for _ in range(total // 10_000):
        draws = rng.weibull(STD.r, size=(10_000, 100)) * scale
        hits += int(np.count_nonzero(draws.mean(axis=1) > 3.0))
    p = hits / total
    se = math.sqrt(p * (1 - p) / total)
    z = abs(p - row["p_hat"]) / math.hypot(se, row["stderr"])
    dt = time.perf_counter() - t0
    record("C6 sample-mean special case", z <= 4 and dt < 120,
           f"study p_hat={row['p_hat']:.5g}, direct={p:.5g}, z={z:.2f}, {dt:.0f}s")


@pytest.mark.slow
def test_c7_bound_sandwich_at_scale(study):
    bad = []
    for r in study[1].rows:
        rel = r["stderr"] / r["p_hat"]
        if not (r["log_lower_bound"] <= r["log_p_hat"] + 4 * rel
                and r["log_p_hat"] - 4 * rel <= r["log_upper_bound"]):
            bad.append(r["n"])
    detail = "; ".join(f"n={r['n']}: [{r['log_lower_bound']:.3f}, {r['log_upper_bound']:.3f}]"
                       f" holds {r['log_p_hat']:.3f}" for r in study[1].rows)
    record("C7 bound sandwich", not bad, detail + (f"; violated at {bad}" if bad else ""))


@pytest.mark.slow
def test_c8_determinism_across_workers(study):
    cfg, report, _ = study
    n = cfg.n_grid[-2]
    rerun = harness.run_study(replace(cfg, n_grid=(n,)), workers=4)
    ref = [r for r in report.rows if r["n"] == n]
    same = harness.format_csv(rerun.rows) == harness.format_csv(ref)
    record("C8 worker-count determinism", same, f"n={n}, workers 1 vs 4 CSV identical={same}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
