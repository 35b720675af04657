"""Exit criteria for the package, shared by ``fronthaul-mux validate`` and pytest.

Each check takes the model parameters (so a corrupted constant can be
injected) and returns ``(passed, detail)``. The runtime limit is part of the
verdict.
"""

from __future__ import annotations

import math
import os
import tempfile
import time
from dataclasses import dataclass
from typing import Callable

from .blocking import (
    blocking_probability,
    bound_ratio,
    bounds_valid,
    upper_ratio_constant,
)
from .dimensioning import asymptotic_gain, gain, min_capacity
from .dist import ModelParams, mean_count, pmf_table
from .spatial import (
    Window,
    cell_area_fit,
    estimate_blocking,
    estimate_blocking_model,
    windows_for_samples,
)

K_GRID = (1, 3, 5, 10, 20, 50, 100)
THRESHOLD = 0.05


@dataclass(frozen=True)
class Criterion:
    number: int
    name: str
    limit_s: float
    check: Callable[[ModelParams, int], tuple]


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    runtime_s: float
    limit_s: float

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] {self.number:2d} {self.name:<28s} {self.runtime_s:7.2f}s/{self.limit_s:g}s  {self.detail}"


def _t1(params, workers):
    t1 = min_capacity(1, THRESHOLD, params)
    return t1 == 8, f"T_1(0.05) = {t1}"


def _t5(params, workers):
    t5 = min_capacity(5, THRESHOLD, params)
    return t5 == 29, f"T_5(0.05) = {t5} (t_bar = {t5 / 5:g})"


def _gain(params, workers):
    g5 = gain(5, THRESHOLD, params)
    g_inf = asymptotic_gain(THRESHOLD, params)
    ok = abs(g5 - 0.275) <= 1e-9 and abs(g_inf - 0.40625) <= 1e-12
    return ok, f"G_5 = {g5:.12g}, G_inf = {g_inf:.12g}"


def _sandwich(params, workers):
    cases = violations = absent = 0
    for K in (1, 3, 5, 10, 20):
        for T in range(3, 61):
            if not bounds_valid(K, T, params):
                continue
            cases += 1
            res = blocking_probability(K, T, params)
            if not res.log_lower < res.log_value:
                violations += 1
            if res.log_upper is None:
                absent += 1
            elif not res.log_value < res.log_upper:
                violations += 1
    ok = cases == 290 and violations == 0
    return ok, f"{cases} cases, {violations} violations, upper bound absent (c >= 1) in {absent}"


def _tightness(params, workers):
    K = 5
    ts = (10, 100, 1000, 10000)
    ratios, oracle = [], []
    for T in ts:
        # T=10 has c > 1, so the closed forms are compared as expressions
        r = bound_ratio(K, T, params, certified=False)
        if r is None:
            return False, f"ratio undefined at T={T}"
        ratios.append(r)
        c = upper_ratio_constant(K, T, params)
        oracle.append(((1 - c) / (1 - params.lam)) ** 2)
    agree = all(abs(r - o) <= 1e-9 * o for r, o in zip(ratios, oracle))
    increasing = all(x < y for x, y in zip(ratios, ratios[1:]))
    ok = agree and increasing and ratios[-1] > 0.99
    return ok, "ratios " + ", ".join(f"{r:.6f}" for r in ratios)


def _slope(params, workers):
    T = 200
    d = blocking_probability(1, T + 1, params).log_value - blocking_probability(1, T, params).log_value
    err = abs(d - math.log(params.mu / (params.mu + params.b)))
    return err < 0.01, f"d ln P_b = {d:.6f}, |error| = {err:.2e}"


def _convergence(params, workers):
    t_bar = 4
    limit = 1 - t_bar / params.mu
    gaps = [abs(blocking_probability(K, t_bar * K, params).value - limit) for K in (10, 20, 50, 100)]
    ok = all(x > y for x, y in zip(gaps, gaps[1:]))
    return ok, "gaps " + ", ".join(f"{g:.5f}" for g in gaps)


def _identities(params, workers):
    worst_norm = worst_mean = 0.0
    ok = True
    for K in K_GRID:
        n, p = pmf_table(K, params)
        total = math.fsum(p)
        mean = math.fsum(n * p)
        rel = abs(mean - mean_count(K, params)) / mean_count(K, params)
        worst_norm = max(worst_norm, abs(1 - total))
        worst_mean = max(worst_mean, rel)
        ok &= (1 - 1e-9 <= total <= 1 + 1e-12) and rel <= 1e-6
    return ok, f"max |1 - sum| = {worst_norm:.1e}, max mean rel err = {worst_mean:.1e}"


def _mc_chain(params, workers, samples=10**6, window_rrus=1000, seed=42):
    parts = []
    ok = True
    for K, T in ((1, 8), (5, 29), (10, 55)):
        exact = blocking_probability(K, T, params).value
        est = estimate_blocking_model(K, T, params, samples, seed)
        z = est.z_score(exact)
        ok &= abs(z) < 3
        parts.append(f"model({K},{T}) z={z:+.2f}")
    for K, T in ((1, 8), (5, 29)):
        exact = blocking_probability(K, T, params).value
        est = estimate_blocking(K, T, params, windows_for_samples(K, samples, window_rrus), window_rrus, seed, workers)
        rel = (est.mean - exact) / exact
        ok &= est.replications >= samples and abs(rel) <= 0.10
        parts.append(f"spatial({K},{T}) n={est.replications} rel={rel:+.4f} z={est.z_score(exact):+.1f}")
    return ok, "; ".join(parts)


def _cell_area(params, workers, replications=100, seed=42):
    window = Window.for_expected_count(1000, params.lambda_r)
    rep = cell_area_fit(params.lambda_r, window, replications, seed, a=params.a, b=params.b, workers=workers)
    mean_err = abs(rep.mean - rep.expected_mean) / rep.expected_mean
    cv_err = abs(rep.cv2 - rep.expected_cv2) / rep.expected_cv2
    ok = mean_err <= 0.01 and cv_err <= 0.05
    return ok, (
        f"{rep.n_cells} cells, mean err {mean_err:.2%}, CV^2 = {rep.cv2:.4f} ({cv_err:.2%} off), "
        f"KS = {rep.ks_distance:.4f} (informational, expected < 0.02)"
    )


def _shapes(params, workers):
    ks = (1, 3, 5, 10, 20)
    ok = True
    for K in ks:
        vals = [blocking_probability(K, K * tb, params).value for tb in range(1, 11)]
        ok &= all(x > y for x, y in zip(vals, vals[1:]))
    for tb in (5, 6, 7):
        vals = [blocking_probability(K, K * tb, params).value for K in ks]
        ok &= all(x > y for x, y in zip(vals, vals[1:]))
    per_rru = [min_capacity(K, THRESHOLD, params) / K for K in K_GRID]
    floor = (1 - THRESHOLD) * params.mu
    ok &= all(x >= y for x, y in zip(per_rru, per_rru[1:])) and min(per_rru) >= floor
    return ok, "T_min/K = " + ", ".join(f"{x:g}" for x in per_rru)


def _determinism(params, workers):
    from .cli import main

    base = [
        "simulate",
        "--lambda-u", repr(params.lambda_u),
        "--lambda-r", repr(params.lambda_r),
        "--gamma-a", repr(params.a),
        "--gamma-b", repr(params.b),
        "--seed", "7",
        "--cells", "1:8,5:29",
        "--samples", "20000",
    ]
    blobs = []
    with tempfile.TemporaryDirectory() as tmp:
        for i, w in enumerate((1, 1, 2)):
            path = os.path.join(tmp, f"run{i}.csv")
            code = main(base + ["--workers", str(w), "--out", path])
            if code != 0:
                return False, f"simulate exited with {code}"
            with open(path, "rb") as fh:
                blobs.append(fh.read())
    ok = blobs[0] == blobs[1] == blobs[2]
    return ok, f"{len(blobs[0])} bytes, identical across reruns and workers 1/2: {ok}"


CRITERIA = (
    Criterion(1, "T1 reproduction", 1, _t1),
    Criterion(2, "T5 reproduction", 1, _t5),
    Criterion(3, "gain reproduction", 1, _gain),
    Criterion(4, "bound sandwich", 10, _sandwich),
    Criterion(5, "bound tightness trend", 5, _tightness),
    Criterion(6, "exponential decay slope", 5, _slope),
    Criterion(7, "large-K convergence", 10, _convergence),
    Criterion(8, "distribution identities", 5, _identities),
    Criterion(9, "MC consistency chain", 300, _mc_chain),
    Criterion(10, "cell-area validation", 120, _cell_area),
    Criterion(11, "figure shape properties", 30, _shapes),
    Criterion(12, "determinism", 120, _determinism),
)


def run_criterion(criterion: Criterion, params: ModelParams, workers: int = 1) -> CriterionResult:
    start = time.perf_counter()
    try:
        ok, detail = criterion.check(params, workers)
    except Exception as exc:  # a crash is a failed criterion, not a crashed report
        ok, detail = False, f"error: {exc!r}"
    elapsed = time.perf_counter() - start
    if elapsed >= criterion.limit_s:
        ok = False
        detail += f" (over runtime limit {criterion.limit_s:g}s)"
    return CriterionResult(criterion.number, criterion.name, bool(ok), detail, elapsed, criterion.limit_s)


def run_all(params: ModelParams | None = None, workers: int = 1, only=None) -> list:
    params = params or ModelParams()
    selected = [c for c in CRITERIA if only is None or c.number in only]
    return [run_criterion(c, params, workers) for c in selected]


__all__ = ["CRITERIA", "Criterion", "CriterionResult", "run_all", "run_criterion"]
