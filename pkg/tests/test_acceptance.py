"""Acceptance criteria, each at its stated tolerance.

Every test prints a single ``[ACC nn] ... PASS|FAIL`` line; the same lines are
repeated in the terminal summary.  Run alone with ``pytest tests/test_acceptance.py -v``.
"""
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, cos_field, random_poly
from torus_integrals.cascade import Verdict, build_liouville, hopf_residual, run_cascade
from torus_integrals.cli import mixed_metric
from torus_integrals.flow_sim import (
    IntegrationControls,
    SystemSpec,
    flat_cosine_integral,
    homogeneous_observable,
    integrate,
    momentum_x,
    poly_observable,
    time_derivative,
)
from torus_integrals.fourier_field import (
    DEFAULT_LATTICE,
    constant,
    d_x,
    d_y,
    d_zbar,
    inv_d_zbar,
    make_field,
    random_metric,
    random_real_field,
)
from torus_integrals.magnetic import dgrw_trig, extract_B, level_initial_states, linear_magnetic_system, multi_level_test
from torus_integrals.momentum_poly import bracket_restricted, bracket_restricted_magnetic, evaluate_bracket, homogenize

LAT = DEFAULT_LATTICE


def record(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"[ACC {n:02d}] {title}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def random_dense(rng, band):
    n = 2 * band + 1
    c = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return make_field(LAT, [(k - band, l - band, c[k, l]) for k in range(n) for l in range(n)])


def test_01_spectral_exactness():
    rng = np.random.default_rng(1)
    fields = [random_dense(rng, int(rng.integers(1, 33))) for _ in range(1000)]
    t0 = time.perf_counter()
    worst = 0.0
    for f in fields:
        back = d_zbar(inv_d_zbar(f.without_mean()))
        worst = max(worst, float(np.max(np.abs(back.coeffs - f.without_mean().coeffs))))
    dt = time.perf_counter() - t0
    record(1, "spectral exactness", worst <= 1e-12 and dt < 5.0, f"max coeff error {worst:.2e}, {dt:.2f} s")


def _oracle_gap(rng, magnetic: bool) -> float:
    worst = 0.0
    for _ in range(50):
        k = int(rng.integers(1, 5))
        F = random_poly(rng, k)
        g = random_metric(rng, LAT, 2, amplitude=0.5)
        E = float(rng.uniform(0.5, 2.0))
        if magnetic:
            b = random_real_field(rng, LAT, 2, scale=0.5, mean=float(rng.normal(0, 0.3)))
            br = bracket_restricted_magnetic(F, g, b, E)
            spec = SystemSpec.from_complex_field(g, b)
        else:
            br = bracket_restricted(F, g, E)
            spec = SystemSpec(g)
        fn = poly_observable(F)
        for s in level_initial_states(spec, E, 20, seed=int(rng.integers(1 << 30))):
            got = evaluate_bracket(br, g, s.x, s.y, s.px, s.py)
            worst = max(worst, abs(got - time_derivative(spec, s, fn)))
    return worst


def test_02_bracket_oracle():
    rng = np.random.default_rng(2)
    geo = _oracle_gap(rng, magnetic=False)
    mag = _oracle_gap(rng, magnetic=True)
    record(2, "bracket vs trajectory derivative", max(geo, mag) <= 1e-6,
           f"geodesic max gap {geo:.2e}, magnetic max gap {mag:.2e}, 50 systems x 20 points each")


def test_03_obstruction_free_depth():
    rng = np.random.default_rng(3)
    metrics = [random_metric(rng, LAT, 3, amplitude=0.6) for _ in range(20)]
    t0 = time.perf_counter()
    worst, aborted = 0.0, 0
    for g in metrics:
        for k in (5, 6, 7):
            rep = run_cascade(g, k, 1.0)
            if rep.verdict == Verdict.OBSTRUCTION_HIT and rep.obstruction_step > k - 8:
                aborted += 1
            for n in (k - 2, k - 4, k - 6):
                if n >= 0:
                    worst = max(worst, rep.relative.get(n, np.inf))
    dt = time.perf_counter() - t0
    record(3, "obstructions vanish at k-2, k-4, k-6", worst <= 1e-10 and aborted == 0 and dt < 60,
           f"max relative obstruction {worst:.2e}, early aborts {aborted}, {dt:.1f} s")


def test_04_constant_independence():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(10):
        g = random_metric(rng, LAT, 3, amplitude=0.5)
        for k in (6, 7, 8, 9):
            base = run_cascade(g, k, 1.0, tol=np.inf)
            for m in range(k - 2, 1, -2):
                c = complex(*rng.standard_normal(2))
                pert = run_cascade(g, k, 1.0, constants={m: c}, tol=np.inf)
                for n in base.obstructions:
                    if n < m:
                        worst = max(worst, abs(pert.obstructions[n] - base.obstructions[n]))
            allc = {m: complex(*rng.standard_normal(2)) for m in range(k - 2, 1, -2)}
            pert = run_cascade(g, k, 1.0, constants=allc, tol=np.inf)
            worst = max(worst, max(abs(pert.obstructions[n] - base.obstructions[n]) for n in base.obstructions))
    record(4, "constant independence of obstructions", worst <= 1e-12, f"max change {worst:.2e}")


def test_05_liouville_closure():
    v, w = cos_field(1, k=1, base=1.0), cos_field(1, l=1, base=1.5)
    L = build_liouville(v, w)
    E = 1.0
    rep = run_cascade(L.g, 2, E)
    a0_err = (rep.solved[0] - (-(v - w) * E).without_mean()).max_coeff()
    spec = SystemSpec(L.g)
    ctl = IntegrationControls(rtol=1e-10, atol=1e-10, samples=2001)
    drift = max(integrate(spec, s0, 100.0, ctl, {"F": poly_observable(L.F2, E)}).drift["F"]
                for s0 in level_initial_states(spec, E, 4, seed=5))
    hom = homogeneous_observable(homogenize(L.F2, L.g))
    E2 = 2.7
    drift2 = max(integrate(spec, s0, 100.0, ctl, {"F": hom}).drift["F"]
                 for s0 in level_initial_states(spec, E2, 4, seed=6))
    ok = rep.verdict == Verdict.INTEGRAL_FOUND and a0_err <= 1e-10 and drift <= 1e-8 and drift2 <= 1e-8
    record(5, "Liouville closure", ok,
           f"a_0 error {a0_err:.2e}, F_2 drift {drift:.2e} at E={E}, homogenized drift {drift2:.2e} at E={E2}")


def test_06_k1_family():
    g = cos_field(0.6, l=1, base=1.0) + cos_field(0.2, l=3)
    spec = SystemSpec(g)
    ctl = IntegrationControls(rtol=1e-12, atol=1e-12)
    drift = max(integrate(spec, s0, 50.0, ctl, {"px": momentum_x}).drift["px"]
                for s0 in level_initial_states(spec, 1.0, 4, seed=7))
    rep = run_cascade(g, 1, 1.0)
    closing = max(rep.closing_sup, rep.closing_coef)
    record(6, "k=1 family", drift <= 1e-10 and closing <= 1e-12,
           f"p_x drift {drift:.2e}, closing residual {closing:.2e}")


def test_07_reality_failure_detection():
    rng = np.random.default_rng(7)
    cases = [mixed_metric(e, LAT) for e in (0.1, 0.2, 0.5)]
    cases += [random_metric(rng, LAT, 3, amplitude=0.5, base=1.0) for _ in range(10)]
    checked, worst, bad = 0, np.inf, 0
    for g in cases:
        mixed = d_x(d_y(g)).sup_norm(64)
        if mixed < 0.1:
            continue
        checked += 1
        rep = run_cascade(g, 2, 1.0)
        worst = min(worst, rep.closing_sup)
        if rep.verdict != Verdict.REALITY_FAILED or rep.closing_sup < 1e-3:
            bad += 1
    record(7, "reality failure detected", checked >= 10 and bad == 0,
           f"{checked} metrics with mixed derivative >= 0.1, smallest residual {worst:.2e}, misses {bad}")


def test_08_magnetic_exactness():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        k = int(rng.integers(1, 6))
        a_k = complex(*rng.uniform(0.5, 2.0, 2))
        b = random_real_field(rng, LAT, int(rng.integers(1, 6)))
        a = inv_d_zbar(b * (-1j * k * a_k)) + complex(*rng.standard_normal(2))
        worst = max(worst, abs(extract_B(a_k, a, k).b.mean))
    record(8, "extracted field has zero mean", worst <= 1e-14, f"max |mean| {worst:.2e} over 100 inputs")


def test_09_linear_magnetic_all_levels():
    ctl = IntegrationControls(rtol=1e-12, atol=1e-12, samples=501)
    systems = [
        linear_magnetic_system(cos_field(1, l=1), cos_field(0.3, l=1, base=1.0)),
        linear_magnetic_system(cos_field(0.5, l=2, base=0.3), cos_field(0.4, l=1, base=1.2)),
    ]
    worst = 0.0
    for c in systems:
        ml = multi_level_test(c.spec, c.F, [1.0, 4.0], T=50, controls=ctl, n_points=8)
        worst = max(worst, max(r.max_drift for r in ml.levels))
    record(9, "linear magnetic integral on two levels", worst <= 1e-9, f"max drift {worst:.2e} at E=1 and E=4")


def test_10_single_level_signature():
    s = dgrw_trig(mu=1, nu=1, a=0.1, b=0.1, E=1.0)
    ml = multi_level_test(s.spec, s.F2, [s.E, 2 * s.E], T=50, n_points=8)
    d1, d2 = ml.levels[0].max_drift, ml.levels[1].max_drift
    ratio = ml.ratio(1, 0)
    record(10, "quadratic magnetic integral on one level only", d1 <= 1e-7 and ratio >= 1e3,
           f"drift {d1:.2e} at E_design, {d2:.2e} at 2 E_design, achieved ratio {ratio:.2e}")


def test_11_flat_magnetic_cosine():
    spec = SystemSpec(constant(1.0), constant(1.0))
    ctl = IntegrationControls(rtol=1e-10, atol=1e-10)
    fn = flat_cosine_integral(1.0)
    drift = max(integrate(spec, s0, 50.0, ctl, {"F": fn}).drift["F"]
                for s0 in level_initial_states(spec, 0.7, 8, seed=11))
    record(11, "flat metric, constant field cosine integral", drift <= 1e-8, f"max drift {drift:.2e}")


def test_12_hopf_residual():
    worst_a = 0.0
    for u in (cos_field(0.8, l=1, base=1.0), cos_field(0.3, l=3, base=-0.4) + cos_field(0.2, l=1)):
        r1, r2 = hopf_residual(u, -u)
        worst_a = max(worst_a, r1.max_coeff(), r2.max_coeff(), r1.sup_norm(), r2.sup_norm())
    g = random_metric(np.random.default_rng(12), LAT, 3, amplitude=0.5)
    E = 1.3
    rep = run_cascade(g, 3, E)
    r1, _ = hopf_residual(g * (E / 2), -rep.solved[1])
    target = rep.closing_residual * (E / 2)
    gap = max((r1 - target).max_coeff(), (r1 - target).sup_norm())
    ratio = (r1.padded(r1.band)[r1.band + 1, r1.band] / target.padded(r1.band)[r1.band + 1, r1.band]).real
    record(12, "Hopf-type residual", worst_a <= 1e-13 and gap <= 1e-12,
           f"y-only pairs {worst_a:.2e}; k=3 first residual minus (E/2) closing field {gap:.2e}, "
           f"measured factor {ratio:.3f}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
