"""Acceptance gate: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and margins.  Tolerances come from s2wb.tolerances; sample budgets are
the contract values (1e5 certificate draws per configuration, 5e4 transform
draws per configuration).
"""
import json
import math
import time

import numpy as np
import pytest

from s2wb import tolerances as tol
from s2wb.fdsolver import (
    isotropic_coefficient,
    quadratic_boundary,
    gauss_perturbed_boundary,
    scaling_experiment,
    sin_perturbed_boundary,
    solve_dirichlet,
    superharmonicity_residual,
)
from s2wb.legendre import TransformConfig, transform_grid
from s2wb.verify import (
    run_jacobi_verification,
    run_remark_ratio,
    run_transform_verification,
)

GRID = [(n, k) for n in (2, 3, 4, 5, 6) for k in (1.0, 5.0, 10.0)]
CERT_SAMPLES = 100000
TRANSFORM_SAMPLES = 50000
SEED = 20240817


def _by_name(checks):
    return {c.name: c for c in checks}


@pytest.fixture(scope="module")
def jacobi_batches():
    started = time.monotonic()
    results = {}
    for n, k in GRID:
        checks, extras = run_jacobi_verification(
            n, k, CERT_SAMPLES, SEED, probe_min_shift=False)
        results[(n, k)] = _by_name(checks)
    return results, time.monotonic() - started


@pytest.fixture(scope="module")
def transform_batches():
    results = {}
    for n, k in GRID:
        checks, extras = run_transform_verification(
            n, k, TRANSFORM_SAMPLES, SEED, ray=True)
        results[(n, k)] = (_by_name(checks), extras)
    return results


@pytest.fixture(scope="module")
def perturbed_pipeline():
    """Shared n = 2 solves for criterion 7 (amplitude in the regime where
    stencil truncation dominates the superharmonicity sign noise)."""
    out = {}
    for m, amp in ((33, 0.05), (65, 0.05)):
        boundary = sin_perturbed_boundary(2, 1.0, amp)
        grid, report = solve_dirichlet(boundary, 1.0, m, 1.0)
        out[(m, amp)] = (grid, report)
    return out


def test_criterion_1_jacobi_certificate(jacobi_batches):
    results, elapsed = jacobi_batches
    worst_excess = math.inf
    worst_bound = math.inf
    for (n, k), checks in results.items():
        for name in ("sigma2_constraint", "semiconvexity", "tangency",
                     "jacobi_excess", "det_lower_bound"):
            assert checks[name].failures == 0, f"(n={n}, K={k}) {name} failed"
            assert checks[name].count >= (CERT_SAMPLES if name != "det_lower_bound"
                                          else CERT_SAMPLES * n)
        worst_excess = min(worst_excess, checks["jacobi_excess"].worst + tol.EXCESS_FLOOR)
        worst_bound = min(worst_bound, checks["det_lower_bound"].worst)
    assert elapsed <= 300.0, f"certificate batches took {elapsed:.0f}s (> 5 min)"
    print(f"\n[criterion 1] PASS: jacobi_excess >= -1e-9 and det bound hold on "
          f"{len(GRID)} x {CERT_SAMPLES} samples (min excess {worst_excess:.3e}, "
          f"{elapsed:.0f}s)")


def test_criterion_2_reduction_soundness(jacobi_batches):
    results, _ = jacobi_batches
    for (n, k), checks in results.items():
        for name in ("reduction_oracle", "trace_positive", "gram_identities",
                     "discriminant", "qform_crosscheck", "qform_eigen_bound"):
            assert checks[name].failures == 0, f"(n={n}, K={k}) {name} failed"
    worst = min(c["reduction_oracle"].worst for c in results.values())
    print(f"\n[criterion 2] PASS: closed-form (tr, det) match the projected-form "
          f"oracle to 1e-8 and tr > 0 (worst oracle margin {worst:.3e})")


def test_criterion_3_remark_3d():
    checks, _ = run_jacobi_verification(3, math.inf, CERT_SAMPLES, SEED, shift=0.0)
    named = _by_name(checks)
    assert named["jacobi_excess"].failures == 0
    assert named["jacobi_excess"].count >= CERT_SAMPLES
    ratio_checks, _ = run_remark_ratio(CERT_SAMPLES, SEED)
    ratio_named = _by_name(ratio_checks)
    for name in ("remark_ratio", "remark_amgm", "remark_substitution"):
        assert ratio_named[name].failures == 0
        assert ratio_named[name].count >= CERT_SAMPLES
    print(f"\n[criterion 3] PASS: unshifted 3-d certificate on {CERT_SAMPLES} jets "
          f"(min excess margin {named['jacobi_excess'].worst:.3e}) and "
          f"sigma_1/(-lam_3) > 3 on {CERT_SAMPLES} pairs "
          f"(min ratio margin {ratio_named['remark_ratio'].worst:.3e})")


def test_criterion_4_transform_identities(transform_batches):
    for (n, k), (checks, extras) in transform_batches.items():
        for name in ("residual", "residual_factorization", "trace_identity",
                     "quotient_identity", "mu_range", "ray_identities",
                     "ray_rest_bounded"):
            assert checks[name].failures == 0, f"(n={n}, K={k}) {name} failed"
        assert checks["residual"].count >= TRANSFORM_SAMPLES
        assert extras["ray"]["mu1_min"] < 1e-5      # mu_1 -> 0 along the ray
        assert extras["ray"]["mu_rest_min"] > 0.0
    print(f"\n[criterion 4] PASS: image-equation residual <= 1e-9, trace and "
          f"quotient identities, 0 < mu < 1 with the ray family bounded, on "
          f"{len(GRID)} x {TRANSFORM_SAMPLES} spectra")


def test_criterion_5_q_ellipticity(transform_batches):
    for (n, k), (checks, extras) in transform_batches.items():
        for name in ("ellipticity_positive", "ellipticity_fd", "concavity"):
            assert checks[name].failures == 0, f"(n={n}, K={k}) {name} failed"
        lo, hi = extras["ellipticity_bracket"]
        assert 0.0 < lo <= hi
    print("\n[criterion 5] PASS: dq/dmu_i > 0 with finite-difference agreement "
          "<= 1e-6 rel and sampled midpoint concavity to -1e-10")


def test_criterion_6_solver_correctness():
    # quadratic data reproduced to 1e-10
    grid, report = solve_dirichlet(quadratic_boundary(2), 1.0, 65, 1.0)
    t = isotropic_coefficient(2)
    xs = np.linspace(-1.0, 1.0, 65)
    mesh = np.meshgrid(xs, xs, indexing="ij")
    quad_err = float(np.abs(grid.values - t / 2 * (mesh[0] ** 2 + mesh[1] ** 2)).max())
    assert quad_err <= 1e-10 and report.iterations <= 2

    # manufactured smooth solution recovered at second order
    amp = 0.05

    def v(x1, x2):
        return t / 2 * (x1 * x1 + x2 * x2) + amp * np.sin(np.pi * x1) * np.sin(np.pi * x2)

    def rhs(x1, x2):
        d11 = t - amp * np.pi ** 2 * np.sin(np.pi * x1) * np.sin(np.pi * x2)
        d12 = amp * np.pi ** 2 * np.cos(np.pi * x1) * np.cos(np.pi * x2)
        return d11 * d11 - d12 ** 2

    errs = {}
    for m in (33, 65):
        u, _ = solve_dirichlet(v, 1.0, m, 1.0, rhs=rhs, newton_tol=1e-11)
        xsm = np.linspace(-1.0, 1.0, m)
        msh = np.meshgrid(xsm, xsm, indexing="ij")
        errs[m] = float(np.abs(u.values - v(*msh)).max())
    order = math.log2(errs[33] / errs[65])
    assert 1.9 <= order <= 2.1, f"measured order {order:.3f}"

    # superlinear Newton decay on the perturbed problem
    started = time.monotonic()
    _, rep = solve_dirichlet(sin_perturbed_boundary(2, 1.0, 0.1), 1.0, 65, 1.0)
    elapsed = time.monotonic() - started
    hist = [r for r in rep.residual_history if r > 1e-13]
    ratios = [b / a for a, b in zip(hist, hist[1:])]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] <= 0.2 * ratios[0] and ratios[-1] <= 1e-2
    assert elapsed <= 30.0
    print(f"\n[criterion 6] PASS: quadratic reproduced to {quad_err:.2e}, "
          f"manufactured order {order:.3f} in [1.9, 2.1], Newton ratios "
          f"{['%.1e' % r for r in ratios]} strictly decreasing")


def test_criterion_7_superharmonicity(perturbed_pipeline):
    cfg = TransformConfig(n=2, K=1.0)
    pos = {}
    prop_ok = True
    for m in (33, 65):
        grid, _ = perturbed_pipeline[(m, 0.05)]
        w = transform_grid(grid, cfg)
        lap, diag = superharmonicity_residual(w, cfg, return_diagnostics=True)
        pos[m] = diag["max_positive"]
        prop_ok &= diag["proportionality_dev"] <= tol.PROPORTIONALITY_TOL * diag["proportionality_scale"]
    assert prop_ok, "pointwise proportionality Delta_H a = sigma_n Delta_G a failed"
    factor = pos[33] / max(pos[65], 1e-300)
    assert pos[65] <= pos[33] / 1.8 + 1e-12, f"refinement factor {factor:.2f} < 1.8"
    print(f"\n[criterion 7] PASS: positive part of Delta_H a shrinks by "
          f"{factor:.2f} >= 1.8 under h -> h/2 ({pos[33]:.3e} -> {pos[65]:.3e}); "
          f"proportionality holds to 1e-10")


def test_criterion_8_liouville_mechanism():
    started = time.monotonic()
    result = scaling_experiment(gauss_perturbed_boundary(2, 0.1), [1.0, 2.0, 4.0, 8.0],
                                65, 1.0)
    elapsed = time.monotonic() - started
    oscs = [r.osc for r in result.rows]
    assert result.strictly_decreasing, f"oscillations not decreasing: {oscs}"
    assert result.alpha_hat > 0.0
    assert elapsed <= 600.0
    print(f"\n[criterion 8] PASS: half-box Hessian oscillation strictly decreasing "
          f"{['%.2e' % o for o in oscs]} with alpha_hat = {result.alpha_hat:.2f} > 0 "
          f"({elapsed:.0f}s)")


def test_criterion_9_determinism(monkeypatch):
    def margins(workers, env=None):
        if env:
            monkeypatch.setenv("S2WB_THREADS", env)
        else:
            monkeypatch.delenv("S2WB_THREADS", raising=False)
        jac, _ = run_jacobi_verification(4, 5.0, 12000, SEED, workers=workers)
        tra, _ = run_transform_verification(3, 1.0, 8000, SEED, ray=True, workers=workers)
        rem, _ = run_remark_ratio(8000, SEED, workers=workers)
        payload = [(c.name, c.count, c.failures, c.worst, c.witness)
                   for c in jac + tra + rem]
        return json.dumps(payload, sort_keys=True)

    base = margins(1)
    assert margins(3) == base
    assert margins(1, env="5") == base
    monkeypatch.delenv("S2WB_THREADS", raising=False)

    # solver path: repeated runs reproduce grids bit-exactly
    g1, r1 = solve_dirichlet(sin_perturbed_boundary(2, 1.0, 0.1), 1.0, 33, 1.0)
    g2, r2 = solve_dirichlet(sin_perturbed_boundary(2, 1.0, 0.1), 1.0, 33, 1.0)
    assert np.array_equal(g1.values, g2.values)
    assert r1.residual_history == r2.residual_history
    print("\n[criterion 9] PASS: margins and witnesses bit-identical across "
          "worker counts 1, 3 and S2WB_THREADS=5; solver reruns bit-identical")
