"""Acceptance gate. Each test records a PASS/FAIL line shown in the terminal summary."""

import time

import numpy as np
import pytest
import scipy.linalg as sla

from mmls import (MmlsConfig, WeightFunction, find_local_frame, iterative_ls_subspace,
                  mls_function_approx, principal_angles, project_cloud, subspace_iteration,
                  weighted_pca, weighted_poly_fit)
from mmls.frame import AffineFrame
from mmls.harness import (NoiseModel, SyntheticManifold, measure_linear_scaling,
                          run_convergence_study, run_denoise_experiment, sample_manifold)
from mmls.project import fit_over_frame
from mmls.wpca import max_principal_angle

from conftest import random_plane_cloud

HELIX_NOISE = NoiseModel("uniform-box", 0.2, seed=0)


@pytest.fixture(scope="module")
def helix_run():
    spec = SyntheticManifold("helix")
    cfg = MmlsConfig(d=1, m=2, fixed_iterations=3)
    t0 = time.perf_counter()
    rep = run_denoise_experiment(spec, 400, HELIX_NOISE, cfg, seed=0)
    elapsed = time.perf_counter() - t0
    cloud = sample_manifold(spec, 400, noise=HELIX_NOISE, seed=0)
    return spec, cloud, rep, elapsed


@pytest.mark.parametrize("m, lo, hi", [(2, 2.5, 3.5), (1, 1.6, 2.4)])
def test_1_convergence_order(m, lo, hi, criterion):
    t0 = time.perf_counter()
    rep = run_convergence_study(SyntheticManifold("circle"), m, [128, 256, 512, 1024])
    elapsed = time.perf_counter() - t0
    slope = rep.slope
    ok = slope is not None and lo <= slope <= hi and elapsed < 60 and rep.failures == 0
    criterion(f"1 circle m={m}", ok,
              f"slope={slope:.3f} target [{lo}, {hi}], {elapsed:.1f}s, failures={rep.failures}")
    assert rep.failures == 0 and elapsed < 60
    assert lo <= slope <= hi


def test_2_helix_denoise(helix_run, criterion):
    _, _, rep, elapsed = helix_run
    factor = rep.manifold_rmse_before / rep.manifold_rmse_after
    twin = rep.rmse_before / rep.rmse_to_truth
    ok = factor >= 2 and elapsed < 10 and rep.failures == 0
    criterion("2 helix", ok, f"distance-to-helix RMSE {rep.manifold_rmse_before:.4f} -> "
              f"{rep.manifold_rmse_after:.4f} ({factor:.2f}x), clean-twin RMSE {twin:.2f}x, "
              f"{elapsed:.2f}s")
    assert rep.failures == 0 and elapsed < 10
    assert factor >= 2


def test_3_idempotence(helix_run, criterion):
    _, cloud, _, _ = helix_run
    cfg = MmlsConfig(d=1, m=2).resolve(cloud)
    once = np.array([r.projected for r in project_cloud(cloud, cloud.points, cfg)])
    twice = np.array([r.projected for r in project_cloud(cloud, once, cfg)])
    err = np.linalg.norm(twice - once, axis=1)
    frac = float(np.mean(err <= 1e-6 * cloud.diameter))
    criterion("3 idempotence", frac >= 0.99,
              f"{100 * frac:.2f}% within 1e-6 x diameter (p99 {np.quantile(err, 0.99):.2e})")
    assert frac >= 0.99


def test_4_frame_constraint(helix_run, criterion):
    _, cloud, _, _ = helix_run
    cfg = MmlsConfig(d=1, m=2).resolve(cloud)
    worst_c, worst_o, converged = 0.0, 0.0, 0
    for r in cloud.points:
        frame, report = find_local_frame(cloud, r, 1, cfg.theta)
        if not report.converged:
            continue
        converged += 1
        worst_c = max(worst_c, frame.constraint_residual / cloud.diameter)
        gram = frame.basis.T @ frame.basis
        worst_o = max(worst_o, np.abs(gram - np.eye(1)).max())
    ok = worst_c <= 1e-8 and worst_o <= 1e-10 and converged > 0
    criterion("4 frame constraint", ok, f"{converged} converged frames, constraint "
              f"{worst_c:.1e} x diameter, orthonormality {worst_o:.1e}")
    assert ok


def test_5a_weighted_pca_oracle(criterion):
    rng = np.random.default_rng(51)
    worst = 0.0
    for _ in range(100):
        count, n = rng.integers(6, 30), rng.integers(2, 9)
        d = int(rng.integers(1, n))
        pts = rng.standard_normal((count, n)) * rng.uniform(0.1, 3, n)
        q = rng.standard_normal(n)
        w = rng.uniform(0.01, 1, count)
        explicit = np.column_stack([np.sqrt(w[i]) * (pts[i] - q) for i in range(count)])
        ref = np.linalg.svd(explicit)[0][:, :d]
        worst = max(worst, np.max(principal_angles(weighted_pca(pts, q, w, d), ref)))
    criterion("5a weighted PCA vs SVD", worst < 1e-8, f"max angle {worst:.1e}")
    assert worst < 1e-8


def test_5b_iterative_ls_oracle(criterion):
    rng = np.random.default_rng(52)
    worst = 0.0
    for _ in range(20):
        pts = rng.standard_normal((40, 6)) * [3, 2, 1.5, 1, 0.5, 0.2]
        u0 = np.linalg.qr(rng.standard_normal((6, 2)))[0]
        for k in range(1, 9):
            a = iterative_ls_subspace(pts, u0, k)
            b = subspace_iteration(pts.T, u0, k)
            worst = max(worst, np.max(principal_angles(a, b)))
    criterion("5b iterative LS vs subspace iteration", worst < 1e-8, f"max angle {worst:.1e}")
    assert worst < 1e-8


def test_5c_joint_fit_oracle(criterion):
    rng = np.random.default_rng(53)
    worst = 0.0
    for d, m in [(1, 2), (2, 2), (2, 3), (3, 1)]:
        x = rng.uniform(-1, 1, (60, d))
        vals = rng.standard_normal((60, 5))
        w = rng.uniform(0.05, 1, 60)
        joint = weighted_poly_fit(x, vals, w, m).coefficients
        single = np.column_stack([weighted_poly_fit(x, vals[:, k], w, m).coefficients[:, 0]
                                  for k in range(5)])
        worst = max(worst, np.abs(joint - single).max())
    criterion("5c joint vs per-coordinate fit", worst < 1e-12, f"max difference {worst:.1e}")
    assert worst < 1e-12


def test_6_plane_and_graph_reproduction(criterion):
    rng = np.random.default_rng(6)
    plane_worst = 0.0
    for n in (3, 8, 16, 64):
        for d in (1, 2):
            cloud, origin, basis = random_plane_cloud(rng, n, d, 300)
            normal = sla.null_space(basis.T)
            for m in (1, 2, 3):
                cfg = MmlsConfig(d=d, m=m).resolve(cloud)
                foot = origin + basis @ rng.uniform(-0.5, 0.5, d)
                r = foot + normal @ rng.standard_normal(n - d) * 0.05
                out = project_cloud(cloud, [r], cfg)[0].projected
                plane_worst = max(plane_worst, np.linalg.norm(out - foot))
    graph_worst = 0.0
    for d, m in [(1, 1), (1, 2), (1, 3), (2, 2), (2, 3)]:
        x = rng.uniform(-1, 1, (300, d))
        coef = rng.standard_normal((3, d + 1))
        height = np.column_stack([sum(c[j] * x[:, j] ** m for j in range(d)) + c[d] * x[:, 0]
                                  for c in coef])
        pts = np.hstack([x, height])
        cfg = MmlsConfig(d=d, m=m, sigma=0.5)
        x0 = rng.uniform(-0.3, 0.3, d)
        frame = AffineFrame(np.r_[x0, np.zeros(3)], np.eye(d + 3)[:, :d])
        out = fit_over_frame(pts, frame, cfg).projected
        exact = np.r_[x0, [sum(c[j] * x0[j] ** m for j in range(d)) + c[d] * x0[0] for c in coef]]
        graph_worst = max(graph_worst, np.abs(out - exact).max())
    ok = plane_worst < 1e-8 and graph_worst < 1e-7
    criterion("6 plane and graph reproduction", ok,
              f"plane residual {plane_worst:.1e}, graph residual {graph_worst:.1e}")
    assert ok


def test_7_subspace_iteration_rate(criterion):
    rng = np.random.default_rng(7)
    n, d = 12, 2
    left = np.linalg.qr(rng.standard_normal((n, n)))[0]
    right = np.linalg.qr(rng.standard_normal((n, n)))[0]
    sv = np.array([9.0, 6.0, 2.0, 1.5, 1.0] + [0.5] * (n - 5))  # sigma_3 / sigma_2 = 1/3
    mat = left @ np.diag(sv) @ right.T
    target = left[:, :d]
    u0 = np.linalg.qr(rng.standard_normal((n, d)))[0]
    angles = [max_principal_angle(subspace_iteration(mat, u0, k), target) for k in range(12)]
    factors = np.array(angles[3:]) / np.array(angles[2:-1])
    rate = float(np.median(factors))
    ok = 0.05 <= rate <= 0.2
    criterion("7 subspace iteration rate", ok, f"median contraction {rate:.4f} (ideal 1/9)")
    assert ok


def test_8_linear_scaling(criterion):
    rows = measure_linear_scaling(1, 2, [512, 1024])
    ratio = rows[1]["ratio"]
    equi = max(r["equivariance_error"] for r in rows)
    ok = 1.3 <= ratio <= 3.0 and equi < 1e-8
    criterion("8 linear in n", ok, f"time ratio 512->1024 {ratio:.2f}, equivariance {equi:.1e}")
    assert ok


def test_9_ellipse_images(criterion):
    spec = SyntheticManifold("ellipse-images", side=32)
    cfg = MmlsConfig(d=2, m=2, fixed_iterations=3)
    t0 = time.perf_counter()
    rep = run_denoise_experiment(spec, 144, NoiseModel("gaussian-iid", 0.05, seed=0), cfg,
                                 manifold_distance=False)
    elapsed = time.perf_counter() - t0
    ratio = rep.mean_truth_after / rep.mean_truth_before
    ok = ratio <= 0.7 and elapsed < 300 and rep.failures == 0
    criterion("9 ellipse images", ok, f"mean distance {rep.mean_truth_before:.3f} -> "
              f"{rep.mean_truth_after:.3f} (ratio {ratio:.3f}), {elapsed:.1f}s")
    assert ok


def test_10_function_mls(criterion):
    errs = []
    for h in (0.05, 0.025, 0.0125, 0.00625):
        xs = np.arange(0, 1 + h / 2, h)
        theta = WeightFunction.gaussian(3 * h)
        probes = np.linspace(0, 1, 201)
        errs.append(max(abs(mls_function_approx(xs, np.sin(xs), x, 2, theta) - np.sin(x))
                        for x in probes))
    ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
    ok = all(6 <= r <= 10 for r in ratios)
    criterion("10 function MLS", ok, "error ratios " + ", ".join(f"{r:.2f}" for r in ratios))
    assert ok
