import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from mmls import (ConfigError, DegenerateNeighborhoodError, MmlsConfig, PointCloud, WeightFunction,
                  mls_function_approx, project_cloud, project_point, weighted_poly_fit)
from mmls.frame import AffineFrame, find_local_frame
from mmls.harness import SyntheticManifold, sample_manifold
from mmls.project import fit_over_frame, monomial_exponents

from conftest import random_plane_cloud


class TestPolyFit:
    def test_reproduces_polynomial(self, rng):
        x = rng.uniform(-1, 1, (40, 2))
        vals = np.stack([1 + 2 * x[:, 0] - x[:, 1] ** 2, x[:, 0] * x[:, 1]], axis=1)
        fit = weighted_poly_fit(x, vals, rng.uniform(0.1, 1, 40), 2, scale=0.5)
        probe = rng.uniform(-1, 1, (5, 2))
        expect = np.stack([1 + 2 * probe[:, 0] - probe[:, 1] ** 2, probe[:, 0] * probe[:, 1]], axis=1)
        assert np.allclose(fit(probe), expect, atol=1e-12)

    def test_constant_data(self, rng):
        x = rng.uniform(-1, 1, (12, 1))
        fit = weighted_poly_fit(x, np.full((12, 3), 2.5), np.ones(12), 3)
        assert np.allclose(fit.coefficients[0], 2.5, atol=1e-12)
        assert np.allclose(fit.coefficients[1:], 0.0, atol=1e-10)

    def test_square_coefficients(self):
        x = np.array([-1.0, 0.0, 1.0])
        fit = weighted_poly_fit(x, x ** 2, np.ones(3), 2)
        assert np.allclose(fit.coefficients[:, 0], [0.0, 0.0, 1.0], atol=1e-14)

    def test_too_few_distinct_points(self):
        x = np.array([0.0, 1.0, 1.0, 0.0])
        with pytest.raises(DegenerateNeighborhoodError) as info:
            weighted_poly_fit(x, x, np.ones(4), 2)
        assert info.value.rank == 2 and info.value.required == 3

    def test_graded_order(self):
        assert monomial_exponents(2, 2).tolist() == [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]]

    def test_joint_equals_per_coordinate(self, rng):
        x = rng.uniform(-1, 1, (30, 2))
        vals = rng.standard_normal((30, 6))
        w = rng.uniform(0.01, 1, 30)
        joint = weighted_poly_fit(x, vals, w, 2).coefficients
        single = np.column_stack([weighted_poly_fit(x, vals[:, k], w, 2).coefficients[:, 0]
                                  for k in range(6)])
        assert np.max(np.abs(joint - single)) < 1e-12


class TestProjectPoint:
    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_plane_reproduction(self, rng, m):
        cloud, origin, basis = random_plane_cloud(rng, 7, 2, 300)
        normal = sla.null_space(basis.T)
        foot = origin + basis @ [0.15, -0.3]
        cfg = MmlsConfig(d=2, m=m, sigma=0.6)
        res = project_point(cloud, foot + normal @ rng.standard_normal(5) * 0.05, cfg)
        assert np.linalg.norm(res.projected - foot) < 1e-8
        assert res.ok and res.converged and res.flags == []

    def test_helix_idempotence(self, helix_cloud, helix_config):
        diam = helix_cloud.diameter
        out = np.array([r.projected for r in project_cloud(helix_cloud, helix_cloud.points[::8],
                                                           helix_config)])
        again = np.array([r.projected for r in project_cloud(helix_cloud, out, helix_config)])
        err = np.linalg.norm(again - out, axis=1)
        assert np.mean(err <= 1e-6 * diam) >= 0.95

    def test_basis_choice_does_not_matter(self, helix_cloud, helix_config):
        cloud = sample_manifold(SyntheticManifold("sphere"), 300, seed=1)
        cfg = MmlsConfig(d=2, m=2).resolve(cloud)
        r = cloud.points[11] * 1.02
        frame, report = find_local_frame(cloud, r, 2, cfg.theta)
        rot = np.array([[np.cos(0.7), -np.sin(0.7)], [np.sin(0.7), np.cos(0.7)]])
        other = AffineFrame(frame.origin, frame.basis @ rot, frame.constraint_residual)
        a = fit_over_frame(cloud, frame, cfg, report).projected
        b = fit_over_frame(cloud, other, cfg, report).projected
        assert np.linalg.norm(a - b) < 1e-10

    def test_rigid_motion(self, helix_cloud, helix_config, rng):
        rot, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        shift = np.array([3.0, -1.0, 0.5])
        moved = PointCloud(helix_cloud.points @ rot.T + shift)
        cfg = MmlsConfig(d=1, m=2, sigma=helix_config.sigma)
        for r in helix_cloud.points[::67]:
            a = project_point(helix_cloud, r, cfg).projected
            b = project_point(moved, rot @ r + shift, cfg).projected
            assert np.linalg.norm(b - (rot @ a + shift)) < 1e-8

    def test_degree_fallback(self):
        pts = np.array([[0.0, 0.0]] * 3 + [[1.0, 0.0]] * 3)
        res = project_point(PointCloud(pts), [0.5, 0.1], MmlsConfig(d=1, m=2, sigma=5.0))
        assert res.degree_used == 1 and "degree-fallback" in res.flags
        assert np.allclose(res.projected, [0.5, 0.0], atol=1e-10)
        with pytest.raises(DegenerateNeighborhoodError):
            project_point(PointCloud(pts), [0.5, 0.1], MmlsConfig(d=1, m=2, sigma=5.0, fallback=False))

    def test_intrinsic_dim_must_be_below_ambient(self):
        with pytest.raises(ConfigError):
            project_point(PointCloud(np.eye(3)), [0, 0, 0], MmlsConfig(d=3, sigma=1.0))

    def test_smooth_along_segment(self, helix_cloud, helix_config):
        a, b = np.array([0.0, 1.3, -0.5]), np.array([0.0, 0.7, 0.5])
        second, third = [], []
        for count in (41, 81, 161):
            t = np.linspace(0, 1, count)
            step = t[1]
            pts = np.array([r.projected for r in project_cloud(helix_cloud, a + t[:, None] * (b - a),
                                                               helix_config)])
            second.append(np.abs(np.diff(pts, 2, axis=0)).max() / step ** 2)
            third.append(np.abs(np.diff(pts, 3, axis=0)).max() / step ** 2)
        assert max(second) / min(second) < 1.2
        assert third[2] < 0.7 * third[0]

    @pytest.mark.parametrize("m", [1, 2])
    def test_order_on_circle(self, m):
        hs, errs = [], []
        # the default bandwidth spans ~15 points, so coarse clouds see half the circle
        for count in (256, 512, 1024):
            cloud = sample_manifold(SyntheticManifold("circle"), count)
            cfg = MmlsConfig(d=1, m=m).resolve(cloud)
            ang = np.linspace(0, 2 * np.pi, 24, endpoint=False) + 0.01
            probes = 1.01 * np.column_stack([np.cos(ang), np.sin(ang)])
            out = np.array([r.projected for r in project_cloud(cloud, probes, cfg)])
            errs.append(np.abs(np.linalg.norm(out, axis=1) - 1).max())
            hs.append(2 * np.pi / count)
        assert np.polyfit(np.log(hs), np.log(errs), 1)[0] >= m + 0.7


class TestProjectCloud:
    def test_empty_queries(self, helix_cloud, helix_config):
        assert project_cloud(helix_cloud, np.empty((0, 3)), helix_config) == []

    def test_singleton(self):
        out = project_cloud(PointCloud([[0.0, 1.0]]), [[0.0, 1.0]], MmlsConfig(d=1, sigma=1.0))
        assert len(out) == 1 and not out[0].ok
        assert out[0].flags == ["degenerate-neighborhood"] and np.isnan(out[0].projected).all()

    def test_batch_matches_single_calls(self, helix_cloud, helix_config):
        q = helix_cloud.points[:12]
        batch = project_cloud(helix_cloud, q, helix_config)
        for r, res in zip(q, batch):
            assert np.array_equal(project_point(helix_cloud, r, helix_config).projected, res.projected)

    def test_threads_are_identical(self, helix_cloud, helix_config):
        q = helix_cloud.points[:40]
        a = project_cloud(helix_cloud, q, helix_config)
        b = project_cloud(helix_cloud, q, helix_config, workers=4)
        assert all(np.array_equal(x.projected, y.projected) for x, y in zip(a, b))

    def test_failures_are_collected(self, helix_cloud, helix_config):
        q = np.vstack([helix_cloud.points[:2], [[1e6, 0, 0]]])
        out = project_cloud(helix_cloud, q, MmlsConfig(d=1, m=2, weight="bump",
                                                       sigma=helix_config.sigma))
        assert [r.ok for r in out] == [True, True, False]
        assert out[2].flags == ["no-support"]


class TestFunctionMls:
    def test_reproduces_quadratic(self):
        xs = np.linspace(0, 1, 21)
        val = mls_function_approx(xs, 1 + xs - 3 * xs ** 2, 0.37, 2, WeightFunction.gaussian(0.2))
        assert val == pytest.approx(1 + 0.37 - 3 * 0.37 ** 2, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-5, 5), st.floats(0.0, 1.0))
    def test_reproduces_constants(self, c, x):
        xs = np.linspace(0, 1, 15)
        val = mls_function_approx(xs, np.full(15, c), x, 1, WeightFunction.gaussian(0.3))
        assert val == pytest.approx(c, abs=1e-12)

    def test_second_order_halving(self):
        errs = []
        for h in (0.05, 0.025, 0.0125):
            xs = np.arange(0, 1 + h / 2, h)
            probes = np.linspace(0, 1, 101)  # interior alone superconverges
            theta = WeightFunction.gaussian(3 * h)
            errs.append(max(abs(mls_function_approx(xs, np.sin(xs), x, 2, theta) - np.sin(x))
                            for x in probes))
        ratios = [errs[i] / errs[i + 1] for i in range(2)]
        assert all(6 <= r <= 10 for r in ratios)
