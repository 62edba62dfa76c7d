import numpy as np
import pytest
from conftest import W1, W2_SEGMENT, seeds
from hypothesis import given, settings
from scipy.stats import chisquare

import oracles
from palmtree.stats import (
    MeasureKind,
    MeasureSpec,
    exp_family_log_density,
    fermat_weber,
    fermat_weber_objective,
    frechet_mean,
    frechet_objective,
    frechet_variance,
    grid_center,
    sample_base,
    sample_exp_family,
    tropical_frechet_objective,
)
from palmtree.topology import enumerate_rooted_topologies, topology_of
from palmtree.treespace import check_three_point
from palmtree.tropical import trop_dist, trop_segment
from palmtree.vectors import MetricVector

CENTER = tuple(0.5 * np.array(W1))


class TestFermatWeber:
    def test_single_point(self):
        res = fermat_weber([(0.0, 1.0, 2.0)])
        assert res.objective == 0 and res.point.isclose((0.0, 1.0, 2.0))

    def test_two_points(self, rng):
        x, y = rng.normal(size=(2, 4))
        res = fermat_weber([x, y])
        assert res.objective == pytest.approx(trop_dist(x, y), abs=1e-9)
        for bp in trop_segment(x, y).breakpoints:
            assert fermat_weber_objective(bp.vector, [x, y]) == pytest.approx(trop_dist(x, y), abs=1e-9)

    @settings(max_examples=25)
    @given(seeds)
    def test_matches_highs(self, seed):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(int(rng.integers(2, 7)), int(rng.integers(2, 6))))
        assert fermat_weber(pts).objective == pytest.approx(oracles.fermat_weber_lp(pts), abs=1e-8)

    def test_local_optimality(self, rng):
        pts = rng.normal(size=(6, 4))
        res = fermat_weber(pts)
        for i in range(4):
            for eps in (1e-3, -1e-3):
                y = res.point.coords.copy()
                y[i] += eps
                assert fermat_weber_objective(y, pts) >= res.objective - 1e-12

    def test_grid_oracle(self, rng):
        pts = rng.uniform(-1, 1, size=(3, 3))
        assert fermat_weber(pts).objective == pytest.approx(grid_center(pts, squared=False).objective, abs=0.02)

    def test_tropical_square_is_twice_fw(self, rng):
        pts = rng.normal(size=(5, 3))
        y = rng.normal(size=3)
        assert tropical_frechet_objective(y, pts) == pytest.approx(2 * fermat_weber_objective(y, pts))


class TestFrechet:
    def test_single_point(self):
        assert frechet_mean([(1.0, 2.0, 3.0)]).point.isclose((1.0, 2.0, 3.0))

    def test_two_points(self, rng):
        x, y = rng.normal(size=(2, 3))
        res = frechet_mean([x, y])
        assert res.objective == pytest.approx(trop_dist(x, y) ** 2 / 2, rel=1e-6)

    def test_grid_oracle(self, rng):
        pts = rng.uniform(-1, 1, size=(5, 3))
        got = frechet_mean(pts).objective
        ref = grid_center(pts, squared=True).objective
        assert got <= ref * 1.01

    def test_variance(self):
        assert frechet_variance([W1, W2_SEGMENT], W1) == pytest.approx(3.2**2 / 2)
        assert frechet_variance([W1, W1], W1) == pytest.approx(0.0, abs=1e-24)

    def test_variance_minimised_at_mean(self, rng):
        pts = rng.normal(size=(6, 3))
        y = frechet_mean(pts).point.coords
        base = frechet_variance(pts, y)
        for _ in range(50):
            assert frechet_variance(pts, y + rng.normal(scale=1e-2, size=3)) >= base - 1e-9
        assert frechet_objective(y, pts) == pytest.approx(6 * base)

    def test_grid_in_plane(self):
        assert grid_center([(0.0, 0.0), (0.0, 1.0)], squared=True).objective == pytest.approx(0.5)


class TestSampling:
    def test_uniform_topologies(self):
        spec = MeasureSpec(MeasureKind.BASE, 4)
        draws = sample_base(spec, seed=7, count=15_000)
        tops = enumerate_rooted_topologies(4)
        index = {f: k for k, f in enumerate(tops)}
        counts = np.bincount([index[topology_of(MetricVector(4, w))] for w in draws], minlength=15)
        assert chisquare(counts).pvalue > 1e-3

    def test_samples_are_ultrametrics_of_the_right_height(self):
        spec = MeasureSpec(MeasureKind.BASE, 6, height_cap=1.5)
        for w in sample_base(spec, seed=2, count=300):
            assert check_three_point(MetricVector(6, w)).ok
            assert w.max() == pytest.approx(3.0)

    def test_seed_determinism_and_prefixes(self):
        spec = MeasureSpec(MeasureKind.BASE, 5)
        a = sample_base(spec, seed=11, count=3000)
        assert np.array_equal(a, sample_base(spec, seed=11, count=3000))
        assert np.array_equal(a[:100], sample_base(spec, seed=11, count=100))
        assert not np.array_equal(a[:100], sample_base(spec, seed=12, count=100))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            MeasureSpec(MeasureKind.EXP_FAMILY, 4)
        with pytest.raises(ValueError):
            MeasureSpec(MeasureKind.EXP_FAMILY, 4, center=(1, 2, 4, 1, 1, 1), scale=1.0)
        with pytest.raises(ValueError):
            sample_base(MeasureSpec(MeasureKind.BASE, 8))

    def test_monotone_in_scale(self):
        means = []
        for scale in (0.05, 0.2, 1.0):
            spec = MeasureSpec(MeasureKind.EXP_FAMILY, 4, center=CENTER, scale=scale)
            w, rate = sample_exp_family(spec, seed=3, count=400)
            assert 0 < rate <= 1
            means.append(np.mean([trop_dist(x, CENTER) for x in w]))
        assert means[0] < means[1] < means[2]

    def test_large_scale_matches_base(self):
        spec = MeasureSpec(MeasureKind.EXP_FAMILY, 4, center=CENTER, scale=1e9)
        w, rate = sample_exp_family(spec, seed=5, count=4000)
        base = sample_base(MeasureSpec(MeasureKind.BASE, 4), seed=6, count=4000)
        a = np.mean([trop_dist(x, CENTER) for x in w])
        b = np.mean([trop_dist(x, CENTER) for x in base])
        assert rate == pytest.approx(1.0, abs=1e-3)
        assert a == pytest.approx(b, abs=0.03)

    def test_log_density_ratio(self):
        spec = MeasureSpec(MeasureKind.EXP_FAMILY, 4, center=CENTER, scale=0.3)
        a, b = sample_exp_family(spec, seed=1, count=2)[0]
        ratio = np.exp(exp_family_log_density(a, spec) - exp_family_log_density(b, spec))
        expected = np.exp(-(trop_dist(a, CENTER) - trop_dist(b, CENTER)) / 0.3)
        assert ratio == pytest.approx(expected)

    def test_low_acceptance_aborts(self):
        spec = MeasureSpec(MeasureKind.EXP_FAMILY, 4, center=CENTER, scale=1e-4)
        with pytest.raises(ValueError, match="acceptance"):
            sample_exp_family(spec, seed=0, count=10)
