import numpy as np
import pytest

from geovad import io as gio
from geovad.config import PipelineConfig, apply_overrides
from geovad.errors import DimensionMismatch
from geovad.pipeline import (
    calibrate_priors,
    expand_and_smooth,
    run_offline,
    run_online,
    score_with_priors,
)
from geovad.sphere import center_many, exp_map, frechet_mean, geodesic_distance
from geovad.synthgen import Cluster, WorldSpec, basis, direction, gen_two_class, preset_world, rotate_domain

FAST = PipelineConfig(n_init=3)
M1 = apply_overrides(FAST, {"enable_hsa": False, "enable_sgp": False})


@pytest.fixture(scope="module")
def world_a():
    return preset_world("A", 0)


@pytest.fixture(scope="module")
def world_b():
    return preset_world("B", 0)


class TestExpandSmooth:
    def test_constant(self):
        out = expand_and_smooth(np.full(7, 0.3), 4, 1.5)
        np.testing.assert_allclose(out, 0.3, atol=1e-15)
        assert out.shape == (28,)

    def test_zero_sigma_repeats(self):
        s = np.array([0.1, 0.9, 0.4])
        np.testing.assert_array_equal(expand_and_smooth(s, 3, 0.0), np.repeat(s, 3))

    def test_impulse_gives_discrete_gaussian(self):
        sigma = 2.5
        s = np.zeros(101)
        s[50] = 1.0
        out = expand_and_smooth(s, 1, sigma)
        r = int(np.ceil(4 * sigma))
        x = np.arange(-r, r + 1)
        w = np.exp(-x**2 / (2 * sigma**2))
        np.testing.assert_allclose(out[50 - r : 50 + r + 1], w / w.sum(), atol=1e-15)
        assert out.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(out[: 50 - r] == 0) and np.all(out[51 + r :] == 0)

    def test_reflective_edges(self):
        s = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
        out = expand_and_smooth(s, 1, 1.0)
        x = np.arange(-4, 5)
        w = np.exp(-x**2 / 2)
        w /= w.sum()
        # half-sample mirror: index -1 reflects to 0, -2 to 1
        assert out[0] == pytest.approx(w[4] + w[3], abs=1e-15)

    def test_clamped(self):
        out = expand_and_smooth(np.array([0.0, 1.0, 1.0, 0.0]), 2, 1.0)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            expand_and_smooth([], 4, 1.0)


class TestOffline:
    def test_counts_and_range(self, world_b):
        res = run_offline(world_b.dataset, world_b.syn_normal, world_b.syn_abn, FAST)
        for t, v in zip(res.traces, world_b.dataset.videos):
            assert t.video_id == v.id
            assert len(t.clip_scores_init) == len(t.clip_scores_final) == v.clip_count
            assert len(t.frame_scores) == v.clip_count * FAST.frames_per_clip
            for s in (t.clip_scores_init, t.clip_scores_final, t.frame_scores):
                assert np.all((s >= 0) & (s <= 1))

    def test_priors_are_unit(self, world_a):
        _, pri = run_offline(world_a.dataset, world_a.syn_normal, world_a.syn_abn, FAST)
        for v in (pri.unified_mean, pri.visual_mean):
            assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
        assert not pri.synthetic_only

    def test_zero_alpha_matches_disabled_attention(self, world_b):
        a = run_offline(world_b.dataset, world_b.syn_normal, world_b.syn_abn, apply_overrides(FAST, {"alpha_g": 0.0}))
        b = run_offline(world_b.dataset, world_b.syn_normal, world_b.syn_abn, apply_overrides(FAST, {"enable_hsa": False}))
        np.testing.assert_allclose(a.clip_scores(), b.clip_scores(), atol=1e-9)

    def test_m1_ignores_visual_stream(self, world_a):
        ds = world_a.dataset
        sentinel = gio.FeatureDataset(ds.dim, [
            gio.Video(v.id, v.main, np.tile(basis(ds.dim, 7), (v.clip_count, 1))) for v in ds.videos
        ], ds.labels)
        a = run_offline(ds, world_a.syn_normal, world_a.syn_abn, M1)
        b = run_offline(sentinel, world_a.syn_normal, world_a.syn_abn, M1)
        np.testing.assert_array_equal(a.frame_scores(), b.frame_scores())

    def test_m1_is_pure_vmf_on_centered(self, world_a):
        from geovad.vmf import vmf_score

        res = run_offline(world_a.dataset, world_a.syn_normal, world_a.syn_abn, M1)
        main, _, _ = world_a.dataset.stacked()
        c, _ = center_many(res.priors.unified_mean, main)
        np.testing.assert_array_equal(res.clip_scores(), vmf_score(c, res.priors.bank))

    def test_sgp_keeps_counts(self, world_b):
        on = run_offline(world_b.dataset, world_b.syn_normal, world_b.syn_abn, FAST)
        off = run_offline(world_b.dataset, world_b.syn_normal, world_b.syn_abn, apply_overrides(FAST, {"enable_sgp": False}))
        assert len(on.frame_scores()) == len(off.frame_scores())

    def test_thread_count_does_not_change_bits(self, world_b):
        a = run_offline(world_b.dataset, world_b.syn_normal, world_b.syn_abn, FAST, threads=1)
        b = run_offline(world_b.dataset, world_b.syn_normal, world_b.syn_abn, FAST, threads=4)
        assert a.frame_scores().tobytes() == b.frame_scores().tobytes()

    def test_too_few_synthetic(self, world_a):
        with pytest.raises(ValueError):
            run_offline(world_a.dataset, world_a.syn_normal[:3], world_a.syn_abn, FAST)

    def test_dimension_mismatch(self, world_a):
        with pytest.raises(DimensionMismatch):
            run_offline(world_a.dataset, world_a.syn_normal[:, :16], world_a.syn_abn[:, :16], FAST)


class TestOnline:
    def test_matches_offline_m1_with_synthetic_mean(self, world_a):
        cfg = apply_overrides(M1, {"mode": "online"})
        pri = calibrate_priors(world_a.dataset, world_a.syn_normal, world_a.syn_abn, cfg)
        assert pri.synthetic_only
        offline = score_with_priors(world_a.dataset, pri, cfg).clip_scores()
        main, vis, _ = world_a.dataset.stacked()
        online = np.array([o.score for o in run_online(zip(main, vis), pri, cfg)])
        np.testing.assert_allclose(online, offline, atol=1e-9)

    def test_normal_prototype_direction_scores_low(self, world_a):
        pri = calibrate_priors(None, world_a.syn_normal, world_a.syn_abn, M1)
        clip = exp_map(pri.unified_mean, 0.3 * pri.bank.norm_protos[0])
        out = list(run_online([clip] * 5, pri))
        assert all(o.score < 0.5 for o in out)
        assert len({o.score for o in out}) == 1

    def test_at_base_clip_is_flagged(self, world_a):
        pri = calibrate_priors(None, world_a.syn_normal, world_a.syn_abn, M1)
        (out,) = run_online([pri.unified_mean.copy()], pri)
        assert out.score == 0.5 and out.at_base

    def test_wrong_dimension(self, world_a):
        pri = calibrate_priors(None, world_a.syn_normal, world_a.syn_abn, M1)
        with pytest.raises(DimensionMismatch):
            list(run_online([np.ones(5)], pri))


def test_rotated_domain_bias_is_absorbed():
    # two domains related by a 5 degree rotation in the plane of the pole and the
    # class axis; after unified centering each class lines up across domains
    spec = WorldSpec(32, (Cluster(direction(32, {1: -30.0}), 100.0),), (Cluster(direction(32, {1: 30.0}), 100.0),),
                     syn_per_cluster=400, seed=3)
    x, lab = gen_two_class(spec)
    y = rotate_domain(x, basis(32, 0), basis(32, 1), 5.0)
    test = gio.FeatureDataset(32, [gio.Video("shifted", y, y)])
    pri = calibrate_priors(test, x[lab == 0], x[lab == 1], FAST)
    cx, _ = center_many(pri.unified_mean, x)
    cy, _ = center_many(pri.unified_mean, y)
    for c in (0, 1):
        before = np.degrees(geodesic_distance(frechet_mean(x[lab == c]).mean, frechet_mean(y[lab == c]).mean))
        after = np.degrees(geodesic_distance(frechet_mean(cx[lab == c]).mean, frechet_mean(cy[lab == c]).mean))
        assert before == pytest.approx(5.0, abs=0.2)
        assert after < 1.5
