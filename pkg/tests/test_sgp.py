import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geovad.attention import AttentionParams, build_sparse_attention
from geovad.errors import OutOfInterval
from geovad.prototypes import PrototypeBank
from geovad.sgp import (
    AmbiguityInterval,
    DominantSet,
    SgpParams,
    Tri,
    adaptive_beta,
    mad_interval,
    min_abnormal_count,
    neighbor_assign,
    sgp_video,
    tri_classify,
    vote_dominant,
)
from geovad.sphere import geodesic_distance, normalize, slerp
from geovad.vmf import vmf_score

from conftest import e, random_units

P = SgpParams()


def radius_oracle(mad, p=P):
    return p.r_min + (p.r_max - p.r_min) / (1.0 + math.exp(p.lambda_r * (mad - p.tau_r)))


class TestInterval:
    def test_zero_mad(self):
        iv = mad_interval([0.3] * 9, P)
        assert iv.mad == 0.0
        assert iv.radius == pytest.approx(0.05 + 0.20 / (1 + math.exp(-1.6)), abs=1e-15)
        assert iv.radius == pytest.approx(0.2164, abs=1e-4)

    def test_mad_at_tau_gives_midpoint_radius(self):
        # median 0.5, absolute deviations {0.08, 0, 0.08} -> MAD = 0.08
        iv = mad_interval([0.42, 0.5, 0.58], P)
        assert iv.mad == pytest.approx(0.08, abs=1e-15)
        assert iv.radius == pytest.approx(0.15, abs=1e-12)

    def test_large_mad_approaches_minimum(self):
        iv = mad_interval(np.linspace(0, 1, 11), P)
        assert iv.mad == pytest.approx(0.3)
        assert iv.radius == pytest.approx(P.r_min, abs=3e-3)

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=40))
    def test_radius_formula_and_bounds(self, scores):
        iv = mad_interval(scores, P)
        s = np.array(scores)
        mad = np.median(np.abs(s - np.median(s)))
        assert iv.radius == pytest.approx(radius_oracle(mad), abs=1e-12)
        assert P.r_min <= iv.radius <= P.r_max
        assert iv.rho_low <= 0.5 <= iv.rho_high

    @given(st.floats(0, 0.5), st.floats(0, 0.5))
    def test_radius_nonincreasing_in_mad(self, a, b):
        lo, hi = sorted([a, b])
        assert radius_oracle(hi) <= radius_oracle(lo)


class TestTriClassify:
    def test_three_way(self):
        iv = AmbiguityInterval(0.3, 0.7, 0.0, 0.2, 0.5)
        assert tri_classify([0.1, 0.5, 0.9], iv).tolist() == [Tri.NORM, Tri.AMB, Tri.ABN]

    def test_boundaries_are_ambiguous(self):
        iv = AmbiguityInterval(0.3, 0.7, 0.0, 0.2, 0.5)
        assert tri_classify([0.3, 0.7], iv).tolist() == [Tri.AMB, Tri.AMB]

    def test_no_ambiguous_when_scores_extreme(self):
        iv = AmbiguityInterval(0.45, 0.55, 0.0, 0.05, 0.5)
        assert Tri.AMB not in tri_classify([0.01, 0.99, 0.02], iv).tolist()


class TestMinCount:
    @pytest.mark.parametrize("t, expected", [(10, 3), (100, 3), (500, 10), (1000, 20), (149, 3), (150, 3), (200, 4)])
    def test_table(self, t, expected):
        assert min_abnormal_count(t, 0.02) == expected


def bank_2d():
    # prototypes in the (e0, e1) plane of R^4 plus spare directions
    norm = np.stack([e(4, 0), normalize([1, 0, 0.3, 0]), e(4, 2)])
    abn = np.stack([e(4, 1), normalize([0, 1, 0, 0.4]), e(4, 3), normalize([0.2, 1, 0, 0])])
    return PrototypeBank(norm, abn, 10.0)


class TestVote:
    def test_unanimous_anomalous_vote(self):
        bank = bank_2d()
        feats = np.stack([e(4, 3)] * 4 + [e(4, 0)] * 2)
        labels = np.array([Tri.ABN] * 4 + [Tri.NORM] * 2)
        dom = vote_dominant(feats, labels, bank, P, 6)
        assert not dom.fully_normal and dom.abn_index == 2
        np.testing.assert_array_equal(dom.abn, bank.abn_protos[2])

    def test_too_few_anomalous_clips(self):
        bank = bank_2d()
        feats = np.stack([e(4, 1)] * 2 + [e(4, 0)] * 98)
        labels = np.array([Tri.ABN] * 2 + [Tri.NORM] * 98)
        dom = vote_dominant(feats, labels, bank, P, 100)
        assert dom.fully_normal and dom.abn is None

    def test_top_two_normal_with_low_index_tiebreak(self):
        protos = np.eye(5)
        bank = PrototypeBank(protos, e(5, 4)[None], 10.0)
        # votes: p1 x5, p2 x3, p4 x3
        feats = np.stack([e(5, 1)] * 5 + [e(5, 2)] * 3 + [e(5, 4)] * 3)
        dom = vote_dominant(feats, np.full(11, Tri.NORM), bank, P, 11)
        assert dom.norm_indices == (1, 2)

    def test_single_normal_dominant_when_votes_agree(self):
        bank = bank_2d()
        dom = vote_dominant(np.stack([e(4, 0)] * 5), np.full(5, Tri.NORM), bank, P, 5)
        assert dom.norm_indices == (0,)

    def test_empty_normal_set_falls_back_to_centroid(self):
        bank = bank_2d()
        feats = np.stack([e(4, 1)] * 5)
        dom = vote_dominant(feats, np.full(5, Tri.ABN), bank, P, 5)
        expected = int(np.argmax(bank.norm_protos @ e(4, 1)))
        assert dom.norm_indices == (expected,)


class TestNeighborAssign:
    def dom(self, abn, norms):
        return DominantSet(abn, np.atleast_2d(norms), False)

    def test_margin_equality_goes_normal(self):
        # g = e0; sim_abn = cos(a), sim_norm = cos(b); pick b so sim_abn = sim_norm + margin
        a = 0.3
        b = math.acos(math.cos(a) - 0.01)
        f = np.stack([e(3, 0)])
        abn = np.array([math.cos(a), math.sin(a), 0.0])
        norm = np.array([math.cos(b), 0.0, math.sin(b)])
        assert (abn @ e(3, 0)) == pytest.approx((norm @ e(3, 0)) + 0.01, abs=1e-15)
        empty = build_sparse_attention(f, AttentionParams(tau=0.99))
        dom = self.dom(abn, norm)
        # move by a few ulps either side to probe the strict inequality
        assert not neighbor_assign([0], empty, f, dom, 0.01 + 1e-12)[0]
        assert neighbor_assign([0], empty, f, dom, 0.01 - 1e-12)[0]

    def test_isolated_clip_uses_own_feature(self):
        f = np.stack([e(3, 1), e(3, 0)])
        attn = build_sparse_attention(f, AttentionParams(tau=0.9))
        dom = self.dom(e(3, 1), e(3, 0))
        assert neighbor_assign([0], attn, f, dom, 0.01).tolist() == [True]

    def test_normal_neighbours_win(self):
        f = np.stack([normalize([0.5, 0.5, 0]), e(3, 0), e(3, 0)])
        attn = build_sparse_attention(np.stack([e(3, 2)] * 3), AttentionParams(tau=0.5))
        dom = self.dom(e(3, 1), e(3, 0))
        assert neighbor_assign([0], attn, f, dom, 0.01).tolist() == [False]

    def test_fully_normal_skips(self):
        f = np.stack([e(3, 1)])
        attn = build_sparse_attention(f, AttentionParams())
        dom = DominantSet(None, e(3, 0)[None], True)
        assert neighbor_assign([0], attn, f, dom, 0.0).tolist() == [False]


class TestAdaptiveBeta:
    IV = AmbiguityInterval(0.35, 0.65, 0.0, 0.15, 0.5)

    def test_centre_is_full_strength(self):
        assert adaptive_beta(0.5, self.IV, 0.4) == 0.4

    @pytest.mark.parametrize("score", [0.35, 0.65])
    def test_edges_are_half_strength(self, score):
        assert adaptive_beta(score, self.IV, 0.4) == 0.2

    def test_quarter_of_the_way(self):
        assert adaptive_beta(0.575, self.IV, 0.4) == pytest.approx(0.3, abs=1e-15)

    def test_outside_interval(self):
        with pytest.raises(OutOfInterval):
            adaptive_beta(0.66, self.IV, 0.4)

    @given(st.floats(0.35, 0.65), st.floats(0.01, 0.99))
    def test_bounds(self, score, beta):
        b = adaptive_beta(score, self.IV, beta)
        assert beta / 2 <= b <= beta


def scripted_video(rng, n_norm=40, n_abn=10, n_mid=10, t_mid=0.52):
    """Clips at a normal prototype, at an anomalous one, and around the midpoint."""
    d = 6
    mu_n, mu_a = e(d, 0), e(d, 1)
    bank = PrototypeBank(mu_n[None], mu_a[None], 10.0)
    mid = slerp(mu_n, mu_a, t_mid)
    feats = np.vstack([
        normalize(mu_n + 0.02 * rng.standard_normal((n_norm, d))),
        normalize(mu_a + 0.02 * rng.standard_normal((n_abn, d))),
        normalize(mid + 0.01 * rng.standard_normal((n_mid, d))),
    ])
    # visual stream: midpoint clips look like the anomalous ones
    vis = np.vstack([np.tile(e(d, 2), (n_norm, 1)), np.tile(e(d, 3), (n_abn + n_mid, 1))])
    vis = normalize(vis + 0.05 * rng.standard_normal(vis.shape))
    labels = np.r_[np.zeros(n_norm), np.ones(n_abn + n_mid)]
    return feats, vis, bank, labels


class TestSgpVideo:
    def test_single_clip_pulls_toward_normal(self):
        bank = PrototypeBank(e(3, 0)[None], e(3, 1)[None], 10.0)
        f = slerp(e(3, 0), e(3, 1), 0.5)[None]
        s0 = np.atleast_1d(vmf_score(f, bank))
        res = sgp_video(f, f, s0, bank, P)
        assert res.dominant.fully_normal
        expected = slerp(f[0], e(3, 0), adaptive_beta(s0[0], res.interval, P.beta_base))
        np.testing.assert_allclose(res.features[0], expected, atol=1e-12)
        assert res.scores[0] == pytest.approx(vmf_score(expected, bank), abs=1e-12)
        assert res.scores[0] < s0[0]

    def test_no_ambiguous_clips_is_identity(self, rng):
        bank = PrototypeBank(e(4, 0)[None], e(4, 1)[None], 10.0)
        f = normalize(e(4, 0) + 0.05 * rng.standard_normal((20, 4)))
        s0 = np.atleast_1d(vmf_score(f, bank))
        res = sgp_video(f, f, s0, bank, P)
        assert res.amb_indices.size == 0
        np.testing.assert_array_equal(res.features, f)
        np.testing.assert_allclose(res.scores, s0, atol=1e-9)

    def test_midpoint_clips_are_pulled_apart(self, rng):
        feats, vis, bank, labels = scripted_video(rng)
        s0 = np.atleast_1d(vmf_score(feats, bank))
        res = sgp_video(feats, vis, s0, bank, P)
        assert res.amb_indices.size > 0 and res.amb_is_abn.all()
        before = s0[labels == 1].min() - s0[labels == 0].max()
        after = res.scores[labels == 1].min() - res.scores[labels == 0].max()
        assert after > before
        # oracle: hand-pull each ambiguous clip toward the anomalous prototype
        for i, beta in zip(res.amb_indices, res.betas):
            hand = slerp(feats[i], bank.abn_protos[0], beta)
            assert res.scores[i] == pytest.approx(vmf_score(hand, bank), abs=1e-12)

    @given(st.integers(0, 5000))
    def test_invariants(self, seed):
        rng = np.random.default_rng(seed)
        feats, vis, bank, _ = scripted_video(rng, 20, 6, 6)
        s0 = np.clip(np.atleast_1d(vmf_score(feats, bank)) + 0.1 * rng.standard_normal(len(feats)), 0, 1)
        res = sgp_video(feats, vis, s0, bank, P)
        np.testing.assert_allclose(np.linalg.norm(res.features, axis=1), 1.0, atol=1e-9)
        untouched = np.setdiff1d(np.arange(len(feats)), res.amb_indices)
        np.testing.assert_array_equal(res.features[untouched], feats[untouched])
        assert np.all((res.betas >= P.beta_base / 2) & (res.betas <= P.beta_base))
        for n, i in enumerate(res.amb_indices):
            if res.dominant.fully_normal or not res.amb_is_abn[n]:
                target = res.dominant.norms[int(np.argmax(res.dominant.norms @ feats[i]))]
            else:
                target = res.dominant.abn
            omega = geodesic_distance(feats[i], target)
            if np.sin(omega) >= 1e-6:
                assert geodesic_distance(res.features[i], target) == pytest.approx((1 - res.betas[n]) * omega, abs=1e-7)
        again = sgp_video(feats, vis, s0, bank, P)
        np.testing.assert_array_equal(again.scores, res.scores)

    def test_fully_normal_never_pulls_toward_anomalous(self, rng):
        feats, vis, bank, _ = scripted_video(rng, 40, 2, 10, t_mid=0.5)
        s0 = np.atleast_1d(vmf_score(feats, bank))
        res = sgp_video(feats, vis, s0, bank, P)
        assert res.dominant.fully_normal
        for i in res.amb_indices:
            assert geodesic_distance(res.features[i], bank.norm_protos[0]) < geodesic_distance(feats[i], bank.norm_protos[0])

    def test_unpacks_as_pair(self, rng):
        feats, vis, bank, _ = scripted_video(rng, 5, 3, 2)
        scores, pulled = sgp_video(feats, vis, np.full(len(feats), 0.5), bank, P)
        assert scores.shape == (10,) and pulled.shape == feats.shape
