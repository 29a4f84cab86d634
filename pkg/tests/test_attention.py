import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from picosum.attention import (
    AttentionConfig,
    AttentionMasks,
    AttentionTensors,
    MaskError,
    Setting,
    build_masks,
    dense_attention_oracle,
    local_global_attention,
    masks_to_dense,
    multi_head_attention,
    replace_padded_ids,
)
from picosum.packing import PackedInput
from picosum.tokenizer import WordTokenizer

_TOK = WordTokenizer()
SPECIAL = {
    "pad": _TOK.pad_id,
    "bos": _TOK.bos_id,
    "doc_sep": _TOK.doc_sep_id,
    "ent_open": _TOK.ent_open_id,
    "ent_close": _TOK.ent_close_id,
}
W, E1, E2 = 10, 11, 12


def seven_tokens(marking=True):
    # [w, <ent>, e1, e2, </ent>, w, <doc-sep>]
    ids = [W, SPECIAL["ent_open"], E1, E2, SPECIAL["ent_close"], W, SPECIAL["doc_sep"]]
    return PackedInput("fx", ids, [6], [1, 2, 3, 4] if marking else [], marking, dict(SPECIAL))


EXPECTED = {
    Setting.DOC_SEP: ({6}, set()),
    Setting.ENT_MARKERS: ({1, 4, 6}, set()),
    Setting.ENT_MARKERS_SPANS: ({1, 2, 3, 4, 6}, set()),
    Setting.ENT_SPANS: ({2, 3, 6}, {1, 4}),
    Setting.ENT_ONLY: ({2, 3, 6}, {0, 1, 4, 5}),
}


class TestBuildMasks:
    @pytest.mark.parametrize("setting", list(Setting))
    def test_seven_token_fixture(self, setting):
        masks = build_masks(seven_tokens(), AttentionConfig(setting, window=2))
        assert (masks.global_positions(), masks.pad_positions()) == EXPECTED[setting]

    @pytest.mark.parametrize("setting", [s for s in Setting if s is not Setting.DOC_SEP])
    def test_entity_settings_need_marking(self, setting):
        with pytest.raises(MaskError):
            build_masks(seven_tokens(marking=False), AttentionConfig(setting))

    def test_doc_sep_without_marking(self):
        masks = build_masks(seven_tokens(marking=False), AttentionConfig(Setting.DOC_SEP))
        assert masks.global_positions() == {6}

    def test_global_and_pad_disjoint(self):
        with pytest.raises(MaskError):
            AttentionMasks([True, False], [True, False])

    def test_window_validation(self):
        with pytest.raises(ValueError):
            AttentionConfig(window=3)
        with pytest.raises(ValueError):
            AttentionConfig(window=0)

    def test_replace_padded_ids(self):
        packed = seven_tokens()
        masks = build_masks(packed, AttentionConfig(Setting.ENT_SPANS))
        assert replace_padded_ids(packed, masks) == [W, 0, E1, E2, 0, W, SPECIAL["doc_sep"]]

    def test_record_roundtrip(self):
        masks = build_masks(seven_tokens(), AttentionConfig(Setting.ENT_ONLY))
        back = AttentionMasks.from_record(masks.to_record("fx"))
        assert np.array_equal(back.global_mask, masks.global_mask)
        assert np.array_equal(back.pad_mask, masks.pad_mask)

    def test_coverage_grows_with_global_set(self):
        packed = seven_tokens()
        cover = [
            masks_to_dense(build_masks(packed, AttentionConfig(s, window=2)), 2).sum()
            for s in (Setting.DOC_SEP, Setting.ENT_MARKERS, Setting.ENT_MARKERS_SPANS)
        ]
        assert cover == sorted(cover)


def _masks(n, glob=(), pad=()):
    g = np.zeros(n, bool)
    p = np.zeros(n, bool)
    g[list(glob)] = True
    p[list(pad)] = True
    return AttentionMasks(g, p)


class TestMasksToDense:
    def test_band_only(self):
        allowed = masks_to_dense(_masks(4), 2)
        expected = np.array([[1, 1, 0, 0], [1, 1, 1, 0], [0, 1, 1, 1], [0, 0, 1, 1]], bool)
        assert np.array_equal(allowed, expected)

    def test_global_row_and_column(self):
        allowed = masks_to_dense(_masks(5, glob=[0]), 2)
        assert allowed[0].all() and allowed[:, 0].all()
        assert not allowed[4, 2]

    def test_pad_isolated(self):
        allowed = masks_to_dense(_masks(5, glob=[0], pad=[2]), 2)
        assert not allowed[2].any() and not allowed[:, 2].any()

    def test_length_mismatch(self):
        with pytest.raises(MaskError):
            masks_to_dense(_masks(3), 2, n=4)


class TestDenseOracle:
    def test_two_token_example(self):
        q = k = np.array([[1.0], [0.0]])
        v = np.array([[1.0], [0.0]])
        out = dense_attention_oracle(q, k, v, np.ones((2, 2), bool))
        assert out[0, 0] == pytest.approx(math.e / (math.e + 1))
        assert out[1, 0] == pytest.approx(0.5)

    def test_masked_row_is_zero(self):
        rng = np.random.default_rng(0)
        t = AttentionTensors.random(3, 2, rng)
        allowed = np.ones((3, 3), bool)
        allowed[1] = False
        assert np.array_equal(dense_attention_oracle(*t, allowed)[1], [0.0, 0.0])

    def test_large_scores_stay_finite(self):
        q = k = np.array([[300.0], [-300.0]])
        out = dense_attention_oracle(q, k, np.eye(2), np.ones((2, 2), bool))
        assert np.all(np.isfinite(out))

    def test_shape_errors(self):
        with pytest.raises(ValueError):
            dense_attention_oracle(np.ones((2, 2)), np.ones((3, 2)), np.ones((2, 2)), np.ones((2, 2), bool))
        with pytest.raises(ValueError):
            dense_attention_oracle(np.full((2, 2), np.nan), np.ones((2, 2)), np.ones((2, 2)), np.ones((2, 2), bool))


@st.composite
def attention_cases(draw):
    n = draw(st.integers(1, 40))
    d = draw(st.integers(1, 8))
    window = draw(st.sampled_from([2, 4, 6, 8, 16, 128]))
    roles = draw(st.lists(st.sampled_from("ngp"), min_size=n, max_size=n))
    seed = draw(st.integers(0, 2**32 - 1))
    masks = _masks(n, [i for i, r in enumerate(roles) if r == "g"], [i for i, r in enumerate(roles) if r == "p"])
    return AttentionTensors.random(n, d, np.random.default_rng(seed)), masks, window


class TestKernel:
    @settings(max_examples=150, deadline=None)
    @given(attention_cases())
    def test_matches_oracle(self, case):
        t, masks, window = case
        out = local_global_attention(*t, masks, window)
        ref = dense_attention_oracle(*t, masks_to_dense(masks, window))
        assert np.max(np.abs(out - ref)) <= 1e-6

    @settings(max_examples=100, deadline=None)
    @given(attention_cases())
    def test_weights_follow_allowed_pattern(self, case):
        t, masks, window = case
        _, weights = local_global_attention(*t, masks, window, return_weights=True)
        allowed = masks_to_dense(masks, window)
        assert np.all(weights[~allowed] == 0)
        live = ~masks.pad_mask
        np.testing.assert_allclose(weights[live].sum(axis=1), 1.0, atol=1e-9)
        assert np.all(weights[~live] == 0)

    def test_padded_keys_do_not_leak(self):
        rng = np.random.default_rng(1)
        t = AttentionTensors.random(12, 4, rng)
        masks = _masks(12, glob=[0], pad=[3, 7])
        base = local_global_attention(*t, masks, 4)
        k, v = t.k.copy(), t.v.copy()
        k[[3, 7]] = 50.0
        v[[3, 7]] = -50.0
        changed = local_global_attention(t.q, k, v, masks, 4)
        np.testing.assert_allclose(base, changed, atol=1e-12)

    def test_global_attention_is_symmetric(self):
        masks = _masks(20, glob=[5])
        allowed = masks_to_dense(masks, 2)
        assert allowed[5].all() and allowed[:, 5].all()
        t = AttentionTensors.random(20, 3, np.random.default_rng(2))
        _, weights = local_global_attention(*t, masks, 2, return_weights=True)
        assert np.all(weights[:, 5] > 0) and np.all(weights[5] > 0)

    def test_wide_window_is_full_attention(self):
        t = AttentionTensors.random(9, 4, np.random.default_rng(3))
        scores = t.q @ t.k.T / 2.0
        p = np.exp(scores - scores.max(axis=1, keepdims=True))
        expected = (p / p.sum(axis=1, keepdims=True)) @ t.v
        np.testing.assert_allclose(local_global_attention(*t, _masks(9), 32), expected, atol=1e-12)

    def test_multi_head(self):
        rng = np.random.default_rng(4)
        q, k, v = (rng.standard_normal((3, 10, 4)) for _ in range(3))
        masks = _masks(10, glob=[9], pad=[2])
        out = multi_head_attention(q, k, v, masks, 4)
        for h in range(3):
            np.testing.assert_allclose(out[h], local_global_attention(q[h], k[h], v[h], masks, 4))

    def test_mask_length_mismatch(self):
        t = AttentionTensors.random(4, 2, np.random.default_rng(0))
        with pytest.raises(MaskError):
            local_global_attention(*t, _masks(5), 2)

    @pytest.mark.parametrize("setting", list(Setting))
    def test_fixture_settings_match_oracle(self, setting):
        masks = build_masks(seven_tokens(), AttentionConfig(setting, window=2))
        t = AttentionTensors.random(7, 8, np.random.default_rng(5))
        out = local_global_attention(*t, masks, 2)
        assert np.max(np.abs(out - dense_attention_oracle(*t, masks_to_dense(masks, 2)))) <= 1e-6
