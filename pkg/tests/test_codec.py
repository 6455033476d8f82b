import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

from gpexp.codec import (
    Codebook,
    CodeParams,
    DecodeKind,
    DecoderConfig,
    DecoderWorkspace,
    LambdaDesign,
    SubCode,
    build_codebook,
    check_unambiguous,
    codebook_from_bytes,
    codebook_to_bytes,
    decode,
    encode,
    load_codebook,
    metric,
    qualifier_counts,
    quantize_design,
    save_codebook,
)
from gpexp.core import Alphabet, Mode, SequenceType, joint_empirical_type
from gpexp.info import mutual_information

from oracles import literal_qualifiers, match_probability, min_tv_counts

S8 = np.array([0, 0, 0, 0, 1, 1, 1, 1])


def _design_rows(p_u_given_s):
    """Design with x pinned to 0, so only the u law matters."""
    rows = np.asarray(p_u_given_s, dtype=np.float64)
    return rows[:, :, None]


def _mixed_code(n=8, rate=0.25, epsilon=0.05, seed=7):
    des = np.zeros((2, 2, 2))
    des[0, 0, 0] = 0.75
    des[0, 1, 1] = 0.25
    des[1, 0, 0] = 0.25
    des[1, 1, 1] = 0.75
    return CodeParams(n=n, rate=rate, epsilon=epsilon, design=des, seed=seed)


class TestCodeParams:
    def test_message_count_floor(self):
        assert _mixed_code(n=8, rate=0.25).n_messages == 4
        assert _mixed_code(n=6, rate=1 / 6).n_messages == 2
        assert _mixed_code(rate=0.0).n_messages == 1

    def test_validation(self):
        with pytest.raises(ValueError):
            _mixed_code(n=0)
        with pytest.raises(ValueError):
            _mixed_code(rate=-0.1)
        with pytest.raises(ValueError):
            _mixed_code(epsilon=0.0)
        with pytest.raises(ValueError):
            _mixed_code(seed=-1)
        bad = np.full((2, 2, 2), 0.2)
        with pytest.raises(ValueError):
            CodeParams(n=8, rate=0.25, epsilon=0.05, design=bad, seed=1)


class TestQuantizeDesign:
    def test_largest_remainder_example(self):
        lam = SequenceType(np.array([3, 0]), 3)
        design = np.zeros((2, 2, 1))
        design[0, :, 0] = [0.3, 0.7]
        design[1, 0, 0] = 1.0
        qd = quantize_design(design, lam)
        assert qd.counts[0, :, 0].tolist() == [1, 2]
        assert qd.counts[1].sum() == 0

    def test_exact_fractions_are_fixed_points(self):
        lam = SequenceType(np.array([4, 4]), 8)
        qd = quantize_design(_design_rows([[0.75, 0.25], [0.25, 0.75]]), lam)
        assert qd.counts[0, :, 0].tolist() == [3, 1]
        assert qd.counts[1, :, 0].tolist() == [1, 3]

    def test_shape_mismatch(self):
        lam = SequenceType(np.array([3]), 3)
        with pytest.raises(ValueError):
            quantize_design(np.zeros((2, 2, 1)), lam)

    @given(
        st.lists(st.floats(0.01, 1.0), min_size=2, max_size=4),
        st.integers(1, 8),
    )
    def test_total_variation_optimal(self, weights, total):
        p = np.array(weights) / sum(weights)
        lam = SequenceType(np.array([total]), total)
        qd = quantize_design(p[None, :, None], lam)
        achieved = 0.5 * float(np.abs(qd.counts[0, :, 0] / total - p).sum())
        best, _ = min_tv_counts(p, total)
        assert achieved <= best + 1e-12


class TestLambdaDesign:
    def test_state_copy_design(self):
        lam = SequenceType(np.array([4, 4]), 8)
        qd = quantize_design(_design_rows([[1.0, 0.0], [0.0, 1.0]]), lam)
        assert qd.u_counts_by_s.tolist() == [[4, 0], [0, 4]]
        assert qd.u_marginal.tolist() == [4, 4]
        assert qd.i_star == 1.0
        assert qd.n_rows(epsilon=0.25) == 1024

    def test_i_star_matches_joint_information(self):
        lam = SequenceType(np.array([4, 4]), 8)
        qd = quantize_design(_design_rows([[0.75, 0.25], [0.25, 0.75]]), lam)
        want = mutual_information(qd.u_counts_by_s / 8)
        assert qd.i_star == want
        assert qd.n_rows(epsilon=0.05) == 4

    def test_count_consistency_enforced(self):
        with pytest.raises(ValueError):
            # per-state totals disagree with the state type
            LambdaDesign(
                state_counts=np.array([4, 4]),
                counts=np.array([[[3], [0]], [[0], [4]]]),
                n=8,
            )


class TestBuildCodebook:
    def test_shapes_and_type_membership(self):
        cb = build_codebook(_mixed_code())
        assert len(cb.sub_codes) == 9
        for sub in cb.sub_codes.values():
            L, m, n = sub.words.shape
            assert m == 4 and n == 8
            assert L == sub.design.n_rows(0.05)
            flat = sub.words.reshape(-1, n)
            for word in flat:
                assert np.bincount(word, minlength=2).tolist() == sub.design.u_marginal.tolist()

    def test_deterministic(self):
        a = codebook_to_bytes(build_codebook(_mixed_code()))
        b = codebook_to_bytes(build_codebook(_mixed_code()))
        assert a == b

    def test_seed_changes_words(self):
        a = codebook_to_bytes(build_codebook(_mixed_code(seed=1)))
        b = codebook_to_bytes(build_codebook(_mixed_code(seed=2)))
        assert a != b

    def test_resource_guard(self):
        params = CodeParams(n=64, rate=0.5, epsilon=8.0,
                            design=_mixed_code().design, seed=1)
        with pytest.raises(ValueError):
            build_codebook(params)

    def test_draws_uniform_over_type_class(self):
        # single state type (|S| = 1), u marginal [2, 2]: 6 equally likely words
        design = _design_rows([[0.5, 0.5]])
        params = CodeParams(n=4, rate=0.0, epsilon=3.5, design=design, seed=3)
        cb = build_codebook(params)
        words = next(iter(cb.sub_codes.values())).words.reshape(-1, 4)
        assert words.shape[0] == 2 ** 14
        packed = words @ np.array([8, 4, 2, 1])
        cats = sorted(
            int(np.array(p) @ np.array([8, 4, 2, 1]))
            for p in set(itertools.permutations([0, 0, 1, 1]))
        )
        counts = np.bincount(packed, minlength=16)[cats]
        assert counts.sum() == words.shape[0]
        assert chisquare(counts).pvalue > 1e-3


class TestEncode:
    def test_hit_preserves_conditional_types(self):
        cb = build_codebook(_mixed_code())
        rng = np.random.default_rng(5)
        s = rng.integers(0, 2, size=8)
        u, x, err = encode(1, s, cb, rng)
        sub = cb.sub_code_for(s)
        for a in range(2):
            pos = s == a
            got_u = np.bincount(u[pos], minlength=2)
            assert got_u.tolist() == sub.design.u_counts_by_s[a].tolist()
            for uv in range(2):
                cell = pos & (u == uv)
                got_x = np.bincount(x[cell], minlength=2)
                assert got_x.tolist() == sub.design.counts[a, uv].tolist()

    def test_hit_word_comes_from_the_bin(self):
        cb = build_codebook(_mixed_code())
        rng = np.random.default_rng(11)
        for trial in range(20):
            s = rng.integers(0, 2, size=8)
            m = int(rng.integers(4)) + 1
            u, _, err = encode(m, s, cb, rng)
            if not err:
                column = cb.sub_code_for(s).words[:, m - 1, :]
                assert any(np.array_equal(u, row) for row in column)

    def test_message_range_enforced(self):
        cb = build_codebook(_mixed_code())
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            encode(0, S8, cb, rng)
        with pytest.raises(ValueError):
            encode(5, S8, cb, rng)

    def test_state_length_enforced(self):
        cb = build_codebook(_mixed_code())
        with pytest.raises(ValueError):
            encode(1, S8[:5], cb, np.random.default_rng(0))

    def test_error_rate_follows_exact_law(self):
        # L=4 rows, match chance 16/70 per row: miss rate (1 - 16/70)^4
        design = _design_rows([[0.75, 0.25], [0.25, 0.75]])
        p_match = match_probability([4, 4], [[3, 1], [1, 3]])
        assert p_match == 16 / 70
        # cross-check the combinatorial oracle by brute enumeration
        wanted = 0
        for word in set(itertools.permutations([0, 0, 0, 0, 1, 1, 1, 1])):
            w = np.array(word)
            if np.bincount(w[S8 == 0], minlength=2).tolist() == [3, 1]:
                wanted += 1
        assert wanted / 70 == p_match

        trials = 400
        misses = 0
        enc_rng = np.random.default_rng(2024)
        for seed in range(trials):
            params = CodeParams(n=8, rate=0.0, epsilon=0.05, design=design, seed=seed)
            cb = build_codebook(params)
            assert cb.sub_codes[(4, 4)].n_rows == 4
            _, _, err = encode(1, S8, cb, enc_rng)
            misses += err
        expected = trials * (1 - p_match) ** 4
        sigma = math.sqrt(trials * (1 - p_match) ** 4 * (1 - (1 - p_match) ** 4))
        assert abs(misses - expected) <= 4 * sigma

    def test_deep_bins_make_misses_negligible(self, state_matched_design):
        # u copies s: a single matching word out of C(8,4)=70, but L=1024
        p_match = match_probability([4, 4], [[4, 0], [0, 4]])
        assert p_match == 1 / 70
        law = (1 - p_match) ** 1024
        assert law < 1e-3
        enc_rng = np.random.default_rng(99)
        misses = 0
        for seed in range(150):
            params = CodeParams(n=8, rate=0.0, epsilon=0.25,
                                design=state_matched_design, seed=seed)
            cb = build_codebook(params)
            assert cb.sub_codes[(4, 4)].n_rows == 1024
            _, _, err = encode(1, S8, cb, enc_rng)
            misses += err
        assert misses == 0

    def test_fallback_still_has_exact_types(self):
        # bin filled with words that never match the per-state conditionals
        cb = build_codebook(_mixed_code())
        sub = cb.sub_codes[(4, 4)]
        bad_row = np.array([0, 0, 1, 1, 0, 0, 1, 1], dtype=np.uint8)
        forced = SubCode(design=sub.design,
                         words=np.tile(bad_row, (sub.n_rows, 4, 1)))
        rigged = Codebook(params=cb.params,
                          sub_codes={**cb.sub_codes, (4, 4): forced})
        rng = np.random.default_rng(1)
        u, x, err = encode(1, S8, rigged, rng)
        assert err
        for a in range(2):
            got = np.bincount(u[S8 == a], minlength=2)
            assert got.tolist() == sub.design.u_counts_by_s[a].tolist()
            for uv in range(2):
                cell = (S8 == a) & (u == uv)
                got_x = np.bincount(x[cell], minlength=2)
                assert got_x.tolist() == sub.design.counts[a, uv].tolist()


class TestMetric:
    def test_matches_joint_type_information(self):
        lam = SequenceType(np.array([4, 4]), 8)
        qd = quantize_design(_design_rows([[0.75, 0.25], [0.25, 0.75]]), lam)
        u = np.array([0, 0, 0, 1, 1, 0, 1, 1])
        y = np.array([0, 1, 0, 1, 1, 0, 1, 0])
        t = joint_empirical_type(u, y, (Alphabet(2), Alphabet(2)))
        want = mutual_information(t.distribution().probs, shape=(2, 2)) - qd.i_star
        assert abs(metric(u, y, qd, n_y=2) - want) < 1e-15

    def test_length_mismatch(self):
        lam = SequenceType(np.array([4, 4]), 8)
        qd = quantize_design(_design_rows([[1.0, 0.0], [0.0, 1.0]]), lam)
        with pytest.raises(ValueError):
            metric([0, 1], [0, 1, 1], qd)


@pytest.fixture(scope="module")
def codebook():
    return build_codebook(_mixed_code())


class TestDecode:
    def test_workspace_scores_match_literal_metric(self, codebook):
        ws = DecoderWorkspace(codebook, n_y=2)
        rng = np.random.default_rng(17)
        for _ in range(25):
            y = rng.integers(0, 2, size=8)
            fast = ws.scores(y)
            slow = np.full(4, -np.inf)
            for sub in codebook.sub_codes.values():
                for m_idx in range(4):
                    for row in sub.words[:, m_idx, :]:
                        slow[m_idx] = max(slow[m_idx], metric(row, y, sub.design, n_y=2))
            np.testing.assert_allclose(fast, slow, atol=1e-10)

    def test_erasure_decode_agrees_with_literal_rule(self, codebook):
        ws = DecoderWorkspace(codebook, n_y=2)
        cfg = DecoderConfig(mode=Mode.ERASURE, threshold=0.1, alpha=1.0)
        rng = np.random.default_rng(23)
        for _ in range(50):
            y = rng.integers(0, 2, size=8)
            out = decode(y, codebook, cfg, workspace=ws)
            want = literal_qualifiers(out.scores, 0.1, 1.0)
            assert set(out.messages) == want
            if want:
                assert out.kind is DecodeKind.DECODED and out.message == next(iter(want))
            else:
                assert out.kind is DecodeKind.ERASED and out.message is None

    def test_list_decode_agrees_with_literal_rule(self, codebook):
        ws = DecoderWorkspace(codebook, n_y=2)
        cfg = DecoderConfig(mode=Mode.LIST, threshold=-0.5, alpha=0.5)
        rng = np.random.default_rng(29)
        sizes = set()
        for _ in range(50):
            y = rng.integers(0, 2, size=8)
            out = decode(y, codebook, cfg, workspace=ws)
            want = literal_qualifiers(out.scores, -0.5, 0.5)
            assert out.kind is DecodeKind.LISTED
            assert set(out.messages) == want
            sizes.add(len(want))
        assert max(sizes) >= 2  # the permissive config does produce real lists

    def test_single_message_threshold_rule(self):
        params = _mixed_code(rate=0.0)
        cb = build_codebook(params)
        ws = DecoderWorkspace(cb, n_y=2)
        y = np.array([0, 1, 0, 1, 0, 1, 0, 1])
        score = float(ws.scores(y)[0])
        below = DecoderConfig(mode=Mode.ERASURE, threshold=score - 0.01, alpha=1.0)
        above = DecoderConfig(mode=Mode.ERASURE, threshold=score + 0.01, alpha=1.0)
        assert decode(y, cb, below, workspace=ws).kind is DecodeKind.DECODED
        assert decode(y, cb, above, workspace=ws).kind is DecodeKind.ERASED

    def test_workspace_inferred_when_missing(self, codebook):
        cfg = DecoderConfig(mode=Mode.ERASURE, threshold=0.1, alpha=1.0)
        y = np.array([0, 1, 1, 0, 1, 0, 0, 1])
        a = decode(y, codebook, cfg, n_y=2)
        b = decode(y, codebook, cfg, workspace=DecoderWorkspace(codebook, n_y=2))
        np.testing.assert_array_equal(a.scores, b.scores)
        assert a.kind == b.kind and a.messages == b.messages

    def test_received_length_enforced(self, codebook):
        ws = DecoderWorkspace(codebook, n_y=2)
        with pytest.raises(ValueError):
            ws.scores(np.array([0, 1]))


class TestErasureUnambiguity:
    def test_never_two_qualifiers_on_real_decodes(self):
        # 10^4 (codebook, received word) instances across fresh codebooks
        rng = np.random.default_rng(31)
        for seed in range(100):
            cb = build_codebook(_mixed_code(seed=seed))
            ws = DecoderWorkspace(cb, n_y=2)
            scores = np.stack([ws.scores(rng.integers(0, 2, size=8))
                               for _ in range(100)])
            for thr, alpha in ((0.0, 1.0), (0.1, 1.0), (0.0, 1.5)):
                assert int(qualifier_counts(scores, thr, alpha).max()) <= 1


class TestQualifierCounts:
    def test_matches_scalar_and_literal(self):
        rng = np.random.default_rng(7)
        scores = rng.uniform(-2, 2, size=(200, 5))
        for thr, alpha in [(0.0, 1.0), (0.1, 1.5), (0.0, 0.5), (1.0, 3.0)]:
            cfg_mode = Mode.ERASURE if alpha >= 1 else Mode.LIST
            cfg = DecoderConfig(mode=cfg_mode, threshold=max(thr, 0.0) if alpha >= 1 else thr,
                                alpha=alpha)
            counts = qualifier_counts(scores, cfg.threshold, alpha)
            for row, cnt in zip(scores, counts):
                assert cnt == check_unambiguous(row, cfg)
                assert cnt == len(literal_qualifiers(row, cfg.threshold, alpha))

    def test_single_column(self):
        counts = qualifier_counts(np.array([[0.5], [-0.5]]), 0.0, 1.0)
        assert counts.tolist() == [1, 0]

    def test_rejects_flat_input(self):
        with pytest.raises(ValueError):
            qualifier_counts(np.array([0.5, 0.2]), 0.0, 1.0)


class TestDecoderConfig:
    def test_erasure_regime(self):
        with pytest.raises(ValueError):
            DecoderConfig(mode=Mode.ERASURE, threshold=0.1, alpha=0.5)
        with pytest.raises(ValueError):
            DecoderConfig(mode=Mode.ERASURE, threshold=-0.1, alpha=1.0)

    def test_list_regime(self):
        with pytest.raises(ValueError):
            DecoderConfig(mode=Mode.LIST, threshold=0.0, alpha=1.0)
        DecoderConfig(mode=Mode.LIST, threshold=-1.0, alpha=0.5)


class TestSerialization:
    def test_round_trip_bytes_identical(self):
        cb = build_codebook(_mixed_code())
        blob = codebook_to_bytes(cb)
        again = codebook_to_bytes(codebook_from_bytes(blob))
        assert blob == again

    def test_round_trip_preserves_words_and_params(self, tmp_path):
        cb = build_codebook(_mixed_code())
        path = tmp_path / "code.gpcb"
        save_codebook(cb, path)
        cb2 = load_codebook(path)
        assert cb2.params.n == cb.params.n
        assert cb2.params.n_messages == cb.params.n_messages
        assert cb2.params.seed == cb.params.seed
        assert set(cb2.sub_codes) == set(cb.sub_codes)
        for key in cb.sub_codes:
            np.testing.assert_array_equal(cb.sub_codes[key].words, cb2.sub_codes[key].words)
            assert cb.sub_codes[key].design.i_star == cb2.sub_codes[key].design.i_star

    def test_bad_magic(self):
        with pytest.raises(ValueError):
            codebook_from_bytes(b"NOPE" + b"\x00" * 64)

    def test_bad_version(self):
        cb = build_codebook(_mixed_code())
        blob = bytearray(codebook_to_bytes(cb))
        blob[4] = 99
        with pytest.raises(ValueError):
            codebook_from_bytes(bytes(blob))

    def test_trailing_bytes_rejected(self):
        cb = build_codebook(_mixed_code())
        with pytest.raises(ValueError):
            codebook_from_bytes(codebook_to_bytes(cb) + b"\x00")
