import numpy as np
import pytest

from relaycm.errors import ConfigError
from relaycm.scldpc import SpatiallyCoupledCode, build_code, decode, design_rate


def test_design_rate_arithmetic():
    assert design_rate(20, 2) == pytest.approx(1.0 - 63.0 / 300.0)
    assert design_rate(12, 2) == pytest.approx(1.0 - 39.0 / 180.0)
    # doubling the chain at w=3 lands on the same rate as w=2
    assert design_rate(24, 3) == pytest.approx(design_rate(12, 2))


def test_dimensions_and_rate():
    code = build_code(32, 12, 2, seed=1)
    assert code.n == 15 * 32 * 12
    assert code.n_checks == 3 * 32 * 13
    assert code.k == 32 * ((15 - 3) * 12 - 3 * (2 - 1))
    assert code.rate == pytest.approx(design_rate(12, 2))
    assert len(code.info_vars) == code.k
    assert len(np.unique(code.info_vars)) == code.k
    assert len(code.tail_vars) == 6 * (code.coupling - 1) * code.q


def test_encode_is_systematic_and_valid():
    code = build_code(16, 8, 2, seed=0)
    rng = np.random.default_rng(0)
    for _ in range(3):
        u = rng.integers(0, 2, code.k, dtype=np.uint8)
        x = code.encode(u)
        assert np.array_equal(x[code.info_vars], u)
        assert not code.syndrome(x).any()


def test_encode_is_linear():
    code = build_code(16, 8, 2, seed=0)
    rng = np.random.default_rng(1)
    u1 = rng.integers(0, 2, code.k, dtype=np.uint8)
    u2 = rng.integers(0, 2, code.k, dtype=np.uint8)
    assert np.array_equal(code.encode(u1) ^ code.encode(u2), code.encode(u1 ^ u2))
    assert not code.encode(np.zeros(code.k, dtype=np.uint8)).any()


def test_wrong_info_length_rejected():
    code = build_code(8, 4, 2, seed=0)
    with pytest.raises(ConfigError):
        code.encode(np.zeros(code.k + 1, dtype=np.uint8))


def test_build_rejects_bad_parameters():
    with pytest.raises(ConfigError):
        build_code(1, 8, 2)
    with pytest.raises(ConfigError):
        build_code(8, 3, 4)
    with pytest.raises(ConfigError):
        build_code(8, 8, 4)          # wider than the variable degree
    with pytest.raises(ConfigError):
        build_code(8, 8, 2, dv=3, dc=5)


def test_build_is_deterministic_in_seed():
    a = build_code(16, 6, 2, seed=3)
    b = build_code(16, 6, 2, seed=3)
    assert np.array_equal(a.offsets, b.offsets)
    c = build_code(16, 6, 2, seed=4)
    assert not np.array_equal(a.offsets, c.offsets)


def test_reported_girth_is_six_for_roomy_lifts():
    assert build_code(32, 12, 2, seed=1).girth == 6
    assert build_code(64, 8, 3, seed=1).girth == 6


def test_matched_rate_pair_across_coupling_widths():
    w2 = build_code(32, 12, 2, seed=1)
    w3 = build_code(32, 24, 3, seed=1)
    assert w2.rate == pytest.approx(w3.rate)
    u = np.random.default_rng(5).integers(0, 2, w3.k, dtype=np.uint8)
    assert not w3.syndrome(w3.encode(u)).any()


def test_sparse_matrix_matches_syndrome():
    code = build_code(8, 6, 2, seed=2)
    h = code.h_sparse()
    assert h.shape == (code.n_checks, code.n)
    x = np.random.default_rng(0).integers(0, 2, code.n, dtype=np.uint8)
    np.testing.assert_array_equal((h @ x) % 2, code.syndrome(x))
    # column weights are the variable degree throughout
    np.testing.assert_array_equal(np.diff(h.tocsc().indptr), 3)


def test_alist_round_trip():
    code = build_code(8, 4, 2, seed=0)
    text = code.to_alist().splitlines()
    n, m = map(int, text[0].split())
    assert (n, m) == (code.n, code.n_checks)
    dmax_c, dmax_r = map(int, text[1].split())
    col_deg = list(map(int, text[2].split()))
    row_deg = list(map(int, text[3].split()))
    assert col_deg == [3] * code.n
    assert sum(col_deg) == sum(row_deg)
    assert dmax_r == max(row_deg)
    h = np.zeros((m, n), dtype=np.uint8)
    for j in range(n):
        for v in map(int, text[4 + j].split()):
            if v:
                h[v - 1, j] = 1
    np.testing.assert_array_equal(h, code.h_sparse().toarray())
    # check-side lists agree with the matrix too
    for i in range(m):
        nbr = sorted(v - 1 for v in map(int, text[4 + n + i].split()) if v)
        assert nbr == list(np.flatnonzero(h[i]))


def test_decode_clean_word_is_a_fixed_point():
    code = build_code(16, 8, 2, seed=0)
    u = np.random.default_rng(2).integers(0, 2, code.k, dtype=np.uint8)
    x = code.encode(u)
    llrs = 20.0 * (1.0 - 2.0 * x.astype(np.float64))
    res = decode(code, llrs, iterations=1)
    assert np.array_equal(res.info_bits(code), u)
    assert res.converged.all()
    assert res.iterations == code.chain_len


def test_decode_corrects_moderate_noise():
    code = build_code(16, 8, 2, seed=0)
    rng = np.random.default_rng(9)
    u = rng.integers(0, 2, code.k, dtype=np.uint8)
    x = code.encode(u)
    sigma = 0.55
    y = (1.0 - 2.0 * x) + sigma * rng.standard_normal(code.n)
    res = decode(code, 2.0 * y / sigma ** 2)
    assert np.array_equal(res.info_bits(code), u)
    assert res.converged.all()
    # raw hard decisions were not already clean
    assert ((y < 0) != x.astype(bool)).sum() > 20


def test_decode_flags_failure_beyond_threshold():
    code = build_code(16, 8, 2, seed=0)
    rng = np.random.default_rng(10)
    u = rng.integers(0, 2, code.k, dtype=np.uint8)
    x = code.encode(u)
    sigma = 1.4
    y = (1.0 - 2.0 * x) + sigma * rng.standard_normal(code.n)
    res = decode(code, 2.0 * y / sigma ** 2, iterations=8)
    assert (res.info_bits(code) != u).any()
    assert not res.converged.all()


def test_wide_window_agrees_on_correctable_words():
    code = build_code(16, 8, 2, seed=0)
    rng = np.random.default_rng(11)
    u = rng.integers(0, 2, code.k, dtype=np.uint8)
    x = code.encode(u)
    y = (1.0 - 2.0 * x) + 0.55 * rng.standard_normal(code.n)
    llrs = 2.0 * y / 0.55 ** 2
    small = decode(code, llrs)
    full = decode(code, llrs, window=code.chain_len + code.coupling - 1)
    assert np.array_equal(small.info_bits(code), u)
    assert np.array_equal(full.info_bits(code), u)


def test_decode_validation():
    code = build_code(8, 4, 2, seed=0)
    with pytest.raises(ConfigError):
        decode(code, np.zeros(code.n), window=1)
    with pytest.raises(ConfigError):
        decode(code, np.zeros(code.n - 1))
