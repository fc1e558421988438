import random

import pytest

from samlab.pir import (
    ComParams, ExtractorSpec, OmniscientClearIndexBreaker, SameDatabaseBreaker, binding_reduction, bit_at,
    clear_index_pir, com_commit, com_hiding_estimate, com_hiding_exact, com_verify, ext_columns, ext_eval,
    full_download_pir, gf2_basis, gf2_in_span, pir_com, posterior_min_entropy, toeplitz_rows,
)


def test_toeplitz_structure_and_seed_layout():
    spec = ExtractorSpec(6, 3)
    assert spec.seed_len == 8
    for t in (0b10110011, 0b01011100, 255):
        rows = toeplitz_rows(spec, t)
        mat = [[(r >> (5 - c)) & 1 for c in range(6)] for r in rows]
        assert all(mat[r][c] == mat[r + 1][c + 1] for r in range(2) for c in range(5))
        bits = [(t >> (7 - i)) & 1 for i in range(8)]
        assert [mat[r][0] for r in range(3)] == bits[:3]
        assert mat[0][1:] == bits[3:]


def test_extractor_is_linear_and_matches_columns():
    spec = ExtractorSpec(7, 3)
    rng = random.Random(0)
    for _ in range(50):
        t, a, b = rng.getrandbits(9), rng.getrandbits(7), rng.getrandbits(7)
        assert ext_eval(spec, a ^ b, t) == ext_eval(spec, a, t) ^ ext_eval(spec, b, t)
        cols = ext_columns(spec, t)
        acc = 0
        for c in range(7):
            if bit_at(a, c, 7):
                acc ^= cols[c]
        assert acc == ext_eval(spec, a, t)
    with pytest.raises(ValueError):
        ext_eval(spec, 1 << 7, 0)


def test_gf2_span_by_enumeration():
    vecs = [0b1010, 0b0110, 0b1100]
    basis = gf2_basis(vecs)
    spanned = {0}
    for v in vecs:
        spanned |= {s ^ v for s in spanned}
    assert all(gf2_in_span(basis, v) == (v in spanned) for v in range(16))
    assert len(basis) == 2


@pytest.mark.parametrize("make", [clear_index_pir, full_download_pir])
def test_mock_pirs_are_correct(make):
    pir = make(9)
    rng = random.Random(1)
    for _ in range(40):
        x, i = rng.getrandbits(9), rng.randrange(9)
        msgs = tuple(m for s, m in pir.run(x, i) if s == 0)
        assert pir.user_output(i, msgs) == bit_at(x, i, 9)
        mask, vals = pir.posterior(i, msgs)
        assert x & mask == vals
    assert posterior_min_entropy(clear_index_pir(9), 0, (1,)) == 8
    assert posterior_min_entropy(full_download_pir(9), 0, (0,)) == 0
    with pytest.raises(ValueError):
        make(1)


def test_params_validation():
    with pytest.raises(ValueError):
        ComParams(16, 12, 4)
    with pytest.raises(ValueError):
        ComParams(16, 11, 6)
    assert ComParams(24, 12, 6).secret_len == 1


@pytest.mark.parametrize("make", [clear_index_pir, full_download_pir])
def test_commit_reveal_verify(make):
    com = pir_com(make(16), ComParams(16, 24, 12))
    ext = com.params.extractor
    rng = random.Random(2)
    for _ in range(20):
        s = rng.getrandbits(ext.out_len)
        c, dec = com_commit(com, s, rng.getrandbits(16 + ext.seed_len), rng.getrandbits(com.scheme.receiver.coin_len))
        assert com_verify(com, c, dec) == s
        assert com_verify(com, c, (s ^ 1, dec[1])) is None
        assert com_verify(com, c, "junk") is None
    assert com.sender_comm_bits == com.pir.server_comm_bits + ext.seed_len + ext.out_len


def test_entropy_bound_flag():
    assert pir_com(clear_index_pir(24), ComParams(24, 12, 6)).within_entropy_bound
    assert not pir_com(full_download_pir(24), ComParams(24, 12, 6)).within_entropy_bound


def test_hiding_estimator_matches_enumeration():
    for make in (clear_index_pir, full_download_pir):
        com = pir_com(make(6), ComParams(6, 12, 6))
        exact = com_hiding_exact(com)
        est = com_hiding_estimate(com, 4000, seed=3)
        assert abs(est.rho - exact) <= 4 * est.se + 0.01
    assert com_hiding_exact(pir_com(full_download_pir(6), ComParams(6, 12, 6))) == 1.0


def test_binding_reduction_with_breakers():
    com = pir_com(clear_index_pir(16), ComParams(16, 12, 6))
    good = binding_reduction(OmniscientClearIndexBreaker(com), com, 600, seed=1)
    assert good.valid_breaks > 550
    assert good.d_adv_rb > 3 * good.d_adv_rb_se
    honest = binding_reduction(SameDatabaseBreaker(com), com, 200, seed=1)
    assert honest.valid_breaks == 0
    assert honest.d_adv_rb == 0.0
    with pytest.raises(ValueError):
        OmniscientClearIndexBreaker(pir_com(full_download_pir(16), ComParams(16, 12, 6)))
