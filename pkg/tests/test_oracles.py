import pytest
from hypothesis import given, settings, strategies as st

from samlab.oracles import (
    CapabilityError, FeistelPRP, HashFamily, OracleError, PermutationOracle, TdpOracle, derive, master_seed, prf,
    perm_eval, perm_invert, perm_sample, tdp_eval, tdp_gen, tdp_invert, tdp_sample,
)

SEED = master_seed(11)


def test_prf_is_deterministic_and_domain_separated():
    assert prf(b"k", b"a", b"x") == prf(b"k", b"a", b"x")
    assert prf(b"k", b"a", b"x") != prf(b"k", b"b", b"x")
    assert prf(b"k", b"ab", b"") != prf(b"k", b"a", b"b")  # tag length is framed
    assert len(prf(b"k", b"a", size=8)) == 8


def test_derive_depends_on_every_part():
    assert derive(SEED, "x", 1, 2) != derive(SEED, "x", 2, 1)
    assert derive(SEED, "x", 1) != derive(SEED, "y", 1)
    assert master_seed(1) != master_seed(2)


@pytest.mark.parametrize("table", [False, True])
def test_permutation_is_a_bijection(table):
    p = perm_sample(8, SEED, table=table)
    out = [perm_eval(p, x) for x in range(256)]
    assert sorted(out) == list(range(256))
    assert all(perm_invert(p, y) == x for x, y in enumerate(out))


def test_lazy_inversion_first_then_eval_agrees():
    p = PermutationOracle(10, SEED)
    xs = [p.invert(y) for y in (5, 17, 900)]
    assert [p.eval(x) for x in xs] == [5, 17, 900]
    assert p.known(xs[0])


def test_same_seed_same_permutation():
    a, b = perm_sample(6, SEED), perm_sample(6, SEED)
    assert a.table() == b.table()
    assert perm_sample(6, SEED, table=True).table() == perm_sample(6, SEED, table=True).table()


def test_out_of_range_and_bad_sizes():
    p = perm_sample(4, SEED)
    with pytest.raises(OracleError):
        p.eval(16)
    with pytest.raises(OracleError):
        p.invert(-1)
    with pytest.raises(OracleError):
        perm_sample(0, SEED)
    with pytest.raises(OracleError):
        perm_sample(17, SEED, table=True)


def test_eval_only_handle_cannot_invert():
    p = perm_sample(5, SEED)
    h = p.eval_handle()
    assert h.eval(3) == p.eval(3)
    with pytest.raises(CapabilityError):
        h.invert(0)


def test_trapdoor_family_round_trip():
    t = tdp_sample(6, SEED)
    for td in (0, 7, 63):
        pk = tdp_gen(t, td)
        for x in (0, 1, 40):
            assert tdp_invert(t, td, tdp_eval(t, pk, x)) == x
    pk0, pk1 = tdp_gen(t, 0), tdp_gen(t, 1)
    assert [t.eval(pk0, x) for x in range(64)] != [t.eval(pk1, x) for x in range(64)]


@pytest.mark.parametrize("m", range(0, 11))
def test_feistel_is_a_permutation_by_enumeration(m):
    f = FeistelPRP(prf(SEED, b"t", m.to_bytes(1, "big"), 64), m)
    out = [f.eval(v) for v in range(1 << m)]
    assert sorted(out) == list(range(1 << m))
    assert all(f.invert(y) == v for v, y in enumerate(out))


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=1, max_value=30), st.data())
def test_feistel_inverse_property(m, data):
    f = FeistelPRP(prf(SEED, b"prop", m.to_bytes(1, "big"), 64), m)
    v = data.draw(st.integers(min_value=0, max_value=(1 << m) - 1))
    assert f.invert(f.eval(v)) == v


def test_hash_family_keys_by_query_and_width():
    H = HashFamily(SEED)
    a = H.perm(b"q1", 8)
    assert H.perm(b"q1", 8) is a
    assert [a.eval(v) for v in range(16)] != [H.perm(b"q2", 8).eval(v) for v in range(16)]
    assert HashFamily(SEED).perm(b"q1", 8).eval(3) == a.eval(3)
