import pytest

from samlab.attacks import (
    InvParams, a_tilde, alpha_beta_trace, block_programs, comm_inv, consistent, hit_monitor, inv,
    s_tilde_comm, s_tilde_round, sam_perm_inverter,
)
from samlab.circuits import apply_oracle, constant, run, truncate
from samlab.experiments import chain_adversary, drop_half
from samlab.oracles import HashFamily, master_seed, perm_sample
from samlab.protocols import break_succeeded, commit, toy_commit
from samlab.sam import Sam


def world(n, seed=1):
    pi = perm_sample(n, master_seed(seed), table=True)
    return {"pi": pi}, HashFamily(master_seed(seed + 1000))


def test_a_tilde_calls_depth_and_consistency():
    n, d, k = 10, 3, 2
    scheme = toy_commit(n, d)
    for coins in (1, 0xBEEF, (1 << 30) - 5):
        sam = Sam(HashFamily(master_seed(coins)), {})
        res = a_tilde(scheme.protocol, (0, coins), sam, k)
        assert res.stats.sam_calls == d + k
        assert res.stats.depth <= d + 1
        assert res.stats.normal_form
        assert all(consistent(scheme.protocol, 0, s, res.transcript, {}) for s in res.coins)


def test_a_tilde_rejects_zero_k():
    scheme = toy_commit(6, 2)
    with pytest.raises(ValueError):
        a_tilde(scheme.protocol, (0, 1), Sam(HashFamily(master_seed(0)), {}), 0)


def test_block_programs_partition_output():
    f = apply_oracle(10)
    progs = block_programs(f, 4)
    assert [p.output_len for p in progs] == [4, 8, 10]
    assert block_programs(truncate(f, 0), 3) == []


def test_inv_returns_preimages():
    oracles, H = world(12)
    f = drop_half(12)
    params = InvParams(3, 3, 0.1)
    for x in (0, 1234, 4095):
        y = run(f, oracles, x)
        res = inv(f, y, params, Sam(H, oracles))
        assert res.ok and len(res.preimages) == 3
        assert all(run(f, oracles, p) == y for p in res.preimages)
        assert res.main_calls <= res.budget
        assert res.stats.depth <= params.d + 1


def test_inv_aborts_when_target_unreachable():
    oracles, H = world(10)
    f = constant(10, 4, 0)
    res = inv(f, 5, InvParams(1, 1, 1.0), Sam(H, oracles))
    assert not res.ok
    assert res.main_calls == res.budget + 1 == 17
    with pytest.raises(ValueError):
        inv(f, 16, InvParams(1, 1, 1.0), Sam(H, oracles))
    with pytest.raises(ValueError):
        InvParams(0, 1, 0.5)


def test_sam_perm_inverter_unbounded():
    oracles, H = world(9, seed=5)
    for y in (3, 300):
        res = sam_perm_inverter(y, 9, 3, 0.1, Sam(H, oracles), unbounded=True)
        assert oracles["pi"].eval(res.preimages[0]) == y


def test_round_breaker_breaks_toy():
    scheme = toy_commit(10, 3)
    wins = 0
    for i in range(20):
        sam = Sam(HashFamily(master_seed(100 + i)), {})
        res = s_tilde_round(scheme, 10, sam, receiver_coins=(i * 7919) % (1 << 30))
        wins += break_succeeded(scheme, res)
    assert wins >= 18


def test_comm_breaker_and_comm_inv():
    scheme = toy_commit(8, 2)
    sam = Sam(HashFamily(master_seed(4)), {})
    res = s_tilde_comm(scheme, 8, 3, 0.1, sam, sender_coins=17, receiver_coins=999)
    assert not res.meta["aborted"]
    assert all(scheme.verify(res.com, o) is not None for o in res.openings)
    com, _ = commit(scheme, {}, 1, 5, 77)
    got = comm_inv(scheme.protocol, com.transcript, InvParams(4, 2, 0.1), Sam(HashFamily(master_seed(6)), {}))
    assert all(consistent(scheme.protocol, 0, s, com.transcript, {}) for s in got.preimages)


def test_hit_monitor_halts_with_preimage():
    oracles, H = world(9, seed=2)
    pi = oracles["pi"]
    adv = lambda y, sam: sam_perm_inverter(y, 9, 3, 0.1, sam, unbounded=True)  # noqa: E731
    for y in (0, 17, 511):
        res = hit_monitor(adv, oracles, H, y)
        assert res.x is not None and pi.eval(res.x) == y
        assert res.cost >= res.adversary_cost


def test_hit_monitor_reports_no_hit():
    oracles, H = world(6)
    res = hit_monitor(lambda y, sam: None, oracles, H, 5)
    assert res.x is None and res.cost == 0


def test_alpha_beta_values_are_probabilities():
    oracles, H = world(8, seed=3)
    tr = alpha_beta_trace(chain_adversary(8, 4), oracles, H, 42)
    assert len(tr.records) >= 2
    for r in tr.records:
        assert 0.0 <= r.alpha <= 1.0 and 0.0 <= r.beta <= 1.0
        assert r.support >= 1
    assert len(tr.pairs()) == len(tr.records) - 1
    assert tr.records[0].alpha == 0.0


def test_alpha_beta_enumeration_cap():
    oracles, H = world(8)
    with pytest.raises(ValueError):
        alpha_beta_trace(chain_adversary(8, 2), oracles, H, 1, max_bits=4)


def test_monitor_halts_no_later_than_first_hit():
    from samlab.experiments import exp_hit_monitor
    r = exp_hit_monitor(5, trials=20)
    assert r["successes"] > 0
    assert r["no_later_than_first_hit"] == r["recovered"] == r["successes"]
