import random

import pytest

from samlab.circuits import apply_oracle, constant, ext_trivial, extend, identity, Reveal, run, truncate
from samlab.experiments import random_gate_program
from samlab.oracles import HashFamily, master_seed, perm_sample
from samlab.sam import (
    IndexStore, MalformedQuery, Sam, SamQuery, augmented_cost, forest_parents, hash_perm, hit_events,
    normal_form_validate, sam_answer, trace_depth, trace_from_jsonl, trace_stats, trace_to_jsonl,
)

SEED = master_seed(3)
N = 8
PI = perm_sample(N, SEED, table=True)
OR = {"pi": PI}


def brute(H, q):
    # answer re-derived from the definition: the preimage of C(w) that comes
    # first in the order induced by the hash permutation
    h = hash_perm(H, q)
    if q.C is None:
        return h.eval(0)
    target = run(q.C, OR, q.w)
    pre = [x for x in range(1 << q.m) if run(q.C, OR, x) == target]
    return min(pre, key=h.invert)


def test_root_query_answer():
    H = HashFamily(SEED)
    sam = Sam(H, OR)
    f = apply_oracle(N)
    assert sam.query(None, None, f) == hash_perm(H, SamQuery(None, None, f)).eval(0)


def test_scan_index_and_brute_force_agree():
    H = HashFamily(master_seed(9))
    rng = random.Random(4)
    progs = [truncate(apply_oracle(N), 3), truncate(apply_oracle(N, times=2), 5), constant(N, 2, 1)]
    progs += [random_gate_program(rng, N, oracle_bits=N) for _ in range(4)]
    nxt = identity(N)
    indexed = Sam(H, OR, index=True)
    scanned = Sam(H, OR, index=False)
    for C in progs:
        for _ in range(3 * (1 << N) // 8):  # enough scans to trigger the index
            w = rng.randrange(1 << N)
            q = SamQuery(w, C, nxt)
            a = brute(H, q)
            assert sam_answer(H, OR, q) == a
            assert scanned.query(w, C, nxt) == a
            assert indexed.query(w, C, nxt) == a
    assert indexed.store.tables, "index route was never exercised"


def test_answer_is_a_preimage_and_depends_on_the_query():
    H = HashFamily(SEED)
    sam = Sam(H, OR)
    C = truncate(apply_oracle(N), 2)
    seen = set()
    for w in range(32):
        ans = sam.query(w, C, apply_oracle(N))
        assert run(C, OR, ans) == run(C, OR, w)
        seen.add(ans)
    assert len(seen) > 4


def test_shared_store_gives_same_answers():
    store = IndexStore(slots=2)
    H = HashFamily(SEED)
    C = truncate(apply_oracle(N), 4)
    a, b = Sam(H, OR, store=store), Sam(H, OR, store=store)
    for w in range(0, 256, 3):
        assert a.query(w, C, identity(N)) == b.query(w, C, identity(N))
    assert len(store.tables) <= 2


def test_malformed_queries():
    with pytest.raises(MalformedQuery):
        SamQuery(3, None, identity(4))
    with pytest.raises(MalformedQuery):
        SamQuery(None, identity(4), identity(4))
    with pytest.raises(MalformedQuery):
        SamQuery(1, identity(3), identity(4))
    with pytest.raises(MalformedQuery):
        SamQuery(16, identity(4), identity(4))


def _chain(sam, depth):
    C = truncate(apply_oracle(N), 1)
    w = sam.query(None, None, C)
    for _ in range(depth - 1):
        nxt = extend(C, Reveal(1))
        w = sam.query(w, C, nxt)
        C = nxt
    return w


def test_depth_cost_and_normal_form():
    sam = Sam(HashFamily(SEED), OR)
    _chain(sam, 4)
    sam.oracle("pi", 5)
    st = sam.stats()
    assert (st.sam_calls, st.direct_calls, st.depth) == (4, 1, 4)
    assert st.augmented_cost == 3 + 1
    assert st.normal_form
    assert forest_parents(sam.trace) == [None, 0, 1, 2]


def test_normal_form_violations_detected():
    H = HashFamily(SEED)
    sam = Sam(H, OR)
    f = apply_oracle(N)
    w = sam.query(None, None, f)
    sam.query(None, None, f)                       # duplicate C_next
    sam.query(w, f, constant(N, 1))                # not an extension of f
    sam.query((w + 1) % 256, f, extend(truncate(f, 2), Reveal(1)))  # orphan: (f, w+1) never answered
    kinds = [v.kind for v in normal_form_validate(sam.trace)]
    assert "duplicate_next" in kinds
    assert "not_extension" in kinds
    assert "orphan" in kinds


def test_jsonl_round_trip_preserves_analysis():
    sam = Sam(HashFamily(SEED), OR)
    _chain(sam, 3)
    sam.oracle("pi", 1)
    text = trace_to_jsonl(sam.trace)
    rows = trace_from_jsonl(text)
    assert len(rows) == 4
    assert trace_depth(rows) == trace_depth(sam.trace)
    assert augmented_cost(rows) == augmented_cost(sam.trace)
    assert normal_form_validate(rows) == []
    with pytest.raises(ValueError):
        trace_from_jsonl('{"v": 99}')


def test_hit_events_uses_answer_computation():
    H = HashFamily(SEED)
    sam = Sam(H, OR)
    f = apply_oracle(N)
    w = sam.query(None, None, f)
    ans = sam.query(w, f, ext_trivial(f, 1))
    y_hit = PI.eval(ans)
    assert hit_events(sam.trace, OR, y_hit) == [1]
    other = next(v for v in range(256) if v != y_hit)
    assert hit_events(sam.trace, OR, other) == []


def test_logged_handles_record_direct_calls():
    sam = Sam(HashFamily(SEED), OR)
    h = sam.handles()["pi"]
    assert h.eval(7) == PI.eval(7)
    assert trace_stats(sam.trace).direct_calls == 1
