import hashlib

import pytest

from samlab.circuits import (
    GateTail, HostSegment, ProgramError, QueryBoundExceeded, Reveal, apply_oracle, constant, eval as run_traced,
    ext_trivial, extend, gate_program, host_program, identity, is_extension, query_complexity, run, truncate,
)
from samlab.oracles import master_seed, perm_sample

PI = perm_sample(6, master_seed(5), table=True)
OR = {"pi": PI}


def test_identity_and_constant():
    assert [run(identity(4), {}, w) for w in range(16)] == list(range(16))
    assert {run(constant(4, 3, 5), {}, w) for w in range(16)} == {5}


def test_apply_oracle_and_trace():
    prog = apply_oracle(6, times=2)
    out, tr = run_traced(prog, OR, 9)
    assert out == PI.eval(PI.eval(9))
    assert tr.count == 2 == query_complexity(prog)
    assert tr.calls[0] == ("pi", 9, PI.eval(9))


def test_bits_are_msb_first():
    # output = (w0 AND w1), w2 where w0 is the most significant input bit
    prog = gate_program(3, [("and", 0, 1)], [3, 2])
    assert run(prog, {}, 0b110) == 0b10
    assert run(prog, {}, 0b111) == 0b11
    assert run(prog, {}, 0b011) == 0b01


def test_malformed_gates_rejected():
    with pytest.raises(ProgramError):
        gate_program(2, [("and", 0, 5)], [2])
    with pytest.raises(ProgramError):
        gate_program(2, [("not", 0, 1)], [2])
    with pytest.raises(ProgramError):
        gate_program(2, [], [3])
    with pytest.raises(ProgramError):
        run(identity(3), {}, 8)


def test_oracle_width_mismatch():
    with pytest.raises(ProgramError):
        run(apply_oracle(5), OR, 0)


def test_truncate_and_reveal_lineage():
    f = apply_oracle(6)
    f2 = truncate(f, 2)
    f4 = extend(f2, Reveal(2))
    assert run(f4, OR, 7) == PI.eval(7) >> 2
    assert is_extension(f2, f4)
    assert not is_extension(f4, f2)
    with pytest.raises(ProgramError):
        extend(f4, Reveal(3))


def test_trivial_extension_preserves_function_changes_identity():
    f = truncate(apply_oracle(6), 3)
    e1, e2 = ext_trivial(f, 1), ext_trivial(f, 2)
    assert len({f.canonical_id, e1.canonical_id, e2.canonical_id}) == 3
    assert all(run(e2, OR, w) == run(f, OR, w) for w in range(64))
    assert e1.strip_id == f.strip_id
    # extension holds modulo trivial padding on either side
    g = extend(f, Reveal(1))
    assert is_extension(e1, extend(ext_trivial(f, 3), Reveal(1)))
    assert is_extension(f, g)
    with pytest.raises(ProgramError):
        ext_trivial(f, 0)


def test_gate_tail_after_padding_keeps_wires_aligned():
    base = ext_trivial(identity(2), 3)
    prog = extend(base, GateTail((("xor", 0, 1),), (base.wire_count + 3,)))
    assert [run(prog, {}, w) for w in range(4)] == [0b000, 0b011, 0b101, 0b110]
    assert is_extension(identity(2), prog)


def test_canonical_bytes_layout():
    prog = identity(2)
    body = b"\x00\x00\x00\x02" + b"\x00\x00\x00\x00" + b"\x00\x00\x00\x01" + b"pad" + b"\x00\x00\x00\x00"
    expect = (b"SLP" + bytes([1, 1]) + (2).to_bytes(4, "big") * 2 + (0).to_bytes(4, "big")
              + hashlib.sha256(body).digest() + b"\x00")
    assert prog.canonical_bytes == expect
    assert prog.canonical_id == hashlib.sha256(expect).digest()


def test_same_construction_same_id():
    assert apply_oracle(6, times=2) == apply_oracle(6, times=2)
    assert apply_oracle(6).canonical_id != apply_oracle(6, name="G").canonical_id


def test_host_program_bound_enforced():
    def greedy(w, call, prev, prev_len):
        return call("pi", w) ^ call("pi", 0)

    ok = host_program(6, [HostSegment("two", greedy, 6, 2)])
    assert run(ok, OR, 3) == PI.eval(3) ^ PI.eval(0)
    cheat = host_program(6, [HostSegment("two", greedy, 6, 1)])
    with pytest.raises(QueryBoundExceeded):
        run(cheat, OR, 3)


def test_host_chain_and_extension():
    seg1 = HostSegment("lo", lambda w, call, prev, pl: w & 3, 2, 0)
    seg2 = HostSegment("hi", lambda w, call, prev, pl: (w >> 2) ^ prev, 2, 0)
    p1 = extend(host_program(4), seg1)
    p2 = extend(p1, seg2)
    assert run(p2, {}, 0b1101) == (0b01 << 2) | (0b11 ^ 0b01)
    assert is_extension(p1, p2)
    with pytest.raises(ProgramError):
        extend(p1, GateTail((), ()))
