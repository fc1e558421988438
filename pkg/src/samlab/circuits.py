"""Oracle-aided programs with canonical identity and constructive lineage.

A program maps an ``m``-bit input (an int, most significant bit first) to an
``l``-bit output while making oracle calls.  Bodies are either a gate list
(AND/OR/XOR/NOT/constant/oracle-call) or a chain of registered host segments.

Canonical encoding, version 1 (all integers big-endian)::

    b"SLP" | u8 version=1 | u8 kind (1 gate, 2 host) | u32 m | u32 l | u32 t
          | 32-byte body hash
          | u8 has_lineage | [32-byte base id | 32-byte tail hash]

The canonical id is SHA-256 of that byte string.  The body hash covers the
whole gate list and output wire list (gate kind) or every segment's
(name, params, out_len, query bound) (host kind), followed by the padding
count: the number of ignored OR gates added by trivial extensions.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Sequence

FORMAT_VERSION = 1

AND, OR, XOR, NOT, CONST, CALL = range(6)
_ARITY = {AND: 2, OR: 2, XOR: 2, NOT: 1, CONST: 1}
_OP_NAMES = {"and": AND, "or": OR, "xor": XOR, "not": NOT, "const": CONST, "call": CALL}


class ProgramError(ValueError):
    pass


class QueryBoundExceeded(RuntimeError):
    pass


class UnknownAnswer(Exception):
    """Raised by a partial oracle when asked a point it does not know."""

    def __init__(self, name: str, x: int):
        super().__init__(f"{name}({x}) unknown")
        self.name = name
        self.x = x


@dataclass(frozen=True)
class GateTail:
    """New gates (wire numbering continues the base's) and new output wires."""
    gates: tuple
    outputs: tuple[int, ...]


@dataclass(frozen=True)
class HostSegment:
    """One host-function piece of a program.

    ``fn(w, call, prev, prev_len)`` returns ``out_len`` bits; ``prev`` holds the
    bits produced by earlier segments.  Everything ``fn`` closes over must be
    encoded in ``params``, otherwise two different programs could share an id.
    """
    name: str
    fn: Callable[..., int]
    out_len: int
    query_bound: int = 0
    params: bytes = b""


@dataclass(frozen=True)
class Reveal:
    """Expose ``bits`` more of the body's already-computed outputs."""
    bits: int


@dataclass(frozen=True)
class Trivial:
    count: int


def _u32(v: int) -> bytes:
    return int(v).to_bytes(4, "big")


def _blob(b: bytes) -> bytes:
    return _u32(len(b)) + b


def _normalize_gate(g: Sequence[Any]) -> tuple:
    op = g[0]
    if isinstance(op, str):
        op = _OP_NAMES[op]
    if op == CALL:
        return (CALL, str(g[1]), tuple(int(i) for i in g[2]), int(g[3]))
    if op == CONST:
        return (CONST, int(g[1]) & 1)
    return (op,) + tuple(int(i) for i in g[1:])


def _gate_bytes(g: tuple) -> bytes:
    op = g[0]
    if op == CALL:
        return bytes([op]) + _blob(g[1].encode()) + _u32(len(g[2])) + b"".join(map(_u32, g[2])) + _u32(g[3])
    return bytes([op]) + b"".join(map(_u32, g[1:]))


def _check_gates(gates: tuple, first_wire: int) -> int:
    wires = first_wire
    for g in gates:
        op = g[0]
        refs = g[2] if op == CALL else (() if op == CONST else g[1:])
        if op != CALL and len(g) - 1 != _ARITY[op]:
            raise ProgramError(f"bad arity in gate {g}")
        for r in refs:
            if not 0 <= r < wires:
                raise ProgramError(f"gate {g} references undefined wire {r}")
        wires += g[3] if op == CALL else 1
    return wires


class OracleProgram:
    """Immutable oracle-aided program.  Compare and hash by canonical id."""

    __slots__ = (
        "input_len", "output_len", "query_bound", "kind", "gates", "wire_count",
        "outputs", "segments", "pad", "full_len", "lineage", "trivial_of", "label",
        "canonical_bytes", "canonical_id", "strip_id", "ext_ids", "_calls",
    )

    def __init__(self, *, input_len: int, output_len: int, kind: str,
                 gates: tuple = (), outputs: tuple = (), segments: tuple = (),
                 pad: int = 0, lineage: tuple | None = None,
                 trivial_of: "OracleProgram | None" = None, label: str = ""):
        if input_len < 0 or output_len < 0:
            raise ProgramError("negative length")
        self.input_len = input_len
        self.output_len = output_len
        self.kind = kind
        self.gates = gates
        self.outputs = outputs
        self.segments = segments
        self.pad = pad
        self.lineage = lineage
        self.trivial_of = trivial_of
        self.label = label
        if kind == "gate":
            self.wire_count = _check_gates(gates, input_len)
            for o in outputs:
                if not 0 <= o < self.wire_count:
                    raise ProgramError(f"output wire {o} undefined")
            self.full_len = len(outputs)
            self._calls = tuple((g[1], len(g[2])) for g in gates if g[0] == CALL)
            self.query_bound = len(self._calls)
            body = (b"".join(_gate_bytes(g) for g in gates) + _u32(len(outputs)) + b"".join(map(_u32, outputs))
                    + b"pad" + _u32(pad))
            tag = 1
        elif kind == "host":
            self.wire_count = 0
            self.full_len = sum(s.out_len for s in segments)
            self._calls = ()
            self.query_bound = sum(s.query_bound for s in segments)
            body = b"".join(
                _blob(s.name.encode()) + _blob(s.params) + _u32(s.out_len) + _u32(s.query_bound)
                for s in segments
            ) + b"pad" + _u32(pad)
            tag = 2
        else:
            raise ProgramError(f"unknown body kind {kind!r}")
        if output_len > self.full_len:
            raise ProgramError("output_len exceeds what the body computes")
        head = b"SLP" + bytes([FORMAT_VERSION, tag]) + _u32(input_len) + _u32(output_len) + _u32(self.query_bound)
        head += hashlib.sha256(body).digest()
        if lineage is None:
            head += b"\x00"
        else:
            base, tail = lineage
            head += b"\x01" + base.canonical_id + hashlib.sha256(_tail_bytes(tail)).digest()
        self.canonical_bytes = head
        self.canonical_id = hashlib.sha256(head).digest()
        self.strip_id = trivial_of.strip_id if trivial_of is not None else self.canonical_id
        ids = {self.strip_id}
        if lineage is not None:
            ids |= lineage[0].ext_ids
        self.ext_ids = frozenset(ids)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, OracleProgram) and other.canonical_id == self.canonical_id

    def __hash__(self) -> int:
        return hash(self.canonical_id)

    def __repr__(self) -> str:
        name = self.label or self.kind
        return f"<{name} m={self.input_len} l={self.output_len} t={self.query_bound} id={self.canonical_id.hex()[:10]}>"

    @property
    def id_hex(self) -> str:
        return self.canonical_id.hex()


def _tail_bytes(tail: Any) -> bytes:
    if isinstance(tail, GateTail):
        return b"G" + b"".join(_gate_bytes(g) for g in tail.gates) + b"|" + b"".join(map(_u32, tail.outputs))
    if isinstance(tail, HostSegment):
        return b"H" + _blob(tail.name.encode()) + _blob(tail.params) + _u32(tail.out_len) + _u32(tail.query_bound)
    if isinstance(tail, Reveal):
        return b"R" + _u32(tail.bits)
    if isinstance(tail, Trivial):
        return b"T" + _u32(tail.count)
    raise ProgramError(f"unknown tail {tail!r}")


@dataclass
class EvalTrace:
    calls: list

    @property
    def count(self) -> int:
        return len(self.calls)


# constructors ---------------------------------------------------------------

def gate_program(m: int, gates: Sequence, outputs: Sequence[int], label: str = "") -> OracleProgram:
    return OracleProgram(input_len=m, output_len=len(outputs), kind="gate",
                         gates=tuple(_normalize_gate(g) for g in gates),
                         outputs=tuple(outputs), label=label)


def host_program(m: int, segments: Sequence[HostSegment] = (), label: str = "") -> OracleProgram:
    segs = tuple(segments)
    return OracleProgram(input_len=m, output_len=sum(s.out_len for s in segs), kind="host",
                         segments=segs, label=label)


def identity(m: int) -> OracleProgram:
    return gate_program(m, (), tuple(range(m)), label=f"id{m}")


def constant(m: int, ell: int, value: int = 0) -> OracleProgram:
    gates = [("const", (value >> (ell - 1 - j)) & 1) for j in range(ell)]
    return gate_program(m, gates, tuple(range(m, m + ell)), label="const")


def apply_oracle(n: int, name: str = "pi", times: int = 1) -> OracleProgram:
    """``w -> name(name(...w))`` applied ``times`` times."""
    gates = []
    src = tuple(range(n))
    nxt = n
    for _ in range(times):
        gates.append(("call", name, src, n))
        src = tuple(range(nxt, nxt + n))
        nxt += n
    return gate_program(n, gates, src, label=f"apply-{name}x{times}")


def truncate(prog: OracleProgram, ell: int) -> OracleProgram:
    """Same body, only the first ``ell`` outputs exposed; no lineage."""
    if not 0 <= ell <= prog.output_len:
        raise ProgramError("cannot truncate beyond the exposed outputs")
    return OracleProgram(input_len=prog.input_len, output_len=ell, kind=prog.kind, gates=prog.gates,
                         outputs=prog.outputs, segments=prog.segments, pad=prog.pad,
                         label=f"{prog.label}[:{ell}]")


def extend(base: OracleProgram, tail: GateTail | HostSegment | Reveal) -> OracleProgram:
    if isinstance(tail, Reveal):
        if base.output_len + tail.bits > base.full_len or tail.bits < 0:
            raise ProgramError("reveal beyond the computed outputs")
        return OracleProgram(input_len=base.input_len, output_len=base.output_len + tail.bits, kind=base.kind,
                             gates=base.gates, outputs=base.outputs, segments=base.segments, pad=base.pad,
                             lineage=(base, tail), label=base.label)
    if base.output_len != base.full_len:
        raise ProgramError("extend a partially exposed program with Reveal first")
    if isinstance(tail, GateTail):
        if base.kind != "gate":
            raise ProgramError("gate tail on a host program")
        # padding becomes real ignored gates so the tail's wire numbers line up
        filler = ((CONST, 0),) if base.pad and base.wire_count == 0 else ()
        filler += ((OR, 0, 0),) * base.pad
        gates = base.gates + filler + tuple(_normalize_gate(g) for g in tail.gates)
        outputs = base.outputs + tuple(tail.outputs)
        return OracleProgram(input_len=base.input_len, output_len=len(outputs), kind="gate", gates=gates,
                             outputs=outputs, lineage=(base, GateTail(gates[len(base.gates):], tuple(tail.outputs))),
                             label=base.label)
    if isinstance(tail, HostSegment):
        if base.kind != "host":
            raise ProgramError("host tail on a gate program")
        segs = base.segments + (tail,)
        return OracleProgram(input_len=base.input_len, output_len=base.output_len + tail.out_len, kind="host",
                             segments=segs, pad=base.pad, lineage=(base, tail), label=base.label)
    raise ProgramError(f"unknown tail {tail!r}")


def ext_trivial(prog: OracleProgram, i: int) -> OracleProgram:
    """Same function, new identity: ``i`` more ignored OR gates (or padding
    segments for host programs), kept as a count rather than materialized."""
    if i < 1:
        raise ProgramError("trivial extension index must be >= 1")
    return OracleProgram(input_len=prog.input_len, output_len=prog.output_len, kind=prog.kind,
                         gates=prog.gates, outputs=prog.outputs, segments=prog.segments, pad=prog.pad + i,
                         lineage=(prog, Trivial(i)), trivial_of=prog, label=prog.label)


def is_extension(a: OracleProgram, b: OracleProgram) -> bool:
    """True when ``b`` was built from ``a`` (up to trivial extensions)."""
    return a.strip_id in b.ext_ids


def query_complexity(prog: OracleProgram) -> int:
    return prog.query_bound


def canonical_bytes(prog: OracleProgram) -> bytes:
    return prog.canonical_bytes


# evaluation -----------------------------------------------------------------

def run(prog: OracleProgram, oracles: Mapping[str, Any], w: int, trace: list | None = None) -> int:
    """Evaluate ``prog`` on ``w``; oracle calls are appended to ``trace`` if given."""
    m = prog.input_len
    if not 0 <= w < (1 << m):
        raise ProgramError(f"input {w!r} is not a {m}-bit string")
    if prog.kind == "gate":
        for name, width in prog._calls:
            if oracles[name].n != width:
                raise ProgramError(f"oracle {name} expects {oracles[name].n} bits, gate feeds {width}")
        vals = [(w >> (m - 1 - i)) & 1 for i in range(m)]
        push = vals.append
        for g in prog.gates:
            op = g[0]
            if op == XOR:
                push(vals[g[1]] ^ vals[g[2]])
            elif op == AND:
                push(vals[g[1]] & vals[g[2]])
            elif op == OR:
                push(vals[g[1]] | vals[g[2]])
            elif op == NOT:
                push(vals[g[1]] ^ 1)
            elif op == CONST:
                push(g[1])
            else:
                x = 0
                for i in g[2]:
                    x = (x << 1) | vals[i]
                y = oracles[g[1]].eval(x)
                if trace is not None:
                    trace.append((g[1], x, y))
                k = g[3]
                vals.extend((y >> (k - 1 - j)) & 1 for j in range(k))
        out = 0
        for i in prog.outputs[:prog.output_len]:
            out = (out << 1) | vals[i]
        return out

    calls = 0
    bound = prog.query_bound

    def call(name: str, x: int) -> int:
        nonlocal calls
        calls += 1
        if calls > bound:
            raise QueryBoundExceeded(f"{prog!r} exceeded its declared {bound} oracle calls")
        y = oracles[name].eval(x)
        if trace is not None:
            trace.append((name, x, y))
        return y

    out = 0
    total = 0
    for seg in prog.segments:
        v = seg.fn(w, call, out, total)
        if not 0 <= v < (1 << seg.out_len):
            raise ProgramError(f"segment {seg.name} returned {v!r}, not {seg.out_len} bits")
        out = (out << seg.out_len) | v
        total += seg.out_len
    return out >> (total - prog.output_len)


def eval(prog: OracleProgram, oracles: Mapping[str, Any], w: int) -> tuple[int, EvalTrace]:  # noqa: A001
    calls: list = []
    out = run(prog, oracles, w, calls)
    return out, EvalTrace(calls)
