"""The collision sampler: answers (w, C, C_next) with a pseudo-uniform preimage
of C(w) under C, plus the bookkeeping around its query forest.

Trace serialization (schema version 1) is JSON lines, one object per call::

    {"v": 1, "kind": "sam", "w": int|null, "c": hex|null, "c_strip": hex|null,
     "c_t": int, "c_next": hex, "c_next_ext": [hex, ...], "m": int, "answer": int}
    {"v": 1, "kind": "oracle", "name": str, "x": int, "y": int}

``c_next_ext`` lists the (trivial-extension-stripped) ids of every program
that ``c_next`` was constructively built from, so extension checks survive
serialization.
"""

from __future__ import annotations

import json
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .circuits import OracleProgram, run
from .oracles import FeistelPRP, HashFamily

TRACE_SCHEMA = 1
INDEX_MAX_BITS = 16


class MalformedQuery(ValueError):
    pass


@dataclass(frozen=True)
class SamQuery:
    w: int | None
    C: OracleProgram | None
    C_next: OracleProgram

    def __post_init__(self) -> None:
        if (self.w is None) != (self.C is None):
            raise MalformedQuery("w and C must both be bottom or both be set")
        if not isinstance(self.C_next, OracleProgram):
            raise MalformedQuery("C_next must be a program")
        if self.C is not None:
            if self.C.input_len != self.C_next.input_len:
                raise MalformedQuery("C and C_next disagree on input length")
            if not 0 <= self.w < (1 << self.C.input_len):
                raise MalformedQuery(f"w={self.w!r} is not a {self.C.input_len}-bit string")

    @property
    def m(self) -> int:
        return self.C_next.input_len

    def canonical_bytes(self) -> bytes:
        if self.C is None:
            head = b"SQ\x01\x00"
        else:
            head = b"SQ\x01\x01" + self.m.to_bytes(4, "big") + self.w.to_bytes((self.m + 7) // 8 or 1, "big")
            head += self.C.canonical_id
        return head + self.C_next.canonical_id


def hash_perm(H: HashFamily, q: SamQuery) -> FeistelPRP:
    return H.perm(q.canonical_bytes(), q.m)


def hash_eval(H: HashFamily, q: SamQuery, v: int) -> int:
    if not 0 <= v < (1 << q.m):
        raise MalformedQuery(f"{v!r} outside the query's {q.m}-bit domain")
    return hash_perm(H, q).eval(v)


def sam_answer(H: HashFamily, oracles: Mapping[str, Any], q: SamQuery) -> int:
    """Literal scan: h_q(0) for a root query, otherwise h_q(v*) for the least
    v* with C(h_q(v*)) = C(w)."""
    h = hash_perm(H, q)
    if q.C is None:
        return h.eval(0)
    target = run(q.C, oracles, q.w)
    for v in range(1 << q.m):
        x = h.eval(v)
        if run(q.C, oracles, x) == target:
            return x
    raise AssertionError("scan exhausted without meeting w itself")


@dataclass
class SamRecord:
    w: int | None
    C: OracleProgram | None
    C_next: OracleProgram
    answer: int
    kind: str = "sam"


@dataclass
class OracleRecord:
    name: str
    x: int
    y: int
    kind: str = "oracle"


@dataclass
class Violation:
    kind: str  # "duplicate_next" | "not_extension" | "orphan"
    index: int
    detail: str = ""


@dataclass
class TraceStats:
    sam_calls: int
    direct_calls: int
    depth: int
    augmented_cost: int
    normal_form: bool
    violations: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "sam_calls": self.sam_calls,
            "direct_calls": self.direct_calls,
            "depth": self.depth,
            "augmented_cost": self.augmented_cost,
            "normal_form": self.normal_form,
            "violations": [v.__dict__ for v in self.violations],
        }


class _Logged:
    __slots__ = ("_sam", "name", "n")

    def __init__(self, sam: "Sam", name: str, n: int):
        self._sam = sam
        self.name = name
        self.n = n

    def eval(self, x: int) -> int:
        return self._sam.oracle(self.name, x)


class _Index:
    __slots__ = ("outs", "groups")

    def __init__(self, prog: OracleProgram, oracles: Mapping[str, Any]):
        outs = [run(prog, oracles, x) for x in range(1 << prog.input_len)]
        groups: dict[int, list[int]] = {}
        for x, o in enumerate(outs):
            groups.setdefault(o, []).append(x)
        self.outs = outs
        self.groups = groups


class IndexStore:
    """Preimage tables keyed by program id.  May be shared by samplers that
    use the same oracles (the tables do not depend on the hash family)."""

    def __init__(self, slots: int = 32):
        self.slots = slots
        self.spent: dict[bytes, int] = {}
        self.tables: OrderedDict[bytes, _Index] = OrderedDict()


class Sam:
    """Stateful sampler owning one trace.  One owner per instance.

    With ``index=True`` a full table of C's outputs is built once scans over C
    have cost about 2^m evaluations, provided C's input is at most 16 bits and
    every oracle it calls is table-backed.  Indexed answers equal the scan's.
    """

    def __init__(self, hashes: HashFamily, oracles: Mapping[str, Any], *,
                 index: bool = True, store: IndexStore | None = None):
        self.H = hashes
        self.oracles = oracles
        self.trace: list = []
        self.use_index = index
        self.store = store if store is not None else IndexStore()

    # adversary-facing calls ---------------------------------------------------
    def query(self, w: int | None, C: OracleProgram | None, C_next: OracleProgram) -> int:
        q = SamQuery(w, C, C_next)
        ans = self._answer(q)
        self.trace.append(SamRecord(w, C, C_next, ans))
        return ans

    def oracle(self, name: str, x: int) -> int:
        y = self.oracles[name].eval(x)
        self.trace.append(OracleRecord(name, x, y))
        return y

    def handles(self) -> dict[str, "_Logged"]:
        """Oracle handles whose calls are recorded as direct calls in the trace."""
        return {name: _Logged(self, name, h.n) for name, h in self.oracles.items()}

    @property
    def sam_calls(self) -> int:
        return sum(1 for r in self.trace if r.kind == "sam")

    def stats(self) -> TraceStats:
        return trace_stats(self.trace)

    # internals -----------------------------------------------------------------
    def _indexable(self, prog: OracleProgram) -> bool:
        if prog.input_len > INDEX_MAX_BITS:
            return False
        if prog.kind == "gate":
            return all(getattr(self.oracles[name], "materialized", False) for name, _ in prog._calls)
        return prog.query_bound == 0

    def _index_for(self, C: OracleProgram) -> _Index | None:
        key = C.canonical_id
        st = self.store
        idx = st.tables.get(key)
        if idx is not None:
            st.tables.move_to_end(key)
            return idx
        if st.spent.get(key, 0) < (1 << C.input_len) or not self._indexable(C):
            return None
        idx = _Index(C, self.oracles)
        st.tables[key] = idx
        if len(st.tables) > st.slots:
            st.tables.popitem(last=False)
        return idx

    def _answer(self, q: SamQuery) -> int:
        h = hash_perm(self.H, q)
        if q.C is None:
            return h.eval(0)
        C = q.C
        idx = self._index_for(C) if self.use_index else None
        if idx is None:
            target = run(C, self.oracles, q.w)
            oracles = self.oracles
            for v in range(1 << q.m):
                x = h.eval(v)
                if run(C, oracles, x) == target:
                    spent = self.store.spent
                    spent[C.canonical_id] = spent.get(C.canonical_id, 0) + v + 2
                    return x
            raise AssertionError("scan exhausted without meeting w itself")
        target = idx.outs[q.w]
        pre = idx.groups[target]
        size = 1 << q.m
        if len(pre) * len(pre) <= size:
            best = min(pre, key=h.invert)
        else:
            outs = idx.outs
            v = 0
            while outs[h.eval(v)] != target:
                v += 1
            best = h.eval(v)
        if run(C, self.oracles, best) != target:
            raise AssertionError("preimage law violated")
        return best


# trace analysis ---------------------------------------------------------------

@dataclass(frozen=True)
class _Row:
    kind: str
    w: int | None = None
    c: str | None = None
    c_strip: str | None = None
    c_t: int = 0
    c_next: str = ""
    c_next_ext: frozenset = frozenset()
    answer: int = 0


def _rows(trace: Iterable) -> list[_Row]:
    rows = []
    for r in trace:
        if isinstance(r, dict):
            if r["kind"] == "sam":
                rows.append(_Row("sam", r["w"], r["c"], r["c_strip"], r["c_t"], r["c_next"],
                                 frozenset(r["c_next_ext"]), r["answer"]))
            else:
                rows.append(_Row("oracle"))
        elif r.kind == "sam":
            C = r.C
            rows.append(_Row("sam", r.w, C.id_hex if C else None, C.strip_id.hex() if C else None,
                             C.query_bound if C else 0, r.C_next.id_hex,
                             frozenset(i.hex() for i in r.C_next.ext_ids), r.answer))
        else:
            rows.append(_Row("oracle"))
    return rows


def forest_parents(trace: Iterable) -> list[int | None]:
    """Parent (index into the Sam-only subsequence) for each Sam call."""
    first: dict[tuple[str, int], int] = {}
    parents: list[int | None] = []
    for row in (r for r in _rows(trace) if r.kind == "sam"):
        i = len(parents)
        parents.append(first.get((row.c, row.w)) if row.c is not None else None)
        first.setdefault((row.c_next, row.answer), i)
    return parents


def forest_insert(parents: list, first: dict, w: int | None, c_id: str | None, c_next_id: str, answer: int) -> int | None:
    """Incremental form of :func:`forest_parents`."""
    i = len(parents)
    p = first.get((c_id, w)) if c_id is not None else None
    parents.append(p)
    first.setdefault((c_next_id, answer), i)
    return p


def trace_depth(trace: Iterable) -> int:
    parents = forest_parents(trace)
    depth: list[int] = []
    for p in parents:
        depth.append(1 if p is None else depth[p] + 1)
    return max(depth, default=0)


def augmented_cost(trace: Iterable) -> int:
    cost = 0
    for r in _rows(trace):
        if r.kind == "oracle":
            cost += 1
        elif r.c is not None:
            cost += r.c_t
    return cost


def normal_form_validate(trace: Iterable) -> list[Violation]:
    rows = [r for r in _rows(trace) if r.kind == "sam"]
    parents = forest_parents(rows_to_dicts(rows))
    seen: set[str] = set()
    out = []
    for i, r in enumerate(rows):
        if r.c_next in seen:
            out.append(Violation("duplicate_next", i, r.c_next[:12]))
        seen.add(r.c_next)
        if r.c is not None:
            if r.c_strip not in r.c_next_ext:
                out.append(Violation("not_extension", i, f"{r.c[:12]} -> {r.c_next[:12]}"))
            if parents[i] is None:
                out.append(Violation("orphan", i, f"w={r.w}"))
    return out


def rows_to_dicts(rows: list[_Row]) -> list[dict]:
    return [
        {"kind": "sam", "w": r.w, "c": r.c, "c_strip": r.c_strip, "c_t": r.c_t, "c_next": r.c_next,
         "c_next_ext": sorted(r.c_next_ext), "answer": r.answer}
        for r in rows
    ]


def trace_stats(trace: list) -> TraceStats:
    rows = _rows(trace)
    sam = sum(1 for r in rows if r.kind == "sam")
    violations = normal_form_validate(trace)
    return TraceStats(sam_calls=sam, direct_calls=len(rows) - sam, depth=trace_depth(trace),
                      augmented_cost=augmented_cost(trace), normal_form=not violations,
                      violations=violations)


def hit_events(trace: Iterable, oracles: Mapping[str, Any], y: int, target: str = "pi") -> list[int]:
    """Indices (into the Sam-only subsequence) of queries (., C, .) whose
    answer w' makes C(w') call ``target`` on the preimage of ``y``.

    The permutation is a bijection, so "called on the preimage of y" is the
    same as "some call to it returned y"; no inversion is needed.
    """
    hits = []
    sam_i = -1
    for r in trace:
        if r.kind != "sam":
            continue
        sam_i += 1
        if r.C is None:
            continue
        calls: list = []
        run(r.C, oracles, r.answer, calls)
        if any(name == target and ans == y for name, _, ans in calls):
            hits.append(sam_i)
    return hits


def trace_to_jsonl(trace: Iterable) -> str:
    lines = []
    for r in trace:
        if r.kind == "sam":
            C = r.C
            obj = {"v": TRACE_SCHEMA, "kind": "sam", "w": r.w, "c": C.id_hex if C else None,
                   "c_strip": C.strip_id.hex() if C else None, "c_t": C.query_bound if C else 0,
                   "c_next": r.C_next.id_hex, "c_next_ext": sorted(i.hex() for i in r.C_next.ext_ids),
                   "m": r.C_next.input_len, "answer": r.answer}
        else:
            obj = {"v": TRACE_SCHEMA, "kind": "oracle", "name": r.name, "x": r.x, "y": r.y}
        lines.append(json.dumps(obj, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def trace_from_jsonl(text: str) -> list[dict]:
    out = []
    for line in text.splitlines():
        if line.strip():
            obj = json.loads(line)
            if obj.get("v") != TRACE_SCHEMA:
                raise ValueError(f"unsupported trace schema {obj.get('v')!r}")
            out.append(obj)
    return out
