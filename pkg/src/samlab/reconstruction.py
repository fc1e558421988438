"""Compression of a permutation given a non-hitting inverter.

The encoder keeps, for a set Y of images the inverter handles, only the sets
Y and X = pi^-1(Y) plus the ordering of pi outside X.  The decoder re-runs the
inverter on each y in Y (ascending), answering permutation queries from what
it already knows and sampler queries by scanning the query's hash for the
first point whose value under C is computable and equal to C(w).

Aux blob layout (all integers big-endian)::

    b"SLAX" | version u8 | n u8 | a u32 | payload

The payload is one integer of exactly ``2*bits_comb(2^n, a) + bits_perm(2^n - a)``
bits, zero-padded on the left to whole bytes.  From most to least significant:
rank of Y, rank of X (colex combination ranks), then the Lehmer code of Z.
Z lists, for the complement of X in ascending order, the rank of each image
inside the ascending complement of Y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from .circuits import OracleProgram, UnknownAnswer, apply_oracle, ext_trivial, identity, run, truncate
from .oracles import HashFamily
from .sam import Sam, SamQuery, hash_perm

AUX_MAGIC = b"SLAX"
AUX_VERSION = 1
MAX_SWEEP_BITS = 10

Adversary = Callable[[int, Sam], "int | None"]


class ReconstructionError(RuntimeError):
    """Encoder and decoder disagree, or an adversary breaks the rules."""


# counting and ranking ---------------------------------------------------------------

def ceil_log2(k: int) -> int:
    """Bits needed to index ``k`` alternatives."""
    return (k - 1).bit_length() if k > 1 else 0


def bits_comb(size: int, a: int) -> int:
    return ceil_log2(math.comb(size, a))


def bits_perm(size: int) -> int:
    return ceil_log2(math.factorial(size))


def size_bound_bits(n: int, a: int) -> int:
    N = 1 << n
    return 2 * bits_comb(N, a) + bits_perm(N - a)


def rank_combination(items: list[int]) -> int:
    """Colex rank of a sorted set of distinct naturals."""
    return sum(math.comb(c, i + 1) for i, c in enumerate(sorted(items)))


def unrank_combination(rank: int, a: int) -> list[int]:
    out = []
    for i in range(a, 0, -1):
        c = i - 1
        while math.comb(c + 1, i) <= rank:
            c += 1
        out.append(c)
        rank -= math.comb(c, i)
    return out[::-1]


def lehmer_rank(perm: list[int]) -> int:
    size = len(perm)
    rank = 0
    for i, p in enumerate(perm):
        smaller = sum(1 for q in perm[i + 1:] if q < p)
        rank = rank * (size - i) + smaller
    return rank


def lehmer_unrank(rank: int, size: int) -> list[int]:
    digits = []
    for base in range(1, size + 1):
        rank, d = divmod(rank, base)
        digits.append(d)
    pool = list(range(size))
    return [pool.pop(d) for d in reversed(digits)]


# aux --------------------------------------------------------------------------------

@dataclass
class Aux:
    n: int
    Y: list[int]
    X: list[int]
    Z: list[int]

    @property
    def a(self) -> int:
        return len(self.Y)

    @property
    def payload_bits(self) -> int:
        return size_bound_bits(self.n, self.a)

    def to_bytes(self) -> bytes:
        N = 1 << self.n
        bc, bp = bits_comb(N, self.a), bits_perm(N - self.a)
        v = rank_combination(self.Y)
        v = (v << bc) | rank_combination(self.X)
        v = (v << bp) | lehmer_rank(self.Z)
        nbytes = (2 * bc + bp + 7) // 8
        header = AUX_MAGIC + bytes([AUX_VERSION, self.n]) + self.a.to_bytes(4, "big")
        return header + v.to_bytes(nbytes, "big")

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Aux":
        if blob[:4] != AUX_MAGIC or blob[4] != AUX_VERSION:
            raise ValueError("not a version-1 aux blob")
        n, a = blob[5], int.from_bytes(blob[6:10], "big")
        N = 1 << n
        bc, bp = bits_comb(N, a), bits_perm(N - a)
        v = int.from_bytes(blob[10:], "big")
        z = lehmer_unrank(v & ((1 << bp) - 1), N - a)
        v >>= bp
        X = unrank_combination(v & ((1 << bc) - 1), a)
        Y = unrank_combination(v >> bc, a)
        return cls(n, Y, X, z)


# partial permutation -------------------------------------------------------------------

class PartialPermView:
    """What the decoder knows about pi_n; unknown points raise UnknownAnswer."""

    def __init__(self, n: int, name: str = "pi"):
        self.n = n
        self.name = name
        self.materialized = False
        self.fwd: dict[int, int] = {}
        self.bwd: dict[int, int] = {}

    def known(self, x: int) -> bool:
        return x in self.fwd

    def eval(self, x: int) -> int:
        y = self.fwd.get(x)
        if y is None:
            raise UnknownAnswer(self.name, x)
        return y

    def assign(self, x: int, y: int) -> None:
        if self.fwd.get(x, y) != y or self.bwd.get(y, x) != x:
            raise ReconstructionError(f"conflicting assignment {x} -> {y}")
        self.fwd[x] = y
        self.bwd[y] = x


# instrumented samplers ----------------------------------------------------------------------

class _Halt(Exception):
    def __init__(self, x: int):
        self.x = x


def _require_gates(*progs: OracleProgram | None) -> None:
    for p in progs:
        if p is not None and p.kind != "gate":
            raise ReconstructionError("reconstruction only supports gate-level programs")


class _RecordingSam(Sam):
    """Real sampler that collects every permutation output the run exposes:
    direct calls and the C(w), C(w') evaluations of each Sam call."""

    def __init__(self, H: HashFamily, oracles: Mapping[str, Any], y: int, target: str, halt: bool):
        super().__init__(H, oracles)
        self.y = y
        self.target = target
        self.halt = halt
        self.seen: set[int] = set()
        self.hit = False

    def oracle(self, name: str, x: int) -> int:
        out = super().oracle(name, x)
        if name == self.target:
            if self.halt and out == self.y:
                raise _Halt(x)
            self.seen.add(out)
        return out

    def query(self, w, C, C_next):  # type: ignore[override]
        _require_gates(C, C_next)
        ans = super().query(w, C, C_next)
        if C is not None:
            calls: list = []
            run(C, self.oracles, w, calls)
            run(C, self.oracles, ans, calls)
            for name, _, out in calls:
                if name == self.target:
                    self.seen.add(out)
                    self.hit |= out == self.y
        return ans


class _DecoderSam(Sam):
    def __init__(self, H: HashFamily, view: Mapping[str, Any]):
        super().__init__(H, view, index=False)

    def query(self, w, C, C_next):  # type: ignore[override]
        _require_gates(C, C_next)
        return super().query(w, C, C_next)

    def _answer(self, q: SamQuery) -> int:
        h = hash_perm(self.H, q)
        if q.C is None:
            return h.eval(0)
        try:
            target = run(q.C, self.oracles, q.w)
        except UnknownAnswer as e:
            raise ReconstructionError(f"C(w) not computable from known values ({e})") from None
        for v in range(1 << q.m):
            x = h.eval(v)
            try:
                if run(q.C, self.oracles, x) == target:
                    return x
            except UnknownAnswer:
                continue
        raise ReconstructionError("no computable preimage; encode/decode mismatch")


# encode / decode ------------------------------------------------------------------------------

def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_SWEEP_BITS:
        raise ValueError(f"full sweep limited to n <= {MAX_SWEEP_BITS}, got {n}")


def find_invertible_set(adversary: Adversary, pi, H: HashFamily, n: int, *,
                        context: Mapping[str, Any] | None = None, target: str = "pi") -> list[int]:
    """All y the adversary inverts correctly without any Sam hit on y."""
    _check_n(n)
    oracles = {**(context or {}), target: pi}
    out = []
    for y in range(1 << n):
        sam = _RecordingSam(H, oracles, y, target, halt=False)
        x = adversary(y, sam)
        if x is not None and 0 <= x < (1 << n) and pi.eval(x) == y and not sam.hit:
            out.append(y)
    return out


@dataclass
class EncodeResult:
    aux: Aux
    invertible: list[int]
    removed_per_step: list[int] = field(default_factory=list)
    max_cost: int = 0

    @property
    def blob(self) -> bytes:
        return self.aux.to_bytes()


def encode(adversary: Adversary, pi, H: HashFamily, n: int, *,
           context: Mapping[str, Any] | None = None, target: str = "pi") -> EncodeResult:
    """Pick the smallest remaining invertible y, re-run the adversary on it up
    to the moment it queries pi^-1(y) directly, and strike every pi output the
    run exposed from the remaining set."""
    I = find_invertible_set(adversary, pi, H, n, context=context, target=target)
    oracles = {**(context or {}), target: pi}
    remaining = set(I)
    Y: list[int] = []
    removed: list[int] = []
    max_cost = 0
    while remaining:
        y = min(remaining)
        Y.append(y)
        sam = _RecordingSam(H, oracles, y, target, halt=True)
        try:
            adversary(y, sam)
        except _Halt:
            pass
        if sam.hit:
            raise ReconstructionError(f"adversary hits y={y}; the compression argument does not apply")
        max_cost = max(max_cost, sam.stats().augmented_cost)
        before = len(remaining)
        remaining -= sam.seen
        remaining.discard(y)
        removed.append(before - len(remaining))
    N = 1 << n
    X = sorted(pi.invert(y) if hasattr(pi, "invert") else _preimage(pi, y, N) for y in Y)
    xs = set(X)
    ys = set(Y)
    comp_y = [v for v in range(N) if v not in ys]
    pos = {v: i for i, v in enumerate(comp_y)}
    Z = [pos[pi.eval(x)] for x in range(N) if x not in xs]
    return EncodeResult(Aux(n, sorted(Y), X, Z), I, removed, max_cost)


def _preimage(pi, y: int, N: int) -> int:
    for x in range(N):
        if pi.eval(x) == y:
            return x
    raise ReconstructionError(f"{y} has no preimage")


def decode(aux: Aux, adversary: Adversary, H: HashFamily, *,
           context: Mapping[str, Any] | None = None, target: str = "pi") -> list[int]:
    """Rebuild the full forward table of pi_n from aux and the adversary."""
    n, N = aux.n, 1 << aux.n
    view = PartialPermView(n, target)
    xs = set(aux.X)
    ys = set(aux.Y)
    comp_x = [x for x in range(N) if x not in xs]
    comp_y = [v for v in range(N) if v not in ys]
    if len(aux.Z) != len(comp_x):
        raise ReconstructionError("Z has the wrong length")
    for x, r in zip(comp_x, aux.Z):
        view.assign(x, comp_y[r])
    oracles = {**(context or {}), target: view}
    for y in aux.Y:
        sam = _DecoderSam(H, oracles)
        try:
            x = adversary(y, sam)
        except UnknownAnswer as e:
            if e.name != target:
                raise
            x = e.x
        if x is None or x not in xs or view.known(x):
            raise ReconstructionError(f"could not place the preimage of {y} (got {x!r})")
        view.assign(x, y)
    if len(view.fwd) != N:
        raise ReconstructionError("permutation incomplete after decoding")
    return [view.fwd[x] for x in range(N)]


# test adversaries -----------------------------------------------------------------------------

def brute_force_adversary(n: int, target: str = "pi") -> Adversary:
    """Query pi on 0, 1, 2, ... until y appears.  No Sam use."""
    def adv(y: int, sam: Sam) -> int | None:
        for x in range(1 << n):
            if sam.oracle(target, x) == y:
                return x
        return None
    return adv


def table_adversary(pi, n: int, fraction: int = 4) -> Adversary:
    """Hardwired knowledge of pi on the first 2^n / fraction inputs; no queries."""
    known = {pi.eval(x): x for x in range((1 << n) // fraction)}

    def adv(y: int, sam: Sam) -> int | None:
        return known.get(y)
    return adv


def sam_walk_adversary(n: int, probes: int = 3, target: str = "pi") -> Adversary:
    """Sam-chosen random start, then a direct linear walk.  The first few
    probes also ask Sam for a collision of pi(x) with its last two bits
    dropped, but only when pi(x) and y differ above those bits, so no Sam
    evaluation can touch pi^-1(y)."""
    start_prog = identity(n)
    drop2 = truncate(apply_oracle(n, target), max(n - 2, 0))

    def adv(y: int, sam: Sam) -> int | None:
        r = sam.query(None, None, start_prog)
        for i in range(1 << n):
            x = (r + i) % (1 << n)
            v = sam.oracle(target, x)
            if v == y:
                return x
            if i < probes and (v >> 2) != (y >> 2):
                sam.query(x, drop2, ext_trivial(drop2, i + 1))
        return None
    return adv
