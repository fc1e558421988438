"""Seeded random permutations, trapdoor-permutation families and the per-query
permutation family used by the collision sampler.

Seed derivation (format version 1) is byte-exact:

    prf(key, tag, data, size) = BLAKE2b(key=key, digest_size=size,
                                        msg = u16be(len(tag)) || tag || data)

Every derived seed is 32 bytes.  The permutation family keys one Feistel
network per canonical query; its round keys are the 8-byte big-endian words of
``prf(master_seed, b"samlab/v1/hq", query_bytes, 8 * rounds)``.
"""

from __future__ import annotations

import hashlib
import random
from typing import Protocol

MAX_BITS = 30
SEED_LEN = 32
FEISTEL_ROUNDS = 8

_M64 = (1 << 64) - 1


class OracleError(ValueError):
    """Out-of-range argument or misuse of an oracle."""


class CapabilityError(PermissionError):
    """Raised when an eval-only handle is asked to invert."""


def prf(key: bytes, tag: bytes, data: bytes = b"", size: int = SEED_LEN) -> bytes:
    h = hashlib.blake2b(key=key[:64], digest_size=size)
    h.update(len(tag).to_bytes(2, "big"))
    h.update(tag)
    h.update(data)
    return h.digest()


def master_seed(seed: int) -> bytes:
    """Map a user-facing integer seed to a 256-bit master seed."""
    return prf(b"samlab", b"samlab/v1/master", int(seed).to_bytes(16, "big", signed=True))


def derive(seed: bytes, label: str, *parts: int) -> bytes:
    data = b"".join(int(p).to_bytes(16, "big", signed=True) for p in parts)
    return prf(seed, b"samlab/v1/" + label.encode(), data)


def _check_bits(n: int) -> None:
    if not isinstance(n, int) or not 1 <= n <= MAX_BITS:
        raise OracleError(f"domain bit-length must be in [1, {MAX_BITS}], got {n!r}")


class PermutationHandle(Protocol):
    n: int
    name: str

    def eval(self, x: int) -> int: ...


class PermutationOracle:
    """Uniform random permutation of ``[0, 2**n)``, revealed lazily.

    With ``table=True`` (allowed for n <= 16) the whole permutation is drawn up
    front.  A table-backed oracle answers independently of query order, which
    is what lets the collision sampler use its preimage index.
    """

    def __init__(self, n: int, seed: bytes, *, table: bool = False, name: str = "pi"):
        _check_bits(n)
        if table and n > 16:
            raise OracleError("full-table sampling is limited to n <= 16")
        self.n = n
        self.size = 1 << n
        self.name = name
        self.seed = seed
        self.eval_count = 0
        self._rng = random.Random(int.from_bytes(prf(seed, b"samlab/v1/perm"), "big"))
        self.materialized = table
        if table:
            fwd = list(range(self.size))
            self._rng.shuffle(fwd)
            bwd = [0] * self.size
            for x, y in enumerate(fwd):
                bwd[y] = x
            self._fwd: dict[int, int] | list[int] = fwd
            self._bwd: dict[int, int] | list[int] = bwd
        else:
            self._fwd = {}
            self._bwd = {}

    def _check(self, v: int) -> None:
        if not 0 <= v < self.size:
            raise OracleError(f"element {v!r} outside [0, 2^{self.n})")

    def eval(self, x: int) -> int:
        self.eval_count += 1
        if self.materialized:
            self._check(x)
            return self._fwd[x]
        y = self._fwd.get(x)
        if y is None:
            self._check(x)
            y = self._fresh(self._bwd)
            self._insert(x, y)
        return y

    def invert(self, y: int) -> int:
        if self.materialized:
            self._check(y)
            return self._bwd[y]
        x = self._bwd.get(y)
        if x is None:
            self._check(y)
            x = self._fresh(self._fwd)
            self._insert(x, y)
        return x

    def _fresh(self, taken: dict[int, int]) -> int:
        while True:
            v = self._rng.getrandbits(self.n)
            if v not in taken:
                return v

    def _insert(self, x: int, y: int) -> None:
        if x in self._fwd or y in self._bwd:
            raise AssertionError("permutation bookkeeping conflict")
        self._fwd[x] = y
        self._bwd[y] = x

    def known(self, x: int) -> bool:
        return self.materialized or x in self._fwd

    def table(self) -> list[int]:
        """Full forward table (populates every point in lazy mode)."""
        return [self.eval(x) for x in range(self.size)]

    def eval_handle(self) -> "EvalOnly":
        return EvalOnly(self)


class EvalOnly:
    """Adversary-facing view of a permutation: evaluation only."""

    __slots__ = ("_oracle", "n", "name", "materialized")

    def __init__(self, oracle: PermutationOracle):
        self._oracle = oracle
        self.n = oracle.n
        self.name = oracle.name
        self.materialized = oracle.materialized

    def eval(self, x: int) -> int:
        return self._oracle.eval(x)

    def invert(self, y: int) -> int:
        raise CapabilityError("this handle cannot invert the permutation")


def perm_sample(n: int, seed: bytes, *, table: bool = False, name: str = "pi") -> PermutationOracle:
    return PermutationOracle(n, seed, table=table, name=name)


def perm_eval(p: PermutationOracle | EvalOnly, x: int) -> int:
    return p.eval(x)


def perm_invert(p: PermutationOracle, y: int) -> int:
    return p.invert(y)


class TdpOracle:
    """Random trapdoor permutation family: G maps trapdoors to public keys and
    every public key indexes its own lazily created permutation."""

    def __init__(self, n: int, seed: bytes):
        _check_bits(n)
        self.n = n
        self.seed = seed
        self.G = PermutationOracle(n, derive(seed, "tdp-G"), name="G")
        self._F: dict[int, PermutationOracle] = {}

    def _perm(self, pk: int) -> PermutationOracle:
        p = self._F.get(pk)
        if p is None:
            self.G._check(pk)
            p = PermutationOracle(self.n, derive(self.seed, "tdp-F", pk), name="F")
            self._F[pk] = p
        return p

    def gen(self, td: int) -> int:
        return self.G.eval(td)

    def eval(self, pk: int, x: int) -> int:
        return self._perm(pk).eval(x)

    def invert(self, td: int, y: int) -> int:
        return self._perm(self.G.eval(td)).invert(y)


def tdp_sample(n: int, seed: bytes) -> TdpOracle:
    return TdpOracle(n, seed)


def tdp_gen(t: TdpOracle, td: int) -> int:
    return t.gen(td)


def tdp_eval(t: TdpOracle, pk: int, x: int) -> int:
    return t.eval(pk, x)


def tdp_invert(t: TdpOracle, td: int, y: int) -> int:
    return t.invert(td, y)


def _mix(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


class FeistelPRP:
    """Keyed permutation of ``[0, 2**m)``: an unbalanced Feistel network with
    halves of ``m // 2`` and ``m - m // 2`` bits.  Widths swap every round, so
    with an even round count the state returns to its original split."""

    __slots__ = ("m", "keys", "_a", "_b")

    def __init__(self, key: bytes, m: int):
        if m < 0:
            raise OracleError("negative width")
        self.m = m
        self._a = m // 2
        self._b = m - self._a
        self.keys = tuple(int.from_bytes(key[8 * i: 8 * i + 8], "big") for i in range(FEISTEL_ROUNDS))

    def eval(self, v: int) -> int:
        wl, wr = self._a, self._b
        left, right = v >> wr, v & ((1 << wr) - 1)
        for k in self.keys:
            left, right = right, (left ^ _mix(right ^ k)) & ((1 << wl) - 1)
            wl, wr = wr, wl
        return (left << wr) | right

    def invert(self, y: int) -> int:
        wl, wr = self._a, self._b
        left, right = y >> wr, y & ((1 << wr) - 1)
        for k in reversed(self.keys):
            prev_right = left
            prev_left = (right ^ _mix(prev_right ^ k)) & ((1 << wr) - 1)
            left, right = prev_left, prev_right
            wl, wr = wr, wl
        return (left << wr) | right


class HashFamily:
    """The family {h_q}: one keyed permutation per canonical query encoding."""

    def __init__(self, seed: bytes):
        self.seed = seed
        self._cache: dict[tuple[bytes, int], FeistelPRP] = {}

    def perm(self, query_bytes: bytes, m: int) -> FeistelPRP:
        key = (query_bytes, m)
        p = self._cache.get(key)
        if p is None:
            if len(self._cache) > 4096:
                self._cache.clear()
            p = FeistelPRP(prf(self.seed, b"samlab/v1/hq", query_bytes, 8 * FEISTEL_ROUNDS), m)
            self._cache[key] = p
        return p
