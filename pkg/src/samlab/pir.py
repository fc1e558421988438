"""Commitment from single-server PIR plus a seeded extractor.

The sender picks a random database x and plays the PIR server against the
receiver, who asks for a random index i.  It then sends a Toeplitz seed t and
the masked secret Ext(x, t) ^ s.  Opening reveals (s, x); the receiver checks
x_i against what the PIR run gave it and re-derives the mask.

Toeplitz seed layout: for an ``out x n`` matrix T with T[r][c] = T[r+1][c+1],
the seed's bits (most significant first) are the first column T[0..out-1][0]
followed by the rest of the first row T[0][1..n-1].  Inputs and outputs are
bit strings read most significant bit first; output bit r is the GF(2) inner
product of row r with x.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable

from .oracles import derive, master_seed
from .protocols import Com, CommitmentScheme, PartySpec, Protocol, execute, parity


# extractor --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtractorSpec:
    input_len: int
    out_len: int

    def __post_init__(self) -> None:
        if self.input_len < 1 or self.out_len < 1:
            raise ValueError("extractor lengths must be positive")

    @property
    def seed_len(self) -> int:
        return self.input_len + self.out_len - 1


@lru_cache(maxsize=4096)
def toeplitz_rows(spec: ExtractorSpec, t: int) -> tuple[int, ...]:
    n, o = spec.input_len, spec.out_len
    if not 0 <= t < (1 << spec.seed_len):
        raise ValueError(f"seed must be {spec.seed_len} bits")
    bits = [(t >> (spec.seed_len - 1 - i)) & 1 for i in range(spec.seed_len)]
    col, row = bits[:o], [bits[0]] + bits[o:]
    rows = []
    for r in range(o):
        v = 0
        for c in range(n):
            v = (v << 1) | (col[r - c] if c <= r else row[c - r])
        rows.append(v)
    return tuple(rows)


def ext_eval(spec: ExtractorSpec, x: int, t: int) -> int:
    if not 0 <= x < (1 << spec.input_len):
        raise ValueError(f"input must be {spec.input_len} bits")
    out = 0
    for r in toeplitz_rows(spec, t):
        out = (out << 1) | parity(r & x)
    return out


def ext_columns(spec: ExtractorSpec, t: int) -> list[int]:
    """Column c of T as an out_len-bit integer (row 0 most significant)."""
    rows = toeplitz_rows(spec, t)
    n = spec.input_len
    return [sum(((r >> (n - 1 - c)) & 1) << (len(rows) - 1 - k) for k, r in enumerate(rows)) for c in range(n)]


# GF(2) linear algebra -------------------------------------------------------------------

def gf2_basis(vectors) -> list[int]:
    """Echelon basis (distinct leading bits) of the span."""
    basis: list[int] = []
    for v in vectors:
        for b in basis:
            v = min(v, v ^ b)
        if v:
            basis.append(v)
            basis.sort(reverse=True)
    return basis


def gf2_in_span(basis: list[int], v: int) -> bool:
    for b in basis:
        v = min(v, v ^ b)
    return v == 0


# PIR --------------------------------------------------------------------------------------

def bit_at(x: int, i: int, n: int) -> int:
    return (x >> (n - 1 - i)) & 1


@dataclass(frozen=True)
class PirSpec:
    """Single-server PIR with deterministic parties.  The server (role 0) holds
    x; the user (role 1) holds index i.

    ``server_next(x, received)`` and ``user_next(i, received)`` produce the next
    message; ``user_output(i, server_msgs)`` recovers x_i; ``posterior(i,
    server_msgs)`` returns (mask, values): the bits of x fixed by the run.
    """
    name: str
    n: int
    order: tuple[int, ...]
    server_schedule: tuple[int, ...]
    user_schedule: tuple[int, ...]
    server_next: Callable[[int, tuple[int, ...]], int]
    user_next: Callable[[int, tuple[int, ...]], int]
    user_output: Callable[[int, tuple[int, ...]], int]
    posterior: Callable[[int, tuple[int, ...]], tuple[int, int]]

    @property
    def server_comm_bits(self) -> int:
        return sum(self.server_schedule)

    @property
    def index_bits(self) -> int:
        return max(1, (self.n - 1).bit_length())

    def run(self, x: int, i: int) -> tuple[tuple[int, int], ...]:
        got = ([], [])
        out = []
        for role in self.order:
            if role == 0:
                msg = self.server_next(x, tuple(got[0]))
            else:
                msg = self.user_next(i, tuple(got[1]))
            got[1 - role].append(msg)
            out.append((role, msg))
        return tuple(out)


def clear_index_pir(n: int) -> PirSpec:
    """The user sends i in the clear; the server answers x_i."""
    _check_db(n)
    bits = max(1, (n - 1).bit_length())
    return PirSpec(
        "clear_index", n, (1, 0), (1,), (bits,),
        server_next=lambda x, rec: bit_at(x, rec[0], n),
        user_next=lambda i, rec: i,
        user_output=lambda i, msgs: msgs[0],
        posterior=lambda i, msgs: (1 << (n - 1 - i), msgs[0] << (n - 1 - i)),
    )


def full_download_pir(n: int) -> PirSpec:
    """The server sends the whole database."""
    _check_db(n)
    full = (1 << n) - 1
    return PirSpec(
        "full_download", n, (0,), (n,), (),
        server_next=lambda x, rec: x,
        user_next=lambda i, rec: 0,
        user_output=lambda i, msgs: bit_at(msgs[0], i, n),
        posterior=lambda i, msgs: (full, msgs[0]),
    )


def _check_db(n: int) -> None:
    if n < 2:
        raise ValueError(f"database length must be at least 2, got {n}")


def mock_pirs(n: int) -> dict[str, PirSpec]:
    return {"clear_index": clear_index_pir(n), "full_download": full_download_pir(n)}


def posterior_min_entropy(pir: PirSpec, i: int, server_msgs: tuple[int, ...]) -> int:
    """Min-entropy (bits) of a uniform x given the PIR run: the free bit count."""
    mask, _ = pir.posterior(i, server_msgs)
    return pir.n - bin(mask).count("1")


# the commitment -------------------------------------------------------------------------------

@dataclass(frozen=True)
class ComParams:
    n: int
    k: int
    d: int

    def __post_init__(self) -> None:
        if self.d < 6:
            raise ValueError("d must be at least 6 (the secret would be empty)")
        if self.k < 2 * self.d:
            raise ValueError("need k >= 2d")
        if self.n < 2:
            raise ValueError("need n >= 2")

    @property
    def secret_len(self) -> int:
        return self.d // 6

    @property
    def extractor(self) -> ExtractorSpec:
        return ExtractorSpec(self.n, self.secret_len)


INDEX_SLACK = 16


@dataclass(frozen=True)
class PirCom:
    """The commitment over a given PIR.  When the PIR ends with a server
    message, (t, y) rides on that message instead of following it, so every
    party message stays a function of what it has received."""
    pir: PirSpec
    params: ComParams
    scheme: CommitmentScheme
    merged: bool

    @property
    def sender_comm_bits(self) -> int:
        ext = self.params.extractor
        return self.pir.server_comm_bits + ext.seed_len + ext.out_len

    @property
    def within_entropy_bound(self) -> bool:
        return self.pir.server_comm_bits <= self.params.n - self.params.k

    def index_of(self, receiver_coins: int) -> int:
        return receiver_coins % self.params.n

    def pack(self, pir_last: int | None, t: int, y: int) -> int:
        """Last sender message: [last PIR server message] || t || y."""
        ext = self.params.extractor
        tail = (t << ext.out_len) | y
        if self.merged:
            return (pir_last << (ext.seed_len + ext.out_len)) | tail
        return tail

    def unpack(self, transcript) -> tuple[tuple[int, ...], int, int]:
        """(PIR server messages, t, y) from a commit transcript."""
        ext = self.params.extractor
        server = [m for s, m in transcript if s == 0]
        final = server.pop()
        tail_bits = ext.seed_len + ext.out_len
        if self.merged:
            server.append(final >> tail_bits)
        final &= (1 << tail_bits) - 1
        return tuple(server), final >> ext.out_len, final & ((1 << ext.out_len) - 1)


def pir_com(pir: PirSpec, params: ComParams) -> PirCom:
    """Build the commitment as a two-party protocol.

    Sender seed = s || x || t.  Receiver coins pick i as ``coins mod n`` from
    ``index_bits + 16`` bits, so the index is uniform up to n / 2^(bits+16).
    """
    if pir.n != params.n:
        raise ValueError("PIR database length differs from n")
    if any(a == b == 0 for a, b in zip(pir.order, pir.order[1:])):
        raise ValueError("PIR server messages must alternate with user messages")
    n = params.n
    ext = params.extractor
    tl = ext.seed_len
    merged = bool(pir.order) and pir.order[-1] == 0
    n_user = len(pir.user_schedule)
    # which server message is due after r user messages
    due, r = {}, 0
    for role in pir.order:
        if role == 0:
            due[r] = len(due)
        else:
            r += 1
    last = len(pir.server_schedule) - 1
    tail = tl + ext.out_len
    if merged:
        sched = pir.server_schedule[:-1] + (pir.server_schedule[-1] + tail,)
        order = pir.order
    else:
        sched = pir.server_schedule + (tail,)
        order = pir.order + (0,)

    def sender_next(s: int, coins: int, received: tuple[int, ...], call) -> int:
        x, t = coins >> tl, coins & ((1 << tl) - 1)
        j = due.get(len(received))
        final = len(received) == n_user and (not merged or j == last)
        if not final:
            return pir.server_next(x, received)
        tail_msg = (t << ext.out_len) | (ext_eval(ext, x, t) ^ s)
        if merged:
            return (pir.server_next(x, received) << tail) | tail_msg
        return tail_msg

    def receiver_next(_: int, coins: int, received: tuple[int, ...], call) -> int:
        return pir.user_next(coins % n, received)

    tag = f"pir_com/{pir.name}/n={n}/k={params.k}/d={params.d}".encode()
    sender = PartySpec("pir-com-sender", n + tl, sched, sender_next, input_len=ext.out_len, params=tag)
    receiver = PartySpec("pir-com-receiver", pir.index_bits + INDEX_SLACK, pir.user_schedule, receiver_next,
                         params=tag)
    protocol = Protocol((sender, receiver), order)
    holder: list[PirCom] = []

    def verify(com: Com, reveal: Any) -> int | None:
        return com_verify(holder[0], com, reveal)

    def opening(s: int, coins: int) -> tuple[int, int]:
        return s, coins >> tl

    out = PirCom(pir, params, CommitmentScheme(f"pir_com({pir.name})", protocol, verify, opening), merged)
    holder.append(out)
    return out


def com_commit(com: PirCom, s: int, sender_coins: int, receiver_coins: int) -> tuple[Com, tuple[int, int]]:
    ext = com.params.extractor
    if not 0 <= s < (1 << ext.out_len):
        raise ValueError(f"secret must be {ext.out_len} bits")
    ex = execute(com.scheme.protocol, {}, [(s, sender_coins), (0, receiver_coins)])
    if sum(com.scheme.sender.schedule) != com.sender_comm_bits:
        raise AssertionError("sender communication does not match the ledger")
    return Com(receiver_coins, ex.transcript), com.scheme.opening(s, sender_coins)


def com_reveal(state: tuple[int, int]) -> tuple[int, int]:
    return state


def com_verify(com: PirCom, c: Com, reveal: Any) -> int | None:
    try:
        s, x = reveal
    except (TypeError, ValueError):
        return None
    n = com.params.n
    ext = com.params.extractor
    if not (isinstance(s, int) and isinstance(x, int) and 0 <= s < (1 << ext.out_len) and 0 <= x < (1 << n)):
        return None
    server_msgs, t, y = com.unpack(c.transcript)
    i = com.index_of(c.receiver_coins)
    if com.pir.user_output(i, server_msgs) != bit_at(x, i, n):
        return None
    if y != ext_eval(ext, x, t) ^ s:
        return None
    return s


# hiding -----------------------------------------------------------------------------------------

@dataclass
class ComHiding:
    rho: float
    se: float
    trials: int
    method: str
    min_entropy_mean: float
    min_entropy_min: int
    within_entropy_bound: bool
    extractor_substituted: bool = True

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _conditional_tv(com: PirCom, i: int, server_msgs: tuple[int, ...], t: int, s0: int, s1: int) -> float:
    """Exact distance between the last sender message under s0 and s1, given
    i, the PIR messages and t: Ext(x, t) is uniform on a coset of the span of
    T's columns at the free positions of x, so the distance is 0 or 1."""
    if s0 == s1:
        return 0.0
    ext = com.params.extractor
    mask, _ = com.pir.posterior(i, server_msgs)
    n = com.params.n
    cols = ext_columns(ext, t)
    free = [cols[c] for c in range(n) if not (mask >> (n - 1 - c)) & 1]
    return 0.0 if gf2_in_span(gf2_basis(free), s0 ^ s1) else 1.0


def com_hiding_estimate(com: PirCom, trials: int, seed: int = 0, secrets: tuple[int, int] = (0, 1)) -> ComHiding:
    """Monte-Carlo over the parts of the transcript that do not depend on the
    secret (i, x's PIR messages, t), with the remaining distance computed
    exactly per sample."""
    n = com.params.n
    ext = com.params.extractor
    rng = random.Random(int.from_bytes(derive(master_seed(seed), "pir-hiding"), "big"))
    vals, ents = [], []
    for _ in range(trials):
        i = rng.getrandbits(com.scheme.receiver.coin_len) % n
        x = rng.getrandbits(n)
        t = rng.getrandbits(ext.seed_len)
        msgs = tuple(m for s, m in com.pir.run(x, i) if s == 0)
        vals.append(_conditional_tv(com, i, msgs, t, *secrets))
        ents.append(posterior_min_entropy(com.pir, i, msgs))
    mean = sum(vals) / trials
    var = sum((v - mean) ** 2 for v in vals) / max(trials - 1, 1)
    return ComHiding(mean, math.sqrt(var / trials), trials, "conditional", sum(ents) / trials, min(ents),
                     com.within_entropy_bound)


def com_hiding_exact(com: PirCom, secrets: tuple[int, int] = (0, 1)) -> float:
    """Brute-force distance between full commit transcripts (tiny n only)."""
    n = com.params.n
    ext = com.params.extractor
    if n + ext.seed_len > 20:
        raise ValueError("exact enumeration limited to 20 sender coin bits")
    dists = []
    for s in secrets:
        counts: dict = {}
        for i in range(n):
            for x in range(1 << n):
                for t in range(1 << ext.seed_len):
                    msgs = com.pir.run(x, i)
                    key = (i, msgs, t, ext_eval(ext, x, t) ^ s)
                    counts[key] = counts.get(key, 0) + 1
        dists.append(counts)
    total = n << (n + ext.seed_len)
    keys = set(dists[0]) | set(dists[1])
    return 0.5 * sum(abs(dists[0].get(k, 0) - dists[1].get(k, 0)) for k in keys) / total


# binding -> PIR privacy -------------------------------------------------------------------------

class Breaker:
    """A cheating committer.  ``start(rng)`` begins a session, ``next_message``
    answers the receiver, ``openings()`` returns the (s, x) pairs it claims."""

    def start(self, rng: random.Random) -> None:  # pragma: no cover - interface
        raise NotImplementedError

    def next_message(self, received: tuple[int, ...]) -> int:  # pragma: no cover
        raise NotImplementedError

    def openings(self) -> list[tuple[int, int]]:  # pragma: no cover
        raise NotImplementedError


class OmniscientClearIndexBreaker(Breaker):
    """Reads i off the clear-index query, answers with x1_i, and opens to x1
    and to x1 with one off-index bit flipped whose Toeplitz column is nonzero."""

    def __init__(self, com: PirCom):
        if com.pir.name != "clear_index":
            raise ValueError("this breaker only works against clear_index")
        self.com = com

    def start(self, rng: random.Random) -> None:
        self.rng = rng
        self.x1 = rng.getrandbits(self.com.params.n)
        self._open: list = []

    def next_message(self, received: tuple[int, ...]) -> int:
        n = self.com.params.n
        ext = self.com.params.extractor
        i = received[0] % n
        t = self.rng.getrandbits(ext.seed_len)
        cols = ext_columns(ext, t)
        s1 = self.rng.getrandbits(ext.out_len)
        y = ext_eval(ext, self.x1, t) ^ s1
        choices = [c for c in range(n) if c != i and cols[c]]
        self._open = [(s1, self.x1)]
        if choices:
            x2 = self.x1 ^ (1 << (n - 1 - self.rng.choice(choices)))
            self._open.append((ext_eval(ext, x2, t) ^ y, x2))
        return self.com.pack(bit_at(self.x1, i, n), t, y)

    def openings(self) -> list[tuple[int, int]]:
        return list(self._open)


class SameDatabaseBreaker(Breaker):
    """Honest commitment to 0 opened twice with the same x (never a break)."""

    def __init__(self, com: PirCom):
        self.com = com

    def start(self, rng: random.Random) -> None:
        ext = self.com.params.extractor
        self.x = rng.getrandbits(self.com.params.n)
        self.coins = (self.x << ext.seed_len) | rng.getrandbits(ext.seed_len)

    def next_message(self, received: tuple[int, ...]) -> int:
        return self.com.scheme.sender.next_message(0, self.coins, received, None)

    def openings(self) -> list[tuple[int, int]]:
        return [(0, self.x), (0, self.x)]


@dataclass
class ReductionStats:
    n: int
    trials: int
    valid_breaks: int
    predictor_hits: int
    predictor_rate: float
    predictor_rate_rb: float
    predictor_fail_rate: float
    baseline: float
    d_adv: float
    d_adv_se: float
    d_adv_rb: float
    d_adv_rb_se: float
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _first_diff(x1: int, x2: int, n: int) -> int | None:
    for c in range(n):
        if bit_at(x1, c, n) != bit_at(x2, c, n):
            return c
    return None


def binding_reduction(breaker: Breaker, com: PirCom, trials: int, seed: int = 0) -> ReductionStats:
    """Run the breaker as a malicious PIR server against an honest user and
    turn valid double openings into guesses about the user's index.

    Predictor D': fail if the two databases agree, else guess uniformly in
    [n] minus the first index j where they differ.  Distinguisher D, given a
    candidate pair (u, v) with the user's index one of them: 1 if j == v,
    0 if j == u, a coin otherwise.

    Alongside the raw coin-flipping estimates, Rao-Blackwellized versions
    replace the final coin by its expectation (same mean, less variance).
    """
    n = com.params.n
    rng = random.Random(int.from_bytes(derive(master_seed(seed), "binding-reduction"), "big"))
    hits = 0
    valid = 0
    fails = 0
    rb_sum = 0.0
    d_first: list[float] = []
    d_second: list[float] = []
    rb_first: list[float] = []
    rb_second: list[float] = []
    rc_bits = com.scheme.receiver.coin_len
    for _ in range(trials):
        u, v = rng.sample(range(n), 2)
        real_first = rng.random() < 0.5
        idx = u if real_first else v
        receiver_coins = idx + n * rng.randrange(((1 << rc_bits) - idx - 1) // n + 1)
        breaker.start(rng)
        sender = PartySpec("breaker", 0, com.scheme.sender.schedule,
                           lambda _i, _c, rec, _call: breaker.next_message(rec))
        proto = Protocol((sender, com.scheme.receiver), com.scheme.protocol.order)
        ex = execute(proto, {}, [(0, 0), (0, receiver_coins)])
        c = Com(receiver_coins, ex.transcript)
        opens = breaker.openings()
        good = [o for o in opens if com_verify(com, c, o) is not None]
        j = None
        if len(good) >= 2 and len({o[0] for o in good}) >= 2:
            valid += 1
            a, b = good[0], next(o for o in good if o[0] != good[0][0])
            j = _first_diff(a[1], b[1], n)
        if j is None:
            fails += 1
            dv = float(rng.random() < 0.5)
            drb = 0.5
        else:
            guess = rng.choice([q for q in range(n) if q != j])
            hits += guess == idx
            rb_sum += 1.0 / (n - 1) if j != idx else 0.0
            coin = float(rng.random() < 0.5)
            dv = 1.0 if j == v else 0.0 if j == u else coin
            drb = 1.0 if j == v else 0.0 if j == u else 0.5
        (d_first if real_first else d_second).append(dv)
        (rb_first if real_first else rb_second).append(drb)

    def diff(p: list[float], q: list[float]) -> tuple[float, float]:
        if not p or not q:
            return 0.0, float("inf")
        mp, mq = sum(p) / len(p), sum(q) / len(q)
        vp = sum((z - mp) ** 2 for z in p) / max(len(p) - 1, 1)
        vq = sum((z - mq) ** 2 for z in q) / max(len(q) - 1, 1)
        return mp - mq, math.sqrt(vp / len(p) + vq / len(q))

    adv, se = diff(d_first, d_second)
    adv_rb, se_rb = diff(rb_first, rb_second)
    return ReductionStats(n, trials, valid, hits, hits / trials, rb_sum / trials, fails / trials, 1 / n,
                          adv, se, adv_rb, se_rb)
