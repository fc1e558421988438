"""Sampler-powered adversaries: transcript-consistent coin sampling, blockwise
inversion of short-output functions, commitment breakers, the hit monitor,
the alpha/beta diagnostics and the permutation inverter."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from .circuits import OracleProgram, Reveal, apply_oracle, ext_trivial, extend, run, truncate
from .oracles import HashFamily
from .protocols import BreakResult, Com, CommitmentScheme, Protocol, ScheduleError, strategy_program
from .sam import Sam, TraceStats


# coin sampling along a live execution -----------------------------------------

@dataclass
class ATildeResult:
    transcript: tuple[tuple[int, int], ...]
    coins: list[int]
    stats: TraceStats


def a_tilde(protocol: Protocol, receiver_seed: tuple[int, int], sam: Sam, k: int,
            sender_role: int = 0) -> ATildeResult:
    """Play the sender against a live honest receiver by re-sampling, before
    each of its messages, coins consistent with the transcript so far; then
    draw ``k`` more consistent coin vectors through trivial extensions."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rrole = 1 - sender_role
    receiver = protocol.parties[rrole]
    r_in, r_coins = receiver_seed
    logged = sam.handles()

    def r_call(name: str, x: int) -> int:
        return sam.oracles[name].eval(x)

    peer_msgs: tuple[int, ...] = ()
    to_receiver: tuple[int, ...] = ()
    transcript = []
    prev: OracleProgram | None = None
    r: int | None = None
    sent = 0
    for role in protocol.order:
        if role == rrole:
            msg = receiver.next_message(r_in, r_coins, to_receiver, r_call)
            if not 0 <= msg < (1 << receiver.schedule[len(peer_msgs)]):
                raise ScheduleError(f"receiver message {msg!r} breaks its schedule")
            peer_msgs += (msg,)
            transcript.append((role, msg))
            continue
        prog = strategy_program(protocol, sender_role, peer_msgs)
        r = sam.query(r, prev, prog)
        width = protocol.parties[sender_role].schedule[sent]
        msg = run(prog, logged, r) & ((1 << width) - 1)
        sent += 1
        prev = prog
        to_receiver += (msg,)
        transcript.append((role, msg))
    if prev is None:
        root = strategy_program(protocol, sender_role, ())
        coins = [sam.query(None, None, ext_trivial(root, j)) for j in range(1, k + 1)]
    else:
        coins = [sam.query(r, prev, ext_trivial(prev, j)) for j in range(1, k + 1)]
    return ATildeResult(tuple(transcript), coins, sam.stats())


def consistent(protocol: Protocol, role: int, seed: int, transcript, oracles: Mapping[str, Any]) -> bool:
    """Does the party with this seed produce exactly its messages in ``transcript``
    given the peer's recorded messages?"""
    party = protocol.parties[role]
    inp, coins = party.split(seed)
    own = [m for s, m in transcript if s == role]
    peer = tuple(m for s, m in transcript if s != role)
    call = lambda name, x: oracles[name].eval(x)  # noqa: E731
    for j, msg in enumerate(own):
        if party.next_message(inp, coins, peer[:protocol.available(role, j)], call) != msg:
            return False
    return True


# blockwise inversion -------------------------------------------------------------

@dataclass(frozen=True)
class InvParams:
    k: int
    d: int
    eps: float

    def __post_init__(self) -> None:
        if self.k < 1 or self.d < 1 or not 0 < self.eps <= 1:
            raise ValueError("need k, d >= 1 and 0 < eps <= 1")

    def width(self, ell: int) -> int:
        return math.ceil(ell / self.d) if ell else 0

    def budget(self, ell: int) -> float:
        return self.d * 2 ** self.width(ell) / self.eps


@dataclass
class InvResult:
    preimages: list[int] | None
    main_calls: int
    budget: float
    blocks: int
    width: int
    stats: TraceStats | None = None

    @property
    def ok(self) -> bool:
        return self.preimages is not None


def block_programs(f: OracleProgram, width: int) -> list[OracleProgram]:
    """f_1, f_2, ...: the first 1, 2, ... blocks of f's output, each built from
    the previous one by revealing one more block."""
    ell = f.output_len
    if ell == 0:
        return []
    progs = [truncate(f, min(width, ell))]
    while progs[-1].output_len < ell:
        progs.append(extend(progs[-1], Reveal(min(width, ell - progs[-1].output_len))))
    return progs


def inv(f: OracleProgram, y: int, params: InvParams, sam: Sam, *, unbounded: bool = False) -> InvResult:
    """Grow a preimage of ``y`` block by block, asking the sampler for a point
    agreeing with the blocks found so far until the next block also matches.
    Aborts (preimages None) once more than ``d * 2**v / eps`` Sam calls were
    spent in the main loop."""
    ell = f.output_len
    if not 0 <= y < (1 << ell):
        raise ValueError("target length does not match the function's output")
    v = params.width(ell)
    budget = params.budget(ell)
    progs = block_programs(f, v)
    logged = sam.handles()
    x_prev: int | None = None
    star: OracleProgram | None = None
    calls = 0
    for fi in progs:
        want = y >> (ell - fi.output_len)
        j = 0
        while True:
            j += 1
            cand = ext_trivial(fi, j)
            x = sam.query(x_prev, star, cand)
            calls += 1
            if run(fi, logged, x) == want:
                x_prev, star = x, cand
                break
            if not unbounded and calls > budget:
                return InvResult(None, calls, budget, len(progs), v, sam.stats())
    if star is None:
        outs = [sam.query(None, None, ext_trivial(f, j)) for j in range(1, params.k + 1)]
    else:
        outs = [sam.query(x_prev, star, ext_trivial(star, j)) for j in range(1, params.k + 1)]
    return InvResult(outs, calls, budget, len(progs), v, sam.stats())


def comm_inv(protocol: Protocol, transcript, params: InvParams, sam: Sam, sender_role: int = 0) -> InvResult:
    """Sample sender seeds consistent with a finished transcript by inverting the
    map seed -> sender messages with the receiver's messages held fixed."""
    peer = tuple(m for s, m in transcript if s != sender_role)
    g = strategy_program(protocol, sender_role, peer)
    y = 0
    for (s, m), width in zip([t for t in transcript if t[0] == sender_role], protocol.parties[sender_role].schedule):
        y = (y << width) | m
    return inv(g, y, params, sam)


# commitment breakers -------------------------------------------------------------

def _two_openings(scheme: CommitmentScheme, seeds: list[int]) -> list:
    sender = scheme.sender
    decoded = [sender.split(s) for s in seeds]
    for i in range(len(decoded)):
        for j in range(i + 1, len(decoded)):
            if decoded[i][0] != decoded[j][0]:
                return [scheme.opening(*decoded[i]), scheme.opening(*decoded[j])]
    return [scheme.opening(*decoded[0])] if decoded else []


def s_tilde_round(scheme: CommitmentScheme, n: int, sam: Sam, receiver_coins: int) -> BreakResult:
    """Commit with coins resampled round by round, then look among ``n`` fresh
    consistent coin vectors for openings to two different values."""
    res = a_tilde(scheme.protocol, (0, receiver_coins), sam, n)
    com = Com(receiver_coins, res.transcript)
    return BreakResult(com, _two_openings(scheme, res.coins),
                       {"stats": res.stats, "coins": res.coins})


def s_tilde_comm(scheme: CommitmentScheme, n: int, d: int, eps: float, sam: Sam,
                 sender_coins: int, receiver_coins: int) -> BreakResult:
    """Commit honestly to 0, then invert the sender's short message string."""
    from .protocols import commit
    com, _ = commit(scheme, {name: h for name, h in sam.oracles.items()}, 0, sender_coins, receiver_coins)
    res = comm_inv(scheme.protocol, com.transcript, InvParams(n, d, eps), sam)
    if res.preimages is None:
        return BreakResult(com, [], {"stats": res.stats, "aborted": True, "inv": res})
    return BreakResult(com, _two_openings(scheme, res.preimages),
                       {"stats": res.stats, "aborted": False, "inv": res})


# hit monitor -------------------------------------------------------------------------

Adversary = Callable[[int, Sam], "int | None"]


class _Found(Exception):
    def __init__(self, x: int, at: int):
        self.x = x
        self.at = at


class _MonitoringSam(Sam):
    def __init__(self, hashes: HashFamily, oracles: Mapping[str, Any], y: int, target: str):
        super().__init__(hashes, oracles)
        self._y = y
        self._target = target
        self.extra_cost = 0

    def query(self, w, C, C_next):  # type: ignore[override]
        ans = super().query(w, C, C_next)
        calls: list = []
        run(C_next, self.oracles, ans, calls)
        self.extra_cost += C_next.query_bound
        for name, x, out in calls:
            if name == self._target and out == self._y:
                raise _Found(x, self.sam_calls - 1)
        return ans


@dataclass
class MonitorResult:
    x: int | None
    halted_at: int | None
    cost: int
    adversary_cost: int


def hit_monitor(adversary: Adversary, oracles: Mapping[str, Any], H: HashFamily, y: int,
                target: str = "pi") -> MonitorResult:
    """Emulate the adversary; after every Sam answer w to (., ., C_next) evaluate
    C_next(w) and stop with x as soon as it calls the target on some x with
    target(x) = y."""
    sam = _MonitoringSam(H, oracles, y, target)
    try:
        adversary(y, sam)
    except _Found as hit:
        base = sam.stats().augmented_cost
        return MonitorResult(hit.x, hit.at, base + sam.extra_cost, base)
    base = sam.stats().augmented_cost
    return MonitorResult(None, None, base + sam.extra_cost, base)


# alpha / beta ------------------------------------------------------------------------

@dataclass
class AlphaBetaRecord:
    alpha: float
    beta: float
    hit: bool
    support: int


@dataclass
class AlphaBetaTrace:
    y: int
    records: list[AlphaBetaRecord] = field(default_factory=list)

    def pairs(self) -> list[tuple[float, float]]:
        """(beta_i, alpha_{i+1}) for consecutive queries."""
        return [(a.beta, b.alpha) for a, b in zip(self.records, self.records[1:])]


def _profile(prog: OracleProgram, oracles: Mapping[str, Any], y: int, target: str) -> tuple[list[int], list[bool]]:
    outs, hits = [], []
    for w in range(1 << prog.input_len):
        calls: list = []
        outs.append(run(prog, oracles, w, calls))
        hits.append(any(name == target and out == y for name, _, out in calls))
    return outs, hits


def alpha_beta_trace(adversary: Adversary, oracles: Mapping[str, Any], H: HashFamily, y: int,
                     target: str = "pi", max_bits: int = 12) -> AlphaBetaTrace:
    """Run the adversary, then for each Sam query (W_i, C_i, C_{i+1}) compute by
    enumeration over D_i (the preimage set of C_i(W_i), or everything for a
    root query) the hit probabilities of C_i and of C_{i+1}."""
    sam = Sam(H, oracles)
    adversary(y, sam)
    cache: dict[bytes, tuple[list[int], list[bool]]] = {}

    def profile(p: OracleProgram):
        if p.input_len > max_bits:
            raise ValueError(f"enumeration cap exceeded: {p.input_len} > {max_bits} input bits")
        got = cache.get(p.canonical_id)
        if got is None:
            got = cache[p.canonical_id] = _profile(p, oracles, y, target)
        return got

    out = AlphaBetaTrace(y)
    for rec in (r for r in sam.trace if r.kind == "sam"):
        nxt_out, nxt_hit = profile(rec.C_next)
        if rec.C is None:
            support = list(range(1 << rec.C_next.input_len))
            alpha = 0.0
            hit = False
        else:
            c_out, c_hit = profile(rec.C)
            want = c_out[rec.w]
            support = [w for w, o in enumerate(c_out) if o == want]
            alpha = sum(c_hit[w] for w in support) / len(support)
            hit = c_hit[rec.answer]
        beta = sum(nxt_hit[w] for w in support) / len(support)
        out.records.append(AlphaBetaRecord(alpha, beta, hit, len(support)))
    return out


# permutation inversion ------------------------------------------------------------------

def sam_perm_inverter(y: int, n: int, d: int, eps: float, sam: Sam, *, name: str = "pi",
                      unbounded: bool = False) -> InvResult:
    """Blockwise inversion of the permutation itself (f = apply pi, l = n)."""
    return inv(apply_oracle(n, name), y, InvParams(1, d, eps), sam, unbounded=unbounded)
