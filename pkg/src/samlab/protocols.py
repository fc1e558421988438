"""Two-party oracle-aided protocols, strategy programs, and commitment schemes.

Transcripts serialize to JSON as ``[[sender_role, length, hex], ...]``.
"""

from __future__ import annotations

import functools
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

from .circuits import HostSegment, OracleProgram, extend, host_program

OracleCall = Callable[[str, int], int]


class ScheduleError(ValueError):
    pass


def parity(v: int) -> int:
    return bin(v).count("1") & 1


@dataclass(frozen=True)
class PartySpec:
    """A party: coins, fixed message schedule and a deterministic next-message
    function ``next_message(input, coins, received, call) -> int``.

    ``params`` must identify the party's code and configuration; it feeds the
    canonical ids of compiled strategy programs.
    """
    name: str
    coin_len: int
    schedule: tuple[int, ...]
    next_message: Callable[[int, int, tuple[int, ...], OracleCall], int]
    input_len: int = 0
    query_bound: int = 0
    params: bytes = b""
    compile: Callable[[tuple[int, ...]], OracleProgram] | None = None

    @property
    def seed_len(self) -> int:
        return self.input_len + self.coin_len

    def split(self, seed: int) -> tuple[int, int]:
        return seed >> self.coin_len, seed & ((1 << self.coin_len) - 1)

    def join(self, inp: int, coins: int) -> int:
        return (inp << self.coin_len) | coins


@dataclass(frozen=True)
class Protocol:
    """``order[j]`` is the role (0 or 1) sending the j-th message."""
    parties: tuple[PartySpec, PartySpec]
    order: tuple[int, ...]

    def __post_init__(self) -> None:
        for role in (0, 1):
            if self.order.count(role) != len(self.parties[role].schedule):
                raise ScheduleError(f"{self.parties[role].name}: schedule does not match the message order")

    def available(self, role: int, j: int) -> int:
        """Peer messages received before ``role`` sends its j-th (0-based) message."""
        own = peer = 0
        for s in self.order:
            if s == role:
                if own == j:
                    return peer
                own += 1
            else:
                peer += 1
        raise ScheduleError(f"role {role} has no message {j}")

    def own_count(self, role: int, received: int) -> int:
        """Own messages that can be sent after ``received`` peer messages."""
        own = peer = 0
        for s in self.order:
            if s == role:
                if peer > received:
                    break
                own += 1
            else:
                peer += 1
                if peer > received:
                    break
        return own

    def comm_bits(self, role: int) -> int:
        return sum(self.parties[role].schedule)


@dataclass
class View:
    input: int
    coins: int
    received: tuple[int, ...]
    sent: tuple[int, ...]
    oracle_calls: list = field(default_factory=list)


@dataclass
class Execution:
    transcript: tuple[tuple[int, int], ...]
    views: tuple[View, View]

    def messages(self, role: int | None = None) -> tuple[int, ...]:
        return tuple(m for s, m in self.transcript if role is None or s == role)


def transcript_json(protocol: Protocol, transcript: Sequence[tuple[int, int]]) -> list:
    out = []
    counts = [0, 0]
    for role, msg in transcript:
        length = protocol.parties[role].schedule[counts[role]]
        counts[role] += 1
        out.append([role, length, format(msg, "x")])
    return out


def _check_msg(party: PartySpec, j: int, msg: int) -> int:
    length = party.schedule[j]
    if not isinstance(msg, int) or not 0 <= msg < (1 << length):
        raise ScheduleError(f"{party.name} message {j} = {msg!r} is not {length} bits")
    return msg


def execute(protocol: Protocol, oracles: Mapping[str, Any], seeds: Sequence[tuple[int, int]]) -> Execution:
    """Run both parties; ``seeds[role] = (input, coins)``."""
    views = []
    for role in (0, 1):
        party = protocol.parties[role]
        inp, coins = seeds[role]
        if not 0 <= coins < (1 << party.coin_len) or not 0 <= inp < (1 << party.input_len):
            raise ScheduleError(f"{party.name}: seed does not fit declared lengths")
        views.append(View(inp, coins, (), ()))
    transcript = []
    for role in protocol.order:
        party = protocol.parties[role]
        view = views[role]

        def call(name: str, x: int, _v: View = view) -> int:
            y = oracles[name].eval(x)
            _v.oracle_calls.append((name, x, y))
            return y

        msg = _check_msg(party, len(view.sent), party.next_message(view.input, view.coins, view.received, call))
        view.sent += (msg,)
        views[1 - role].received += (msg,)
        transcript.append((role, msg))
    return Execution(tuple(transcript), (views[0], views[1]))


def replay(protocol: Protocol, role: int, view: View, oracles: Mapping[str, Any]) -> tuple[int, ...]:
    """Recompute a party's messages from its recorded view."""
    party = protocol.parties[role]
    out = []
    for j in range(len(party.schedule)):
        avail = protocol.available(role, j)
        out.append(party.next_message(view.input, view.coins, view.received[:avail],
                                      lambda name, x: oracles[name].eval(x)))
    return tuple(out)


def _segment(party: PartySpec, j: int, prefix: tuple[int, ...]) -> HostSegment:
    def fn(w: int, call: OracleCall, prev: int, prev_len: int) -> int:
        inp, coins = party.split(w)
        return party.next_message(inp, coins, prefix, call)

    params = party.params + b"|" + j.to_bytes(4, "big") + b"|" + b",".join(format(b, "x").encode() for b in prefix)
    return HostSegment(f"{party.name}.msg{j}", fn, party.schedule[j], party.query_bound, params)


@functools.lru_cache(maxsize=8192)
def _chain(protocol: Protocol, role: int, j: int, prefix: tuple[int, ...]) -> OracleProgram:
    party = protocol.parties[role]
    if j == 0:
        return host_program(party.seed_len, (), label=f"{party.name}-strategy")
    prev = prefix[:protocol.available(role, j - 2)] if j > 1 else ()
    return extend(_chain(protocol, role, j - 1, prev), _segment(party, j - 1, prefix))


def strategy_program(protocol: Protocol, role: int, peer_prefix: Sequence[int]) -> OracleProgram:
    """Program mapping the party's seed (input || coins) to the messages it sends
    given the peer's first messages ``peer_prefix``.  Successive programs are
    built from one another, so each is an extension of the previous one."""
    party = protocol.parties[role]
    peer = protocol.parties[1 - role]
    prefix = tuple(peer_prefix)
    if len(prefix) > len(peer.schedule):
        raise ScheduleError("prefix longer than the peer's schedule")
    if party.compile is not None:
        return party.compile(prefix)
    j = protocol.own_count(role, len(prefix))
    if j:
        prefix = prefix[:protocol.available(role, j - 1)]
    else:
        prefix = ()
    return _chain(protocol, role, j, prefix)


# commitments ------------------------------------------------------------------

@dataclass(frozen=True)
class Com:
    """The receiver's side of a commit stage: its coins plus the transcript."""
    receiver_coins: int
    transcript: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class CommitmentScheme:
    """Sender is role 0, receiver role 1.  ``verify(com, decom)`` returns the
    opened value or None; ``opening(value, coins)`` is the honest reveal."""
    name: str
    protocol: Protocol
    verify: Callable[[Com, Any], int | None]
    opening: Callable[[int, int], Any]

    @property
    def sender(self) -> PartySpec:
        return self.protocol.parties[0]

    @property
    def receiver(self) -> PartySpec:
        return self.protocol.parties[1]


def commit(scheme: CommitmentScheme, oracles: Mapping[str, Any], value: int, sender_coins: int,
           receiver_coins: int) -> tuple[Com, Any]:
    ex = execute(scheme.protocol, oracles, [(value, sender_coins), (0, receiver_coins)])
    return Com(receiver_coins, ex.transcript), scheme.opening(value, sender_coins)


def toy_commit(n: int, d: int) -> CommitmentScheme:
    """Linear toy scheme: the receiver sends d random vectors, the sender answers
    inner products with its coins x, and masks its bit with a fixed public
    vector (all ones) on the last reply."""
    if not (d >= 1 and d + 1 < n):
        raise ValueError("toy_commit needs 1 <= d and d + 1 < n")
    mask = (1 << n) - 1
    a0 = mask

    def sender_next(b: int, x: int, received: tuple[int, ...], call: OracleCall) -> int:
        reply = parity(received[-1] & x)
        if len(received) == d:
            return (reply << 1) | (b ^ parity(a0 & x))
        return reply

    def receiver_next(_: int, coins: int, received: tuple[int, ...], call: OracleCall) -> int:
        j = len(received)
        return (coins >> (n * (d - 1 - j))) & mask

    params = f"toy_commit/n={n}/d={d}".encode()
    sender = PartySpec("toy-sender", n, (1,) * (d - 1) + (2,), sender_next, input_len=1, params=params)
    receiver = PartySpec("toy-receiver", n * d, (n,) * d, receiver_next, params=params)
    protocol = Protocol((sender, receiver), (1, 0) * d)

    def verify(com: Com, decom: Any) -> int | None:
        b, x = decom
        if b not in (0, 1) or not 0 <= x <= mask:
            return None
        challenges = [m for s, m in com.transcript if s == 1]
        replies = [m for s, m in com.transcript if s == 0]
        if len(challenges) != d or len(replies) != d:
            return None
        for j, (a, r) in enumerate(zip(challenges, replies)):
            expect = parity(a & x)
            if j == d - 1:
                expect = (expect << 1) | (b ^ parity(a0 & x))
            if r != expect:
                return None
        return b

    return CommitmentScheme(f"toy_commit(n={n},d={d})", protocol, verify, lambda b, x: (b, x))


def toy_commit_hiding_exact(n: int, d: int) -> float:
    """Closed form for toy_commit: the transcript reveals the bit exactly when the
    public mask vector lies in the span of the d challenges, and is independent
    of it otherwise.  Computed by the rank Markov chain over GF(2)."""
    dist = {0: 1.0}
    for _ in range(d):
        nxt: dict[int, float] = {}
        for r, p in dist.items():
            up = 1.0 - 2.0 ** (r - n)
            nxt[r + 1] = nxt.get(r + 1, 0.0) + p * up
            nxt[r] = nxt.get(r, 0.0) + p * (1 - up)
        dist = nxt
    return sum(p * (2 ** r - 1) / (2 ** n - 1) for r, p in dist.items())


# estimators -------------------------------------------------------------------

@dataclass
class HidingEstimate:
    rho: float
    se: float
    method: str
    trials: int
    bias_bound: float = 0.0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _fast_transcript(protocol: Protocol, oracles: Mapping[str, Any], s0: tuple[int, int],
                     s1: tuple[int, int]) -> tuple[int, ...]:
    seeds = (s0, s1)
    received: list[tuple[int, ...]] = [(), ()]
    out = []
    call = lambda name, x: oracles[name].eval(x)  # noqa: E731
    for role in protocol.order:
        inp, coins = seeds[role]
        msg = protocol.parties[role].next_message(inp, coins, received[role], call)
        received[1 - role] += (msg,)
        out.append(msg)
    return tuple(out)


def tv_distance(p: Mapping, q: Mapping) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def _normalized(c: Counter) -> dict:
    total = sum(c.values())
    return {k: v / total for k, v in c.items()}


def hiding_distance(scheme: CommitmentScheme, oracles: Mapping[str, Any], *, values: tuple[int, int] = (0, 1),
                    trials: int = 1000, seed: int = 0, exact_bits: int = 20, inner_bits: int = 16) -> HidingEstimate:
    """Distance between commit-stage transcripts for two committed values.

    * exact: sender and receiver coins enumerated together (<= 2**exact_bits);
    * conditional: receiver coins sampled, sender coins enumerated per sample,
      the conditional distance computed exactly and averaged;
    * plugin: both sides sampled, plug-in distance with a bias bound.
    """
    sc, rc = scheme.sender.coin_len, scheme.receiver.coin_len
    proto = scheme.protocol
    if sc + rc <= exact_bits:
        dists = []
        for v in values:
            c: Counter = Counter()
            for xr in range(1 << rc):
                for xs in range(1 << sc):
                    c[_fast_transcript(proto, oracles, (v, xs), (0, xr))] += 1
            dists.append(_normalized(c))
        return HidingEstimate(tv_distance(*dists), 0.0, "exact", 1)
    rng = random.Random(seed)
    if sc <= inner_bits:
        samples = []
        for _ in range(trials):
            xr = rng.getrandbits(rc)
            dists = []
            for v in values:
                c = Counter(_fast_transcript(proto, oracles, (v, xs), (0, xr)) for xs in range(1 << sc))
                dists.append(_normalized(c))
            samples.append(tv_distance(*dists))
        mean = sum(samples) / trials
        var = sum((s - mean) ** 2 for s in samples) / max(trials - 1, 1)
        return HidingEstimate(mean, math.sqrt(var / trials), "conditional", trials)
    counts = []
    for v in values:
        c = Counter()
        for _ in range(trials):
            xr = rng.getrandbits(rc)
            c[(xr, _fast_transcript(proto, oracles, (v, rng.getrandbits(sc)), (0, xr)))] += 1
        counts.append(c)
    cells = len(set(counts[0]) | set(counts[1]))
    bias = math.sqrt(cells / trials)
    est = tv_distance(_normalized(counts[0]), _normalized(counts[1]))
    return HidingEstimate(est, math.sqrt(1.0 / trials), "plugin", trials, bias)


@dataclass
class BreakResult:
    com: Com | None
    openings: list
    meta: dict = field(default_factory=dict)


def break_succeeded(scheme: CommitmentScheme, result: BreakResult) -> bool:
    if result.com is None:
        return False
    vals = {scheme.verify(result.com, o) for o in result.openings}
    vals.discard(None)
    return len(vals) >= 2


def binding_break_rate(scheme: CommitmentScheme, attacker: Callable[[int], BreakResult], trials: int) -> float:
    """Fraction of trials where the attacker opens one commitment to two values.
    ``attacker(trial_index)`` builds its own world from the trial index."""
    wins = sum(break_succeeded(scheme, attacker(i)) for i in range(trials))
    return wins / trials
