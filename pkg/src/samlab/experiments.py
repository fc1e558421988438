"""Seeded experiment drivers shared by the CLI and the acceptance suite.

Every driver takes an integer seed and returns a JSON-ready dict.  Per-trial
randomness is derived from the master seed and the trial index, so results do
not depend on how trials are split across workers.
"""

from __future__ import annotations

import math
import random
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Any, Callable, Sequence

from scipy.stats import chisquare

from . import attacks
from .circuits import (OracleProgram, apply_oracle, constant, ext_trivial, gate_program, identity, run,
                       truncate)
from .oracles import HashFamily, derive, master_seed, perm_sample
from .pir import (ComParams, OmniscientClearIndexBreaker, binding_reduction, clear_index_pir,
                  com_hiding_estimate, full_download_pir, pir_com)
from .protocols import break_succeeded, execute, hiding_distance, toy_commit, toy_commit_hiding_exact
from .reconstruction import (Aux, brute_force_adversary, decode, encode, sam_walk_adversary, size_bound_bits,
                             table_adversary, bits_perm)
from .sam import IndexStore, Sam, SamQuery, hit_events, normal_form_validate, rows_to_dicts, _rows, sam_answer


class BudgetError(RuntimeError):
    """A requested run exceeds the desk-scale caps."""


MAX_N = 24


def guard(name: str, value: int, cap: int) -> None:
    if value > cap:
        raise BudgetError(f"{name}={value} exceeds the cap of {cap}")


def rng_for(master: bytes, label: str, *parts: int) -> random.Random:
    return random.Random(int.from_bytes(derive(master, label, *parts), "big"))


def map_trials(fn: Callable[[int], Any], count: int, workers: int = 1) -> list:
    """Results in trial order whatever the worker count."""
    if workers <= 1 or count < 2:
        return [fn(i) for i in range(count)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count), chunksize=max(1, count // (8 * workers))))


def _se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n) if n else float("inf")


# sampler checks ---------------------------------------------------------------

def random_gate_program(rng: random.Random, m: int, oracle_bits: int | None = None, extra: int = 6,
                        name: str = "pi") -> OracleProgram:
    gates: list = []
    wires = m
    ops = ("xor", "and", "or", "not")
    for _ in range(rng.randint(0, extra)):
        op = rng.choice(ops)
        if op == "not":
            gates.append((op, rng.randrange(wires)))
        else:
            gates.append((op, rng.randrange(wires), rng.randrange(wires)))
        wires += 1
    if oracle_bits:
        src = [rng.randrange(wires) for _ in range(oracle_bits)]
        gates.append(("call", name, src, oracle_bits))
        wires += oracle_bits
        for _ in range(rng.randint(0, extra // 2)):
            gates.append(("xor", rng.randrange(wires), rng.randrange(wires)))
            wires += 1
    ell = rng.randint(1, m)
    outputs = [rng.randrange(wires) for _ in range(ell)]
    return gate_program(m, gates, outputs, label="random")


def exp_preimage_law(seed: int, trials: int = 10_000, programs: int = 200, m_max: int = 12) -> dict:
    """Literal-scan answers checked against the enumerated preimage set."""
    guard("m_max", m_max, 16)
    master = master_seed(seed)
    per = max(1, trials // programs)
    failures = done = 0
    t0 = time.perf_counter()
    for p in range(programs):
        rng = rng_for(master, "law-prog", p)
        m = rng.randint(1, m_max)
        nb = rng.randint(1, min(m, 8)) if rng.random() < 0.7 else None
        oracles = {"pi": perm_sample(nb, derive(master, "law-pi", p), table=True)} if nb else {}
        prog = random_gate_program(rng, m, nb)
        outs = [run(prog, oracles, x) for x in range(1 << m)]
        for q in range(per):
            w = rng.randrange(1 << m)
            H = HashFamily(derive(master, "law-H", p, q))
            ans = sam_answer(H, oracles, SamQuery(w, prog, ext_trivial(prog, q + 1)))
            preimages = [x for x, o in enumerate(outs) if o == outs[w]]
            failures += ans not in preimages
            done += 1
    return {"trials": done, "failures": failures, "seconds": time.perf_counter() - t0}


def uniformity_programs(m: int = 8) -> list[tuple[str, OracleProgram]]:
    uneven = gate_program(m, [("and", 0, 1), ("xor", 2, 3)], [m, m + 1], label="and-xor")
    return [
        ("constant", constant(m, 1)),
        ("drop-half", truncate(identity(m), m // 2)),
        ("pi-prefix", truncate(apply_oracle(m), m - 3)),
        ("and-xor", uneven),
        ("pi-twice-prefix", truncate(apply_oracle(m, times=2), 3)),
    ]


def exp_uniformity(seed: int, m: int = 8, mult: int = 50, alpha: float = 0.01) -> dict:
    master = master_seed(seed)
    pi = perm_sample(m, derive(master, "unif-pi"), table=True)
    oracles = {"pi": pi}
    rows = []
    for j, (name, prog) in enumerate(uniformity_programs(m)):
        rng = rng_for(master, "unif-w", j)
        w = rng.randrange(1 << m)
        target = run(prog, oracles, w)
        pre = [x for x in range(1 << m) if run(prog, oracles, x) == target]
        pos = {x: i for i, x in enumerate(pre)}
        counts = [0] * len(pre)
        samples = mult * len(pre)
        nxt = ext_trivial(prog, 1)
        for s in range(samples):
            H = HashFamily(derive(master, "unif-H", j, s))
            counts[pos[sam_answer(H, oracles, SamQuery(w, prog, nxt))]] += 1
        p = float(chisquare(counts).pvalue) if len(pre) > 1 else 1.0
        rows.append({"program": name, "preimages": len(pre), "samples": samples, "p_value": p,
                     "accept": p > alpha})
    accepted = sum(r["accept"] for r in rows)
    return {"programs": rows, "accepted": accepted, "pass": accepted >= 4}


# transcript sampling --------------------------------------------------------------

def _toy_key(scheme, transcript) -> tuple:
    return tuple(m for s, m in transcript if s == 0)


def _a_tilde_trial(args: tuple, i: int) -> dict:
    seed, n, d, k, pool = args
    master = master_seed(seed)
    scheme = toy_commit(n, d)
    rng = rng_for(master, "atilde", i)
    slot = rng.randrange(len(pool))
    sam = Sam(HashFamily(derive(master, "atilde-H", i)), {}, store=_STORES.setdefault(("atilde", seed), IndexStore()))
    res = attacks.a_tilde(scheme.protocol, (0, pool[slot]), sam, k)
    st = res.stats
    ok_coins = all(attacks.consistent(scheme.protocol, 0, c, res.transcript, {}) for c in res.coins)
    return {"slot": slot, "key": _toy_key(scheme, res.transcript), "sam_calls": st.sam_calls, "depth": st.depth,
            "normal_form": st.normal_form, "consistent": ok_coins}


_STORES: dict = {}


def exp_a_tilde(seed: int, n: int = 10, d: int = 3, k: int = 1, trials: int = 100_000, pool_size: int = 4,
                workers: int = 1) -> dict:
    """Transcripts of the sampled sender against a live receiver compared with
    the exact honest distribution.  Receiver coins come from a small seeded
    pool so the empirical distribution has few cells."""
    guard("n", n, 16)
    master = master_seed(seed)
    rng = rng_for(master, "atilde-pool")
    scheme = toy_commit(n, d)
    pool = [rng.getrandbits(scheme.receiver.coin_len) for _ in range(pool_size)]
    honest: dict = {}
    for slot, rc in enumerate(pool):
        for b in (0, 1):
            for x in range(1 << n):
                ex = execute(scheme.protocol, {}, [(b, x), (0, rc)])
                key = (slot, _toy_key(scheme, ex.transcript))
                honest[key] = honest.get(key, 0) + 1
    total = pool_size << (n + 1)
    honest = {key: c / total for key, c in honest.items()}
    t0 = time.perf_counter()
    res = map_trials(partial(_a_tilde_trial, (seed, n, d, k, tuple(pool))), trials, workers)
    emp: dict = {}
    for r in res:
        key = (r["slot"], r["key"])
        emp[key] = emp.get(key, 0) + 1 / trials
    keys = set(emp) | set(honest)
    tv = 0.5 * sum(abs(emp.get(key, 0.0) - honest.get(key, 0.0)) for key in keys)
    return {
        "n": n, "d": d, "k": k, "trials": trials, "pool": pool_size, "cells": len(honest),
        "tv": tv, "plugin_bias_scale": 0.5 * math.sqrt(len(honest) / trials),
        "consistent_rate": sum(r["consistent"] for r in res) / trials,
        "sam_calls_exact": all(r["sam_calls"] == d + k for r in res),
        "max_depth": max(r["depth"] for r in res),
        "normal_form_violations": sum(not r["normal_form"] for r in res),
        "seconds": time.perf_counter() - t0,
    }


# blockwise inversion ------------------------------------------------------------------

def drop_half(n: int) -> OracleProgram:
    return truncate(apply_oracle(n), n // 2)


def exp_inv_abort(seed: int, n: int = 12, d: int = 3, eps: float = 0.1, k: int = 2, trials: int = 2000) -> dict:
    guard("n", n, 16)
    master = master_seed(seed)
    pi = perm_sample(n, derive(master, "inv-pi"), table=True)
    oracles = {"pi": pi}
    f = drop_half(n)
    store = IndexStore()
    params = attacks.InvParams(k, d, eps)
    aborts = bad = violations = 0
    max_depth = 0
    calls = []
    t0 = time.perf_counter()
    for i in range(trials):
        rng = rng_for(master, "inv", i)
        y = run(f, oracles, rng.randrange(1 << n))
        sam = Sam(HashFamily(derive(master, "inv-H", i)), oracles, store=store)
        r = attacks.inv(f, y, params, sam)
        calls.append(r.main_calls)
        max_depth = max(max_depth, r.stats.depth)
        violations += len(r.stats.violations)
        if r.preimages is None:
            aborts += 1
        else:
            bad += sum(run(f, oracles, x) != y for x in r.preimages)
    rate = aborts / trials
    return {"n": n, "d": d, "eps": eps, "k": k, "trials": trials, "abort_rate": rate, "abort_se": _se(rate, trials),
            "bad_preimages": bad, "max_depth": max_depth, "normal_form_violations": violations,
            "budget": params.budget(f.output_len), "mean_calls": statistics.fmean(calls),
            "seconds": time.perf_counter() - t0}


# commitment breaking -----------------------------------------------------------------------

def exp_break_round(seed: int, n: int = 12, d: int = 4, trials: int = 500, k: int | None = None) -> dict:
    guard("n", n, 20)
    master = master_seed(seed)
    scheme = toy_commit(n, d)
    k = k or n
    wins = violations = 0
    max_depth = 0
    t0 = time.perf_counter()
    for i in range(trials):
        rng = rng_for(master, "round", i)
        rc = rng.getrandbits(scheme.receiver.coin_len)
        sam = Sam(HashFamily(derive(master, "round-H", i)), {})
        br = attacks.s_tilde_round(scheme, k, sam, rc)
        wins += break_succeeded(scheme, br)
        st = br.meta["stats"]
        violations += len(st.violations)
        max_depth = max(max_depth, st.depth)
    rate = wins / trials
    return {"n": n, "d": d, "k": k, "trials": trials, "two_openings_rate": rate, "se": _se(rate, trials),
            "max_depth": max_depth, "normal_form_violations": violations,
            "seconds": time.perf_counter() - t0}


def exp_break_comm(seed: int, n: int = 12, c: int = 6, d: int = 3, eps: float = 0.1, trials: int = 300) -> dict:
    """Break the toy scheme whose sender sends c bits by inverting its messages."""
    guard("n", n, 20)
    master = master_seed(seed)
    scheme = toy_commit(n, c - 1)
    wins = aborts = mismatched = violations = 0
    max_depth = 0
    budget = d * 2 ** math.ceil(c / d) / eps
    t0 = time.perf_counter()
    for i in range(trials):
        rng = rng_for(master, "comm", i)
        sc = rng.getrandbits(scheme.sender.coin_len)
        rc = rng.getrandbits(scheme.receiver.coin_len)
        sam = Sam(HashFamily(derive(master, "comm-H", i)), {})
        br = attacks.s_tilde_comm(scheme, n, d, eps, sam, sc, rc)
        inv_res = br.meta["inv"]
        st = br.meta["stats"]
        extra = 0 if inv_res.preimages is None else n
        mismatched += st.sam_calls != inv_res.main_calls + extra
        aborts += br.meta["aborted"]
        wins += break_succeeded(scheme, br)
        violations += len(st.violations)
        max_depth = max(max_depth, st.depth)
    rate = wins / trials
    return {"n": n, "c": c, "d": d, "eps": eps, "trials": trials, "break_rate": rate, "se": _se(rate, trials),
            "abort_rate": aborts / trials, "budget": budget, "accounting_mismatches": mismatched,
            "max_depth": max_depth, "normal_form_violations": violations, "seconds": time.perf_counter() - t0}


# depth / work tradeoff ------------------------------------------------------------------------

TRADEOFF_MULTIPLES = (0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0)


def exp_tradeoff(seed: int, n: int = 12, depths: Sequence[int] = (1, 2, 3, 4, 6, 12), trials: int = 40,
                 eps: float = 0.1) -> dict:
    """Unbounded blockwise inversion of pi; per depth, the median number of Sam
    calls to success (the knee) against d * 2^ceil(n/d), plus the success
    curve at multiples of that scale."""
    guard("n", n, 16)
    master = master_seed(seed)
    pi = perm_sample(n, derive(master, "trade-pi"), table=True)
    oracles = {"pi": pi}
    store = IndexStore()
    rows, curve = [], []
    violations = 0
    t0 = time.perf_counter()
    for d in depths:
        scale = d * 2 ** math.ceil(n / d)
        calls = []
        max_depth = 0
        for i in range(trials):
            rng = rng_for(master, "trade", d, i)
            y = rng.randrange(1 << n)
            sam = Sam(HashFamily(derive(master, "trade-H", d, i)), oracles, store=store)
            r = attacks.sam_perm_inverter(y, n, d, eps, sam, unbounded=True)
            if r.preimages is None or pi.eval(r.preimages[0]) != y:
                raise AssertionError("unbounded inversion returned a wrong preimage")
            calls.append(r.main_calls)
            violations += len(r.stats.violations)
            max_depth = max(max_depth, r.stats.depth)
        knee = statistics.median(calls)
        budget = scale / eps
        rows.append({"d": d, "scale": scale, "knee": knee, "ratio": knee / scale,
                     "mean_calls": statistics.fmean(calls), "max_depth": max_depth,
                     "success_at_budget": sum(c <= budget for c in calls) / trials})
        for mult in TRADEOFF_MULTIPLES:
            curve.append({"d": d, "multiple": mult, "budget": mult * scale,
                          "success": sum(c <= mult * scale for c in calls) / trials})
    return {"n": n, "trials": trials, "eps": eps, "rows": rows, "curve": curve,
            "within_factor_4": all(0.25 <= r["ratio"] <= 4 for r in rows),
            "normal_form_violations": violations, "seconds": time.perf_counter() - t0}


# reconstruction -----------------------------------------------------------------------------------

ADVERSARIES = ("brute_force", "table", "sam_walk")


def make_adversary(kind: str, pi, n: int):
    if kind == "brute_force":
        return brute_force_adversary(n)
    if kind == "table":
        return table_adversary(pi, n)
    if kind == "sam_walk":
        return sam_walk_adversary(n)
    raise ValueError(f"unknown adversary {kind!r}")


def exp_reconstruction(seed: int, n: int = 6, trials: int = 100) -> dict:
    guard("n", n, 10)
    master = master_seed(seed)
    full_bits = bits_perm(1 << n)
    rows = []
    t0 = time.perf_counter()
    for i in range(trials):
        kind = ADVERSARIES[i % len(ADVERSARIES)]
        pi = perm_sample(n, derive(master, "rec-pi", i))
        H = HashFamily(derive(master, "rec-H", i))
        adv = make_adversary(kind, pi, n)
        enc = encode(adv, pi, H, n)
        blob = enc.blob
        aux = Aux.from_bytes(blob)
        table = decode(aux, adv, H)
        a = aux.a
        bound = size_bound_bits(n, a)
        rows.append({"trial": i, "adversary": kind, "invertible": len(enc.invertible), "a": a,
                     "payload_bits": aux.payload_bits, "blob_bits": 8 * len(blob), "bound_bits": bound,
                     "full_bits": full_bits, "round_trip": table == [pi.eval(x) for x in range(1 << n)],
                     "within_bound": aux.payload_bits <= bound,
                     "compresses": aux.payload_bits < full_bits, "max_cost": enc.max_cost})
    need = [r for r in rows if r["a"] >= 2]
    return {"n": n, "trials": trials, "rows": rows,
            "round_trips": sum(r["round_trip"] for r in rows),
            "within_bound": sum(r["within_bound"] for r in rows),
            "a_ge_2": len(need), "compressing_when_a_ge_2": sum(r["compresses"] for r in need),
            "seconds": time.perf_counter() - t0}


# hiding ---------------------------------------------------------------------------------------------

def exp_hiding(seed: int, toy_n: int = 12, toy_d: int = 4, toy_trials: int = 1000, pir_n: int = 24, pir_k: int = 12,
               pir_d: int = 6, pir_trials: int = 100_000, control_n: int = 16, control_trials: int = 2000) -> dict:
    guard("toy_n", toy_n, 16)
    guard("pir_n", pir_n, MAX_N)
    t0 = time.perf_counter()
    out: dict = {}
    if toy_trials:
        toy = hiding_distance(toy_commit(toy_n, toy_d), {}, trials=toy_trials, seed=seed)
        out["toy"] = {"n": toy_n, "d": toy_d, **toy.as_dict(), "closed_form": toy_commit_hiding_exact(toy_n, toy_d)}
    clear = com_hiding_estimate(pir_com(clear_index_pir(pir_n), ComParams(pir_n, pir_k, pir_d)), pir_trials, seed)
    control = com_hiding_estimate(pir_com(full_download_pir(control_n), ComParams(control_n, pir_k, pir_d)),
                                  control_trials, seed)
    return {**out, "pir_clear_index": {"n": pir_n, "k": pir_k, "d": pir_d, **clear.as_dict()},
            "pir_full_download": {"n": control_n, "k": pir_k, "d": pir_d, **control.as_dict()},
            "seconds": time.perf_counter() - t0}


def exp_binding(seed: int, n: int = 16, k: int = 12, d: int = 6, trials: int = 10_000) -> dict:
    guard("n", n, MAX_N)
    com = pir_com(clear_index_pir(n), ComParams(n, k, d))
    t0 = time.perf_counter()
    stats = binding_reduction(OmniscientClearIndexBreaker(com), com, trials, seed)
    out = stats.as_dict()
    out.pop("extra")
    out["seconds"] = time.perf_counter() - t0
    return out


# alpha / beta --------------------------------------------------------------------------------------

def chain_adversary(n: int, d: int):
    """One path through the sampler: each query continues from the previous
    answer with the next block of pi's output revealed.  Returns the final
    answer when it inverts y."""
    progs = attacks.block_programs(apply_oracle(n), math.ceil(n / d))

    def adv(y: int, sam: Sam) -> int | None:
        w, C = None, None
        for p in progs:
            w, C = sam.query(w, C, p), p
        return w if sam.oracle("pi", w) == y else None
    return adv


def exp_alpha_beta(seed: int, m: int = 8, d: int = 4, runs: int = 2000) -> dict:
    guard("m", m, 12)
    master = master_seed(seed)
    adv = chain_adversary(m, d)
    alphas, betas = [], []
    t0 = time.perf_counter()
    for i in range(runs):
        rng = rng_for(master, "ab", i)
        pi = perm_sample(m, derive(master, "ab-pi", i), table=True)
        tr = attacks.alpha_beta_trace(adv, {"pi": pi}, HashFamily(derive(master, "ab-H", i)),
                                      rng.randrange(1 << m))
        for beta, alpha in tr.pairs():
            betas.append(beta)
            alphas.append(alpha)
    ea, eb = statistics.fmean(alphas), statistics.fmean(betas)
    diffs = [a - b for a, b in zip(alphas, betas)]
    return {"m": m, "d": d, "runs": runs, "pairs": len(diffs), "mean_alpha_next": ea, "mean_beta": eb,
            "gap": abs(ea - eb), "gap_se": statistics.stdev(diffs) / math.sqrt(len(diffs)),
            "seconds": time.perf_counter() - t0}


# hit monitor ------------------------------------------------------------------------------------

def exp_hit_monitor(seed: int, n: int = 9, d: int = 3, eps: float = 0.1, trials: int = 100) -> dict:
    guard("n", n, 16)
    master = master_seed(seed)
    successes = early = recovered = 0
    ratios = []
    for i in range(trials):
        rng = rng_for(master, "mon", i)
        pi = perm_sample(n, derive(master, "mon-pi", i), table=True)
        oracles = {"pi": pi}
        H = HashFamily(derive(master, "mon-H", i))
        y = rng.randrange(1 << n)

        def adversary(target: int, sam: Sam) -> int | None:
            r = attacks.sam_perm_inverter(target, n, d, eps, sam)
            return r.preimages[0] if r.ok else None

        plain = Sam(H, oracles)
        x = adversary(y, plain)
        if x is None or pi.eval(x) != y:
            continue
        successes += 1
        hits = hit_events(plain.trace, oracles, y)
        mon = attacks.hit_monitor(adversary, oracles, H, y)
        if mon.x is not None and pi.eval(mon.x) == y:
            recovered += 1
            if hits and mon.halted_at <= hits[0]:
                early += 1
        if mon.adversary_cost:
            ratios.append(mon.cost / mon.adversary_cost)
    return {"n": n, "d": d, "trials": trials, "successes": successes, "recovered": recovered,
            "no_later_than_first_hit": early, "rate": early / successes if successes else 0.0,
            "max_cost_ratio": max(ratios, default=0.0)}


# normal form -------------------------------------------------------------------------------------

def corrupted_traces(seed: int) -> dict:
    """A clean inversion trace plus two deliberately broken copies."""
    master = master_seed(seed)
    n = 8
    pi = perm_sample(n, derive(master, "nf-pi"), table=True)
    sam = Sam(HashFamily(derive(master, "nf-H")), {"pi": pi})
    attacks.sam_perm_inverter(pi.eval(3), n, 4, 0.1, sam)
    clean = rows_to_dicts([r for r in _rows(sam.trace) if r.kind == "sam"])
    dup = clean + [dict(clean[-1])]
    orphan = [dict(r) for r in clean]
    last = orphan[-1]
    if last["c"] is None:
        raise AssertionError("expected a non-root query at the end of the trace")
    answered = {r["answer"] for r in clean if r["c_next"] == last["c"]}
    last["w"] = next(w for w in range(1 << n) if w not in answered)
    return {name: sorted({v.kind for v in normal_form_validate(t)})
            for name, t in (("clean", clean), ("duplicate", dup), ("orphan", orphan))}
