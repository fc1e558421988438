"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Full-size runs take several minutes on one core.  Run standalone with
``python tests/test_acceptance.py`` to get only the criterion lines.
"""

import functools
import time

import pytest

from samlab import experiments as E
from samlab.cli import run_command

SEED = 2026

# tolerances
LAW_TRIALS, LAW_M_MAX, LAW_MAX_SECONDS = 10_000, 12, 60
UNIF_M, UNIF_MULT, UNIF_ALPHA, UNIF_MIN_ACCEPT, UNIF_MAX_SECONDS = 8, 50, 0.01, 4, 120
ATILDE_N, ATILDE_D, ATILDE_K, ATILDE_TRIALS, ATILDE_TV = 10, 3, 2, 100_000, 0.02
INV_N, INV_D, INV_EPS, INV_TRIALS, INV_SLACK = 12, 3, 0.1, 2000, 0.02
ROUND_N, ROUND_D, ROUND_TRIALS, ROUND_MIN_RATE, ROUND_MAX_SECONDS = 12, 4, 500, 0.4, 300
TRADE_N, TRADE_DEPTHS, TRADE_FACTOR = 12, (1, 2, 3, 4, 6, 12), 4.0
REC_N, REC_TRIALS = 6, 100
HIDE_MAX, HIDE_SE_MAX, CONTROL_MIN, HIDE_TOY_TRIALS = 0.05, 0.005, 0.9, 1000
HIDE_PIR_N, HIDE_PIR_K, HIDE_PIR_D, HIDE_PIR_TRIALS = 24, 12, 6, 100_000
AB_M, AB_RUNS, AB_GAP = 8, 2000, 0.05
BIND_N, BIND_TRIALS, BIND_MIN_RATE = 16, 10_000, 0.064


def _timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    out["wall_seconds"] = time.perf_counter() - t0
    return out


@functools.lru_cache(maxsize=None)
def result(name: str) -> dict:
    runs = {
        "law": lambda: _timed(E.exp_preimage_law, SEED, trials=LAW_TRIALS, m_max=LAW_M_MAX),
        "uniformity": lambda: _timed(E.exp_uniformity, SEED, m=UNIF_M, mult=UNIF_MULT, alpha=UNIF_ALPHA),
        "a_tilde": lambda: _timed(E.exp_a_tilde, SEED, n=ATILDE_N, d=ATILDE_D, k=ATILDE_K, trials=ATILDE_TRIALS),
        "inv": lambda: _timed(E.exp_inv_abort, SEED, n=INV_N, d=INV_D, eps=INV_EPS, trials=INV_TRIALS),
        "round": lambda: _timed(E.exp_break_round, SEED, n=ROUND_N, d=ROUND_D, trials=ROUND_TRIALS),
        "tradeoff": lambda: _timed(E.exp_tradeoff, SEED, n=TRADE_N, depths=TRADE_DEPTHS),
        "reconstruction": lambda: _timed(E.exp_reconstruction, SEED, n=REC_N, trials=REC_TRIALS),
        "hiding": lambda: _timed(E.exp_hiding, SEED, toy_n=12, toy_d=4, toy_trials=HIDE_TOY_TRIALS,
                                 pir_n=HIDE_PIR_N, pir_k=HIDE_PIR_K, pir_d=HIDE_PIR_D,
                                 pir_trials=HIDE_PIR_TRIALS),
        "alpha_beta": lambda: _timed(E.exp_alpha_beta, SEED, m=AB_M, runs=AB_RUNS),
        "binding": lambda: _timed(E.exp_binding, SEED, n=BIND_N, trials=BIND_TRIALS),
        "corrupted": lambda: E.corrupted_traces(SEED),
    }
    return runs[name]()


def check_1():
    r = result("law")
    ok = r["trials"] == LAW_TRIALS and r["failures"] == 0 and r["wall_seconds"] < LAW_MAX_SECONDS
    return ok, f"{r['failures']} failures in {r['trials']} answers, m <= {LAW_M_MAX}, {r['wall_seconds']:.1f}s"


def check_2():
    r = result("uniformity")
    ok = r["accepted"] >= UNIF_MIN_ACCEPT and r["wall_seconds"] < UNIF_MAX_SECONDS
    ps = ", ".join(f"{p['program']}={p['p_value']:.3f}" for p in r["programs"])
    return ok, f"{r['accepted']}/5 accept at p > {UNIF_ALPHA} ({ps}), {r['wall_seconds']:.1f}s"


def check_3():
    r = result("a_tilde")
    ok = (r["tv"] <= ATILDE_TV and r["consistent_rate"] == 1.0 and r["sam_calls_exact"]
          and r["max_depth"] <= ATILDE_D + 1)
    return ok, (f"TV={r['tv']:.4f} (<= {ATILDE_TV}, N={r['trials']}), consistent={r['consistent_rate']:.3f}, "
                f"calls==d+k: {r['sam_calls_exact']}, max depth {r['max_depth']} <= {ATILDE_D + 1}")


def check_4():
    r = result("inv")
    ok = r["abort_rate"] <= INV_EPS + INV_SLACK and r["bad_preimages"] == 0
    return ok, (f"abort rate {r['abort_rate']:.4f} <= {INV_EPS + INV_SLACK:.2f} over {r['trials']}, "
                f"wrong preimages {r['bad_preimages']}")


def check_5():
    r = result("round")
    ok = r["two_openings_rate"] >= ROUND_MIN_RATE and r["wall_seconds"] < ROUND_MAX_SECONDS
    return ok, (f"two-openings rate {r['two_openings_rate']:.3f} >= {ROUND_MIN_RATE} over {r['trials']}, "
                f"{r['wall_seconds']:.1f}s")


def check_6():
    r = result("tradeoff")
    ratios = {row["d"]: row["ratio"] for row in r["rows"]}
    ok = all(1 / TRADE_FACTOR <= v <= TRADE_FACTOR for v in ratios.values())
    shown = ", ".join(f"d={d}:{v:.2f}" for d, v in ratios.items())
    return ok, f"knee / (d*2^ceil(n/d)) within factor {TRADE_FACTOR:g}: {shown}"


def check_7():
    r = result("reconstruction")
    exact = r["round_trips"] == r["trials"] and r["within_bound"] == r["trials"]
    strict = r["compressing_when_a_ge_2"] == r["a_ge_2"]
    return exact and strict, (f"round trips {r['round_trips']}/{r['trials']}, within size bound "
                              f"{r['within_bound']}/{r['trials']}, shorter than log2((2^n)!) in "
                              f"{r['compressing_when_a_ge_2']}/{r['a_ge_2']} trials with a >= 2")


def check_8():
    r = result("hiding")
    toy, clear, ctrl = r["toy"], r["pir_clear_index"], r["pir_full_download"]
    ok = (toy["rho"] <= HIDE_MAX and toy["se"] <= HIDE_SE_MAX and clear["rho"] <= HIDE_MAX
          and ctrl["rho"] >= CONTROL_MIN)
    return ok, (f"toy rho={toy['rho']:.4f} (se {toy['se']:.4f}, {toy['method']}), "
                f"clear-index rho={clear['rho']:.4f}, full-download rho={ctrl['rho']:.3f} >= {CONTROL_MIN}")


def check_9():
    r = result("alpha_beta")
    ok = r["gap"] <= AB_GAP
    return ok, (f"|E[alpha_next] - E[beta]| = {r['gap']:.5f} (se {r['gap_se']:.5f}) <= {AB_GAP} "
                f"over {r['runs']} runs")


def check_10():
    r = result("binding")
    ok = r["predictor_rate_rb"] >= BIND_MIN_RATE and r["d_adv_rb"] > 3 * r["d_adv_rb_se"]
    return ok, (f"D' rate {r['predictor_rate_rb']:.4f} (raw {r['predictor_rate']:.4f}) >= {BIND_MIN_RATE}, "
                f"D adv {r['d_adv_rb']:.4f} > 3*{r['d_adv_rb_se']:.4f} (raw {r['d_adv']:.4f})")


def check_11():
    counts = {
        "3": result("a_tilde")["normal_form_violations"],
        "4": result("inv")["normal_form_violations"],
        "5": result("round")["normal_form_violations"],
        "6": result("tradeoff")["normal_form_violations"],
    }
    bad = result("corrupted")
    flagged = bad["clean"] == [] and "duplicate_next" in bad["duplicate"] and "orphan" in bad["orphan"]
    ok = not any(counts.values()) and flagged
    return ok, f"violations per criterion {counts}, corrupted traces flagged: {bad}"


# reduced configs for the rerun check
RERUN = {
    "sam-demo": {"trials": 200, "n": 8},
    "break-round": {"trials": 20},
    "break-comm": {"trials": 10},
    "invert-tradeoff": {"trials": 3, "n": 8, "depths": [1, 2, 4]},
    "reconstruct": {"trials": 6, "n": 4},
    "pir-com": {"trials": 500},
    "hiding-estimate": {"trials": 30},
    "alphabeta": {"trials": 50},
    "hit-monitor": {"trials": 10},
}


def _cfg(seed: int, **over) -> dict:
    base = {k: None for k in ("n", "d", "rounds", "k", "c", "eps", "depths", "trials", "hardness_s",
                              "expansion_ell")}
    base.update(seed=seed, workers=1, **over)
    return base


def check_12():
    differing = []
    for command, over in RERUN.items():
        a = run_command(command, _cfg(SEED, **over))
        b = run_command(command, _cfg(SEED, **over))
        a.pop("timestamp"), b.pop("timestamp")
        if a != b:
            differing.append(command)
    return not differing, f"{len(RERUN) - len(differing)}/{len(RERUN)} commands reproduce exactly (reduced trials)"


CHECKS = {n: globals()[f"check_{n}"] for n in range(1, 13)}


@pytest.mark.slow
@pytest.mark.parametrize("number", list(CHECKS))
def test_criterion(number, criterion):
    passed, detail = CHECKS[number]()
    criterion(number, passed, detail)
    assert passed, detail


if __name__ == "__main__":
    for number, check in CHECKS.items():
        passed, detail = check()
        print(f"CRITERION {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}", flush=True)
