"""Command-line experiment driver.

Exit codes: 0 ok, 2 usage or invalid parameters, 3 budget cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import sys
import time
from pathlib import Path
from typing import Any, Callable

from . import __version__
from . import experiments as E

RESULT_SCHEMA = "samlab.result/1"

# flag -> (type, default, help)
_COMMON: dict[str, tuple[Any, Any, str]] = {
    "seed": (int, 0, "master seed"),
    "trials": (int, None, "number of trials"),
    "workers": (int, 1, "worker processes where supported"),
    "hardness_s": (float, None, "recorded only: assumed hardness of the primitive"),
    "expansion_ell": (int, None, "recorded only: security-parameter expansion"),
}


def _depths(text: str) -> list[int]:
    try:
        out = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad depth list {text!r}") from None
    if not out or any(v < 1 for v in out):
        raise argparse.ArgumentTypeError("depths must be positive integers")
    return out


def _sam_demo(c: dict) -> dict:
    trials = c["trials"] or 2000
    return {"preimage_law": E.exp_preimage_law(c["seed"], trials=trials, m_max=c["n"] or 12),
            "uniformity": E.exp_uniformity(c["seed"]),
            "transcripts": E.exp_a_tilde(c["seed"], n=10, d=c["d"] or 3, k=c["k"] or 1, trials=trials,
                                         workers=c["workers"])}


def _break_round(c: dict) -> dict:
    return E.exp_break_round(c["seed"], n=c["n"] or 12, d=c["rounds"] or 4, trials=c["trials"] or 500, k=c["k"])


def _break_comm(c: dict) -> dict:
    return E.exp_break_comm(c["seed"], n=c["n"] or 12, c=c["c"] or 6, d=c["d"] or 3, eps=c["eps"] or 0.1,
                            trials=c["trials"] or 300)


def _invert_tradeoff(c: dict) -> dict:
    return E.exp_tradeoff(c["seed"], n=c["n"] or 12, depths=c["depths"] or [1, 2, 3, 4, 6, 12],
                          trials=c["trials"] or 40, eps=c["eps"] or 0.1)


def _reconstruct(c: dict) -> dict:
    return E.exp_reconstruction(c["seed"], n=c["n"] or 6, trials=c["trials"] or 100)


def _pir_com(c: dict) -> dict:
    n = c["n"] or 16
    k, d = c["k"] or 12, c["d"] or 6
    trials = c["trials"] or 10_000
    return {"binding": E.exp_binding(c["seed"], n=n, k=k, d=d, trials=trials),
            "hiding": E.exp_hiding(c["seed"], toy_trials=0, pir_n=n, pir_k=k, pir_d=d, pir_trials=trials,
                                   control_n=n, control_trials=min(trials, 2000))}


def _hiding(c: dict) -> dict:
    from .protocols import hiding_distance, toy_commit, toy_commit_hiding_exact
    n, d = c["n"] or 12, c["d"] or 4
    E.guard("n", n, 16)
    est = hiding_distance(toy_commit(n, d), {}, trials=c["trials"] or 1000, seed=c["seed"])
    return {"n": n, "d": d, **est.as_dict(), "closed_form": toy_commit_hiding_exact(n, d)}


def _alphabeta(c: dict) -> dict:
    return E.exp_alpha_beta(c["seed"], m=c["n"] or 8, d=c["d"] or 4, runs=c["trials"] or 2000)


def _hit_monitor(c: dict) -> dict:
    return E.exp_hit_monitor(c["seed"], n=c["n"] or 9, d=c["d"] or 3, eps=c["eps"] or 0.1, trials=c["trials"] or 100)


COMMANDS: dict[str, tuple[Callable[[dict], dict], str, tuple[str, ...]]] = {
    "sam-demo": (_sam_demo, "sampler preimage law, uniformity and transcript sampling", ("n", "d", "k")),
    "break-round": (_break_round, "round-by-round binding break of the toy scheme", ("n", "rounds", "k")),
    "break-comm": (_break_comm, "binding break through message inversion", ("n", "c", "d", "eps")),
    "invert-tradeoff": (_invert_tradeoff, "depth vs Sam calls when inverting pi", ("n", "depths", "eps")),
    "reconstruct": (_reconstruct, "encode/decode pi from non-hitting inverters", ("n",)),
    "pir-com": (_pir_com, "PIR commitment: hiding and the binding reduction", ("n", "k", "d")),
    "hiding-estimate": (_hiding, "toy scheme hiding distance", ("n", "d")),
    "alphabeta": (_alphabeta, "hit-probability martingale check", ("n", "d")),
    "hit-monitor": (_hit_monitor, "hit monitor wrapped around the Sam inverter", ("n", "d", "eps")),
}

_PARAMS: dict[str, tuple[Any, str]] = {
    "n": (int, "bit length"),
    "d": (int, "depth / rounds"),
    "rounds": (int, "receiver rounds of the toy scheme"),
    "k": (int, "samples per run"),
    "c": (int, "sender communication in bits"),
    "eps": (float, "abort probability"),
    "depths": (_depths, "comma-separated depth list"),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="samlab", description="Collision-sampler experiments.")
    p.add_argument("--version", action="version", version=f"samlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_text, params) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        _add_output_flags(sp)
        for key in params:
            typ, h = _PARAMS[key]
            sp.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None, help=h)
    rp = sub.add_parser("report", help="compact run of every experiment with figures")
    rp.add_argument("outdir", type=Path)
    rp.add_argument("--seed", type=int, default=0)
    rp.add_argument("--scale", type=float, default=0.1, help="fraction of the full trial counts")
    rp.add_argument("--no-figures", action="store_true")
    return p


def _add_output_flags(sp: argparse.ArgumentParser) -> None:
    for key, (typ, _, h) in _COMMON.items():
        sp.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None, help=h)
    sp.add_argument("--config", type=Path, help="TOML file with the same keys as the flags")
    sp.add_argument("--out", type=Path, help="write JSON here instead of stdout")
    sp.add_argument("--csv", type=Path, help="write the row/curve table here")
    sp.add_argument("--figures", type=Path, help="render figures into this directory")


def _load_toml(path: Path) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return {k.replace("-", "_"): v for k, v in data.items()}


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults < TOML file < explicit flags."""
    _, _, params = COMMANDS[args.command]
    keys = list(_COMMON) + list(params)
    cfg: dict = {k: None for k in list(_PARAMS) + list(_COMMON)}
    cfg.update({k: v[1] for k, v in _COMMON.items()})
    if args.config:
        file_cfg = _load_toml(args.config)
        unknown = set(file_cfg) - set(keys)
        if unknown:
            raise ValueError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        if "depths" in file_cfg and not isinstance(file_cfg["depths"], list):
            file_cfg["depths"] = _depths(file_cfg["depths"])
        cfg.update(file_cfg)
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if cfg["trials"] is not None and cfg["trials"] < 1:
        raise ValueError("trials must be positive")
    for k in ("n", "d", "k", "c", "rounds"):
        if cfg.get(k) is not None and cfg[k] < 1:
            raise ValueError(f"{k} must be positive")
    if cfg.get("eps") is not None and not 0 < cfg["eps"] <= 1:
        raise ValueError("eps must be in (0, 1]")
    if cfg.get("n") is not None:
        E.guard("n", cfg["n"], E.MAX_N)
    return cfg


def _strip_timing(obj: Any) -> tuple[Any, float]:
    """Remove wall-clock fields so reruns are byte-identical."""
    total = 0.0
    if isinstance(obj, dict):
        out = {}
        for k, v in obj.items():
            if k == "seconds":
                total += float(v)
                continue
            out[k], t = _strip_timing(v)
            total += t
        return out, total
    if isinstance(obj, list):
        items = [_strip_timing(v) for v in obj]
        return [v for v, _ in items], sum(t for _, t in items)
    return obj, 0.0


def _config_for(command: str, cfg: dict) -> dict:
    keys = list(_COMMON) + list(COMMANDS[command][2])
    return {k: cfg.get(k) for k in keys}


def run_command(command: str, cfg: dict) -> dict:
    fn = COMMANDS[command][0]
    started = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    result, _ = _strip_timing(fn(cfg))
    return {
        "schema": RESULT_SCHEMA,
        "command": command,
        "version": __version__,
        "seed": cfg["seed"],
        "config": _config_for(command, cfg),
        "result": result,
        "timestamp": {"started": started, "elapsed_s": round(time.perf_counter() - t0, 3)},
    }


def to_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(v: Any) -> Any:
    if isinstance(v, (tuple, set, frozenset)):
        return list(v)
    if isinstance(v, Path):
        return str(v)
    raise TypeError(f"not JSON serializable: {type(v).__name__}")


def table_rows(result: dict) -> list[dict]:
    """The longest list of flat records anywhere in the result."""
    best: list[dict] = []

    def walk(obj: Any) -> None:
        nonlocal best
        if isinstance(obj, list) and obj and all(isinstance(r, dict) for r in obj):
            if len(obj) > len(best):
                best = obj
        elif isinstance(obj, dict):
            for v in obj.values():
                walk(v)

    walk(result)
    return best


def write_csv(rows: list[dict], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fields: list[str] = []
    for r in rows:
        fields.extend(k for k in r if k not in fields)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow({k: json.dumps(v) if isinstance(v, (list, dict, tuple)) else v for k, v in r.items()})


def _emit(doc: dict, out: Path | None, csv_path: Path | None, figures: Path | None) -> list[Path]:
    text = to_json(doc)
    written = []
    if out:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        written.append(out)
    else:
        sys.stdout.write(text)
    if csv_path:
        rows = table_rows(doc["result"])
        write_csv(rows, csv_path)
        written.append(csv_path)
    if figures:
        from .plotting import render
        written.extend(render(doc["command"], doc["result"], figures))
    return written


REPORT_PLAN: dict[str, dict] = {
    "sam-demo": {"trials": 2000},
    "break-round": {"trials": 500},
    "break-comm": {"trials": 300},
    "invert-tradeoff": {"trials": 40},
    "reconstruct": {"trials": 100},
    "pir-com": {"trials": 10_000},
    "hiding-estimate": {"trials": 1000},
    "alphabeta": {"trials": 2000},
    "hit-monitor": {"trials": 100},
}


def report(outdir: Path, seed: int, scale: float, figures: bool) -> list[Path]:
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for command, base in REPORT_PLAN.items():
        cfg = {k: None for k in list(_PARAMS) + list(_COMMON)}
        cfg.update({k: v[1] for k, v in _COMMON.items()})
        cfg.update(seed=seed, trials=max(2, int(base["trials"] * scale)))
        doc = run_command(command, cfg)
        written += _emit(doc, outdir / f"{command}.json", outdir / f"{command}.csv",
                         outdir if figures else None)
    return written


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            if not 0 < args.scale <= 1:
                raise ValueError("scale must be in (0, 1]")
            for path in report(args.outdir, args.seed, args.scale, not args.no_figures):
                print(path)
            return 0
        cfg = resolve_config(args)
        doc = run_command(args.command, cfg)
        _emit(doc, args.out, args.csv, args.figures)
        return 0
    except E.BudgetError as e:
        print(f"samlab: budget error: {e}", file=sys.stderr)
        return 3
    except (ValueError, OSError, argparse.ArgumentTypeError) as e:
        print(f"samlab: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
