"""Figures for the CLI report path.  Only imported when figures are requested;
the library itself never plots."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_tradeoff(result: dict, path: Path) -> Path:
    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))
    rows = result["rows"]
    ds = [r["d"] for r in rows]
    left.semilogy(ds, [r["scale"] for r in rows], "o--", label="d * 2^ceil(n/d)")
    left.semilogy(ds, [r["knee"] for r in rows], "s-", label="median Sam calls")
    left.set_xlabel("depth d")
    left.set_ylabel("Sam calls")
    left.legend()
    by_d: dict[int, list] = {}
    for pt in result["curve"]:
        by_d.setdefault(pt["d"], []).append(pt)
    for d, pts in sorted(by_d.items()):
        right.semilogx([p["multiple"] for p in pts], [p["success"] for p in pts], marker="o", label=f"d={d}")
    right.set_xlabel("budget / (d * 2^ceil(n/d))")
    right.set_ylabel("success rate")
    right.legend(fontsize=8)
    return _save(fig, path)


def plot_reconstruction(result: dict, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for kind in sorted({r["adversary"] for r in result["rows"]}):
        pts = [r for r in result["rows"] if r["adversary"] == kind]
        ax.scatter([p["a"] for p in pts], [p["payload_bits"] for p in pts], label=kind, s=14)
    full = result["rows"][0]["full_bits"] if result["rows"] else 0
    ax.axhline(full, color="k", ls="--", lw=1, label="log2((2^n)!)")
    ax.set_xlabel("|Y|")
    ax.set_ylabel("aux payload bits")
    ax.legend()
    return _save(fig, path)


def plot_uniformity(result: dict, path: Path) -> Path:
    rows = result["uniformity"]["programs"]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar([r["program"] for r in rows], [r["p_value"] for r in rows])
    ax.axhline(0.01, color="r", lw=1)
    ax.set_ylabel("chi-square p-value")
    ax.tick_params(axis="x", rotation=20)
    return _save(fig, path)


def render(command: str, result: dict, outdir: Path) -> list[Path]:
    outdir = Path(outdir)
    if command == "invert-tradeoff":
        return [plot_tradeoff(result, outdir / "invert-tradeoff.png")]
    if command == "reconstruct":
        return [plot_reconstruction(result, outdir / "reconstruct.png")]
    if command == "sam-demo":
        return [plot_uniformity(result, outdir / "sam-uniformity.png")]
    return []
