"""PNG figures for the CLI reports (Agg backend, no timestamps in the files)."""
from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

DPI = 110


def save(fig, path) -> Path:
    path = Path(path)
    # drop the version string so reruns are byte-identical across installs
    fig.savefig(path, dpi=DPI, metadata={"Software": None})
    plt.close(fig)
    return path


def trajectory(t, x, y, path, *, eps: Optional[float] = None, title: str = ""):
    fig, (a0, a1) = plt.subplots(1, 2, figsize=(10, 4))
    a0.plot(x, y, lw=0.8)
    a0.axhline(0.0, color="k", lw=0.5)
    a0.set_xlabel("x")
    a0.set_ylabel("y")
    a0.set_title(title or "phase plane")
    a1.plot(t, y, lw=0.8)
    if eps:
        a1.axhline(10 * eps, color="r", lw=0.5, ls="--", label="10 eps")
        a1.legend()
    a1.set_xlabel("t")
    a1.set_ylabel("y")
    return save(fig, path)


def qmap(rows: Sequence[dict], path):
    fig, ax = plt.subplots(figsize=(6, 4))
    for eps in sorted({r["eps"] for r in rows}):
        sel = [r for r in rows if r["eps"] == eps]
        ax.plot([r["x"] for r in sel], [r["d1"] for r in sel], ".-", label=f"eps={eps:g}")
    ax.set_xlabel("x on the incoming section")
    ax.set_ylabel("Q'")
    ax.legend()
    return save(fig, path)


def regions(stats, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    for s in stats:
        u = np.concatenate([s.x["i"], s.x["ii"], s.x["iii"]])
        d = np.concatenate([s.d1["i"], s.d1["ii"], s.d1["iii"]])
        gl = s.x["ii"][len(s.x["ii"]) // 2]
        order = np.argsort(u)
        ax.plot((u[order] - gl) / s.window, d[order], ".-", ms=3, label=f"eps={s.eps:g}")
    ax.axhline(-0.5, color="k", lw=0.5, ls=":")
    ax.set_xlim(-3, 3)
    ax.set_xlabel("(x - gamma_L) / window")
    ax.set_ylabel("Q'")
    ax.legend()
    return save(fig, path)


def scaling(eps, gaps, slope, intercept, path, *, title: str = ""):
    eps, gaps = np.asarray(eps), np.asarray(gaps)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(eps, gaps, "o", label="alpha* - alpha_SN")
    if np.isfinite(slope):
        e = np.geomspace(eps.min(), eps.max(), 50)
        ax.loglog(e, np.exp(intercept) * e**slope, "-", lw=0.8, label=f"slope {slope:.4f}")
    ax.set_xlabel("eps")
    ax.set_ylabel("gap")
    ax.set_title(title)
    ax.legend()
    return save(fig, path)


def fold_orbits(orbits: Sequence[tuple[float, np.ndarray]], gamma0: Optional[np.ndarray], path):
    fig, ax = plt.subplots(figsize=(6, 5))
    for eps, pts in orbits:
        ax.plot(pts[:, 0], pts[:, 1], lw=0.8, label=f"eps={eps:g}")
    if gamma0 is not None:
        ax.plot(gamma0[:, 0], gamma0[:, 1], "k--", lw=1.0, label="grazing cycle")
    ax.axhline(0.0, color="k", lw=0.4)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.legend(fontsize=7)
    return save(fig, path)


def branch(alpha, y_min, multiplier, path, *, title: str = ""):
    fig, (a0, a1) = plt.subplots(1, 2, figsize=(10, 4))
    a0.plot(alpha, y_min, ".-")
    a0.set_xlabel("alpha")
    a0.set_ylabel("min y on cycle")
    a0.set_title(title)
    a1.plot(alpha, multiplier, ".-")
    a1.axhline(1.0, color="k", lw=0.5)
    a1.set_xlabel("alpha")
    a1.set_ylabel("multiplier")
    return save(fig, path)


def chini(reports, path):
    fig, (a0, a1) = plt.subplots(1, 2, figsize=(10, 4))
    for rep in reports:
        u0 = np.array([r.u0 for r in rep.results])
        a0.plot(u0, [r.U for r in rep.results], lw=0.8, label=f"k={rep.k}, c={rep.c:g}")
        a1.plot(u0, [r.U1 for r in rep.results], lw=0.8)
    a0.set_xlabel("u0")
    a0.set_ylabel("U")
    a0.legend(fontsize=7)
    a1.set_xlabel("u0")
    a1.set_ylabel("U'")
    return save(fig, path)
