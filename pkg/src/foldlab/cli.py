"""Command line runner: ``foldlab <command> --config cfg.json [--jobs N] [--out dir]``.

Every command writes CSV tables (17 significant digits), a ``summary.json``
with the checked invariants, optional PNG figures and a ``timings.log``.
Exit codes: 0 all checks pass, 1 config error, 2 numerical failure,
3 failed checks or partial failures.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from foldlab import config as cfgmod
from foldlab.config import ExperimentConfig
from foldlab.errors import ConfigError, DomainError, FoldlabError, NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 1, 2, 3

COMMANDS = ("simulate", "qmap", "regions", "chini", "charts", "branch", "fold-sweep", "scaling")


# --- output helpers ---------------------------------------------------------

def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(u) for k, u in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(u) for u in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    return v


class Report:
    """Collects checks, failures and file names for one command run."""

    def __init__(self, command: str, cfg: ExperimentConfig, out: Path):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.checks: dict[str, dict] = {}
        self.failures: list[dict] = []
        self.files: list[str] = []
        self.results: dict[str, Any] = {}

    def check(self, name: str, value, ok: bool, threshold=None) -> None:
        self.checks[name] = {"value": value, "pass": bool(ok), "threshold": threshold}

    def fail(self, where, message: str) -> None:
        self.failures.append({"at": where, "error": message})

    def csv(self, name: str, header, rows) -> None:
        write_csv(self.out / name, header, rows)
        self.files.append(name)

    def figure(self, name: str, draw: Callable[[Path], Any]) -> None:
        if self.cfg.figures:
            draw(self.out / name)
            self.files.append(name)

    @property
    def passed(self) -> bool:
        return not self.failures and all(c["pass"] for c in self.checks.values())

    def write(self) -> None:
        doc = {
            "command": self.command,
            "config": self.cfg.to_dict(),
            "results": self.results,
            "checks": self.checks,
            "failures": self.failures,
            "files": sorted(self.files + ["summary.json"]),
            "passed": self.passed,
        }
        text = json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"
        (self.out / "summary.json").write_text(text, encoding="utf-8")


# --- model construction (also used inside worker processes) -----------------

def build_model(cfg: ExperimentConfig):
    from foldlab.models import make_friction, make_normal_form

    if cfg.model == "friction":
        return make_friction(cfg.friction_params())
    return make_normal_form()


def build_sections(cfg: ExperimentConfig):
    from foldlab.maps import friction_sections, normal_form_sections

    if cfg.model == "friction":
        return friction_sections(cfg.friction_params(), cfg.delta)
    return normal_form_sections(cfg.delta, cfg.xi)


def _regfn(cfg: ExperimentConfig):
    from foldlab.regfn import get_regfn

    return get_regfn(cfg.regfn)


def _pool_map(fn, args: list, jobs: int) -> list:
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(args))) as pool:
            return list(pool.map(fn, args))
    return [fn(a) for a in args]


def _catch(fn, *a):
    try:
        return fn(*a)
    except (NumericalError, DomainError) as exc:
        return f"{type(exc).__name__}: {exc}"


# --- commands ---------------------------------------------------------------

def cmd_simulate(cfg: ExperimentConfig, rep: Report, jobs: int) -> None:
    from foldlab import plotting
    from foldlab.integrate import integrate
    from foldlab.models import assemble_regularized

    model = build_model(cfg)
    if cfg.field == "regularized" and cfg.eps > 0:
        fld = assemble_regularized(model, _regfn(cfg), cfg.eps)
    elif cfg.field == "z_minus":
        fld = model.z_minus
    else:
        fld = model.z_plus
    if cfg.z0 is not None:
        z0 = tuple(cfg.z0)
    elif cfg.model == "friction":
        z0 = (-cfg.friction_params().mu(cfg.alpha) - 0.5, cfg.alpha)
    else:
        z0 = (-0.2, cfg.delta)
    orb = integrate(fld, z0, cfg.alpha, cfg.t_max, cfg.tol)
    t = np.arange(0.0, orb.t_end + 0.5 * cfg.dt, cfg.dt)
    t = t[t <= orb.t_end]
    xy = np.array([orb(v) for v in t])
    rep.csv("trajectory.csv", ["t", "x", "y"], zip(t, xy[:, 0], xy[:, 1]))
    tail = xy[t >= 0.75 * t[-1]]
    rep.results.update(
        z0=list(z0),
        t_end=orb.t_end,
        y_min_tail=float(tail[:, 1].min()),
        y_max_tail=float(tail[:, 1].max()),
        near_sliding_tail=bool(cfg.field == "regularized" and cfg.eps > 0 and tail[:, 1].min() <= 10 * cfg.eps),
    )
    if cfg.model == "normal_form" and cfg.field == "z_plus":
        # x' = 1, y' = 2x: the orbit is the parabola y = x^2 + (y0 - x0^2)
        dev = float(np.max(np.abs(xy[:, 1] - (xy[:, 0] ** 2 + z0[1] - z0[0] ** 2))))
        rep.check("parabola_deviation", dev, dev <= 1e-8, 1e-8)
    rep.figure(
        "trajectory.png",
        lambda p: plotting.trajectory(t, xy[:, 0], xy[:, 1], p, eps=cfg.eps or None, title=f"{cfg.model}, alpha={cfg.alpha:g}"),
    )


def _qmap_job(args):
    from foldlab.maps import q_map

    cfg_d, eps = args
    cfg = cfgmod.from_dict(cfg_d)
    model, fn, sec = build_model(cfg), _regfn(cfg), build_sections(cfg)
    lo, hi, n = cfg.x_grid
    rows, fails = [], []
    for x in np.linspace(lo, hi, n):
        r = _catch(lambda u: q_map(model, fn, eps, sec, float(u), cfg.alpha, True, tol=cfg.tol), x)
        if isinstance(r, str):
            fails.append((eps, float(x), r))
        else:
            rows.append(dict(eps=eps, x=float(x), x_out=r.x_out, d1=r.d1, d2=r.d2, flight_time=r.flight_time))
    return rows, fails


def cmd_qmap(cfg: ExperimentConfig, rep: Report, jobs: int) -> None:
    from foldlab import plotting

    outs = _pool_map(_qmap_job, [(cfg.to_dict(), e) for e in cfg.eps_list], jobs)
    rows = [r for o in outs for r in o[0]]
    for eps, x, msg in (f for o in outs for f in o[1]):
        rep.fail({"eps": eps, "x": x}, msg)
    cols = ["eps", "x", "x_out", "d1", "d2", "flight_time"]
    rep.csv("qmap.csv", cols, ([r[c] for c in cols] for r in rows))
    finite = all(math.isfinite(r["d1"]) and math.isfinite(r["d2"]) for r in rows)
    rep.check("derivatives_finite", finite, finite)
    rep.results["samples"] = len(rows)
    if rows:
        rep.figure("qmap.png", lambda p: plotting.qmap(rows, p))


def _regions_job(args):
    from foldlab.blowup import q_region_stats

    cfg_d, eps = args
    cfg = cfgmod.from_dict(cfg_d)
    return eps, _catch(
        lambda: q_region_stats(build_model(cfg), _regfn(cfg), eps, build_sections(cfg), cfg.chi, cfg.theta, alpha=cfg.alpha, tol=cfg.tol)
    )


def cmd_regions(cfg: ExperimentConfig, rep: Report, jobs: int) -> None:
    from foldlab import plotting
    from foldlab.blowup import RegionReport

    outs = _pool_map(_regions_job, [(cfg.to_dict(), e) for e in cfg.eps_list], jobs)
    stats = []
    for eps, s in outs:
        if isinstance(s, str):
            rep.fail({"eps": eps}, s)
        else:
            stats.append(s)
    cols = ["eps", "window", "max_abs_d1_i", "max_log_abs_d1_K", "center_signs_ok", "upsilon_crossings", "max_dev_iii"]
    rep.csv("regions.csv", cols, ([s.row()[c] for c in cols] for s in stats))
    samples = []
    for s in stats:
        for region in ("i", "ii", "iii"):
            for j, (x, d) in enumerate(zip(s.x[region], s.d1[region])):
                samples.append((s.eps, region, x, d, s.d2[j] if region == "ii" else math.nan))
    rep.csv("region_samples.csv", ["eps", "region", "x", "d1", "d2"], samples)
    if not stats:
        return
    report = RegionReport(stats, cfg.chi, cfg.theta)
    worst_i = max(s.max_abs_d1_i for s in stats)
    rep.check("region_i_max_abs_d1", worst_i, worst_i <= 0.05, 0.05)
    if len(stats) >= 2:
        slope = report.log_slope_i
        rep.check("region_i_log_slope_vs_inv_eps", slope, slope < 0, 0.0)
    signs = all(s.center_signs_ok for s in stats)
    rep.check("region_ii_signs", signs, signs)
    crossings = [s.upsilon_crossings for s in stats]
    rep.check("region_ii_unique_crossing", crossings, all(c == 1 for c in crossings), 1)
    smallest = min(stats, key=lambda s: s.eps)
    rep.check("region_iii_max_dev_at_smallest_eps", smallest.max_dev_iii, smallest.max_dev_iii <= 0.05, 0.05)
    rep.figure("regions.png", lambda p: plotting.regions(stats, p))


def _chini_job(args):
    from foldlab.chini import boundary_error, chini_property_scan, default_u0_grid

    k, c, n = args
    rep = chini_property_scan(k, c, default_u0_grid(k, c, n))
    errs = [boundary_error(k, c, h) for h in (1e-2, 1e-3)]
    return k, c, rep, errs


def cmd_chini(cfg: ExperimentConfig, rep: Report, jobs: int) -> None:
    from foldlab import plotting

    args = [(k, float(c), cfg.chini_n) for k in cfg.chini_k for c in cfg.chini_c]
    outs = _pool_map(_chini_job, args, jobs)
    rows, samples = [], []
    for k, c, r, errs in outs:
        for u0, msg in r.failures:
            rep.fail({"k": k, "c": c, "u0": u0}, msg)
        ch, m = r.checks, r.margins
        rows.append((k, c, len(r.results), *[ch[name] for name in sorted(ch)], m.get("U1_min"), m.get("U1_max"), m.get("U2_max"), m.get("w_min"), max(errs)))
        samples += [(k, c, q.u0, q.T, q.U, q.U1, q.U2, q.v1, q.v2, q.w) for q in r.results]
        for name, ok in ch.items():
            rep.check(f"k={k},c={c:g}:{name}", ok, ok)
        rep.check(f"k={k},c={c:g}:boundary_T1_rel_err", max(errs), max(errs) <= 1e-3, 1e-3)
    names = sorted(outs[0][2].checks) if outs else []
    rep.csv("chini.csv", ["k", "c", "n", *names, "U1_min", "U1_max", "U2_max", "w_min", "boundary_rel_err"], rows)
    rep.csv("chini_samples.csv", ["k", "c", "u0", "T", "U", "U1", "U2", "v1", "v2", "w"], samples)
    rep.figure("chini.png", lambda p: plotting.chini([o[2] for o in outs], p))


def chart_roundtrips(n: int, seed: int) -> list[tuple[str, int, float]]:
    """Relative round-trip errors of all chart maps on random valid points."""
    from foldlab import blowup as bl

    rng = np.random.default_rng(seed)
    out = []

    def rel(a, b):
        a, b = np.asarray(a, float), np.asarray(b, float)
        return float(np.max(np.abs(a - b) / np.abs(b)))

    for i in range(n):
        y = 10 ** rng.uniform(-3, 0)
        eps = 10 ** rng.uniform(-6, -2)
        x = rng.uniform(-1, 1)
        k = int(rng.integers(1, 4))
        for cid, yy in (("cyl_y1", y), ("cyl_eps2", y * rng.choice([-1, 1])), ("cyl_ym3", -y)):
            p = bl.cartesian_to_cyl(yy, eps, cid)
            out.append((f"{cid}:cartesian", i, rel(bl.cyl_to_cartesian(p), (yy, eps))))
        p1 = bl.cartesian_to_cyl(y, eps, "cyl_y1")
        out.append(("cyl_y1->eps2->y1", i, rel(bl.cyl_chart_change(bl.cyl_chart_change(p1, "cyl_eps2"), "cyl_y1").coords, p1.coords)))
        p3 = bl.cartesian_to_cyl(-y, eps, "cyl_ym3")
        out.append(("cyl_ym3->eps2->ym3", i, rel(bl.cyl_chart_change(bl.cyl_chart_change(p3, "cyl_eps2"), "cyl_ym3").coords, p3.coords)))
        q1 = bl.sphere_to_chart1(x, y, eps, k)
        out.append(("sph_r1:cartesian", i, rel(bl.sphere_to_cartesian(q1), (x, y, eps))))
        q2 = bl.sphere_chart_change(q1, "sph_eps2")
        out.append(("sph_r1->eps2->r1", i, rel(bl.sphere_chart_change(q2, "sph_r1").coords, q1.coords)))
        out.append(("sph_eps2:cartesian", i, rel(bl.sphere_to_cartesian(q2), (x, y, eps))))
        out.append(("sph_eps2:conserved_eps", i, rel(bl.conserved_eps(q2), eps)))
        out.append(("sph_r1:conserved_eps", i, rel(bl.conserved_eps(q1), eps)))
    return out


def cmd_charts(cfg: ExperimentConfig, rep: Report, jobs: int) -> None:
    rows = chart_roundtrips(cfg.chart_samples, cfg.seed)
    rep.csv("charts.csv", ["check", "sample", "rel_error"], rows)
    worst = max(r[2] for r in rows)
    rep.check("max_roundtrip_rel_error", worst, worst <= 1e-13, 1e-13)


def _need_friction(cfg: ExperimentConfig) -> None:
    if cfg.model != "friction":
        raise ConfigError("this command needs model = friction")


def cmd_branch(cfg: ExperimentConfig, rep: Report, jobs: int) -> None:
    from foldlab import plotting
    from foldlab.continuation import FOLD_TOL, fold_for_eps, grazing_alpha

    _need_friction(cfg)
    if not cfg.eps > 0:
        raise ConfigError("branch needs eps > 0")
    model, fn = build_model(cfg), _regfn(cfg)
    graze = grazing_alpha(model)
    fold, br = fold_for_eps(model, fn, cfg.eps, graze, tol=min(cfg.tol, 1e-11))
    cols = ["alpha", "x_fix", "multiplier", "y_min", "flight_time", "residual", "fold"]
    rep.csv("branch.csv", cols, ([getattr(p, c) for c in cols] for p in br.points))
    rep.results.update(
        alpha_star=graze.alpha_star,
        alpha_sn=fold.alpha_sn,
        gap=graze.alpha_star - fold.alpha_sn,
        x_sn=fold.x_sn,
        p_xx=fold.p_xx,
        p_alpha=fold.p_alpha,
        branch_points=len(br.points),
        truncated=br.truncated,
    )
    rep.check("fold_residual", fold.residual, fold.residual <= FOLD_TOL, FOLD_TOL)
    rep.check("multiplier_at_fold", fold.multiplier, abs(fold.multiplier - 1.0) <= 1e-6, 1e-6)
    a = [p.alpha for p in br.points]
    rep.figure("branch.png", lambda p: plotting.branch(a, [q.y_min for q in br.points], [q.multiplier for q in br.points], p, title=f"eps={cfg.eps:g}"))


def _sweep(cfg: ExperimentConfig, rep: Report, jobs: int, with_orbits: bool) -> None:
    from foldlab import plotting
    from foldlab.continuation import fold_hausdorff, grazing_alpha, grazing_cycle_polyline, scaling_sweep

    _need_friction(cfg)
    model, fn = build_model(cfg), _regfn(cfg)
    graze = grazing_alpha(model)
    fit = scaling_sweep(model, fn, cfg.eps_list, graze, jobs=jobs)
    for eps, msg in fit.failures:
        rep.fail({"eps": eps}, msg)
    folds = sorted(fit.folds, key=lambda f: f.eps)
    gamma0 = grazing_cycle_polyline(model, graze) if with_orbits else None
    hd = [fold_hausdorff(f, gamma0) if with_orbits else math.nan for f in folds]
    cols = ["eps", "alpha_sn", "gap", "x_sn", "p_xx", "p_alpha", "multiplier", "residual", "hausdorff"]
    rows = [(f.eps, f.alpha_sn, graze.alpha_star - f.alpha_sn, f.x_sn, f.p_xx, f.p_alpha, f.multiplier, f.residual, h) for f, h in zip(folds, hd)]
    rep.csv("folds.csv" if with_orbits else "scaling.csv", cols if with_orbits else cols[:-1], [r if with_orbits else r[:-1] for r in rows])
    expo = fn.exponent
    rep.results.update(
        alpha_star=graze.alpha_star,
        slope=fit.slope,
        intercept=fit.intercept,
        r_squared=fit.r_squared,
        exponent_theory=expo,
        solved=[f.eps for f in folds],
    )
    rep.check("all_eps_solved", len(folds), len(folds) == len(cfg.eps_list), len(cfg.eps_list))
    ok = math.isfinite(fit.slope) and abs(fit.slope - expo) <= 0.05
    rep.check("slope_near_exponent", fit.slope, ok, [expo - 0.05, expo + 0.05])
    rep.check("r_squared", fit.r_squared, math.isfinite(fit.r_squared) and fit.r_squared >= 0.99, 0.99)
    if with_orbits:
        dec = bool(len(hd) >= 2 and all(b > a for a, b in zip(hd, hd[1:])))
        rep.check("hausdorff_shrinks_with_eps", hd, dec)
        (rep.out / "scaling.json").write_text(
            json.dumps(_jsonable({k: rep.results[k] for k in ("alpha_star", "slope", "intercept", "r_squared", "exponent_theory", "solved")}), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        rep.files.append("scaling.json")
        rep.figure("fold_orbits.png", lambda p: plotting.fold_orbits([(f.eps, f.orbit) for f in folds if f.orbit is not None], gamma0, p))
    if fit.points:
        pe, pg = zip(*[(e, g) for e, g in fit.points if g > 0]) if any(g > 0 for _, g in fit.points) else ((), ())
        if pe:
            rep.figure("scaling.png", lambda p: plotting.scaling(pe, pg, fit.slope, fit.intercept, p, title=cfg.regfn))


def cmd_fold_sweep(cfg, rep, jobs):
    _sweep(cfg, rep, jobs, True)


def cmd_scaling(cfg, rep, jobs):
    _sweep(cfg, rep, jobs, False)


HANDLERS = {
    "simulate": cmd_simulate,
    "qmap": cmd_qmap,
    "regions": cmd_regions,
    "chini": cmd_chini,
    "charts": cmd_charts,
    "branch": cmd_branch,
    "fold-sweep": cmd_fold_sweep,
    "scaling": cmd_scaling,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="foldlab", description="Regularized visible-fold and grazing experiments.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON config file (defaults apply for missing keys)")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    ap.add_argument("--out", help="output directory (overrides the config)")
    return ap


def run(command: str, cfg: ExperimentConfig, out: Path, jobs: int = 1) -> int:
    out.mkdir(parents=True, exist_ok=True)
    rep = Report(command, cfg, out)
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        HANDLERS[command](cfg, rep, jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FoldlabError as exc:
        rep.fail("fatal", f"{type(exc).__name__}: {exc}")
        code = EXIT_NUMERIC
    rep.write()
    with open(out / "timings.log", "a", encoding="utf-8") as fh:
        fh.write(f"{time.strftime('%Y-%m-%dT%H:%M:%S')} {command} {time.perf_counter() - t0:.2f}s jobs={jobs}\n")
    if code == EXIT_OK and not rep.passed:
        code = EXIT_CHECK
    status = {EXIT_OK: "pass", EXIT_NUMERIC: "numerical failure", EXIT_CHECK: "checks failed"}[code]
    print(f"{command}: {status} ({out / 'summary.json'})")
    for name, c in rep.checks.items():
        if not c["pass"]:
            print(f"  failed: {name} = {c['value']}")
    for f in rep.failures:
        print(f"  error at {f['at']}: {f['error']}")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load(args.config) if args.config else ExperimentConfig()
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg.out)
    return run(args.command, cfg, out, args.jobs)


if __name__ == "__main__":
    sys.exit(main())
