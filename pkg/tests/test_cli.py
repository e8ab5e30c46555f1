from __future__ import annotations

import json
import math

import pytest

from foldlab.cli import chart_roundtrips, main


def _run(tmp_path, name, command, **cfg):
    out = tmp_path / name
    cfg.setdefault("out", str(out))
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(cfg))
    code = main([command, "--config", str(path)])
    summary = out / "summary.json"
    return code, out, (json.loads(summary.read_text()) if summary.exists() else None)


def test_invalid_key_exits_with_config_error(tmp_path, capsys):
    code, out, summary = _run(tmp_path, "bad", "charts", integ={"tol": 1e-9})
    assert code == 1
    assert "unknown config keys" in capsys.readouterr().err
    assert summary is None


def test_invalid_jobs(tmp_path):
    assert main(["charts", "--jobs", "0", "--out", str(tmp_path / "x")]) == 1


def test_charts(tmp_path):
    code, out, s = _run(tmp_path, "charts", "charts", chart_samples=50)
    assert code == 0 and s["passed"]
    assert s["checks"]["max_roundtrip_rel_error"]["value"] <= 1e-13
    assert sorted(s["files"]) == ["charts.csv", "summary.json"]
    assert (out / "timings.log").exists()


def test_chart_roundtrips_cover_all_charts():
    names = {r[0].split(":")[0].split("->")[0] for r in chart_roundtrips(5, 1)}
    assert names == {"cyl_y1", "cyl_eps2", "cyl_ym3", "sph_r1", "sph_eps2"}


def test_simulate_parabola(tmp_path):
    code, out, s = _run(tmp_path, "sim", "simulate", model="normal_form", field="z_plus", t_max=0.5, alpha=0.0)
    assert code == 0
    assert s["checks"]["parabola_deviation"]["value"] <= 1e-8
    assert (out / "trajectory.png").exists()


def test_simulate_friction_near_sliding(tmp_path):
    code, out, s = _run(tmp_path, "simf", "simulate", figures=False)
    assert code == 0
    assert s["results"]["near_sliding_tail"]
    assert s["results"]["y_min_tail"] <= 10 * 5e-3


def test_qmap_rerun_is_byte_identical(tmp_path):
    cfg = dict(model="normal_form", eps_list=[1e-3], x_grid=[-0.3, -0.1, 5], alpha=0.0)
    c1, o1, _ = _run(tmp_path, "a", "qmap", **cfg)
    c2, o2, _ = _run(tmp_path, "b", "qmap", **cfg)
    assert c1 == c2 == 0
    for name in ("qmap.csv", "qmap.png"):
        assert (o1 / name).read_bytes() == (o2 / name).read_bytes()
    first = (o1 / "qmap.csv").read_bytes()
    _run(tmp_path, "a", "qmap", **cfg)
    assert (o1 / "qmap.csv").read_bytes() == first
    assert (o1 / "timings.log").read_text().count("\n") == 2


def test_regions_small(tmp_path):
    code, out, s = _run(tmp_path, "reg", "regions", model="normal_form", eps_list=[4e-4, 2e-4], alpha=0.0, figures=False)
    assert code == 0, s
    assert s["checks"]["region_i_log_slope_vs_inv_eps"]["value"] < 0


def test_chini_small(tmp_path):
    code, out, s = _run(tmp_path, "chini", "chini", chini_k=[2], chini_c=[1.0], chini_n=20)
    assert code == 0 and s["passed"]
    assert (out / "chini.csv").exists() and (out / "chini_samples.csv").exists()


def test_branch_needs_friction(tmp_path):
    code, _, _ = _run(tmp_path, "br", "branch", model="normal_form")
    assert code == 1


@pytest.mark.slow
def test_scaling_command(tmp_path):
    code, out, s = _run(tmp_path, "sc", "scaling", eps_list=[2.5e-3, 5e-3], figures=False)
    assert code in (0, 3)
    assert not s["failures"]
    assert math.isfinite(s["results"]["slope"])
    assert (out / "scaling.csv").read_text().splitlines()[0].startswith("eps,alpha_sn,gap")
