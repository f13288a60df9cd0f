import math
import pathlib

import numpy as np
import pytest

import obeam

CONFIGS = pathlib.Path(__file__).resolve().parents[2] / "configs"


def test_version():
    assert obeam.__version__.count(".") == 2


def test_frame_params():
    fp = obeam.frame_params(0.01, 0.1)
    assert fp.sigma == pytest.approx(math.sqrt(0.001) * math.log(100.0), rel=1e-14)
    assert fp.L == pytest.approx(fp.sigma * math.log(math.log(100.0)), rel=1e-14)
    with pytest.raises(obeam.Error):
        obeam.frame_params(0.5, 0.5)


def test_free_packet_peak_decays():
    fp = obeam.frame_params(0.01, 0.1)
    p = obeam.make_packet(fp, 1, 0, 3)
    s = fp.sigma
    for t in (0.0, s * s, 4 * s * s):
        centre = 2 * t * np.asarray(p.xi)
        want = (2 * math.pi) ** -0.75 * s**1.5 * (s**4 + t * t) ** -0.75
        assert abs(p.eval(t, centre)) == pytest.approx(want, rel=1e-12)


def test_halfspace_vanishes_on_plane():
    fp = obeam.frame_params(0.02, 0.05)
    p = obeam.make_packet(fp, 1, 2, -6)
    c = [0.0, 0.0, 2 * fp.sigma]
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = [*rng.uniform(-0.2, 0.2, 2), 0.0]
        assert abs(p.halfspace_eval(c, 0.01, x)) <= 1e-14


def test_reflection_and_beam():
    fp = obeam.frame_params(0.01, 0.1)
    body = obeam.make_sphere([0.0, 0.0, 1.3], 1.0)
    p = obeam.make_packet(fp, 2, -1, 12)
    ev = obeam.classify(body, [0.0, 0.0, 0.0], p.xi, 0.05, 0.05)
    assert ev.cls == "Entering"
    beam = obeam.build_reflected(p, ev)
    u = p.eval(ev.t_c, ev.x_c)
    v = beam.eval(ev.t_c, ev.x_c)
    assert abs(u - v) <= 1e-10 * abs(u)
    eig = np.asarray(beam.eigvals_B)
    assert abs(eig[0]) <= 1e-10 * abs(eig[2])
    assert np.linalg.norm(np.asarray(obeam.reflect([1.0, 2.0, 3.0], [0.0, 0.0, 1.0])) - [1, 2, -3]) == 0


def test_halfspace_gap_limits():
    diff, free = obeam.halfspace_free_gap(1.0, 0.0)
    assert diff == pytest.approx(free, rel=1e-10)
    gaps = [obeam.halfspace_free_gap(1.0, d)[0] for d in (0.0, 1.0, 2.0, 4.0, 8.0)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_doctor():
    report = obeam.doctor()
    assert report["pass"]
    assert {c["name"] for c in report["checks"]} >= {"reflection_law", "cn_mass_conservation", "mask_margin_enforced"}


def test_green_scenario(tmp_path):
    report = obeam.run_scenario(str(CONFIGS / "s5_green_ladder.ini"), str(tmp_path))
    assert report["scenario"] == "s5"
    names = {c["name"]: c["pass"] for c in report["checks"]}
    assert names["sandwich_nonnegative"] and names["sandwich_below_free"]
    assert (tmp_path / "ladder.csv").read_text().startswith("scale,radius,G_obstacle,G_free,difference\n")
