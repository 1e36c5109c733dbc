import json

import numpy as np
import pytest

from d3sr.config import load_config, parse_config
from d3sr.errors import ConfigError
from d3sr.geometry import RadarConfig
from d3sr.scene import nonsidelook_scene, sidelook_scene
from conftest import CONFIGS, ROOT

MINIMAL = """
[radar]
[scene]
[scene.target]
azimuth_deg = 15.0
normalized_doppler = 0.3
[run]
methods = ["none"]
"""


def test_bundled_configs_match_the_presets():
    side = load_config(CONFIGS / "sidelook.cfg")
    assert side.radar == RadarConfig() and side.scene == sidelook_scene()
    crab = load_config(CONFIGS / "nonsidelook.cfg")
    assert crab.radar.crab_angle == pytest.approx(np.deg2rad(45.0))
    assert crab.scene == nonsidelook_scene()
    assert side.methods == ("d3sr-focuss", "d3ls", "lsmi", "none")


def test_minimal_config_uses_defaults():
    exp = parse_config(MINIMAL)
    assert exp.radar == RadarConfig() and exp.rho == (6, 6) and exp.seed == 0 and exp.threads == 1
    np.testing.assert_allclose(exp.metrics.doppler_axis(), -0.5 + (np.arange(15) + 0.5) / 15)
    assert exp.scene.target.range_cell == 14


@pytest.mark.parametrize(
    "edit, needle",
    [
        (lambda t: t + "\n[bogus]\n", "unknown section"),
        (lambda t: t.replace("[radar]", "[radar]\nvelocty = 3.0"), "unknown key"),
        (lambda t: t.replace("[radar]\n", ""), "missing section"),
        (lambda t: t.replace("[radar]", '[radar]\nvelocity = "fast"'), "expected float"),
        (lambda t: t.replace("[radar]", "[radar]\nnum_channels = 12.0"), "expected int"),
        (lambda t: t.replace("[radar]", "[radar]\nnum_channels = true"), "expected int"),
        (lambda t: t.replace('["none"]', '["d3sr"]'), "unknown method"),
        (lambda t: t.replace('["none"]', "[]"), "at least one"),
        (lambda t: t.replace("[scene.target]\nazimuth_deg = 15.0\nnormalized_doppler = 0.3\n", ""), "scene.target"),
        (lambda t: t.replace("normalized_doppler = 0.3", ""), "required"),
        (lambda t: t.replace("[scene]", "[scene]\nsector_deg = [1.0]"), "expected 2 entries"),
        (lambda t: t.replace("[radar]", "[radar]\nvelocity = -1.0"), "radar"),
        (lambda t: t + "[grid]\nrho_s = 0\n", "grid"),
        (lambda t: t + "[metrics]\ntrials = 0\n", "metrics"),
        (lambda t: t + "[metrics]\ndopplers = [0.2, 0.1]\n", "increasing"),
        (lambda t: t.replace("[run]", "[run]\nthreads = 0"), "threads"),
        (lambda t: t + "[stap]\nsoi_extent = [2, 3]\n", "stap"),
        (lambda t: t + "[solver]\nfocus = {}\n", "solver"),
        (lambda t: t + "[solver.focuss]\np = 1.5\n", "solver.focuss"),
        (lambda t: "radar = 3\n" + t.replace("[radar]\n", ""), "expected a table"),
        (lambda t: t + "[[scene.interferers]]\nangle_deg = 10.0\n", "required"),
        (lambda t: t + "oops", "<config>"),
    ],
)
def test_malformed_configs_raise(edit, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config(edit(MINIMAL))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")


def test_manifest_replay_and_digest(tmp_path):
    text = (CONFIGS / "sidelook.cfg").read_text()
    (tmp_path / "manifest.json").write_text(json.dumps({"config_text": text}))
    a, b = load_config(CONFIGS / "sidelook.cfg"), load_config(tmp_path / "manifest.json")
    assert a == b and a.digest() == b.digest() and len(a.digest()) == 64
    (tmp_path / "bad.json").write_text("{}")
    with pytest.raises(ConfigError, match="manifest"):
        load_config(tmp_path / "bad.json")


def test_small_fixture_parses():
    exp = load_config(ROOT / "tests" / "fixtures" / "small.cfg")
    assert exp.radar.nm == 36 and exp.scene.num_range_cells == 24 and len(exp.scene.interferers) == 2
