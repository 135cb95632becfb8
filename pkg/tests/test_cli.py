import json
import math

import pytest

from twotone.cli import main
from twotone.config import bundled_config_path, load_config, parse_config
from twotone.errors import ConfigError
from twotone.sysmodel import validate_system

TWO_PI = 2.0 * math.pi

BUNDLED = (
    "paper_device.json",
    "backaction_sweep.json",
    "squeeze_sweep.json",
    "tomography.json",
    "tomography_cooling.json",
    "driven_response.json",
)


def minimal_document():
    return {
        "system": {
            "mechanics": {"frequency_hz": 14.98e6, "damping_hz": 9.2, "thermal_occupancy": 42.0},
            "cavities": [
                {
                    "frequency_hz": 8.89e9,
                    "linewidth_hz": 1.7e6,
                    "external_coupling_hz": 1.615e6,
                    "vacuum_coupling_hz": 145.0,
                    "thermal_occupancy": 0.0,
                },
                {
                    "frequency_hz": 9.93e9,
                    "linewidth_hz": 2.1e6,
                    "external_coupling_hz": 1.995e6,
                    "vacuum_coupling_hz": 170.0,
                    "thermal_occupancy": 0.0,
                },
            ],
        },
        "drives": [
            {"cavity": 2, "sideband": "lower", "rate_hz": 4866.8, "detuning_hz": 0.0, "phase_rad": 0.0}
        ],
        "scenario": {
            "name": "single_spectrum",
            "noise": {"floor": 20.0, "averages": 100, "seed": 3},
            "params": {"cavity": 2, "points": 301},
        },
    }


class TestConfigParsing:
    def test_bundled_device_loads_and_validates(self):
        cfg, ds, scenario = load_config(bundled_config_path("paper_device.json"))
        assert validate_system(cfg, ds).passed
        assert cfg.mech.omega == pytest.approx(TWO_PI * 14.98e6)
        assert cfg.cavity(1).g0 == pytest.approx(TWO_PI * 145.0)
        assert cfg.cavity(2).kappa == pytest.approx(TWO_PI * 2.1e6)
        assert ds.rate(2, "lower") == pytest.approx(TWO_PI * 4866.8)
        assert scenario.name == "single_spectrum"

    @pytest.mark.parametrize("name", BUNDLED)
    def test_all_bundled_configs_load(self, name):
        cfg, ds, scenario = load_config(bundled_config_path(name))
        assert validate_system(cfg, ds).passed

    def test_missing_field_names_path(self):
        document = minimal_document()
        del document["system"]["mechanics"]["damping_hz"]
        with pytest.raises(ConfigError, match="damping_hz"):
            parse_config(document)

    def test_unknown_key_rejected(self):
        document = minimal_document()
        document["system"]["mechanics"]["quality_factor"] = 1e6
        with pytest.raises(ConfigError, match="quality_factor"):
            parse_config(document)

    def test_unknown_scenario_rejected(self):
        document = minimal_document()
        document["scenario"]["name"] = "frequency_conversion"
        with pytest.raises(ConfigError, match="frequency_conversion"):
            parse_config(document)

    def test_bad_sideband_rejected(self):
        document = minimal_document()
        document["drives"][0]["sideband"] = "middle"
        with pytest.raises(ConfigError, match="sideband"):
            parse_config(document)

    def test_physics_violation_becomes_config_error(self):
        document = minimal_document()
        document["system"]["cavities"][0]["external_coupling_hz"] = 3e6
        with pytest.raises(ConfigError, match="kappa_ext"):
            parse_config(document)

    def test_parse_error_reports_line(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{\n  "system": [,\n}')
        with pytest.raises(ConfigError, match="line 2"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.json")


class TestCli:
    def test_version(self, capsys):
        assert main(["version"]) == 0
        from twotone import __version__

        assert capsys.readouterr().out.strip() == __version__

    def test_validate_bundled(self, capsys):
        path = str(bundled_config_path("paper_device.json"))
        assert main(["validate", "--config", path]) == 0
        assert "configuration valid" in capsys.readouterr().out

    def test_bad_config_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{}")
        assert main(["validate", "--config", str(path)]) == 2
        assert main(["run", "--config", str(path), "--out", str(tmp_path / "out")]) == 2

    def test_run_single_spectrum(self, tmp_path, capsys):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(minimal_document()))
        out = tmp_path / "out"
        assert main(["run", "--config", str(path), "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "complete"
        for artifact in manifest["artifacts"]:
            assert (out / artifact).exists()

    def test_unstable_squeeze_point_exits_three(self, tmp_path):
        document = minimal_document()
        document["scenario"] = {
            "name": "squeeze_sweep",
            "noise": {"floor": 20.0, "averages": 100, "seed": 3},
            "params": {"ratios": [1.5], "measurement_ratio": 0.2, "points": 301},
        }
        path = tmp_path / "unstable.json"
        path.write_text(json.dumps(document))
        out = tmp_path / "out"
        assert main(["run", "--config", str(path), "--out", str(out)]) == 3
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "failed"
        assert "Instability" in manifest["failure"]
        assert "point_00" in manifest["failure_point"]

    def test_scenario_override_mismatch(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(minimal_document()))
        code = main(
            ["run", "--config", str(path), "--out", str(tmp_path / "o"), "--scenario", "tomography"]
        )
        assert code == 2

    def test_seed_override_changes_samples(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(minimal_document()))
        main(["run", "--config", str(path), "--out", str(tmp_path / "a")])
        main(["run", "--config", str(path), "--out", str(tmp_path / "b"), "--seed", "99"])
        a = (tmp_path / "a" / "noisy.csv").read_text()
        b = (tmp_path / "b" / "noisy.csv").read_text()
        assert a != b
        manifest = json.loads((tmp_path / "b" / "manifest.json").read_text())
        assert manifest["seed"] == 99

    def test_rerun_is_byte_identical(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(minimal_document()))
        for sub in ("a", "b"):
            assert main(["run", "--config", str(path), "--out", str(tmp_path / sub)]) == 0
        manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
        for artifact in manifest["artifacts"]:
            first = (tmp_path / "a" / artifact).read_bytes()
            second = (tmp_path / "b" / artifact).read_bytes()
            assert first == second, artifact


class TestScenarioRequirements:
    def test_backaction_needs_cooling_drive(self, tmp_path):
        document = minimal_document()
        document["drives"] = []
        document["scenario"] = {
            "name": "backaction_sweep",
            "noise": {"floor": 20.0, "averages": 100, "seed": 3},
            "params": {"ratios": [0.5], "pair_detuning_hz": 5e4, "points": 301},
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(document))
        assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2

    def test_tomography_rejects_measurement_drives_in_config(self, tmp_path):
        document = minimal_document()
        document["drives"].append(
            {"cavity": 1, "sideband": "lower", "rate_hz": 100.0, "detuning_hz": 0.0, "phase_rad": 0.0}
        )
        document["scenario"] = {
            "name": "tomography",
            "noise": {"floor": 20.0, "averages": 100, "seed": 3},
            "params": {"n_phases": 5, "measurement_ratio": 0.3, "points": 301},
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(document))
        assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
