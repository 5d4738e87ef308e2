import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from sparse_mimo.harness import (
    ConfigError,
    ResultTable,
    config_from_mapping,
    default_config,
    emit,
    load_config,
    read_table,
    run_experiment,
    sweep_values,
)
from sparse_mimo.harness import cli
from sparse_mimo.harness.io import to_csv, to_json


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def small(experiment, **extra):
    base = {"experiment": experiment, "trials": 8, "sweep.num": 3, "users.k": 4}
    base.update(extra)
    return config_from_mapping(base)


class TestConfig:
    def test_minimal_file_gets_defaults(self, tmp_path):
        cfg = load_config(write(tmp_path, "s.toml", 'experiment = "sumrate-near"\n'))
        assert cfg["array.n_ue"] == 8
        assert cfg["users.k"] == 20
        assert cfg["channel.rician_db"] == 20.0
        assert cfg["channel.paths"] == 5
        assert cfg["channel.ring_radius"] == 3.0
        assert cfg["array.wavelength"] == 0.01
        assert cfg.trials == 10_000
        assert cfg["sweep.axis"] == "eta_bs"

    def test_nested_tables_accepted(self, tmp_path):
        cfg = load_config(write(tmp_path, "s.toml", "[array]\nn_bs = 32\n[link]\nrange = 12.5\n"))
        assert cfg["array.n_bs"] == 32 and cfg["link.range"] == 12.5

    def test_negative_wavelength_names_key(self, tmp_path):
        with pytest.raises(ConfigError, match="wavelength"):
            load_config(write(tmp_path, "s.toml", "array.wavelength = -0.01\n"))

    def test_duplicate_key_toml(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, "s.toml", "seed = 1\nseed = 2\n"))

    def test_duplicate_key_json(self, tmp_path):
        with pytest.raises(ConfigError, match="duplicate"):
            load_config(write(tmp_path, "s.json", '{"seed": 1, "seed": 2}'))

    def test_all_errors_reported(self):
        with pytest.raises(ConfigError) as exc:
            config_from_mapping({"array.n_bs": 0, "bogus": 1, "users.law": "normal", "seed": "x"})
        keys = " ".join(exc.value.errors)
        for k in ("array.n_bs", "bogus", "users.law", "seed"):
            assert k in keys
        assert len(exc.value.errors) == 4

    def test_axis_must_fit_experiment(self):
        with pytest.raises(ConfigError, match="sweep.axis"):
            config_from_mapping({"experiment": "edof-sweep", "sweep.axis": "range"})

    def test_sweep_bounds_checked(self):
        with pytest.raises(ConfigError, match="sweep.stop"):
            config_from_mapping({"sweep.start": 5, "sweep.stop": 1})
        with pytest.raises(ConfigError, match="log"):
            config_from_mapping({"sweep.start": 0, "sweep.scale": "log"})

    def test_parse_error(self, tmp_path):
        with pytest.raises(ConfigError, match="parse"):
            load_config(write(tmp_path, "s.toml", "seed = = 3\n"))

    def test_replace(self):
        cfg = default_config().replace(seed=5, **{"link.range": 10.0})
        assert cfg.seed == 5 and cfg["link.range"] == 10.0


class TestSweep:
    def test_explicit_values(self):
        np.testing.assert_array_equal(sweep_values(small("edof-sweep", **{"sweep.values": [3, 1, 2]})), [3, 1, 2])

    def test_log_grid(self):
        g = sweep_values(small("edof-sweep", **{"sweep.start": 1, "sweep.stop": 100, "sweep.num": 3, "sweep.scale": "log"}))
        np.testing.assert_allclose(g, [1, 10, 100])

    def test_axis_defaults(self):
        g = sweep_values(small("sumrate-far", **{"sweep.axis": "phi_max_deg"}))
        assert g[0] == 5.0 and g[-1] == 60.0


class TestExperiments:
    @pytest.mark.parametrize(
        "experiment", ["edof-sweep", "rate-sweep", "fit-lobes", "sumrate-far", "sumrate-near", "cdf"]
    )
    def test_rectangular_and_deterministic(self, experiment):
        cfg = small(experiment)
        a, b = run_experiment(cfg), run_experiment(cfg)
        assert len(a.rows) == 3
        assert all(len(r) == len(a.columns) for r in a.rows)
        assert to_csv(a) == to_csv(b)
        ma = {k: v for k, v in a.metadata.items() if k != "wall_time_s"}
        mb = {k: v for k, v in b.metadata.items() if k != "wall_time_s"}
        assert ma == mb
        assert a.metadata["config"] == cfg.to_dict()
        assert a.metadata["seed"] == cfg.seed
        assert "tool_version" in a.metadata and "wall_time_s" in a.metadata

    def test_edof_sweep_columns(self):
        t = run_experiment(small("edof-sweep"))
        for c in ("eta", "edof_exact", "edof_closed_form", "dominant_count"):
            assert c in t.columns

    def test_seed_changes_monte_carlo(self):
        a = run_experiment(small("sumrate-far", seed=1))
        b = run_experiment(small("sumrate-far", seed=2))
        assert to_csv(a) != to_csv(b)

    def test_reference_edof_curve_rises_then_flattens(self):
        cfg = config_from_mapping({
            "experiment": "edof-sweep", "array.n_bs": 128, "array.n_ue": 16,
            "sweep.values": [1, 20, 40, 60, 80, 100] + list(range(125, 251, 5)),
        })
        t = run_experiment(cfg)
        e = t.column("edof_exact")
        assert e[0] < 1.1
        assert np.all(np.diff(e[:6]) > 0)
        plateau = e[6:]
        assert abs(plateau.mean() - 16) <= 1
        assert plateau.min() >= 14 and plateau.max() <= 17

    def test_low_snr_rate_prefers_compact_array(self):
        cfg = config_from_mapping({
            "experiment": "rate-sweep", "array.n_bs": 128, "array.n_ue": 16, "power.rx_snr_db": -30.0,
            "sweep.start": 1, "sweep.stop": 150, "sweep.num": 30,
        })
        t = run_experiment(cfg)
        assert int(np.argmax(t.column("rate_waterfill"))) == 0

    def test_ue_sparsity_axis_has_no_effect_far(self):
        cfg = small("sumrate-far", **{"sweep.axis": "eta_ue", "sweep.values": [1, 2, 4], "array.eta_bs": 3.0})
        r = run_experiment(cfg).column("sum_rate_mean")
        np.testing.assert_allclose(r, r[0], rtol=1e-12)

    def test_runtime_error_has_context(self, monkeypatch):
        from sparse_mimo.harness import experiments

        def fail(*args, **kwargs):
            raise ValueError("scatterer coincides with an array center")

        monkeypatch.setattr(experiments, "near_user_channels", fail)
        with pytest.raises(RuntimeError, match="sumrate-near failed: scatterer") as exc:
            run_experiment(small("sumrate-near"))
        assert isinstance(exc.value.__cause__, ValueError)


class TestEmit:
    def test_empty_table_is_header_only(self):
        assert to_csv(ResultTable(("a", "b"), [])) == "a,b\n"

    def test_csv_parseable_and_terminated(self):
        body = to_csv(run_experiment(small("edof-sweep")))
        assert body.endswith("\n")
        rows = list(csv.reader(io.StringIO(body)))
        assert len(rows) == 4
        [float(x) for x in rows[1]]

    def test_round_trip_csv_json_csv(self, tmp_path):
        t = run_experiment(small("rate-sweep"))
        emit(t, tmp_path / "a.csv", "csv")
        t1 = read_table(tmp_path / "a.csv")
        emit(t1, tmp_path / "b.json", "json")
        t2 = read_table(tmp_path / "b.json")
        emit(t2, tmp_path / "c.csv", "csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "c.csv").read_bytes()
        assert t2.rows == t.rows
        assert t1.metadata["config"] == t.metadata["config"]

    def test_json_layout(self):
        t = ResultTable(("x", "y"), [(1.0, 2.5), (0.1, 1e-300)], {"k": 1})
        doc = json.loads(to_json(t))
        assert doc["data"] == {"x": [1.0, 0.1], "y": [2.5, 1e-300]}
        assert doc["metadata"] == {"k": 1}

    def test_seventeen_digit_round_trip(self):
        vals = [math.pi, 1 / 3, 2.0**-1074, 1e308, -0.1]
        body = to_csv(ResultTable(("v",), [(v,) for v in vals]))
        assert [float(x) for x in body.split()[1:]] == vals

    def test_echo_reproduces_table(self, tmp_path):
        cfg = small("sumrate-far", seed=4)
        t = run_experiment(cfg)
        emit(t, tmp_path / "r.json", "json")
        again = run_experiment(load_config(tmp_path / "r.json"))
        assert to_csv(again) == to_csv(t)

    def test_bad_format(self):
        with pytest.raises(ValueError):
            emit(ResultTable(("a",), []), None, "xml")


class TestCli:
    def test_success_writes_file(self, tmp_path):
        cfg = write(tmp_path, "s.toml", "sweep.num = 2\n")
        out = tmp_path / "o.csv"
        assert cli.main(["edof-sweep", "--config", str(cfg), "--out", str(out)]) == 0
        assert out.read_text().startswith("eta,")
        assert (tmp_path / "o.meta.json").exists()

    def test_seed_override_and_json(self, tmp_path):
        cfg = write(tmp_path, "s.toml", "trials = 4\nsweep.num = 2\nusers.k = 3\n")
        out = tmp_path / "o.json"
        assert cli.main(["sumrate-far", "--config", str(cfg), "--seed", "9", "--out", str(out), "--format", "json"]) == 0
        assert json.loads(out.read_text())["metadata"]["seed"] == 9

    def test_validation_error_exit_2(self, tmp_path, capsys):
        cfg = write(tmp_path, "s.toml", "array.wavelength = -1\n")
        assert cli.main(["edof-sweep", "--config", str(cfg)]) == 2
        assert "wavelength" in capsys.readouterr().err

    def test_experiment_mismatch_exit_2(self, tmp_path):
        cfg = write(tmp_path, "s.toml", 'experiment = "cdf"\n')
        assert cli.main(["edof-sweep", "--config", str(cfg)]) == 2

    def test_missing_file_exit_2(self, tmp_path):
        assert cli.main(["edof-sweep", "--config", str(tmp_path / "nope.toml")]) == 2

    def test_runtime_error_exit_1(self, tmp_path, monkeypatch):
        def boom(cfg):
            raise RuntimeError("edof-sweep failed: boom")

        monkeypatch.setattr(cli, "run_experiment", boom)
        assert cli.main(["edof-sweep"]) == 1

    def test_bad_arguments_exit_2(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["no-such-experiment"])
        assert exc.value.code == 2

    def test_check(self, tmp_path, capsys):
        cfg = write(tmp_path, "s.toml", 'experiment = "cdf"\n')
        assert cli.main(["check", "--config", str(cfg)]) == 0
        assert json.loads(capsys.readouterr().out)["experiment"] == "cdf"

    def test_module_entry_point(self, tmp_path):
        cfg = write(tmp_path, "s.toml", "sweep.num = 2\n")
        res = subprocess.run(
            [sys.executable, "-m", "sparse_mimo", "fit-lobes", "--config", str(cfg)], capture_output=True, text=True
        )
        assert res.returncode == 0 and res.stdout.startswith("eta,alpha")
