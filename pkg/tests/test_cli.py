import json

import numpy as np
import pytest

from mpc_topo.cli import _thresholds, CliError, dumps, main, stage_seed
from mpc_topo.synth import GridSpec, PointReflector, SceneSpec, WallSpec, scene_to_dict

RX1 = (10.3329, 4.3406, 9.8698)


def small_scene(seed=0):
    grid = GridSpec(delay_min=30.0, delay_max=70.0, delay_step=0.5, angle_min=80.0, angle_max=220.0, angle_step=1.0)
    refl = [PointReflector(40.0, 120.0, -90.0, 0.8, 4.0, shape="diamond"),
            PointReflector(60.0, 190.0, -98.0, 0.8, 4.0, shape="diamond")]
    wall = WallSpec(*RX1, x_span=(8.0, 1.0), peak_db=-96.0, decay_db_per_m=1.5, ridge_sigma=(0.4, 2.0))
    return SceneSpec(tx=(0.0, 0.0), rx=(RX1[0], 0.0), point_reflectors=refl, wall=wall, grid=grid, seed=seed)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "scene.json").write_text(json.dumps(scene_to_dict(small_scene())))
    assert main(["generate", "--scene", str(d / "scene.json"), "--out", str(d / "pdap.json")]) == 0
    assert main(["cluster", "--pdap", str(d / "pdap.json"), "--threshold-db", "-120",
                 "--out", str(d / "result.json")]) == 0
    return d


class TestHelpers:
    def test_dumps_canonical(self):
        text = dumps({"b": np.float64(1.5), "a": [np.int64(2), float("nan")], "c": np.array([True])})
        assert text == '{\n "a": [\n  2,\n  null\n ],\n "b": 1.5,\n "c": [\n  true\n ]\n}\n'

    def test_stage_seed(self):
        assert stage_seed(0, "ransac") == stage_seed(0, "ransac")
        assert stage_seed(0, "ransac") != stage_seed(0, "baseline")
        assert stage_seed(0, "ransac") != stage_seed(1, "ransac")

    @pytest.mark.parametrize("spec, expected", [
        ("-125..-115:5", [-125.0, -120.0, -115.0]),
        ("-115..-125:5", [-125.0, -120.0, -115.0]),
        ("-120,-110", [-120.0, -110.0]),
        ("-121..-120", [-121.0, -120.0]),
        ("-120..-119:0.25", [-120.0, -119.75, -119.5, -119.25, -119.0]),
    ])
    def test_thresholds(self, spec, expected):
        assert _thresholds(spec, 1.0) == expected

    @pytest.mark.parametrize("spec", ["a..b", "-120..-110:0", "x"])
    def test_bad_thresholds(self, spec):
        with pytest.raises(CliError) as e:
            _thresholds(spec, 1.0)
        assert e.value.code == 1


class TestGenerate:
    def test_demo_default(self, tmp_path, capsys):
        code, out, _ = run(capsys, "generate", "--seed", 3, "--stdout")
        assert code == 0
        d = json.loads(out)
        assert len(d["sources"]) == 5 and d["meta"]["seed"] == 3

    def test_scene_file(self, workdir):
        d = json.loads((workdir / "pdap.json").read_text())
        assert d["sources"] == ["reflector0", "reflector1", "wall"]
        assert json.loads((workdir / "pdap.config.json").read_text())["command"] == "generate"

    def test_seed_override(self, workdir, capsys):
        _, a, _ = run(capsys, "generate", "--scene", workdir / "scene.json", "--seed", 1, "--seed-override", "--stdout")
        _, b, _ = run(capsys, "generate", "--scene", workdir / "scene.json", "--seed", 1, "--stdout")
        assert json.loads(a)["meta"]["seed"] == stage_seed(1, "synth")
        assert json.loads(b)["meta"]["seed"] == 0

    def test_missing_scene(self, tmp_path, capsys):
        code, out, err = run(capsys, "generate", "--scene", tmp_path / "nope.json", "--stdout")
        assert code == 1
        e = json.loads(out)["error"]
        assert e["exit_code"] == 1 and "not found" in e["message"]
        assert json.loads(err) == json.loads(out)

    def test_invalid_scene(self, tmp_path, capsys):
        (tmp_path / "bad.json").write_text(json.dumps({"noise_sigma_db": -1}))
        code, _, err = run(capsys, "generate", "--scene", tmp_path / "bad.json", "--out", tmp_path / "x.json")
        assert code == 1 and "invalid scene" in json.loads(err)["error"]["message"]


class TestCluster:
    def test_result_shape(self, workdir):
        d = json.loads((workdir / "result.json").read_text())
        assert len(d["clusters"]) == 3
        assert d["provenance"]["threshold_db"] == -120.0
        assert d["provenance"]["algorithm"] == "proposed"

    @pytest.mark.parametrize("algo", ["kmeans", "kmeans-power", "dbscan"])
    def test_baselines(self, workdir, capsys, algo):
        code, out, _ = run(capsys, "baseline", "--pdap", workdir / "pdap.json", "--threshold-db", -120,
                           "--algorithm", algo, "--stdout")
        assert code == 0
        assert len(json.loads(out)["clusters"]) >= 1

    def test_baseline_rejects_proposed(self, workdir, capsys):
        code, _, _ = run(capsys, "baseline", "--pdap", workdir / "pdap.json", "--threshold-db", -120,
                         "--algorithm", "proposed", "--out", workdir / "x.json")
        assert code == 1

    def test_missing_threshold(self, workdir, capsys):
        code, out, _ = run(capsys, "cluster", "--pdap", workdir / "pdap.json", "--stdout")
        assert code == 1
        assert "threshold-db" in json.loads(out)["error"]["message"]

    def test_bad_option_value(self, workdir, capsys):
        code, _, _ = run(capsys, "baseline", "--pdap", workdir / "pdap.json", "--threshold-db", -120,
                         "--algorithm", "dbscan", "--min-pts", 0, "--out", workdir / "x.json")
        assert code == 1

    def test_nothing_above_threshold(self, workdir, capsys):
        code, out, _ = run(capsys, "cluster", "--pdap", workdir / "pdap.json", "--threshold-db", -10, "--stdout")
        assert code == 2
        assert json.loads(out)["error"]["exit_code"] == 2

    def test_bad_json(self, tmp_path, capsys):
        (tmp_path / "p.json").write_text("{not json")
        code, _, err = run(capsys, "cluster", "--pdap", tmp_path / "p.json", "--threshold-db", -120,
                           "--out", tmp_path / "r.json")
        assert code == 1 and "invalid JSON" in json.loads(err)["error"]["message"]

    def test_csv_input(self, workdir, tmp_path, capsys):
        from mpc_topo.pdap import pdap_from_dict, save_pdap

        p = pdap_from_dict(json.loads((workdir / "pdap.json").read_text()))
        save_pdap(p, tmp_path / "p.csv")
        code, out, _ = run(capsys, "cluster", "--pdap", tmp_path / "p.csv", "--threshold-db", -120, "--stdout")
        assert code == 0
        assert out == (workdir / "result.json").read_text()

    def test_needs_output(self, workdir, capsys):
        code, _, _ = run(capsys, "cluster", "--pdap", workdir / "pdap.json", "--threshold-db", -120)
        assert code == 1


class TestConfigFile:
    def test_round_trip(self, workdir, tmp_path, capsys):
        cfg = json.loads((workdir / "result.config.json").read_text())
        assert cfg["threshold_db"] == -120.0 and cfg["algorithm"] == "proposed"
        cfg["out"] = str(tmp_path / "again.json")
        (tmp_path / "cfg.json").write_text(json.dumps(cfg))
        assert main(["cluster", "--config", str(tmp_path / "cfg.json")]) == 0
        assert (tmp_path / "again.json").read_text() == (workdir / "result.json").read_text()

    def test_flags_override(self, workdir, tmp_path, capsys):
        (tmp_path / "cfg.json").write_text(json.dumps({"threshold_db": -10.0, "pdap": str(workdir / "pdap.json")}))
        code, out, _ = run(capsys, "cluster", "--config", tmp_path / "cfg.json", "--threshold-db", -120, "--stdout")
        assert code == 0 and out == (workdir / "result.json").read_text()

    def test_unknown_key(self, tmp_path, capsys):
        (tmp_path / "cfg.json").write_text(json.dumps({"colour": "red"}))
        code, _, err = run(capsys, "metrics", "--config", tmp_path / "cfg.json", "--out", tmp_path / "m.json")
        assert code == 1 and "unknown config keys" in json.loads(err)["error"]["message"]

    def test_wrong_command(self, tmp_path, capsys):
        (tmp_path / "cfg.json").write_text(json.dumps({"command": "fit"}))
        code, _, _ = run(capsys, "metrics", "--config", tmp_path / "cfg.json", "--result", "x", "--stdout")
        assert code == 1


class TestDownstream:
    def test_fit(self, workdir, capsys):
        code, out, _ = run(capsys, "fit", "--result", workdir / "result.json", "--scene", workdir / "scene.json",
                           "--iterations", 300, "--stdout")
        assert code == 0
        d = json.loads(out)
        assert d["ransac"]["iterations"] == 300
        assert {c["id"] for c in d["clusters"]} == {1, 2, 3}
        assert all(c["n_cps"] >= 0 for c in d["clusters"])

    def test_fit_bad_config(self, workdir, capsys):
        code, _, _ = run(capsys, "fit", "--result", workdir / "result.json", "--iterations", 0, "--stdout")
        assert code == 1

    def test_fit_point_models(self, workdir, capsys):
        code, out, _ = run(capsys, "fit", "--result", workdir / "result.json", "--model", "point", "--stdout")
        assert code == 0
        assert all(c["model"] == "point" for c in json.loads(out)["clusters"])

    def test_metrics(self, workdir, capsys):
        code, out, _ = run(capsys, "metrics", "--result", workdir / "result.json", "--stdout")
        assert code == 0
        d = json.loads(out)
        assert -1.0 <= d["mean_si"] <= 1.0

    def test_sweep(self, workdir, tmp_path, capsys):
        code, out, _ = run(capsys, "sweep", "--pdap", workdir / "pdap.json", "--thresholds=-122..-120",
                           "--algorithms", "proposed,dbscan", "--out", tmp_path / "sweep.json")
        assert code == 0
        assert out.splitlines()[0].split() == ["threshold_db", "proposed", "dbscan"]
        table = json.loads((tmp_path / "sweep.json").read_text())
        assert table["thresholds_db"] == [-122.0, -121.0, -120.0]
        assert len(table["counts"]["proposed"]) == 3

    def test_sweep_unknown_algorithm(self, workdir, capsys):
        code, _, _ = run(capsys, "sweep", "--pdap", workdir / "pdap.json", "--thresholds", "-120",
                         "--algorithms", "spectral", "--stdout")
        assert code == 1

    def test_plots(self, workdir, tmp_path, capsys):
        for flags in (["--pdap", workdir / "pdap.json"], ["--result", workdir / "result.json"]):
            out = tmp_path / "fig.svg"
            assert main(["plot", *map(str, flags), "--out", str(out)]) == 0
            text = out.read_text()
            assert text.startswith("<svg") and text.rstrip().endswith("</svg>")

    def test_plot_needs_input(self, tmp_path, capsys):
        code, _, _ = run(capsys, "plot", "--out", tmp_path / "x.svg")
        assert code == 1


class TestDeterminism:
    def test_repeat_identical(self, workdir, tmp_path):
        assert main(["cluster", "--pdap", str(workdir / "pdap.json"), "--threshold-db", "-120",
                     "--out", str(tmp_path / "r.json")]) == 0
        assert (tmp_path / "r.json").read_bytes() == (workdir / "result.json").read_bytes()

    def test_thread_count_irrelevant(self, workdir, tmp_path, monkeypatch):
        monkeypatch.setenv("MPC_TOPO_THREADS", "1")
        assert main(["fit", "--result", str(workdir / "result.json"), "--iterations", "300",
                     "--out", str(tmp_path / "f1.json")]) == 0
        monkeypatch.setenv("MPC_TOPO_THREADS", "4")
        assert main(["fit", "--result", str(workdir / "result.json"), "--iterations", "300",
                     "--out", str(tmp_path / "f4.json")]) == 0
        assert (tmp_path / "f1.json").read_bytes() == (tmp_path / "f4.json").read_bytes()

    def test_version(self, capsys):
        with pytest.raises(SystemExit):
            main(["--version"])
        assert "0.1.0" in capsys.readouterr().out
