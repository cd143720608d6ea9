import json

import numpy as np
import pytest

from ergopt.cli import ExperimentConfig, build_parser, config_from_args, main, run

FIB = {"dim": 2, "matrices": [[[1, 1], [0, 1]], [[1, 0], [1, 1]]]}
DIAG = {"dim": 2,
        "matrices": [[[2, 0], [0, 0.5]], [[3, 0], [0, 0.3333333333333333]]]}


@pytest.fixture
def fib_path(tmp_path):
    path = tmp_path / "fib.json"
    path.write_text(json.dumps(FIB))
    return str(path)


@pytest.fixture
def diag_path(tmp_path):
    path = tmp_path / "diag.json"
    path.write_text(json.dumps(DIAG))
    return str(path)


def run_cmd(tmp_path, name, **kw):
    out = tmp_path / f"{name}-{len(list(tmp_path.iterdir()))}.json"
    config = ExperimentConfig(command=name, out=str(out), **kw)
    status = run(config)
    doc = json.loads(out.read_text()) if out.exists() else None
    return status, doc


class TestCommands:
    def test_jsr(self, tmp_path, fib_path):
        status, doc = run_cmd(tmp_path, "jsr", cocycle=fib_path, depth=10)
        assert status == 0
        phi = (1 + 5 ** 0.5) / 2
        assert doc["lower"] <= phi + 1e-9
        assert doc["upper"] >= phi - 1e-9
        assert doc["witness"] == "01"

    def test_birkhoff_cos(self, tmp_path):
        status, doc = run_cmd(tmp_path, "birkhoff", observable="cos_angle",
                              max_period=6, depth=10)
        assert status == 0
        assert doc["beta"]["lower"] == 1.0
        assert doc["subaction"] is None

    def test_birkhoff_table(self, tmp_path):
        obs = tmp_path / "obs.json"
        obs.write_text('{"00": 0.0, "01": 1.0, "10": -1.0, "11": 0.25}')
        status, doc = run_cmd(tmp_path, "birkhoff", observable=str(obs),
                              max_period=6, depth=10)
        assert status == 0
        assert doc["subaction"]["defect"] <= 1e-9

    def test_fish(self, tmp_path):
        svg = tmp_path / "fish.svg"
        config = ExperimentConfig(command="fish", max_period=6, depth=10,
                                  out=str(tmp_path / "fish.json"),
                                  svg=str(svg), csv=str(tmp_path / "fish"))
        assert run(config) == 0
        doc = json.loads((tmp_path / "fish.json").read_text())
        assert doc["all_sturmian"] is True
        text = svg.read_text()
        # the hull polyline closes the loop: vertex count + 1 coordinates
        coords = text.split('polyline points="')[1].split('"')[0].split()
        assert len(coords) == len(doc["inner_vertices"]) + 1
        assert (tmp_path / "fish.vertices.csv").exists()

    def test_morse(self, tmp_path, diag_path):
        status, doc = run_cmd(tmp_path, "morse", cocycle=diag_path,
                              depth=10, max_period=5)
        assert status == 0
        assert doc["theta"] == []
        assert doc["domination"]["verdicts"] == ["dominated"]
        assert doc["gap"] <= 0.05
        assert doc["hull_method"] == "weyl-orbit-hull"

    def test_adapt(self, tmp_path, diag_path):
        status, doc = run_cmd(tmp_path, "adapt", cocycle=diag_path, k=2)
        assert status == 0
        assert doc["oba_worst_slack"] >= -1e-8
        assert doc["inclusion"]["pass"] is True
        assert doc["one_step_gaps"]["1"]["positive"] is True

    def test_homoclinic_pass_and_fail(self, tmp_path):
        status, doc = run_cmd(tmp_path, "homoclinic", depth=30)
        assert status == 0 and doc["nonzero_certified"] is True
        status, doc = run_cmd(tmp_path, "homoclinic", depth=1)
        assert status == 2 and doc["nonzero_certified"] is False

    def test_rotation_vector_names(self, tmp_path):
        status, doc = run_cmd(tmp_path, "rotation",
                              observable="cos_angle,sin_angle",
                              max_period=5, depth=8, directions=16)
        assert status == 0
        assert len(doc["outer"]["bounds"]) == 16

    def test_rotation_components_file(self, tmp_path):
        obs = tmp_path / "vec.json"
        obs.write_text(json.dumps({"components": [
            {"0": 1.0, "1": -1.0}, {"0": 0.0, "1": 2.0}]}))
        status, doc = run_cmd(tmp_path, "rotation", observable=str(obs),
                              max_period=4, depth=6, directions=8)
        assert status == 0
        assert len(doc["inner_vertices"]) >= 2

    def test_birkhoff_on_subshift(self, tmp_path):
        system = tmp_path / "sys.json"
        system.write_text('{"alphabet": 2, "forbidden": [[1, 1]]}')
        obs = tmp_path / "obs.json"
        obs.write_text('{"00": 0.0, "01": 1.0, "10": 1.0, "11": 5.0}')
        status, doc = run_cmd(tmp_path, "birkhoff", system=str(system),
                              observable=str(obs), max_period=6, depth=10)
        assert status == 0
        # the 11-cylinder is forbidden, so the best orbit alternates
        assert doc["beta"]["lower"] == pytest.approx(1.0)
        assert doc["beta"]["lower_witness"] == "01"


class TestErrors:
    def test_missing_cocycle(self, tmp_path):
        status, _ = run_cmd(tmp_path, "jsr")
        assert status == 1

    def test_bad_file(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        status, _ = run_cmd(tmp_path, "jsr", cocycle=str(bad))
        assert status == 1

    def test_unknown_observable(self, tmp_path):
        status, _ = run_cmd(tmp_path, "birkhoff", observable="nope")
        assert status == 1

    def test_budget_exits_before_work(self, tmp_path, fib_path, monkeypatch):
        monkeypatch.setenv("ERGOPT_BUDGET", "10")
        status, _ = run_cmd(tmp_path, "jsr", cocycle=fib_path, depth=12)
        assert status == 1


class TestDeterminism:
    def test_fish_byte_identical(self, tmp_path):
        texts = []
        for i in range(2):
            out = tmp_path / f"f{i}.json"
            svg = tmp_path / f"f{i}.svg"
            config = ExperimentConfig(command="fish", max_period=6, depth=10,
                                      out=str(out), svg=str(svg), seed=7)
            assert run(config) == 0
            texts.append(out.read_bytes() + svg.read_bytes())
        assert texts[0] == texts[1]

    def test_adapt_byte_identical(self, tmp_path, fib_path):
        texts = []
        for i in range(2):
            out = tmp_path / f"a{i}.json"
            config = ExperimentConfig(command="adapt", cocycle=fib_path, k=2,
                                      out=str(out), seed=3)
            run(config)
            texts.append(out.read_bytes())
        assert texts[0] == texts[1]


class TestSvg:
    def test_empty_points_valid(self, tmp_path):
        from ergopt.svg import render_svg

        path = tmp_path / "empty.svg"
        text = render_svg([], [], str(path))
        assert text.startswith("<svg")
        assert text.rstrip().endswith("</svg>")
        assert "polyline" not in text  # no hull, axes only

    def test_trace_zero_projection_contract(self):
        from ergopt.svg import project_trace_zero

        pts = np.array([[1.0, 0.0, -1.0], [0.5, 0.25, -0.75]])
        flat = project_trace_zero(pts)
        assert flat.shape == (2, 2)
        # projection is an isometry on the plane
        d3 = np.linalg.norm(pts[0] - pts[1])
        d2 = np.linalg.norm(flat[0] - flat[1])
        assert d2 == pytest.approx(d3)
        with pytest.raises(ValueError):
            project_trace_zero(np.array([[1.0, 1.0, 1.0]]))

    def test_morse_svg_d2(self, tmp_path, diag_path):
        svg = tmp_path / "m.svg"
        config = ExperimentConfig(command="morse", cocycle=diag_path,
                                  depth=8, max_period=4,
                                  out=str(tmp_path / "m.json"), svg=str(svg))
        assert run(config) == 0
        assert svg.read_text().count("<circle") > 0


class TestThetaFlag:
    def test_explicit_theta(self, tmp_path, diag_path):
        status, doc = run_cmd(tmp_path, "morse", cocycle=diag_path,
                              depth=10, max_period=4, theta="1")
        assert status == 0
        assert doc["theta"] == [1]
        assert doc["theta_downgraded"] is False

    def test_empty_theta_on_dominated(self, tmp_path, diag_path):
        status, doc = run_cmd(tmp_path, "morse", cocycle=diag_path,
                              depth=10, max_period=4, theta="")
        assert status == 0
        assert doc["theta"] == []


class TestParser:
    def test_roundtrip(self):
        args = build_parser().parse_args(
            ["jsr", "--cocycle", "x.json", "--depth", "9", "--seed", "4",
             "--deterministic"])
        config = config_from_args(args)
        assert config.command == "jsr"
        assert config.depth == 9
        assert config.seed == 4
        assert config.deterministic

    def test_main_reports_input_error(self, capsys):
        assert main(["jsr"]) == 1
        assert "cocycle" in capsys.readouterr().err
