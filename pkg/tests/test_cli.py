import json

import pytest

from billiard_security.cli import RunConfig, build_parser, main
from billiard_security.core.config import settings
from billiard_security.schemas.table import TableDocument
from billiard_security.services.curve import Table


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_table_circle(capsys):
    code, out = run(capsys, "table")
    assert code == 0
    data = json.loads(out)
    assert data["report"]["valid"]
    assert data["report"]["min_curvature"] == pytest.approx(1.0)
    assert data["table"]["fourier_x"][:3] == [0.0, 1.0, 0.0]


def test_table_ellipse(capsys):
    code, out = run(capsys, "table", "--preset", "ellipse", "--a", "2", "--b", "1")
    assert code == 0
    assert json.loads(out)["report"]["min_curvature"] == pytest.approx(0.25, rel=1e-6)


def test_table_svg(capsys):
    code, out = run(capsys, "table", "--format", "svg")
    assert code == 0
    assert out.count('class="table"') == 1


def test_invalid_table_file_exits_with_one(capsys, tmp_path):
    document = TableDocument.from_table(Table([0.0, 1.0, 0.0, 0.9, 0.0], [0.0, 0.0, 1.0]))
    source = tmp_path / "dent.json"
    source.write_text(document.model_dump_json())
    code, out = run(capsys, "table", "--file", str(source))
    assert code == 1
    data = json.loads(out)
    assert not data["report"]["valid"]
    assert data["report"]["failures"][0]["invariant"] == "curvature"


def test_trace(capsys):
    code, out = run(capsys, "trace", "--point", "0", "0", "--angle", "0", "--bounces", "2")
    assert code == 0
    data = json.loads(out)
    assert data["bounces"][0]["point"] == pytest.approx([1.0, 0.0], abs=1e-12)
    assert data["length"] == pytest.approx(3.0)


def test_path_is_deterministic(capsys):
    argv = ("path", "--preset", "circle", "--noise", "0.01", "--x", "0.2", "0.1", "--y", "-0.3", "0.2",
            "--m", "2", "--starts", "6", "--seed", "3")
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first[0] == 0
    assert first == second
    assert all(cert["certified"] for cert in json.loads(first[1])["certificates"])


def test_shooting_between_conjugate_points_fails(capsys):
    code, _ = run(capsys, "path", "--x", "0", "0", "--y", "0", "0", "--m", "1", "--method", "shooting",
                  "--theta0", "0")
    assert code == 2


def test_conjugate_center_to_center(capsys):
    code, out = run(capsys, "conjugate", "--x", "0", "0", "--y", "0", "0", "--vertices", "0.0", "--chain")
    assert code == 0
    data = json.loads(out)
    assert data["is_conjugate"]
    assert abs(data["margin"]) < 1e-12
    assert len(data["chain"]) == 1


def test_witness_verify_plot(capsys, tmp_path):
    bundle = tmp_path / "bundle.json"
    code, _ = run(capsys, "witness", "--x", "0.2", "0.1", "--y", "-0.3", "0.2", "--n", "1", "-o", str(bundle))
    assert code == 0
    assert json.loads(bundle.read_text())["complete"]

    code, out = run(capsys, "verify", str(bundle))
    assert code == 0
    assert json.loads(out)["passed"]

    figure = tmp_path / "bundle.svg"
    code, _ = run(capsys, "plot", str(bundle), "-o", str(figure))
    assert code == 0
    assert figure.read_text().count('class="billiard-path"') == 1


def test_verify_rejects_tampered_bundle(capsys, tmp_path):
    bundle = tmp_path / "bundle.json"
    run(capsys, "witness", "--x", "0.2", "0.1", "--y", "-0.3", "0.2", "--n", "1", "-o", str(bundle))
    data = json.loads(bundle.read_text())
    data["n"] = 2
    bundle.write_text(json.dumps(data))
    code, out = run(capsys, "verify", str(bundle))
    assert code == 1
    assert not json.loads(out)["path_count_ok"]


def test_negative_tolerance_is_rejected(capsys):
    code, _ = run(capsys, "table", "--gp-tol", "-1")
    assert code == 1


def test_missing_file_exits_with_one(capsys, tmp_path):
    code, _ = run(capsys, "verify", str(tmp_path / "absent.json"))
    assert code == 1


def test_overrides_are_absolute():
    args = build_parser().parse_args(["table", "--gp-tol", "3e-4"])
    config = RunConfig.from_args(args)
    settings.TOLERANCE_PROFILE = "strict"
    config.apply()
    assert settings.gp_tolerance == 3e-4
    assert config.options["preset"] == "circle"


@pytest.mark.slow
def test_noisy_witness_round_trip(capsys, tmp_path):
    bundle = tmp_path / "noisy.json"
    code, _ = run(capsys, "witness", "--noise", "0.01", "--seed", "7", "--n", "3",
                  "--x", "-0.3", "0.1", "--y", "0.4", "-0.2", "-o", str(bundle))
    assert code == 0
    data = json.loads(bundle.read_text())
    assert data["complete"]
    assert len(data["paths"]) == 3

    code, out = run(capsys, "verify", str(bundle))
    assert code == 0
    assert json.loads(out)["passed"]
