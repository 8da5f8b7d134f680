import json

import pandas as pd
import pytest

from core.spec_store import SpecStore
from main import EXIT_ERROR, EXIT_OK, EXIT_VIOLATIONS, build_parser, main


def run(tmp_path, *argv):
    return main(["--out", str(tmp_path), *argv])


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_list_maps(tmp_path, capsys):
    assert run(tmp_path, "list-maps") == EXIT_OK
    out = capsys.readouterr().out
    assert "koebe: h=0.50" in out
    assert "identity: h=+inf" in out
    frame = pd.read_csv(tmp_path / "list-maps.csv")
    assert set(frame["label"]) == {"identity", "koebe", "half_plane", "sector", "strip", "exp_poisson"}


@pytest.mark.parametrize(
    "argv, expected",
    [
        (["--bergman", "5", "2", "2", "0"], "false"),
        (["--bergman", "2", "0", "1", "0"], "true"),
        (["--hardy", "2", "1"], "true"),
        (["--hardy-bergman", "1", "3", "0"], "false"),
    ],
)
def test_check_inclusion(tmp_path, capsys, argv, expected):
    assert run(tmp_path, "check-inclusion", *argv) == EXIT_OK
    assert capsys.readouterr().out.strip() == expected


def test_consistency_violation_exit_code(tmp_path, capsys):
    assert run(tmp_path, "consistency", "--h", "1.0", "--b", "0.5") == EXIT_VIOLATIONS
    assert "violation: h = 1 exceeds b = 0.5" in capsys.readouterr().out
    assert run(tmp_path, "consistency", "--h", "0.5", "--b", "1.0", "--b-alpha", "0=1.5") == EXIT_OK


def test_bad_b_alpha_is_an_error(tmp_path, capsys):
    assert run(tmp_path, "consistency", "--b-alpha", "0") == EXIT_ERROR
    assert "alpha=value" in capsys.readouterr().err


def test_bloch_check_on_the_punctured_slit(tmp_path, capsys, domains_dir):
    assert run(tmp_path, "bloch-check", "--spec", str(domains_dir / "grid_slit.dom")) == EXIT_OK
    assert "Bloch: true; b=+inf" in capsys.readouterr().out
    assert run(tmp_path, "bloch-check", "--spec", str(domains_dir / "slitplane.dom")) == EXIT_OK
    assert "Bloch: false" in capsys.readouterr().out


def test_class_d_scan(tmp_path, capsys, domains_dir):
    assert run(tmp_path, "class-d", "--spec", str(domains_dir / "wedge_two_disks.dom")) == EXIT_OK
    assert "class D: true; R=8.0000" in capsys.readouterr().out


def test_classify_map(tmp_path, capsys):
    assert run(tmp_path, "classify-map", "--map", "koebe", "--p", "0.25", "1") == EXIT_OK
    out = capsys.readouterr().out
    assert "koebe p=0.25: Convergent" in out
    assert "koebe p=1: Divergent" in out
    frame = pd.read_csv(tmp_path / "classify-map.csv")
    assert list(frame["verdict"]) == ["Convergent", "Divergent"]


def test_malformed_spec_names_the_obstacle(tmp_path, capsys):
    path = tmp_path / "bad.dom"
    path.write_text(json.dumps({"obstacles": [{"kind": "segment", "a": [1, 1], "b": [1, 1]}]}))
    assert run(tmp_path, "bloch-check", "--spec", str(path)) == EXIT_ERROR
    assert "obstacle #0" in capsys.readouterr().err


def test_missing_spec_file(tmp_path, capsys):
    assert run(tmp_path, "bloch-check", "--spec", str(tmp_path / "nowhere.dom")) == EXIT_ERROR
    assert capsys.readouterr().err.startswith("error:")


def test_green_profile_is_reproducible(tmp_path, domains_dir):
    spec_path = domains_dir / "slitplane.dom"
    argv = ["--samples", "200", "--seed", "5", "estimate-green-profile", "--spec", str(spec_path),
            "--grid", "2,4,8,16", "--p", "0.25"]
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["--out", str(first), *argv]) == EXIT_OK
    assert main(["--out", str(second), *argv]) == EXIT_OK
    name = "estimate-green-profile.csv"
    assert (first / name).read_bytes() == (second / name).read_bytes()
    assert (first / "estimate-green-profile-trend.csv").exists()

    manifest = json.loads((first / "manifest.json").read_text())
    assert set(manifest) == {"command", "argv", "spec_hash", "cfg", "versions", "wall_time"}
    assert manifest["command"] == "estimate-green-profile"
    assert manifest["spec_hash"] == SpecStore.spec_hash(SpecStore.load(spec_path))
    assert manifest["cfg"]["walk"]["n_samples"] == 200
    assert manifest["cfg"]["walk"]["seed"] == 5
    assert "numpy" in manifest["versions"]


def test_sample_override_is_validated(tmp_path, capsys, domains_dir):
    spec = str(domains_dir / "slitplane.dom")
    assert run(tmp_path, "--samples", "0", "bloch-check", "--spec", spec) == EXIT_ERROR
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "n_samples" in err


def test_estimate_hardy_on_the_wedge_with_disks(tmp_path, capsys, domains_dir):
    spec = str(domains_dir / "wedge_two_disks.dom")
    code = run(tmp_path, "--samples", "4000", "estimate-hardy", "--spec", spec, "--method", "eks",
               "--grid", "2,2.83,4,5.66,8,11.3")
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "h (EKS):" in out
    assert "Bloch: false" in out
    assert (tmp_path / "estimate-hardy.csv").exists()
