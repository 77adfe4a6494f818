"""Command-line behavior: artifacts, exit codes, reruns."""

import json

import pytest

from conftest import make_areas, random_dataset
from logsae.cli import main
from logsae.dataio import save_dataset, sha256_file


@pytest.fixture
def dataset(tmp_path, gen):
    z, w, psi, sigma = random_dataset(gen, m=12, p=1, with_sigma=True)
    path = tmp_path / "areas.csv"
    save_dataset(make_areas(z, w, psi, sigma), path)
    return path


def test_fit_writes_params_and_manifest(dataset, tmp_path):
    out = tmp_path / "fit_out"
    assert main(["fit", str(dataset), "--out", str(out)]) == 0
    payload = json.loads((out / "fit.json").read_text())
    assert set(payload) == {
        "beta",
        "sigma2_nu",
        "gammas",
        "area_ids",
        "iterations_used",
        "converged",
        "sigma2_truncated",
    }
    assert len(payload["gammas"]) == 12
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["input_sha256"] == sha256_file(dataset)
    assert manifest["version"]


def test_predict_reuses_saved_params(dataset, tmp_path):
    fit_out = tmp_path / "f"
    main(["fit", str(dataset), "--out", str(fit_out)])
    internal = tmp_path / "internal"
    reused = tmp_path / "reused"
    assert main(["predict", str(dataset), "--out", str(internal)]) == 0
    assert (
        main(
            [
                "predict",
                str(dataset),
                "--params",
                str(fit_out / "fit.json"),
                "--out",
                str(reused),
            ]
        )
        == 0
    )
    a = (internal / "predictions.csv").read_bytes()
    b = (reused / "predictions.csv").read_bytes()
    assert a == b
    assert a.splitlines()[0] == b"area_id,prediction,m1,gamma"


def test_mspe_bootstrap_rerun_is_byte_identical(dataset, tmp_path):
    outs = []
    for name in ("m1", "m2"):
        out = tmp_path / name
        code = main(
            [
                "mspe",
                str(dataset),
                "--method",
                "bootstrap",
                "--b",
                "25",
                "--seed",
                "7",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        outs.append((out / "mspe.csv").read_bytes())
    assert outs[0] == outs[1]
    other = tmp_path / "m3"
    main(
        [
            "mspe",
            str(dataset),
            "--method",
            "bootstrap",
            "--b",
            "25",
            "--seed",
            "8",
            "--out",
            str(other),
        ]
    )
    assert (other / "mspe.csv").read_bytes() != outs[0]


def test_mspe_jackknife_writes_rows(dataset, tmp_path):
    out = tmp_path / "jk"
    assert main(["mspe", str(dataset), "--method", "jackknife", "--out", str(out)]) == 0
    lines = (out / "mspe.csv").read_text().splitlines()
    assert lines[0] == "area_id,m1_j,m2_j,mspe,loo_nonconverged"
    assert len(lines) == 13


def test_simulate_emse_outputs(tmp_path):
    out = tmp_path / "sim"
    code = main(
        [
            "simulate",
            "--study",
            "emse",
            "--m",
            "8",
            "--k",
            "50",
            "--r",
            "3",
            "--seed",
            "11",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["study"] == "emse"
    assert report["r_completed"] == 3
    assert "wall_clock" not in (out / "report.json").read_text()
    assert (out / "emse_per_area.csv").exists()
    assert (out / "manifest.json").exists()


def test_simulate_rerun_identical_across_workers(tmp_path, monkeypatch):
    blobs = []
    for name, workers in (("w1", "1"), ("w2", "2")):
        out = tmp_path / name
        monkeypatch.setenv("LOGSAE_WORKERS", workers)
        main(
            [
                "simulate",
                "--study",
                "mspe",
                "--m",
                "6",
                "--k",
                "50",
                "--r",
                "3",
                "--b",
                "6",
                "--seed",
                "4",
                "--out",
                str(out),
            ]
        )
        blobs.append(
            (
                (out / "report.json").read_bytes(),
                (out / "mspe_per_area.csv").read_bytes(),
            )
        )
    assert blobs[0] == blobs[1]


def test_simulate_misspec_zero_row(tmp_path):
    out = tmp_path / "mis"
    code = main(
        [
            "simulate",
            "--study",
            "misspec",
            "--m",
            "8",
            "--k-values",
            "0",
            "--r",
            "3",
            "--d-true",
            "2",
            "--d-mis",
            "4",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["tables"]["sensitivity"][0]["mean_abs_diff_x100"] == 0.0


def test_usage_error_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["mspe", "x.csv", "--method", "sideways"])
    assert exc.value.code == 2


def test_bad_config_value_exits_two(tmp_path, capsys):
    code = main(
        ["simulate", "--study", "emse", "--k", "150", "--out", str(tmp_path)]
    )
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ValueError"


def test_missing_file_exits_three(tmp_path, capsys):
    code = main(["fit", str(tmp_path / "nope.csv"), "--out", str(tmp_path)])
    assert code == 3
    err = json.loads(capsys.readouterr().err)
    assert "error" in err and "message" in err


def test_bad_schema_exits_three(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("area_id,z,psi\na,1,1\n")
    assert main(["fit", str(bad), "--out", str(tmp_path)]) == 3
    assert json.loads(capsys.readouterr().err)["error"] == "ParseError"


def test_numerical_error_exits_four(tmp_path, capsys):
    degenerate = tmp_path / "flat.csv"
    degenerate.write_text(
        "area_id,z,w_1,psi,sme_diag_1\na,1,0,1,0\nb,2,0,1,0\nc,3,0,1,0\n"
    )
    assert main(["fit", str(degenerate), "--out", str(tmp_path)]) == 4
    assert json.loads(capsys.readouterr().err)["error"] == "SingularMomentMatrix"


def test_bad_params_file_exits_three(dataset, tmp_path, capsys):
    params = tmp_path / "fit.json"
    params.write_text("{not json")
    code = main(
        ["predict", str(dataset), "--params", str(params), "--out", str(tmp_path)]
    )
    assert code == 3
    assert json.loads(capsys.readouterr().err)["error"] == "ParseError"
