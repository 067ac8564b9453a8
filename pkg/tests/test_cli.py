import json

from click.testing import CliRunner

from flatspot.cli import main

SMALL_ARGS = ["--l", "3", "--u", "0.05", "--precision-bits", "192",
              "--n-max", "5", "--cf-depth", "9"]


def invoke(*args):
    return CliRunner().invoke(main, list(args))


def test_tune_command():
    result = invoke("tune", *SMALL_ARGS)
    assert result.exit_code == 0, result.output
    assert "omega = " in result.output
    assert "match q: True" in result.output


def test_scalings_command_writes_artifacts(tmp_path):
    out = tmp_path / "run"
    result = invoke("scalings", *SMALL_ARGS, "--out", str(out))
    assert result.exit_code == 0, result.output
    assert (out / "scalings.csv").exists()
    assert (out / "scalings.json").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["mode"] == "scalings"
    assert manifest["status"] == "ok"
    assert manifest["config"]["l"] == "3"
    header = (out / "scalings.csv").read_text().splitlines()[0]
    assert header.startswith("level,tau,alpha,sigma,s")


def test_partition_command_exports_levels(tmp_path):
    out = tmp_path / "parts"
    result = invoke("partition", *SMALL_ARGS, "--out", str(out))
    assert result.exit_code == 0, result.output
    for n in range(1, 6):
        csv_path = out / f"partition_n{n}.csv"
        assert csv_path.exists()
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "type,index,left,length"
    rows = (out / "partition_n5.csv").read_text().splitlines()[1:]
    kinds = [r.split(",")[0] for r in rows]
    assert kinds.count("preimage") == 21
    assert kinds.count("long_gap") == 13
    assert kinds.count("short_gap") == 8


def test_invalid_config_rejected():
    result = invoke("tune", "--l", "0.5")
    assert result.exit_code == 2
    assert "out of scope" in result.output or "invalid config" in result.output


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"l": "3", "u": "0.05", "precision_bits": 192,
                               "n_max": 4, "cf_depth": 9, "target": {"kind": "golden"}}))
    result = invoke("tune", "--config", str(cfg), "--n-max", "5")
    assert result.exit_code == 0, result.output


def test_target_flag_parsing():
    result = invoke("tune", "--l", "3", "--u", "0.05", "--precision-bits", "192",
                    "--n-max", "4", "--cf-depth", "8", "--target", "silver")
    assert result.exit_code == 0, result.output
    assert "[2, 2, 2" in result.output


def test_determinism_bit_identical(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        result = invoke("dimension", *SMALL_ARGS, "--seed", "7", "--out", str(out))
        assert result.exit_code == 0, result.output
    for name in ("dimension.json", "cover.csv", "manifest.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_verify_command(tmp_path):
    out = tmp_path / "verify"
    result = invoke("verify", *SMALL_ARGS, "--seed", "3", "--out", str(out),)
    assert result.exit_code == 0, result.output
    text = (out / "verify.txt").read_text()
    assert "PASS tiling" in text
    assert "all invariants hold" in result.output


def test_manifest_written_even_on_failure(tmp_path):
    out = tmp_path / "broken"
    # explicit CF target with too few quotients for the requested depth
    result = invoke("tune", "--l", "3", "--u", "0.05", "--precision-bits", "192",
                    "--n-max", "5", "--cf-depth", "9", "--target", "cf:1,1,1",
                    "--out", str(out))
    assert result.exit_code == 2
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "error"
    assert "quotients" in manifest["summary"]["error"]


def test_sweep_command(tmp_path):
    out = tmp_path / "sweep"
    result = invoke("sweep", "--grid", "1.5,3", "--u", "0.05",
                    "--precision-bits", "192", "--n-max", "5", "--cf-depth", "9",
                    "--out", str(out))
    assert result.exit_code == 0, result.output
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("l,verdict")
    assert len(lines) == 3
