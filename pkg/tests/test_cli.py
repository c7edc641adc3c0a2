import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from hybridcoupler import cli
from hybridcoupler.cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, EXIT_PARTIAL, main
from hybridcoupler.errors import BracketingFailure
from hybridcoupler.params import format_device, load_device
from hybridcoupler.tables import parse_csv, parse_json, read_table, tables_equivalent

CONFIG = str(Path(__file__).resolve().parents[1] / "configs" / "reference.ini")


@pytest.fixture
def symmetric_config(tmp_path):
    path = tmp_path / "symmetric.ini"
    path.write_text(format_device(load_device(CONFIG).replace(junction_position=0.0)))
    return str(path)


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_modes_table(capsys):
    code, out, _ = run(["modes", "--device", CONFIG, "--flux", "0", "--n", "3"], capsys)
    assert code == EXIT_OK
    table = parse_csv(out)
    np.testing.assert_allclose(table["nu"], [4.9423, 7.6950, 13.4512], atol=5e-5)
    assert len(table["m"]) == 3
    assert table.metadata["device_file_sha256"]


def test_dump_envelopes(tmp_path, capsys):
    dump = tmp_path / "env.csv"
    code, _, _ = run(["modes", "--device", CONFIG, "--n", "2", "--dump-envelopes", str(dump), "--samples", "11"], capsys)
    assert code == EXIT_OK
    env = read_table(dump)
    assert env.names == ["flux", "x", "u_0", "u_1"]
    assert env.n_rows == 11


def test_output_file_and_formats(tmp_path, capsys):
    base = ["spectrum", "--device", CONFIG, "--flux", "0:0.5:6"]
    assert main(base + ["--output", str(tmp_path / "a.csv")]) == EXIT_OK
    assert main(base + ["--format", "json", "--output", str(tmp_path / "a.json")]) == EXIT_OK
    a, b = read_table(tmp_path / "a.csv"), read_table(tmp_path / "a.json")
    assert tables_equivalent(a, b)
    assert json.loads((tmp_path / "a.json").read_text())["columns"][0] == "flux"


def test_reruns_byte_identical(tmp_path):
    outs = []
    for name in ("r1.csv", "r2.csv"):
        main(["couplings", "--device", CONFIG, "--flux", "0:0.5:5", "--output", str(tmp_path / name)])
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]


def test_xx_and_zz_commands(capsys):
    code, out, _ = run(["xx", "--device", CONFIG, "--flux", "0.3:0.5:3", "--polarity", "port_field",
                        "--j-convention", "doubled"], capsys)
    assert code == EXIT_OK
    table = parse_csv(out)
    assert table.metadata["options"]["j_convention"] == "doubled"
    code, out, _ = run(["zz", "--device", CONFIG, "--flux", "0:0.5:11", "--format", "json"], capsys)
    assert code == EXIT_OK
    assert "report" in parse_json(out).metadata


def test_design_and_fieldmap(capsys):
    code, out, _ = run(["design", "--device", CONFIG, "--parameter", "c_j", "--values", "1e-14,3e-14",
                        "--flux", "0:0.5:3"], capsys)
    assert code == EXIT_OK and parse_csv(out).n_rows == 6
    code, out, _ = run(["fieldmap", "--device", CONFIG, "--flux", "0", "--points", "5"], capsys)
    assert code == EXIT_OK and parse_csv(out).n_rows == 5


def test_convention_override(capsys):
    _, out, _ = run(["spectrum", "--device", CONFIG, "--flux", "0.25", "--convention", "paper_literal"], capsys)
    table = parse_csv(out)
    assert table["nu_1"][0] == 0.0
    assert table.metadata["flux_convention"] == "paper_literal"


@pytest.mark.parametrize(
    "argv",
    [
        ["modes", "--device", "missing.ini"],
        ["modes", "--device", CONFIG, "--n", "0"],
        ["modes", "--device", CONFIG, "--flux", "0:0.5:3"],
        ["spectrum", "--device", CONFIG, "--flux", "0:0.5"],
        ["zz", "--device", CONFIG, "--flux", "0.2"],
        ["design", "--device", CONFIG, "--parameter", "c_j", "--values", "a,b"],
        ["couplings", "--device", CONFIG, "--w1", "-1"],
        ["fieldmap", "--device", CONFIG, "--mode", "-1"],
        ["bogus"],
    ],
)
def test_configuration_errors(argv, capsys):
    with pytest.raises(SystemExit) as info:
        raise SystemExit(main(argv))
    assert info.value.code == EXIT_CONFIG


def test_config_error_writes_no_output(tmp_path, capsys):
    target = tmp_path / "out.csv"
    assert main(["spectrum", "--device", str(tmp_path / "none.ini"), "--output", str(target)]) == EXIT_CONFIG
    assert not target.exists()


def test_all_points_failed(symmetric_config, tmp_path, capsys):
    target = tmp_path / "out.csv"
    code, _, err = run(["couplings", "--device", symmetric_config, "--flux", "0", "--output", str(target)], capsys)
    assert code == EXIT_FAILURE
    assert "junction_decoupled_mode" in err
    assert not target.exists()


def test_solver_failure(monkeypatch, capsys):
    # a single-point command has no table to degrade into
    def fail(*args, **kwargs):
        raise BracketingFailure("no sign change")

    monkeypatch.setattr(cli, "build_mode_basis", fail)
    code, out, err = run(["modes", "--device", CONFIG], capsys)
    assert code == EXIT_FAILURE
    assert out == "" and "bracketing_failure" in err


def test_partial_failure(symmetric_config, tmp_path, capsys):
    target = tmp_path / "out.csv"
    code, _, err = run(["couplings", "--device", symmetric_config, "--flux", "0:0.25:2", "--output", str(target)],
                       capsys)
    assert code == EXIT_PARTIAL
    assert "1 of 2" in err
    assert read_table(target).errors == ["junction_decoupled_mode", ""]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hybridcoupler", "modes", "--device", CONFIG],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.splitlines()[-1].startswith("0,1,")
