import io
import json

import pytest
from fastapi.testclient import TestClient

from sfqecc import cli
from sfqecc.netlist import bundled_netlist_text
from sfqecc.service.app import app


def run(*argv, backend=None):
    out = io.StringIO()
    code = cli.main(list(argv), out=out, backend=backend)
    return code, out.getvalue()


def test_encode_decode_strings():
    assert run("encode", "1010") == (0, "00110011\n")
    assert run("encode", "0000") == (0, "00000000\n")
    assert run("decode", "00110011") == (0, "1010 clean\n")
    assert run("decode", "10110011") == (0, "1010 corrected @1\n")
    assert run("decode", "--mode", "detect_only", "10110011") == (0, "detected_uncorrectable\n")


def test_encode_general_code():
    from sfqecc.codec import build_rm_code, encode, format_bits, parse_bits

    code, text = run("encode", "--rm", "1,4", "10110")
    assert code == 0
    assert text.strip() == format_bits(encode(build_rm_code(1, 4), parse_bits("10110")))


def test_shell_round_trip_all_messages():
    for i in range(16):
        msg = format(i, "04b")
        _, cw = run("encode", msg)
        assert run("decode", cw.strip())[1] == f"{msg} clean\n"


@pytest.mark.parametrize(
    "argv",
    [
        ["encode", "10a0"],
        ["encode"],
        ["frobnicate"],
        ["decode", "--mode", "guess", "00110011"],
        ["encode", "--rm", "1", "1010"],
        ["montecarlo", "--fault-prob", "2"],
        ["montecarlo", "--arm", "magic"],
        ["encode", "--bogus", "1010"],
    ],
)
def test_usage_errors(argv):
    assert run(*argv)[0] == cli.EXIT_USAGE


def test_data_errors(tmp_path):
    assert run("encode", "101")[0] == cli.EXIT_DATA
    assert run("decode", "0011")[0] == cli.EXIT_DATA
    assert run("census", "--max-size", "4")[0] == cli.EXIT_DATA
    bad = tmp_path / "bad.net"
    bad.write_text("a DC2SFQ in=M1 out=x\nb DC2SFQ in=M2 out=x\n")
    assert run("validate", str(bad))[0] == cli.EXIT_DATA
    assert run("simulate", "--messages", "1010", "--faults", '{"open_cells": ["ghost"]}')[0] == cli.EXIT_DATA
    assert run("simulate", "--faults", '{"opened": []}')[0] == cli.EXIT_DATA


def test_io_errors(tmp_path):
    assert run("validate", str(tmp_path / "missing.net"))[0] == cli.EXIT_IO
    assert run("simulate", "--netlist", str(tmp_path / "missing.net"))[0] == cli.EXIT_IO
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run("census", "--max-size", "0", "--out", str(blocker / "sub"))[0] == cli.EXIT_IO


def test_validate_reference(tmp_path):
    path = tmp_path / "rm13.net"
    path.write_text(bundled_netlist_text())
    code, text = run("validate", str(path))
    report = json.loads(text)
    assert code == 0 and report["latency"] == 2 and report["census"]["XOR"] == 8


def test_simulate_reports(tmp_path):
    code, text = run("simulate", "--messages", "1010")
    assert code == 0
    assert text.splitlines() == ["message transmitted received", "1010 00110011 00110011"]
    code, text = run(
        "simulate", "--messages", "1010", "--faults", '{"open_cells":["dff_c8_1","dff_c8_2"]}',
        "--trace", "t.csv", "--out", str(tmp_path),
    )
    assert text.splitlines()[1] == "1010 00110011 00110010 differs=@8"
    assert (tmp_path / "t.csv").read_text().startswith("time_ns,channel,level\n")


def test_simulate_faults_from_file(tmp_path):
    plan = tmp_path / "plan.json"
    plan.write_text('{"open_cells": ["out_c1"]}')
    _, text = run("simulate", "--messages", "1000", "--faults", f"@{plan}")
    assert text.splitlines()[1] == "1000 11111111 01111111 differs=@1"


def test_simulate_empty():
    assert run("simulate") == (0, "")


def test_montecarlo_unit_step(tmp_path):
    code, text = run("montecarlo", "--fault-prob", "0", "--realizations", "10", "--out", str(tmp_path))
    assert code == 0
    assert "P(N_err=0)=1.0000" in text
    assert (tmp_path / "cdf_rm13_after_ecc_p0.0.csv").read_text() == "n_err,cum_prob\n0,1.0\n"


def test_montecarlo_byte_identical(tmp_path):
    args = ["montecarlo", "--arm", "all", "--fault-prob", "0.01", "--seed", "7", "--realizations", "50"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(*args, "--out", str(a))[0] == 0
    assert run(*args, "--out", str(b), "--workers", "2")[0] == 0
    files = sorted(p.name for p in a.iterdir())
    assert len(files) == 6
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_montecarlo_ordered_sweep(tmp_path):
    code, text = run(
        "montecarlo", "--fault-prob", "0.001,0.01,0.02", "--realizations", "200", "--seed", "3", "--out", str(tmp_path)
    )
    assert code == 0 and "CDFs ordered by fault_prob: yes" in text


def test_global_flags_before_subcommand(tmp_path):
    args = ["--realizations", "20", "--fault-prob", "0.02"]
    assert run("--seed", "5", f"--out={tmp_path / 'a'}", "montecarlo", *args)[0] == 0
    assert run("montecarlo", "--seed", "5", "--out", str(tmp_path / "b"), *args)[0] == 0
    name = "cdf_rm13_after_ecc_p0.02.json"
    assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert run("--seed", "5")[0] == cli.EXIT_USAGE


def test_census(tmp_path):
    code, text = run("census", "--max-size", "0", "--out", str(tmp_path))
    assert (code, text) == (0, "")
    code, text = run("census", "--max-size", "2", "--out", str(tmp_path))
    assert "size 1: harmless=0 correctable=24 uncorrectable=25 total=49" in text
    rows = (tmp_path / "census_max2.csv").read_text().splitlines()
    assert "2,dff_c8_1+dff_c8_2,1,correctable" in rows


def test_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"realizations": 5, "fault_prob": "0.0", "arm": "all"}')
    code, text = run("montecarlo", "--config", str(cfg), "--out", str(tmp_path))
    assert code == 0 and len(text.splitlines()) == 4
    # command-line flags win over the config file
    code, text = run("montecarlo", "--config", str(cfg), "--arm", "no_encoder", "--out", str(tmp_path))
    assert text.startswith("no_encoder")
    cfg.write_text('{"realisations": 5}')
    assert run("montecarlo", "--config", str(cfg))[0] == cli.EXIT_USAGE
    cfg.write_text("[1, 2]")
    assert run("montecarlo", "--config", str(cfg))[0] == cli.EXIT_USAGE
    cfg.write_text("{not json")
    assert run("montecarlo", "--config", str(cfg))[0] == cli.EXIT_USAGE
    assert run("montecarlo", "--config", str(tmp_path / "none.json"))[0] == cli.EXIT_IO


def test_remote_backend_matches_local(tmp_path):
    remote = cli.RemoteBackend(client=TestClient(app))
    for argv in (["encode", "1010"], ["decode", "10110011"], ["simulate", "--messages", "1010,0001"]):
        assert run(*argv, backend=remote) == run(*argv)
    assert run("encode", "101", backend=remote)[0] == cli.EXIT_DATA


def test_unreachable_server():
    assert run("encode", "1010", "--server", "http://127.0.0.1:9")[0] == cli.EXIT_IO
