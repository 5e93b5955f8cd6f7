import hashlib
import json

import pytest

from soupfall.cli import ConfigError, blob_sha1, main, parse_config
from soupfall.io import load_soup


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def write_config(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_cle_prints_json(capsys):
    code, out, _ = run(["cle", "-p", "c=1.0"], capsys)
    assert code == 0
    vals = json.loads(out)
    assert vals["kappa"] == pytest.approx(4) and vals["d"] == pytest.approx(1.875)
    assert vals["boundary_dim"] == pytest.approx(1.5)


def test_cle_out_of_domain_is_config_error(capsys):
    code, _, err = run(["cle", "-p", "c=1.5"], capsys)
    assert code == 2 and "c:" in err


def test_sample_is_byte_identical(tmp_path, capsys):
    cfg = write_config(tmp_path, {"command": "sample", "shape": "circle", "c": 0.3,
                                  "domain": "unit_disk", "eps_min": 0.05, "seed": 7})
    for d in ("a", "b"):
        assert run(["sample", "--config", cfg, "--out", str(tmp_path / d)], capsys)[0] == 0
    for name in ("soup.jsonl", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    soup = load_soup(tmp_path / "a" / "soup.jsonl")
    assert soup.seed == 7 and len(soup) > 0


def test_manifest_lists_every_file(tmp_path, capsys):
    out = tmp_path / "o"
    code, _, _ = run(["sample", "-p", "c=0.3", "-p", "eps_min=0.05", "-p", "pitch=0.02",
                      "--out", str(out)], capsys)
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    names = {f["name"] for f in manifest["files"]}
    on_disk = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert names == on_disk == {"soup.jsonl", "summary.json", "interiors.pgm"}
    for f in manifest["files"]:
        data = (out / f["name"]).read_bytes()
        assert len(data) == f["bytes"]
        assert hashlib.sha256(data).hexdigest() == f["sha256"]
    assert manifest["version"] and "wall_time_s" in manifest


def test_carpet_prob_thread_independent(tmp_path, capsys):
    args = ["carpet-prob", "-p", "c=0.2", "-p", "eps_list=[0.3,0.2]", "-p", "replicas=100",
            "--seed", "4"]
    run(args + ["--threads", "1", "--out", str(tmp_path / "t1")], capsys)
    run(args + ["--threads", "3", "--out", str(tmp_path / "t3")], capsys)
    for name in ("ptable.csv", "trials.csv", "summary.json"):
        assert (tmp_path / "t1" / name).read_bytes() == (tmp_path / "t3" / name).read_bytes()
    text = (tmp_path / "t1" / "ptable.csv").read_text()
    assert text.startswith("eps,trials,successes,p_hat,ci_lo,ci_hi\n") and "\r" not in text


def test_seed_priority(tmp_path):
    raw = {"command": "cle", "c": 0.5, "seed": 3}
    assert parse_config(raw, env={}).seed == 3
    assert parse_config(raw, env={"SOUPFALL_SEED": "9"}).seed == 9
    assert parse_config(raw, seed_flag=11, env={"SOUPFALL_SEED": "9"}).seed == 11
    with pytest.raises(ConfigError) as err:
        parse_config(raw, env={"SOUPFALL_SEED": "x"})
    assert err.value.field == "SOUPFALL_SEED"


@pytest.mark.parametrize("raw, field", [
    ({"command": "sample", "c": 0.3}, "eps_min"),
    ({"command": "sample", "c": -1, "eps_min": 0.1}, "c"),
    ({"command": "sample", "c": 0.3, "eps_min": 0.1, "colour": "red"}, "colour"),
    ({"command": "sample", "c": 0.3, "eps_min": 5.0}, "eps_min"),
    ({"command": "carpet-prob", "c": 0.3, "eps_list": [0.3, 1.2]}, "eps_list[1]"),
    ({"command": "carpet-prob", "c": 0.3, "eps_list": [0.3], "replicas": 10}, "replicas"),
    ({"command": "phase-scan", "c_grid": [0.3, 0.1]}, "c_grid"),
    ({"command": "rw-area", "n": 10}, "n"),
    ({"command": "beta-star", "c": 0.1, "W": 2}, "W"),
    ({"command": "sample", "c": 0.3, "eps_min": 0.1, "shape": {"kind": "blob"}}, "shape"),
    ({"command": "sample", "c": 0.3, "eps_min": 0.1, "domain": "torus"}, "domain"),
    ({"command": "teleport"}, "command"),
])
def test_config_rejections(raw, field):
    with pytest.raises(ConfigError) as err:
        parse_config(raw, env={})
    assert err.value.field == field


def test_config_errors_exit_two(tmp_path, capsys):
    cfg = write_config(tmp_path, {"command": "sample", "c": 0.3, "eps_min": 0.05, "oops": 1})
    code, _, err = run(["sample", "--config", cfg], capsys)
    assert code == 2 and "oops" in err
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["sample", "--config", str(bad)], capsys)[0] == 2
    cfg = write_config(tmp_path, {"command": "cle", "c": 0.5}, "cle.json")
    assert run(["sample", "--config", cfg], capsys)[0] == 2


def test_operation_error_exits_one(tmp_path, capsys):
    table = tmp_path / "t.csv"
    table.write_text("eps,trials,successes\n0.2,100,90\n0.1,100,80\n")
    code, _, err = run(["fit-alpha", "-p", f"table={table}", "--out", str(tmp_path / "o")], capsys)
    assert code == 1 and "at least 3 rows" in err


def test_fit_alpha_from_table(tmp_path, capsys):
    table = tmp_path / "t.csv"
    rows = "".join(f"{e},{10**6},{round(e ** 0.5 * 1e6)}\n" for e in (0.001, 0.01, 0.1))
    table.write_text("eps,trials,successes\n" + rows)
    out = tmp_path / "o"
    assert run(["fit-alpha", "-p", f"table={table}", "--out", str(out)], capsys)[0] == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["results"]["alpha_hat"] == pytest.approx(0.5, abs=0.01)
    assert len(summary["input_hash"]) == 40


def test_other_commands_smoke(tmp_path, capsys):
    cases = [
        ["remaining-dim", "-p", "c=0.5", "-p", "eps_min=0.05", "-p", "pitch=0.0078125",
         "-p", "factors=[1,2,4,8]", "-p", "replicas=2"],
        ["phase-scan", "-p", "c_grid=[0.0001,0.5]", "-p", "replicas=20", "-p", "eps_fixed=0.2",
         "-p", "pitch_rule=4"],
        ["beta-star", "-p", "c=0.02", "-p", "replicas=100", "-p", "eps_min=0.2",
         "-p", "pitch=0.03125", "-p", "W=4"],
        ["small-c", "-p", "c_list=[0.05]", "-p", "eps_list=[0.2,0.1,0.05]", "-p", "replicas=100",
         "-p", "n_theta=32"],
        ["rw-area", "-p", "n=50", "-p", "replicas=20"],
    ]
    for k, argv in enumerate(cases):
        out = tmp_path / f"r{k}"
        code, _, err = run(argv + ["--out", str(out)], capsys)
        assert code == 0, err
        assert (out / "manifest.json").exists() and (out / "summary.json").exists()


def test_blob_hash_matches_git_format():
    # hash of the empty blob as printed by `git hash-object`
    assert blob_sha1(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"
