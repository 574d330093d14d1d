import json

import pytest

from lpfusion import __version__
from lpfusion.cli import build_parser, main

FAST = ["--p-grid", "2,4", "--rho-grid", "5", "--width-multipliers", "1",
        "--gmm-components", "1", "--kpca-dims", "2", "--max-epochs", "60"]


@pytest.fixture()
def iris(uci_dir):
    return ["--dataset", str(uci_dir / "iris.csv"), "--schema", str(uci_dir / "iris.json")]


def test_version(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


@pytest.mark.parametrize("cmd", ["fit", "eval", "bench", "ablate", "ranktest"])
def test_help_lists_flags(cmd, capsys):
    assert main([cmd, "--help"]) == 0
    out = capsys.readouterr().out
    sub = build_parser()._subparsers._group_actions[0].choices[cmd]
    for action in sub._actions:
        for flag in action.option_strings:
            assert flag in out


def test_usage_errors(capsys):
    assert main([]) == 2
    assert main(["fit"]) == 2
    assert main(["ablate", "--tolerances", "abc"]) == 2
    capsys.readouterr()


def test_runtime_errors(tmp_path, capsys):
    assert main(["ranktest", "--input", str(tmp_path / "nope.csv")]) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("dataset,a,b\nd1,0.9,x\n")
    assert main(["ranktest", "--input", str(bad)]) == 1
    assert "lpfusion:" in capsys.readouterr().err


def test_fit_eval_round_trip(tmp_path, iris, capsys):
    model = tmp_path / "m.npz"
    assert main(["fit", *iris, *FAST, "--seed", "3", "--output", str(model)]) == 0
    scores = tmp_path / "s.csv"
    assert main(["eval", *iris, "--model", str(model), "--test-split", "--seed", "3",
                 "--output", str(scores), "--output-format", "json"]) == 0
    out = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert out["auc_roc"] > 0.9
    lines = scores.read_text().splitlines()
    assert lines[0] == "row,score,label,predicted_normal" and len(lines) == out["n"] + 1


def test_fit_is_byte_deterministic(tmp_path, iris):
    a, b = tmp_path / "a.npz", tmp_path / "b.npz"
    for path in (a, b):
        assert main(["fit", *iris, *FAST, "--method", "fw", "--output", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_bench_is_byte_deterministic(tmp_path, iris, capsys):
    outs = []
    for tag, jobs in (("a", "1"), ("b", "2")):
        res, tab = tmp_path / f"{tag}.jsonl", tmp_path / f"{tag}.txt"
        assert main(["bench", *iris, *FAST, "--methods", "ip", "--trials", "2", "--jobs", jobs,
                     "--output", str(res), "--table", str(tab)]) == 0
        outs.append((res.read_bytes(), tab.read_bytes()))
    assert outs[0] == outs[1]
    assert b"Pure2" in outs[0][1]
    capsys.readouterr()


def test_ablate_writes_table(tmp_path, capsys):
    out, detail = tmp_path / "t.csv", tmp_path / "d.csv"
    assert main(["ablate", "--n", "50", "--d", "2", "--repeats", "1", "--fw-max-iter", "200",
                 "--output", str(out), "--detail", str(detail)]) == 0
    rows = out.read_text().splitlines()
    assert len(rows) == 5 and all(len(r.split(",")) == 4 for r in rows)
    first = detail.read_bytes()
    assert main(["ablate", "--n", "50", "--d", "2", "--repeats", "1", "--fw-max-iter", "200",
                 "--output", str(out), "--detail", str(detail)]) == 0
    assert detail.read_bytes() == first
    capsys.readouterr()


def test_ranktest(tmp_path, capsys):
    src = tmp_path / "t.csv"
    src.write_text("dataset,A,B,C\nd1,0.9,0.8,0.7\nd2,0.95,0.85,\nd3,0.99,0.7,0.8\n")
    out = tmp_path / "r.json"
    assert main(["ranktest", "--input", str(src), "--output-format", "json",
                 "--output", str(out)]) == 0
    res = json.loads(out.read_text())
    assert res["mean_ranks"]["A"] == 1.0
    capsys.readouterr()
