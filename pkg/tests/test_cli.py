import subprocess
import sys

import pytest

from nashdyn.cli import main
from nashdyn.games import GAME_IDS
from nashdyn.harness import read_csv
from nashdyn.methods import METHOD_IDS


def test_list_methods(capsys):
    # [TRIVIAL] 12 baselines plus brf and bre
    assert main(["list-methods"]) == 0
    out = capsys.readouterr().out.split()
    assert out == list(METHOD_IDS) and len(out) == 14


def test_list_games(capsys):
    assert main(["list-games"]) == 0
    assert capsys.readouterr().out.split() == list(GAME_IDS)


def test_run_writes_csv(tmp_path, capsys):
    out = tmp_path / "o.csv"
    code = main(["run", "--game", "saddle", "--method", "bre", "--steps", "100", "--trials", "4",
                 "--seed", "7", "--out", str(out)])
    assert code == 0
    rows = read_csv(out)
    assert {r[2] for r in rows if r[2] >= 0} == {0, 1, 2, 3}
    assert any(r[4] == "distance_mean" for r in rows)
    assert "distance" in capsys.readouterr().out


def test_run_is_byte_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["run", "--game", "mp3", "--method", "sg", "--steps", "30", "--trials", "2", "--seed", "1"]
    main(args + ["--out", str(a)])
    main(args + ["--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("game=mp2\nmethod=sg\nsteps=10\ntrials=2\neval_every=5\n")
    out = tmp_path / "o.csv"
    assert main(["run", "--config", str(cfg), "--trials", "3", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert {r[2] for r in rows if r[2] >= 0} == {0, 1, 2}
    assert max(r[3] for r in rows) == 10


@pytest.mark.parametrize("args", [
    ["run", "--game", "chess", "--method", "sg"],
    ["run", "--game", "mp2", "--method", "adam"],
    ["run", "--game", "mp2"],
    ["run", "--game", "gg", "--method", "ed"],
    ["run", "--game", "mp2", "--method", "sg", "--steps", "0"],
    ["run", "--game", "mp2", "--method", "sg", "--frobnicate"],
    ["dance"],
])
def test_usage_errors_exit_2(args):
    with pytest.raises(SystemExit) as info:
        main(args)
    assert info.value.code == 2


def test_missing_config_file(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["run", "--config", str(tmp_path / "none.cfg")])
    assert info.value.code == 2


def test_console_entry_point(tmp_path):
    # the installed module runs as a script
    res = subprocess.run([sys.executable, "-m", "nashdyn.cli", "list-methods"], capture_output=True, text=True)
    assert res.returncode == 0 and len(res.stdout.split()) == 14


def test_check_exits_zero(capsys):
    # [TRIVIAL] the property suite passes on a healthy build
    assert main(["check", "--profiles", "1"]) == 0
    out = capsys.readouterr().out
    assert "checks passed" in out and "FAIL" not in out
