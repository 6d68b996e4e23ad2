"""
ipweave コマンドのテスト（終了コードと出力）
"""
from conftest import DATA, REPLICA
from ipweave import main

FSPEC = str(DATA / "jaas.fspec")
TASK01 = str(REPLICA / "task01")


def test_analyze(capsys):
    assert main(["analyze", TASK01]) == 0
    assert "JaasImplementor.main" in capsys.readouterr().out


def test_analyze_program_option(capsys):
    assert main(["analyze", "--program", TASK01]) == 0
    assert "JaasImplementor.main" in capsys.readouterr().out


def test_synth_writes_output(tmp_path, capsys):
    assert main(["synth", "--program", TASK01, "--fspec", FSPEC, "--out", str(tmp_path)]) == 0
    assert "lc.login();" in (tmp_path / "JaasImplementor.mj").read_text(encoding="utf-8")
    assert (tmp_path / "report.rec").is_file()


def test_check_woven_output(tmp_path, capsys):
    main(["synth", "--program", TASK01, "--fspec", FSPEC, "--out", str(tmp_path)])
    capsys.readouterr()
    assert main(["check", "--program", str(tmp_path), "--fspec", FSPEC]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "branch 1"
    assert out[-1] == "score 1.0000"


def test_sketch(capsys):
    assert main(["sketch", "--fspec", FSPEC, "--branch", "1"]) == 0
    assert "?2:javax.security.auth.login.LoginContext.login()" in capsys.readouterr().out


def test_input_error_exit_code(tmp_path, capsys):
    assert main(["analyze", str(tmp_path)]) == 1
    assert "error:" in capsys.readouterr().err


def test_infeasible_exit_code(tmp_path, capsys):
    (tmp_path / "E.mj").write_text("class E { }\n", encoding="utf-8")
    assert main(["synth", "--program", str(tmp_path), "--fspec", FSPEC]) == 2


def test_resolve(capsys):
    assert main(["resolve", "--program", TASK01, "--fspec", FSPEC]) == 0
    out = capsys.readouterr().out.splitlines()
    assert "assign ?1 = name" in out
    assert "assign ?2 = lc" in out
    assert out[-1] == "distinct 2"


def test_score_top(capsys):
    assert main(["score", "--program", TASK01, "--fspec", FSPEC, "--top", "3"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "branch 1"


def test_config_after_subcommand(tmp_path, capsys):
    good = tmp_path / "good.cfg"
    good.write_text("listCap = 3\n", encoding="utf-8")
    assert main(["score", "--program", TASK01, "--fspec", FSPEC, "--config", str(good)]) == 0

    # 設定ファイルが実際に読まれていること（不正値は入力エラー）
    bad = tmp_path / "bad.cfg"
    bad.write_text("listCap = 0\n", encoding="utf-8")
    assert main(["score", "--program", TASK01, "--fspec", FSPEC, "--config", str(bad)]) == 1
    assert "listCap" in capsys.readouterr().err


def test_usage_error_exit_code(capsys):
    assert main(["score", "--no-such-option"]) == 1
    assert main([]) == 1
    assert main(["score", "--help"]) == 0


def test_missing_fspec_is_input_error(tmp_path, capsys):
    assert main(["score", "--program", TASK01, "--fspec", str(tmp_path / "nope.fspec")]) == 1
    assert "error: cannot read" in capsys.readouterr().err


def test_missing_config_is_input_error(tmp_path, capsys):
    missing = str(tmp_path / "nope.cfg")
    assert main(["score", "--program", TASK01, "--fspec", FSPEC, "--config", missing]) == 1
    assert "error: cannot read" in capsys.readouterr().err
