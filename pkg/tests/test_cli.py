"""Command-line interface: exit codes, output, --out files."""

import pytest

from pathtrace.cli import main
from pathtrace.scenario import corpus_dir

HONEST = corpus_dir() / "tracker-honest.scn"


class TestRun:
    def test_ok_scenario(self, capsys):
        assert main(["run", str(HONEST)]) == 0
        out = capsys.readouterr().out
        assert "scenario tracker-honest" in out
        assert "exit=0" in out

    def test_out_file_matches_stdout(self, tmp_path, capsys):
        target = tmp_path / "report.txt"
        main(["run", str(HONEST), "--out", str(target)])
        out = capsys.readouterr().out
        assert target.read_text() == out

    def test_expect_failure(self, tmp_path, capsys):
        scn = tmp_path / "bad.scn"
        scn.write_text(HONEST.read_text().replace("expect sound true", "expect sound false"))
        assert main(["run", str(scn)]) == 1
        assert "expect-failed" in capsys.readouterr().out

    def test_parse_failure(self, tmp_path, capsys):
        scn = tmp_path / "broken.scn"
        scn.write_text("protocol tracker\nwibble\n")
        assert main(["run", str(scn)]) == 2
        assert "broken.scn:2" in capsys.readouterr().out

    def test_capability_failure(self, tmp_path):
        scn = tmp_path / "cap.scn"
        scn.write_text(
            "protocol tracker\nkind attack\nattack tracker-order-search q=2003\n"
        )
        assert main(["run", str(scn)]) == 3


class TestMatrix:
    def test_bundled_corpus(self, capsys):
        assert main(["matrix"]) == 0
        out = capsys.readouterr().out
        assert "table-begin" in out
        assert "record protocol=tracker" in out

    def test_explicit_directory(self, capsys):
        assert main(["matrix", str(corpus_dir())]) == 0

    def test_incomplete_directory(self, tmp_path, capsys):
        (tmp_path / "only.scn").write_text(HONEST.read_text())
        assert main(["matrix", str(tmp_path)]) == 1
        assert "incomplete matrix" in capsys.readouterr().out

    def test_out_file(self, tmp_path, capsys):
        target = tmp_path / "matrix.txt"
        main(["matrix", "--out", str(target)])
        assert target.read_text() == capsys.readouterr().out


class TestAttack:
    def test_success_exit_zero(self, capsys):
        assert main(["attack", "ray-impersonation"]) == 0
        out = capsys.readouterr().out
        assert "succeeded=true" in out

    def test_probe_failure_exit_one(self, capsys):
        # the length-extension probe concludes the forgery is rejected
        assert main(["attack", "rfchain-length-extension"]) == 1
        assert "succeeded=false" in capsys.readouterr().out

    def test_seed_override(self, capsys):
        assert main(["attack", "burbridge-bypass", "--seed", "5"]) == 0

    def test_seed_unsupported(self, capsys, monkeypatch):
        from pathtrace.attacks import ATTACKS

        monkeypatch.setitem(ATTACKS, "fixed-op", lambda: None)
        assert main(["attack", "fixed-op", "--seed", "1"]) == 2
        assert "does not take a seed" in capsys.readouterr().err

    def test_unknown_name_rejected(self):
        with pytest.raises(SystemExit) as exc:
            main(["attack", "nosuch-attack"])
        assert exc.value.code == 2


class TestPrivacy:
    def test_basic_game(self, capsys):
        code = main(
            [
                "privacy", "rfchain", "tag-unlinkability",
                "--distinguisher", "record-linking", "--trials", "120", "--seed", "7",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "trials=120" in out
        assert "advantage=1.000000" in out
        assert "warning" not in out

    def test_small_trials_warning(self, capsys):
        assert main(["privacy", "tracker", "step-unlinkability", "--trials", "50"]) == 0
        assert "fewer than 100 trials" in capsys.readouterr().out

    def test_adversary_flag(self, capsys):
        code = main(
            [
                "privacy", "checker", "tag-unlinkability",
                "--distinguisher", "full-transcript", "--adversary", "AdvR",
                "--trials", "100",
            ]
        )
        assert code == 0
        assert "adversary=AdvR" in capsys.readouterr().out

    def test_unsupported_combination(self, capsys):
        code = main(
            ["privacy", "tracker", "step-unlinkability", "--distinguisher", "xor-structure"]
        )
        assert code == 3
        assert "capability" in capsys.readouterr().err

    def test_out_file(self, tmp_path, capsys):
        target = tmp_path / "game.txt"
        main(
            [
                "privacy", "ray", "step-unlinkability",
                "--trials", "100", "--out", str(target),
            ]
        )
        assert target.read_text() == capsys.readouterr().out
