"""Scenario parsing, execution, corpus runs and matrix assembly."""

import pytest

from pathtrace.matrix import (
    MatrixRow,
    build_matrix,
    emit_matrix,
    render_records,
    render_table,
    split_cell,
)
from pathtrace.network import AdvModel
from pathtrace.scenario import (
    EXIT_CAPABILITY,
    EXIT_EXPECT,
    EXIT_OK,
    EXIT_PARSE,
    MatrixDirective,
    Scenario,
    ScenarioError,
    ScenarioResult,
    corpus_dir,
    execute_scenario,
    parse_scenario,
    run_corpus,
    run_scenario,
)

TRACKER_RUN = """\
# swap the first two hops
protocol tracker
kind run
seed 7
adversary AdvT

reader r1 acme
reader r2
reader m
param manager m
transit w
tag t1
validpath t1 r1 r2
capacity t1 512

move t1 r1
move t1 w
move t1 r2
claim t1

expect sound true
expect sorted true
matrix ss hold AdvT
"""


def write(tmp_path, text, name="case.scn"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestParsing:
    def test_full_run_scenario(self, tmp_path):
        scn = parse_scenario(write(tmp_path, TRACKER_RUN))
        assert scn.protocol == "tracker"
        assert scn.kind == "run"
        assert scn.seed == 7
        assert scn.adversary is AdvModel.ADV_T
        assert scn.readers == [("r1", "acme"), ("r2", None), ("m", None)]
        assert scn.transits == ["w"]
        assert scn.tags == ["t1"]
        assert scn.valid_paths == [("t1", ("r1", "r2"))]
        assert scn.capacities == {"t1": 512}
        assert scn.params == {"manager": "m"}
        assert scn.script == [
            ("move", "t1", "r1"),
            ("move", "t1", "w"),
            ("move", "t1", "r2"),
            ("claim", "t1"),
        ]
        assert scn.expects == [("sound", "true"), ("sorted", "true")]
        assert scn.directives == [
            MatrixDirective(prop="sound_sorted", action="hold", model="AdvT")
        ]
        assert scn.name == "case"

    def test_probe_kind_is_attack(self, tmp_path):
        scn = parse_scenario(
            write(tmp_path, "protocol rfchain\nkind probe\nattack rfchain-length-extension\n")
        )
        assert scn.kind == "attack"

    def test_attack_argument_types(self, tmp_path):
        scn = parse_scenario(
            write(
                tmp_path,
                "protocol ray\nkind attack\n"
                "attack ray-out-of-order order=1,0,2 path_len=3 mode=prf\n",
            )
        )
        assert scn.attack == "ray-out-of-order"
        assert scn.attack_args == {"order": (1, 0, 2), "path_len": 3, "mode": "prf"}

    def test_boolean_attack_argument(self, tmp_path):
        scn = parse_scenario(
            write(tmp_path, "protocol rfchain\nkind attack\nattack rfchain-linking insider=true\n")
        )
        assert scn.attack_args == {"insider": True}

    def test_matrix_break_defaults_to_footnote_one(self, tmp_path):
        scn = parse_scenario(write(tmp_path, "protocol ray\nmatrix ss break\n"))
        assert scn.directives == [
            MatrixDirective(prop="sound_sorted", action="break", footnote=1)
        ]

    def test_privacy_directives(self, tmp_path):
        scn = parse_scenario(
            write(
                tmp_path,
                "protocol rfchain\nkind privacy\ngame tag-unlinkability\n"
                "distinguisher record-linking\ntrials 200\nworlds 16\n"
                "expect advantage_min 0.99\n",
            )
        )
        assert scn.game is not None
        assert scn.distinguisher == "record-linking"
        assert scn.trials == 200
        assert scn.worlds == 16

    @pytest.mark.parametrize(
        "text,fragment",
        [
            ("protocol nosuch\n", "unknown protocol"),
            ("protocol tracker\nfrobnicate x\n", "unknown directive"),
            ("protocol tracker\nadversary AdvX\n", "AdvT or AdvR"),
            ("protocol tracker\nkind warble\n", "kind must be"),
            ("protocol tracker\nvalidpath t1\n", "at least one reader"),
            ("protocol tracker\nmove t1\n", "move needs"),
            ("protocol tracker\nexpect sound\n", "expect needs"),
            ("protocol tracker\nmatrix zz hold AdvT\n", "matrix directive is"),
            ("protocol tracker\nmatrix ss hold Foo\n", "matrix hold needs a model"),
            ("protocol tracker\nmatrix ss break 9\n", "unknown footnote"),
            ("protocol tracker\nmatrix ss caveat x\n", "not a number"),
            ("protocol tracker\nkind attack\nattack nosuch\n", "unknown attack"),
            ("protocol tracker\nkind attack\nattack rfchain-linking k\n", "not key=value"),
            ("protocol tracker\nkind privacy\ngame bingo\n", "game must be"),
        ],
    )
    def test_parse_errors(self, tmp_path, text, fragment):
        with pytest.raises(ScenarioError, match=fragment):
            parse_scenario(write(tmp_path, text))

    def test_parse_error_carries_line_number(self, tmp_path):
        with pytest.raises(ScenarioError, match=r"case\.scn:3"):
            parse_scenario(write(tmp_path, "protocol tracker\nseed 1\nfrobnicate\n"))

    def test_missing_protocol(self, tmp_path):
        with pytest.raises(ScenarioError, match="missing protocol"):
            parse_scenario(write(tmp_path, "seed 3\n"))

    def test_attack_kind_needs_attack(self, tmp_path):
        with pytest.raises(ScenarioError, match="without attack directive"):
            parse_scenario(write(tmp_path, "protocol ray\nkind attack\n"))

    def test_privacy_kind_needs_game(self, tmp_path):
        with pytest.raises(ScenarioError, match="without game directive"):
            parse_scenario(write(tmp_path, "protocol ray\nkind privacy\n"))


class TestExecution:
    def test_run_scenario_ok(self, tmp_path):
        result = run_scenario(write(tmp_path, TRACKER_RUN))
        assert result.exit_code == EXIT_OK
        assert not result.failures
        assert result.validated_directives
        assert "scenario case" in result.report_lines()

    def test_expect_mismatch(self, tmp_path):
        text = TRACKER_RUN.replace("expect sorted true", "expect sorted false")
        result = run_scenario(write(tmp_path, text))
        assert result.exit_code == EXIT_EXPECT
        assert any("sorted" in f for f in result.failures)
        assert result.validated_directives == []

    def test_unknown_expect_key(self, tmp_path):
        text = TRACKER_RUN + "expect frobnication true\n"
        result = run_scenario(write(tmp_path, text))
        assert result.exit_code == EXIT_EXPECT
        assert any("nothing to compare" in f for f in result.failures)

    def test_label_membership(self, tmp_path):
        text = TRACKER_RUN + "expect label Reroute\n"
        assert run_scenario(write(tmp_path, text)).exit_code == EXIT_OK
        text = TRACKER_RUN + "expect label GhostStep\n"
        assert run_scenario(write(tmp_path, text)).exit_code == EXIT_EXPECT

    def test_parse_failure_exit_code(self, tmp_path):
        result = run_scenario(write(tmp_path, "protocol tracker\nbogus\n"))
        assert result.exit_code == EXIT_PARSE
        assert "bogus" in result.failures[0]

    def test_missing_file_is_parse_error(self, tmp_path):
        assert run_scenario(tmp_path / "absent.scn").exit_code == EXIT_PARSE

    def test_verifier_policy_exit(self, tmp_path):
        text = (
            "protocol burbridge\nseed 1\nreader ra\nreader rb\ntag t1\n"
            "validpath t1 ra rb\nmove t1 ra\nmove t1 rb\nclaim t1 ra\n"
        )
        result = run_scenario(write(tmp_path, text))
        assert result.exit_code == EXIT_CAPABILITY
        assert any("capability" in f for f in result.failures)

    def test_capability_exit_for_compromise_under_advt(self, tmp_path):
        text = (
            "protocol checker\nseed 1\nadversary AdvT\ncompromise r1\n"
            "reader r1\nreader r2\ntag t1\nvalidpath t1 r1 r2\n"
            "move t1 r1\nmove t1 r2\nclaim t1\n"
        )
        assert run_scenario(write(tmp_path, text)).exit_code == EXIT_CAPABILITY

    def test_bounded_search_exit(self, tmp_path):
        text = "protocol tracker\nkind attack\nattack tracker-order-search q=2003\n"
        assert run_scenario(write(tmp_path, text)).exit_code == EXIT_CAPABILITY

    def test_unsupported_game_exit(self, tmp_path):
        text = (
            "protocol tracker\nkind privacy\ngame tag-unlinkability\n"
            "distinguisher xor-structure\ntrials 100\n"
        )
        assert run_scenario(write(tmp_path, text)).exit_code == EXIT_CAPABILITY

    def test_attack_adversary_consistency(self, tmp_path):
        # the key-disclosure replay runs under AdvR; declaring AdvT is a lie
        text = (
            "protocol resc\nkind attack\nseed 0\nadversary AdvT\n"
            "attack resc-key-disclosure\nexpect succeeded true\n"
        )
        result = run_scenario(write(tmp_path, text))
        assert result.exit_code == EXIT_EXPECT
        assert any("adversary" in f for f in result.failures)

    def test_scenario_seed_feeds_attack(self, tmp_path):
        text = (
            "protocol burbridge\nkind attack\nseed 3\nadversary AdvR\n"
            "attack burbridge-bypass\nexpect succeeded true\n"
        )
        assert run_scenario(write(tmp_path, text)).exit_code == EXIT_OK

    def test_privacy_scenario(self, tmp_path):
        text = (
            "protocol rfchain\nkind privacy\nseed 7\ngame tag-unlinkability\n"
            "distinguisher record-linking\ntrials 150\n"
            "expect advantage_min 0.99\nexpect trials 150\n"
        )
        result = run_scenario(write(tmp_path, text))
        assert result.exit_code == EXIT_OK

    def test_privacy_threshold_failure(self, tmp_path):
        text = (
            "protocol rfchain\nkind privacy\nseed 7\ngame tag-unlinkability\n"
            "distinguisher random\ntrials 200\nexpect advantage_min 0.99\n"
        )
        result = run_scenario(write(tmp_path, text))
        assert result.exit_code == EXIT_EXPECT
        assert any("below" in f for f in result.failures)


class TestCorpus:
    def test_bundled_corpus_all_green(self):
        results = run_corpus(corpus_dir())
        assert len(results) == 25
        bad = {r.scenario.name: r.failures for r in results if r.exit_code != EXIT_OK}
        assert not bad

    def test_corpus_sorted_and_deterministic(self):
        first = run_corpus(corpus_dir())
        names = [r.scenario.name for r in first]
        assert names == sorted(names)
        second = run_corpus(corpus_dir())
        assert [r.report_lines() for r in first] == [r.report_lines() for r in second]

    def test_empty_directory(self, tmp_path):
        assert run_corpus(tmp_path) == []


def _result(name, protocol, adversary, exit_code=EXIT_OK, directives=()):
    scn = Scenario(path=corpus_dir() / f"{name}.scn")
    scn.protocol = protocol
    scn.adversary = adversary
    scn.directives = list(directives)
    return ScenarioResult(scenario=scn, exit_code=exit_code)


def _covering(protocol):
    """Two green no-directive results so coverage is satisfied."""
    return [
        _result(f"{protocol}-t", protocol, AdvModel.ADV_T),
        _result(f"{protocol}-r", protocol, AdvModel.ADV_R),
    ]


class TestMatrixAssembly:
    def test_strongest_hold_wins(self):
        results = _covering("tracker")
        results[0].scenario.directives = [
            MatrixDirective(prop="sound_sorted", action="hold", model="AdvT")
        ]
        results[1].scenario.directives = [
            MatrixDirective(prop="sound_sorted", action="hold", model="AdvR")
        ]
        rows, _ = build_matrix(results)
        row = next(r for r in rows if r.protocol == "tracker")
        assert row.sound_sorted == "AdvR"

    def test_breaks_attach_without_downgrading(self):
        results = _covering("ray")
        results[0].scenario.directives = [
            MatrixDirective(prop="sound_sorted", action="hold", model="AdvT"),
            MatrixDirective(prop="sound_sorted", action="break", footnote=1),
        ]
        results[1].scenario.directives = [
            MatrixDirective(prop="sound_sorted", action="break", footnote=1),
            MatrixDirective(prop="authorized", action="weakness", footnote=2),
        ]
        rows, _ = build_matrix(results)
        row = next(r for r in rows if r.protocol == "ray")
        assert row.sound_sorted == "AdvT[1]"  # deduplicated footnote
        assert row.authorized == "X[2]"
        assert row.footnotes == (1, 2)

    def test_failed_scenario_evidence_ignored(self):
        results = _covering("checker")
        results[0].scenario.directives = [
            MatrixDirective(prop="privacy", action="hold", model="AdvT")
        ]
        results[0].exit_code = EXIT_EXPECT
        rows, warnings = build_matrix(results)
        assert any("evidence ignored" in w for w in warnings)
        # the failed scenario also no longer counts as AdvT coverage
        assert any("not exercised under AdvT" in w for w in warnings)
        row = next(r for r in rows if r.protocol == "checker")
        assert row.privacy == "X"

    def test_missing_protocol_warning(self):
        rows, warnings = build_matrix(_covering("tracker"))
        assert len(rows) == 1
        assert sum("no validated scenarios" in w for w in warnings) == 6

    def test_split_cell(self):
        assert split_cell("AdvT") == ("AdvT", ())
        assert split_cell("X") == ("X", ())
        assert split_cell("AdvT[1][4]") == ("AdvT", (1, 4))

    def test_records_expand_models(self):
        row = MatrixRow(
            protocol="resc",
            architecture="Online",
            sound_sorted="AdvT[1]",
            complete="X",
            authorized="AdvR",
            privacy="X",
            footnotes=(1,),
        )
        records = render_records([row])
        assert len(records) == 8
        assert (
            "record protocol=resc architecture=Online property=sound_sorted"
            " model=AdvT holds=true notes=1" in records
        )
        assert (
            "record protocol=resc architecture=Online property=sound_sorted"
            " model=AdvR holds=false notes=1" in records
        )
        assert (
            "record protocol=resc architecture=Online property=authorized"
            " model=AdvR holds=true notes=-" in records
        )

    def test_render_table_legend(self):
        rows, _ = build_matrix(
            [
                _result(
                    "ray-x",
                    "ray",
                    AdvModel.ADV_T,
                    directives=[MatrixDirective(prop="sound_sorted", action="caveat", footnote=4)],
                ),
                _result("ray-y", "ray", AdvModel.ADV_R),
            ]
        )
        lines = render_table(rows)
        assert any(line.startswith("[4] ") for line in lines)
        assert not any(line.startswith("[1] ") for line in lines)


class TestEmitMatrix:
    def test_bundled_corpus_complete(self):
        code, lines = emit_matrix(corpus_dir())
        assert code == 0
        assert "table-begin" in lines
        assert sum(1 for l in lines if l.startswith("record ")) == 7 * 4 * 2
        assert not any(l.startswith("warning") for l in lines)

    def test_incomplete_corpus_nonzero(self, tmp_path):
        (tmp_path / "one.scn").write_text(TRACKER_RUN)
        code, lines = emit_matrix(tmp_path)
        assert code == 1
        assert any("incomplete matrix" in l for l in lines)

    def test_empty_corpus_nonzero(self, tmp_path):
        code, lines = emit_matrix(tmp_path)
        assert code == 1
        assert any("no scenarios found" in l for l in lines)
