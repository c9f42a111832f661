import io

import pytest

import enactment
import run_session
from conftest import GOLDEN, TDSP_SCRIPT
from run_session import CommandError, RunSession, SessionCommand, parse_command, script_lines


@pytest.fixture
def session(tdsp_model):
    return RunSession(tdsp_model, out=io.StringIO())


def output(session):
    return session.out.getvalue().splitlines()


# ---- command parsing ----

@pytest.mark.parametrize("line, expected", [
    ("status", SessionCommand("status")),
    ("  start  modeling  ", SessionCommand("start", "modeling")),
    ("COMPLETE a", SessionCommand("complete", "a")),
    ("skip sample_data", SessionCommand("skip", "sample_data")),
    ("quit", SessionCommand("quit")),
    ("", None),
    ("   ", None),
    ("# a comment", None),
])
def test_parse_command(line, expected):
    assert parse_command(line) == expected


@pytest.mark.parametrize("line, fragment", [
    ("strat modeling", "did you mean 'start'?"),
    ("start", "needs an activity id"),
    ("status now", "takes no argument"),
    ("start a b", "cannot parse"),
    ("frobnicate", "unknown command 'frobnicate'"),
])
def test_bad_commands(line, fragment):
    with pytest.raises(CommandError) as exc:
        parse_command(line)
    assert fragment in str(exc.value)


# ---- session ----

def test_session_prints_creation_events(session):
    assert output(session) == ["1 InstanceCreated", "2 ActivityReady business_understanding"]


def test_commands_print_the_events_they_append(session):
    session.execute("start business_understanding")
    assert output(session)[2:] == ["3 ActivityStarted business_understanding",
                                   "4 ActivityReady define_objectives"]


def test_illegal_command_reports_and_continues(session):
    assert session.execute("start modeling")
    assert output(session)[-1].startswith("error N002: cannot start 'modeling'")
    assert session.execute("start business_understanding")
    assert output(session)[-1] == "4 ActivityReady define_objectives"


def test_unknown_activity_gets_a_hint(session):
    session.execute("start busines_understanding")
    assert output(session)[-1] == ("error M001: no activity with id 'busines_understanding'; "
                                   "did you mean 'business_understanding'?")


def test_malformed_line_is_reported(session):
    assert session.execute("start")
    assert output(session)[-1] == "error: 'start' needs an activity id"


def test_comments_and_blank_lines_are_ignored(session):
    before = output(session)
    assert session.execute("# nothing here")
    assert session.execute("")
    assert output(session) == before


def test_quit_ends_the_session(session):
    session.run(["quit", "start business_understanding"])
    assert session.finished
    assert len(session.instance.log) == 2


def test_log_command(session):
    session.execute("log")
    assert output(session)[-2:] == ["1 InstanceCreated", "2 ActivityReady business_understanding"]


def test_scripted_acceptance_scenario(tdsp_model):
    out = io.StringIO()
    session = RunSession(tdsp_model, out=out)
    session.run(script_lines(TDSP_SCRIPT))
    golden = (GOLDEN / "tdsp_customer_acceptance.status").read_text(encoding="utf-8")
    assert out.getvalue().endswith(golden)
    assert "error" not in out.getvalue()
    assert session.instance.ready == ["customer_acceptance"]


def test_save_log_replays(tmp_path, session, tdsp_model):
    session.run(["start business_understanding", "start define_objectives"])
    path = session.save_log(tmp_path / "logs" / "run.log")
    text = path.read_text(encoding="utf-8")
    assert text == session.log_text
    again = enactment.replay(tdsp_model, enactment.parse_log(text))
    assert again.log == session.instance.log


def test_interactive_lines_stop_at_eof(monkeypatch):
    answers = iter(["status", "quit"])

    def fake_input(prompt):
        assert prompt == run_session.PROMPT
        try:
            return next(answers)
        except StopIteration:
            raise EOFError from None

    monkeypatch.setattr(run_session, "session_input", fake_input)
    assert list(run_session.interactive_lines()) == ["status", "quit"]


def test_interactive_lines_stop_on_interrupt(monkeypatch):
    def interrupted(prompt):
        raise KeyboardInterrupt

    monkeypatch.setattr(run_session, "session_input", interrupted)
    assert list(run_session.interactive_lines()) == []


def test_missing_script_raises(tmp_path):
    with pytest.raises(OSError):
        script_lines(tmp_path / "none.script")
