import json

import fsspec
import pytest
from click.testing import CliRunner

from rbcm.gallery import anbn, anbn_or_anb2n, marked_palindrome_count
from rbcm.machines import END, STAY, CounterMachine, Transition
import rbcm.cli
import rbcm.repository as repository


def _store(name, m):
    url = f"memory://test_cli/{name}.json"
    repository.write(url, m)
    return url


def _runaway():
    return CounterMachine(
        "a",
        {"s"},
        "s",
        set(),
        [
            Transition("s", END, (0,), "s", STAY, (1,)),
            Transition("s", END, (1,), "s", STAY, (1,)),
        ],
    )


@pytest.mark.parametrize(
    "subcmd",
    [
        None,
        ["validate"],
        ["run"],
        ["member"],
        ["empty"],
        ["enum"],
        ["apply"],
        ["eq"],
        ["dot"],
        ["gallery"],
        ["gallery", "list"],
        ["gallery", "build"],
        ["gallery", "demo"],
    ],
    ids=(
        "--help",
        "validate --help",
        "run --help",
        "member --help",
        "empty --help",
        "enum --help",
        "apply --help",
        "eq --help",
        "dot --help",
        "gallery --help",
        "gallery list --help",
        "gallery build --help",
        "gallery demo --help",
    ),
)
def test_cli_helpflags(subcmd):
    """Test that CLI commands and subcommands don't throw Error if given --help flag"""
    runner = CliRunner()

    # Setup CLI args
    cli_args = ["--help"]
    if subcmd is not None:
        cli_args = subcmd + ["--help"]

    result = runner.invoke(rbcm.cli.rbcm_cli, cli_args)
    assert "Error:" not in result.output
    assert result.exit_code == 0


@pytest.mark.parametrize(
    "args, exit_code, output",
    [
        pytest.param(["run", "{anbn}", "aabb"], 0, "accept", id="run accept"),
        pytest.param(["run", "{anbn}", "aab"], 1, "reject", id="run reject"),
        pytest.param(
            ["run", "{runaway}", "", "--counter-cap", "4"], 3, "unknown (counter cap)",
            id="run unknown",
        ),
        pytest.param(["member", "{anbn}", "aabb"], 0, "member", id="member"),
        pytest.param(["member", "{anbn}", "abab"], 1, "not a member", id="not a member"),
        pytest.param(["member", "{stack}", "a#a"], 2, "stack", id="member on a stack machine"),
        pytest.param(["empty", "{runaway}"], 0, "empty", id="empty"),
        pytest.param(["empty", "{anbn}"], 1, "nonempty, witness", id="nonempty"),
        pytest.param(["enum", "{anbn}", "-n", "4"], 0, "ab\naabb\n", id="enum"),
        pytest.param(
            ["enum", "{runaway}", "-n", "1", "--counter-cap", "3"], 3, "no verdict",
            id="enum inconclusive",
        ),
        pytest.param(["eq", "{anbn}", "{anbn}", "-n", "6"], 0, "equal", id="eq"),
        pytest.param(["eq", "{anbn}", "{nanbn}", "-n", "6"], 1, "different", id="different"),
        pytest.param(["validate", "{anbn}"], 0, "DCM(1,1)", id="validate"),
        pytest.param(["validate", "{broken}"], 2, "transitions[0]", id="validate broken"),
        pytest.param(["validate", "{notjson}"], 2, "not JSON", id="validate not json"),
        pytest.param(
            ["member", "memory://test_cli/nowhere/none.json", "ab"], 2, "cannot read",
            id="missing document",
        ),
        pytest.param(["dot", "{anbn}", "--name", "anbn"], 0, 'digraph "anbn" {', id="dot"),
        pytest.param(["gallery", "list"], 0, "anbn\tDCM(1,1)", id="gallery list"),
        pytest.param(["gallery", "demo", "dpcm_suffix", "-n", "3"], 0, '"holds": true',
                     id="gallery demo"),
        pytest.param(["gallery", "demo", "pumping"], 2, "unknown demo", id="unknown demo"),
    ],
)
def test_cli_exit_codes(args, exit_code, output):
    """Test verdict and error exit codes of the commands"""
    urls = {
        "anbn": _store("anbn", anbn()),
        "nanbn": _store("nanbn", anbn_or_anb2n()),
        "runaway": _store("runaway", _runaway()),
        "stack": _store("stack", marked_palindrome_count()),
    }
    broken = json.loads(repository.dumps(anbn()))
    broken["transitions"][0]["to"] = "nowhere"
    urls["broken"] = "memory://test_cli/broken.json"
    urls["notjson"] = "memory://test_cli/notjson.json"
    with fsspec.open(urls["broken"], mode="w") as fl:
        json.dump(broken, fl)
    with fsspec.open(urls["notjson"], mode="w") as fl:
        fl.write("{")
    args = [a.format(**urls) for a in args]

    runner = CliRunner(mix_stderr=False)
    result = runner.invoke(rbcm.cli.rbcm_cli, args)
    assert result.exit_code == exit_code, result.output + result.stderr
    assert output in result.output + result.stderr


def test_cli_eq_reports_differences():
    runner = CliRunner(mix_stderr=False)
    result = runner.invoke(
        rbcm.cli.rbcm_cli,
        ["eq", _store("eq_left", anbn_or_anb2n()), _store("eq_right", anbn()), "-n", "3"],
    )
    assert result.exit_code == 1
    assert result.stdout == "different\n"
    assert "< 'abb'" in result.stderr


def test_cli_apply_then_eq():
    """Test a construction pipeline: prefixes of a^n b^n against a hand-made DCM"""
    runner = CliRunner()
    src = _store("apply_src", anbn())
    out = "memory://test_cli/apply_prefix.json"
    result = runner.invoke(rbcm.cli.rbcm_cli, ["apply", "dcm_prefix", src, "-o", out])
    assert result.exit_code == 0, result.output
    assert "DCM" in result.output
    result = runner.invoke(rbcm.cli.rbcm_cli, ["member", out, "aab"])
    assert result.exit_code == 0
    result = runner.invoke(rbcm.cli.rbcm_cli, ["member", out, "abb"])
    assert result.exit_code == 1

    suffixes = "memory://test_cli/apply_suffix.json"
    result = runner.invoke(
        rbcm.cli.rbcm_cli,
        ["apply", "dcm11_left_quotient", src, "-f", "sigma-star", "-o", suffixes],
    )
    assert result.exit_code == 0, result.output
    result = runner.invoke(
        rbcm.cli.rbcm_cli,
        ["apply", "ncm_word_ops", src, "--op", "suff", "-o", "memory://test_cli/apply_suff.json"],
    )
    assert result.exit_code == 0, result.output
    result = runner.invoke(rbcm.cli.rbcm_cli, ["member", "memory://test_cli/apply_suff.json", "abb"])
    assert result.exit_code == 0
    result = runner.invoke(rbcm.cli.rbcm_cli, ["enum", suffixes, "-n", "2"])
    assert result.exit_code == 0
    assert result.output == '""\nb\nab\nbb\n'


@pytest.mark.parametrize(
    "args",
    [
        pytest.param(["apply", "dcm_prefix", "-o", "memory://test_cli/x.json"], id="no operands"),
        pytest.param(["apply", "dcm_left_quotient_finite", "{anbn}", "-o", "memory://test_cli/x.json"],
                     id="missing words"),
        pytest.param(["apply", "dcm_prefix", "{nanbn}", "-o", "memory://test_cli/x.json"],
                     id="nondeterministic operand"),
        pytest.param(["gallery", "build", "anbm", "-o", "memory://test_cli/x.json"],
                     id="unknown gallery entry"),
    ],
)
def test_cli_apply_usage_errors(args):
    """Test that precondition failures exit with code 2"""
    urls = {"anbn": _store("anbn", anbn()), "nanbn": _store("nanbn", anbn_or_anb2n())}
    result = CliRunner().invoke(rbcm.cli.rbcm_cli, [a.format(**urls) for a in args])
    assert result.exit_code == 2
    assert "Error:" in result.output


def test_cli_gallery_build():
    out = "memory://test_cli/gallery_build.json"
    result = CliRunner().invoke(
        rbcm.cli.rbcm_cli, ["gallery", "build", "suff11_family", "-m", "L'", "-o", out]
    )
    assert result.exit_code == 0, result.output
    assert repository.read(out).alphabet >= {"d", "e", "f"}


def test_cli_debug_envvar(monkeypatch):
    monkeypatch.setenv("RBCM_DEBUG", "1")
    result = CliRunner().invoke(rbcm.cli.rbcm_cli, ["gallery", "list"])
    assert result.exit_code == 0
