import pytest

from fedbroadcast.cli import FAILED, OK, USAGE, fixture_names, main
from fedbroadcast.sim import parse_trace

from conftest import fixture_text


def call(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_example7(capsys):
    code, out, _ = call(capsys, "analyze", "example7")
    assert code == OK
    assert "all\t{{1,2},{1,2,3},{1,3,4},{1,2,3,4}}" in out
    assert "intact\t{1,2}" in out
    assert "fail-prone\t{{2},{3,4}}" in out


def test_analyze_example19_lists_each_view(capsys):
    code, out, _ = call(capsys, "analyze", "example19")
    assert code == OK
    assert "view 1\tall\t{{1,2},{1,2,3},{1,3,4},{1,2,3,4}}" in out
    assert "view 2\tall\t{{1,2},{1,2,3},{1,2,3,4}}" in out
    assert "intact\t{1,2}" in out


def test_analyze_single_node(capsys):
    code, out, _ = call(capsys, "analyze", "single-node")
    assert code == OK
    assert "all\t{{1}}" in out
    assert "fail-prone\t{{}}" in out


def test_analyze_lines_format(capsys):
    code, out, _ = call(capsys, "analyze", "example7", "--format", "lines")
    assert code == OK
    assert all("\t" in line for line in out.splitlines())
    assert "intact\tintact\t{1,2}" in out


@pytest.mark.parametrize("spec,code", [("weakly-reliable", OK), ("reliable", FAILED)])
def test_simulate_example14(capsys, spec, code):
    got, out, _ = call(capsys, "simulate", "example14", "--spec", spec)
    assert got == code
    assert "totality_intact\tpass" in out
    assert "totality\tfail\t(4)" in out


def test_simulate_without_amplification_fails(capsys):
    code, _, _ = call(capsys, "simulate", "example4-no-line12", "--spec", "reliable")
    assert code == FAILED


def test_simulate_writes_trace_file(capsys, tmp_path):
    dest = tmp_path / "t.trace"
    code, out, _ = call(capsys, "simulate", "example7", "--out", str(dest), "--seed", "3")
    assert code == OK
    assert "== trace ==" not in out
    assert parse_trace(dest.read_text()).quiescent


def test_simulate_accepts_a_path(capsys, tmp_path):
    path = tmp_path / "x.json"
    path.write_text(fixture_text("example6"))
    code, out, _ = call(capsys, "simulate", str(path))
    assert code == OK and "DELIVER" in out


@pytest.mark.parametrize("name", fixture_names())
def test_seeded_simulation_is_byte_stable(capsys, name):
    first = call(capsys, "simulate", name, "--seed", "7")
    second = call(capsys, "simulate", name, "--seed", "7")
    assert first == second


def test_explore(capsys):
    code, out, _ = call(capsys, "explore", "example14", "--spec", "weakly-reliable")
    assert code == OK
    assert "1:a\t2:a" in out
    code, _, _ = call(capsys, "explore", "example14", "--spec", "reliable")
    assert code == FAILED


def test_explore_parallel_keeps_order(capsys):
    serial = call(capsys, "explore", "example7", "example2", "example6")
    parallel = call(capsys, "explore", "example7", "example2", "example6", "--jobs", "3")
    assert serial == parallel
    assert serial[1].index("scenario\texample7") < serial[1].index("scenario\texample2")


@pytest.mark.parametrize("name", ["example7", "example7-split", "example7-silent"])
def test_equiv(capsys, name):
    code, out, _ = call(capsys, "equiv", name)
    assert code == OK
    assert out.count("history_equal\tpass") == 2


def test_list(capsys):
    code, out, _ = call(capsys, "list")
    assert code == OK
    assert [line.split("\t")[0] for line in out.splitlines()] == fixture_names()


def test_errors_exit_with_usage_status(capsys, tmp_path):
    code, _, err = call(capsys, "analyze", "no-such-fixture")
    assert code == USAGE and "no scenario" in err
    bad = tmp_path / "bad.json"
    bad.write_text("{\n  \"universe\": [1,\n}")
    code, _, err = call(capsys, "simulate", str(bad))
    assert code == USAGE and "line 3" in err
    code, _, err = call(capsys, "equiv", "example19")
    assert code == USAGE


def test_argparse_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        main(["simulate", "example7", "--spec", "strong"])
    assert e.value.code == USAGE
