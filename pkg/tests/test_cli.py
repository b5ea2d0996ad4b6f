from __future__ import annotations

import json

import pytest

from trplab.cli import main
from trplab.core import decode, encode, cyclic_square, validate


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_integral(capsys):
    code, out, _ = _run(capsys, "integral", "--C", "1")
    assert code == 0 and "closed_form=0.263944" in out


def test_count_grid(tmp_path, capsys):
    f = tmp_path / "empty4.txt"
    f.write_text("0 0 0 0\n" * 4)
    code, out, _ = _run(capsys, "count", "--grid", str(f))
    assert code == 0 and "completions=576" in out


def test_count_triples_json(tmp_path, capsys):
    f = tmp_path / "one.txt"
    f.write_bytes(b"2 1\n1 3 5\n")
    code, out, _ = _run(capsys, "count", "--triples", str(f), "--json")
    man = json.loads(out)
    assert code == 0 and man["result"]["completions"] == 1
    assert man["rng_id"] == "numpy-pcg64" and "version" in man and "timestamp" in man


def test_count_guard_exit_code(tmp_path, capsys):
    f = tmp_path / "big.txt"
    f.write_text(("0 " * 9 + "0\n") * 10)
    code, _, err = _run(capsys, "count", "--grid", str(f))
    assert code == 1 and "refused" in err


def test_unreadable_file_and_usage_errors(capsys):
    assert _run(capsys, "count", "--grid", "/nonexistent/file")[0] == 2
    assert _run(capsys, "trp-run", "--bogus")[0] == 2
    assert _run(capsys)[0] == 2
    assert _run(capsys, "count")[0] == 2


def test_parse_error_is_a_domain_error(tmp_path, capsys):
    f = tmp_path / "bad.txt"
    f.write_bytes(b"2 2\n1 3 5\n")
    code, _, err = _run(capsys, "quasi-check", "--in", str(f))
    assert code == 1 and "line 3" in err


def test_generate_cyclic_to_stdout(capsys):
    code, out, _ = _run(capsys, "generate", "--n", "3")
    assert code == 0 and decode(out.encode()) == cyclic_square(3)


def test_single_trp_run_writes_square_and_manifest(tmp_path, capsys):
    prefix = tmp_path / "run"
    code, out, _ = _run(capsys, "trp-run", "--n", "6", "--alpha", "0.5", "--seed", "3", "--q-trace", "--out", str(prefix))
    assert code == 0 and "frozen_at" in out
    sq = decode((tmp_path / "run.txt").read_bytes())
    man = json.loads((tmp_path / "run.json").read_text())
    res = man["result"]
    assert validate(sq) is None and len(sq) == res["m"] == 18
    assert res["seed"] == 3 and res["q_trace"][0] == 216 and len(res["q_trace"]) == 19


def test_trp_trials_at_n2(tmp_path, capsys):
    code, out, _ = _run(capsys, "trp-run", "--n", "2", "--trials", "4000", "--seed", "1", "--out", str(tmp_path / "t"))
    assert code == 0
    rate = json.loads((tmp_path / "t.json").read_text())["result"]["stats"]["freeze_rate"]
    assert abs(rate - 0.25) < 0.03
    assert (tmp_path / "t.csv").read_text().startswith("trial,")


def test_seed_from_environment(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv("TRPLAB_SEED", "17")
    _run(capsys, "trp-run", "--n", "5", "--steps", "4", "--out", str(tmp_path / "a"))
    monkeypatch.delenv("TRPLAB_SEED")
    _run(capsys, "trp-run", "--n", "5", "--steps", "4", "--seed", "17", "--out", str(tmp_path / "b"))
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()
    assert json.loads((tmp_path / "a.json").read_text())["seed"] == 17


def test_quasi_check(tmp_path, capsys):
    f = tmp_path / "sq.txt"
    f.write_bytes(encode(cyclic_square(6).prefix(12)))
    code, out, _ = _run(capsys, "quasi-check", "--in", str(f), "--epsilon", "10", "--json")
    res = json.loads(out)["result"]
    assert code == 0 and res["quasirandom"] and res["triangles"]["actual"] > 0


@pytest.mark.parametrize(
    "argv, key",
    [
        (["couple", "--n", "10", "--trials", "50", "--transfer", "1", "2"], "violations"),
        (["order-profile", "--cyclic", "6", "--trials", "3"], "pass_rate"),
        (["ratio-study", "--kind", "history", "--n", "8", "--alpha", "0.3", "--pairs", "2"], "within_bound"),
        (["ratio-study", "--kind", "extension", "--n", "4", "--alpha", "0.3", "--pairs", "2"], "max_abs_log_ratio"),
        (["bounds", "--n", "5", "--alpha", "0"], "upper_log=-9.76405"),
    ],
)
def test_subcommands_run(capsys, argv, key):
    code, out, _ = _run(capsys, *argv)
    assert code == 0 and key in out


def test_domain_error_exit_code(capsys):
    assert _run(capsys, "couple", "--n", "5", "--alpha", "1.5", "--trials", "1")[0] == 1
    assert _run(capsys, "bounds", "--n", "5", "--alpha", "2")[0] == 1
    assert _run(capsys, "integral", "--C", "-1")[0] == 1


def test_outputs_are_reproducible_across_jobs(tmp_path, capsys):
    base = ["trp-run", "--n", "8", "--alpha", "0.5", "--trials", "6", "--checkpoints", "4", "--track", "1", "--seed", "9"]
    _run(capsys, *base, "--out", str(tmp_path / "a"))
    _run(capsys, *base, "--jobs", "2", "--out", str(tmp_path / "b"))
    for suffix in (".csv", ".checkpoints.csv", ".trajectories.csv"):
        assert (tmp_path / f"a{suffix}").read_bytes() == (tmp_path / f"b{suffix}").read_bytes()
    ja = json.loads((tmp_path / "a.json").read_text())
    jb = json.loads((tmp_path / "b.json").read_text())
    assert ja["result"] == jb["result"]
