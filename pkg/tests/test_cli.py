import io
import json
import shutil
import subprocess
import sys

import pytest

from openpnet import cli


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def files(corpus_dir):
    return corpus_dir / "spec.pnet", corpus_dir / "impl.pnet", corpus_dir / "relation.rel"


def test_validate(files):
    code, out, err = run("validate", files[0])
    assert code == 0 and out == "ok; non-observability: pass\n"
    assert "unresolved import" in err


def test_validate_listing_errors(corpus_dir):
    code, out, _ = run("validate", corpus_dir / "listings" / "spec_final.pnet")
    assert code == 3 and "undeclared identifier: q_a" in out


def test_derive_stats(files):
    code, out, _ = run("derive", files[1], "--stats")
    assert code == 0 and out.splitlines()[:2] == ["6 states, 19 satisfiable OTs", "Total: 19 SATISFIABLE OTs"]
    code, out, _ = run("derive", files[0], "--stats")
    assert out.splitlines()[0] == "2 states, 7 satisfiable OTs"


def test_derive_formats(files):
    code, out, _ = run("derive", files[0], "--format", "json")
    assert code == 0 and json.loads(out)["kind"] == "open-automaton"
    code, out, _ = run("derive", files[0], "--format", "dot")
    assert out.startswith("digraph")
    code, out, _ = run("derive", files[0], "--no-simplify")
    assert code == 0 and "OT1" in out


def test_saturate(files):
    code, out, _ = run("saturate", files[0], "--weak-depth", "1", "--stats")
    assert code == 0 and out == "2 states, 17 weak open transitions (depth 1)\n"
    code, out, _ = run("saturate", files[0], "--weak-depth", "1", "--format", "json")
    assert json.loads(out)["depth"] == 1


def test_check_strong_exit_code(files):
    code, out, _ = run("check", "--strong", *files)
    assert code == 1 and out.startswith("strong check: Fail")
    assert "empty cover set" in out


def test_check_weak_exit_code(files):
    code, out, _ = run("check", "--weak", "--weak-depth", "2", *files)
    # see the weak corpus test: the relation leaves the counter loop at (b1, 201) uncovered
    assert code == 1 and out.startswith("weak check: Fail (weak depth 2)")


def test_check_json(files):
    code, out, _ = run("check", "--weak", "--weak-depth", "1", "--format", "json", *files)
    data = json.loads(out)
    assert data["mode"] == "weak" and data["verdict"] in ("Fail", "Inconclusive")


def test_check_identity_passes(tmp_path, files):
    rel = tmp_path / "id.rel"
    rel.write_text("b0 | b0 | b_msg1 = b_msg2 && b_ec1 = b_ec2\nb1 | b1 | b_msg1 = b_msg2 && b_ec1 = b_ec2\n")
    code, out, _ = run("check", "--weak", "--weak-depth", "1", files[0], files[0], rel)
    assert code == 0 and out.startswith("weak check: Pass")


def test_inconclusive_exit_code(tmp_path, files):
    # counters are unrelated at b1; a silent loop on the other side may still
    # catch up, and b1 never stops producing new weak transitions
    rel = tmp_path / "r.rel"
    rel.write_text("b0 | b0 | true\nb1 | b1 | b_msg1 = b_msg2\n")
    code, out, _ = run("check", "--weak", "--weak-depth", "1", files[0], files[0], rel)
    assert code == 2 and out.startswith("weak check: Inconclusive")
    assert "raise --weak-depth" in out


def test_smt_cross_check_hook(files):
    code, out, _ = run("check", "--strong", "--smt-cmd", "echo sat", *files)
    assert code == 1 and "external solver on" in out and out.rstrip().endswith("sat")


def test_usage_errors(files, tmp_path):
    assert run("check", "--weak", files[0], files[1], tmp_path / "missing.rel")[0] == 3
    assert run("derive", tmp_path / "missing.pnet")[0] == 3
    assert run("bogus")[0] == 3
    assert run("saturate", files[0], "--weak-depth", "-1")[0] == 3
    bad = tmp_path / "bad.pnet"
    bad.write_text("pLTS {")
    code, _, err = run("parse", bad)
    assert code == 3 and "parse error" in err
    rel = tmp_path / "bad.rel"
    rel.write_text("b9 | 000 | true\n")
    code, _, err = run("check", "--strong", files[0], files[1], rel)
    assert code == 3 and "unknown state" in err


def test_state_cap_is_usage_error(files):
    assert run("derive", files[1], "--state-cap", "2")[0] == 3


def test_parse_and_export(files):
    code, out, _ = run("parse", files[0])
    assert code == 0 and out.startswith("root SimpleProtSpec2")
    code, out, _ = run("export", files[1], "--what", "pnet", "--format", "dot")
    assert out.count("shape=box") == 3
    code, out, _ = run("export", files[0], "--what", "weak", "--weak-depth", "1", "--format", "json")
    assert json.loads(out)["kind"] == "weak-open-automaton"


def test_help_exit_zero():
    assert run("--help")[0] == 0


@pytest.mark.skipif(shutil.which("openpnet") is None, reason="console script not installed")
def test_console_script(files):
    proc = subprocess.run(["openpnet", "derive", str(files[1]), "--stats"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("6 states, 19 satisfiable OTs")


def test_module_entry(files):
    proc = subprocess.run([sys.executable, "-m", "openpnet.cli", "validate", str(files[0])],
                          capture_output=True, text=True)
    assert proc.returncode == 0
