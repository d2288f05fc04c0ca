import json
import subprocess
import sys

import pytest

from nearcloak.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_zeta_disks(capsys):
    code, out, _ = run(capsys, "zeta", "--family", "disks", "--ri", "1", "--re", "2", "--n", "1")
    assert code == 0 and out.strip() == "0.533333"


def test_zeta_ellipses(capsys):
    code, out, _ = run(capsys, "zeta", "--family", "ellipses", "--l", "1", "--xii", "0.5",
                       "--xie", "1", "--n", "1", "--bg", "cos")
    assert code == 0 and float(out) == pytest.approx(0.537876, abs=1e-5)


def test_zeta_degenerate_radii(capsys):
    code, out, err = run(capsys, "zeta", "--family", "disks", "--ri", "2", "--re", "2", "--n", "1")
    assert code == 2 and "degenerate radii" in err
    assert len(err.strip().splitlines()) == 1 and err.startswith("error: ")


def test_zeta_json_schema(capsys):
    code, out, _ = run(capsys, "zeta", "--json")
    d = json.loads(out)
    assert d["schema"] == 1 and d["zeta0"] == pytest.approx(8 / 15)


def test_design_disk_reference(capsys):
    code, out, _ = run(capsys, "design", "--family", "disks", "--ri", "1", "--re", "2", "--n", "1",
                       "--f", "-cos4", "--json")
    d = json.loads(out)
    g = d["design"]["g"]["cos"]
    assert code == 0 and d["verify"]["passed"]
    assert g[0] == pytest.approx(0.2197, abs=5e-4)
    assert g[2] == pytest.approx(0.4669, abs=5e-4)
    assert g[4] == pytest.approx(-0.125, abs=5e-4)
    assert d["design"]["trace"]


def test_design_ellipse_reference(capsys):
    code, out, _ = run(capsys, "design", "--family", "ellipses", "--l", "1", "--xii", "0.5",
                       "--xie", "1", "--n", "1", "--f", "-cos4", "--json")
    g = json.loads(out)["design"]["g"]["cos"]
    assert code == 0
    assert [round(v, 4) for v in (g[0], g[2], g[4])] == pytest.approx([0.5141, 0.7933, -0.3458], abs=5e-4)


def test_design_zero_shape(capsys):
    code, out, _ = run(capsys, "design", "--f", "0")
    assert code == 0 and "g = 0" in out and "pass" in out


def test_design_gap_case_warns(capsys):
    code, out, _ = run(capsys, "design", "--f", "sin2:1", "--no-generic")
    assert code == 1 and "FAIL" in out


def test_design_lstsq(capsys):
    code, out, _ = run(capsys, "design", "--f", "-cos4", "--method", "lstsq", "--no-generic", "--json")
    assert code == 0 and json.loads(out)["design"]["method"] == "least-squares"


@pytest.mark.parametrize("argv", [
    ["design", "--f", "tan3"],
    ["zeta", "--nodes", "15"],
    ["design", "--family", "ellipses", "--xii", "1", "--xie", "0.5"],
])
def test_usage_errors_exit_two(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err.startswith("error: ")


def test_argparse_errors_exit_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["zeta", "--family", "spheres"])
    assert exc.value.code == 2


def test_report_zero_epsilon(capsys, tmp_path):
    code, out, _ = run(capsys, "report", "--epsilon", "0", "--spacing", "0.1", "--nodes", "128",
                       "--out", str(tmp_path), "--json")
    d = json.loads(out)
    assert code == 0 and all(row["Q"] < 1e-6 for row in d["Q"].values())
    assert {p.name for p in tmp_path.iterdir()} >= {"report.json", "trace_perfect.csv",
                                                   "trace_order1.csv", "trace_order2.csv"}


def test_report_ordering_disks(capsys):
    code, out, _ = run(capsys, "report", "--spacing", "0.06", "--json")
    d = json.loads(out)
    q = {k: v["Q"] for k, v in d["Q"].items()}
    assert code == 0 and d["ordering_ok"]
    assert q["perfect"] < q["order2"] < q["order1"]


def test_report_ordering_ellipses(capsys):
    code, out, _ = run(capsys, "report", "--family", "ellipses", "--spacing", "0.06", "--json")
    assert code == 0 and json.loads(out)["ordering_ok"]


def test_trace_solve_q(capsys, tmp_path):
    code, out, _ = run(capsys, "trace", "--nodes", "128", "--samples", "32", "--out", str(tmp_path))
    assert code == 0 and (tmp_path / "trace.csv").exists() and "max |p - P|" in out
    code, out, _ = run(capsys, "solve", "--nodes", "128", "--grid", "11", "--out", str(tmp_path))
    assert code == 0 and (tmp_path / "field.csv").exists()
    code, out, _ = run(capsys, "q", "--nodes", "128", "--spacing", "0.1", "--json")
    assert code == 0 and json.loads(out)["Q"] > 0


def test_trace_radius_inside_is_usage_error(capsys):
    code, _, err = run(capsys, "trace", "--nodes", "64", "--radius", "1.5")
    assert code == 2 and "outside" in err


def test_validate(capsys):
    code, out, _ = run(capsys, "validate")
    assert code == 0 and "FAIL" not in out and out.count("PASS") == 6


def test_deterministic_json(capsys):
    a = run(capsys, "design", "--f", "-cos4,sin3:0.2", "--json")[1]
    b = run(capsys, "design", "--f", "-cos4,sin3:0.2", "--json")[1]
    assert a == b


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "nearcloak", "zeta", "--n", "2"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "0.125490"
