import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from micromorph.cli import COLUMNS, RunConfig, execute, main, run
from micromorph.config import dumps
from micromorph.scenarios import builtin

SHIPPED = Path(__file__).resolve().parent.parent / "scenarios"

BAD_YAML = "name: broken\nmaterial: a: b\n"

# (arguments, expected exit status); "{bad}" is replaced by a malformed file
GOLDEN = [
    (["run", "integrals", "--scenario", "a"], 0),
    (["run", "check-balance", "--scenario", "d", "--points", "30"], 0),
    (["run", "check-el", "--scenario", str(SHIPPED / "anisotropic.yaml")], 0),
    (["run", "integrals", "--scenario", "isotropic-kappa0"], 0),
    (["run", "check-balance", "--scenario", "d", "--points", "30", "--energy-without-sources"], 1),
    (["run", "integrals", "--scenario", "a", "--surface-order", "2", "--volume-order", "2"], 1),
    (["run", "--scenario", "{bad}"], 2),
    (["run", "--scenario", "no-such-scenario"], 2),
    (["run", "integrals", "--scenario", "a", "--surface-order", "1"], 2),
    (["run", "bogus", "--scenario", "a"], 2),
    (["run", "--scenario", "a", "--points", "0"], 2),
    (["validate", "--scenario", "{bad}"], 2),
    (["validate", "--scenario", "full"], 0),
    (["list-scenarios"], 0),
]


@pytest.fixture
def bad_file(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text(BAD_YAML)
    return str(p)


@pytest.mark.parametrize("argv,status", GOLDEN, ids=[" ".join(a) for a, _ in GOLDEN])
def test_exit_status_contract(argv, status, bad_file, capsys):
    assert main([a.replace("{bad}", bad_file) for a in argv]) == status


def test_parse_error_writes_no_report(tmp_path, bad_file, capsys):
    out = tmp_path / "report.csv"
    assert main(["run", "--scenario", bad_file, "--out", str(out), "--format", "csv"]) == 2
    assert not out.exists()
    err = capsys.readouterr().err
    assert "bad.yaml:2:12: YAML syntax error" in err


def test_failures_are_named(capsys):
    main(["run", "check-balance", "--scenario", "d", "--points", "20", "--energy-without-sources"])
    err = capsys.readouterr().err
    assert "check failed: balance.momentum[exact]" in err


def _csv(argv, capsys):
    assert main(argv + ["--format", "csv"]) in (0, 1)
    return capsys.readouterr().out


def test_csv_columns_and_digits(capsys):
    text = _csv(["run", "integrals", "--scenario", "a"], capsys)
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == COLUMNS
    byq = {(r[0], r[1]): r for r in rows[1:]}
    m = byq[("M", "")]
    assert abs(float(m[2])) > 1e-3
    assert len(m[2].lstrip("-").replace(".", "").split("e")[0].lstrip("0")) == 17
    for k in "123":
        assert byq[("J", k)][-1] == "true"
    assert byq[("J.conservation", "max")][-1] == "true"
    assert byq[("M.kappa_m", "")][-1] == "true"


def test_scenario_a_integrals_report():
    rep = execute(RunConfig("a", ("integrals",)), builtin("a"))
    rows = {r.label: r for r in rep.rows}
    for q in ("J", "L"):
        assert max(abs(rows[f"{q}[{k}]"].surface_value) for k in "123") <= 1e-8
    assert abs(rows["M"].surface_value) > 1e-3
    assert rep.status == 0


def test_report_contents_for_all_commands():
    rep = execute(RunConfig("b", points=20), builtin("b"))
    q = {r.quantity for r in rep.rows}
    assert {"el.force", "el.couple", "balance.momentum", "balance.angular", "balance.scaling",
            "isotropy_bracket", "J", "L", "M", "refinement"} <= q
    assert {r.component for r in rep.rows if r.quantity.startswith("balance")} == {"exact", "fd"}
    bracket = next(r for r in rep.rows if r.quantity == "isotropy_bracket")
    assert bracket.tolerance is None and bracket.discrepancy > 1e-3


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_machine_readable_reports_are_byte_identical(fmt, tmp_path):
    outs = []
    for k in range(2):
        p = tmp_path / f"r{k}.{fmt}"
        assert main(["run", "--scenario", "d", "--points", "20", "--seed", "7", "--format", fmt, "--out", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_seed_changes_sample_points(tmp_path):
    a, b = (execute(RunConfig("b", ("check-el",), points=10, seed=s), builtin("b")) for s in (1, 2))
    assert [r.discrepancy for r in a.rows] != [r.discrepancy for r in b.rows]


def test_json_report(capsys):
    assert main(["run", "check-el", "--scenario", "c", "--format", "json", "--points", "10"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["status"] == 0 and data["failures"] == []
    assert data["scenario"] == "inhomogeneous" and data["seed"] == 0
    assert [r["quantity"] for r in data["rows"]] == ["el.force", "el.couple"]


def test_table_format(capsys):
    assert main(["run", "check-el", "--scenario", "b", "--points", "10"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("scenario anisotropic") and out.rstrip().endswith("all checks passed")


def test_list_and_validate(capsys, tmp_path):
    main(["list-scenarios"])
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("isotropic (a):")
    p = tmp_path / "s.yaml"
    p.write_text(dumps(builtin("c")))
    assert main(["validate", "--scenario", str(p)]) == 0
    assert capsys.readouterr().out.startswith("inhomogeneous: valid")


def test_run_function_with_streams():
    out, err = io.StringIO(), io.StringIO()
    assert run(RunConfig("a", ("check-el",), format="csv", points=5), out, err) == 0
    assert out.getvalue().startswith(",".join(COLUMNS)) and err.getvalue() == ""


def test_runconfig_validation():
    with pytest.raises(ValueError):
        RunConfig("a", ("nope",))
    with pytest.raises(ValueError):
        RunConfig("a", format="xml")


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "micromorph.cli", "run", "check-el", "--scenario", "a", "--points", "5", "--format", "csv"],
        capture_output=True, text=True, timeout=120,
    )
    assert res.returncode == 0
    assert res.stdout.splitlines()[0] == ",".join(COLUMNS)
