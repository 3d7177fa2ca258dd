import json
import math

import pytest

from zipper import cli

FIG4_FLAGS = ["--k", "2", "--q", "8", "--epsilon", repr(2 * math.log(2)), "--J", repr(math.log(2))]


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_two_roots_at_figure_point(capsys):
    code, out, _ = run(["solve", *FIG4_FLAGS, "--T", "2"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["solutions"]["count"] == 2
    assert len(rep["b_values"]) == 2
    assert set(rep["eta_c"]) == {"general_formula", "numeric_double_root", "k2_formula"}
    assert rep["critical_temperature"]["t_cr"] == pytest.approx(1.0)


def test_solve_above_threshold_has_no_roots(capsys):
    code, out, _ = run(["solve", "--k", "2", "--theta", "2", "--eta", "0.5"], capsys)
    assert code == 0 and json.loads(out)["solutions"]["count"] == 0


def test_solve_chain_family_summary(capsys):
    code, out, _ = run(["solve", "--k", "1", "--J", "inf", "--z1", "1"], capsys)
    assert code == 0 and json.loads(out)["family"]["name"] == "geometric"
    code, out, _ = run(["solve", "--k", "1", "--J", "inf", "--z1", "1", "--theta", "2", "--n", "3"], capsys)
    values = json.loads(out)["family"]["law"]["values_by_depth"]
    assert values == {"1": 1.0, "2": 0.5, "3": 0.25}


def test_solve_level_family(capsys):
    code, out, _ = run(["solve", "--k", "2", "--q", "2", "--epsilon", "1", "--J", "inf", "--T", "1", "--alpha1", "1"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["family"]["name"] == "level"


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", *FIG4_FLAGS, "--T", "2", "--beta", "0.5"],
        ["solve", "--k", "2"],
        ["solve", "--q", "2"],
        ["solve", *FIG4_FLAGS, "--T", "-1"],
        ["scan", *FIG4_FLAGS],
        ["bogus"],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    try:
        code = cli.main(argv)
    except SystemExit as exc:
        code = exc.code
    capsys.readouterr()
    assert code == 2


def test_unwritable_output_is_an_error(tmp_path, capsys):
    code, _, err = run(["solve", "--k", "2", "--theta", "1", "--eta", "0.1", "--out", str(tmp_path / "no" / "x.json")], capsys)
    assert code == 2 and "error" in err


def test_fig4_scan_csv(tmp_path, capsys):
    path = tmp_path / "fig4.csv"
    assert run(["scan", "--figure", "fig4", "--out", str(path)], capsys)[0] == 0
    meta, rows = cli.read_csv_rows(path.read_text())
    assert len(rows) == 201
    assert rows[0]["T"] == 1.0 and rows[-1]["T"] == 3.0
    assert rows[0]["z_minus"] == rows[0]["z_plus"] and rows[0]["t_cr_flag"] == 1
    assert all(r["n_tigm"] == 2 for r in rows[1:])
    assert float(meta["t_cr"]) == pytest.approx(1.0)
    assert not list(tmp_path.glob(".zipper-*"))


def test_csv_roundtrips_through_json(tmp_path, capsys):
    csv_path, json_path = tmp_path / "a.csv", tmp_path / "a.json"
    flags = [*FIG4_FLAGS, "--t-min", "0.5", "--t-max", "3", "--points", "11"]
    run(["scan", *flags, "--out", str(csv_path)], capsys)
    run(["scan", *flags, "--format", "json", "--out", str(json_path)], capsys)
    _, csv_rows = cli.read_csv_rows(csv_path.read_text())
    json_rows = json.loads(json_path.read_text())["rows"]
    assert len(csv_rows) == len(json_rows) == 11
    for a, b in zip(csv_rows, json_rows):
        assert a == {key: (None if v is None else float(v)) for key, v in b.items()}
    ns = [r["n_tigm"] for r in csv_rows]
    assert 0 in ns and 2 in ns


def test_scan_is_deterministic(tmp_path, capsys):
    texts = []
    for name in ("x.csv", "y.csv"):
        run(["scan", "--figure", "fig4", "--out", str(tmp_path / name)], capsys)
        texts.append((tmp_path / name).read_text())
    assert texts[0] == texts[1]


def test_fig3_preset(capsys):
    code, out, _ = run(["scan", "--figure", "fig3"], capsys)
    meta, rows = cli.read_csv_rows(out)
    assert code == 0 and float(meta["eta_c"]) == pytest.approx(0.375)
    assert min(r["f_eta_0.5"] for r in rows) > 0
    assert min(r["f_eta_0.25"] for r in rows) < 0


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "p.toml"
    cfg.write_text('k = 2\nq = 8\nepsilon = 1.3862943611198906\nJ = 0.6931471805599453\nT = 2.0\n')
    code, out, _ = run(["solve", "--config", str(cfg)], capsys)
    assert code == 0 and json.loads(out)["solutions"]["count"] == 2
    code, out, _ = run(["solve", "--config", str(cfg), "--T", "0.5"], capsys)
    assert json.loads(out)["solutions"]["count"] == 0


def test_verify_empty_battery(tmp_path, capsys):
    path = tmp_path / "empty.json"
    path.write_text("[]")
    code, out, _ = run(["verify", "--battery", str(path)], capsys)
    assert code == 0 and json.loads(out) == {"passed": True, "cases": []}


def test_verify_negative_control_exits_1(tmp_path, capsys):
    path = tmp_path / "b.json"
    path.write_text(json.dumps([{"k": 2, "q": 1, "theta": 0.5, "eta": 0.2, "n": [2, 3]}]))
    assert run(["verify", "--battery", str(path)], capsys)[0] == 0
    code, out, err = run(["verify", "--battery", str(path), "--perturb", "1e-3"], capsys)
    assert code == 1 and "FAIL" in err
    assert not json.loads(out)["passed"]


def test_verify_default_battery(capsys):
    code, out, _ = run(["verify", "--samples", "4000"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["passed"] and len(rep["cases"]) > 100


def test_sample_determinism_and_marginal(capsys):
    argv = ["sample", "--k", "2", "--theta", "0.5", "--eta", "0.2", "--root", "minus", "--n", "3", "--count", "20000"]
    first = run([*argv, "--seed", "4"], capsys)[1]
    assert first == run([*argv, "--seed", "4"], capsys)[1]
    assert first != run([*argv, "--seed", "5"], capsys)[1]
    rep = json.loads(first)
    p = rep["level1_open_exact"]
    sigma = math.sqrt(p * (1 - p) / (2 * rep["count"]))
    assert abs(rep["open_fraction_by_level"][1] - p) < 5 * sigma
    assert len(rep["records"]) == 10


def test_sample_cold_is_closed(capsys):
    code, out, _ = run(["sample", "--k", "2", "--q", "2", "--epsilon", "3", "--J", "2", "--beta", "10", "--n", "3", "--count", "500"], capsys)
    assert code == 0 and max(json.loads(out)["open_fraction_by_level"]) < 1e-3
