import csv
import json
import re

import numpy as np
import pytest

from dfi.cli import main
from dfi.core import read_report

FAST = ["--trees", "40", "--m", "10"]


@pytest.fixture
def data_csv(tmp_path):
    rng = np.random.default_rng(0)
    n = 200
    x = rng.standard_normal((n, 3))
    x[:, 1] += 0.5 * x[:, 0]
    y = 2 * x[:, 0] + x[:, 2] + rng.standard_normal(n)
    path = tmp_path / "d.csv"
    np.savetxt(path, np.c_[x, y], delimiter=",", header="a,b,c,y", comments="", fmt="%.12g")
    return path


def analyze(tmp_path, data_csv, *extra, name="r.json"):
    out = tmp_path / name
    code = main(["analyze", "--input", str(data_csv), "--target", "y", "--seed", "42", "--output", str(out), *FAST, *extra])
    return code, out


def test_analyze_writes_valid_report(tmp_path, data_csv, capsys):
    code, out = analyze(tmp_path, data_csv)
    assert code == 0
    rep = read_report(out)
    assert rep.identity_gap() < 1e-10
    assert rep.standardization is not None
    assert rep.config.seed == 42
    assert '"seed": 42' in capsys.readouterr().err


def test_analyze_is_byte_reproducible(tmp_path, data_csv):
    _, a = analyze(tmp_path, data_csv, name="a.json")
    _, b = analyze(tmp_path, data_csv, name="b.json")
    assert a.read_bytes() == b.read_bytes()


def test_analyze_thread_count_does_not_change_output(tmp_path, data_csv):
    _, a = analyze(tmp_path, data_csv, "--threads", "1", name="a.json")
    _, b = analyze(tmp_path, data_csv, "--threads", "4", name="b.json")
    assert a.read_bytes() == b.read_bytes()


def test_analyze_groups_additive(tmp_path, data_csv):
    groups = tmp_path / "g.json"
    groups.write_text(json.dumps({"ab": ["a", "b"], "c": ["c"]}))
    code, out = analyze(tmp_path, data_csv, "--groups", str(groups))
    assert code == 0
    rep = read_report(out)
    assert sum(e.estimate for _, e in rep.groups) == pytest.approx(rep.total_attributed, abs=1e-12)


def test_analyze_baselines_and_options(tmp_path, data_csv):
    code, out = analyze(tmp_path, data_csv, "--with-loco", "--with-cpi", "--transport", "triangular", "--no-standardize", "--verbose")
    assert code == 0
    data = json.loads(out.read_text())
    assert set(data["baselines"]) == {"loco", "cpi"}
    assert "standardization" not in data
    assert data["config"]["transport_kind"] == "triangular"
    assert "l" in data["extras"]["folds"][0]


def test_analyze_kernel_requires_bandwidth(tmp_path, data_csv):
    with pytest.raises(SystemExit) as info:
        analyze(tmp_path, data_csv, "--regressor", "kernel")
    assert info.value.code == 2
    code, _ = analyze(tmp_path, data_csv, "--regressor", "kernel", "--bandwidth", "0.8")
    assert code == 0


def test_analyze_singular_exits_1(tmp_path, capsys):
    rng = np.random.default_rng(1)
    u = rng.standard_normal(50)
    path = tmp_path / "dup.csv"
    np.savetxt(path, np.c_[u, u, u + rng.standard_normal(50)], delimiter=",", header="a,a2,y", comments="", fmt="%.12g")
    code = main(["analyze", "--input", str(path), "--target", "y", "--seed", "1", "--output", str(tmp_path / "r.json")])
    assert code == 1
    err = capsys.readouterr().err
    assert "singular" in err and "a, a2" in err


def test_analyze_missing_target_exits_1(tmp_path, data_csv):
    code = main(["analyze", "--input", str(data_csv), "--target", "nope", "--seed", "1", "--output", str(tmp_path / "r.json")])
    assert code == 1


def test_usage_errors_exit_2(tmp_path):
    for argv in (
        ["simulate", "--model", "m9", "--n", "100", "--reps", "1", "--seed", "1", "--out", str(tmp_path)],
        ["simulate", "--model", "m1", "--rho", "1.5", "--n", "100", "--reps", "1", "--seed", "1", "--out", str(tmp_path)],
        ["analyze", "--input", "x.csv", "--seed", "1", "--output", "r.json"],
        ["analyze", "--bogus"],
        [],
    ):
        with pytest.raises(SystemExit) as info:
            main(argv)
        assert info.value.code == 2


def test_simulate_writes_outputs(tmp_path):
    out = tmp_path / "s"
    code = main(["simulate", "--model", "m3", "--rho", "0.2", "--oracle", "--n", "1000", "--reps", "4", "--seed", "1", "--out", str(out)])
    assert code == 0
    rows = list(csv.reader(open(out / "replicates.csv")))
    assert rows[0] == ["replicate", "feature", "estimate", "se", "ci_lo", "ci_hi", "covered"]
    assert len(rows) == 1 + 4 * 5
    summary = json.loads((out / "summary.json").read_text())
    assert summary["model"] == "m3" and summary["reps"] == 4
    first = (out / "summary.json").read_bytes()
    main(["simulate", "--model", "m3", "--rho", "0.2", "--oracle", "--n", "1000", "--reps", "4", "--seed", "1", "--out", str(out)])
    assert (out / "summary.json").read_bytes() == first


def test_simulate_coverage_forest(tmp_path):
    out = tmp_path / "c"
    code = main(["simulate", "--model", "m1", "--n", "200", "--reps", "2", "--coverage", "--trees", "30", "--m", "5",
                 "--seed", "3", "--out", str(out)])
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert 0 <= summary["null_coverage"] <= 1


def test_report_svg_structure(tmp_path, data_csv):
    _, rep = analyze(tmp_path, data_csv)
    svg = tmp_path / "r.svg"
    assert main(["report", "--input", str(rep), "--out", str(svg)]) == 0
    text = svg.read_text()
    assert text.count('class="bar"') == 3
    assert text.count('class="errorbar"') == 3
    assert 'width="800" height="500"' in text
    assert "total =" in text
    # byte-identical apart from the generator line
    svg2 = tmp_path / "r2.svg"
    main(["report", "--input", str(rep), "--out", str(svg2)])
    strip = lambda t: re.sub(r"<!-- generator.*-->", "", t)
    assert strip(text) == strip(svg2.read_text())


def test_report_csv_and_negative_clamp(tmp_path, data_csv):
    _, rep = analyze(tmp_path, data_csv)
    data = json.loads(rep.read_text())
    data["attributed"][2]["estimate"] = -0.25
    rep.write_text(json.dumps(data))
    out = tmp_path / "r.csv"
    assert main(["report", "--input", str(rep), "--format", "csv", "--out", str(out)]) == 0
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["name", "estimate", "se", "ci_lo", "ci_hi", "z", "p"]
    assert float(rows[3][1]) == -0.25
    svg = tmp_path / "r.svg"
    main(["report", "--input", str(rep), "--out", str(svg)])
    bars = re.findall(r'class="bar"[^>]*height="([0-9.]+)"', svg.read_text())
    assert float(bars[2]) == 0.0


def test_report_study_summary(tmp_path):
    out = tmp_path / "s"
    main(["simulate", "--model", "m1", "--rho", "0.8", "--oracle", "--n", "500", "--reps", "3", "--seed", "1", "--out", str(out)])
    svg = tmp_path / "s.svg"
    assert main(["report", "--input", str(out / "summary.json"), "--out", str(svg)]) == 0
    assert svg.read_text().count('class="bar"') == 10


def test_report_malformed_input(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"latent": [')
    assert main(["report", "--input", str(bad), "--out", str(tmp_path / "o.svg")]) == 1
    assert "byte offset" in capsys.readouterr().err
    bad.write_text('{"hello": 1}')
    assert main(["report", "--input", str(bad), "--out", str(tmp_path / "o.svg")]) == 1
