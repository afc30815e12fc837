import math
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from stretchsum import cli, harness
from stretchsum.errors import ConfigError, NumericError
from stretchsum.weights import FamilyKind

PAIR_CFG = """\
family.kind = explicit
family.weights = 1
n_grid = 1
x = 4
samples = 20000
seed = 11
estimator = both
"""

SMALL_CRAMER = """\
# tiny study for fast checks
dist.kappa = 1
dist.r = 0.5
family.kind = cramer
n_grid = 5, 10, 20, 40
x = 3
estimator = largest_jump
samples = 20000
seed = 99
"""


def _cfg(text, tmp_path, name="c.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_example_config():
    cfg = harness.load_config(Path(__file__).parents[1] / "configs" / "cramer_study.cfg")
    assert cfg.family.kind == FamilyKind.CRAMER
    assert cfg.n_grid == (25, 100, 400, 1600)
    assert cfg.x == 3.0 and cfg.samples == 10**6
    assert cfg.bound_config.epsilon == 0.1
    assert cfg.limit.D == 1.0


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("n_grid =\nx = 3\n", "empty"),
        ("n_grid = 10, 5\nx = 3\n", "increasing"),
        ("n_grid = 10\nx = 2\n", "regime"),
        ("n_grid = 10\nx = 3\nestimator = fancy\n", "estimator"),
        ("n_grid = 10\nx = 3\nfoo = 1\n", "unknown key"),
        ("n_grid = 10\nx = 3\nx = 4\n", "duplicate"),
        ("n_grid = 10\nx 3\n", "expected"),
        ("n_grid = 10\nx = 3\nseed = -1\n", "seed"),
        ("n_grid = 10\nx = 3\ndist.r = 1.5\n", "r"),
    ],
)
def test_config_errors(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        harness.config_from_dict(harness.parse_kv(text))


def test_explicit_family_from_file(tmp_path):
    (tmp_path / "w.txt").write_text("0.6\n0.4\n")
    path = _cfg("family.kind = explicit\nfamily.path = w.txt\nn_grid = 1\nx = 3\n", tmp_path)
    cfg = harness.load_config(path)
    assert list(cfg.family.explicit) == [0.6, 0.4]


def test_single_row_explicit_study(tmp_path):
    cfg = harness.load_config(_cfg(PAIR_CFG, tmp_path))
    report = harness.run_study(cfg)
    assert [r["estimator"] for r in report.rows] == ["naive", "largest_jump"]
    for row in report.rows:
        assert row["predicted_rate"] == pytest.approx(-math.sqrt(2.0))
        assert row["normalized_rate"] == row["log_p_hat"]
        assert row["normalized_rate"] == pytest.approx(-2.0, abs=4 * row["stderr"] / row["p_hat"])
    assert report.rows[1]["log_p_hat"] == pytest.approx(-2.0, rel=1e-15)


@pytest.fixture(scope="module")
def small_study(tmp_path_factory):
    path = _cfg(SMALL_CRAMER, tmp_path_factory.mktemp("study"))
    cfg = harness.load_config(path)
    return path, cfg, harness.run_study(cfg)


def test_csv_schema(small_study, tmp_path):
    _, cfg, report = small_study
    text = harness.format_csv(report.rows)
    lines = text.splitlines()
    assert lines[0].split(",") == list(harness.CSV_COLUMNS)
    assert len(lines) == 1 + len(cfg.n_grid)
    out = tmp_path / "s.csv"
    harness.write_csv(report.rows, out)
    back = harness.read_csv(out)
    assert [r["p_hat"] for r in back] == [r["p_hat"] for r in report.rows]
    assert all(r["elapsed_seconds"] == 0.0 for r in back)
    assert "n=40" in report.summary


def test_rows_respect_bound_sandwich(small_study):
    for row in small_study[2].rows:
        rel = row["stderr"] / row["p_hat"]
        assert row["log_lower_bound"] <= row["log_p_hat"] + 4 * rel
        assert row["log_p_hat"] - 4 * rel <= row["log_upper_bound"]
        assert row["predicted_rate"] == pytest.approx(-1.0)


def test_rerun_is_bit_identical(small_study):
    _, cfg, report = small_study
    again = harness.run_study(cfg, workers=3)
    assert harness.format_csv(again.rows) == harness.format_csv(report.rows)


def test_row_seeds_are_distinct():
    seeds = {harness.row_seed(1, n, e) for n in (1, 2, 3) for e in ("naive", "largest_jump")}
    assert len(seeds) == 6


def test_svg_structure(small_study):
    rows = small_study[2].rows
    svg = harness.emit_svg(rows)
    root = ET.fromstring(svg.encode())
    ns = {"s": "http://www.w3.org/2000/svg"}
    lines = root.findall("s:polyline", ns)
    assert len(lines) == 2
    ref = [p for p in lines if p.get("class") == "reference"][0]
    assert float(ref.get("data-value")) == rows[0]["predicted_rate"]
    ys = {pt.split(",")[1] for pt in ref.get("points").split()}
    assert len(ys) == 1
    data = [p for p in lines if p.get("class") == "data"][0]
    assert len(data.get("points").split()) == len(rows)


def test_svg_skipped_for_one_row(caplog):
    row = dict.fromkeys(harness.CSV_COLUMNS, 0.0)
    assert harness.emit_svg([row]) is None
    assert "SVG skipped" in caplog.text


# -- CLI ---------------------------------------------------------------------


def test_cli_tail(capsys):
    assert cli.main(["tail", "4"]) == 0
    t, p = capsys.readouterr().out.split()
    assert float(p) == math.exp(-2.0)


def test_cli_rate_and_regime_exit_code(capsys):
    assert cli.main(["rate", "--x", "6"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(2.0)
    assert cli.main(["rate", "--x", "2"]) == cli.EXIT_CONFIG


def test_cli_missing_config_exit_code(tmp_path):
    assert cli.main(["study", "--config", str(tmp_path / "nope.cfg")]) == cli.EXIT_CONFIG
    bad = _cfg("n_grid =\nx = 3\n", tmp_path)
    assert cli.main(["study", "--config", str(bad)]) == cli.EXIT_CONFIG
    assert cli.main(["tail", "--workers", "0", "1"]) == cli.EXIT_CONFIG


def test_cli_study_and_svg(tmp_path, capsys):
    cfg = _cfg(SMALL_CRAMER.replace("samples = 20000", "samples = 5000"), tmp_path)
    out, svg = tmp_path / "out.csv", tmp_path / "out.svg"
    assert cli.main(["study", "--config", str(cfg), "--out", str(out), "--svg", str(svg)]) == 0
    first = out.read_text()
    ET.fromstring(svg.read_bytes())
    out2 = tmp_path / "again.csv"
    assert cli.main(["study", "--config", str(cfg), "--out", str(out2), "--workers", "4"]) == 0
    assert out2.read_text() == first
    svg2 = tmp_path / "re.svg"
    assert cli.main(["svg", str(out), "--out", str(svg2)]) == 0
    assert svg2.read_text() == svg.read_text()


def test_cli_bounds_and_estimate(tmp_path, capsys):
    cfg = _cfg(SMALL_CRAMER, tmp_path)
    assert cli.main(["bounds", "--config", str(cfg), "--n", "10", "20"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3 and lines[0].startswith("n\ta_max")
    assert cli.main(["estimate", "--config", str(cfg), "--n", "10", "--samples", "1000",
                     "--estimator", "naive", "--seed", "5"]) == 0
    row = capsys.readouterr().out.strip().splitlines()[1].split("\t")
    assert row[0] == "10" and row[1] == "naive" and row[-1] == "5"


def test_cli_numeric_error_exit_code(monkeypatch):
    def boom(args):
        raise NumericError("quadrature did not converge")

    monkeypatch.setattr(cli, "cmd_tail", boom)
    assert cli.main(["tail", "1"]) == cli.EXIT_NUMERIC


def test_cli_svg_unreadable_csv(tmp_path):
    assert cli.main(["svg", str(tmp_path / "missing.csv")]) == cli.EXIT_CONFIG
