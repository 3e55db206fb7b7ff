import csv
import json

import numpy as np
import pytest

from swarmform.cli import main
from swarmform.esdf import Box
from swarmform.gradcheck import CHECKS, check_gradients
from swarmform.metrics import generate_scenarios
from swarmform.scenario import ArenaConfig, MapConfig, ScenarioConfig, SimConfig


def write_single(path, sealed=False, name=None):
    obstacles = [Box((2, -10, -1), (2.4, 10, 5))] if sealed else []
    name = name or ("sealed" if sealed else "open")
    cfg = ScenarioConfig(name, [[0, 0, 1.2]], [0], [[0, 0, 0]], [4, 0, 1.2],
                         obstacles=obstacles, map=MapConfig((-1, -3, -0.2), (12, 6, 2.8), 0.1),
                         arena=ArenaConfig(0.0, 2.6), sim=SimConfig(time_limit=12.0))
    cfg.save(path)
    return path


def test_gen_is_deterministic(tmp_path):
    assert main(["gen", "sparse", "20", "42", "--out", str(tmp_path / "a")]) == 0
    assert main(["gen", "sparse", "20", "42", "--out", str(tmp_path / "b")]) == 0
    a = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert len(a) == 20
    for name in a:
        assert (tmp_path / "a" / name).read_text() == (tmp_path / "b" / name).read_text()


def test_gen_usage_and_io_errors(tmp_path):
    assert main(["gen", "extreme", "3", "1", "--out", str(tmp_path)]) == 2
    assert main(["gen", "sparse", "0", "1", "--out", str(tmp_path)]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["gen", "sparse", "1", "1", "--out", str(blocker / "sub")]) == 1
    assert main([]) == 2


def test_run_missing_config(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2
    assert main(["run", "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 2


def test_run_sealed_wall_exit_3(tmp_path):
    cfg = write_single(tmp_path / "sealed.json", sealed=True)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 3
    metrics = json.loads((tmp_path / "out" / "metrics.json").read_text())
    assert metrics["reason"] == "timeout" and metrics["success"] is False


def test_run_hexagon_sparse(tmp_path):
    gen = tmp_path / "gen"
    assert main(["gen", "sparse", "1", "1", "--out", str(gen)]) == 0
    out = tmp_path / "run"
    assert main(["run", "--config", str(gen / "sparse-000.json"), "--out", str(out)]) == 0
    rows = list(csv.reader(open(out / "violations.csv")))
    assert rows == [["t", "kind", "a", "b", "distance"]]
    for name in ("trace.csv", "series.csv", "planner_log.csv", "timing.json", "metrics.json", "config.json"):
        assert (out / name).is_file()
    # eval recomputes the same series from the written trace
    ev = tmp_path / "eval"
    assert main(["eval", str(out), "--out", str(ev)]) == 0
    assert (ev / "sparse-000" / "series.csv").read_text() == (out / "series.csv").read_text()


def test_sweep_mixed_and_empty_glob(tmp_path):
    d = tmp_path / "cfg"
    d.mkdir()
    write_single(d / "one-000.json", name="one-000")
    write_single(d / "one-001.json", sealed=True, name="one-001")
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(d / "*.json"), "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out / "summary.csv")))
    assert len(rows) == 1
    r = rows[0]
    assert r["scenario"] == "one" and r["runs"] == "2" and r["successes"] == "1"
    assert r["failures"] == "one-001"
    # a lone agent has no formation error to report
    assert json.loads((out / "one-000" / "metrics.json").read_text())["e_dist"] is None
    assert r["e_dist(m^2)"] == "nan"
    assert main(["sweep", "--config", str(tmp_path / "none-*.json"), "--out", str(out)]) == 2


def test_seed_override(tmp_path):
    cfg = generate_scenarios("sparse", 1, 0)[0]
    cfg.save(tmp_path / "c.json")
    out = tmp_path / "o"
    main(["run", "--config", str(tmp_path / "c.json"), "--seed", "99", "--out", str(out)])
    assert json.loads((out / "config.json").read_text())["seed"] == 99


def test_check_gradients_cli(tmp_path, capsys):
    assert main(["check-gradients", "--instances", "8", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "gradcheck.txt").read_text()
    for term in CHECKS:
        assert term in text
    assert "max_rel_err" in text and "all checks passed" in text


@pytest.mark.parametrize("term", CHECKS)
def test_sign_flip_is_detected(term):
    def flip(g):
        g = np.array(g, copy=True)
        g.flat[int(np.argmax(np.abs(g)))] *= -1
        return g
    report = check_gradients(seed=0, instances=5, terms=(term,), inject={term: flip})
    assert not report.ok
