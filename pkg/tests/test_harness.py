import json

import pytest

from overlaysim.cli import main
from overlaysim.harness import (
    CSV_HEADER,
    ConfigError,
    ExperimentConfig,
    expand_seeds,
    run_experiment,
    run_seed,
    write_csv,
)


def test_csv_header_frozen():
    assert CSV_HEADER == [
        "protocol", "n", "m", "seed", "phases", "rounds", "total_messages", "total_bits",
        "max_nodewise_ratio", "success", "invariant_failures", "wall_time_ms",
    ]


def test_expand_seeds():
    assert expand_seeds({"base": 3, "count": 2}) == [3, 4]
    assert expand_seeds("5:3") == [5, 6, 7]
    assert expand_seeds("1,4") == [1, 4]
    assert expand_seeds([2]) == [2]


@pytest.mark.parametrize("bad", [
    {"protocol": "nope"},
    {"sizes": []},
    {"sizes": [0]},
    {"seeds": []},
    {"gamma_factor": 0},
    {"b_bits": 0},
])
def test_config_errors(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig(**bad).validate()


def test_unknown_field():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"protcol": "merge_star"})


@pytest.mark.parametrize("protocol", ["merge_star", "star_to_topology", "hybrid_wft", "expander_reduce", "rc2t_bench"])
def test_runs_are_byte_identical(protocol):
    def once():
        cfg = ExperimentConfig(protocol=protocol, sizes=[32], seeds=[0, 1])
        records, summary = run_experiment(cfg)
        return write_csv(records), summary
    a, sa = once()
    b, _ = once()
    assert a == b
    assert sa["all_success"]
    assert a.splitlines()[0] == ",".join(CSV_HEADER)


def test_master_seed_from_environment(monkeypatch):
    monkeypatch.setenv("OVERLAYSIM_SEED", "11")
    cfg = ExperimentConfig().validate()
    assert cfg.master_seed == 11
    assert run_seed(11, 0) != 0 and run_seed(0, 5) == 5


def test_cli_run(tmp_path, capsys):
    out = tmp_path / "r.csv"
    summary = tmp_path / "s.json"
    code = main(["run", "--protocol", "merge_star", "--sizes", "16,32", "--seeds", "0:2",
                 "--out", str(out), "--summary", str(summary)])
    assert code == 0
    assert len(out.read_text().splitlines()) == 5
    assert json.loads(summary.read_text())["all_success"]
    assert "n=16" in capsys.readouterr().err


def test_cli_config_file(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"protocol": "rc2t_bench", "sizes": [64], "seeds": {"base": 0, "count": 2}}))
    assert main(["run", "--config", str(p)]) == 0
    assert capsys.readouterr().out.startswith("protocol,")


@pytest.mark.parametrize("argv", [
    ["--suite", "bogus"],
    ["run", "--seeds", ""],
    ["run", "--protocol", "nope"],
])
def test_cli_usage_errors(argv):
    with pytest.raises(SystemExit) as e:
        main(argv)
    assert e.value.code == 2


def test_cli_verify_small_suite(capsys):
    assert main(["--suite", "determinism"]) == 0
    assert "[PASS] C14" in capsys.readouterr().out


def test_edgelist_input(tmp_path):
    from overlaysim.graphs import generate, save_edgelist

    p = tmp_path / "g.txt"
    save_edgelist(generate("caterpillar", 40, {}, 1), p)
    cfg = ExperimentConfig(protocol="hybrid_wft", family="edgelist", params={"path": str(p)}, seeds=[0, 1])
    records, summary = run_experiment(cfg)
    assert [r.n for r in records] == [40, 40] and summary["all_success"]
    with pytest.raises(ConfigError):
        ExperimentConfig(family="edgelist").validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(family="edgelist", params={"path": str(tmp_path / "missing")}).validate()
