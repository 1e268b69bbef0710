"""CLI: exit codes, output contracts, determinism."""

import json

import pytest

from commitlotto.cli import main
from commitlotto.scaffold import KernelId, load_tournament, tournament_to_json


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# build


def test_build_stats_to_stdout(capsys):
    code, out, _ = run_cli(capsys, "build", "--n", "4")
    assert code == 0
    doc = json.loads(out)
    assert doc["materialized"] is True
    assert doc["stats"]["total_offchain"] == 56
    assert doc["stats"]["on_chain_worst_case"] == 10


def test_build_rejects_bad_player_count(capsys):
    code, _, err = run_cli(capsys, "build", "--n", "3")
    assert code == 2
    assert "power of two" in err


def test_build_large_plain_is_statistics_only(capsys, tmp_path):
    out_path = tmp_path / "stats.json"
    code, _, _ = run_cli(capsys, "build", "--n", "16", "--out", str(out_path))
    assert code == 0
    doc = json.loads(out_path.read_text())
    assert doc["materialized"] is False
    assert doc["stats"]["total_offchain"] == 23922356
    # asking for the body set at that size is a config error
    code, _, err = run_cli(
        capsys, "build", "--n", "16", "--scaffold-out", str(tmp_path / "t.json")
    )
    assert code == 2
    assert "statistics-only" in err


def test_build_multiinput_large_n_materializes(capsys, tmp_path):
    scaffold = tmp_path / "m16.json"
    code, out, _ = run_cli(
        capsys,
        "build", "--n", "16", "--mode", "multiinput", "--scaffold-out", str(scaffold),
    )
    assert code == 0
    assert json.loads(out)["stats"]["total_offchain"] == 665
    assert scaffold.exists()


def test_build_writes_dot(capsys, tmp_path):
    dot = tmp_path / "g.dot"
    code, _, _ = run_cli(capsys, "build", "--n", "2", "--dot", str(dot))
    assert code == 0
    assert dot.read_text().startswith("digraph")


def test_unknown_flag_is_config_error(capsys):
    assert run_cli(capsys, "build", "--turbo")[0] == 2
    assert run_cli(capsys, "frobnicate")[0] == 2


# verify


@pytest.fixture()
def scaffold_file(capsys, tmp_path):
    path = tmp_path / "scaffold.json"
    code, _, _ = run_cli(
        capsys, "build", "--n", "4", "--out", str(tmp_path / "s.json"),
        "--scaffold-out", str(path),
    )
    assert code == 0
    return path


def test_verify_accepts_honest_scaffold(capsys, scaffold_file):
    code, out, _ = run_cli(capsys, "verify", str(scaffold_file))
    assert code == 0
    assert "scaffold ok" in out


def test_verify_rejects_doctored_scaffold(capsys, scaffold_file, tmp_path):
    t = load_tournament(scaffold_file.read_text())
    donor = t.kernels[KernelId(0, 0, 0)]
    victim = t.kernels[KernelId(0, 1, 0)]
    doc = tournament_to_json(t)
    for k in doc["kernels"]:
        if (k["level"], k["match"], k["combo"]) == (0, 1, 0):
            k["left_commit"] = donor.left_commit.hex()
    bad = tmp_path / "doctored.json"
    bad.write_text(json.dumps(doc))
    code, out, err = run_cli(capsys, "verify", str(bad))
    assert code == 3
    assert "DuplicateCommitment" in out
    assert "do not sign" in err


def test_verify_from_any_seat(capsys, scaffold_file):
    for seat in range(4):
        code, _, _ = run_cli(capsys, "verify", str(scaffold_file), "--player", str(seat))
        assert code == 0
    assert run_cli(capsys, "verify", str(scaffold_file), "--player", "7")[0] == 3


# run


def test_run_prints_trial_json(capsys):
    code, out, _ = run_cli(
        capsys, "run", "--backend", "ethereum", "--n", "4", "--seed", "cli-run"
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["committed"] is True
    assert sorted(doc["payoffs"]) == [-1, -1, -1, 3]


def test_run_rejects_bad_strategy_mix(capsys):
    code, _, err = run_cli(
        capsys,
        "run", "--backend", "ethereum", "--n", "4", "--strategies", "force-timeout",
    )
    assert code == 2
    assert "configuration error" in err


# sweep


def test_sweep_outputs_are_byte_identical_across_runs(capsys, tmp_path):
    csvs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        code, out, _ = run_cli(
            capsys,
            "sweep", "--backend", "bitcoin-plain", "--n", "2",
            "--trials", "20", "--seed", "sweep-det",
            "--csv", str(path), "--json", str(tmp_path / (name + ".json")),
        )
        assert code == 0
        csvs.append(path.read_bytes())
    assert csvs[0] == csvs[1]
    a = json.loads((tmp_path / "a.csv.json").read_text())
    b = json.loads((tmp_path / "b.csv.json").read_text())
    assert a == b
    assert a["trials"] == 20 and a["zero_sum_ok"] is True


def test_sweep_require_dominance_fails_on_rigged_table(capsys):
    # two colluders against nobody honest at n=2: the lower index always wins,
    # so seat 1 never does; with honest absent the check is vacuous and passes
    code, _, err = run_cli(
        capsys,
        "sweep", "--backend", "ethereum", "--n", "2",
        "--strategies", "coalition,coalition", "--trials", "10",
        "--require-dominance",
    )
    assert code == 0
    assert "no honest players" in err


def test_sweep_reports_dominance_lines(capsys):
    # report lines land on stderr so `--json -` stays parseable
    code, out, err = run_cli(
        capsys,
        "sweep", "--backend", "ethereum", "--n", "2",
        "--trials", "200", "--seed", "dom-cli", "--require-dominance",
    )
    assert code == 0
    assert "player 0 (honest)" in err and "player 1 (honest)" in err
    json.loads(out)


def test_sweep_dominance_failure_exits_three(capsys):
    # 11 committed trials cannot split a 2-player bracket 50/50, so one
    # honest frequency sits strictly below 0.5 and eps=0 must trip
    code, _, err = run_cli(
        capsys,
        "sweep", "--backend", "ethereum", "--n", "2",
        "--trials", "11", "--eps", "0.0", "--require-dominance",
    )
    assert code == 3
    assert "dominance check FAILED" in err


# costs


def test_costs_reports_zero_collateral(capsys):
    code, out, _ = run_cli(capsys, "costs", "--backend", "bitcoin-plain", "--n", "4")
    assert code == 0
    doc = json.loads(out)
    assert doc["collateral_beyond_bet"] == 0
    assert doc["offchain_signed_per_party"] == 56
    assert doc["onchain_tx_count"] == 10


def test_costs_statistics_only_for_big_plain(capsys):
    code, out, _ = run_cli(capsys, "costs", "--backend", "bitcoin-plain", "--n", "16")
    assert code == 0
    doc = json.loads(out)
    assert doc["materialized"] is False
    assert doc["onchain_tx_count"] == 46


# export-dot


def test_export_dot_from_fresh_build(capsys):
    code, out, _ = run_cli(capsys, "export-dot", "--n", "2")
    assert code == 0
    assert out.startswith("digraph")


def test_export_dot_from_file(capsys, scaffold_file, tmp_path):
    out_path = tmp_path / "g.dot"
    code, _, _ = run_cli(
        capsys, "export-dot", "--scaffold", str(scaffold_file), "--out", str(out_path)
    )
    assert code == 0
    assert "k1_0_8" in out_path.read_text()


def test_export_dot_refuses_unbuildable_size(capsys):
    assert run_cli(capsys, "export-dot", "--n", "16")[0] == 2
