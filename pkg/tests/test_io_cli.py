from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from voiagg import fixtures, io
from voiagg.chain import TransitionModel
from voiagg.cli import main
from voiagg.partition import ProbabilisticPartition


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_chain_round_trip(tmp_path, small_chain):
    model, _ = small_chain
    for fmt in ("csv", "json"):
        path = tmp_path / f"chain.{fmt}"
        io.write_chain(model, path, fmt)
        assert np.array_equal(io.read_chain(path).pi, model.pi)


def test_partition_round_trip(tmp_path):
    part = ProbabilisticPartition(np.array([[0.1, 0.9], [1 / 3, 2 / 3]]))
    io.write_partition(part, tmp_path / "p.csv")
    assert np.array_equal(io.read_partition(tmp_path / "p.csv").psi, part.psi)


def test_fixtures_match_builders():
    for name in fixtures.NAMES:
        assert fixtures.load(name) == fixtures.build(name)
    pi = fixtures.load("duplicated").pi
    for a, b in fixtures.DUPLICATED_PAIRS:
        assert np.array_equal(pi[a], pi[b])


def test_bad_header(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("0.5,0.5\n0.5,0.5\n")
    assert main(["validate", "--input", str(path)]) == 2


def test_validate_reports_code(tmp_path, capsys):
    path = tmp_path / "c.csv"
    path.write_text("n=2\n0.6,0.6\n0.5,0.5\n")
    assert main(["validate", "--input", str(path)]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("row_sum_violation:")


def test_periodic_rejected(tmp_path, capsys):
    path = tmp_path / "c.csv"
    io.write_chain(TransitionModel(np.array([[0.0, 1.0], [1.0, 0.0]])), path)
    assert main(["validate", "--input", str(path)]) == 2
    assert capsys.readouterr().err.startswith("periodic:")


def test_generate_then_validate(tmp_path):
    for kind, extra in (("ncd", ["--blocks", "2,3", "--epsilon", "0.04"]), ("from-limit", ["--gamma", "0.2,0.3,0.5"])):
        out = tmp_path / f"{kind}.csv"
        assert main(["generate", kind, "--output", str(out), "--seed", "3", *extra]) == 0
        assert main(["validate", "--input", str(out)]) == 0


def test_stationary_command(tmp_path, capsys):
    path = str(fixtures.path("ncd4"))
    assert main(["stationary", "--input", path]) == 0
    values = [float(x) for x in capsys.readouterr().out.strip().split(",")]
    assert len(values) == 9 and abs(sum(values) - 1) < 1e-12


def test_aggregate_single_group(tmp_path):
    out = tmp_path / "agg"
    assert main(["aggregate", "--input", str(fixtures.path("ncd4")), "--output-dir", str(out), "--m", "1", "--beta", "2"]) == 0
    assert (out / "phi.csv").read_text().strip() == "1"
    trace = read_csv(out / "trace.csv")
    assert trace[0] == ["iter", "expected_distortion", "mutual_information", "free_energy", "cross_entropy"]
    meta = json.loads((out / "meta.json").read_text())
    assert meta["seed"] == 0 and meta["m"] == 1


def test_aggregate_is_byte_identical(tmp_path):
    args = ["aggregate", "--input", str(fixtures.path("ncd4")), "--m", "3", "--beta", "5", "--seed", "2", "--max-iters", "300"]
    assert main([*args, "--output-dir", str(tmp_path / "a")]) == 0
    assert main([*args, "--output-dir", str(tmp_path / "b")]) == 0
    for name in ("psi.csv", "alpha.csv", "theta.csv", "phi.csv", "trace.csv", "meta.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_aggregate_json_format(tmp_path):
    out = tmp_path / "agg"
    assert main(["aggregate", "--input", str(fixtures.path("ncd4")), "--output-dir", str(out), "--m", "2", "--beta", "3", "--format", "json"]) == 0
    phi = io.read_matrix(out / "phi.json")
    assert phi.shape == (2, 2) and np.allclose(phi.sum(axis=1), 1)


def test_aggregate_needs_beta(tmp_path, capsys):
    assert main(["aggregate", "--input", str(fixtures.path("ncd4")), "--output-dir", str(tmp_path), "--m", "2"]) == 2


def test_oracle_ranking_count(tmp_path):
    chain = tmp_path / "c.csv"
    assert main(["generate", "ncd", "--blocks", "3,3", "--epsilon", "0.02", "--output", str(chain)]) == 0
    out = tmp_path / "oracle"
    assert main(["oracle", "--input", str(chain), "--m", "2", "--output-dir", str(out)]) == 0
    assert len(read_csv(out / "ranking.csv")) - 1 == 31
    assert (out / "best.csv").read_text().strip() == "0,0,0,1,1,1"


def test_sweep_and_auto(tmp_path):
    out = tmp_path / "sweep"
    assert main(["sweep", "--input", str(fixtures.path("ncd4")), "--output-dir", str(out)]) == 0
    rows = read_csv(out / "sweep.csv")
    assert rows[0] == io.SWEEP_HEADER
    ms = [int(r[1]) for r in rows[1:] if r[6] == "false"]
    betas = [float(r[0]) for r in rows[1:] if r[6] == "false"]
    assert betas == sorted(betas) and all(b >= a for a, b in zip(ms, ms[1:]))
    crits = json.loads((out / "criticals.json").read_text())
    assert len(crits) == sum(r[5] == "true" for r in rows[1:])
    meta = json.loads((out / "meta.json").read_text())
    assert meta["knee_m"] == 4 and meta["beta_max"] == 18.0
    auto = tmp_path / "auto"
    assert main(["aggregate", "--input", str(fixtures.path("ncd4")), "--output-dir", str(auto)]) == 0
    assert json.loads((auto / "meta.json").read_text())["knee_m"] == 4


def test_ncd_scaling_command(tmp_path, capsys):
    out = tmp_path / "ncd"
    assert main(["ncd-scaling", "--output-dir", str(out), "--n-seeds", "2", "--epsilons", "0.1,0.05"]) == 0
    rows = read_csv(out / "ncd_scaling.csv")
    assert rows[0] == ["epsilon", "seed", "l1_error"] and len(rows) == 5
    fit = json.loads((out / "ncd_fit.json").read_text())
    assert set(fit) == {"slope", "intercept", "r2", "phi_slope"}
