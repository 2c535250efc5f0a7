import json
import math

import numpy as np
import pytest

from spbp.bias import apsp_bias
from spbp.harness import cli
from spbp.harness.algorithms import ALGORITHMS, TABLE_ROWS, canonical, resolve
from spbp.harness.config import ExperimentConfig, MobilityConfig, load_config, seed_for
from spbp.harness.experiments import (FIGURES, ResultTable, capacity_sweep, emit_plot_data,
                                      mean_ci, plot_columns, read_plot_data, run_matrix)
from spbp.harness.instances import (InstanceKey, TrainingCorpus, TrainingSettings, load_instance,
                                    make_instance, save_instance)
from spbp.harness.mobility import BiasMaintainer, LinkState, mobility_episode, move_nodes
from spbp.harness.training import loss_progress
from spbp.harness.verify import (conflict_degree_calibration, run_checks,
                                 verify_appendix_inequality)
from spbp.routing import run_episode
from spbp.topology import TEST_INTERFERENCE_RADIUS, build_conflict_graph

SMALL = ExperimentConfig(name="small", sizes=(12,), topologies=1, realizations=2, T=40, seed=3)


def test_seed_streams_distinct_and_stable():
    a = np.random.default_rng(seed_for(0, "flows", 20, 1, 2)).random()
    assert a == np.random.default_rng(seed_for(0, "flows", 20, 1, 2)).random()
    assert a != np.random.default_rng(seed_for(0, "arrivals", 20, 1, 2)).random()
    assert a != np.random.default_rng(seed_for(1, "flows", 20, 1, 2)).random()


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(traffic="poisson")
    with pytest.raises(ValueError):
        ExperimentConfig(sweep="lambda")
    with pytest.raises(ValueError):
        ExperimentConfig(algorithms=("NOPE",))
    assert ExperimentConfig(name="a").result_hash() == ExperimentConfig(name="b").result_hash()
    assert ExperimentConfig(T=10).result_hash() != ExperimentConfig(T=11).result_hash()


def test_load_config_precedence(tmp_path):
    p = tmp_path / "e.toml"
    p.write_text('T = 50\nsizes = [10]\nseed = 4\n[fig4]\nsweep = "multiplier"\n'
                 'sweep_values = [0.5, 1.0]\nalgorithms = ["EDR-delta"]\n'
                 '[mobility]\nenabled = true\nmodes = ["ideal"]\n')
    cfg = load_config(p, "fig4", seed=9, out=None)
    assert cfg.T == 50 and cfg.sizes == (10,) and cfg.seed == 9 and cfg.sweep_values == (0.5, 1.0)
    assert cfg.mobility.enabled and cfg.mobility.modes == ("ideal",)
    assert load_config(p, "fig4", scale="desk").sizes == (20, 40, 60)
    with pytest.raises(ValueError):
        load_config(p, scale="huge")
    bad = tmp_path / "bad.toml"
    bad.write_text("colour = 1\n")
    with pytest.raises(ValueError):
        load_config(bad)


def test_algorithm_table():
    assert len(TABLE_ROWS) == 15 and len(ALGORITHMS) == 15
    assert canonical("EDR-r̄") == "EDR-rbar" and resolve("SP-r̄/(xr)-min").weights.family == "combined"
    s = resolve("EDR-δ", 1.5)
    assert s.weights.multiplier == 1.5 and s.weights.scaling == "min_to_avg_rate"
    assert resolve("SP-1/x").needs_model and not resolve("SP-1/r-min").needs_model
    with pytest.raises(ValueError):
        resolve("SP-rbar/(xr)-max")


def test_instance_determinism_and_roundtrip(tmp_path):
    key = InstanceKey(12, 0, 1)
    a, b = make_instance(SMALL, key), make_instance(SMALL, key)
    assert np.array_equal(a.arrivals.counts, b.arrivals.counts) and a.flows == b.flows
    other = make_instance(SMALL, InstanceKey(12, 0, 0))
    assert np.array_equal(other.g.links, a.g.links) and other.flows != a.flows
    save_instance(a, tmp_path / "i")
    c = load_instance(tmp_path / "i")
    assert c.flows == a.flows and np.array_equal(c.rates.R, a.rates.R)
    assert run_episode(c, resolve("EDR-rbar")).summary() == run_episode(a, resolve("EDR-rbar")).summary()


def test_capacity_instances_share_flow_pairs():
    key = InstanceKey(12, 0, 0)
    a = make_instance(SMALL, key, constant_rate=1.0)
    b = make_instance(SMALL, key, constant_rate=4.0)
    assert [(f.source, f.commodity) for f in a.flows] == [(f.source, f.commodity) for f in b.flows]


def test_training_corpus():
    corpus = TrainingCorpus(TrainingSettings(count=4, T=10))
    first = [inst.meta["radius"] for inst in corpus]
    assert first == [inst.meta["radius"] for inst in corpus]
    assert [inst.g.num_nodes for inst in corpus] == [20, 30, 40, 20]
    assert all(0 <= r <= 0.8 for r in first)


def test_loss_progress():
    assert loss_progress([3, 2, 1, 0.5], 2) == (2.5, 0.75)
    with pytest.raises(ValueError):
        loss_progress([1, 2], 2)


def test_mean_ci():
    a = mean_ci([1.0, 2.0, 3.0, None, float("nan")])
    assert a.n == 3 and a.mean == 2.0 and a.ci == pytest.approx(1.959964 / math.sqrt(3))
    assert mean_ci([5.0]).ci == 0.0 and mean_ci([]).n == 0


def test_run_matrix_resume_and_workers(tmp_path):
    out = tmp_path / "m.jsonl"
    t1 = run_matrix(SMALL, out_path=out)
    assert len(t1.rows) == 4 and not t1.failures
    calls = []
    t2 = run_matrix(SMALL, out_path=out, progress=lambda k, n: calls.append(k))
    assert calls == [] and len(t2.rows) == 4
    assert [r["delivery_rate"] for r in t1.rows] == [r["delivery_rate"] for r in t2.rows]
    t3 = run_matrix(SMALL, workers=2)
    assert [r["latency"] for r in t3.rows] == [r["latency"] for r in t1.rows]
    # a changed config does not reuse stored rows
    t4 = run_matrix(SMALL.replace(T=30), out_path=out)
    assert len(t4.rows) == 4 and all(r["T"] == 30 for r in t4.rows)


def test_error_rows_kept_and_retried(tmp_path):
    out = tmp_path / "m.jsonl"
    cfg = SMALL.replace(realizations=1)
    t = run_matrix(cfg, out_path=out)
    row = dict(t.rows[0], error="boom")
    row.pop("latency")
    lines = [json.dumps(row)]
    out.write_text("\n".join(lines) + "\n")
    t2 = run_matrix(cfg, out_path=out)
    assert not t2.failures and len(t2.rows) == 2


def test_model_required():
    with pytest.raises(ValueError):
        run_matrix(SMALL.replace(algorithms=("SP-1/x",)))


def test_multiplier_sweep_rows():
    cfg = SMALL.replace(algorithms=("EDR-delta", "BP"), sweep="multiplier", sweep_values=(0.5, 1.0),
                        realizations=1)
    t = run_matrix(cfg)
    assert t.x_name == "multiplier" and t.xs("EDR-delta") == [0.5, 1.0]
    lat = {r["x"]: r["latency"] for r in t.rows if r["algorithm"] == "EDR-delta"}
    assert lat[0.5] != lat[1.0]
    bp = [r["latency"] for r in t.rows if r["algorithm"] == "BP"]
    assert bp[0] == bp[1]
    assert t.aggregate("EDR-delta", 0.5, "latency").n == 1


def test_capacity_sweep_small():
    res = capacity_sweep(SMALL.replace(realizations=1), (0.5, 3.0))
    assert set(res.peaks) == {"BP", "EDR-rbar"}
    for alg, (lam, thru) in res.peaks.items():
        assert lam in (0.5, 3.0) and thru == max(a.mean for _, a in res.table.series(alg, "throughput"))


def test_plot_data_roundtrip(tmp_path):
    t = run_matrix(SMALL)
    path = emit_plot_data(t, "fig5", tmp_path)
    rows = read_plot_data(path)
    assert list(rows[0]) == plot_columns("fig5")
    for r in rows:
        agg = t.aggregate(r["algorithm"], int(r["size"]), "latency")
        assert float(r["latency_mean"]) == agg.mean and int(r["n"]) == agg.n
        assert float(r["latency_ci_low"]) == agg.low
    with pytest.raises(ValueError):
        emit_plot_data(t, "fig99", tmp_path)
    with pytest.raises(ValueError):
        emit_plot_data(ResultTable([]), "fig5", tmp_path)
    t.save_jsonl(tmp_path / "t.jsonl")
    again = ResultTable.load_jsonl(tmp_path / "t.jsonl")
    assert again.summary() == t.summary()
    assert set(FIGURES) >= {"fig4", "fig5", "fig6", "fig7", "table1", "table3"}


def test_zero_displacement_mobility_matches_static():
    cfg = SMALL.replace(T=250)
    inst = make_instance(cfg, InstanceKey(12, 0, 0))
    still = MobilityConfig(enabled=True, step_std=0.0, interval=50)
    for name in ("BP", "EDR-rbar"):
        static = run_episode(inst, resolve(name))
        res, info = mobility_episode(inst, resolve(name), "neighbor", cfg=still, rng_seed=1)
        assert res.summary() == static.summary() and info["topology_changes"] == 0


def test_mobility_episode_conserves_and_changes_topology():
    cfg = SMALL.replace(T=400, sizes=(20,))
    inst = make_instance(cfg, InstanceKey(20, 0, 0))
    mob = MobilityConfig(enabled=True, step_std=0.3)
    res, info = mobility_episode(inst, resolve("EDR-rbar"), "neighbor", cfg=mob, rng_seed=2)
    assert info["topology_changes"] >= 1 and info["local_rounds"] >= 1
    assert res.total_injected == res.total_delivered + res.in_flight


def test_neighbor_mode_converges_to_apsp_for_hop_weights():
    inst = make_instance(SMALL.replace(sizes=(25,)), InstanceKey(25, 0, 0))
    rng = np.random.default_rng(0)
    links = LinkState(inst)
    bm = BiasMaintainer(resolve("EDR-rbar"), "neighbor", None, links, inst.rates.mean_rate)
    g = inst.g
    bm.start(g, inst.cg)
    for _ in range(3):
        new_g = move_nodes(g.positions, 1.77, MobilityConfig(step_std=0.4), rng)
        links.adopt(new_g, 0, rng)
        bm.topology_changed(g, new_g, build_conflict_graph(new_g, "unit_disk", TEST_INTERFERENCE_RADIUS))
        g = new_g
        for _ in range(200):
            if not bm.tick(g):
                break
        assert np.allclose(bm.B, apsp_bias(g, bm.delta))


def test_move_nodes_keeps_connectivity():
    inst = make_instance(SMALL.replace(sizes=(20,)), InstanceKey(20, 0, 0))
    rng = np.random.default_rng(5)
    side = math.sqrt(20 / 8.0)
    for _ in range(10):
        g = move_nodes(inst.g.positions, side, MobilityConfig(step_std=0.2), rng)
        assert g is None or (g.is_connected() and g.positions.max() <= side)


def test_verify_checks_small():
    assert verify_appendix_inequality(5000)["passed"]
    reps = run_checks(["reversal_boundary", "scheduler_oracle", "shortest_paths"])
    assert all(r["passed"] for r in reps.values())
    assert 25 < conflict_degree_calibration(TEST_INTERFERENCE_RADIUS, graphs=2) < 45


def test_cli_verify_and_exit_codes(tmp_path, capsys):
    assert cli.main(["verify", "--checks", "reversal_boundary", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "verify.json").exists()
    assert cli.main(["plotdata", str(tmp_path / "missing.jsonl"), "--figure", "fig5"]) == 2
    with pytest.raises(SystemExit):
        cli.main(["run", "--scale", "giant"])


def test_cli_run_generate_plotdata(tmp_path):
    cfgfile = tmp_path / "c.toml"
    cfgfile.write_text('name = "tiny"\nsizes = [10]\ntopologies = 1\nrealizations = 1\nT = 30\n')
    out = tmp_path / "out"
    base = ["--config", str(cfgfile), "--out", str(out), "--seed", "2"]
    assert cli.main(["run", *base, "--algorithms", "BP,EDR-rbar"]) == 0
    assert (out / "tiny.jsonl").exists() and (out / "tiny_summary.json").exists()
    assert cli.main(["plotdata", str(out / "tiny.jsonl"), "--figure", "fig5", "--out", str(out)]) == 0
    assert len(read_plot_data(out / "fig5.csv")) == 2
    assert cli.main(["generate", *base]) == 0
    assert (out / "instances" / "n10-g0-r0" / "traces.npz").exists()
    assert cli.main(["run", *base, "--algorithms", "SP-1/x"]) == 2


def test_inequality_hand_value():
    from spbp.harness.verify import _ineq_sides
    lhs, rhs = _ineq_sides(5.0, 7.0, 1.0, 2.0)
    assert (lhs, rhs) == (9.0, 33.0)
