import json

import numpy as np
import pytest

from mdvrp_lab.cli import main
from mdvrp_lab.formats import read_instance, read_solution
from mdvrp_lab.milp import parse_lp
from mdvrp_lab.nn import load, save
from mdvrp_lab.partitioner import init_partitioner_params
from mdvrp_lab.tsp_policy import init_tsp_params


@pytest.fixture
def inst_file(tmp_path):
    path = tmp_path / "i.txt"
    assert main(["gen", "--n", "7", "--d", "2", "--capacity", "15", "--seed", "3", "--out", str(path)]) == 0
    return path


@pytest.fixture
def ckpts(tmp_path):
    p, r = tmp_path / "p.ckpt", tmp_path / "r.ckpt"
    save(init_partitioner_params(np.random.default_rng(0), 8, 1, 2), p)
    save(init_tsp_params(np.random.default_rng(1), 8, 1, 2), r)
    return p, r


def test_gen_and_validate(inst_file, tmp_path):
    inst = read_instance(inst_file.read_text())
    assert inst.n_customers == 7 and inst.capacity == 15
    sol = tmp_path / "s.txt"
    assert main(["solve", "--instance", str(inst_file), "--method", "cluster", "--out", str(sol)]) == 0
    assert main(["validate", "--instance", str(inst_file), "--solution", str(sol)]) == 0
    sol.write_text(sol.read_text().replace("COST", "COST 1 +"))
    assert main(["validate", "--instance", str(inst_file), "--solution", str(sol)]) == 1


def test_gen_many(tmp_path):
    out = tmp_path / "set"
    assert main(["gen", "--n", "5", "--d", "1", "--count", "3", "--out", str(out)]) == 0
    assert len(list(out.iterdir())) == 3


def test_oracle_not_worse_than_cluster(inst_file, tmp_path):
    inst = read_instance(inst_file.read_text())
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    main(["oracle", "--instance", str(inst_file), "--out", str(a)])
    main(["solve", "--instance", str(inst_file), "--method", "cluster", "--out", str(b)])
    cost = lambda p: float(p.read_text().split("COST")[1])
    assert cost(a) <= cost(b) + 1e-9
    read_solution(a.read_text(), inst)


def test_solve_deepmdv_deterministic(inst_file, ckpts, tmp_path):
    p, r = ckpts
    outs = []
    for name in ("x.txt", "y.txt"):
        out = tmp_path / name
        assert main(["solve", "--instance", str(inst_file), "--checkpoint", str(p), "--mode", "greedy",
                     "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    neural = tmp_path / "n.txt"
    assert main(["solve", "--instance", str(inst_file), "--checkpoint", str(p), "--router", "neural",
                 "--router-checkpoint", str(r), "--k-percent", "30", "50", "--out", str(neural)]) == 0
    read_solution(neural.read_text(), read_instance(inst_file.read_text()))


def test_solve_sampling(inst_file, ckpts, tmp_path):
    p, _ = ckpts
    out = tmp_path / "s.txt"
    assert main(["solve", "--instance", str(inst_file), "--checkpoint", str(p), "--mode", "sample",
                 "--samples", "8", "--k", "3", "--out", str(out)]) == 0


def test_missing_checkpoint_is_an_error(inst_file):
    with pytest.raises(SystemExit):
        main(["solve", "--instance", str(inst_file), "--method", "deepmdv"])


def test_bad_instance_returns_2(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("DEPOTS 1\n0 0\nCUSTOMERS 1 CAPACITY 0\n1 1 1\n")
    assert main(["oracle", "--instance", str(bad)]) == 2
    assert "capacity" in capsys.readouterr().err


def test_bench_and_sensitivity(inst_file, ckpts, tmp_path):
    p, _ = ckpts
    out = tmp_path / "b.csv"
    assert main(["bench", "--instances", str(inst_file), "--methods", "oracle", "cluster", "random",
                 "--reference", "cluster", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "instance_id,method,objective,runtime_ms,gap_percent,status"
    assert len(lines) == 1 + 3 + 3
    sens = tmp_path / "s.csv"
    assert main(["sensitivity", "--instances", str(inst_file), "--checkpoint", str(p),
                 "--out", str(sens)]) == 0
    assert len(sens.read_text().splitlines()) == 1 + 3 + 3


def test_export_milp(inst_file, tmp_path):
    out = tmp_path / "m.lp"
    assert main(["export-milp", "--instance", str(inst_file), "--vehicles", "3", "--out", str(out)]) == 0
    lp = parse_lp(out.read_text())
    assert len([r for r in lp.rows if r.name.startswith("cover_")]) == 7


def test_train_step1(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"epochs": 1, "batches_per_epoch": 1, "batch_size": 4, "tsp_nodes": 5,
                               "eval_set_size": 4, "dim": 8, "layers": 1, "heads": 2}))
    out = tmp_path / "r.ckpt"
    assert main(["train", "--step", "1", "--config", str(cfg), "--seed", "2",
                 "--log", str(tmp_path / "log.csv"), "--out", str(out)]) == 0
    assert load(out).meta["kind"] == "tsp"
    assert (tmp_path / "log.csv").exists()
