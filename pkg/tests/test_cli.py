import json
import random

import pytest

from cedensity import cli
from cedensity.errors import BudgetExceeded


def write_cfg(tmp_path, name, cfg):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def density_cfg():
    return {"universe": {"n_max": 1024, "stage_max": 2048},
            "sets": [{"label": "r1", "kind": "dyadic-class", "k": 1},
                     {"label": "none", "kind": "empty"},
                     {"label": "ru", "kind": "residue-union",
                      "modulus": 4, "residues": [0, 1]}]}


def construct_cfg(op_spec):
    return {"universe": {"n_max": 3000, "stage_max": 6000},
            "sets": [{"label": "ev", "kind": "residue-union",
                      "modulus": 2, "residues": [0]}],
            "streams": [{"label": "evs", "set": "ev",
                         "schedule": {"kind": "own-stage"}}],
            "construction": op_spec}


def test_density_csv_values(tmp_path):
    cfg = write_cfg(tmp_path, "c.json", density_cfg())
    out = tmp_path / "out"
    assert cli.main(["density", "--config", cfg, "--out", str(out)]) == 0
    rows = (out / "density_r1.csv").read_text().splitlines()
    assert rows[0] == "n,count,rho_num,rho_den,rho_float"
    assert rows[1024] == "1024,256,1,4,0.25"
    none_rows = (out / "density_none.csv").read_text().splitlines()
    assert all(r.split(",")[1] == "0" for r in none_rows[1:])
    ru_rows = (out / "density_ru.csv").read_text().splitlines()
    assert ru_rows[1000].split(",")[:2] == ["1000", "500"]


def test_reproducible_outputs(tmp_path):
    cfg = write_cfg(tmp_path, "c.json",
                    construct_cfg({"op": "checkpoint-subset",
                                   "stream": "evs", "q": "1/4"}))
    outs = []
    for name in ("o1", "o2"):
        out = tmp_path / name
        assert cli.main(["construct", "--config", cfg,
                         "--out", str(out)]) == 0
        outs.append({p.name: p.read_bytes() for p in out.iterdir()})
    assert outs[0] == outs[1]


def test_check_passes_then_fails_on_mutation(tmp_path):
    cfg = write_cfg(tmp_path, "c.json",
                    construct_cfg({"op": "checkpoint-subset",
                                   "stream": "evs", "q": "1/4"}))
    out = tmp_path / "o"
    assert cli.main(["construct", "--config", cfg, "--out", str(out)]) == 0
    art = out / "artifact.json"
    assert cli.main(["check", "--artifact", str(art)]) == 0
    raw = bytearray(art.read_bytes())
    rng = random.Random(7)
    digits = [i for i, b in enumerate(raw) if chr(b).isdigit()]
    i = rng.choice(digits)
    raw[i] ^= 1  # flip one bit inside a numeric token
    mut = tmp_path / "mut.json"
    mut.write_bytes(bytes(raw))
    assert cli.main(["check", "--artifact", str(mut)]) == 4


def test_config_error_exit_codes(tmp_path):
    bad = write_cfg(tmp_path, "bad.json",
                    {"universe": {"n_max": 0, "stage_max": 1}})
    assert cli.main(["density", "--config", bad, "--out",
                     str(tmp_path / "x")]) == 2
    unparseable = tmp_path / "nope.json"
    unparseable.write_text("{")
    assert cli.main(["density", "--config", str(unparseable), "--out",
                     str(tmp_path / "y")]) == 2
    cfg = construct_cfg({"op": "no-such-op"})
    assert cli.main(["construct", "--config",
                     write_cfg(tmp_path, "c.json", cfg),
                     "--out", str(tmp_path / "z")]) == 2


def test_budget_error_exit_code(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, "c.json",
                    construct_cfg({"op": "checkpoint-subset",
                                   "stream": "evs", "q": "1/4"}))

    def boom(cfg_, sets, streams, deciders):
        raise BudgetExceeded("out of stages", at=7)

    monkeypatch.setattr(cli, "_dispatch_construct", boom)
    assert cli.main(["construct", "--config", cfg,
                     "--out", str(tmp_path / "o")]) == 3


def test_missing_artifact_exit_code(tmp_path):
    assert cli.main(["check", "--artifact",
                     str(tmp_path / "absent.json")]) == 4


def test_metrics_summary(tmp_path):
    cfg = {"universe": {"n_max": 1000, "stage_max": 1000},
           "sets": [{"label": "all", "kind": "naturals"},
                    {"label": "ev", "kind": "residue-union",
                     "modulus": 2, "residues": [0]}],
           "metrics": {"a": "all", "b": "ev", "lo": 2, "hi": 10}}
    out = tmp_path / "m"
    assert cli.main(["metrics", "--config",
                     write_cfg(tmp_path, "c.json", cfg),
                     "--out", str(out)]) == 0
    summary = json.loads((out / "metrics_summary.json").read_text())
    assert summary["sym_min"] == [1, 3]
    assert summary["sym_max"] == [1, 2]
    assert summary["b_subset_of_a"]


def test_generic_summary(tmp_path):
    cfg = {"universe": {"n_max": 500, "stage_max": 500},
           "sets": [{"label": "ev", "kind": "residue-union",
                     "modulus": 2, "residues": [0]}],
           "deciders": [{"label": "p", "kind": "parity"}],
           "generic": {"decider": "p", "set": "ev", "r": "1"}}
    out = tmp_path / "g"
    assert cli.main(["generic", "--config",
                     write_cfg(tmp_path, "c.json", cfg),
                     "--out", str(out)]) == 0
    summary = json.loads((out / "generic_summary.json").read_text())
    assert summary["verdict"] and summary["alpha_estimate"] == [1, 1]


def test_construct_trace_emitted_for_ratio_interval(tmp_path):
    cfg = {"universe": {"n_max": 3000, "stage_max": 3000},
           "deciders": [{"label": "one", "kind": "constant", "value": 1}],
           "construction": {"op": "ratio-interval", "deciders": ["one"]}}
    out = tmp_path / "r"
    assert cli.main(["construct", "--config",
                     write_cfg(tmp_path, "c.json", cfg),
                     "--out", str(out)]) == 0
    lines = [json.loads(x) for x in
             (out / "trace.jsonl").read_text().splitlines()]
    assert any(r.get("resolved", {}).get("state") == "finalized"
               and r["resolved"]["witness"] is not None
               for r in lines if isinstance(r.get("resolved"), dict))
    report = json.loads((out / "verify.json").read_text())
    assert report["ok"]
