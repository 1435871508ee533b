from __future__ import annotations

import json

import pytest

from ertransfer.cli import main
from ertransfer.data import save_dataset, save_labels
from ertransfer.pairs import load_pairs, save_pairs
from ertransfer.synthetic import generate_text_relations


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "synth"
    assert main(["synth", "--generator", "same", "--param", "n_source=300", "--param", "n_target=300",
                 "--out", str(out), "--seed", "1"]) == 0
    return out


@pytest.fixture
def target_split(tmp_path, synth_dir):
    target = load_pairs(synth_dir / "target.csv")
    lab, unl, test = target.take(range(60)), target.take(range(60, 200)).without_labels(), target.take(range(200, 300))
    paths = {}
    for name, pool in (("lab", lab), ("unl", unl), ("test", test)):
        paths[name] = tmp_path / f"target_{name}.csv"
        save_pairs(pool, paths[name])
    return paths


def test_synth_writes_pools(synth_dir):
    assert len(load_pairs(synth_dir / "source.csv")) == 300


@pytest.mark.parametrize("cmd", [
    lambda s, t: ["train-not", "--target-labeled", str(t["lab"])],
    lambda s, t: ["train-nvt", "--source", str(s / "source.csv")],
    lambda s, t: ["train-s1", "--source", str(s / "source.csv"), "--target-unlabeled", str(t["unl"])],
    lambda s, t: ["train-s2", "--source", str(s / "source.csv"), "--target-labeled", str(t["lab"])],
    lambda s, t: ["train-s3", "--source", str(s / "source.csv"), "--target-labeled", str(t["lab"]),
                  "--target-unlabeled", str(t["unl"])],
])
def test_training_subcommands(tmp_path, synth_dir, target_split, cmd):
    out = tmp_path / "model"
    assert main(cmd(synth_dir, target_split) + ["--out", str(out)]) == 0
    assert (out / "model.json").is_file() and (out / "training_report.json").is_file()


def test_estimate_with_label_oracle(tmp_path, synth_dir, target_split, capsys):
    model_dir = tmp_path / "m"
    main(["train-not", "--target-labeled", str(target_split["lab"]), "--out", str(model_dir)])
    test = load_pairs(target_split["test"])
    oracle = tmp_path / "oracle.csv"
    oracle.write_text("left_id,right_id,label\n" + "".join(
        f"{l},{r},{y}\n" for (l, r), y in zip(test.keys(), test.labels.tolist())))
    capsys.readouterr()
    assert main(["estimate", "--model", str(model_dir / "model.json"), "--pairs", str(target_split["test"]),
                 "--oracle", str(oracle), "--budget", "30"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["queries"] == 30


def test_relatedness_and_select_source(synth_dir, capsys):
    capsys.readouterr()
    assert main(["relatedness", "--source", str(synth_dir / "source.csv"), "--target",
                 str(synth_dir / "target.csv"), "--runs", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "related"
    assert main(["select-source", "--candidate", f"a={synth_dir / 'source.csv'}",
                 "--target", str(synth_dir / "target.csv"), "--runs", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["ranking"][0]["name"] == "a"


def test_encode_relations(tmp_path):
    left, right, labels = generate_text_relations(15, seed=0)
    save_dataset(left, tmp_path / "l.csv")
    save_dataset(right, tmp_path / "r.csv")
    save_labels(labels, tmp_path / "lab.csv")
    assert main(["encode", "--left", str(tmp_path / "l.csv"), "--right", str(tmp_path / "r.csv"),
                 "--labels", str(tmp_path / "lab.csv"), "--out", str(tmp_path)]) == 0
    pairs = load_pairs(tmp_path / "pairs.csv")
    assert len(pairs) > 0 and set(pairs.labels.tolist()) <= {0, 1}


def test_run_and_report(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("run.scenario = adequate_limited\nsynth.n_source = 300\nsynth.n_target = 300\n")
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["report", str(out), "--json"]) == 0
    s = json.loads(capsys.readouterr().out)
    assert s["delta_f1"]["NvT"] == s["f1"] - s["baseline_f1"]["NvT"]


def test_global_flags_after_subcommand(tmp_path):
    out = tmp_path / "x"
    assert main(["synth", "--param", "n_source=50", "--param", "n_target=50", "--seed", "2", "--out", str(out)]) == 0
    assert (out / "target.csv").is_file()


def test_exit_codes(tmp_path, capsys):
    assert main(["report", str(tmp_path)]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("run.scenario = adequate_nothing\nsplit.target_labeled_fraction = 0.2\n")
    assert main(["run", "--config", str(bad)]) == 2
    assert "no target labels" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["no-such-command"])
