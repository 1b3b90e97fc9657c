import json
import subprocess
import sys

import numpy as np
import pytest

from keyslt.archive import read_archive
from keyslt.cli import main


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_inspect_dist_rows_sum_to_one(capsys, tmp_path):
    code, out, err = run(["inspect-dist", "--T", 100, "--l_p", 17], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "k,prob"
    rows = [line.split(",") for line in lines[1:]]
    assert len(rows) == 100
    assert [int(k) for k, _ in rows] == list(range(100))
    assert abs(sum(float(p) for _, p in rows) - 1.0) < 1e-9
    assert err.startswith("kurtosis=")
    code, _, _ = run(["inspect-dist", "--T", 10, "--raw", "-o", tmp_path / "d.csv"], capsys)
    assert code == 0 and len((tmp_path / "d.csv").read_text().splitlines()) == 11


def test_inspect_dist_bad_lp_is_input_error(capsys):
    code, _, err = run(["inspect-dist", "--T", 10, "--l_p", 4], capsys)
    assert code == 2 and "l_p" in err


@pytest.mark.parametrize("argv", [[], ["bogus"], ["inspect-dist"], ["inspect-dist", "--T", "x"]])
def test_usage_errors_exit_1(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1


def test_module_entry_point_exit_code(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "keyslt", "train", "--set", f"out_dir={tmp_path}"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert "features.bin" in proc.stderr


def test_train_missing_archive_exit_2(capsys, tmp_path):
    code, _, err = run(["train", "--set", f"archive={tmp_path / 'none.bin'}"], capsys)
    assert code == 2 and "none.bin" in err


def test_unknown_config_key_exit_2(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("epochs = 3\nlearning_rate = 0.1\n")
    code, _, err = run(["train", "--config", cfg], capsys)
    assert code == 2 and "learning_rate" in err


@pytest.fixture(scope="module")
def toy(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy")
    assert main(["synth", "--out", str(root / "data"), "--videos", "5", "--vocab-size", "4", "--seed", "1"]) == 0
    return root


def test_preprocess_toy_shape_and_echo(toy, capsys):
    cfg = toy / "run.cfg"
    cfg.write_text("manifest = data/manifest.tsv\nout_dir = out\n")
    code, out, _ = run(["preprocess", "--config", cfg], capsys)
    assert code == 0
    head, feats = read_archive(toy / "out" / "features.bin")
    assert feats.shape == (5, head["N"], 110)
    assert f"(5, {head['N']}, 110)" in out
    echoed = json.loads((toy / "out" / "config.resolved.json").read_text())
    assert echoed["normalization"] == "customized" and echoed["l_p"] == 17
    assert echoed["manifest"] == str(toy / "data" / "manifest.tsv")


def test_preprocess_rerun_same_checksum(toy, capsys):
    args = ["preprocess", "--set", f"manifest={toy / 'data' / 'manifest.tsv'}", "--set", f"out_dir={toy / 'again'}"]
    _, first, _ = run(args, capsys)
    _, second, _ = run(args, capsys)
    digest = first.split("sha256 ")[1].split()[0]
    assert digest in second


def test_corrupt_keypoint_file_reports_file_and_line(toy, capsys):
    data = toy / "data"
    bad = sorted((data / "keypoints").glob("*.jsonl"))[0]
    lines = bad.read_text().splitlines()
    lines[2] = lines[2][:40]
    broken = toy / "broken"
    broken.mkdir()
    (broken / "bad.jsonl").write_text("\n".join(lines) + "\n")
    (broken / "manifest.tsv").write_text("vbad\tbad.jsonl\tw00 w01\ttrain\n")
    code, _, err = run(["preprocess", "--set", f"manifest={broken / 'manifest.tsv'}",
                        "--set", f"out_dir={toy / 'broken_out'}"], capsys)
    assert code == 2
    assert "bad.jsonl" in err and ":3" in err and "vbad" in err


def test_small_chain(tmp_path, capsys):
    data = tmp_path / "data"
    assert run(["synth", "--out", data, "--videos", 20, "--vocab-size", 5, "--seed", 2], capsys)[0] == 0
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"manifest": "data/manifest.tsv", "out_dir": "run", "hidden_dim": 8,
                               "embed_dim": 4, "epochs": 2, "batch_size": 8}))
    assert run(["preprocess", "--config", cfg], capsys)[0] == 0
    code, out, _ = run(["train", "--config", cfg], capsys)
    assert code == 0 and "epochs 2" in out
    log = (tmp_path / "run" / "loss_log.csv").read_text().splitlines()
    assert log[0] == "epoch,loss" and len(log) == 3
    model = tmp_path / "run" / "model.json"
    hyp = tmp_path / "run" / "hyp.tsv"
    assert run(["translate", "--model", model, "--archive", tmp_path / "run" / "features.bin",
                "--split", "test", "-o", hyp], capsys)[0] == 0
    assert hyp.read_text().splitlines()[0] == "video_id\thypothesis\treference"
    metrics = tmp_path / "run" / "metrics.csv"
    code, out, _ = run(["evaluate", "--hyp", hyp, "-o", metrics], capsys)
    assert code == 0 and out.startswith("bleu4 ")
    text = metrics.read_text().splitlines()
    assert text[0] == "id,bleu4,rouge_l,meteor_exact" and text[-1].startswith("CORPUS,")
    # a single keypoint file goes through the checkpoint's stored preprocessing
    one = sorted((data / "keypoints").glob("*.jsonl"))[0]
    code, out, _ = run(["translate", "--model", model, "--input", one], capsys)
    assert code == 0 and out.startswith(one.stem + "\t")
    code, out, _ = run(["translate", "--model", model, "--input", data / "manifest.tsv", "--split", "test"], capsys)
    archive_rows = hyp.read_text().splitlines()[1:]
    assert [line.split("\t")[:2] for line in out.strip().splitlines()] == \
        [r.split("\t")[:2] for r in archive_rows]


def test_evaluate_missing_file_exit_2(capsys, tmp_path):
    assert run(["evaluate", "--hyp", tmp_path / "none.tsv"], capsys)[0] == 2


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "0.1.0" in capsys.readouterr().out


def test_loss_log_values_parse_as_floats(tmp_path, capsys):
    data = tmp_path / "data"
    run(["synth", "--out", data, "--videos", 10, "--vocab-size", 3], capsys)
    common = ["--set", f"manifest={data / 'manifest.tsv'}", "--set", f"out_dir={tmp_path / 'run'}",
              "--set", "hidden_dim=4", "--set", "embed_dim=2", "--set", "epochs=1"]
    assert run(["preprocess", *common], capsys)[0] == 0
    assert run(["train", *common], capsys)[0] == 0
    rows = (tmp_path / "run" / "loss_log.csv").read_text().splitlines()[1:]
    assert all(np.isfinite(float(r.split(",")[1])) for r in rows)


def test_example_config_loads():
    from pathlib import Path

    from keyslt.config import PipelineConfig, load_config

    path = Path(__file__).resolve().parent.parent / "configs" / "synth.cfg"
    cfg = load_config(path)
    defaults = PipelineConfig()
    for key in ("normalization", "selector", "l_p", "n_rule", "lr", "dropout", "epochs", "reverse_frames"):
        assert getattr(cfg, key) == getattr(defaults, key)
    assert Path(cfg.manifest) == path.parent / "../data/synth/manifest.tsv"
