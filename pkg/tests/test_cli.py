import csv
import subprocess
import sys

import numpy as np
import pytest

from edgesr.cli import main
from edgesr.imageio import Image, load_image, save_image
from edgesr.synthetic import write_corpus

TINY = ["--set", "arch.channels=4", "--set", "arch.edge_channels=4", "--set", "arch.blocks=1",
        "--set", "arch.d_base=4", "--set", "arch.d_max=8", "--set", "arch.d_blocks=3",
        "--set", "data.patch_lr=8", "--set", "data.batch_size=2", "--set", "data.patches_per_epoch=2",
        "--set", "epochs_pretrain=1", "--set", "epochs_full=1"]


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    write_corpus(root / "hr", 3, seed=4, height=40, width=40)
    return root


def test_no_command_is_usage_error(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    assert main(["eval", "--sr", "a", "--hr", "b", "--bogus"]) == 1
    assert "bogus" in capsys.readouterr().err


def test_bad_config_key_is_usage_error(tmp_path, data):
    assert main(["train", "--data", str(data / "hr"), "--out", str(tmp_path), "--set", "nope=1"]) == 1
    assert main(["train", "--data", str(data / "hr"), "--out", str(tmp_path), "--set", "noequals"]) == 1
    assert main(["train", "--out", str(tmp_path)]) == 1


def test_train_then_sr_then_eval(tmp_path, data, capsys):
    out = tmp_path / "run"
    assert main(["train", "--data", str(data / "hr"), "--out", str(out)] + TINY) == 0
    final = out / "final.eatsr"
    assert final.exists() and (out / "train.log").exists()

    write_corpus(tmp_path / "lr", 2, seed=9, height=10, width=10)
    assert main(["sr", "--ckpt", str(final), "--in", str(tmp_path / "lr"), "--out", str(tmp_path / "sr"),
                 "--scale", "4"]) == 0
    assert load_image(tmp_path / "sr" / "img_000.png").height == 40
    assert main(["sr", "--ckpt", str(final), "--in", str(tmp_path / "lr"), "--out", str(tmp_path / "sr2"),
                 "--scale", "2"]) == 2
    assert "scale 2" in capsys.readouterr().err

    write_corpus(tmp_path / "ref", 2, seed=10, height=40, width=40)
    capsys.readouterr()
    assert main(["eval", "--sr", str(tmp_path / "sr"), "--hr", str(tmp_path / "ref"),
                 "--csv", str(tmp_path / "m.csv")]) == 0
    table = capsys.readouterr().out
    assert "img_000.png" in table and "mean" in table
    rows = list(csv.reader(open(tmp_path / "m.csv")))
    assert rows[0] == ["name", "psnr_db", "ssim"] and len(rows) == 3


def test_train_stop_and_resume(tmp_path, data):
    out = tmp_path / "run"
    assert main(["train", "--data", str(data / "hr"), "--out", str(out), "--stop-after", "1"] + TINY) == 0
    assert not (out / "final.eatsr").exists()
    assert main(["train", "--resume", str(out / "state.eatsr")]) == 0
    assert (out / "final.eatsr").exists()


def test_train_on_empty_dir_is_data_error(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert main(["train", "--data", str(tmp_path / "empty"), "--out", str(tmp_path / "o")] + TINY) == 2
    assert "no .png" in capsys.readouterr().err


def test_config_file(tmp_path, data):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("epochs_pretrain = 0\nepochs_full = 0\narch.channels = 4\narch.blocks = 1\ndata.patch_lr = 8\n")
    assert main(["train", "--config", str(cfg), "--data", str(data / "hr"), "--out", str(tmp_path / "o")]) == 0


def test_ablate(tmp_path, data):
    args = ["ablate", "--variant", "no_adversarial", "--data", str(data / "hr"), "--out", str(tmp_path / "a")]
    assert main(args + TINY) == 0
    assert main(["ablate", "--variant", "no_magic", "--data", "x", "--out", "y"]) == 1


def test_eval_missing_counterpart(tmp_path, capsys):
    write_corpus(tmp_path / "hr", 2, seed=1, height=16, width=16)
    write_corpus(tmp_path / "sr", 1, seed=1, height=16, width=16)
    assert main(["eval", "--sr", str(tmp_path / "sr"), "--hr", str(tmp_path / "hr")]) == 2
    assert "img_001.png" in capsys.readouterr().err


def test_corrupt_checkpoint_is_data_error(tmp_path, capsys):
    (tmp_path / "bad.eatsr").write_bytes(b"xxxxxxxxxx")
    save_image(Image(np.zeros((8, 8, 3))), tmp_path / "in.png")
    assert main(["sr", "--ckpt", str(tmp_path / "bad.eatsr"), "--in", str(tmp_path / "in.png"),
                 "--out", str(tmp_path / "o")]) == 2
    assert "magic" in capsys.readouterr().err


def test_edges(tmp_path, capsys):
    data = np.zeros((24, 24, 3))
    data[:, 12:] = 255
    save_image(Image(data), tmp_path / "step.png")
    assert main(["edges", "--in", str(tmp_path / "step.png"), "--out", str(tmp_path / "e.png")]) == 0
    e = load_image(tmp_path / "e.png").data[..., 0]
    assert set(np.unique(e)) == {0.0, 255.0}
    assert "edge pixels" in capsys.readouterr().out
    assert main(["edges", "--in", str(tmp_path / "step.png"), "--out", str(tmp_path / "e.png"),
                 "--low", "0.5", "--high", "0.2"]) == 1
    assert main(["edges", "--in", str(tmp_path / "missing.png"), "--out", str(tmp_path / "e.png")]) == 2


def test_gradcheck_single_module(capsys):
    assert main(["gradcheck", "--module", "losses", "--seeds", "1"]) == 0
    assert "losses" in capsys.readouterr().out
    assert main(["gradcheck", "--module", "nothing"]) == 1


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "edgesr.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "gradcheck" in proc.stdout
