import io
import json
import subprocess
import sys

import pytest

from tenn.cli import main
from tenn.config import build_config, config_help, load_config, parse_hidden, read_sections
from tenn.errors import ConfigurationError
from tenn.train import load_checkpoint, params_checksum, read_history_csv

TINY = """\
[train]
model = tenn
variant = split
epochs = 3
interior_points = 64
ic_points = 16
batch_size = 64
deterministic = yes

[network]
harmonics = 1
hidden = 6:tanh, 6:sin

[adam]
lr = 0.002

[weights]
flux = 0.5
"""


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out)
    return code, out.getvalue()


@pytest.fixture
def tiny_ini(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(TINY)
    return path


@pytest.fixture
def trained(tmp_path, tiny_ini):
    out = tmp_path / "run"
    code, _ = run("train", "--config", tiny_ini, "--re", 100, "--out", out)
    assert code == 0
    return out


class TestConfigFile:
    def test_values(self, tiny_ini):
        cfg = load_config(tiny_ini)
        assert (cfg.model, cfg.variant, cfg.epochs, cfg.deterministic) == ("tenn", "split", 3, True)
        assert cfg.network.hidden == ((6, "tanh"), (6, "sin"))
        assert cfg.network.heads == "tenn_split"
        assert cfg.adam.lr == 0.002
        assert cfg.weights.as_dict()["flux"] == 0.5 and cfg.weights.as_dict()["curl"] == 1.0

    def test_overrides_win(self, tiny_ini):
        cfg = load_config(tiny_ini, {"epochs": 7, "seed": None})
        assert cfg.epochs == 7 and cfg.seed == 0

    def test_unknown_keys_listed(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[train]\nepochs = 1\nepoch_count = 2\n[extra]\na = 1\n")
        with pytest.raises(ConfigurationError, match="extra, train.epoch_count"):
            read_sections(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            read_sections(tmp_path / "nope.ini")

    @pytest.mark.parametrize("sections", [{"train": {"epochs": "many"}},
                                          {"train": {"deterministic": "maybe"}},
                                          {"network": {"hidden": "wide:tanh"}},
                                          {"adam": {"lr": "fast"}}])
    def test_bad_values(self, sections):
        with pytest.raises(ConfigurationError):
            build_config(sections)

    def test_hidden_parsing(self):
        assert parse_hidden("64:tanh, 32:sin,8") == ((64, "tanh"), (32, "sin"), (8, "tanh"))

    def test_help_lists_every_default(self):
        text = config_help()
        assert "eps_div = 1.0" in text and "hidden = 64:tanh" in text and "lr = 0.001" in text


class TestVerify:
    def test_passes(self):
        code, out = run("verify", "--networks", 4, "--points", 100)
        assert code == 0
        assert out.count("PASS") == 6 and out.rstrip().endswith("verify passed")

    def test_fault_names_lemma1(self):
        code, out = run("verify", "--networks", 2, "--points", 50, "--fault", "levi-civita")
        assert code == 1
        assert "FAIL lemma1" in out
        assert "verify failed: lemma1" in out


class TestTrain:
    def test_missing_config(self, tmp_path, capsys):
        code, _ = run("train", "--config", tmp_path / "absent.ini", "--out", tmp_path / "o")
        assert code == 2
        assert "config file not found" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path, capsys):
        path = tmp_path / "bad.ini"
        path.write_text("[train]\nlearning_rate = 1\n")
        code, _ = run("train", "--config", path, "--out", tmp_path / "o")
        assert code == 2
        assert "train.learning_rate" in capsys.readouterr().err

    def test_outputs(self, trained):
        manifest = json.loads((trained / "manifest.json").read_text())
        assert manifest["config"]["re"] == 100.0
        assert manifest["seed"] == 0 and manifest["epochs_completed"] == 3
        assert manifest["status"] == "completed"
        assert set(manifest["versions"]) == {"tenn", "numpy", "python"}
        lines = (trained / "history.csv").read_text().splitlines()
        assert len(lines) == 1 + 3
        ckpt = load_checkpoint(trained / "model.ckpt")
        assert ckpt.config["variant"] == "split"
        assert manifest["params_sha256"] == params_checksum(ckpt.params)

    def test_deterministic_reruns(self, tmp_path, tiny_ini):
        for name in ("a", "b"):
            assert run("train", "--config", tiny_ini, "--out", tmp_path / name)[0] == 0
        assert ((tmp_path / "a" / "history.csv").read_bytes()
                == (tmp_path / "b" / "history.csv").read_bytes())

    def test_divergence_exit(self, tmp_path):
        path = tmp_path / "hot.ini"
        path.write_text(TINY.replace("flux = 0.5", "flux = 1e15\ncurl = 1e15"))
        code, out = run("train", "--config", path, "--out", tmp_path / "o")
        assert code == 1 and "diverged" in out
        manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert manifest["status"] == "diverged"
        assert read_history_csv(tmp_path / "o" / "history.csv").totals.size == 0


class TestEvalExport:
    def test_eval(self, trained, tmp_path):
        out = tmp_path / "ev"
        code, text = run("eval", "--checkpoint", trained / "model.ckpt", "--grid", "8x6",
                         "--times", "0,1", "--out", out)
        assert code == 0
        assert "overall vorticity rel-L2" in text and "decay ratio" in text
        summary = (out / "summary.csv").read_text().splitlines()
        assert summary[0] == "t,rel_l2,velocity_rel_l2" and len(summary) == 4
        assert len((out / "vorticity_grid.csv").read_text().splitlines()) == 1 + 8 * 6 * 2

    def test_export_pgm(self, trained, tmp_path):
        out = tmp_path / "hm"
        code, _ = run("export", "--checkpoint", trained / "model.ckpt", "--grid", "8x8",
                      "--times", "0,0.5", "--format", "pgm", "--source", "head", "--out", out)
        assert code == 0
        assert len(list(out.glob("*.pgm"))) == 6 and len(list(out.glob("*.pgm.txt"))) == 6

    def test_missing_checkpoint(self, tmp_path, capsys):
        code, _ = run("eval", "--checkpoint", tmp_path / "none.ckpt", "--out", tmp_path / "e")
        assert code == 2
        assert "none.ckpt" in capsys.readouterr().err

    def test_corrupt_checkpoint(self, tmp_path, capsys):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"junk")
        code, _ = run("eval", "--checkpoint", path, "--out", tmp_path / "e")
        assert code == 2
        assert "checkpoint" in capsys.readouterr().err

    def test_bad_grid(self, tmp_path):
        with pytest.raises(SystemExit):
            run("eval", "--checkpoint", tmp_path / "x", "--grid", "64by64")


def test_console_entry_point():
    result = subprocess.run([sys.executable, "-m", "tenn.cli", "--help"], capture_output=True,
                            text=True, check=True)
    for command in ("verify", "train", "eval", "export"):
        assert command in result.stdout


def test_train_help_documents_config_defaults():
    result = subprocess.run([sys.executable, "-m", "tenn.cli", "train", "--help"],
                            capture_output=True, text=True, check=True)
    assert "interior_points = 4096" in result.stdout
