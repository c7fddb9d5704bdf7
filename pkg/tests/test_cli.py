import os

import numpy as np
import pytest

from rpmixer.cli import main
from rpmixer.checkpoint import load_checkpoint
from rpmixer.data import load_binary

TINY_CONFIG = """\
synthetic = true
synthetic_n = 6
synthetic_steps = 240
t_past = 8
t_future = 4
n_block = 2
max_epochs = 2
batch_size = 16
lr = 0.01
seed = 3
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def tiny_config(workdir):
    path = workdir / "config.txt"
    path.write_text(TINY_CONFIG)
    return str(path)


@pytest.fixture(scope="module")
def trained(workdir, tiny_config):
    """One shared training run reused by the evaluate/diagnose tests."""
    out = str(workdir / "train_out")
    assert main(["train", "--config", tiny_config, "--out", out,
                 "--quiet"]) == 0
    return out


class TestGenerate:
    def test_writes_dataset_and_summary(self, tmp_path):
        out = tmp_path / "data.rpmx"
        spec = tmp_path / "spec.txt"
        spec.write_text("n = 4\nsteps = 240\nseed = 2\n")
        assert main(["generate", "--spec", str(spec), "--out", str(out)]) == 0
        raw = load_binary(out)
        assert (raw.n, raw.t) == (4, 240)
        summary = (tmp_path / "data.rpmx.summary.txt").read_text()
        assert "daily_lag_autocorrelation=" in summary

    def test_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a.rpmx", tmp_path / "b.rpmx"
        for out in (a, b):
            assert main(["generate", "--out", str(out), "--seed", "7"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_bad_spec_key(self, tmp_path):
        spec = tmp_path / "spec.txt"
        spec.write_text("bogus = 1\n")
        code = main(["generate", "--spec", str(spec),
                     "--out", str(tmp_path / "x.rpmx")])
        assert code == 2


class TestTrain:
    def test_artifacts_exist(self, trained):
        for name in ("checkpoint.rpck", "history.csv", "config.resolved.txt",
                     "val_metrics.csv", "history.png"):
            assert os.path.exists(os.path.join(trained, name)), name

    def test_history_row_count(self, trained):
        lines = open(os.path.join(trained, "history.csv")).read().splitlines()
        assert lines[0] == "epoch,train_loss,val_mae,lr,seconds"
        assert len(lines) == 1 + 2  # max_epochs = 2

    def test_checkpoint_forward_matches_after_reload(self, trained):
        model, _, _ = load_checkpoint(os.path.join(trained, "checkpoint.rpck"))
        again, _, _ = load_checkpoint(os.path.join(trained, "checkpoint.rpck"))
        x = np.random.default_rng(0).random((3, 6, 8)).astype(np.float32)
        assert np.array_equal(model.forward(x), again.forward(x))

    def test_unknown_config_key_exits_2(self, tmp_path):
        cfg = tmp_path / "bad.txt"
        cfg.write_text("who_knows = 1\n")
        assert main(["train", "--config", str(cfg),
                     "--out", str(tmp_path / "o"), "--quiet"]) == 2


class TestEvaluate:
    def test_checkpoint_outputs(self, trained, workdir):
        out = str(workdir / "eval_out")
        code = main(["evaluate",
                     "--checkpoint", os.path.join(trained, "checkpoint.rpck"),
                     "--out", out, "--quiet"])
        assert code == 0
        for name in ("metrics.csv", "horizon_table.csv", "metrics_per_step.png"):
            assert os.path.exists(os.path.join(out, name)), name

    def test_deterministic_metrics(self, trained, tmp_path):
        ckpt = os.path.join(trained, "checkpoint.rpck")
        texts = []
        for sub in ("a", "b"):
            out = str(tmp_path / sub)
            assert main(["evaluate", "--checkpoint", ckpt, "--out", out,
                         "--quiet"]) == 0
            texts.append(open(os.path.join(out, "metrics.csv")).read())
        assert texts[0] == texts[1]

    def test_needs_checkpoint_or_baseline(self, tmp_path):
        assert main(["evaluate", "--out", str(tmp_path / "o")]) == 2

    def test_missing_checkpoint_exits_2(self, tmp_path):
        assert main(["evaluate", "--checkpoint", str(tmp_path / "nope.rpck"),
                     "--out", str(tmp_path / "o")]) == 2

    def test_dataset_shape_mismatch_exits_2(self, trained, tmp_path):
        other = tmp_path / "other.rpmx"
        spec = tmp_path / "spec.txt"
        spec.write_text("n = 4\nsteps = 240\n")
        assert main(["generate", "--spec", str(spec), "--out", str(other)]) == 0
        code = main(["evaluate",
                     "--checkpoint", os.path.join(trained, "checkpoint.rpck"),
                     "--dataset", str(other), "--out", str(tmp_path / "o")])
        assert code == 2


class TestBaseline:
    @pytest.mark.parametrize("which", ["hl", "linear", "1nn"])
    def test_runs_and_reports(self, which, tiny_config, tmp_path):
        out = str(tmp_path / which)
        code = main(["baseline", "--which", which, "--config", tiny_config,
                     "--out", out, "--quiet"])
        assert code == 0
        table = open(os.path.join(out, "horizon_table.csv")).read()
        assert which in table

    def test_hl_param_count_zero(self, tiny_config, tmp_path):
        out = str(tmp_path / "hl")
        assert main(["baseline", "--which", "hl", "--config", tiny_config,
                     "--out", out, "--quiet"]) == 0
        row = open(os.path.join(out, "horizon_table.csv")).read().splitlines()[1]
        assert row.endswith(",0")


class TestDiagnose:
    def test_outputs(self, trained, workdir):
        out = str(workdir / "diag_out")
        code = main(["diagnose",
                     "--checkpoint", os.path.join(trained, "checkpoint.rpck"),
                     "--out", out, "--quiet"])
        assert code == 0
        for name in ("corr_error.csv", "corr_error.png", "jl.csv", "jl.png",
                     "decomposition.txt"):
            assert os.path.exists(os.path.join(out, name)), name
        text = open(os.path.join(out, "decomposition.txt")).read()
        residual = float(text.splitlines()[0].split("=")[1])
        assert residual < 1e-4

    def test_post_activation_checkpoint_refused(self, tmp_path):
        cfg = tmp_path / "config.txt"
        cfg.write_text(TINY_CONFIG + "pre_activation = false\nmax_epochs = 1\n")
        out = str(tmp_path / "train")
        assert main(["train", "--config", str(cfg), "--out", out,
                     "--quiet"]) == 0
        code = main(["diagnose",
                     "--checkpoint", os.path.join(out, "checkpoint.rpck"),
                     "--out", str(tmp_path / "diag"), "--quiet"])
        assert code == 2


class TestAblate:
    def test_four_variants(self, tmp_path):
        cfg = tmp_path / "config.txt"
        cfg.write_text(TINY_CONFIG + "max_epochs = 1\n")
        out = str(tmp_path / "ablate")
        assert main(["ablate", "--config", str(cfg), "--out", out,
                     "--quiet"]) == 0
        lines = open(os.path.join(out, "horizon_table.csv")).read().splitlines()
        assert len(lines) == 1 + 4
        for name in ("full", "post_activation", "no_random_projection",
                     "no_frequency_domain"):
            assert any(line.startswith(name + ",") for line in lines[1:])
            assert os.path.exists(os.path.join(out, f"config.{name}.txt"))
