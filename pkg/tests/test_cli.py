"""Command-line surface: exit codes, artifacts on disk, config echo, and
determinism of file outputs. Commands run in-process through main(argv) so
coverage tools see them; one subprocess test checks the module entry point.

A single tiny model is trained once per session and shared by every
subcommand test that needs a checkpoint.
"""

import os
import subprocess
import sys

import numpy as np
import pytest

from pumfa.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from pumfa.cloudio import load_cloud, load_ply_cloud, save_cloud
from pumfa.dataset import load_dataset, mesh_from_spec
from pumfa.sampling import sample_mesh

TINY_INI = """\
[model]
n = 32
patch_size = 8
c = 4
c_prime = 8
k_prime = 4
heads = 4

[train]
epochs = 2
batch_size = 2
seed = 3
checkpoint_path = {ckpt}

[data]
meshes = sphere
pairs_per_mesh = 3
dense_points = 512
"""


@pytest.fixture(scope="session")
def cli_env(tmp_path_factory):
    """Train a throwaway model once; hand back every path the tests need."""
    root = tmp_path_factory.mktemp("cli")
    ckpt = root / "tiny.ckpt"
    ini = root / "tiny.ini"
    ini.write_text(TINY_INI.format(ckpt=ckpt))

    runs = root / "runs"
    rc = main(["train", "--config", str(ini), "--out", str(runs)])
    assert rc == EXIT_OK

    cloud = sample_mesh(mesh_from_spec("sphere"), 64, mode="poisson",
                        rng=np.random.default_rng(11))
    cloud_path = root / "input64.xyz"
    save_cloud(str(cloud_path), cloud)

    return {
        "root": root,
        "ini": str(ini),
        "ckpt": str(ckpt),
        "runs": str(runs),
        "cloud": str(cloud_path),
    }


class TestExitCodes:
    def test_no_arguments_is_usage(self, capsys):
        assert main([]) == EXIT_USAGE
        assert "usage" in capsys.readouterr().err.lower()

    def test_unknown_subcommand_is_usage(self, capsys):
        assert main(["frobnicate"]) == EXIT_USAGE

    def test_help_exits_zero(self, capsys):
        assert main(["-h"]) == EXIT_OK
        assert "gen-data" in capsys.readouterr().out

    def test_subcommand_help_exits_zero(self, capsys):
        assert main(["upsample", "-h"]) == EXIT_OK

    def test_missing_required_flag_is_usage(self, capsys):
        assert main(["upsample", "--in", "a.xyz", "--out", "b.xyz"]) == EXIT_USAGE

    def test_unknown_profile_is_usage(self, capsys):
        rc = main(["gen-data", "--profile", "huge"])
        assert rc == EXIT_USAGE

    def test_bad_ratio_is_usage(self, cli_env, tmp_path, capsys):
        rc = main([
            "upsample", "--in", cli_env["cloud"],
            "--out", str(tmp_path / "o.xyz"),
            "--ckpt", cli_env["ckpt"], "--ratio", "3",
        ])
        assert rc == EXIT_USAGE
        assert "power of" in capsys.readouterr().err

    def test_bad_heads_is_usage(self, cli_env, tmp_path, capsys):
        rc = main([
            "attn-dump", "--ckpt", cli_env["ckpt"], "--in", cli_env["cloud"],
            "--out", str(tmp_path), "--heads", "a,b",
        ])
        assert rc == EXIT_USAGE
        assert "comma-separated" in capsys.readouterr().err

    def test_missing_input_cloud_is_runtime(self, cli_env, tmp_path, capsys):
        rc = main([
            "upsample", "--in", str(tmp_path / "absent.xyz"),
            "--out", str(tmp_path / "o.xyz"), "--ckpt", cli_env["ckpt"],
        ])
        assert rc == EXIT_RUNTIME
        assert "error:" in capsys.readouterr().err

    def test_missing_checkpoint_is_runtime(self, cli_env, tmp_path, capsys):
        rc = main([
            "upsample", "--in", cli_env["cloud"],
            "--out", str(tmp_path / "o.xyz"),
            "--ckpt", str(tmp_path / "absent.ckpt"),
        ])
        assert rc == EXIT_RUNTIME

    def test_missing_config_file_is_runtime(self, tmp_path, capsys):
        rc = main(["gen-data", "--config", str(tmp_path / "absent.ini"),
                   "--out", str(tmp_path / "d.npz")])
        assert rc == EXIT_RUNTIME
        assert "cannot read" in capsys.readouterr().err

    def test_head_out_of_range_is_runtime(self, cli_env, tmp_path, capsys):
        rc = main([
            "attn-dump", "--ckpt", cli_env["ckpt"], "--in", cli_env["cloud"],
            "--out", str(tmp_path), "--heads", "9",
        ])
        assert rc == EXIT_RUNTIME
        assert "out of range" in capsys.readouterr().err

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "pumfa.cli"],
            capture_output=True, text=True, cwd="/root/pkg",
        )
        assert proc.returncode == EXIT_USAGE
        assert "usage" in proc.stderr.lower()


class TestGenData:
    def test_writes_loadable_dataset(self, cli_env, tmp_path, capsys):
        out = tmp_path / "ds.npz"
        rc = main(["gen-data", "--config", cli_env["ini"], "--out", str(out)])
        assert rc == EXIT_OK
        pairs = load_dataset(str(out))
        assert len(pairs) == 3
        assert pairs[0].input.shape == (32, 3)
        assert pairs[0].target.shape == (128, 3)

    def test_echoes_resolved_config(self, cli_env, tmp_path, capsys):
        rc = main(["gen-data", "--config", cli_env["ini"],
                   "--out", str(tmp_path / "ds.npz")])
        assert rc == EXIT_OK
        out = capsys.readouterr().out
        assert "[model]" in out
        assert "n = 32" in out
        assert "[train]" in out
        assert "meshes = sphere" in out

    def test_seed_override_changes_data(self, cli_env, tmp_path, capsys):
        a, b, c = (tmp_path / f"{k}.npz" for k in "abc")
        for out, seed in ((a, "0"), (b, "1"), (c, "0")):
            rc = main(["gen-data", "--config", cli_env["ini"],
                       "--seed", seed, "--out", str(out)])
            assert rc == EXIT_OK
        pa, pb, pc = (load_dataset(str(p)) for p in (a, b, c))
        assert not np.array_equal(pa[0].input, pb[0].input)
        np.testing.assert_array_equal(pa[0].input, pc[0].input)


class TestTrain:
    def test_artifacts_exist(self, cli_env):
        runs = cli_env["runs"]
        assert os.path.exists(cli_env["ckpt"])
        assert os.path.exists(os.path.join(runs, "train_log.csv"))
        assert os.path.exists(os.path.join(runs, "loss_curve.png"))

    def test_log_has_expected_rows(self, cli_env):
        with open(os.path.join(cli_env["runs"], "train_log.csv")) as fh:
            lines = fh.read().strip().splitlines()
        assert lines[0] == "step,epoch,alpha,loss,cd_qp_d,cd_q_d,dcd_q_d"
        # 3 pairs, batch 2 -> 2 steps per epoch, 2 epochs
        assert len(lines) == 1 + 4

    def test_figure_is_png(self, cli_env):
        with open(os.path.join(cli_env["runs"], "loss_curve.png"), "rb") as fh:
            assert fh.read(8) == b"\x89PNG\r\n\x1a\n"

    def test_train_from_dataset_file(self, cli_env, tmp_path, capsys):
        ds = tmp_path / "ds.npz"
        rc = main(["gen-data", "--config", cli_env["ini"], "--out", str(ds)])
        assert rc == EXIT_OK
        ck = tmp_path / "m.ckpt"
        rc = main(["train", "--config", cli_env["ini"], "--ckpt", str(ck),
                   "--in", str(ds), "--out", str(tmp_path / "runs")])
        assert rc == EXIT_OK
        out = capsys.readouterr().out
        assert "final cd_q" in out
        assert os.path.exists(ck)

    def test_mismatched_dataset_is_runtime(self, cli_env, tmp_path, capsys):
        # dataset patches are 32 -> 128; a model with n=16 cannot take them
        ds = tmp_path / "ds.npz"
        assert main(["gen-data", "--config", cli_env["ini"],
                     "--out", str(ds)]) == EXIT_OK
        ini = tmp_path / "small.ini"
        ini.write_text(TINY_INI.format(ckpt=tmp_path / "m.ckpt")
                       .replace("n = 32", "n = 16")
                       .replace("patch_size = 8", "patch_size = 4"))
        rc = main(["train", "--config", str(ini), "--in", str(ds),
                   "--out", str(tmp_path / "runs")])
        assert rc == EXIT_RUNTIME
        assert "error:" in capsys.readouterr().err


class TestUpsample:
    def test_default_ratio_matches_model(self, cli_env, tmp_path, capsys):
        out = tmp_path / "dense.xyz"
        rc = main(["upsample", "--in", cli_env["cloud"], "--out", str(out),
                   "--ckpt", cli_env["ckpt"]])
        assert rc == EXIT_OK
        assert len(load_cloud(str(out))) == 64 * 4
        assert "64 -> 256 points" in capsys.readouterr().out

    def test_chained_ratio(self, cli_env, tmp_path, capsys):
        out = tmp_path / "dense16.xyz"
        rc = main(["upsample", "--in", cli_env["cloud"], "--out", str(out),
                   "--ckpt", cli_env["ckpt"], "--ratio", "16"])
        assert rc == EXIT_OK
        assert len(load_cloud(str(out))) == 64 * 16

    def test_reruns_are_byte_identical(self, cli_env, tmp_path, capsys):
        paths = [tmp_path / "a.xyz", tmp_path / "b.xyz"]
        for p in paths:
            rc = main(["upsample", "--in", cli_env["cloud"], "--out", str(p),
                       "--ckpt", cli_env["ckpt"]])
            assert rc == EXIT_OK
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_ply_output(self, cli_env, tmp_path, capsys):
        out = tmp_path / "dense.ply"
        rc = main(["upsample", "--in", cli_env["cloud"], "--out", str(out),
                   "--ckpt", cli_env["ckpt"]])
        assert rc == EXIT_OK
        pts, _ = load_ply_cloud(str(out))
        assert len(pts) == 256


@pytest.fixture(scope="session")
def eval_out(cli_env, tmp_path_factory):
    out = tmp_path_factory.mktemp("evalout")
    rc = main([
        "eval", "--config", cli_env["ini"], "--ckpt", cli_env["ckpt"],
        "--out", str(out), "--noise-level", "0.0", "--noise-level", "0.01",
    ])
    assert rc == EXIT_OK
    return out


@pytest.fixture(scope="session")
def attn_out(cli_env, tmp_path_factory):
    out = tmp_path_factory.mktemp("attnout")
    rc = main([
        "attn-dump", "--ckpt", cli_env["ckpt"], "--in", cli_env["cloud"],
        "--out", str(out), "--top-k", "5",
    ])
    assert rc == EXIT_OK
    return out


class TestEval:
    def test_artifacts_exist(self, eval_out):
        for name in ("metrics.csv", "metrics.txt", "cd_vs_noise.png"):
            assert os.path.exists(os.path.join(str(eval_out), name))

    def test_csv_covers_grid(self, eval_out):
        with open(os.path.join(str(eval_out), "metrics.csv")) as fh:
            lines = fh.read().strip().splitlines()
        assert lines[0] == "shape,noise_level,cd_1e3,hd_1e3,p2f_1e3"
        # one mesh x two noise levels
        assert len(lines) == 1 + 2
        assert lines[1].startswith("sphere,0,")
        assert lines[2].startswith("sphere,0.01,")

    def test_table_printed(self, cli_env, tmp_path, capsys):
        rc = main([
            "eval", "--config", cli_env["ini"], "--ckpt", cli_env["ckpt"],
            "--out", str(tmp_path), "--noise-level", "0.0",
        ])
        assert rc == EXIT_OK
        out = capsys.readouterr().out
        assert "CD (1e-3) by noise level" in out
        assert "sphere" in out


class TestAttnDump:
    def test_overlays_for_every_layer_and_head(self, attn_out):
        # model has 4 decoder layers and 4 heads
        names = sorted(p for p in os.listdir(str(attn_out)) if p.endswith(".ply"))
        assert len(names) == 16
        assert names[0] == "attention_layer0_head0.ply"
        assert names[-1] == "attention_layer3_head3.ply"

    def test_overlay_flags_top_k(self, attn_out):
        pts, flags = load_ply_cloud(
            os.path.join(str(attn_out), "attention_layer0_head0.ply"))
        assert len(pts) == 32  # oversized input is downsampled to the model n
        assert int(flags.sum()) == 5

    def test_csv_and_figure(self, attn_out):
        csv_path = os.path.join(str(attn_out), "attention_topk.csv")
        with open(csv_path) as fh:
            lines = fh.read().strip().splitlines()
        assert lines[0] == "layer,head,rank,point_index,mean_score"
        assert len(lines) == 1 + 4 * 4 * 5
        with open(os.path.join(str(attn_out), "attention_overlay.png"), "rb") as fh:
            assert fh.read(8) == b"\x89PNG\r\n\x1a\n"

    def test_head_selection(self, cli_env, tmp_path, capsys):
        rc = main([
            "attn-dump", "--ckpt", cli_env["ckpt"], "--in", cli_env["cloud"],
            "--out", str(tmp_path), "--heads", "2,0", "--top-k", "3",
        ])
        assert rc == EXIT_OK
        names = sorted(p for p in os.listdir(str(tmp_path)) if p.endswith(".ply"))
        assert len(names) == 8  # 4 layers x 2 selected heads
        assert all(("head0" in n or "head2" in n) for n in names)


class TestRoundTrip:
    def test_gen_train_eval_from_one_config(self, tmp_path, capsys):
        """The dataset, training, and evaluation stages all accept the same
        config file, so one INI drives the whole workflow."""
        ckpt = tmp_path / "rt.ckpt"
        ini = tmp_path / "rt.ini"
        ini.write_text(TINY_INI.format(ckpt=ckpt))
        ds = tmp_path / "rt.npz"

        assert main(["gen-data", "--config", str(ini),
                     "--out", str(ds)]) == EXIT_OK
        assert main(["train", "--config", str(ini), "--in", str(ds),
                     "--out", str(tmp_path / "runs")]) == EXIT_OK
        assert main(["eval", "--config", str(ini), "--ckpt", str(ckpt),
                     "--out", str(tmp_path / "ev"),
                     "--noise-level", "0.0"]) == EXIT_OK
        assert os.path.exists(tmp_path / "ev" / "metrics.csv")

    def test_resume_continues_training(self, tmp_path, capsys):
        ckpt = tmp_path / "rs.ckpt"
        ini = tmp_path / "rs.ini"
        ini.write_text(TINY_INI.format(ckpt=ckpt))
        assert main(["train", "--config", str(ini),
                     "--out", str(tmp_path / "r1")]) == EXIT_OK
        rc = main(["train", "--config", str(ini), "--resume",
                   "--out", str(tmp_path / "r2")])
        assert rc == EXIT_OK
        out = capsys.readouterr().out
        # the resumed run starts where the first one stopped: nothing to do
        assert "final cd_q" in out
