import json
from pathlib import Path

import numpy as np
import pytest

from rbcmech import cli
from rbcmech.artifacts import load_samples, save_samples, sha256_file
from rbcmech.inference.basis import PosteriorSamples


def make_samples(tmp_path, n=200, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal([0.9, 5.0], [0.02, 1.0], size=(n, 2))
    samples = PosteriorSamples(samples=x, log_likelihood=-np.arange(n, dtype=float),
                               log_prior=np.zeros(n), betas=[0.0, 1.0],
                               log_evidence=-3.0, names=["v", "mu"])
    path = tmp_path / "samples.csv"
    save_samples(samples, path)
    return path


class TestRunPlumbing:
    def test_unknown_subcommand(self):
        assert cli.run("bogus", {}) == 2

    def test_missing_config_key_exit_2(self, tmp_path):
        assert cli.run("sfs", {}, out=str(tmp_path / "r")) == 2

    def test_data_error_exit_4(self, tmp_path):
        code = cli.run("report", {"samples": str(tmp_path / "none.csv")},
                       out=str(tmp_path / "r"))
        assert code == 4

    def test_numerical_error_exit_3(self, tmp_path):
        code = cli.run("simulate",
                       {"kind": "equilibrium",
                        "params": {"v": 2.0, "mu": 5.0, "kappa_b": 2.0,
                                   "b2": 1.0, "eta_m": 0.5}},
                       out=str(tmp_path / "r"))
        assert code == 2  # invalid reduced volume is a config error
        code = cli.run("plot-data", {"kind": "bogus", "artifact": __file__},
                       out=str(tmp_path / "r2"))
        assert code == 2

    def test_workers_env_override(self, monkeypatch):
        monkeypatch.setenv(cli.WORKERS_ENV, "3")

        class Args:
            command = "sweep"
            config = None
            preset = None
            out = None
            n = 4
            seed = 1
            kind = None
            mesh_level = None
            parallelism = None

        config = cli._merge_config("sweep", Args())
        assert config["parallelism"] == 3

    def test_desk_preset_merges(self):
        class Args:
            command = "sweep"
            config = None
            preset = "desk"
            out = None
            n = None
            seed = None
            kind = None
            mesh_level = None
            parallelism = None

        config = cli._merge_config("sweep", Args())
        assert config["n"] == 5000 and config["kind"] == "all"

    def test_toml_config(self, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text('v = 0.94\nmesh_level = 1\n')

        class Args:
            command = "sfs"
            config = str(cfg)
            preset = None
            out = None
            v = None
            mesh_level = None

        config = cli._merge_config("sfs", Args())
        assert config["v"] == 0.94 and config["mesh_level"] == 1


class TestSfsCommand:
    def test_artifacts_and_manifest(self, tmp_path):
        out = tmp_path / "run"
        code = cli.run("sfs", {"v": 1.0, "mesh_level": 1}, out=str(out))
        assert code == 0
        for name in ("sfs.ply", "metrics.json", "profile.csv", "profile.png",
                     "manifest.json"):
            assert (out / name).exists(), name
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["reduced_volume"] == pytest.approx(1.0, abs=0.01)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["subcommand"] == "sfs"
        assert "sfs.ply" in manifest["outputs"]

    def test_determinism_identical_hashes(self, tmp_path):
        config = {"v": 0.97, "mesh_level": 1}
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert cli.run("sfs", config, out=str(out1)) == 0
        assert cli.run("sfs", config, out=str(out2)) == 0
        m1 = json.loads((out1 / "manifest.json").read_text())
        m2 = json.loads((out2 / "manifest.json").read_text())
        assert m1["outputs"] == m2["outputs"]
        assert m1["config_hash"] == m2["config_hash"]


class TestReportCommand:
    def test_summary_columns_and_figure(self, tmp_path):
        samples = make_samples(tmp_path)
        out = tmp_path / "rep"
        assert cli.run("report", {"samples": str(samples)}, out=str(out)) == 0
        header = (out / "report.csv").read_text().splitlines()[0]
        assert header == "parameter,mean,median,ML,MAP,std"
        assert (out / "posterior.png").stat().st_size > 0

    def test_roundtrip_samples_io(self, tmp_path):
        path = make_samples(tmp_path, n=50, seed=3)
        back = load_samples(path)
        assert back.n == 50
        assert list(back.names) == ["v", "mu"]
        assert back.log_evidence == -3.0


class TestPlotDataCommand:
    def test_posterior_hist(self, tmp_path):
        samples = make_samples(tmp_path)
        out = tmp_path / "pd"
        code = cli.run("plot-data", {"kind": "posterior-hist",
                                     "artifact": str(samples)}, out=str(out))
        assert code == 0
        lines = (out / "plot_data.csv").read_text().splitlines()
        assert lines[0] == "parameter,bin_lo,bin_hi,count"
        assert len(lines) == 1 + 2 * 40

    def test_sfs_profile(self, tmp_path):
        run = tmp_path / "sfs"
        assert cli.run("sfs", {"v": 1.0, "mesh_level": 1}, out=str(run)) == 0
        out = tmp_path / "pd"
        code = cli.run("plot-data", {"kind": "sfs-profile",
                                     "artifact": str(run / "sfs.ply")},
                       out=str(out))
        assert code == 0
        header = (out / "plot_data.csv").read_text().splitlines()[0]
        assert header == "r_um,z_top_um,z_bot_um"


class TestSweepTrainCommands:
    def test_tiny_sweep_and_manifest(self, tmp_path):
        out = tmp_path / "sweep"
        code = cli.run("sweep", {"n": 2, "seed": 3, "kind": "equilibrium",
                                 "mesh_level": 2}, out=str(out))
        assert code == 0
        assert (out / "table.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert sha256_file(out / "table.csv") == manifest["outputs"]["table.csv"]
