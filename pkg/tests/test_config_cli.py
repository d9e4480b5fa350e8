import os

import numpy as np
import pytest

from torusgas import config as config_mod
from torusgas import snapshots
from torusgas.cli import main
from torusgas.config import ConfigError, parse_text, resolve


MINIMAL_1D = """
# minimal stochastic 1-D run
grid.sizes = 64
run.T = 0.05
run.n_steps = 20
run.samples = 10
model.nu = 0.01
noise.modes = 1
noise.K = 0.1
noise.L = 0.05
ensemble.members = 3
init.kind = density_wave
"""


class TestConfigParsing:
    def test_roundtrip(self):
        cfg = resolve(parse_text(MINIMAL_1D))
        assert cfg["grid.sizes"] == [64]
        assert cfg["noise.K"] == [0.1]
        assert cfg["model.gamma"] == 2.0  # default filled
        again = resolve(parse_text(config_mod.dumps(cfg)))
        assert again == cfg

    def test_unknown_key_rejected_with_path(self):
        with pytest.raises(ConfigError, match=r"model\.spice"):
            resolve(parse_text("model.spice = 1.0"))

    def test_bad_value_names_key(self):
        with pytest.raises(ConfigError, match=r"run\.T"):
            resolve(parse_text("run.T = fast"))

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_text("run.T = 1\nrun.T = 2")

    def test_cross_validation(self):
        with pytest.raises(ConfigError, match="gamma"):
            resolve(parse_text("model.gamma = 0.9"))
        with pytest.raises(ConfigError, match="noise"):
            resolve(parse_text("noise.modes = 2\nnoise.K = 0.1\nnoise.L = 0.1,0.2"))
        with pytest.raises(ConfigError, match="sizes"):
            resolve(parse_text("grid.sizes = 48"))

    def test_comments_and_blanks(self):
        raw = parse_text("# comment only\n\nrun.T = 2.0  # trailing\n")
        assert raw == {"run.T": "2.0"}


class TestSnapshots:
    def test_field_roundtrip(self, tmp_path, grid2d, rng):
        values = rng.standard_normal((3, *grid2d.sizes))
        path = tmp_path / "f.snap"
        snapshots.write_field(path, grid2d, values, 0.75)
        out, t = snapshots.read_field(path)
        assert t == 0.75
        assert np.array_equal(out, values)

    def test_scalar_roundtrip(self, tmp_path, grid1d, rng):
        values = rng.standard_normal(grid1d.sizes)
        path = tmp_path / "s.snap"
        snapshots.write_field(path, grid1d, values, 0.0)
        out, _ = snapshots.read_field(path)
        assert np.array_equal(out[0], values)

    def test_tampered_header_raises(self, tmp_path, grid1d, rng):
        path = tmp_path / "t.snap"
        snapshots.write_field(path, grid1d, rng.standard_normal(grid1d.sizes), 0.0)
        blob = path.read_bytes()
        path.write_bytes(b"9 bogus header\n" + blob.split(b"\n", 1)[1])
        with pytest.raises(snapshots.SnapshotError):
            snapshots.read_field(path)

    def test_truncated_payload_raises(self, tmp_path, grid1d, rng):
        path = tmp_path / "p.snap"
        snapshots.write_field(path, grid1d, rng.standard_normal(grid1d.sizes), 0.0)
        blob = path.read_bytes()
        path.write_bytes(blob[:-16])
        with pytest.raises(snapshots.SnapshotError, match="payload"):
            snapshots.read_field(path)


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestSimulateCommand:
    def test_artifacts_and_csv_rows(self, tmp_path):
        cfg = write_cfg(tmp_path, MINIMAL_1D)
        out = str(tmp_path / "out")
        assert main(["simulate", "--config", cfg, "--out", out]) == 0
        names = sorted(os.listdir(out))
        assert "ledger.csv" in names
        assert "config.resolved.cfg" in names
        assert "FORMAT" in names
        assert "summary.json" in names
        assert "ym_rho.snap" in names and "ym_mom.snap" in names
        with open(os.path.join(out, "ledger.csv")) as fh:
            lines = fh.read().strip().splitlines()
        assert lines[0] == "t,E,D,dissipation_cum,ito_cum,martingale,residual"
        assert len(lines) == 1 + 11  # samples + initial time

    def test_determinism_same_seed(self, tmp_path):
        cfg = write_cfg(tmp_path, MINIMAL_1D)
        outs = []
        for tag in ("a", "b"):
            out = str(tmp_path / tag)
            assert main(["simulate", "--config", cfg, "--out", out, "--seed", "5"]) == 0
            with open(os.path.join(out, "ledger.csv"), "rb") as fh:
                outs.append(fh.read())
        assert outs[0] == outs[1]

    def test_worker_count_does_not_change_bytes(self, tmp_path):
        cfg = write_cfg(tmp_path, MINIMAL_1D)
        blobs = []
        for threads in ("1", "2", "8"):
            out = str(tmp_path / f"w{threads}")
            assert main(["simulate", "--config", cfg, "--out", out,
                         "--threads", threads]) == 0
            with open(os.path.join(out, "ledger.csv"), "rb") as fh:
                blobs.append(fh.read())
        assert blobs[0] == blobs[1] == blobs[2]

    def test_different_seed_changes_martingale(self, tmp_path):
        cfg = write_cfg(tmp_path, MINIMAL_1D)
        columns = []
        for seed in ("1", "2"):
            out = str(tmp_path / f"s{seed}")
            main(["simulate", "--config", cfg, "--out", out, "--seed", seed])
            with open(os.path.join(out, "ledger.csv")) as fh:
                lines = fh.read().strip().splitlines()[1:]
            columns.append([line.split(",")[5] for line in lines])
        assert columns[0] != columns[1]

    def test_config_error_exit_code(self, tmp_path):
        cfg = write_cfg(tmp_path, "model.spice = 1\n")
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "x")]) == 2

    def test_snapshot_cadence(self, tmp_path):
        cfg = write_cfg(tmp_path, MINIMAL_1D + "run.snapshot_every = 2\n")
        out = str(tmp_path / "snap")
        main(["simulate", "--config", cfg, "--out", out])
        snaps = [n for n in os.listdir(out) if n.startswith("state_")]
        assert len(snaps) == 6  # samples 0,2,4,6,8 plus the final one

    def test_shared_paths_collapse_defect(self, tmp_path):
        # one Wiener path for all members: identical trajectories, D = 0
        cfg = write_cfg(tmp_path, MINIMAL_1D + "ensemble.shared_paths = true\n")
        out = str(tmp_path / "shared")
        main(["simulate", "--config", cfg, "--out", out])
        with open(os.path.join(out, "ledger.csv")) as fh:
            rows = fh.read().strip().splitlines()[1:]
        d_col = [abs(float(r.split(",")[2])) for r in rows]
        assert max(d_col) < 1e-13

    def test_summary_reports_floor_and_noise_metadata(self, tmp_path):
        import json

        cfg = write_cfg(tmp_path, MINIMAL_1D)
        out = str(tmp_path / "meta")
        main(["simulate", "--config", cfg, "--out", out])
        with open(os.path.join(out, "summary.json")) as fh:
            summary = json.load(fh)
        assert summary["floored_cells_total"] == 0
        assert summary["noise_tail_alpha"] == 0.0
        assert summary["noise_alpha_sum"] == pytest.approx(0.15)


class TestVerifyCommand:
    def test_default_passes(self, capsys):
        assert main(["verify"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out

    def test_injected_fault_fails(self, capsys, monkeypatch):
        # convexity-violating estimator must trip the Jensen check
        from torusgas import ensemble as ens

        def fake(rho, mom, *params):
            n = rho.shape[1]
            return np.zeros(n), np.full(n, -1.0)

        monkeypatch.setattr(ens.kernels, "ym_energy_defect", fake)
        assert main(["verify"]) == 1
        out = capsys.readouterr().out
        assert "ensemble.jensen" in out
        assert "FAIL" in out


class TestWeakStrongCommand:
    def test_self_comparison(self, tmp_path):
        text = """
grid.sizes = 32
run.T = 0.125
model.nu = 0.01
noise.modes = 1
noise.K = 0.1
noise.L = 0.05
ws.n_steps = 16
ws.members = 2
ws.refine = 1
ws.samples = 4
"""
        cfg = write_cfg(tmp_path, text)
        out = str(tmp_path / "ws")
        assert main(["weak-strong", "--config", cfg, "--out", out]) == 0
        with open(os.path.join(out, "weak_strong.csv")) as fh:
            header, *rows = fh.read().strip().splitlines()
        assert header.split(",")[:3] == ["t", "Emv_mean", "Emv_se"]
        assert "remainder_term_1" in header and "remainder_term_9" in header
        assert header.split(",")[-1] == "gronwall_residual"
        emv = [float(r.split(",")[1]) for r in rows]
        assert max(emv) < 1e-12


class TestLimitSweepCommand:
    def test_three_point_sweep(self, tmp_path):
        text = """
grid.sizes = 16,16
run.T = 0.125
sweep.eps = 1.0,0.5,0.25
sweep.members = 4
sweep.samples = 2
noise.modes = 1
noise.K = 0.1
noise.L = 0.05
"""
        cfg = write_cfg(tmp_path, text)
        out = str(tmp_path / "sweep")
        code = main(["limit-sweep", "--config", cfg, "--out", out])
        with open(os.path.join(out, "sweep.csv")) as fh:
            header, *rows = fh.read().strip().splitlines()
        assert header == "eps,t,Emv_mean,Emv_se,D_sup,tau_M"
        eps_values = {row.split(",")[0] for row in rows}
        assert len(eps_values) == 3
        import json

        with open(os.path.join(out, "summary.json")) as fh:
            summary = json.load(fh)
        assert "slope" in summary and "monotone" in summary
        assert code in (0, 1)  # rate fit may fail at this tiny scale


def test_snapshot_loader_surfaces_cli_level(tmp_path, grid1d, rng):
    # a tampered artifact must raise the dedicated error, not garbage output
    path = tmp_path / "x.snap"
    snapshots.write_field(path, grid1d, rng.standard_normal(grid1d.sizes), 0.0)
    data = bytearray(path.read_bytes())
    data[0:1] = b"z"
    path.write_bytes(bytes(data))
    with pytest.raises(snapshots.SnapshotError):
        snapshots.read_field(path)
