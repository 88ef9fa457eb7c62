import os

import numpy as np
import pytest

from saddlekit.cli import main
from saddlekit.config import RunConfig, ConfigError


BASE_CFG = """
[kernel]
kind = fractional
gamma = 0.5

[nonlinearity]
name = allen-cahn

[geometry]
m = 1
h2d = 0.25
s_max = 20.0

[layer]
L = 20.0
h = 0.05

[schedule]
radii = 5, 10, 15, 20
eigen_radii = 2, 4, 8
torsion_radii = 1, 2, 4, 8

[run]
seed = 0
out = {out}
"""

SMALL_CFG = """
[kernel]
kind = fractional
gamma = 0.5

[geometry]
h2d = 0.5
s_max = 12.0

[schedule]
radii = 6, 12
eigen_radii = 2, 4, 8
torsion_radii = 1, 2, 4
torsion_cells = 200

[run]
seed = 0
out = {out}
"""


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text.format(out=tmp_path / "out"))
    return str(p)


class TestConfig:
    def test_defaults_round_trip(self, tmp_path):
        cfg = RunConfig.from_file(write_cfg(tmp_path, BASE_CFG))
        assert cfg.gamma == 0.5
        assert cfg.radii == (5.0, 10.0, 15.0, 20.0)
        assert cfg.kernel().dim == 2
        assert cfg.nonlinearity().name == "allen-cahn"
        assert len(cfg.config_hash) == 16

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            RunConfig.from_file("/nonexistent.cfg")

    def test_bad_gamma(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("[kernel]\ngamma = 1.5\n")
        with pytest.raises(ConfigError, match="gamma"):
            RunConfig.from_file(str(p))

    def test_bad_value_names_key(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("[kernel]\ngamma = abc\n")
        with pytest.raises(ConfigError, match="gamma"):
            RunConfig.from_file(str(p))

    def test_radii_beyond_grid(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("[geometry]\ns_max = 10\n\n[schedule]\nradii = 5, 20\n")
        with pytest.raises(ConfigError, match="radii"):
            RunConfig.from_file(str(p))

    def test_expression_kernels(self, tmp_path):
        p = tmp_path / "e.cfg"
        p.write_text("[kernel]\nkind = expression\nform = power_cos\na = 2\nb = 1\n"
                     "lam = 0.5\nLam = 3.0\n")
        cfg = RunConfig.from_file(str(p))
        K = cfg.kernel()
        assert float(K(1.0)) > 0

    def test_table_kernel(self, tmp_path):
        import numpy as np
        from saddlekit.kernels import frac_kernel
        r = np.logspace(-4, 4, 200)
        K0 = frac_kernel(2, 0.5)
        tab = tmp_path / "k.csv"
        np.savetxt(tab, np.column_stack([r, K0(r)]), delimiter=",")
        p = tmp_path / "t.cfg"
        p.write_text(f"[kernel]\nkind = table\npath = {tab}\ngamma = 0.5\n")
        cfg = RunConfig.from_file(str(p))
        K = cfg.kernel()
        assert float(K(2.0)) == pytest.approx(float(K0(2.0)), rel=1e-6)


class TestCommands:
    def test_usage_error_exit_code(self, tmp_path, capsys):
        assert main(["kernel-check", "--config", "/missing.cfg"]) == 2

    def test_kernel_check(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, BASE_CFG)
        rc = main(["kernel-check", "--config", cfg])
        assert rc == 0
        out = capsys.readouterr().out
        assert "sqrt-variable convexity" in out
        assert (tmp_path / "out" / "kernel_check.txt").exists()

    def test_kernel_check_fails_on_bad_table(self, tmp_path, capsys):
        import numpy as np
        from saddlekit.kernels import frac_kernel
        r = np.logspace(-4, 4, 200)
        K0 = frac_kernel(2, 0.5)
        vals = np.asarray(K0(r)) * np.exp(-r)      # decays below the envelope
        tab = tmp_path / "bad.csv"
        np.savetxt(tab, np.column_stack([r, vals]), delimiter=",")
        p = tmp_path / "t.cfg"
        p.write_text(f"[kernel]\nkind = table\npath = {tab}\ngamma = 0.5\n"
                     f"lam = 0.5\nLam = 1.0\n\n[run]\nout = {tmp_path/'out'}\n")
        rc = main(["kernel-check", "--config", str(p)])
        assert rc == 1
        assert "FAIL" in capsys.readouterr().out

    def test_layer_command_and_determinism(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, BASE_CFG)
        assert main(["layer", "--config", cfg]) == 0
        first = (tmp_path / "out" / "layer.csv").read_bytes()
        assert main(["layer", "--config", cfg]) == 0
        second = (tmp_path / "out" / "layer.csv").read_bytes()
        assert first == second

    def test_torsion_command(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, BASE_CFG)
        assert main(["torsion", "--config", cfg]) == 0
        out = capsys.readouterr().out
        assert "closed-form profile" in out

    def test_evolve_command(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, BASE_CFG)
        assert main(["evolve", "--config", cfg]) == 0
        assert (tmp_path / "out" / "evolve_constant.csv").exists()
        assert (tmp_path / "out" / "evolve_bump.csv").exists()

    def test_eigen_command_small(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, SMALL_CFG)
        assert main(["eigen", "--config", cfg]) == 0
        assert (tmp_path / "out" / "eigenpair.csv").exists()

    def test_saddle_command_small(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, SMALL_CFG)
        rc = main(["saddle", "--config", cfg])
        out = capsys.readouterr().out
        assert rc == 0, out
        for name in ("u.csv", "asymptotic_table.csv", "report.txt"):
            assert (tmp_path / "out" / name).exists()

    def test_verify_single_family(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, SMALL_CFG)
        rc = main(["verify", "--config", cfg, "--only", "abp"])
        out = capsys.readouterr().out
        assert rc == 0, out
        assert "ABP" in out
        assert "weak MP" not in out
