import json

import numpy as np
import pytest

from cuspfactor import cli
from cuspfactor.cli import cli_main
from cuspfactor.dataio import PreprocessSpec, RunConfig, load_csv, parse_index_list
from cuspfactor.errors import ConfigError, NumericalError, ParseError
from cuspfactor.gibbs_cusp import FactorHyper
from cuspfactor.prob_core import make_rng
from cuspfactor.store import read_draws

SHORT = ["--iterations", "300", "--burn-in", "100", "--thin", "2", "--t-bar", "50"]


def _csv(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_center(self, tmp_path):
        d = load_csv(_csv(tmp_path, "a,b\n1,2\n3,4\n"), PreprocessSpec(center=True))
        assert np.array_equal(d.y, [[-1.0, -1.0], [1.0, 1.0]])

    def test_negate_then_center(self, tmp_path):
        d = load_csv(_csv(tmp_path, "a\n1\n3\n"), PreprocessSpec(center=True, negate_columns=(1,)))
        assert np.array_equal(d.y[:, 0], [1.0, -1.0])
        assert d.provenance["negate_columns"] == "1" and d.provenance["center"] is True

    def test_raw(self, tmp_path):
        d = load_csv(_csv(tmp_path, "a,b\n1,2\n3,4\n"))
        assert np.array_equal(d.y, [[1.0, 2.0], [3.0, 4.0]])

    def test_missing_cell(self, tmp_path):
        with pytest.raises(ParseError, match=r"row 2, column 'b'"):
            load_csv(_csv(tmp_path, "a,b\n1,\n3,4\n"))

    def test_non_numeric(self, tmp_path):
        with pytest.raises(ParseError, match=r"row 3, column 'a'"):
            load_csv(_csv(tmp_path, "a,b\n1,2\nx,4\n"))

    def test_ragged(self, tmp_path):
        with pytest.raises(ParseError, match="row 2"):
            load_csv(_csv(tmp_path, "a,b\n1,2,3\n"))

    def test_header_only(self, tmp_path):
        with pytest.raises(ParseError):
            load_csv(_csv(tmp_path, "a,b\n"))

    def test_negate_out_of_range(self, tmp_path):
        with pytest.raises(ConfigError):
            load_csv(_csv(tmp_path, "a,b\n1,2\n"), PreprocessSpec(negate_columns=(3,)))

    def test_duplicate_negate(self, tmp_path):
        with pytest.raises(ConfigError):
            load_csv(_csv(tmp_path, "a,b\n1,2\n"), PreprocessSpec(negate_columns=(1, 1)))

    def test_index_list(self):
        assert parse_index_list("1,9,10") == (1, 9, 10)
        with pytest.raises(ConfigError):
            parse_index_list("1,a")


class TestRunConfig:
    def test_defaults(self):
        hyper, settings = RunConfig().build()
        assert isinstance(hyper, FactorHyper)
        assert (hyper.cusp.alpha, hyper.cusp.a_theta, hyper.cusp.b_theta, hyper.cusp.theta_inf) == (5, 2, 2, 0.05)
        assert (hyper.a_sigma, hyper.b_sigma) == (1.0, 0.3)
        assert (settings.n_iterations, settings.burn_in, settings.thin, settings.t_bar) == (15000, 5000, 5, 500)
        assert (settings.alpha0, settings.alpha1) == (-1.0, -5e-4)

    def test_mgp_defaults(self):
        hyper, _ = RunConfig(method="mgp").build()
        assert (hyper.a1, hyper.a2, hyper.nu, hyper.eps_threshold) == (1.0, 2.0, 3.0, 1e-4)

    def test_heavy_slab_message(self):
        with pytest.raises(ConfigError, match="finite"):
            RunConfig(a_theta=1.0).build()

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"alpha": 3, "gamma": 1}))
        with pytest.raises(ConfigError, match="gamma"):
            RunConfig.from_json(path)

    def test_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"alpha": 3, "seed": 11}))
        cfg = RunConfig.from_json(path)
        assert cfg.alpha == 3 and cfg.seed == 11 and cfg.updated({"alpha": None}).alpha == 3


class TestCli:
    def test_prior_check(self, capsys):
        assert cli_main(["prior-check", "--alpha", "5"]) == 0
        out = capsys.readouterr().out
        assert "E(H*) = 5" in out and "1,0.166667" in out

    def test_unknown_flag(self, capsys):
        assert cli_main(["prior-check", "--bogus"]) == 1
        assert "usage" in capsys.readouterr().err

    def test_no_command(self, capsys):
        assert cli_main([]) == 1

    def test_invalid_value(self, capsys):
        assert cli_main(["prior-check", "--alpha", "-1"]) == 1

    def test_heavy_slab_flag(self, tmp_path, capsys):
        args = ["simulate", "--p", "5", "--h0", "2", "--n", "20", "--replicates", "1", "--a-theta", "1",
                "--out", str(tmp_path / "s")] + SHORT
        assert cli_main(args) == 1
        assert "finite" in capsys.readouterr().err
        assert cli_main(args + ["--allow-heavy-slab"]) == 0

    def test_simulate_deterministic(self, tmp_path, capsys):
        base = ["simulate", "--p", "6", "--h0", "2", "--n", "30", "--replicates", "2", "--seed", "7"] + SHORT
        assert cli_main(base + ["--out", str(tmp_path / "a")]) == 0
        assert cli_main(base + ["--out", str(tmp_path / "b")]) == 0
        for name in ("replicates.csv", "summary.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        summary = json.loads((tmp_path / "a" / "summary.json").read_text())
        assert summary["scenario"]["settings"]["seed"] == 7

    def test_fit_and_summarize(self, tmp_path, capsys):
        y = make_rng(1).standard_normal((40, 4))
        y[:, 1] += y[:, 0]
        data = tmp_path / "d.csv"
        np.savetxt(data, y, delimiter=",", header="v1,v2,v3,v4", comments="")
        out = tmp_path / "fit"
        assert cli_main(["fit", "--data", str(data), "--out", str(out), "--center", "--negate", "2",
                         "--seed", "3"] + SHORT) == 0
        printed = capsys.readouterr().out
        assert "posterior mean H*" in printed and "95% credible interval" in printed
        store = read_draws(out)
        assert len(store) == 100 and store.manifest["data.negate_columns"] == 2
        assert store.manifest["settings.seed"] == 3

        assert cli_main(["summarize", "--draws", str(out), "--level", "0.9"]) == 0
        printed = capsys.readouterr().out
        assert "90% credible interval" in printed and "mean squared deviation" in printed
        for name in ("omega_mean.csv", "corr_mean.csv", "corr_lower.csv", "corr_upper.csv", "summary.json"):
            assert (out / name).exists()
        lo = np.loadtxt(out / "corr_lower.csv", delimiter=",")
        hi = np.loadtxt(out / "corr_upper.csv", delimiter=",")
        assert np.all(lo <= hi) and np.allclose(np.diag(lo), 1.0)

    def test_fit_is_deterministic(self, tmp_path, capsys):
        data = _csv(tmp_path, "a,b,c\n" + "\n".join(f"{i % 3},{i % 5},{(i * 7) % 4}" for i in range(25)) + "\n")
        for d in ("x", "y"):
            assert cli_main(["fit", "--data", str(data), "--out", str(tmp_path / d)] + SHORT) == 0
        for name in ("omega.csv", "traces.csv", "manifest.txt", "sample_corr.csv"):
            assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()

    def test_fit_bad_csv(self, tmp_path, capsys):
        data = _csv(tmp_path, "a,b\n1,\n")
        assert cli_main(["fit", "--data", str(data), "--out", str(tmp_path / "o")]) == 1
        assert "row 2, column 'b'" in capsys.readouterr().err

    def test_runtime_failure_exit_code(self, tmp_path, monkeypatch, capsys):
        def boom(*args, **kwargs):
            raise NumericalError("Cholesky failed")

        monkeypatch.setattr(cli, "run_chain", boom)
        data = _csv(tmp_path, "a,b\n1,2\n3,5\n")
        assert cli_main(["fit", "--data", str(data), "--out", str(tmp_path / "o")]) == 2

    def test_summarize_missing_dir(self, tmp_path, capsys):
        assert cli_main(["summarize", "--draws", str(tmp_path / "nothing")]) == 1

    def test_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"method": "mgp", "n_iterations": 200, "burn_in": 50, "thin": 5, "t_bar": 20}))
        out = tmp_path / "s"
        assert cli_main(["simulate", "--p", "5", "--h0", "2", "--n", "20", "--replicates", "1",
                         "--config", str(cfg), "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["scenario"]["method"] == "mgp" and summary["scenario"]["settings"]["n_iterations"] == 200
