import yaml
from click.testing import CliRunner

from riskbandits.cli import main


def run(*args):
    return CliRunner().invoke(main, list(args), catch_exceptions=False)


class TestListInstances:
    def test_lists_catalog(self):
        result = run("list-instances")
        assert result.exit_code == 0
        assert "lomax-cvar" in result.output
        assert "gap=0.45" in result.output


class TestRunExperiment:
    def test_builtin_smoke_and_determinism(self, tmp_path):
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        args = (
            "run-experiment", "--instance", "exponential-mean",
            "--trials", "5", "--budgets", "200,400", "--out",
        )
        res1 = run(*args, str(out1))
        assert res1.exit_code == 0, res1.output
        res2 = run(*args, str(out2))
        assert res2.exit_code == 0
        assert out1.read_bytes() == out2.read_bytes()
        lines = out1.read_text().splitlines()
        assert lines[0].startswith("instance,schedule,estimator")
        # three default families x two budgets
        assert len(lines) == 1 + 6

    def test_config_file_with_bad_shape_names_field(self, tmp_path):
        config = {
            "instance": {
                "objective": {"alpha": 0.95, "xi1": 1.0, "xi2": 0.0},
                "arms": [
                    {"kind": "exponential", "mean": 1.0},
                    {"kind": "lomax", "mean": 1.0, "shape": 0.9},
                ],
            },
            "budgets": [100],
            "trials": 2,
        }
        path = tmp_path / "bad.yaml"
        path.write_text(yaml.safe_dump(config))
        result = run("run-experiment", "--config", str(path), "--out", str(tmp_path / "o.csv"))
        assert result.exit_code != 0
        assert "arms[1].shape" in result.output or "arms[1].lomax" in result.output

    def test_requires_exactly_one_source(self, tmp_path):
        result = run("run-experiment", "--out", str(tmp_path / "x.csv"))
        assert result.exit_code != 0
        assert "exactly one" in result.output

    def test_unknown_flag_is_an_error(self):
        result = run("run-experiment", "--frobnicate", "1")
        assert result.exit_code != 0


class TestComputeBounds:
    def test_prints_csv_table(self):
        result = run(
            "compute-bounds", "-p", "2.0", "-B", "1.0", "-V", "1.0",
            "--delta", "1.0", "--alpha", "0.95", "--n", "1000",
        )
        assert result.exit_code == 0, result.output
        lines = result.output.strip().splitlines()
        assert lines[0] == "name,value,validity_threshold"
        names = [line.split(",")[0] for line in lines[1:]]
        assert "v_emp" in names and "truncated_cvar" in names and "sr_truncation" in names
        row = dict(zip(names, [line.split(",")[1] for line in lines[1:]]))
        assert abs(float(row["v_emp"]) - 120.0) < 1e-9

    def test_invalid_prior_rejected(self):
        result = run("compute-bounds", "-p", "3.0", "-B", "1", "-V", "1", "--delta", "1")
        assert result.exit_code != 0
        assert "moment_order" in result.output


class TestValidateConcentrationCommand:
    def test_smoke_run(self):
        result = run(
            "validate-concentration",
            "--dist", "{kind: exponential, mean: 1.0}",
            "--estimator", "empirical", "--target", "mean",
            "--bound", "empirical_mean", "--n-grid", "100,200",
            "--delta", "1.0", "--batches", "2000", "-p", "2.0",
        )
        assert result.exit_code == 0, result.output
        lines = result.output.strip().splitlines()
        assert lines[0].startswith("n,frequency")
        assert len(lines) == 3

    def test_bad_distribution_rejected(self):
        result = run(
            "validate-concentration", "--dist", "{kind: nope}",
            "--estimator", "empirical", "--target", "mean",
            "--bound", "empirical_mean", "--n-grid", "10", "--delta", "1",
        )
        assert result.exit_code != 0
        assert "kind" in result.output


class TestDemoLowerBound:
    def test_default_grid_monotone(self, tmp_path):
        out = tmp_path / "demo.csv"
        result = run("demo-lower-bound", "--cutoffs", "10,100,1000", "--out", str(out))
        assert result.exit_code == 0, result.output
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("cutoff,admissible,chi1,kl")
        rows = [line.split(",") for line in lines[1:]]
        kls = [float(r[3]) for r in rows]
        objs = [float(r[5]) for r in rows]
        assert kls[0] > kls[1] > kls[2]
        assert objs[0] < objs[1] < objs[2]

    def test_inadmissible_cutoff_flagged_not_fatal(self):
        result = run(
            "demo-lower-bound", "--base", "{kind: pareto, scale: 2.0, shape: 1.5}",
            "--cutoffs", "3,100",
        )
        assert result.exit_code == 0, result.output
        lines = result.output.strip().splitlines()
        first = lines[1].split(",")
        assert first[1] == "False"
        assert "minimal admissible" in lines[1]
        assert lines[2].split(",")[1] == "True"


class TestHelp:
    def test_help_lists_subcommands(self):
        result = run("--help")
        assert result.exit_code == 0
        for sub in ("run-experiment", "validate-concentration", "compute-bounds",
                    "demo-lower-bound", "list-instances"):
            assert sub in result.output

    def test_run_experiment_help_lists_flags(self):
        result = run("run-experiment", "--help")
        for flag in ("--config", "--instance", "--trials", "--budgets", "--seed",
                     "--workers", "--out", "--paper-scale"):
            assert flag in result.output
