import json

import pytest

from app import EXIT_CAMPAIGN_FAILURE, EXIT_CONFIG_ERROR, EXIT_OK, build_parser, main, overrides_from_args


def write_config(tmp_path, **values):
    doc = {
        "environment": "lander",
        "methods": ["random"],
        "seeds": [0],
        "campaign": {"budget": 20, "init_budget": 5, "population_size": 5, "iterations": 4},
        "sparseness_checkpoint": 5,
    }
    doc.update(values)
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(doc))
    return str(path)


class TestParser:

    def test_overrides_leave_out_unset_flags(self):
        args = build_parser().parse_args(["run", "--env", "lander", "--seeds", "0", "1"])
        assert overrides_from_args(args) == {"environment": "lander", "seeds": [0, 1]}

    def test_sweep_defaults_to_walker(self):
        args = build_parser().parse_args(["rq3-sweep"])
        assert overrides_from_args(args)["environment"] == "walker"

    def test_unknown_preset_is_rejected(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["run", "--preset", "huge"])


class TestMain:

    def test_validate_config(self, capsys):
        assert main(["validate-config", "--env", "walker", "--seeds", "0", "1"]) == EXIT_OK
        out = capsys.readouterr().out
        assert '"environment": "walker"' in out
        assert "8 campaigns" in out

    def test_unknown_environment(self, capsys):
        assert main(["validate-config", "--env", "submarine"]) == EXIT_CONFIG_ERROR
        assert "submarine" in capsys.readouterr().err

    def test_train_policy_for_heuristic_environment(self, capsys):
        assert main(["train-policy", "--env", "lander"]) == EXIT_OK
        assert "nothing to train" in capsys.readouterr().out

    def test_run_without_taxi_policy(self, tmp_path):
        code = main(["run", "--env", "taxi", "--policy-path", str(tmp_path / "none.txt"),
                     "--out", str(tmp_path / "runs")])
        assert code == EXIT_CONFIG_ERROR

    def test_run_and_report(self, tmp_path, capsys):
        config = write_config(tmp_path)
        out = str(tmp_path / "runs")
        assert main(["run", "--config", config, "--out", out]) == EXIT_OK
        assert "Run complete" in capsys.readouterr().out
        assert main(["report", "--out", out]) == EXIT_OK
        assert "Metrics regenerated" in capsys.readouterr().out

    def test_campaign_failure_exit_code(self, tmp_path, monkeypatch):
        import harness

        def crash(*args):
            raise RuntimeError("boom")

        monkeypatch.setattr(harness, "run_method", crash)
        config = write_config(tmp_path)
        assert main(["run", "--config", config, "--out", str(tmp_path / "runs")]) == EXIT_CAMPAIGN_FAILURE
