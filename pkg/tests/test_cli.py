import json
import sys

import pytest

from cli.main import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, main
from tests.test_experiment import NAN_CHILD, _payload, _report, _write_config


def _tiny(tmp_path, **overrides):
    payload = _payload(tmp_path, **overrides)
    payload["run"]["n_dead"] = 20
    return _write_config(tmp_path, payload)


def test_run_prints_summary(tmp_path, capsys):
    path = _tiny(tmp_path)
    code = main(["run", "--config", str(path), "--no-progress", "--output-dir", str(tmp_path / "o")])
    assert code == EXIT_OK
    assert "RESUMO" in capsys.readouterr().out
    assert (tmp_path / "o" / "report.json").exists()


def test_missing_config_is_config_error(tmp_path, capsys):
    code = main(["run", "--config", str(tmp_path / "nope.json")])
    assert code == EXIT_CONFIG
    assert "ERROR run:" in capsys.readouterr().err


def test_invalid_config_is_config_error(tmp_path, capsys):
    path = _tiny(tmp_path, operator={"kind": "masked_fourier", "fraction": 0.0})
    assert main(["run", "--config", str(path)]) == EXIT_CONFIG
    assert "fraction must be in (0, 1]" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path, capsys):
    model = {
        "kind": "data_driven",
        "denoiser": {"kind": "external", "command": [sys.executable, "-c", NAN_CHILD]},
    }
    path = _tiny(tmp_path, model=model)
    code = main(["run", "--config", str(path), "--no-progress"])
    assert code == EXIT_FAILURE
    err = capsys.readouterr().err
    assert "ERROR run:" in err
    assert "--debug" in err


def test_debug_prints_traceback(tmp_path, capsys):
    model = {
        "kind": "data_driven",
        "denoiser": {"kind": "external", "command": [sys.executable, "-c", NAN_CHILD]},
    }
    path = _tiny(tmp_path, model=model)
    assert main(["run", "--debug", "--config", str(path), "--no-progress"]) == EXIT_FAILURE
    assert "Traceback" in capsys.readouterr().err


def test_compare_writes_record(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    a.write_text(json.dumps(_report("learned", -1350.0, 1.0).to_dict()))
    b.write_text(json.dumps(_report("wavelet", -2960.0, 1.0).to_dict()))
    out = tmp_path / "cmp.json"
    assert main(["compare", str(a), str(b), "--output", str(out)]) == EXIT_OK
    record = json.loads(out.read_text())
    assert record["preferred"] == "learned"
    assert record["log_bayes_factor"] == pytest.approx(1610.0)
    assert json.loads(capsys.readouterr().out) == record


def test_compare_rejects_different_observations(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    a.write_text(json.dumps(_report("a", -1.0, 0.1, "h1").to_dict()))
    b.write_text(json.dumps(_report("b", -1.0, 0.1, "h2").to_dict()))
    assert main(["compare", str(a), str(b)]) == EXIT_CONFIG
    assert "data seed hash mismatch" in capsys.readouterr().err


def test_prior_sample(tmp_path):
    path = _tiny(tmp_path)
    assert main(["prior-sample", "--config", str(path), "--n-samples", "3"]) == EXIT_OK
    assert (tmp_path / "out" / "prior_samples.csv").exists()


def test_prox_check_passes(capsys):
    assert main(["prox-check", "--seed", "0"]) == EXIT_OK
    assert "wavelet_prox_vs_oracle" in capsys.readouterr().out


def test_unknown_command_exits_through_argparse():
    with pytest.raises(SystemExit):
        main(["fit"])
