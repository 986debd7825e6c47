import json

import pytest

from rase.main import main
from rase.models.experiment import ExperimentConfig
from rase.runner.experiments import EXPERIMENTS, ExperimentRegistry, check_registry
from rase.runner.server import EXIT_CONFIG, EXIT_PASS, EXIT_TOLERANCE, ExperimentRunner
from rase.services.export_service import read_csv, read_map

SMALL_GRID = {"n_t": 8, "detuning_width": 400.0, "n_delta": 50, "n_z": 8}


def _config(experiment: str, **overrides) -> ExperimentConfig:
    payload = {"experiment": experiment, "grid": SMALL_GRID}
    payload.update(overrides)
    return ExperimentConfig.model_validate(payload)


def _summary(path):
    return json.loads((path / "summary.json").read_text(encoding="utf-8"))


def test_registry_complete():
    """测试注册表与实验定义一致"""
    check_registry()
    assert set(EXPERIMENTS) == {
        "absorb", "echo", "ase", "rase", "cs-scan", "area", "imperfect-pi", "phasematch", "oracle-check",
    }
    assert ExperimentRegistry.names()[0] == "absorb"


def test_config_round_trip():
    """测试配置序列化不变"""
    config = _config("rase", params={"alpha": 2.0, "length": 1.0})
    again = ExperimentConfig.model_validate_json(config.canonical_json())
    assert again == config
    assert again.config_hash == config.config_hash


def test_unknown_experiment(tmp_path):
    """测试未知实验名称"""
    code = ExperimentRunner().run(_config("teleport"), out_dir=str(tmp_path))
    assert code == EXIT_CONFIG
    error = json.loads((tmp_path / "error.json").read_text(encoding="utf-8"))
    assert error["code"] == "unknown-experiment"
    assert error["success"] is False


ARTIFACTS = {
    "absorb": ["map.bin", "map.json", "grid.json"],
    "echo": ["map.bin", "map.json", "grid.json"],
    "ase": ["map.bin", "map.json", "moments.csv", "grid.json"],
    "rase": ["map.bin", "map.json", "moments.csv", "grid.json"],
}


@pytest.mark.parametrize("experiment", ["absorb", "echo", "ase", "rase"])
def test_map_experiments_pass(tmp_path, experiment):
    """测试映射类实验在小网格上通过并写出附加产物"""
    config = _config(experiment)
    code = ExperimentRunner().run(config, out_dir=str(tmp_path))
    assert code == EXIT_PASS
    summary = _summary(tmp_path)
    assert summary["passed"] is True
    assert summary["config_sha256"] == config.config_hash
    first_line = (tmp_path / "results.csv").read_text(encoding="utf-8").splitlines()[0]
    assert first_line == f"# config_sha256={config.config_hash}"
    for name in ARTIFACTS[experiment]:
        assert (tmp_path / name).exists(), name


def test_map_artifact_round_trip(tmp_path):
    """测试导出的二进制映射与说明文件一致"""
    config = _config("rase")
    ExperimentRunner().run(config, out_dir=str(tmp_path))
    bmap = read_map(tmp_path / "map.bin")
    meta = json.loads((tmp_path / "map.json").read_text(encoding="utf-8"))
    assert meta["config_sha256"] == config.config_hash
    assert (meta["rows"], meta["cols"]) == (bmap.n_out, bmap.n_in)
    assert meta["regime_after"] == "ground"
    assert meta["symplectic_residual"] < 1e-10
    grid = json.loads((tmp_path / "grid.json").read_text(encoding="utf-8"))
    assert grid["grid"]["n_t"] == SMALL_GRID["n_t"]
    moments = read_csv(tmp_path / "moments.csv")
    assert len(moments) > 0


@pytest.mark.slow
@pytest.mark.parametrize("experiment", ["absorb", "ase", "oracle-check"])
def test_verified_runs_include_oracle(tmp_path, experiment):
    """测试 --verify 时附带失谐分辨对照并通过"""
    code = ExperimentRunner().run(_config(experiment), out_dir=str(tmp_path), verify=True)
    assert code == EXIT_PASS
    names = {check["name"] for check in _summary(tmp_path)["checks"]}
    assert "oracle_ground" in names or "oracle_excited" in names
    if experiment == "oracle-check":
        assert {"oracle_ground_converges_in_W", "oracle_excited_converges_in_W", "oracle_ase_flux"} <= names
        assert (tmp_path / "moments.csv").exists()


def test_echo_reports_both_efficiencies(tmp_path):
    """测试回波实验同时给出两种闭式参考"""
    ExperimentRunner().run(_config("echo"), out_dir=str(tmp_path))
    frame = read_csv(tmp_path / "results.csv")
    assert frame["closed_form"].iloc[0] == pytest.approx(0.27154, abs=1e-5)
    assert frame["linearized"].iloc[0] == pytest.approx(1.08616, abs=1e-5)
    metadata = json.loads((tmp_path / "metadata.json").read_text(encoding="utf-8"))
    assert metadata["closed_form"]["closed_form_efficiency"] == pytest.approx(0.27154, abs=1e-5)
    assert "versions" in metadata


def test_cs_scan(tmp_path):
    """测试 R(alpha l) 扫描实验"""
    config = _config("cs-scan", alpha_l_values=[0.25, 0.5, 1.0, 1.5, 2.0])
    code = ExperimentRunner(threads=2).run(config, out_dir=str(tmp_path), verify=True)
    assert code == EXIT_PASS
    frame = read_csv(tmp_path / "results.csv")
    assert list(frame["alpha_l"]) == [0.25, 0.5, 1.0, 1.5, 2.0]
    assert (frame["r_numeric"] > 1.0).all()


def test_rerun_is_bit_identical(tmp_path):
    """测试同一配置重跑 CSV 逐字节一致"""
    config = _config("rase")
    ExperimentRunner().run(config, out_dir=str(tmp_path / "a"))
    ExperimentRunner().run(config, out_dir=str(tmp_path / "b"))
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()


def test_phasematch_experiment(tmp_path):
    """测试相位匹配实验写出配对表"""
    config = _config("phasematch", transverse={"n": 3, "dk": 1.0, "k_pi": [1.0, 0.0]})
    assert ExperimentRunner().run(config, out_dir=str(tmp_path)) == EXIT_PASS
    pairing = read_csv(tmp_path / "pairing.csv")
    assert len(pairing) == 9


def test_open_transverse_grid_is_config_error(tmp_path):
    """测试显式横向网格对 k -> 2 k_pi - k 不闭合时按配置错误退出"""
    transverse = {"k_pi": [1.0, 0.0], "k_bins": [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]}
    code = ExperimentRunner().run(_config("phasematch", transverse=transverse), out_dir=str(tmp_path))
    assert code == EXIT_CONFIG
    error = json.loads((tmp_path / "error.json").read_text(encoding="utf-8"))
    assert error["code"] == "pairing-error"

    transverse["allow_unmatched"] = True
    code = ExperimentRunner().run(_config("phasematch", transverse=transverse), out_dir=str(tmp_path / "loose"))
    assert code in (EXIT_PASS, EXIT_TOLERANCE)


def test_area_writes_trajectory(tmp_path):
    """测试面积实验写出抽样后的轨迹长表"""
    config = _config(
        "area",
        params={"alpha": 0.5, "length": 1.0},
        grid={"n_t": 800, "detuning_width": 20.0, "n_delta": 80, "n_z": 16},
        window=[-2.0, 2.0],
        pulse={"shape": "sech", "amplitude": 5.0, "center": 0.0, "duration": 0.2},
    )
    code = ExperimentRunner().run(config, out_dir=str(tmp_path))
    assert code in (EXIT_PASS, EXIT_TOLERANCE)
    trajectory = read_csv(tmp_path / "trajectory.csv")
    assert list(trajectory.columns) == ["t", "z", "field_re", "field_im", "sigma_z_mean"]
    assert len(trajectory) == 801 * 17
    assert (tmp_path / "grid.json").exists()


def test_imperfect_pi_experiment(tmp_path):
    """测试非理想 pi 实验"""
    config = _config(
        "imperfect-pi",
        grid={"n_t": 1000, "detuning_width": 100.0, "n_delta": 200, "n_z": 2},
        window=[0.0, 1.0],
        sequence={"t_pi1": 0.0, "t_pi2": 0.3},
    )
    assert ExperimentRunner().run(config, out_dir=str(tmp_path)) == EXIT_PASS
    names = [check["name"] for check in _summary(tmp_path)["checks"]]
    assert names == ["dephased_before_second_pulse", "rephased_after_second_pulse"]


def test_step_condition_is_config_error(tmp_path):
    """测试积分步长不满足时按配置错误退出"""
    code = ExperimentRunner().run(_config("area"), out_dir=str(tmp_path))
    assert code == EXIT_CONFIG
    error = json.loads((tmp_path / "error.json").read_text(encoding="utf-8"))
    assert error["code"] == "step-condition"


def test_cli_run(tmp_path):
    """测试命令行入口"""
    config_path = tmp_path / "absorb.json"
    config_path.write_text(_config("absorb").canonical_json(), encoding="utf-8")
    out = tmp_path / "out"
    assert main(["run", "--config", str(config_path), "--out", str(out)]) == EXIT_PASS
    assert (out / "metadata.json").exists()


def test_cli_missing_config(tmp_path):
    """测试配置文件不存在"""
    assert main(["run", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert (tmp_path / "error.json").exists()


def test_cli_lists_experiments(capsys):
    """测试实验列表"""
    assert main(["experiments"]) == 0
    assert "cs-scan" in capsys.readouterr().out
