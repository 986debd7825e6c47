import logging
import platform
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd
import pydantic
import scipy

from rase import __version__
from rase.config import get_settings
from rase.exceptions import (
    ConfigError,
    GridError,
    OracleCapError,
    PairingError,
    RaseError,
    RegimeError,
    SequenceError,
    StepConditionError,
    UnknownExperimentError,
    WindowError,
)
from rase.models.experiment import ExperimentConfig, ExperimentResult
from rase.runner.experiments import EXPERIMENTS, ExperimentRegistry
from rase.services import correlator_service as corr
from rase.services.export_service import map_metadata, write_csv, write_json, write_map

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_TOLERANCE = 1
EXIT_CONFIG = 2
EXIT_INTERNAL = 3

# 由输入决定、重新配置即可修复的错误
CONFIG_ERRORS = (ConfigError, GridError, SequenceError, RegimeError, WindowError,
                 OracleCapError, StepConditionError, PairingError)


class ExperimentRunner:
    """实验运行器 - 分派实验并写出结果文件"""

    def __init__(self, threads: Optional[int] = None):
        """
        初始化运行器
        Args:
            threads: 映射构建与扫描的线程数，默认取配置
        """
        self.threads = threads if threads is not None else get_settings().threads

    def execute_experiment(self, config: ExperimentConfig, verify: bool = False) -> Dict[str, Any]:
        """
        执行一个实验

        Args:
            config: 实验配置
            verify: 是否追加对照检查
        Returns:
            {"success": True, "result": ExperimentResult} 或错误字典
        """
        try:
            if config.experiment not in EXPERIMENTS:
                raise UnknownExperimentError(
                    f"Unknown experiment: {config.experiment}",
                    known=ExperimentRegistry.names(),
                )
            runner = EXPERIMENTS[config.experiment]
            result = runner(config, verify=verify, threads=self.threads)
            return {"success": True, "result": result}
        except RaseError as e:
            logger.error("experiment %s failed: %s", config.experiment, e)
            return e.to_dict()
        except Exception as e:
            logger.exception("experiment %s crashed", config.experiment)
            return {"success": False, "code": "internal-error", "error": str(e), "details": {}}

    def run(self, config: ExperimentConfig, out_dir: Optional[str] = None, verify: bool = False) -> int:
        """运行实验并写出 results.csv / metadata.json / summary.json（失败时写 error.json）"""
        target = Path(out_dir or config.output_dir or get_settings().output_dir)
        try:
            target.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            logger.error("output directory %s is not writable: %s", target, e)
            return EXIT_CONFIG

        digest = config.config_hash
        metadata = self._metadata(config, digest, verify)
        outcome = self.execute_experiment(config, verify=verify)

        if not outcome["success"]:
            write_json({**outcome, "config_sha256": digest}, target / "error.json")
            write_json(metadata, target / "metadata.json")
            return EXIT_CONFIG if outcome["code"] in _config_codes() else EXIT_INTERNAL

        result: ExperimentResult = outcome["result"]
        metadata["references"] = result.references
        write_csv(result.frame, target / "results.csv", digest)
        self._write_artifacts(result, target, digest)
        write_json(metadata, target / "metadata.json")
        write_json({
            "experiment": config.experiment,
            "config_sha256": digest,
            "passed": result.passed,
            "checks": [check.model_dump() for check in result.checks],
        }, target / "summary.json")

        logger.info("%s: %s (%d checks)", config.experiment, "pass" if result.passed else "FAIL", len(result.checks))
        return EXIT_PASS if result.passed else EXIT_TOLERANCE

    def _write_artifacts(self, result: ExperimentResult, target: Path, digest: str) -> None:
        """附加产物：矩表、轨迹、配对表等 CSV，二进制映射及其 JSON 说明，网格 JSON"""
        for name, frame in result.tables.items():
            write_csv(frame, target / f"{name}.csv", digest)
        for name, bmap in result.maps.items():
            write_map(bmap, target / f"{name}.bin")
            write_json(map_metadata(bmap, digest), target / f"{name}.json")
        if result.grid is not None:
            write_json({"config_sha256": digest, "grid": result.grid.model_dump()}, target / "grid.json")

    def _metadata(self, config: ExperimentConfig, digest: str, verify: bool) -> Dict[str, Any]:
        alpha_l = config.params.alpha_l
        references: Dict[str, float] = {
            "closed_form_efficiency": corr.closed_form_efficiency(alpha_l),
            "closed_form_ase_flux": corr.closed_form_ase_flux(alpha_l),
            "classical_bound_R": 1.0,
        }
        if alpha_l > 0:
            references["closed_form_R"] = corr.closed_form_R(alpha_l)
            references["linearized_R"] = corr.linearized_R(alpha_l)
        return {
            "config": config.model_dump(mode="json"),
            "config_sha256": digest,
            "verify": verify,
            "threads": self.threads,
            "tolerances": config.tolerances.model_dump(),
            "closed_form": references,
            "versions": {
                "rase": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "pandas": pd.__version__,
                "pydantic": pydantic.VERSION,
            },
        }


def _config_codes():
    return {cls.code for cls in CONFIG_ERRORS} | {UnknownExperimentError.code}
