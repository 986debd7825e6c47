import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from rase import __version__
from rase.config import get_settings
from rase.runner.experiments import ExperimentRegistry
from rase.runner.server import EXIT_CONFIG, ExperimentRunner
from rase.models.experiment import ExperimentConfig
from rase.services.export_service import write_json

logger = logging.getLogger("rase")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rase", description="光子回波 / RASE 关联模拟")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="按 JSON 配置运行一个实验")
    run.add_argument("--config", required=True, help="实验配置 JSON 路径")
    run.add_argument("--out", help="输出目录（覆盖配置中的 output_dir）")
    run.add_argument("--threads", type=int, help="扫描线程数")
    run.add_argument("--verify", action="store_true", help="追加对照检查")

    commands.add_parser("experiments", help="列出可用实验")
    return parser


def load_config(path: str) -> ExperimentConfig:
    return ExperimentConfig.model_validate_json(Path(path).read_text(encoding="utf-8"))


def _config_failure(message: str, out_dir: Optional[str]) -> int:
    logger.error(message)
    if out_dir:
        target = Path(out_dir)
        target.mkdir(parents=True, exist_ok=True)
        write_json({"success": False, "code": "config-error", "error": message, "details": {}},
                   target / "error.json")
    return EXIT_CONFIG


def main(argv: Optional[List[str]] = None) -> int:
    settings = get_settings()
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)

    if args.command == "experiments":
        for definition in ExperimentRegistry.get_experiment_definitions():
            print(f"{definition['name']:<14}{definition['description']}")
        return 0

    try:
        config = load_config(args.config)
    except FileNotFoundError:
        return _config_failure(f"config file not found: {args.config}", args.out)
    except (ValidationError, json.JSONDecodeError, ValueError) as e:
        return _config_failure(f"invalid config {args.config}: {e}", args.out)

    runner = ExperimentRunner(threads=args.threads)
    return runner.run(config, out_dir=args.out, verify=args.verify)


if __name__ == "__main__":
    sys.exit(main())
