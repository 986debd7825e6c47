from pydantic_settings import BaseSettings
from functools import lru_cache
from typing import Optional


class Settings(BaseSettings):
    """应用配置（环境变量前缀 RASE_，可写在 .env 中）"""

    # 网格有效性阈值
    white_noise_threshold: float = 20.0  # W * dt 下限
    detuning_resolution_threshold: float = 0.5  # dDelta * T_total 上限

    # 数值容差（与验收标准一致）
    symplectic_bound: float = 1e-8
    scan_rel_tol: float = 0.02
    echo_rel_tol: float = 0.02
    ase_rel_tol: float = 0.02
    transmission_rel_tol: float = 0.01
    area_rel_tol: float = 0.01
    oracle_rel_tol: float = 0.02  # 与失谐分辨对照的差，随 1/(W dt) 收敛
    linear_consistency_rel_tol: float = 1e-3
    wick_abs_tol: float = 1e-10
    phasematch_rel_tol: float = 0.01

    # 引擎规模上限
    max_matrix_bytes: float = 2e9
    oracle_max_bins: int = 16
    oracle_max_slices: int = 64
    oracle_bins: int = 4
    oracle_slices: int = 8
    oracle_white_noise_product: float = 100.0  # 对照网格的 W * dt
    oracle_edge_margin: float = 5.0  # 以 1/W 计

    # 运行
    threads: int = 1
    output_dir: str = "results"
    log_level: str = "INFO"
    config_path: Optional[str] = None

    class Config:
        env_file = ".env"
        env_prefix = "RASE_"
        case_sensitive = False
        extra = 'ignore'


@lru_cache()
def get_settings() -> Settings:
    """获取配置单例"""
    return Settings()
