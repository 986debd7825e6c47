import hashlib
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field

from rase.config import get_settings
from rase.models.bloch import PulseProfile
from rase.models.physics import GridSpec, PhysicalParams


class Tolerances(BaseModel):
    """验收容差，默认值取自 Settings"""

    symplectic_bound: float
    scan_rel_tol: float
    echo_rel_tol: float
    ase_rel_tol: float
    transmission_rel_tol: float
    area_rel_tol: float
    oracle_rel_tol: float
    linear_consistency_rel_tol: float
    wick_abs_tol: float
    phasematch_rel_tol: float

    @classmethod
    def from_settings(cls) -> "Tolerances":
        settings = get_settings()
        return cls(**{name: getattr(settings, name) for name in cls.model_fields})


class SequenceSpec(BaseModel):
    """脉冲时刻；缺省值由各实验按窗口推导"""

    t_pi1: Optional[float] = Field(None, description="RASE 第一个 pi（默认窗口起点）")
    t_pi2: float = Field(0.0, description="RASE 第二个 pi / 非理想 pi 的第二个脉冲")
    t_pi: Optional[float] = Field(None, description="回波实验的 pi 时刻（默认窗口中点）")
    ase_bin: Optional[int] = Field(None, description="RASE 探测的 ASE bin")


class TransverseSpec(BaseModel):
    n: int = Field(5, gt=0, description="每个方向的横向模数")
    dk: float = Field(1.0, gt=0.0)
    k_pi: Tuple[float, float] = (0.0, 0.0)
    k_bins: Optional[List[Tuple[float, float]]] = Field(None, description="显式横向波矢，缺省为以 k_pi 为中心的 n x n 方格")
    allow_unmatched: bool = Field(False, description="允许网格对 k -> 2 k_pi - k 不闭合")


class ExperimentConfig(BaseModel):
    """一次运行的完整 JSON 配置"""

    experiment: str = Field(..., description="实验名称，见 `rase experiments`")
    params: PhysicalParams = Field(default_factory=lambda: PhysicalParams(alpha=1.0, length=1.0))
    grid: GridSpec = Field(default_factory=lambda: GridSpec(n_t=64, detuning_width=400.0))
    window: Tuple[float, float] = Field((-1.0, 1.0), description="模拟时间窗口")
    sequence: SequenceSpec = Field(default_factory=SequenceSpec)
    alpha_l_values: List[float] = Field(default_factory=lambda: [0.25, 0.5, 1.0, 1.5, 2.0])
    pulse: Optional[PulseProfile] = None
    error_angle: float = Field(0.1, ge=0.0)
    transverse: TransverseSpec = Field(default_factory=TransverseSpec)
    tolerances: Tolerances = Field(default_factory=Tolerances.from_settings)
    output_dir: Optional[str] = None
    seed: int = Field(0, description="保留字段，确定性运行不使用")

    class Config:
        json_schema_extra = {
            "example": {
                "experiment": "cs-scan",
                "alpha_l_values": [0.25, 0.5, 1.0, 1.5, 2.0],
                "grid": {"n_t": 64, "detuning_width": 400.0, "n_delta": 200, "n_z": 64},
            }
        }

    def canonical_json(self) -> str:
        return self.model_dump_json()

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


class CheckResult(BaseModel):
    """单项验收结果"""

    name: str
    value: float
    expected: float
    error: float
    tolerance: float
    passed: bool
    note: Optional[str] = None

    @classmethod
    def relative(cls, name: str, value: float, expected: float, tolerance: float, note: Optional[str] = None):
        error = abs(value - expected) / abs(expected) if expected != 0 else abs(value)
        return cls(name=name, value=value, expected=expected, error=error,
                   tolerance=tolerance, passed=bool(error <= tolerance), note=note)

    @classmethod
    def absolute(cls, name: str, value: float, expected: float, tolerance: float, note: Optional[str] = None):
        error = abs(value - expected)
        return cls(name=name, value=value, expected=expected, error=error,
                   tolerance=tolerance, passed=bool(error <= tolerance), note=note)

    @classmethod
    def condition(cls, name: str, passed: bool, value: float = 0.0, note: Optional[str] = None):
        return cls(name=name, value=value, expected=0.0, error=0.0, tolerance=0.0, passed=bool(passed), note=note)


class ExperimentResult(BaseModel):
    """实验输出：结果表、验收项与闭式参考值"""

    experiment: str
    frame: Any = Field(..., description="pandas.DataFrame 结果表")
    checks: List[CheckResult] = Field(default_factory=list)
    references: Dict[str, float] = Field(default_factory=dict)
    tables: Dict[str, Any] = Field(default_factory=dict, description="附加 CSV 表，文件名 -> DataFrame")
    maps: Dict[str, Any] = Field(default_factory=dict, description="导出的 Bogoliubov 映射，文件名 -> BogoliubovMap")
    grid: Optional[Any] = Field(None, description="运行所用的 SimulationGrid")

    class Config:
        arbitrary_types_allowed = True

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)