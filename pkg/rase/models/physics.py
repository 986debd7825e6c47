import math
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator


Regime = Literal["ground", "excited"]
EventKind = Literal["pi", "weak"]
ModeKind = Literal["input-field-bin", "initial-ground-atomic", "initial-excited-atomic"]


class PhysicalParams(BaseModel):
    """物理参数：单位长度光学深度 alpha 与样品长度 l"""

    alpha: float = Field(..., ge=0.0, description="单位长度光学深度 (1/length)")
    length: float = Field(..., gt=0.0, description="样品长度 l")

    class Config:
        frozen = True
        json_schema_extra = {"example": {"alpha": 1.0, "length": 1.0}}

    @property
    def alpha_l(self) -> float:
        return self.alpha * self.length

    @classmethod
    def from_alpha_l(cls, alpha_l: float, length: float = 1.0) -> "PhysicalParams":
        return cls(alpha=alpha_l / length, length=length)


class SimulationGrid(BaseModel):
    """时间、失谐、传播三个轴的离散网格，附带有效性标记"""

    t_start: float
    t_stop: float
    n_t: int = Field(..., gt=0)
    detuning_width: float = Field(..., gt=0.0, description="失谐半宽 W")
    n_delta: int = Field(..., gt=0)
    length: float = Field(..., gt=0.0)
    n_z: int = Field(..., gt=0)
    white_noise_threshold: float = 20.0
    detuning_resolution_threshold: float = 0.5
    white_noise_valid: bool = True
    detuning_resolved: bool = True

    class Config:
        frozen = True

    @property
    def dt(self) -> float:
        return (self.t_stop - self.t_start) / self.n_t

    @property
    def d_delta(self) -> float:
        return 2.0 * self.detuning_width / self.n_delta

    @property
    def dz(self) -> float:
        return self.length / self.n_z

    @property
    def window(self) -> float:
        return self.t_stop - self.t_start

    @property
    def t_edges(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_t + 1)

    @property
    def t_centers(self) -> np.ndarray:
        return self.t_start + self.dt * (np.arange(self.n_t) + 0.5)

    @property
    def delta_centers(self) -> np.ndarray:
        return -self.detuning_width + self.d_delta * (np.arange(self.n_delta) + 0.5)

    @property
    def z_edges(self) -> np.ndarray:
        return self.dz * np.arange(self.n_z + 1)

    def boundary_index(self, t: float, tol: float = 1e-9) -> Optional[int]:
        """时间 t 对应的 bin 边界序号；不在边界上时返回 None"""
        b = (t - self.t_start) / self.dt
        nearest = round(b)
        if abs(b - nearest) > tol:
            return None
        return int(nearest)

    def bins_in(self, start: float, stop: float) -> np.ndarray:
        """中心落在 [start, stop) 内的 bin 序号"""
        centers = self.t_centers
        return np.flatnonzero((centers >= start) & (centers < stop))

    def mirror_bin(self, i: int, t_mirror: float) -> int:
        """关于边界时间 t_mirror 镜像对称的 bin 序号"""
        b = self.boundary_index(t_mirror)
        if b is None:
            raise ValueError(f"mirror time {t_mirror} is not a bin boundary")
        return 2 * b - 1 - i

    def to_json(self) -> str:
        return self.model_dump_json()

    @classmethod
    def from_json(cls, payload: str) -> "SimulationGrid":
        return cls.model_validate_json(payload)


class PulseEvent(BaseModel):
    """脉冲事件：理想 pi 脉冲或弱输入"""

    time: float
    kind: EventKind
    amplitude: Optional[List[float]] = Field(None, description="弱输入的逐 bin 相干振幅（实部）")
    transverse_k: Tuple[float, float] = (0.0, 0.0)

    class Config:
        frozen = True


class Region(BaseModel):
    """相邻脉冲之间的区间及其线性化区域（基态/激发态）"""

    start: float
    stop: float
    regime: Regime
    closing_pulse: Optional[PulseEvent] = None

    class Config:
        frozen = True

    def contains(self, t: float) -> bool:
        return self.start <= t < self.stop


class PulseSequence(BaseModel):
    """有序脉冲序列与推导出的区域标签"""

    events: Tuple[PulseEvent, ...] = ()
    regions: Tuple[Region, ...] = ()

    class Config:
        frozen = True

    @property
    def pi_pulses(self) -> List[PulseEvent]:
        return [e for e in self.events if e.kind == "pi"]

    def region_at(self, t: float) -> Region:
        for region in self.regions:
            if region.contains(t):
                return region
        raise ValueError(f"time {t} lies before the first region")


class LedgerEntry(BaseModel):
    """单个离散输入模的登记信息"""

    id: int
    kind: ModeKind
    t_bin: Optional[int] = None
    z_slice: Optional[int] = None
    atomic_label: Optional[int] = None
    measure: float = Field(..., gt=0.0, description="bin 测度（dt 或 dz*dt）")
    normalization: float

    class Config:
        frozen = True

    @model_validator(mode="after")
    def _check_unit_commutator(self):
        if abs(self.normalization ** 2 * self.measure - 1.0) > 1e-12:
            raise ValueError("normalization does not give a unit commutator")
        return self


class ModeLedger(BaseModel):
    """Bogoliubov 映射输入模的账本"""

    entries: Tuple[LedgerEntry, ...] = ()

    class Config:
        frozen = True

    @field_validator("entries")
    @classmethod
    def _unique_ids(cls, entries):
        ids = [e.id for e in entries]
        if len(ids) != len(set(ids)):
            raise ValueError("ledger ids must be unique")
        return entries

    def __len__(self) -> int:
        return len(self.entries)

    def resolve(self, mode_id: int) -> LedgerEntry:
        matches = [e for e in self.entries if e.id == mode_id]
        if len(matches) != 1:
            raise KeyError(mode_id)
        return matches[0]

    def columns_of(self, kind: ModeKind) -> np.ndarray:
        return np.array([e.id for e in self.entries if e.kind == kind], dtype=int)

    def field_column(self, t_bin: int) -> int:
        for e in self.entries:
            if e.kind == "input-field-bin" and e.t_bin == t_bin:
                return e.id
        raise KeyError(t_bin)


def field_entry(mode_id: int, t_bin: int, dt: float) -> LedgerEntry:
    return LedgerEntry(id=mode_id, kind="input-field-bin", t_bin=t_bin,
                       measure=dt, normalization=1.0 / math.sqrt(dt))


def atomic_entry(mode_id: int, kind: ModeKind, z_slice: int, label: int, dz: float, dt: float) -> LedgerEntry:
    measure = dz * dt
    return LedgerEntry(id=mode_id, kind=kind, z_slice=z_slice, atomic_label=label,
                       measure=measure, normalization=1.0 / math.sqrt(measure))


class GridSpec(BaseModel):
    """请求的网格分辨率（n_t 与 dt 二选一）"""

    n_t: Optional[int] = Field(None, description="时间 bin 数")
    dt: Optional[float] = Field(None, description="时间 bin 宽度")
    detuning_width: float = Field(..., description="失谐半宽 W")
    n_delta: int = Field(200, description="失谐 bin 数")
    n_z: int = Field(64, description="传播切片数")

    class Config:
        frozen = True
        json_schema_extra = {
            "example": {"n_t": 64, "detuning_width": 400.0, "n_delta": 200, "n_z": 64}
        }
