from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from rase.models.physics import ModeLedger, PhysicalParams, Regime, Region, SimulationGrid


class KernelSet(BaseModel):
    """单个区域的离散核

    白噪声极限下动力学在时间上是局域的，所以每个时间 bin 共享同一组切片核：
    field_to_field 为标量，atom_to_field / field_to_atom 是长度 n_z 的向量，
    atom_to_atom 是 n_z x n_z 下三角矩阵。激发态区域的原子变量是 D_e^dagger。
    """

    regime: Regime
    region: Region
    bins: np.ndarray = Field(..., description="区域内的时间 bin 序号")
    transmission: complex
    atom_to_field_slice: np.ndarray
    field_to_atom_slice: np.ndarray
    atom_to_atom_slice: np.ndarray

    class Config:
        frozen = True
        arbitrary_types_allowed = True

    @property
    def conjugate_atoms(self) -> bool:
        return self.regime == "excited"

    @property
    def n_z(self) -> int:
        return self.atom_to_field_slice.shape[0]

    @property
    def field_to_field(self) -> np.ndarray:
        """(t_out, t_in) 核，对角"""
        return self.transmission * np.eye(len(self.bins), dtype=complex)

    @property
    def atom_to_field(self) -> np.ndarray:
        """(t_out, (z, tau)) 核，列按 bin 主序排列"""
        n_b = len(self.bins)
        return np.kron(np.eye(n_b), self.atom_to_field_slice[np.newaxis, :])

    @property
    def field_to_atom(self) -> np.ndarray:
        n_b = len(self.bins)
        return np.kron(np.eye(n_b), self.field_to_atom_slice[:, np.newaxis])

    @property
    def atom_to_atom(self) -> np.ndarray:
        n_b = len(self.bins)
        return np.kron(np.eye(n_b), self.atom_to_atom_slice)


class AtomicRegister(BaseModel):
    """一个原子时间模标签在所有 z 切片上的算符（用输入模的线性组合表示）"""

    columns: np.ndarray = Field(..., description="涉及的全局输入模 id")
    particle: np.ndarray = Field(..., description="(n_z, len(columns)) 湮灭算符系数")
    conjugate: np.ndarray = Field(..., description="(n_z, len(columns)) 产生算符系数")
    origin_label: int

    class Config:
        frozen = True
        arbitrary_types_allowed = True


class EnsembleState(BaseModel):
    """最后一个区域结束时的原子系综"""

    regime: Regime = "ground"
    registers: Dict[int, AtomicRegister] = Field(default_factory=dict)
    pulse_boundaries: Tuple[int, ...] = ()

    class Config:
        frozen = True
        arbitrary_types_allowed = True

    def origin_label(self, label: int) -> int:
        """把当前参考系下的标签反射回初始（首个脉冲之前）参考系"""
        for b in reversed(self.pulse_boundaries):
            label = 2 * b - 1 - label
        return label


class BogoliubovMap(BaseModel):
    """输入模 -> 输出场 bin 的线性映射

    a_out[i] = sum_m particle_block[i, m] b_m + conjugate_block[i, m] b_m^dagger
    """

    particle_block: np.ndarray
    conjugate_block: np.ndarray
    input_ledger: ModeLedger = Field(default_factory=ModeLedger)
    output_bins: np.ndarray = Field(default_factory=lambda: np.zeros(0, dtype=int))
    grid: Optional[SimulationGrid] = None
    params: Optional[PhysicalParams] = None
    ensemble: EnsembleState = Field(default_factory=EnsembleState)

    class Config:
        frozen = True
        arbitrary_types_allowed = True

    @property
    def n_out(self) -> int:
        return self.particle_block.shape[0]

    @property
    def n_in(self) -> int:
        return self.particle_block.shape[1]

    @property
    def alpha_l(self) -> Optional[float]:
        return self.params.alpha_l if self.params is not None else None

    def row_of(self, t_bin: int) -> int:
        """输出 bin 对应的行号"""
        rows = np.flatnonzero(self.output_bins == t_bin)
        if len(rows) != 1:
            raise KeyError(f"bin {t_bin} is not an output bin of this map")
        return int(rows[0])

    @classmethod
    def identity(cls, n: int) -> "BogoliubovMap":
        return cls(
            particle_block=np.eye(n, dtype=complex),
            conjugate_block=np.zeros((n, n), dtype=complex),
            output_bins=np.arange(n),
        )

    @classmethod
    def from_blocks(cls, particle: np.ndarray, conjugate: np.ndarray, alpha_l: Optional[float] = None) -> "BogoliubovMap":
        """从给定矩阵块构造测试/外部映射"""
        particle = np.asarray(particle, dtype=complex)
        conjugate = np.asarray(conjugate, dtype=complex)
        params = PhysicalParams.from_alpha_l(alpha_l) if alpha_l is not None else None
        return cls(
            particle_block=particle,
            conjugate_block=conjugate,
            output_bins=np.arange(particle.shape[0]),
            params=params,
        )
