import math
from typing import Literal, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from scipy.integrate import trapezoid

PulseShape = Literal["sech", "gaussian", "square"]


class BlochState(BaseModel):
    """半经典 Bloch 变量，数组形状 (z 节点, 失谐 bin)"""

    sigma_minus: np.ndarray
    sigma_z: np.ndarray
    field: np.ndarray = Field(..., description="当前时刻各 z 节点的 Rabi 频率")

    class Config:
        arbitrary_types_allowed = True

    @classmethod
    def uniform(cls, n_nodes: int, n_delta: int, inversion: float) -> "BlochState":
        return cls(
            sigma_minus=np.zeros((n_nodes, n_delta), dtype=complex),
            sigma_z=np.full((n_nodes, n_delta), float(inversion)),
            field=np.zeros(n_nodes, dtype=complex),
        )

    @classmethod
    def ground(cls, n_nodes: int, n_delta: int) -> "BlochState":
        return cls.uniform(n_nodes, n_delta, -1.0)

    @classmethod
    def excited(cls, n_nodes: int, n_delta: int) -> "BlochState":
        return cls.uniform(n_nodes, n_delta, 1.0)

    def bloch_length(self) -> np.ndarray:
        """|2 sigma|^2 + sigma_z^2，无损方程下恒为 1"""
        return 4.0 * np.abs(self.sigma_minus) ** 2 + self.sigma_z ** 2


class PulseProfile(BaseModel):
    """输入脉冲包络（Rabi 频率单位）"""

    shape: PulseShape
    amplitude: float
    center: float = 0.0
    duration: float = Field(..., gt=0.0)
    phase: float = 0.0

    class Config:
        frozen = True
        json_schema_extra = {
            "example": {"shape": "sech", "amplitude": 20.0, "center": 0.0, "duration": 0.05}
        }

    @classmethod
    def with_area(cls, shape: PulseShape, area: float, center: float, duration: float) -> "PulseProfile":
        """给定面积（弧度）反推峰值"""
        unit = cls(shape=shape, amplitude=1.0, center=center, duration=duration)
        return cls(shape=shape, amplitude=area / unit.analytic_area, center=center, duration=duration)

    @property
    def analytic_area(self) -> float:
        if self.shape == "sech":
            return self.amplitude * math.pi * self.duration
        if self.shape == "gaussian":
            return self.amplitude * self.duration * math.sqrt(2.0 * math.pi)
        return self.amplitude * self.duration

    def sample(self, t) -> np.ndarray:
        x = (np.asarray(t, dtype=float) - self.center) / self.duration
        if self.shape == "sech":
            envelope = 1.0 / np.cosh(np.clip(x, -700.0, 700.0))
        elif self.shape == "gaussian":
            envelope = np.exp(-0.5 * x ** 2)
        else:
            envelope = (np.abs(x) <= 0.5).astype(float)
        return self.amplitude * np.exp(1j * self.phase) * envelope

    def area(self, times: np.ndarray) -> float:
        """与 pulse_area 相同的梯形求积"""
        return float(abs(trapezoid(self.sample(times), times)))


class Trajectory(BaseModel):
    """积分结果：逐时间步的场与系综摘要，外加末态"""

    times: np.ndarray
    z_nodes: np.ndarray
    field: np.ndarray = Field(..., description="(时间, z 节点) Rabi 频率")
    polarization: np.ndarray = Field(..., description="(时间, z 节点) 宏观极化 sum sigma dDelta")
    sigma_z_mean: np.ndarray
    final: BlochState
    bloch_drift: float = 0.0
    ideal_pi_times: Tuple[float, ...] = ()

    class Config:
        arbitrary_types_allowed = True

    @property
    def output_field(self) -> np.ndarray:
        return self.field[:, -1]

    def node_index(self, z: float) -> int:
        return int(np.argmin(np.abs(self.z_nodes - z)))

    def to_frame(self, stride: int = 1) -> pd.DataFrame:
        """长表：t, z, Re/Im 场, sigma_z 切片均值；stride 为时间抽样间隔"""
        field = self.field[::stride]
        n_t, n_z = field.shape
        return pd.DataFrame({
            "t": np.repeat(self.times[::stride], n_z),
            "z": np.tile(self.z_nodes, n_t),
            "field_re": field.real.ravel(),
            "field_im": field.imag.ravel(),
            "sigma_z_mean": self.sigma_z_mean[::stride].ravel(),
        })


class ResidualTrace(BaseModel):
    """非理想 pi 脉冲后残余宏观极化随时间的变化"""

    times: np.ndarray
    residual: np.ndarray
    pulse_times: Tuple[float, ...]
    error_angle: float
    detuning_width: Optional[float] = None

    class Config:
        arbitrary_types_allowed = True

    def max_between(self, start: float, stop: float) -> float:
        mask = (self.times >= start) & (self.times < stop)
        return float(self.residual[mask].max()) if mask.any() else 0.0
