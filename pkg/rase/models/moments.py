from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator


class MomentSet(BaseModel):
    """输出场的高斯二阶矩（每个分 bin 模，无量纲）

    coherence[i, j] = <a_i^dagger a_j>，anomalous[i, j] = <a_i a_j>
    """

    bins: np.ndarray = Field(..., description="每行对应的输出时间 bin")
    flux: np.ndarray = Field(..., description="n(t_i)，每模光子数")
    coherence: np.ndarray
    anomalous: np.ndarray
    alpha_l: Optional[float] = None

    class Config:
        frozen = True
        arbitrary_types_allowed = True

    @model_validator(mode="after")
    def _check_shapes(self):
        n = len(self.bins)
        if self.flux.shape != (n,) or self.coherence.shape != (n, n) or self.anomalous.shape != (n, n):
            raise ValueError("moment arrays do not match the number of bins")
        return self

    @classmethod
    def thermal(cls, occupations, bins=None) -> "MomentSet":
        """互不相关的热态 bin（g 非对角与 m 全为零）"""
        flux = np.asarray(occupations, dtype=float)
        n = len(flux)
        return cls(
            bins=np.arange(n) if bins is None else np.asarray(bins, dtype=int),
            flux=flux,
            coherence=np.diag(flux).astype(complex),
            anomalous=np.zeros((n, n), dtype=complex),
        )

    def index_of(self, t_bin: int) -> int:
        rows = np.flatnonzero(self.bins == t_bin)
        if len(rows) != 1:
            raise KeyError(f"bin {t_bin} has no moments")
        return int(rows[0])

    def covariance_matrix(self) -> np.ndarray:
        """(a, a^dagger) 的 Gram 矩阵 <v_k v_l^dagger>，物理态必须半正定

        [[I + conj(g), m], [conj(m), g]]
        """
        n = len(self.bins)
        g = self.coherence
        m = self.anomalous
        return np.block([[np.eye(n) + g.conj(), m], [m.conj(), g]])

    def is_physical(self, tol: float = 1e-9) -> bool:
        eigenvalues = np.linalg.eigvalsh(self.covariance_matrix())
        return bool(eigenvalues.min() >= -tol)


class CorrelationReport(BaseModel):
    """两个输出 bin 之间的 Cauchy-Schwartz 报告"""

    t1: int
    t2: int
    p11: float = Field(..., ge=0.0)
    p22: float = Field(..., ge=0.0)
    p12: float = Field(..., ge=0.0)
    R: float = Field(..., ge=0.0)
    alpha_l: Optional[float] = None
    classical_bound: float = 1.0
    coherence_cross: float = Field(0.0, description="|g_12|，记录而不假设为零")

    class Config:
        frozen = True

    @property
    def nonclassical(self) -> bool:
        return self.R > self.classical_bound
