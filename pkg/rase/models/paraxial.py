from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator


class TransverseGrid(BaseModel):
    """离散横向波矢集合与第二个 pi 脉冲的横向波矢"""

    k_bins: np.ndarray = Field(..., description="(n, 2) 横向波矢")
    k_pi: Tuple[float, float] = (0.0, 0.0)
    tolerance: float = 1e-9

    class Config:
        frozen = True
        arbitrary_types_allowed = True

    @model_validator(mode="after")
    def _check_shape(self):
        k = np.asarray(self.k_bins, dtype=float)
        if k.ndim != 2 or k.shape[1] != 2:
            raise ValueError("k_bins must be an (n, 2) array")
        return self

    @classmethod
    def regular(cls, n: int, dk: float, k_pi: Tuple[float, float] = (0.0, 0.0)) -> "TransverseGrid":
        """以 k_pi 为中心的 n x n 方格，对 k -> 2 k_pi - k 闭合；k_pi = 0 时即关于原点对称"""
        offsets = dk * (np.arange(n) - (n - 1) / 2.0)
        kx, ky = np.meshgrid(k_pi[0] + offsets, k_pi[1] + offsets, indexing="ij")
        return cls(k_bins=np.column_stack([kx.ravel(), ky.ravel()]), k_pi=k_pi, tolerance=1e-9 * max(dk, 1.0))

    def __len__(self) -> int:
        return len(self.k_bins)

    def index_of(self, vector) -> Optional[int]:
        distance = np.max(np.abs(np.asarray(self.k_bins, dtype=float) - np.asarray(vector, dtype=float)), axis=1)
        hits = np.flatnonzero(distance <= self.tolerance)
        return int(hits[0]) if len(hits) else None

    def missing_partners(self) -> List[int]:
        """在 k -> 2 k_pi - k 下没有网格伙伴的模"""
        two_k_pi = 2.0 * np.asarray(self.k_pi, dtype=float)
        return [i for i, k in enumerate(np.asarray(self.k_bins, dtype=float)) if self.index_of(two_k_pi - k) is None]

    @property
    def is_closed(self) -> bool:
        return not self.missing_partners()


class PartnerTrace(BaseModel):
    """一个 ASE 模经过三个阶段后的标签"""

    k_ase: Tuple[float, float]
    atomic_after_excited: Tuple[float, float]
    atomic_after_pi: Tuple[float, float]
    k_rase: Tuple[float, float]


class ModePairing(BaseModel):
    """ASE 模与 RASE 模的配对，k_ASE + k_RASE = 2 k_pi"""

    pairs: Tuple[Tuple[int, int], ...] = ()
    unmatched: Tuple[int, ...] = ()

    class Config:
        frozen = True

    @property
    def partner_of(self) -> Dict[int, int]:
        return dict(self.pairs)

    def partner(self, index: int) -> int:
        return self.partner_of[index]

    def is_involution(self) -> bool:
        partner = self.partner_of
        return all(partner.get(partner[i]) == i for i in partner)


class KSpaceCorrelations(BaseModel):
    """横向波矢空间中 ASE (t<0) 与 RASE (t>0) bin 之间的关联张量

    形状 (n_k, n_ase, n_k, n_rase)；不在配对上的元素结构性为零。
    """

    grid: TransverseGrid
    pairing: ModePairing
    ase_bins: np.ndarray
    rase_bins: np.ndarray
    anomalous: np.ndarray
    coherence: np.ndarray
    ase_flux: np.ndarray
    rase_flux: np.ndarray
    alpha_l: Optional[float] = None

    class Config:
        frozen = True
        arbitrary_types_allowed = True

    def block(self, k_ase: int, k_rase: int) -> np.ndarray:
        return self.anomalous[k_ase, :, k_rase, :]
