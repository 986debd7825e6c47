"""横向相位匹配服务

横向空间被看成一组互不耦合的离散模：激发态区域把场 k 与原子 -k 耦合，
第二个 pi 脉冲把原子标签平移 2 k_pi，基态区域在 k 上是对角的。
第一个 pi 脉冲的相位不影响配对。
"""

import logging
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from rase.exceptions import PairingError
from rase.models.moments import CorrelationReport, MomentSet
from rase.models.paraxial import KSpaceCorrelations, ModePairing, PartnerTrace, TransverseGrid
from rase.models.physics import GridSpec, PhysicalParams
from rase.services.correlator_service import cauchy_schwartz_R, second_moments
from rase.services.grid_service import build_grid
from rase.services.kernel_service import compose_rase

logger = logging.getLogger(__name__)


def trace_rase_partner(k, k_pi) -> PartnerTrace:
    """沿 激发态耦合 -> pi 平移 -> 基态对角耦合 追踪 RASE 伙伴模"""
    k = np.asarray(k, dtype=float)
    k_pi = np.asarray(k_pi, dtype=float)
    atomic = -k
    shifted = atomic + 2.0 * k_pi
    rase = shifted
    return PartnerTrace(
        k_ase=tuple(k),
        atomic_after_excited=tuple(atomic),
        atomic_after_pi=tuple(shifted),
        k_rase=tuple(rase),
    )


def build_pairing(grid: TransverseGrid, strict: bool = True) -> ModePairing:
    """为每个横向模找到网格上的 RASE 伙伴

    :param strict: 网格对 k -> 2 k_pi - k 不闭合时报错；为 False 时只把缺伙伴的模记入 unmatched
    """
    pairs: List[Tuple[int, int]] = []
    unmatched: List[int] = []
    for index, k in enumerate(grid.k_bins):
        partner = grid.index_of(trace_rase_partner(k, grid.k_pi).k_rase)
        if partner is None:
            unmatched.append(index)
        else:
            pairs.append((index, partner))

    if unmatched:
        if strict:
            raise PairingError("transverse grid is not closed under k -> 2 k_pi - k",
                               unmatched=len(unmatched), k_pi=list(grid.k_pi))
        logger.warning("%d transverse modes have no on-grid partner", len(unmatched))
    return ModePairing(pairs=tuple(pairs), unmatched=tuple(unmatched))


def kspace_rase_correlations(
    params: PhysicalParams,
    grid: TransverseGrid,
    resolutions: GridSpec,
    half_window: float = 1.0,
    pairing: Optional[ModePairing] = None,
    threads: Optional[int] = None,
) -> KSpaceCorrelations:
    """所有横向模共享同一个一维 RASE 映射，配对块直接取一维的交叉矩，其余块为零"""
    pairing = pairing if pairing is not None else build_pairing(grid)
    time_grid = build_grid(params, resolutions, -half_window, half_window)
    moments = second_moments(compose_rase(time_grid, params, -half_window, 0.0, threads))

    centers = time_grid.t_centers
    ase_bins = np.flatnonzero(centers < 0.0)
    rase_bins = np.flatnonzero(centers > 0.0)
    ase_rows = np.array([moments.index_of(b) for b in ase_bins], dtype=int)
    rase_rows = np.array([moments.index_of(b) for b in rase_bins], dtype=int)
    cross_m = moments.anomalous[np.ix_(ase_rows, rase_rows)]
    cross_g = moments.coherence[np.ix_(ase_rows, rase_rows)]

    n_k = len(grid)
    anomalous = np.zeros((n_k, len(ase_bins), n_k, len(rase_bins)), dtype=complex)
    coherence = np.zeros_like(anomalous)
    for k_ase, k_rase in pairing.pairs:
        anomalous[k_ase, :, k_rase, :] = cross_m
        coherence[k_ase, :, k_rase, :] = cross_g

    return KSpaceCorrelations(
        grid=grid,
        pairing=pairing,
        ase_bins=ase_bins,
        rase_bins=rase_bins,
        anomalous=anomalous,
        coherence=coherence,
        ase_flux=moments.flux[ase_rows],
        rase_flux=moments.flux[rase_rows],
        alpha_l=params.alpha_l,
    )


def pair_report(correlations: KSpaceCorrelations, k_ase: int, t1: int, t2: int) -> CorrelationReport:
    """配对 (k, 2k_pi - k) 在 bin (t1, t2) 上的 Cauchy-Schwartz 报告"""
    k_rase = correlations.pairing.partner(k_ase)
    i = int(np.flatnonzero(correlations.ase_bins == t1)[0])
    j = int(np.flatnonzero(correlations.rase_bins == t2)[0])
    m = correlations.anomalous[k_ase, i, k_rase, j]
    g = correlations.coherence[k_ase, i, k_rase, j]
    flux = np.array([correlations.ase_flux[i], correlations.rase_flux[j]])
    two_mode = MomentSet(
        bins=np.array([t1, t2]),
        flux=flux,
        coherence=np.array([[flux[0], g], [np.conj(g), flux[1]]], dtype=complex),
        anomalous=np.array([[0.0, m], [m, 0.0]], dtype=complex),
        alpha_l=correlations.alpha_l,
    )
    return cauchy_schwartz_R(two_mode, t1, t2)


def pairing_table(grid: TransverseGrid, pairing: ModePairing,
                  correlations: Optional[KSpaceCorrelations] = None) -> pd.DataFrame:
    """配对表 kx1, ky1, kx2, ky2（可选附每对的最大 |m|）"""
    rows = []
    for k_ase, k_rase in pairing.pairs:
        kx1, ky1 = grid.k_bins[k_ase]
        kx2, ky2 = grid.k_bins[k_rase]
        row = {"kx1": kx1, "ky1": ky1, "kx2": kx2, "ky2": ky2}
        if correlations is not None:
            row["max_abs_m"] = float(np.abs(correlations.block(k_ase, k_rase)).max())
        rows.append(row)
    columns = ["kx1", "ky1", "kx2", "ky2"] + (["max_abs_m"] if correlations is not None else [])
    return pd.DataFrame(rows, columns=columns)
