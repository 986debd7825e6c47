"""高斯关联函数服务 - 二阶矩、正规序强度关联、Cauchy-Schwartz 比值与闭式参考值"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from rase.config import get_settings
from rase.exceptions import DegenerateStateError, DivergenceError, GridError, SymplecticError
from rase.models.maps import BogoliubovMap
from rase.models.moments import CorrelationReport, MomentSet
from rase.models.physics import GridSpec, PhysicalParams
from rase.services.grid_service import build_grid
from rase.services.kernel_service import compose_rase, verify_symplectic

logger = logging.getLogger(__name__)

SCAN_COLUMNS = [
    "alpha_l",
    "r_numeric",
    "r_closed",
    "rel_err",
    "r_linearized",
    "rel_err_linearized",
    "coherence_cross",
]


def second_moments(bmap: BogoliubovMap, bound: Optional[float] = None) -> MomentSet:
    """真空输入下输出场的二阶矩

    n = diag(conj(S S^dagger))，g = conj(S S^dagger)，m = C S^T（辛映射下等于 S C^T）
    """
    bound = bound if bound is not None else get_settings().symplectic_bound
    residual = verify_symplectic(bmap)
    if residual > bound:
        raise SymplecticError(
            f"symplectic residual {residual:.3e} exceeds bound {bound:.1e}; moments would be unphysical",
            residual=residual, bound=bound,
        )

    c, s = bmap.particle_block, bmap.conjugate_block
    coherence = (s @ s.conj().T).conj()
    anomalous = c @ s.T
    flux = np.clip(np.real(np.diag(coherence)), 0.0, None)
    return MomentSet(
        bins=np.asarray(bmap.output_bins, dtype=int),
        flux=flux,
        coherence=coherence,
        anomalous=anomalous,
        alpha_l=bmap.alpha_l,
    )


def intensity_correlation(moments: MomentSet, t_i: int, t_j: int) -> float:
    """正规序强度关联 p(t_i, t_j) = <a_i^dagger a_j^dagger a_j a_i>

    i != j: n_i n_j + |g_ij|^2 + |m_ij|^2；i == j: 2 n_i^2 + |m_ii|^2
    """
    i = moments.index_of(t_i)
    j = moments.index_of(t_j)
    n_i, n_j = moments.flux[i], moments.flux[j]
    m = abs(moments.anomalous[i, j]) ** 2
    if i == j:
        return float(2.0 * n_i ** 2 + m)
    return float(n_i * n_j + abs(moments.coherence[i, j]) ** 2 + m)


def cauchy_schwartz_R(moments: MomentSet, t1: int, t2: int) -> CorrelationReport:
    """R = p12^2 / (p11 p22)，经典态满足 R <= 1"""
    p11 = intensity_correlation(moments, t1, t1)
    p22 = intensity_correlation(moments, t2, t2)
    if p11 <= 0.0 or p22 <= 0.0:
        raise DegenerateStateError("vanishing auto-correlation, R is undefined", t1=t1, t2=t2, p11=p11, p22=p22)
    p12 = intensity_correlation(moments, t1, t2)
    g12 = abs(moments.coherence[moments.index_of(t1), moments.index_of(t2)])
    return CorrelationReport(
        t1=t1, t2=t2, p11=p11, p22=p22, p12=p12,
        R=p12 ** 2 / (p11 * p22),
        alpha_l=moments.alpha_l,
        coherence_cross=float(g12),
    )


def _operator_rows(bmap: BogoliubovMap, t_bin: int, dagger: bool) -> Tuple[np.ndarray, np.ndarray]:
    """算符在 (b, b^dagger) 上的系数"""
    row = bmap.row_of(t_bin)
    c, s = bmap.particle_block[row], bmap.conjugate_block[row]
    if dagger:
        return s.conj(), c.conj()
    return c, s


def _vacuum_pair(x, y) -> complex:
    # <0| x y |0> 只保留 b_m b_m^dagger
    return complex(np.dot(x[0], y[1]))


def _pairing_sum(ops: List[Tuple[np.ndarray, np.ndarray]]) -> complex:
    if not ops:
        return 1.0
    first, rest = ops[0], ops[1:]
    total = 0.0
    for k in range(len(rest)):
        total += _vacuum_pair(first, rest[k]) * _pairing_sum(rest[:k] + rest[k + 1:])
    return total


def pairing_fourth_moment(bmap: BogoliubovMap, t_i: int, t_j: int) -> float:
    """直接在映射行上做 Isserlis 全配对求和得到 <a_i^dagger a_j^dagger a_j a_i>"""
    ops = [
        _operator_rows(bmap, t_i, True),
        _operator_rows(bmap, t_j, True),
        _operator_rows(bmap, t_j, False),
        _operator_rows(bmap, t_i, False),
    ]
    return float(np.real(_pairing_sum(ops)))


def closed_form_R(alpha_l: float) -> float:
    """[1/2 + (al + cosh al) / (4 sinh(al/2) (e^al - 1))]^2"""
    if alpha_l <= 0.0:
        raise DivergenceError("closed-form R diverges at zero optical depth", alpha_l=alpha_l)
    tail = (alpha_l + math.cosh(alpha_l)) / (4.0 * math.sinh(alpha_l / 2.0) * math.expm1(alpha_l))
    return (0.5 + tail) ** 2


def closed_form_efficiency(alpha_l: float) -> float:
    return math.sinh(alpha_l / 2.0) ** 2


def closed_form_ase_flux(alpha_l: float) -> float:
    return math.expm1(alpha_l)


def linearized_R(alpha_l: float) -> float:
    """线性化方程本身给出的镜像 bin R：[(2 - e^{-al}) / (2 (1 - e^{-al}))]^2"""
    if alpha_l <= 0.0:
        raise DivergenceError("R diverges at zero optical depth", alpha_l=alpha_l)
    decay = -math.expm1(-alpha_l)
    return ((1.0 + decay) / (2.0 * decay)) ** 2


def linearized_efficiency(alpha_l: float) -> float:
    return 4.0 * math.sinh(alpha_l / 2.0) ** 2


def linearized_rase_flux(alpha_l: float) -> float:
    return 4.0 * math.sinh(alpha_l / 2.0) ** 2


def nonclassical_threshold(lower: float = 0.5, upper: float = 2.0) -> float:
    """closed_form_R = 1 的根"""
    return float(brentq(lambda x: closed_form_R(x) - 1.0, lower, upper, xtol=1e-12))


def _rel_err(value: float, reference: float) -> float:
    return abs(value - reference) / abs(reference)


def rase_report(alpha_l: float, resolutions: GridSpec, half_window: float = 1.0,
                ase_bin: Optional[int] = None, threads: Optional[int] = None) -> CorrelationReport:
    """单个光学深度下镜像 bin 的 RASE 报告

    窗口 [-T, T]，第一个 pi 在 -T，第二个 pi 在 0；探测 bin 默认位于 -T/2 附近
    """
    params = PhysicalParams.from_alpha_l(alpha_l)
    grid = build_grid(params, resolutions, -half_window, half_window)
    if grid.n_t % 2:
        raise GridError("RASE window needs an even number of time bins", n_t=grid.n_t)
    bmap = compose_rase(grid, params, -half_window, 0.0, threads)
    t1 = ase_bin if ase_bin is not None else grid.n_t // 4
    t2 = grid.mirror_bin(t1, 0.0)
    return cauchy_schwartz_R(second_moments(bmap), t1, t2)


def _scan_row(alpha_l: float, resolutions: GridSpec, half_window: float) -> dict:
    report = rase_report(alpha_l, resolutions, half_window, threads=1)
    r_closed = closed_form_R(alpha_l)
    r_lin = linearized_R(alpha_l)
    logger.info("alpha_l=%.4g: R=%.6g (closed %.6g, linearized %.6g)", alpha_l, report.R, r_closed, r_lin)
    return {
        "alpha_l": alpha_l,
        "r_numeric": report.R,
        "r_closed": r_closed,
        "rel_err": _rel_err(report.R, r_closed),
        "r_linearized": r_lin,
        "rel_err_linearized": _rel_err(report.R, r_lin),
        "coherence_cross": report.coherence_cross,
    }


def scan_R(alpha_ls: Iterable[float], resolutions: GridSpec, half_window: float = 1.0,
           threads: Optional[int] = None) -> pd.DataFrame:
    """在线程池上扫描光学深度，按输入顺序汇总"""
    alpha_ls: Sequence[float] = [float(a) for a in alpha_ls]
    for alpha_l in alpha_ls:
        if alpha_l <= 0.0:
            raise DivergenceError("scan points must have positive optical depth", alpha_l=alpha_l)
    workers = threads if threads is not None else get_settings().threads
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        rows = list(executor.map(lambda a: _scan_row(a, resolutions, half_window), alpha_ls))
    return pd.DataFrame(rows, columns=SCAN_COLUMNS)


def is_monotone_decreasing(values: Iterable[float]) -> bool:
    return all(later < earlier for earlier, later in itertools.pairwise(values))
