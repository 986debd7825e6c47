"""Bogoliubov 映射引擎 - 基态/激发态区域传播、理想 pi 脉冲与序列组合

白噪声极限（平坦且无限宽的非均匀展宽）下，线性化方程在“原子时间模”表象中是
时间局域的：时间 t 的场只与标签为 t 的原子时间模耦合，理想 pi 脉冲把标签关于
脉冲时刻镜像（lambda -> 2b-1-lambda）。每个 z 切片在 (场 bin, 切片原子模) 上作用
一个精确保持对易关系的变换：基态为透射率 e^{-alpha dz/2} 的分束器，激发态为
增益 e^{+alpha dz/2} 的双模压缩（耦合 D_e^dagger）。
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from rase.config import get_settings
from rase.exceptions import GridError, RegimeError, SequenceError, WindowError
from rase.models.maps import AtomicRegister, BogoliubovMap, EnsembleState, KernelSet
from rase.models.physics import (
    LedgerEntry,
    ModeLedger,
    PhysicalParams,
    PulseEvent,
    PulseSequence,
    Regime,
    Region,
    SimulationGrid,
    atomic_entry,
    field_entry,
)
from rase.services.grid_service import build_sequence, echo_events, rase_events

logger = logging.getLogger(__name__)


def _region_bins(grid: SimulationGrid, region: Region) -> np.ndarray:
    return grid.bins_in(max(region.start, grid.t_start), min(region.stop, grid.t_stop))


def _slice_kernels(n_z: int, alpha_dz: float, regime: Regime) -> Tuple[complex, np.ndarray, np.ndarray, np.ndarray]:
    """切片变换的闭式乘积

    基态:  F_{k+1} = c F_k + i s d_k,   d_k' = i s F_k + c d_k,   c = e^{-alpha dz/2}
    激发态: F_{k+1} = c F_k + i s x_k,   x_k' = c x_k - i s F_k,   x_k = d_k^dagger, c = e^{+alpha dz/2}
    """
    if regime == "ground":
        c = math.exp(-alpha_dz / 2.0)
        s = math.sqrt(-math.expm1(-alpha_dz))
        write_sign, chain_sign = 1.0, -1.0
    else:
        c = math.exp(alpha_dz / 2.0)
        s = math.sqrt(math.expm1(alpha_dz))
        write_sign, chain_sign = -1.0, 1.0

    k = np.arange(n_z)
    transmission = complex(c ** n_z)
    atom_to_field = 1j * s * c ** (n_z - 1 - k)
    field_to_atom = write_sign * 1j * s * c ** k

    lag = k[:, np.newaxis] - k[np.newaxis, :] - 1
    atom_to_atom = np.where(lag >= 0, chain_sign * s * s * c ** np.clip(lag, 0, None), 0.0).astype(complex)
    atom_to_atom[k, k] = c
    return transmission, atom_to_field.astype(complex), field_to_atom.astype(complex), atom_to_atom


def _kernels(grid: SimulationGrid, params: PhysicalParams, region: Region, regime: Regime) -> KernelSet:
    if region.regime != regime:
        raise RegimeError(f"region [{region.start}, {region.stop}) is {region.regime}, not {regime}",
                          regime=region.regime)
    transmission, a2f, f2a, a2a = _slice_kernels(grid.n_z, params.alpha * grid.dz, regime)
    return KernelSet(
        regime=regime,
        region=region,
        bins=_region_bins(grid, region),
        transmission=transmission,
        atom_to_field_slice=a2f,
        field_to_atom_slice=f2a,
        atom_to_atom_slice=a2a,
    )


def ground_kernels(grid: SimulationGrid, params: PhysicalParams, region: Region) -> KernelSet:
    """基态区域的核：a(l,t) = e^{-alpha l/2} a(0,t) + 原子贡献，纯被动"""
    return _kernels(grid, params, region, "ground")


def excited_kernels(grid: SimulationGrid, params: PhysicalParams, region: Region) -> KernelSet:
    """激发态区域的核：a(l,t) = e^{+alpha l/2} a(0,t) + D_e0^dagger 贡献"""
    return _kernels(grid, params, region, "excited")


def empty_map(grid: SimulationGrid, params: PhysicalParams, regime: Regime = "ground") -> BogoliubovMap:
    """尚未传播任何区域的空映射，原子处于给定区域"""
    return BogoliubovMap(
        particle_block=np.zeros((0, 0), dtype=complex),
        conjugate_block=np.zeros((0, 0), dtype=complex),
        output_bins=np.zeros(0, dtype=int),
        grid=grid,
        params=params,
        ensemble=EnsembleState(regime=regime),
    )


def _check_size(n_out: int, n_in: int) -> None:
    size = 2 * 16 * n_out * n_in
    cap = get_settings().max_matrix_bytes
    if size > cap:
        raise GridError(f"map of {n_out}x{n_in} modes exceeds the dense-matrix cap ({size:.3g} > {cap:.3g} bytes)")


def _advance_bin(register: AtomicRegister, field_id: int, kernels: KernelSet):
    """一个时间 bin 穿过整个样品：返回更新后的原子寄存器和该 bin 的输出行"""
    n_z = kernels.n_z
    columns = np.append(register.columns, field_id)
    pad = np.zeros((n_z, 1), dtype=complex)
    atoms_c = np.hstack([register.particle, pad])
    atoms_s = np.hstack([register.conjugate, pad])
    field = np.zeros(len(columns), dtype=complex)
    field[-1] = 1.0

    # 激发态下耦合的是 D_e^dagger：交换并共轭两个系数块
    if kernels.conjugate_atoms:
        x_c, x_s = atoms_s.conj(), atoms_c.conj()
    else:
        x_c, x_s = atoms_c, atoms_s

    out_c = kernels.transmission * field + kernels.atom_to_field_slice @ x_c
    out_s = kernels.atom_to_field_slice @ x_s
    new_x_c = np.outer(kernels.field_to_atom_slice, field) + kernels.atom_to_atom_slice @ x_c
    new_x_s = kernels.atom_to_atom_slice @ x_s

    if kernels.conjugate_atoms:
        new_c, new_s = new_x_s.conj(), new_x_c.conj()
    else:
        new_c, new_s = new_x_c, new_x_s

    advanced = AtomicRegister(columns=columns, particle=new_c, conjugate=new_s,
                              origin_label=register.origin_label)
    return advanced, (columns, out_c, out_s)


def propagate_region(bmap: BogoliubovMap, kernels: KernelSet, threads: Optional[int] = None) -> BogoliubovMap:
    """把一个区域内所有时间 bin 的输出行追加到映射中

    各 bin 只读写自己的原子寄存器，因此按 bin 分到线程池；
    模式编号先按 bin 顺序串行分配，结果与线程数无关。

    :param bmap: 当前映射（其系综区域必须与核一致）
    :param kernels: 区域核
    :param threads: 线程数，默认取配置
    :return: 新映射
    """
    grid = bmap.grid
    ensemble = bmap.ensemble
    if ensemble.regime != kernels.regime:
        raise RegimeError(f"ensemble is {ensemble.regime} but kernels are {kernels.regime}")

    n_z = kernels.n_z
    atomic_kind = "initial-excited-atomic" if kernels.conjugate_atoms else "initial-ground-atomic"
    entries: List[LedgerEntry] = list(bmap.input_ledger.entries)
    registers: Dict[int, AtomicRegister] = dict(ensemble.registers)
    jobs = []

    for b in kernels.bins:
        b = int(b)
        field_id = len(entries)
        entries.append(field_entry(field_id, b, grid.dt))

        register = registers.get(b)
        if register is None:
            origin = ensemble.origin_label(b)
            first = len(entries)
            entries.extend(atomic_entry(first + k, atomic_kind, k, origin, grid.dz, grid.dt) for k in range(n_z))
            register = AtomicRegister(
                columns=np.arange(first, first + n_z),
                particle=np.eye(n_z, dtype=complex),
                conjugate=np.zeros((n_z, n_z), dtype=complex),
                origin_label=origin,
            )
        jobs.append((b, register, field_id))

    workers = max(1, threads if threads is not None else get_settings().threads)
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            advanced = list(executor.map(lambda job: _advance_bin(job[1], job[2], kernels), jobs))
    else:
        advanced = [_advance_bin(register, field_id, kernels) for _, register, field_id in jobs]

    rows = []
    for (b, _, _), (register, row) in zip(jobs, advanced):
        registers[b] = register
        rows.append(row)

    n_old, n_in_old = bmap.particle_block.shape
    n_in = len(entries)
    n_out = n_old + len(rows)
    _check_size(n_out, n_in)

    particle = np.zeros((n_out, n_in), dtype=complex)
    conjugate = np.zeros((n_out, n_in), dtype=complex)
    particle[:n_old, :n_in_old] = bmap.particle_block
    conjugate[:n_old, :n_in_old] = bmap.conjugate_block
    for r, (columns, out_c, out_s) in enumerate(rows):
        particle[n_old + r, columns] = out_c
        conjugate[n_old + r, columns] = out_s

    logger.debug("propagated %s region: %d bins, %d input modes", kernels.regime, len(rows), n_in)
    return BogoliubovMap(
        particle_block=particle,
        conjugate_block=conjugate,
        input_ledger=ModeLedger(entries=tuple(entries)),
        output_bins=np.concatenate([bmap.output_bins, kernels.bins.astype(int)]),
        grid=grid,
        params=bmap.params,
        ensemble=EnsembleState(
            regime=ensemble.regime,
            registers=registers,
            pulse_boundaries=ensemble.pulse_boundaries,
        ),
    )


def apply_ideal_pi(bmap: BogoliubovMap, pulse: PulseEvent) -> BogoliubovMap:
    """理想瞬时 pi 脉冲：D_e <- D_g

    原子时间模标签关于脉冲时刻镜像，区域在基态/激发态之间切换；
    一维模型中 transverse_k 不参与。输出行不变，所以辛残差不变。
    """
    if pulse.kind != "pi":
        raise SequenceError("apply_ideal_pi needs a pi pulse", kind=pulse.kind)
    b = bmap.grid.boundary_index(pulse.time)
    if b is None:
        raise SequenceError("pi pulse does not lie on a grid bin boundary", time=pulse.time)

    ensemble = bmap.ensemble
    registers = {2 * b - 1 - label: register for label, register in ensemble.registers.items()}
    regime = "excited" if ensemble.regime == "ground" else "ground"
    return bmap.model_copy(update={
        "ensemble": EnsembleState(
            regime=regime,
            registers=registers,
            pulse_boundaries=ensemble.pulse_boundaries + (b,),
        )
    })


def compose_sequence(grid: SimulationGrid, params: PhysicalParams, sequence: PulseSequence,
                     threads: Optional[int] = None) -> BogoliubovMap:
    """按区域依次传播并在区域之间施加理想 pi 脉冲"""
    bmap = empty_map(grid, params, sequence.regions[0].regime if sequence.regions else "ground")
    for region in sequence.regions:
        if region.regime == "ground":
            kernels = ground_kernels(grid, params, region)
        else:
            kernels = excited_kernels(grid, params, region)
        bmap = propagate_region(bmap, kernels, threads)
        if region.closing_pulse is not None:
            bmap = apply_ideal_pi(bmap, region.closing_pulse)
    return bmap


def single_region_map(grid: SimulationGrid, params: PhysicalParams, regime: Regime,
                      threads: Optional[int] = None) -> BogoliubovMap:
    """整个窗口只有一个区域（无脉冲）的映射"""
    region = Region(start=-math.inf, stop=math.inf, regime=regime)
    kernels = _kernels(grid, params, region, regime)
    return propagate_region(empty_map(grid, params, regime), kernels, threads)


def compose_two_pulse_echo(grid: SimulationGrid, params: PhysicalParams, t_pi: float,
                           threads: Optional[int] = None) -> BogoliubovMap:
    """两脉冲回波：窗口起点开始的弱输入（基态），t_pi 处理想 pi，随后激发态区域"""
    if not grid.t_start < t_pi < grid.t_stop:
        raise WindowError("pi pulse must lie inside the window", t_pi=t_pi)
    echo_time = 2.0 * t_pi - grid.t_start
    if echo_time > grid.t_stop + 1e-12 * grid.window:
        raise WindowError("grid window too short to contain the echo", echo_time=echo_time, t_stop=grid.t_stop)
    sequence = build_sequence(echo_events(grid.t_start, t_pi), grid)
    return compose_sequence(grid, params, sequence, threads)


def compose_rase(grid: SimulationGrid, params: PhysicalParams, t_pi1: float, t_pi2: float = 0.0,
                 threads: Optional[int] = None) -> BogoliubovMap:
    """RASE 序列：t_pi1 处反转原子，t_pi2 处重聚；入射场与初始原子均为真空"""
    if not t_pi1 < t_pi2:
        raise SequenceError("RASE regions overlap: first pi pulse must precede the second",
                            t_pi1=t_pi1, t_pi2=t_pi2)
    sequence = build_sequence(rase_events(t_pi1, t_pi2), grid)
    return compose_sequence(grid, params, sequence, threads)


def verify_symplectic(bmap: BogoliubovMap) -> float:
    """对易关系残差 max|C C^dagger - S S^dagger - I|"""
    if bmap.n_out == 0:
        return 0.0
    c, s = bmap.particle_block, bmap.conjugate_block
    gram = c @ c.conj().T - s @ s.conj().T - np.eye(bmap.n_out)
    return float(np.max(np.abs(gram)))


def coherent_response(bmap: BogoliubovMap, amplitudes: Mapping[int, complex]) -> np.ndarray:
    """相干输入下的平均输出场：<a_out> = C beta + S beta^*

    :param amplitudes: {输入时间 bin: 相干振幅（每模）}
    :return: 每个输出行的平均场
    """
    beta = np.zeros(bmap.n_in, dtype=complex)
    for t_bin, value in amplitudes.items():
        beta[bmap.input_ledger.field_column(int(t_bin))] = value
    return bmap.particle_block @ beta + bmap.conjugate_block @ beta.conj()


def echo_efficiency(bmap: BogoliubovMap, input_bin: int, t_pi: float) -> float:
    """单个输入 bin 的回波效率 |<a_echo>|^2 / |beta|^2，回波位于镜像 bin"""
    echo_bin = bmap.grid.mirror_bin(input_bin, t_pi)
    response = coherent_response(bmap, {input_bin: 1.0})
    return float(abs(response[bmap.row_of(echo_bin)]) ** 2)


def transmitted_amplitude(bmap: BogoliubovMap, t_bin: int) -> complex:
    """同一 bin 的平均场透射振幅"""
    response = coherent_response(bmap, {t_bin: 1.0})
    return complex(response[bmap.row_of(t_bin)])
