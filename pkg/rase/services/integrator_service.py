"""半经典 Maxwell-Bloch 积分器与线性化的失谐分辨对照

时间方向为经典 RK4，每个 RK 阶段都用 z 方向梯形积分重建整条传播轴上的场：
    d sigma / dt   = i Delta sigma - i Omega sigma_z / 2
    d sigma_z / dt = i (Omega sigma^* - Omega^* sigma)
    d Omega / dz   = i (alpha / pi) * integral sigma dDelta
线性化时 sigma_z 冻结在 -1（基态）或 +1（激发态），只在理想 pi 处翻转。
"""

import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from rase.config import get_settings
from rase.exceptions import NaNDetectedError, OracleCapError, StepConditionError
from rase.models.bloch import BlochState, PulseProfile, ResidualTrace, Trajectory
from rase.models.maps import BogoliubovMap, EnsembleState
from rase.models.physics import ModeLedger, PhysicalParams, Regime, SimulationGrid, field_entry

logger = logging.getLogger(__name__)


def max_stable_step(grid: SimulationGrid, profile: Optional[PulseProfile]) -> float:
    peak = abs(profile.amplitude) if profile is not None else 0.0
    return 0.1 / max(grid.detuning_width, peak)


def _field_along_z(sigma: np.ndarray, omega_in, params: PhysicalParams,
                   grid: SimulationGrid) -> Tuple[np.ndarray, np.ndarray]:
    """sigma 形状 (..., z 节点, 失谐)，前导轴逐列独立"""
    polarization = sigma.sum(axis=-1) * grid.d_delta
    source = 1j * params.alpha / math.pi * polarization
    field = np.asarray(omega_in)[..., np.newaxis] + cumulative_trapezoid(source, dx=grid.dz, initial=0.0, axis=-1)
    return field, polarization


def _derivatives(sigma, sigma_z, omega_in, params, grid, detunings, linear):
    field, _ = _field_along_z(sigma, omega_in, params, grid)
    omega = field[..., np.newaxis]
    d_sigma = 1j * detunings * sigma - 0.5j * omega * sigma_z
    if linear:
        return d_sigma, 0.0
    d_sigma_z = -2.0 * np.imag(omega * sigma.conj())
    return d_sigma, d_sigma_z


def _march(params, grid, drive, sigma, sigma_z, pi_steps, linear):
    """RK4 主循环

    :param drive: (n_t, 3, ...) 每步起点、中点、终点的 z=0 输入场
    :return: 逐节点的场、极化、反转均值，末态与 Bloch 长度漂移
    """
    dt = grid.dt
    detunings = grid.delta_centers
    lead = sigma.shape[:-1]
    fields = np.zeros((grid.n_t + 1,) + lead, dtype=complex)
    polarizations = np.zeros_like(fields)
    inversion = np.zeros((grid.n_t + 1,) + lead)
    length_0 = 4.0 * np.abs(sigma) ** 2 + sigma_z ** 2
    drift = 0.0

    for step in range(grid.n_t + 1):
        if step in pi_steps:
            sigma, sigma_z = sigma.conj(), -sigma_z
        omega_node = drive[step, 0] if step < grid.n_t else drive[-1, 2]
        fields[step], polarizations[step] = _field_along_z(sigma, omega_node, params, grid)
        inversion[step] = np.broadcast_to(sigma_z, sigma.shape).mean(axis=-1)
        if not linear:
            length = 4.0 * np.abs(sigma) ** 2 + sigma_z ** 2
            drift = max(drift, float(np.max(np.abs(length - length_0))))
        if step == grid.n_t:
            break

        start, middle, end = drive[step, 0], drive[step, 1], drive[step, 2]
        k1 = _derivatives(sigma, sigma_z, start, params, grid, detunings, linear)
        k2 = _derivatives(sigma + 0.5 * dt * k1[0], sigma_z + 0.5 * dt * k1[1],
                          middle, params, grid, detunings, linear)
        k3 = _derivatives(sigma + 0.5 * dt * k2[0], sigma_z + 0.5 * dt * k2[1],
                          middle, params, grid, detunings, linear)
        k4 = _derivatives(sigma + dt * k3[0], sigma_z + dt * k3[1], end, params, grid, detunings, linear)
        sigma = sigma + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        sigma_z = sigma_z + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])

        if not (np.isfinite(sigma).all() and np.isfinite(sigma_z).all()):
            raise NaNDetectedError("non-finite Bloch variables", step=step, time=float(grid.t_edges[step + 1]))

    return fields, polarizations, inversion, sigma, sigma_z, drift


def integrate(
    params: PhysicalParams,
    grid: SimulationGrid,
    profile: Optional[PulseProfile] = None,
    initial: Optional[BlochState] = None,
    ideal_pi_times: Sequence[float] = (),
    linear: bool = False,
) -> Trajectory:
    """在 grid 的时间窗口内积分，时间步长为 grid.dt，z 节点为 grid.z_edges

    :param profile: z=0 处的输入包络，None 表示零场
    :param initial: 初态，默认基态
    :param ideal_pi_times: 在这些时间步边界上施加瞬时理想 pi（sigma -> sigma^*，sigma_z -> -sigma_z）
    :param linear: 冻结 sigma_z，得到线性化方程
    """
    dt = grid.dt
    limit = max_stable_step(grid, profile)
    if dt > limit * (1.0 + 1e-9):
        raise StepConditionError(f"time step {dt:.3g} exceeds 0.1/max(W, peak Rabi) = {limit:.3g}",
                                 dt=dt, limit=limit)

    pi_steps = {}
    for t_pi in ideal_pi_times:
        b = grid.boundary_index(t_pi)
        if b is None:
            raise StepConditionError("ideal pi pulse must fall on a time step", time=t_pi)
        pi_steps[b] = t_pi

    n_nodes = grid.n_z + 1
    state = initial if initial is not None else BlochState.ground(n_nodes, grid.n_delta)
    sigma = np.array(state.sigma_minus, dtype=complex)
    sigma_z = np.array(state.sigma_z, dtype=float)

    starts = grid.t_edges[:-1]
    if profile is not None:
        drive = np.stack([profile.sample(starts), profile.sample(starts + 0.5 * dt),
                          profile.sample(starts + dt)], axis=1)
    else:
        drive = np.zeros((grid.n_t, 3), dtype=complex)

    fields, polarizations, inversion, sigma, sigma_z, drift = _march(
        params, grid, drive, sigma, sigma_z, pi_steps, linear)

    logger.debug("integrated %d steps on %d x %d cells, Bloch drift %.2e",
                 grid.n_t, n_nodes, grid.n_delta, drift)
    return Trajectory(
        times=grid.t_edges,
        z_nodes=grid.z_edges,
        field=fields,
        polarization=polarizations,
        sigma_z_mean=inversion,
        final=BlochState(sigma_minus=sigma, sigma_z=sigma_z, field=fields[-1]),
        bloch_drift=drift,
        ideal_pi_times=tuple(sorted(pi_steps.values())),
    )


def pulse_area(trajectory: Trajectory, z: Optional[float] = None) -> np.ndarray:
    """theta(z) = |integral Omega(z, t) dt|；给定 z 时只返回最近节点的值"""
    areas = np.abs(trapezoid(trajectory.field, trajectory.times, axis=0))
    if z is None:
        return areas
    return areas[trajectory.node_index(z)]


def imperfect_pi_residual(
    error_angle: float,
    grid: SimulationGrid,
    pulse_times: Sequence[float] = (0.0,),
) -> ResidualTrace:
    """非理想 pi 脉冲的残余宏观极化

    每个脉冲先做理想反转（相干共轭），再留下大小为 error_angle/2 的相干激发；
    平坦谱下残余极化以 sinc 形式退相，只有下一个强脉冲才能把它重聚。
    归一化使刚激发的系综给出 |P| = error_angle。
    """
    times = grid.t_centers
    detunings = grid.delta_centers
    pulses = sorted(float(t) for t in pulse_times)
    residual = np.zeros(len(times))

    coherence = np.zeros(len(detunings), dtype=complex)
    for k, t_pulse in enumerate(pulses):
        coherence = coherence.conj() + 0.5j * error_angle
        stop = pulses[k + 1] if k + 1 < len(pulses) else math.inf
        mask = (times >= t_pulse) & (times < stop)
        phases = np.exp(1j * np.outer(times[mask] - t_pulse, detunings))
        residual[mask] = 2.0 * np.abs(phases @ coherence) / len(detunings)
        if math.isfinite(stop):
            coherence = coherence * np.exp(1j * detunings * (stop - t_pulse))

    return ResidualTrace(
        times=times,
        residual=residual,
        pulse_times=tuple(pulses),
        error_angle=error_angle,
        detuning_width=grid.detuning_width,
    )


def linear_ode_oracle(params: PhysicalParams, grid: SimulationGrid, regime: Regime) -> BogoliubovMap:
    """冻结反转后在 (z, Delta, t) 网格上逐列传播单位场激发，作为核引擎的独立对照

    第 b 列在 z=0 处注入幅度 1/sqrt(dt) 的 bin 方波，z=l 处的输出场按输出 bin 求积。
    时间子步取 0.1/W，失谐轴与 z 轴直接用 grid 的离散。
    返回的映射只有输入场列；激发态的 ASE 占据数由 diag(C C^dagger) - 1 给出。
    """
    settings = get_settings()
    if grid.n_t > settings.oracle_max_bins or grid.n_z > settings.oracle_max_slices:
        raise OracleCapError(
            f"oracle limited to {settings.oracle_max_bins} bins and {settings.oracle_max_slices} slices",
            n_t=grid.n_t, n_z=grid.n_z,
        )

    substeps = max(1, math.ceil(grid.dt * grid.detuning_width / 0.1 - 1e-9))
    fine = grid.model_copy(update={"n_t": grid.n_t * substeps})
    owner = np.arange(fine.n_t) // substeps
    drive = np.zeros((fine.n_t, 3, grid.n_t), dtype=complex)
    drive[np.arange(fine.n_t), :, owner] = 1.0 / math.sqrt(grid.dt)

    shape = (grid.n_t, grid.n_z + 1, grid.n_delta)
    sigma = np.zeros(shape, dtype=complex)
    sigma_z = np.full(shape, -1.0 if regime == "ground" else 1.0)
    _, polarizations, _, _, _, _ = _march(params, fine, drive, sigma, sigma_z, {}, linear=True)

    # 输出场 = 输入方波 + 介质辐射；方波部分对输出 bin 的求积恰为单位阵
    emitted = 1j * params.alpha / math.pi * trapezoid(polarizations, dx=grid.dz, axis=-1)
    particle = np.eye(grid.n_t, dtype=complex)
    for i in range(grid.n_t):
        segment = emitted[i * substeps:(i + 1) * substeps + 1]
        particle[i] += trapezoid(segment, dx=fine.dt, axis=0) / math.sqrt(grid.dt)

    logger.debug("oracle %s: %d columns, %d substeps per bin, %d detuning bins",
                 regime, grid.n_t, substeps, grid.n_delta)
    return BogoliubovMap(
        particle_block=particle,
        conjugate_block=np.zeros_like(particle),
        input_ledger=ModeLedger(entries=tuple(field_entry(b, b, grid.dt) for b in range(grid.n_t))),
        output_bins=np.arange(grid.n_t),
        grid=grid,
        params=params,
        ensemble=EnsembleState(regime=regime),
    )


def oracle_distance(kernel: BogoliubovMap, oracle: BogoliubovMap, margin: float = 5.0) -> float:
    """场到场块的相对最大范数差，只比较中心离窗口边缘至少 margin/W 的 bin"""
    grid = oracle.grid
    guard = margin / grid.detuning_width
    interior = grid.bins_in(grid.t_start + guard, grid.t_stop - guard)
    if len(interior) == 0:
        raise OracleCapError("no bins left after the edge margin", margin=margin, n_t=grid.n_t)

    def block(bmap: BogoliubovMap) -> np.ndarray:
        rows = [bmap.row_of(b) for b in interior]
        columns = [bmap.input_ledger.field_column(b) for b in interior]
        return bmap.particle_block[np.ix_(rows, columns)]

    kernel_block, oracle_block = block(kernel), block(oracle)
    return float(np.abs(kernel_block - oracle_block).max() / np.abs(oracle_block).max())


def area_theorem(theta_in: float, alpha_l: float) -> float:
    """d theta/dz = -(alpha/2) sin theta 的解：tan(theta/2) 按 e^{-alpha l/2} 缩放"""
    half = theta_in / 2.0
    return 2.0 * math.atan2(math.sin(half) * math.exp(-alpha_l / 2.0), math.cos(half))
