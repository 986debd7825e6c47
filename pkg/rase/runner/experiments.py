"""实验注册表 - 每个实验把配置映射到各服务的调用，并给出可验收的检查项"""

import logging
import math
from typing import Any, Callable, Dict, List, Tuple

import numpy as np
import pandas as pd

from rase.config import get_settings
from rase.exceptions import ConfigError, WindowError
from rase.models.bloch import PulseProfile
from rase.models.experiment import CheckResult, ExperimentConfig, ExperimentResult
from rase.models.paraxial import TransverseGrid
from rase.models.physics import GridSpec, Regime, SimulationGrid
from rase.services import correlator_service as corr
from rase.services.export_service import moment_frame
from rase.services.grid_service import build_grid
from rase.services.integrator_service import (
    area_theorem,
    imperfect_pi_residual,
    integrate,
    linear_ode_oracle,
    oracle_distance,
    pulse_area,
)
from rase.services.kernel_service import (
    compose_rase,
    compose_two_pulse_echo,
    echo_efficiency,
    single_region_map,
    transmitted_amplitude,
    verify_symplectic,
)
from rase.services.phasematch_service import build_pairing, kspace_rase_correlations, pair_report, pairing_table

logger = logging.getLogger(__name__)


class ExperimentRegistry:
    """实验定义 - 名称、说明与验收项"""

    @staticmethod
    def get_experiment_definitions() -> List[Dict[str, Any]]:
        return [
            {"name": "absorb", "description": "基态介质的弱场透射，检查 e^{-alpha l/2}"},
            {"name": "echo", "description": "两脉冲光子回波效率"},
            {"name": "ase", "description": "激发态介质的放大自发辐射通量"},
            {"name": "rase", "description": "RASE 序列的镜像 bin 关联与 Cauchy-Schwartz 比值"},
            {"name": "cs-scan", "description": "R(alpha l) 扫描，给出非经典阈值"},
            {"name": "area", "description": "半经典积分器上的面积定理"},
            {"name": "imperfect-pi", "description": "非理想 pi 脉冲的残余极化退相"},
            {"name": "phasematch", "description": "横向模配对 k_ASE + k_RASE = 2 k_pi"},
            {"name": "oracle-check", "description": "核引擎对照失谐分辨的线性方程，Wick 对照全配对"},
        ]

    @staticmethod
    def names() -> List[str]:
        return [definition["name"] for definition in ExperimentRegistry.get_experiment_definitions()]


def _time_grid(config: ExperimentConfig) -> SimulationGrid:
    t_start, t_stop = config.window
    return build_grid(config.params, config.grid, t_start, t_stop)


def _oracle_grid(config: ExperimentConfig, white_noise_product: float) -> SimulationGrid:
    """对照用的小网格：bin 宽取 W dt = white_noise_product，失谐轴按分辨率阈值加密"""
    settings = get_settings()
    width = config.grid.detuning_width
    n_t = settings.oracle_bins
    window = n_t * white_noise_product / width
    spec = GridSpec(
        n_t=n_t,
        detuning_width=width,
        n_delta=math.ceil(2.0 * width * window / settings.detuning_resolution_threshold - 1e-9),
        n_z=min(config.grid.n_z, settings.oracle_slices),
    )
    t_start = config.window[0]
    return build_grid(config.params, spec, t_start, t_start + window)


def _oracle_distance(config: ExperimentConfig, regime: Regime, white_noise_product: float,
                     threads: int = 1) -> Tuple[float, Any]:
    grid = _oracle_grid(config, white_noise_product)
    oracle = linear_ode_oracle(config.params, grid, regime)
    kernel = single_region_map(grid, config.params, regime, threads)
    return oracle_distance(kernel, oracle, get_settings().oracle_edge_margin), oracle


def _oracle_checks(config: ExperimentConfig, regimes, threads: int = 1, refine: bool = False) -> List[CheckResult]:
    """核映射对照失谐分辨的线性方程；refine 时再比较 W dt 减半的网格，差必须随之变大"""
    product = get_settings().oracle_white_noise_product
    tol = config.tolerances
    checks = []
    for regime in regimes:
        distance, oracle = _oracle_distance(config, regime, product, threads)
        checks.append(CheckResult.absolute(f"oracle_{regime}", distance, 0.0, tol.oracle_rel_tol,
                                           note=f"W*dt={product:g}"))
        if regime == "excited" and config.params.alpha_l > 0:
            gain = np.abs(oracle.particle_block) ** 2
            flux = float(gain.sum(axis=1)[oracle.grid.n_t // 2] - 1.0)
            checks.append(CheckResult.relative("oracle_ase_flux", flux, corr.closed_form_ase_flux(config.params.alpha_l),
                                               tol.ase_rel_tol, note="diag(C C^dagger) - 1"))
        if refine:
            coarse, _ = _oracle_distance(config, regime, 0.5 * product, threads)
            checks.append(CheckResult.condition(f"oracle_{regime}_converges_in_W", distance < coarse or coarse == 0.0, coarse))
    return checks


def run_absorb(config: ExperimentConfig, verify: bool = False, threads: int = 1) -> ExperimentResult:
    grid = _time_grid(config)
    bmap = single_region_map(grid, config.params, "ground", threads)
    alpha_l = config.params.alpha_l
    expected = math.exp(-alpha_l / 2.0)
    amplitudes = np.array([transmitted_amplitude(bmap, b) for b in range(grid.n_t)])
    frame = pd.DataFrame({
        "t_bin": np.arange(grid.n_t),
        "t_center": grid.t_centers,
        "transmission_re": amplitudes.real,
        "transmission_im": amplitudes.imag,
        "expected": expected,
    })
    checks = [CheckResult.relative("transmission", float(np.abs(amplitudes).mean()), expected,
                                   config.tolerances.transmission_rel_tol)]
    if verify:
        checks.extend(_oracle_checks(config, ["ground"], threads))
    return ExperimentResult(experiment="absorb", frame=frame, checks=checks,
                            references={"transmission": expected}, maps={"map": bmap}, grid=grid)


def run_echo(config: ExperimentConfig, verify: bool = False, threads: int = 1) -> ExperimentResult:
    grid = _time_grid(config)
    t_pi = config.sequence.t_pi if config.sequence.t_pi is not None else 0.5 * (grid.t_start + grid.t_stop)
    bmap = compose_two_pulse_echo(grid, config.params, t_pi, threads)
    b = grid.boundary_index(t_pi)
    inputs = [i for i in range(b) if 0 <= grid.mirror_bin(i, t_pi) < grid.n_t]
    if not inputs:
        raise WindowError("no input bin has its echo inside the window", t_pi=t_pi)

    alpha_l = config.params.alpha_l
    efficiencies = np.array([echo_efficiency(bmap, i, t_pi) for i in inputs])
    frame = pd.DataFrame({
        "input_bin": inputs,
        "echo_bin": [grid.mirror_bin(i, t_pi) for i in inputs],
        "efficiency": efficiencies,
        "closed_form": corr.closed_form_efficiency(alpha_l),
        "linearized": corr.linearized_efficiency(alpha_l),
    })
    checks = [CheckResult.relative("echo_efficiency", float(efficiencies.mean()),
                                   corr.linearized_efficiency(alpha_l), config.tolerances.echo_rel_tol)]
    if verify:
        checks.append(CheckResult.absolute("symplectic_residual", verify_symplectic(bmap), 0.0,
                                           config.tolerances.symplectic_bound))
    return ExperimentResult(experiment="echo", frame=frame, checks=checks, references={
        "closed_form_efficiency": corr.closed_form_efficiency(alpha_l),
        "linearized_efficiency": corr.linearized_efficiency(alpha_l),
    }, maps={"map": bmap}, grid=grid)


def run_ase(config: ExperimentConfig, verify: bool = False, threads: int = 1) -> ExperimentResult:
    grid = _time_grid(config)
    bmap = single_region_map(grid, config.params, "excited", threads)
    moments = corr.second_moments(bmap, config.tolerances.symplectic_bound)
    expected = corr.closed_form_ase_flux(config.params.alpha_l)
    frame = pd.DataFrame({"t_bin": moments.bins, "flux": moments.flux, "expected": expected})
    checks = [CheckResult.relative("ase_flux", float(moments.flux.mean()), expected, config.tolerances.ase_rel_tol)]
    if verify:
        checks.extend(_oracle_checks(config, ["excited"], threads))
    return ExperimentResult(experiment="ase", frame=frame, checks=checks,
                            references={"closed_form_ase_flux": expected},
                            tables={"moments": moment_frame(moments)}, maps={"map": bmap}, grid=grid)


def run_rase(config: ExperimentConfig, verify: bool = False, threads: int = 1) -> ExperimentResult:
    grid = _time_grid(config)
    t_pi1 = config.sequence.t_pi1 if config.sequence.t_pi1 is not None else grid.t_start
    t_pi2 = config.sequence.t_pi2
    bmap = compose_rase(grid, config.params, t_pi1, t_pi2, threads)
    moments = corr.second_moments(bmap, config.tolerances.symplectic_bound)

    ase_bins = grid.bins_in(t_pi1, t_pi2)
    pairs = [(int(t1), grid.mirror_bin(int(t1), t_pi2)) for t1 in ase_bins]
    pairs = [(t1, t2) for t1, t2 in pairs if 0 <= t2 < grid.n_t]
    if not pairs:
        raise WindowError("no ASE bin has its mirror partner inside the window", t_pi2=t_pi2)

    reports = [corr.cauchy_schwartz_R(moments, t1, t2) for t1, t2 in pairs]
    frame = pd.DataFrame({
        "t1": [r.t1 for r in reports],
        "t2": [r.t2 for r in reports],
        "n1": [moments.flux[moments.index_of(r.t1)] for r in reports],
        "n2": [moments.flux[moments.index_of(r.t2)] for r in reports],
        "p11": [r.p11 for r in reports],
        "p22": [r.p22 for r in reports],
        "p12": [r.p12 for r in reports],
        "R": [r.R for r in reports],
        "coherence_cross": [r.coherence_cross for r in reports],
    })

    alpha_l = config.params.alpha_l
    t_ase = config.sequence.ase_bin if config.sequence.ase_bin is not None else pairs[len(pairs) // 2][0]
    report = corr.cauchy_schwartz_R(moments, t_ase, grid.mirror_bin(t_ase, t_pi2))
    tol = config.tolerances
    checks = [
        CheckResult.relative("R_mirror", report.R, corr.linearized_R(alpha_l), tol.scan_rel_tol),
        CheckResult.relative("rase_flux", float(moments.flux[moments.index_of(report.t2)]),
                             corr.linearized_rase_flux(alpha_l), tol.ase_rel_tol),
        CheckResult.relative("R_mirror_symmetry", float(frame["R"].max()), float(frame["R"].min()), tol.scan_rel_tol,
                             note="R(t, -t) independent of t"),
    ]
    if verify:
        p_pairing = corr.pairing_fourth_moment(bmap, report.t1, report.t2)
        checks.append(CheckResult.absolute("wick_p12", report.p12, p_pairing, tol.wick_abs_tol * max(1.0, p_pairing)))
    return ExperimentResult(experiment="rase", frame=frame, checks=checks, references={
        "closed_form_R": corr.closed_form_R(alpha_l),
        "linearized_R": corr.linearized_R(alpha_l),
        "linearized_rase_flux": corr.linearized_rase_flux(alpha_l),
        "closed_form_ase_flux": corr.closed_form_ase_flux(alpha_l),
    }, tables={"moments": moment_frame(moments)}, maps={"map": bmap}, grid=grid)


def run_cs_scan(config: ExperimentConfig, verify: bool = False, threads: int = 1) -> ExperimentResult:
    half_window = 0.5 * (config.window[1] - config.window[0])
    frame = corr.scan_R(config.alpha_l_values, config.grid, half_window=half_window, threads=threads)
    tol = config.tolerances
    checks = [
        CheckResult.relative(f"R_{row.alpha_l:g}", row.r_numeric, row.r_linearized, tol.scan_rel_tol)
        for row in frame.itertuples()
    ]
    checks.append(CheckResult.condition("monotone_decreasing", corr.is_monotone_decreasing(
        frame.sort_values("alpha_l")["r_numeric"])))
    threshold = corr.nonclassical_threshold()
    if verify:
        checks.append(CheckResult.absolute("closed_form_threshold", threshold, 1.21, 0.01))
    return ExperimentResult(experiment="cs-scan", frame=frame, checks=checks,
                            references={"nonclassical_threshold": threshold})


def run_area(config: ExperimentConfig, verify: bool = False, threads: int = 1) -> ExperimentResult:
    grid = _time_grid(config)
    profile = config.pulse or PulseProfile.with_area("sech", math.pi, 0.5 * (grid.t_start + grid.t_stop),
                                                     10.0 / grid.detuning_width)
    trajectory = integrate(config.params, grid, profile)
    areas = pulse_area(trajectory)
    theta_in = float(areas[0])
    expected = np.array([area_theorem(theta_in, config.params.alpha * z) for z in trajectory.z_nodes])
    frame = pd.DataFrame({"z": trajectory.z_nodes, "area": areas, "area_theorem": expected})
    checks = [
        CheckResult.relative("output_area", float(areas[-1]), float(expected[-1]), config.tolerances.area_rel_tol),
        CheckResult.absolute("input_area", theta_in, profile.area(trajectory.times), 1e-9),
    ]
    if verify:
        checks.append(CheckResult.absolute("bloch_drift", trajectory.bloch_drift, 0.0, 1e-6))
    return ExperimentResult(experiment="area", frame=frame, checks=checks, references={
        "input_area": theta_in,
        "area_theorem_output": float(expected[-1]),
    }, tables={"trajectory": trajectory.to_frame(stride=max(1, grid.n_t // 1000))}, grid=grid)


def run_imperfect_pi(config: ExperimentConfig, verify: bool = False, threads: int = 1) -> ExperimentResult:
    grid = _time_grid(config)
    t_pi1 = config.sequence.t_pi1 if config.sequence.t_pi1 is not None else grid.t_start
    pulses = [t_pi1, config.sequence.t_pi2]
    epsilon = config.error_angle
    trace = imperfect_pi_residual(epsilon, grid, pulses)
    frame = pd.DataFrame({"t": trace.times, "residual": trace.residual})

    settle = 10.0 / grid.detuning_width
    after_first = trace.max_between(t_pi1 + settle, pulses[1])
    burst_time = 2.0 * pulses[1] - t_pi1
    checks = [CheckResult.condition("dephased_before_second_pulse", after_first <= epsilon / 10.0, after_first)]
    if grid.t_start <= burst_time < grid.t_stop:
        burst = trace.max_between(burst_time - settle, burst_time + settle)
        checks.append(CheckResult.condition("rephased_after_second_pulse", burst >= 0.5 * epsilon, burst))
    return ExperimentResult(experiment="imperfect-pi", frame=frame, checks=checks,
                            references={"error_angle": epsilon, "bound": epsilon / 10.0}, grid=grid)


def _transverse_grid(config: ExperimentConfig) -> TransverseGrid:
    spec = config.transverse
    if spec.k_bins is not None:
        return TransverseGrid(k_bins=np.asarray(spec.k_bins, dtype=float), k_pi=spec.k_pi,
                              tolerance=1e-9 * max(spec.dk, 1.0))
    return TransverseGrid.regular(spec.n, spec.dk, spec.k_pi)


def run_phasematch(config: ExperimentConfig, verify: bool = False, threads: int = 1) -> ExperimentResult:
    spec = config.transverse
    tgrid = _transverse_grid(config)
    pairing = build_pairing(tgrid, strict=not spec.allow_unmatched)
    half_window = 0.5 * (config.window[1] - config.window[0])
    correlations = kspace_rase_correlations(config.params, tgrid, config.grid, half_window, pairing, threads)

    k = np.asarray(tgrid.k_bins)
    two_k_pi = 2.0 * np.asarray(spec.k_pi)
    sums_ok = all(np.allclose(k[a] + k[r], two_k_pi, rtol=0.0, atol=tgrid.tolerance) for a, r in pairing.pairs)

    t1 = int(correlations.ase_bins[len(correlations.ase_bins) // 2])
    half_bins = len(correlations.ase_bins)
    t2 = 2 * half_bins - 1 - t1
    scalar = corr.rase_report(config.params.alpha_l, config.grid, half_window, ase_bin=t1, threads=threads).R

    rows = []
    for k_ase, k_rase in pairing.pairs:
        report = pair_report(correlations, k_ase, t1, t2)
        rows.append({
            "kx1": k[k_ase, 0], "ky1": k[k_ase, 1], "kx2": k[k_rase, 0], "ky2": k[k_rase, 1],
            "abs_m": abs(correlations.anomalous[k_ase, t1, k_rase, t2 - half_bins]),
            "R": report.R,
        })
    frame = pd.DataFrame(rows, columns=["kx1", "ky1", "kx2", "ky2", "abs_m", "R"])

    mask = np.zeros((len(tgrid), len(tgrid)), dtype=bool)
    for k_ase, k_rase in pairing.pairs:
        mask[k_ase, k_rase] = True
    off_pair = np.abs(correlations.anomalous).max(axis=(1, 3))[~mask]
    checks = [
        CheckResult.condition("phase_matching", sums_ok),
        CheckResult.condition("involution", pairing.is_involution()),
        CheckResult.condition("off_pair_zero", bool(off_pair.size == 0 or off_pair.max() == 0.0)),
    ]
    if len(frame):
        worst = float(frame["R"].sub(scalar).abs().max())
        checks.append(CheckResult.absolute("pair_R_matches_scalar", worst / scalar, 0.0,
                                           config.tolerances.phasematch_rel_tol))
    return ExperimentResult(experiment="phasematch", frame=frame, checks=checks, references={
        "scalar_R": scalar,
        "unmatched": float(len(pairing.unmatched)),
    }, tables={"pairing": pairing_table(tgrid, pairing, correlations)})


def run_oracle_check(config: ExperimentConfig, verify: bool = False, threads: int = 1) -> ExperimentResult:
    checks = _oracle_checks(config, ["ground", "excited"], threads, refine=verify)

    cap = get_settings().oracle_max_bins
    half = 0.5 * (config.window[1] - config.window[0])
    spec = config.grid.model_copy(update={"n_t": min(config.grid.n_t or cap, cap) // 2 * 2, "dt": None})
    grid = build_grid(config.params, spec, -half, half)
    bmap = compose_rase(grid, config.params, -half, 0.0, threads)
    moments = corr.second_moments(bmap, config.tolerances.symplectic_bound)
    rows = []
    for t_i in range(grid.n_t):
        for t_j in range(grid.n_t):
            wick = corr.intensity_correlation(moments, t_i, t_j)
            pairing = corr.pairing_fourth_moment(bmap, t_i, t_j)
            rows.append({"t_i": t_i, "t_j": t_j, "wick": wick, "pairing": pairing})
    frame = pd.DataFrame(rows, columns=["t_i", "t_j", "wick", "pairing"])
    worst = float((frame["wick"] - frame["pairing"]).abs().max())
    scale = max(1.0, float(frame["pairing"].abs().max()))
    checks.append(CheckResult.absolute("wick_vs_pairing", worst / scale, 0.0, config.tolerances.wick_abs_tol))
    checks.append(CheckResult.condition("gaussian_physical", moments.is_physical()))
    return ExperimentResult(experiment="oracle-check", frame=frame, checks=checks,
                            tables={"moments": moment_frame(moments)}, grid=grid)


EXPERIMENTS: Dict[str, Callable[..., ExperimentResult]] = {
    "absorb": run_absorb,
    "echo": run_echo,
    "ase": run_ase,
    "rase": run_rase,
    "cs-scan": run_cs_scan,
    "area": run_area,
    "imperfect-pi": run_imperfect_pi,
    "phasematch": run_phasematch,
    "oracle-check": run_oracle_check,
}


def check_registry() -> None:
    if set(EXPERIMENTS) != set(ExperimentRegistry.names()):
        raise ConfigError("experiment registry and definitions disagree")
