import logging
import math
from typing import Iterable, List, Optional

from rase.config import get_settings
from rase.exceptions import GridError, SequenceError
from rase.models.physics import (
    GridSpec,
    PhysicalParams,
    PulseEvent,
    PulseSequence,
    Region,
    SimulationGrid,
)

logger = logging.getLogger(__name__)


def build_grid(
    params: PhysicalParams,
    resolutions: GridSpec,
    t_start: float,
    t_stop: float,
    white_noise_threshold: Optional[float] = None,
    detuning_resolution_threshold: Optional[float] = None,
) -> SimulationGrid:
    """根据物理参数和请求分辨率构建网格

    :param params: 物理参数（提供样品长度）
    :param resolutions: 请求的分辨率
    :param t_start: 模拟窗口起点
    :param t_stop: 模拟窗口终点
    :return: 带有效性标记的网格；阈值不满足只告警不报错
    """
    settings = get_settings()
    wn_threshold = white_noise_threshold if white_noise_threshold is not None else settings.white_noise_threshold
    dr_threshold = (
        detuning_resolution_threshold
        if detuning_resolution_threshold is not None
        else settings.detuning_resolution_threshold
    )

    window = t_stop - t_start
    if not window > 0:
        raise GridError(f"time window must have positive span, got [{t_start}, {t_stop}]")
    if resolutions.detuning_width <= 0:
        raise GridError("detuning span must be positive", detuning_width=resolutions.detuning_width)
    if resolutions.n_delta <= 0 or resolutions.n_z <= 0:
        raise GridError("bin counts must be positive", n_delta=resolutions.n_delta, n_z=resolutions.n_z)

    if resolutions.n_t is not None:
        n_t = resolutions.n_t
    elif resolutions.dt is not None and resolutions.dt > 0:
        n_t = int(round(window / resolutions.dt))
        if n_t < 1 or abs(n_t * resolutions.dt - window) > 1e-9 * window:
            raise GridError("window is not a whole number of time bins", dt=resolutions.dt, window=window)
    else:
        raise GridError("either a positive n_t or a positive dt is required")
    if n_t <= 0:
        raise GridError("n_t must be positive", n_t=n_t)

    dt = window / n_t
    d_delta = 2.0 * resolutions.detuning_width / resolutions.n_delta
    # 阈值比较留一点舍入余量：W=400, dt=0.05 恰好等于 20
    white_noise_valid = resolutions.detuning_width * dt >= wn_threshold * (1.0 - 1e-12)
    detuning_resolved = d_delta * window <= dr_threshold * (1.0 + 1e-12)

    if not white_noise_valid:
        logger.warning("white-noise condition violated: W*dt=%.4g < %.4g",
                       resolutions.detuning_width * dt, wn_threshold)
    if not detuning_resolved:
        logger.warning("detuning resolution violated: dDelta*T=%.4g > %.4g",
                       d_delta * window, dr_threshold)

    return SimulationGrid(
        t_start=t_start,
        t_stop=t_stop,
        n_t=n_t,
        detuning_width=resolutions.detuning_width,
        n_delta=resolutions.n_delta,
        length=params.length,
        n_z=resolutions.n_z,
        white_noise_threshold=wn_threshold,
        detuning_resolution_threshold=dr_threshold,
        white_noise_valid=white_noise_valid,
        detuning_resolved=detuning_resolved,
    )


def build_sequence(events: Iterable[PulseEvent], grid: Optional[SimulationGrid] = None) -> PulseSequence:
    """为事件列表推导区域标签

    第一个区域从首个弱输入开始（若首个事件是 pi 脉冲则从 -inf 开始），
    每个 pi 脉冲结束当前区域并切换基态/激发态，因此 n 个 pi 脉冲给出 n+1 个区域。

    :param events: 按时间排序的事件
    :param grid: 可选网格，用于检查 pi 脉冲落在 bin 边界上
    :return: 脉冲序列
    """
    events = list(events)
    for earlier, later in zip(events, events[1:]):
        if not later.time > earlier.time:
            raise SequenceError(
                "events must be strictly time-ordered without overlap",
                earlier=earlier.time, later=later.time,
            )

    if grid is not None:
        for event in events:
            if event.kind == "pi" and grid.boundary_index(event.time) is None:
                raise SequenceError("pi pulse does not lie on a grid bin boundary", time=event.time)

    if events and events[0].kind == "weak":
        start = events[0].time
    else:
        start = -math.inf

    regions: List[Region] = []
    regime = "ground"
    for event in events:
        if event.kind != "pi":
            continue
        regions.append(Region(start=start, stop=event.time, regime=regime, closing_pulse=event))
        start = event.time
        regime = "excited" if regime == "ground" else "ground"
    regions.append(Region(start=start, stop=math.inf, regime=regime))

    logger.debug("built sequence with %d events and %d regions", len(events), len(regions))
    return PulseSequence(events=tuple(events), regions=tuple(regions))


def rase_events(t_pi1: float, t_pi2: float = 0.0) -> List[PulseEvent]:
    """RASE 的两个 pi 脉冲"""
    return [PulseEvent(time=t_pi1, kind="pi"), PulseEvent(time=t_pi2, kind="pi")]


def echo_events(t_input: float, t_pi: float) -> List[PulseEvent]:
    """两脉冲回波：弱输入后接一个 pi 脉冲"""
    return [PulseEvent(time=t_input, kind="weak"), PulseEvent(time=t_pi, kind="pi")]
