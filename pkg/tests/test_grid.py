import logging
import math

import pytest
from pydantic import ValidationError

from rase.exceptions import GridError, SequenceError
from rase.models.physics import (
    GridSpec,
    LedgerEntry,
    ModeLedger,
    PhysicalParams,
    PulseEvent,
    SimulationGrid,
    atomic_entry,
    field_entry,
)
from rase.services.grid_service import build_grid, build_sequence, echo_events, rase_events


def test_alpha_l(params):
    """测试光学深度"""
    assert params.alpha_l == 1.0
    assert PhysicalParams.from_alpha_l(2.0, length=4.0).alpha == 0.5


def test_build_grid_geometry(small_grid):
    """测试网格几何量"""
    assert small_grid.n_t == 8
    assert small_grid.dt == pytest.approx(0.25)
    assert small_grid.t_centers[0] == pytest.approx(-0.875)
    assert len(small_grid.delta_centers) == 50
    assert small_grid.delta_centers[0] == pytest.approx(-400.0 + 8.0)
    assert small_grid.z_edges[-1] == pytest.approx(1.0)
    assert len(small_grid.z_edges) == small_grid.n_z + 1


def test_validity_flags_warn(params, caplog):
    """测试阈值不满足时只告警"""
    with caplog.at_level(logging.WARNING):
        grid = build_grid(params, GridSpec(n_t=64, detuning_width=400.0, n_delta=200, n_z=8), -1.0, 1.0)
    assert not grid.white_noise_valid
    assert not grid.detuning_resolved
    assert "white-noise" in caplog.text
    assert "detuning resolution" in caplog.text


def test_white_noise_flag_from_dt(params):
    """测试按 dt 构建网格，W*dt 恰好等于阈值"""
    grid = build_grid(params, GridSpec(dt=0.05, detuning_width=400.0, n_delta=200, n_z=8), 0.0, 1.0)
    assert grid.n_t == 20
    assert grid.white_noise_valid


@pytest.mark.parametrize("t_start, t_stop, spec", [
    (1.0, 1.0, GridSpec(n_t=8, detuning_width=400.0)),
    (0.0, 1.0, GridSpec(dt=0.3, detuning_width=400.0)),
    (0.0, 1.0, GridSpec(detuning_width=400.0)),
    (0.0, 1.0, GridSpec(n_t=8, detuning_width=-1.0)),
])
def test_build_grid_rejects(params, t_start, t_stop, spec):
    """测试非法网格"""
    with pytest.raises(GridError):
        build_grid(params, spec, t_start, t_stop)


def test_boundaries_and_mirror(small_grid):
    """测试 bin 边界与镜像"""
    assert small_grid.boundary_index(0.0) == 4
    assert small_grid.boundary_index(0.1) is None
    assert small_grid.mirror_bin(0, 0.0) == 7
    assert small_grid.mirror_bin(3, 0.0) == 4
    assert list(small_grid.bins_in(-1.0, 0.0)) == [0, 1, 2, 3]


def test_grid_json_round_trip(small_grid):
    """测试网格序列化"""
    assert SimulationGrid.from_json(small_grid.to_json()) == small_grid


def test_rase_sequence_regions(small_grid):
    """测试 RASE 序列的区域标签"""
    sequence = build_sequence(rase_events(-1.0, 0.0), small_grid)
    assert [r.regime for r in sequence.regions] == ["ground", "excited", "ground"]
    assert sequence.regions[0].start == -math.inf
    assert sequence.regions[1].start == -1.0 and sequence.regions[1].stop == 0.0
    assert len(sequence.pi_pulses) == 2
    assert sequence.region_at(0.5).regime == "ground"


def test_echo_sequence_starts_at_input():
    """测试弱输入开启第一个区域"""
    sequence = build_sequence(echo_events(-1.0, 0.0))
    assert len(sequence.regions) == 2
    assert sequence.regions[0].start == -1.0
    assert sequence.regions[1].regime == "excited"


def test_sequence_rejects_unordered_events():
    """测试事件必须严格递增"""
    events = [PulseEvent(time=0.0, kind="pi"), PulseEvent(time=0.0, kind="pi")]
    with pytest.raises(SequenceError):
        build_sequence(events)


def test_sequence_rejects_off_boundary_pi(small_grid):
    """测试 pi 脉冲必须落在 bin 边界"""
    with pytest.raises(SequenceError):
        build_sequence([PulseEvent(time=0.1, kind="pi")], small_grid)


def test_ledger_normalization():
    """测试账本模的单位对易归一化"""
    entry = atomic_entry(3, "initial-ground-atomic", 2, 5, dz=0.1, dt=0.25)
    assert entry.normalization ** 2 * entry.measure == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        LedgerEntry(id=0, kind="input-field-bin", t_bin=0, measure=0.25, normalization=1.0)


def test_ledger_unique_ids():
    """测试账本 id 唯一"""
    with pytest.raises(ValidationError):
        ModeLedger(entries=(field_entry(0, 0, 0.25), field_entry(0, 1, 0.25)))
    ledger = ModeLedger(entries=(field_entry(0, 0, 0.25), field_entry(1, 1, 0.25)))
    assert ledger.field_column(1) == 1
    assert list(ledger.columns_of("input-field-bin")) == [0, 1]


@pytest.mark.parametrize("n_pulses", range(6))
def test_regions_alternate_with_pi_count(small_grid, n_pulses):
    """测试 n 个 pi 脉冲给出 n+1 个交替区域"""
    events = [PulseEvent(time=-0.75 + 0.25 * k, kind="pi") for k in range(n_pulses)]
    sequence = build_sequence(events, small_grid)
    regimes = [r.regime for r in sequence.regions]
    assert len(regimes) == n_pulses + 1
    assert regimes == [("ground", "excited")[k % 2] for k in range(n_pulses + 1)]
    for region, event in zip(sequence.regions, events):
        assert region.closing_pulse == event
        assert region.stop == event.time
    assert sequence.regions[-1].closing_pulse is None
