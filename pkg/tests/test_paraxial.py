import numpy as np
import pytest
from pydantic import ValidationError

from rase.exceptions import PairingError
from rase.models.paraxial import TransverseGrid
from rase.models.physics import GridSpec, PhysicalParams
from rase.services.correlator_service import linearized_R
from rase.services.phasematch_service import (
    build_pairing,
    kspace_rase_correlations,
    pair_report,
    pairing_table,
    trace_rase_partner,
)


def test_regular_grid_is_symmetric():
    """测试 k_pi = 0 的规则横向网格关于原点对称"""
    grid = TransverseGrid.regular(3, 0.5)
    assert len(grid) == 9
    assert grid.index_of((0.0, 0.0)) == 4
    assert grid.index_of((0.25, 0.0)) is None
    assert all(grid.index_of(-k) is not None for k in grid.k_bins)
    assert grid.is_closed


def test_regular_grid_centered_on_k_pi():
    """测试离轴规则网格以 k_pi 为中心并对伙伴映射闭合"""
    grid = TransverseGrid.regular(5, 1.0, k_pi=(1.0, 0.0))
    assert grid.index_of((1.0, 0.0)) == 12
    assert grid.index_of((3.0, 2.0)) is not None
    assert grid.index_of((-2.0, 0.0)) is None
    assert grid.missing_partners() == []


def test_malformed_grid_rejected():
    """测试 k_bins 形状错误"""
    with pytest.raises(ValidationError):
        TransverseGrid(k_bins=np.array([0.0, 1.0]))


def test_open_grid_missing_partners():
    """测试不闭合网格列出缺伙伴的模"""
    grid = TransverseGrid(k_bins=np.array([[0.0, 0.0], [1.0, 0.0]]))
    assert grid.missing_partners() == [1]
    assert not grid.is_closed


def test_pairing_on_axis():
    """测试 k_pi = 0 时 k 与 -k 配对"""
    grid = TransverseGrid.regular(3, 1.0)
    pairing = build_pairing(grid)
    assert pairing.unmatched == ()
    assert len(pairing.pairs) == 9
    for k_ase, k_rase in pairing.pairs:
        np.testing.assert_array_equal(grid.k_bins[k_ase] + grid.k_bins[k_rase], 0.0)
    assert pairing.is_involution()


def test_pairing_off_axis():
    """测试 k_pi = (q, 0) 时 (kx, ky) 与 (2q - kx, -ky) 配对"""
    grid = TransverseGrid.regular(5, 1.0, k_pi=(1.0, 0.0))
    pairing = build_pairing(grid)
    assert pairing.unmatched == ()
    assert len(pairing.pairs) == 25
    for k_ase, k_rase in pairing.pairs:
        kx, ky = grid.k_bins[k_ase]
        np.testing.assert_allclose(grid.k_bins[k_rase], [2.0 - kx, -ky], atol=1e-12)
    assert pairing.is_involution()

    collinear = grid.index_of((1.0, 0.0))
    assert pairing.partner(collinear) == collinear


def test_open_grid_raises_by_default():
    """测试网格不闭合时默认报错，非严格模式记入 unmatched"""
    grid = TransverseGrid.regular(5, 1.0)
    off_axis = grid.model_copy(update={"k_pi": (1.0, 0.0)})
    with pytest.raises(PairingError):
        build_pairing(off_axis)

    pairing = build_pairing(off_axis, strict=False)
    assert len(pairing.unmatched) == 10
    for k_ase, k_rase in pairing.pairs:
        np.testing.assert_allclose(off_axis.k_bins[k_ase] + off_axis.k_bins[k_rase], [2.0, 0.0])
    assert pairing.is_involution()


def test_trace_rase_partner():
    """测试标签追踪的三个阶段"""
    trace = trace_rase_partner((0.5, -1.0), (1.0, 0.0))
    assert trace.atomic_after_excited == (-0.5, 1.0)
    assert trace.atomic_after_pi == (1.5, 1.0)
    assert trace.k_rase == (1.5, 1.0)


def test_kspace_correlations_block_structure():
    """测试配对之外的关联结构性为零，配对块等于一维结果"""
    grid = TransverseGrid.regular(3, 1.0)
    params = PhysicalParams(alpha=1.0, length=1.0)
    spec = GridSpec(n_t=8, detuning_width=400.0, n_z=8)
    correlations = kspace_rase_correlations(params, grid, spec)
    pairing = correlations.pairing

    mask = np.zeros((len(grid), len(grid)), dtype=bool)
    for k_ase, k_rase in pairing.pairs:
        mask[k_ase, k_rase] = True
    blocks = np.abs(correlations.anomalous).max(axis=(1, 3))
    assert np.all(blocks[~mask] == 0.0)
    assert np.all(blocks[mask] > 0.0)

    first = correlations.block(*pairing.pairs[0])
    for k_ase, k_rase in pairing.pairs[1:]:
        np.testing.assert_array_equal(correlations.block(k_ase, k_rase), first)

    for k_ase, _ in pairing.pairs:
        report = pair_report(correlations, k_ase, 1, 6)
        assert report.R == pytest.approx(linearized_R(1.0), rel=1e-9)

    table = pairing_table(grid, pairing, correlations)
    assert list(table.columns) == ["kx1", "ky1", "kx2", "ky2", "max_abs_m"]
    assert len(table) == 9
