import math

import numpy as np
import pytest

from rase.exceptions import DegenerateStateError, DivergenceError, SymplecticError
from rase.models.maps import BogoliubovMap
from rase.models.moments import MomentSet
from rase.models.physics import GridSpec, PhysicalParams
from rase.services.correlator_service import (
    SCAN_COLUMNS,
    cauchy_schwartz_R,
    closed_form_ase_flux,
    closed_form_efficiency,
    closed_form_R,
    intensity_correlation,
    is_monotone_decreasing,
    linearized_R,
    linearized_rase_flux,
    nonclassical_threshold,
    pairing_fourth_moment,
    rase_report,
    scan_R,
    second_moments,
)
from rase.services.export_service import moment_frame
from rase.services.grid_service import build_grid
from rase.services.kernel_service import compose_rase, single_region_map


def _squeezer(r: float) -> BogoliubovMap:
    c = math.cosh(r) * np.eye(2)
    s = math.sinh(r) * np.array([[0.0, 1.0], [1.0, 0.0]])
    return BogoliubovMap.from_blocks(c, s)


def test_passive_map_has_no_moments():
    """测试无源映射输出真空"""
    moments = second_moments(BogoliubovMap.identity(3))
    assert np.all(moments.flux == 0.0)
    assert np.abs(moments.anomalous).max() == 0.0


def test_excited_map_ase_flux(small_grid, params):
    """测试激发态 ASE 通量 e^{alpha l} - 1"""
    moments = second_moments(single_region_map(small_grid, params, "excited"))
    np.testing.assert_allclose(moments.flux, math.e - 1.0, rtol=1e-9)


def test_two_mode_squeezer():
    """测试双模压缩：n = sinh^2 r，|m| = sinh r cosh r"""
    r = 0.7
    moments = second_moments(_squeezer(r))
    np.testing.assert_allclose(moments.flux, math.sinh(r) ** 2)
    assert abs(moments.anomalous[0, 1]) == pytest.approx(math.sinh(r) * math.cosh(r))
    assert moments.anomalous[0, 1] == pytest.approx(moments.anomalous[1, 0])
    assert moments.is_physical()


def test_second_moments_refuse_non_symplectic():
    """测试辛残差超限时拒绝计算"""
    bad = BogoliubovMap.from_blocks(2.0 * np.eye(2), np.zeros((2, 2)))
    with pytest.raises(SymplecticError):
        second_moments(bad)


def test_thermal_correlations():
    """测试无交叉项的热态：R = 1/4，p(t,t) = 2 n^2"""
    moments = MomentSet.thermal([0.5, 2.0])
    assert intensity_correlation(moments, 0, 0) == pytest.approx(0.5)
    assert intensity_correlation(moments, 0, 1) == pytest.approx(1.0)
    report = cauchy_schwartz_R(moments, 0, 1)
    assert report.R == 0.25
    assert not report.nonclassical


def test_degenerate_denominator():
    """测试零通量 bin"""
    with pytest.raises(DegenerateStateError):
        cauchy_schwartz_R(MomentSet.thermal([0.0, 1.0]), 0, 1)


def test_closed_forms():
    """测试闭式参考值"""
    assert closed_form_R(1.0) == pytest.approx(1.4642196, rel=1e-5)
    assert closed_form_R(2.0) == pytest.approx(0.4786670, rel=1e-5)
    assert closed_form_R(40.0) == pytest.approx(0.25, abs=1e-6)
    assert closed_form_efficiency(0.0) == 0.0
    assert closed_form_efficiency(1.0) == pytest.approx(0.27154, abs=1e-5)
    assert closed_form_efficiency(2.0) == pytest.approx(1.38110, abs=1e-5)
    assert closed_form_ase_flux(0.0) == 0.0
    assert closed_form_ase_flux(1.0) == pytest.approx(1.71828, abs=1e-5)
    assert closed_form_ase_flux(math.log(2.0)) == pytest.approx(1.0)


def test_closed_form_R_diverges_at_zero():
    """测试零光学深度的发散"""
    with pytest.raises(DivergenceError):
        closed_form_R(0.0)
    with pytest.raises(DivergenceError):
        linearized_R(0.0)


def test_nonclassical_threshold():
    """测试 closed_form_R = 1 的根"""
    assert nonclassical_threshold() == pytest.approx(1.21, abs=0.01)


@pytest.mark.parametrize("alpha_l", [0.25, 1.0, 2.0])
def test_rase_mirror_bins_match_linearized(alpha_l):
    """测试镜像 bin 的 R 与线性化闭式一致"""
    spec = GridSpec(n_t=8, detuning_width=400.0, n_z=8)
    report = rase_report(alpha_l, spec)
    assert report.R == pytest.approx(linearized_R(alpha_l), rel=1e-9)
    assert report.p22 == pytest.approx(2.0 * linearized_rase_flux(alpha_l) ** 2, rel=1e-9)
    assert report.coherence_cross == pytest.approx(0.0, abs=1e-12)
    assert report.nonclassical


def test_rase_mirror_symmetry():
    """测试 R(t, -t) 与 t 无关"""
    spec = GridSpec(n_t=8, detuning_width=400.0, n_z=8)
    values = [rase_report(1.0, spec, ase_bin=t).R for t in range(4)]
    np.testing.assert_allclose(values, values[0], rtol=1e-9)


def test_wick_matches_pairing(params):
    """测试 Wick 展开与 Isserlis 全配对一致"""
    grid = build_grid(params, GridSpec(n_t=4, detuning_width=400.0, n_z=4), -1.0, 1.0)
    bmap = compose_rase(grid, params, -1.0, 0.0)
    moments = second_moments(bmap)
    assert moments.is_physical()
    for t_i in range(4):
        for t_j in range(4):
            assert intensity_correlation(moments, t_i, t_j) == pytest.approx(
                pairing_fourth_moment(bmap, t_i, t_j), abs=1e-10)


def test_scan_R():
    """测试 R(alpha l) 扫描表"""
    spec = GridSpec(n_t=8, detuning_width=400.0, n_z=8)
    frame = scan_R([0.5, 1.0, 1.5, 2.0], spec, threads=2)
    assert list(frame.columns) == SCAN_COLUMNS
    assert list(frame["alpha_l"]) == [0.5, 1.0, 1.5, 2.0]
    assert (frame["rel_err_linearized"] < 0.02).all()
    assert is_monotone_decreasing(frame["r_numeric"])
    assert frame["r_closed"].iloc[1] == pytest.approx(1.4642196, rel=1e-5)


def test_scan_R_rejects_zero_depth():
    """测试扫描点必须为正"""
    with pytest.raises(DivergenceError):
        scan_R([0.0], GridSpec(n_t=8, detuning_width=400.0, n_z=8))


def test_physical_params_depth():
    """测试 from_alpha_l"""
    assert PhysicalParams.from_alpha_l(1.5).alpha_l == pytest.approx(1.5)


def test_moment_frame_layout():
    """测试矩长表的行数与取值"""
    moments = second_moments(_squeezer(0.3))
    frame = moment_frame(moments)
    assert len(frame) == 4
    row = frame[(frame["t_i"] == 0) & (frame["t_j"] == 1)].iloc[0]
    assert row["m_re"] == pytest.approx(math.sinh(0.3) * math.cosh(0.3))
    assert row["n_i"] == pytest.approx(math.sinh(0.3) ** 2)
