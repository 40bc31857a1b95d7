import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gaussfisher.dyne import (DyneKind, DyneSetting, HomodyneLimit, cfi_closed_beta_zero,
                              cfi_general_dyne, cfi_markovian, general_dyne_cfi,
                              markovian_derivatives, maximize_over_time, optimize_dyne,
                              optimize_dyne_batch, optimize_dyne_markovian, saturation_times,
                              seed_covariance)
from gaussfisher.errors import DomainError
from gaussfisher.markovian import SystemParams
from gaussfisher.qfi import qfi_gaussian, qfi_markovian

FIG1 = SystemParams(2.1, alpha_mod=1.0, alpha_arg=math.pi / 2)


def test_seed_covariances():
    np.testing.assert_array_equal(seed_covariance(DyneSetting.heterodyne()), np.eye(2))
    np.testing.assert_array_equal(seed_covariance(DyneSetting.general(2.0)), np.diag([2.0, 0.5]))
    assert seed_covariance(DyneSetting.homodyne_q()) == HomodyneLimit(0)
    assert seed_covariance(DyneSetting.homodyne_p()) == HomodyneLimit(1)


@pytest.mark.parametrize("z", [0.0, -1.0, float("inf"), float("nan")])
def test_general_setting_rejects_bad_z(z):
    with pytest.raises(DomainError):
        DyneSetting.general(z)


def test_setting_kinds():
    assert DyneSetting("heterodyne").z == 1.0
    assert DyneSetting.homodyne_p().is_homodyne
    assert DyneSetting.homodyne_q().quadrature == 0
    assert not DyneSetting.general(3.0).is_homodyne


def test_no_signal_no_information():
    for setting in (DyneSetting.homodyne_q(), DyneSetting.homodyne_p(),
                    DyneSetting.heterodyne(), DyneSetting.general(0.3)):
        assert cfi_general_dyne(np.zeros(2), np.eye(2), np.zeros((2, 2)), setting) == 0.0


def test_closed_form_heterodyne_unitary():
    for t in (0.5, 2.0, 9.0):
        assert cfi_closed_beta_zero(FIG1, t, 1.0) == pytest.approx(2 * t**2, rel=1e-14)


def test_closed_form_rejects_bad_input(optdyne_params):
    with pytest.raises(DomainError):
        cfi_closed_beta_zero(optdyne_params, 1.0, 1.0)
    with pytest.raises(DomainError):
        cfi_closed_beta_zero(FIG1, 1.0, 0.0)


def test_closed_form_matches_pipeline_example():
    p = FIG1.with_(gamma=0.05, n_th=0.1)
    got = cfi_markovian(p, 2.0, DyneSetting.general(3.0)).cfi
    assert got == pytest.approx(cfi_closed_beta_zero(p, 2.0, 3.0), rel=1e-9)


@given(st.floats(0.01, 100), st.floats(0.1, 50), st.floats(0, 0.2), st.floats(0, 1),
       st.floats(-math.pi, math.pi))
def test_closed_form_matches_pipeline(z, t, gamma, n, theta):
    p = SystemParams(2.1, alpha_mod=1.0, alpha_arg=theta, gamma=gamma, n_th=n)
    got = cfi_markovian(p, t, DyneSetting.general(z)).cfi
    assert got == pytest.approx(cfi_closed_beta_zero(p, t, z), rel=1e-9, abs=1e-12)


def test_momentum_homodyne_saturates_at_first_time():
    t = math.pi / 2 / 2.1
    u, sig, dsig = markovian_derivatives(FIG1, t)
    qfi = qfi_markovian(FIG1, t).qfi
    assert cfi_general_dyne(u, sig, dsig, DyneSetting.homodyne_p()) == pytest.approx(qfi, rel=1e-9)
    assert cfi_closed_beta_zero(FIG1, t, 1e12) == pytest.approx(qfi, rel=1e-9)


def test_homodyne_limits_are_continuous(optdyne_params):
    u, sig, dsig = markovian_derivatives(optdyne_params, 3.7)
    hq = cfi_general_dyne(u, sig, dsig, DyneSetting.homodyne_q())
    hp = cfi_general_dyne(u, sig, dsig, DyneSetting.homodyne_p())
    assert cfi_general_dyne(u, sig, dsig, DyneSetting.general(1e-6)) == pytest.approx(hq, rel=1e-3)
    assert cfi_general_dyne(u, sig, dsig, DyneSetting.general(1e6)) == pytest.approx(hp, rel=1e-3)


squeezed = st.builds(
    SystemParams,
    omega=st.floats(0.5, 3), beta_mod=st.floats(0, 0.6), beta_arg=st.floats(-math.pi, math.pi),
    alpha_mod=st.floats(0.1, 2), alpha_arg=st.floats(-math.pi, math.pi),
    gamma=st.floats(0, 0.1), n_th=st.floats(0, 0.5),
)


@given(squeezed, st.floats(0.05, 15), st.floats(-6, 6))
def test_cramer_rao_hierarchy(p, t, logz):
    u, sig, dsig = markovian_derivatives(p, t)
    qfi = qfi_gaussian(u, sig, dsig)
    for setting in (DyneSetting.general(10.0**logz), DyneSetting.homodyne_q(),
                    DyneSetting.homodyne_p(), DyneSetting.heterodyne()):
        assert cfi_general_dyne(u, sig, dsig, setting) <= qfi * (1 + 1e-8) + 1e-12
    best = optimize_dyne(u, sig, dsig, t)
    assert best.cfi <= qfi * (1 + 1e-8) + 1e-12


@given(squeezed, st.floats(0.05, 15))
def test_optimum_dominates_feasible_settings(p, t):
    u, sig, dsig = markovian_derivatives(p, t)
    best = optimize_dyne(u, sig, dsig, t).cfi
    for setting in (DyneSetting.homodyne_q(), DyneSetting.homodyne_p(), DyneSetting.heterodyne()):
        assert best >= cfi_general_dyne(u, sig, dsig, setting) - 1e-10
    for z in np.logspace(-8, 8, 33):
        assert best >= cfi_general_dyne(u, sig, dsig, DyneSetting.general(z)) * (1 - 1e-9) - 1e-10


def test_optimizer_finds_interior_optimum():
    # sigma = 2 I with signal along (0.8, 0.6): F(z) = 1.28/(2+z) + 0.72 z/(2z+1), max at z = 0.4
    u, sig, dsig = np.array([0.8, 0.6]), 2 * np.eye(2), np.zeros((2, 2))
    best = optimize_dyne(u, sig, dsig)
    assert best.setting.kind is DyneKind.GENERAL
    assert best.setting.z == pytest.approx(0.4, rel=1e-6)
    assert best.cfi == pytest.approx(1.28 / 2.4 + 0.288 / 1.8, rel=1e-12)


def test_optimizer_prefers_limits_when_they_win():
    t = (math.pi + math.pi) / (2 * 2.1)
    best = optimize_dyne_markovian(FIG1, t)
    assert best.setting.kind is DyneKind.HOMODYNE_Q
    assert best.cfi == pytest.approx(qfi_markovian(FIG1, t).qfi, rel=1e-9)


def test_batch_optimizer_matches_single(optdyne_params):
    ts = [0.5, 2.0, 11.0]
    derivs = [markovian_derivatives(optdyne_params, t) for t in ts]
    batch = optimize_dyne_batch(*(np.array([d[k] for d in derivs]) for k in range(3)))
    for k, d in enumerate(derivs):
        assert batch.cfi[k] == pytest.approx(optimize_dyne(*d).cfi, rel=1e-14)


def test_saturation_time_examples():
    times = saturation_times(FIG1, 4)
    assert times[0][0] == pytest.approx(math.pi / 4.2, rel=1e-15)
    assert times[0][1] == DyneSetting.homodyne_p()
    assert [s.kind for _, s in times] == [DyneKind.HOMODYNE_P, DyneKind.HOMODYNE_Q] * 2 + [DyneKind.HOMODYNE_P]
    (t1, s1), = [x for x in saturation_times(SystemParams(1.0), 1) if x[1].quadrature == 0]
    assert t1 == pytest.approx(math.pi / 2)


def test_saturation_times_drop_negative_times():
    p = SystemParams(1.0, alpha_mod=1.0, alpha_arg=-1.0)
    assert all(t >= 0 for t, _ in saturation_times(p, 3))
    assert len(saturation_times(p, 3)) == 3


def test_saturation_times_require_no_squeezing(optdyne_params):
    with pytest.raises(DomainError):
        saturation_times(optdyne_params, 2)


def test_general_cfi_broadcasts_over_z():
    u, sig, dsig = np.array([0.3, -0.2]), np.array([[1.5, 0.2], [0.2, 1.1]]), np.eye(2) * 0.1
    z = np.array([0.1, 1.0, 7.0])
    batch = general_dyne_cfi(u, sig, dsig, z)
    for k, zk in enumerate(z):
        assert batch[k] == pytest.approx(cfi_general_dyne(u, sig, dsig, DyneSetting.general(zk)))


def test_matrix_formula_cross_check():
    u, sig, dsig = np.array([0.3, -0.2]), np.array([[1.5, 0.2], [0.2, 1.1]]), \
        np.array([[0.1, 0.05], [0.05, -0.2]])
    z = 2.5
    S = 0.5 * (sig + np.diag([z, 1 / z]))
    Si = np.linalg.inv(S)
    dS = 0.5 * dsig
    ref = u @ Si @ u + 0.5 * np.trace(Si @ dS @ Si @ dS)
    assert cfi_general_dyne(u, sig, dsig, DyneSetting.general(z)) == pytest.approx(ref, rel=1e-14)


def test_maximize_over_time_refines_grid():
    grid = np.linspace(0, 3, 31)
    f = lambda t: -(t - 1.234567) ** 2  # noqa: E731
    t_best, v_best = maximize_over_time(grid, f(grid), f)
    assert t_best == pytest.approx(1.234567, abs=1e-7)
    assert v_best == pytest.approx(0.0, abs=1e-13)
