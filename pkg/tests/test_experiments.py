import math
from dataclasses import replace

import numpy as np
import pytest

from parametron import experiments as ex
from parametron.model import NROT, RWA

RWA_CFG = ex.ExperimentConfig(dynamics=RWA, t_ramp=(10.0,))


@pytest.mark.parametrize("bad", [
    dict(chi=-1.0),
    dict(delta=0.1),
    dict(delta0=0.1),
    dict(detuning_modes=("ramp",)),
    dict(dynamics="lab"),
    dict(t_ramp=()),
    dict(t_ramp=(-1.0,)),
    dict(tail=0.0),
    dict(kappa=(-1.0,)),
    dict(dim=1),
    dict(dt=0.0),
])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        ex.ExperimentConfig(**bad)


def test_unit_helpers():
    assert ex.mhz(1.0) == pytest.approx(2 * math.pi * 1e-3)
    assert ex.ghz(16.0) == pytest.approx(2 * math.pi * 16)
    assert ex.khz(10.0) == pytest.approx(2 * math.pi * 1e-5)


def test_default_steps():
    assert ex.ExperimentConfig(dynamics=NROT).dt_for() == 1e-5
    assert ex.ExperimentConfig(dynamics=RWA).dt_for() == 1e-3
    assert ex.ExperimentConfig(dt=2e-5).dt_for(RWA) == 2e-5


def test_cat_creation_provenance():
    sweep = ex.run_cat_creation(replace(RWA_CFG, t_ramp=(10.0, 20.0)))
    assert list(sweep.values) == [10.0, 20.0]
    for p in sweep.points:
        assert p.converged == "pass"
        assert p.dt == 1e-3 and p.dim == 40
        assert p.convergence.max_diff < 1e-6
        assert p.pops.shape == (len(p.times), 9)
        assert np.max(p.extra["odd_population"]) < 1e-8
    assert sweep.point(20.0) is sweep.points[1]
    with pytest.raises(KeyError):
        sweep.point(30.0)


def test_waived_point_without_check():
    p = ex.run_cat_creation(replace(RWA_CFG, check_convergence=False)).points[0]
    assert p.converged == "waived"


def test_threads_do_not_change_results():
    cfg = replace(RWA_CFG, t_ramp=(5.0, 10.0, 15.0), check_convergence=False)
    a = ex.run_cat_creation(cfg)
    b = ex.run_cat_creation(replace(cfg, threads=3))
    for pa, pb in zip(a.points, b.points):
        np.testing.assert_array_equal(pa.pops, pb.pops)


def test_truncation_check():
    diff = ex.truncation_check(
        lambda d: ex.simulate_cat_creation(RWA_CFG, 20.0, ex.CONSTANT, RWA, dim=d), 40)
    assert diff < 1e-4


def test_rwa_reference_is_pump_frequency_independent():
    cfg = replace(RWA_CFG, t_ramp=(5.0,), omega_p_sweep=(ex.ghz(16.0),), check_convergence=False)
    sweep = ex.run_pump_frequency_sweep(replace(cfg, omega_p_sweep=(ex.ghz(8.0), ex.ghz(32.0)),
                                                dt=None, dynamics=NROT))
    assert sweep.reference["rwa_spread"] < 1e-8


def test_pump_sweep_matches_cat_creation():
    cfg = ex.ExperimentConfig(t_ramp=(5.0,), omega_p_sweep=(ex.ghz(16.0),), check_convergence=False)
    a = ex.run_pump_frequency_sweep(cfg).points[0]
    b = ex.run_cat_creation(cfg).points[0]
    np.testing.assert_allclose(a.stats.as_row(), b.stats.as_row(), atol=1e-6)


def test_delta0_sweep_zero_point_is_constant_zero_detuning():
    cfg = replace(RWA_CFG, t_ramp=(20.0,), delta0_sweep=(0.0,), check_convergence=False)
    sweep = ex.run_delta0_sweep(cfg)
    zero = sweep.points[0]
    direct = ex.simulate_cat_creation(replace(cfg, delta=0.0), 20.0, ex.CONSTANT, RWA)
    np.testing.assert_array_equal(zero.pops, direct.pops)
    assert "constant" in sweep.reference


def test_rx_identity_without_detuning_pulse():
    cfg = ex.ExperimentConfig(beta0=ex.mhz(53), chi=ex.mhz(17))
    times, fid, survival, _ = ex.rx_gate_fidelity(cfg, cfg.beta0, cfg.chi, 0.0, RWA)
    assert survival[-1] >= 0.999
    assert fid[-1] < 0.01


def test_rx_scan_grid():
    cfg = ex.ExperimentConfig(beta0=ex.mhz(200), chi=ex.mhz(68), t_gate=20.0)
    ratios, fid = ex.rx_delta0_scan(cfg, ratios=[1.0, 2.0])
    assert fid.shape == (2,) and np.all((fid >= 0) & (fid <= 1))
    full, _ = ex.rx_delta0_scan(replace(cfg, t_gate=2.0))
    assert len(full) == 51 and full[0] == 1.0 and full[-1] == 6.0


def test_calibration_failure_reported():
    cfg = ex.ExperimentConfig(beta0=ex.mhz(53), chi=ex.mhz(17), calibration_bracket=(0.5, 0.75))
    with pytest.raises(ex.CalibrationError):
        ex.calibrate_rx_delta0(cfg)


def test_rz_phase_and_doubled_envelope_returns_home():
    cfg = ex.ExperimentConfig(dynamics=RWA, t_gate=10.0, delta=0.0, drive_scale=2.0)
    out = ex.run_rz_gate(cfg)
    assert out["phase"] == pytest.approx(2 * math.pi, abs=1e-10)
    assert out["driven"].stats.value_at_T > 0.98
    assert out["driven"].converged == "pass"


def test_rz_single_flip_under_rwa():
    cfg = ex.ExperimentConfig(dynamics=RWA, t_gate=10.0, delta=0.0)
    out = ex.run_rz_gate(cfg)
    assert out["phase"] == pytest.approx(math.pi, abs=1e-10)
    assert out["driven"].stats.value_at_T > 0.99
    assert out["control"].stats.tail_mean > 0.999


def test_decay_zero_kappa_matches_pure_state():
    cfg = replace(RWA_CFG, check_convergence=False)
    rho_run = ex.simulate_decay_point(cfg, 10.0, ex.CONSTANT, 0.0)
    pure = ex.simulate_cat_creation(cfg, 10.0, ex.CONSTANT, RWA)
    assert np.max(np.abs(rho_run.pops - pure.pops)) < 1e-6
    assert rho_run.extra["hermiticity"] < 1e-10
    assert rho_run.extra["min_eigenvalue"] >= -1e-8


def test_decay_study_series_names():
    cfg = replace(RWA_CFG, t_ramp=(5.0,), kappa=(0.0, ex.khz(10)), check_convergence=False)
    results = ex.run_decay_study(cfg)
    assert [r.series for r in results] == ["constant-rwa-kappa0khz", "constant-rwa-kappa10khz"]


def test_wigner_snapshot_times():
    cfg = replace(RWA_CFG, tail=20.0)
    p = ex.simulate_cat_creation(cfg, 10.0, ex.CONSTANT, RWA)
    snaps = ex.wigner_snapshots(p, 10.0)
    assert sorted(snaps) == pytest.approx([10.0, 15.0, 20.0, 25.0])


def test_adiabatic_series_shape():
    t, h = ex.adiabatic_series(ex.ExperimentConfig(), 20.0, ex.DECAY)
    assert t.shape == h.shape == (201,)
    assert np.all(h >= 0)


@pytest.mark.slow
def test_decay_loss_grows_with_ramp_time():
    cfg = ex.ExperimentConfig(dynamics=RWA, detuning_modes=(ex.DECAY,), check_convergence=False,
                              t_ramp=(10.0, 20.0, 30.0, 50.0, 100.0))
    losses = []
    for T in cfg.t_ramp:
        clean = ex.simulate_decay_point(cfg, T, ex.DECAY, 0.0).stats.value_at_T
        lossy = ex.simulate_decay_point(cfg, T, ex.DECAY, ex.khz(10)).stats.value_at_T
        losses.append(clean - lossy)
    assert all(b > a for a, b in zip(losses, losses[1:]))


@pytest.mark.slow
def test_delta0_zero_below_constant_baseline_nrot():
    cfg = ex.ExperimentConfig(t_ramp=(20.0,), delta0_sweep=(0.0,), check_convergence=False)
    sweep = ex.run_delta0_sweep(cfg)
    assert sweep.points[0].stats.tail_mean < sweep.reference["constant"].stats.tail_mean


def test_sampling_strides():
    cfg = ex.ExperimentConfig()
    grid, thin = ex._sampling(cfg, 30.0, 1e-5, NROT)
    assert grid.sample_stride == 200 and thin == 50
    half, thin_half = ex._sampling(cfg, 30.0, 5e-6, NROT)
    assert thin_half == thin
    np.testing.assert_allclose(half.sample_times[::thin], grid.sample_times[::thin])
    assert ex._sampling(cfg, 30.0, 1e-3, RWA)[1] == 1
    coarse, thin = ex._sampling(cfg, 30.0, 5e-3, NROT)
    assert coarse.sample_stride == 1 and thin == 20


def test_tail_statistics_do_not_alias_with_pump():
    # at 20 GHz a 0.1 ns cadence is one period of omega_p/2: every sample sees the same phase
    cfg = ex.ExperimentConfig(t_ramp=(5.0,), tail=5.0, check_convergence=False)
    dense = ex.simulate_cat_creation(cfg, 5.0, ex.CONSTANT, NROT, omega_p=ex.ghz(20.0))
    strobe = ex.simulate_cat_creation(replace(cfg, stats_cadence=0.1), 5.0, ex.CONSTANT, NROT,
                                      omega_p=ex.ghz(20.0))
    np.testing.assert_array_equal(dense.pops, strobe.pops)
    assert dense.stats.tail_std > 1.5 * strobe.stats.tail_std
