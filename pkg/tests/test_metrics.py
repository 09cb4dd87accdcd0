import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import crandn, random_phases
from mbol import metrics
from mbol.channel import ChannelSet, steering_vector, user_channel_from_paths
from mbol.metrics import BeamWeights, HybridPrecoder


def random_precoder(rng, n_tx=8, n_rf=3, k=None):
    k = n_rf if k is None else k
    return HybridPrecoder(random_phases(rng, n_tx, n_rf), crandn(rng, n_rf, k))


def channel_set(hs, noise=1.0):
    users = []
    for h in hs:
        u = user_channel_from_paths(len(h), [0.0], [1.0], noise_power=noise)
        users.append(type(u)(h=np.asarray(h, complex), path_gains=u.path_gains,
                             path_angles_rad=u.path_angles_rad, pathloss_db=0.0, shadow_db=0.0,
                             noise_power=noise, mean_angle_rad=0.0))
    return ChannelSet(tuple(users), n_tx=len(hs[0]))


# beampattern and SBP -----------------------------------------------------

def test_zero_bb_gives_zero_gain(rng):
    p = HybridPrecoder(random_phases(rng, 8, 3), np.zeros((3, 3), complex))
    assert np.all(metrics.beampattern_gain(p, np.linspace(-1.5, 1.5, 7)) == 0)


def test_two_element_hand_value():
    # broadside steering vector is [1, -1]/sqrt(2) under the cos convention
    p = HybridPrecoder(np.array([[1.0], [-1.0]], complex), np.ones((1, 1), complex))
    assert metrics.beampattern_gain(p, 0.0) == pytest.approx(2.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 10.0), st.integers(0, 2**32 - 1))
def test_gain_homogeneity(c, seed):
    rng = np.random.default_rng(seed)
    p = random_precoder(rng)
    q = HybridPrecoder(p.rf, c * p.bb)
    angles = np.deg2rad([30.0, 40.0, 50.0])
    w = BeamWeights(np.array([0.2, 0.3, 0.5]))
    np.testing.assert_allclose(metrics.beampattern_gain(q, angles),
                               c ** 2 * metrics.beampattern_gain(p, angles), rtol=1e-10)
    assert metrics.sbp_gain(w, q, angles) == pytest.approx(c ** 4 * metrics.sbp_gain(w, p, angles),
                                                           rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    p = random_precoder(rng, k=4, n_rf=4)
    u, _ = np.linalg.qr(crandn(rng, 4, 4))
    q = HybridPrecoder(p.rf, p.bb @ u)
    th = np.linspace(-1.4, 1.4, 25)
    np.testing.assert_allclose(metrics.beampattern_gain(q, th), metrics.beampattern_gain(p, th),
                               rtol=1e-10, atol=1e-12)
    w = BeamWeights.uniform(3)
    ang = np.deg2rad([30.0, 40.0, 50.0])
    assert metrics.sbp_gain(w, q, ang) == pytest.approx(metrics.sbp_gain(w, p, ang), rel=1e-10)


def test_sbp_single_beam_and_equal_gains(rng):
    p = random_precoder(rng)
    chi = metrics.beampattern_gain(p, 0.3)
    assert metrics.sbp_gain(BeamWeights(np.array([1.0])), p, [0.3]) == pytest.approx(chi ** 2)
    # equal gains at all beams: any simplex weights give chi^2
    p1 = HybridPrecoder(np.ones((8, 1), complex), np.ones((1, 1), complex))
    ang = [0.2, -0.2]  # mirror angles share the same gain
    chi = metrics.beampattern_gain(p1, 0.2)
    for w in ([0.5, 0.5], [0.9, 0.1]):
        assert metrics.sbp_gain(BeamWeights(np.array(w)), p1, ang) == pytest.approx(chi ** 2)


def test_sbp_linear_weights(rng):
    p = random_precoder(rng)
    ang = np.deg2rad([30.0, 50.0])
    chi = metrics.beampattern_gain(p, ang)
    assert metrics.sbp_linear(p, ang) == pytest.approx(chi.mean())
    assert metrics.sbp_linear(p, ang, [0.25, 0.75]) == pytest.approx(0.25 * chi[0] + 0.75 * chi[1])
    with pytest.raises(ValueError):
        metrics.sbp_gain(BeamWeights.uniform(3), p, ang)


def test_normalized_power(rng):
    p = random_precoder(rng).normalized(10.0)
    assert p.power == pytest.approx(10.0, rel=1e-12)


# SINR and sum rate --------------------------------------------------------

def test_sinr_single_stream_no_interference():
    h = steering_vector(4, 0.3) * 2.0
    ch = channel_set([h], noise=0.5)
    p = HybridPrecoder(np.ones((4, 1), complex), np.array([[0.7 + 0.1j]]))
    expected = abs(np.vdot(h, p.full[:, 0])) ** 2 / 0.5
    assert metrics.sinr(ch, p, 0) == pytest.approx(expected)


def test_sinr_zero_stream(rng):
    ch = channel_set([crandn(rng, 6), crandn(rng, 6)])
    p = random_precoder(rng, n_tx=6, n_rf=3)
    bb = p.bb.copy()
    bb[:, 0] = 0
    assert metrics.sinr(ch, HybridPrecoder(p.rf, bb), 0) == 0.0


def test_sinr_orthogonal_streams():
    # identity RF/BB with unit-vector channels: no cross talk
    eye = np.eye(3, dtype=complex)
    ch = channel_set([eye[0] * 2, eye[1] * 3], noise=0.1)
    # unit-modulus DFT RF with its inverse as BB gives F = I
    rf = np.exp(2j * np.pi * np.outer(np.arange(3), np.arange(3)) / 3)
    p = HybridPrecoder(rf, np.linalg.inv(rf))
    np.testing.assert_allclose(metrics.sinrs(ch, p), [4 / 0.1, 9 / 0.1], rtol=1e-10)


def test_sinr_counts_sensing_streams_as_interference():
    eye = np.eye(2, dtype=complex)
    ch = channel_set([np.array([1.0, 1.0], complex)], noise=1.0)
    rf = np.array([[1, 1], [1, -1]], complex)
    p = HybridPrecoder(rf, np.linalg.inv(rf) @ eye)  # F = I: two streams
    # desired |h^H e1|^2 = 1, interference from stream 2 = 1
    assert metrics.sinr(ch, p, 0) == pytest.approx(0.5)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 2 * np.pi))
def test_sinr_column_phase_invariance(seed, phi):
    rng = np.random.default_rng(seed)
    ch = channel_set([crandn(rng, 6), crandn(rng, 6)])
    p = random_precoder(rng, n_tx=6, n_rf=3)
    bb = p.bb.copy()
    bb[:, 1] *= np.exp(1j * phi)
    np.testing.assert_allclose(metrics.sinrs(ch, HybridPrecoder(p.rf, bb)), metrics.sinrs(ch, p),
                               rtol=1e-10)


@pytest.mark.parametrize("sinr_db, expected", [
    ((0.0, 0.0, 0.0), 3.0),
    ((-np.inf, -np.inf, -np.inf), 0.0),
    ((10.0, 0.0, 0.0), np.log2(11) + 2),
])
def test_sum_rate_examples(sinr_db, expected, monkeypatch):
    s = 10 ** (np.array(sinr_db) / 10)
    monkeypatch.setattr(metrics, "sinrs", lambda ch, p: s)
    assert metrics.sum_rate(None, None) == pytest.approx(expected, abs=1e-12)
    if expected > 4:
        assert expected == pytest.approx(5.459, abs=1e-3)


# IMSR ----------------------------------------------------------------------

def test_imsr_flat_pattern():
    flat = lambda th: np.ones_like(th)
    assert metrics.imsr(flat, np.deg2rad(40), np.deg2rad(20)) == pytest.approx(0.125, rel=1e-12)


def test_imsr_degenerate_sidelobe():
    lo, hi = np.deg2rad(30), np.deg2rad(50)
    main_only = lambda th: np.clip((th - lo) * (hi - th), 0.0, None)
    with pytest.raises(metrics.DegeneratePatternError):
        metrics.imsr(main_only)


def test_imsr_scale_invariance_and_refinement(rng):
    p = random_precoder(rng, n_tx=16, n_rf=4)
    q = HybridPrecoder(p.rf, 3.0 * p.bb)
    a = metrics.imsr(p)
    assert metrics.imsr(q) == pytest.approx(a, rel=1e-12)
    fine = metrics.imsr(p, grid_size=4096)
    assert abs(fine - a) / a < 1e-3


@pytest.mark.parametrize("kw", [dict(grid_size=1), dict(theta0_rad=np.deg2rad(85.0))])
def test_imsr_bad_arguments(kw):
    with pytest.raises(ValueError):
        metrics.imsr(lambda th: np.ones_like(th), **kw)


# beam weights ----------------------------------------------------------------

@pytest.mark.parametrize("chi, expected", [
    ([3.0], [1.0]),
    ([2.0, 2.0], [0.5, 0.5]),
    ([1.0, 2.0, 2.0], [2 / 3, 1 / 6, 1 / 6]),
])
def test_beam_weight_examples(chi, expected):
    np.testing.assert_allclose(metrics.beam_weights_from_chi(chi).w, expected, atol=1e-15)


def test_beam_weights_simplex_random(rng):
    for _ in range(1000):
        chi = rng.exponential(size=rng.integers(1, 7)) + 1e-3
        w = metrics.beam_weights_from_chi(chi).w
        assert np.all(w >= -1e-12)
        assert abs(w.sum() - 1.0) <= 1e-12


def test_beam_weights_zero_gain():
    with pytest.raises(ZeroDivisionError):
        metrics.beam_weights_from_chi([1.0, 0.0])


def test_beam_weights_from_precoder(rng):
    p = random_precoder(rng)
    ang = np.deg2rad([30.0, 40.0, 50.0])
    chi = metrics.beampattern_gain(p, ang)
    np.testing.assert_allclose(metrics.beam_weights(p, ang).w, metrics.beam_weights_from_chi(chi).w)


def test_beam_weights_reject_off_simplex():
    with pytest.raises(ValueError):
        BeamWeights(np.array([0.7, 0.7]))


# export ----------------------------------------------------------------------

def test_beampattern_sweep_and_csv(tmp_path, rng):
    p = random_precoder(rng)
    ang, gdb = metrics.beampattern_sweep(p)
    assert ang[0] == -90 and ang[-1] == 90 and len(ang) == 181
    path = tmp_path / "bp.csv"
    metrics.write_beampattern_csv(path, ang, gdb)
    lines = path.read_text().splitlines()
    assert lines[0] == "angle_deg,gain_db"
    assert len(lines) == 182


def test_metric_record_is_json(rng):
    ch = channel_set([crandn(rng, 8)])
    p = random_precoder(rng).normalized(1.0)
    rec = metrics.metric_record(ch, p, np.deg2rad([30.0, 50.0]), BeamWeights.uniform(2))
    back = json.loads(metrics.dumps_record(rec))
    assert back["power"] == pytest.approx(1.0)
    assert set(back) >= {"chi", "sbp", "sbp_linear", "imsr", "sinr_db", "sum_rate"}
