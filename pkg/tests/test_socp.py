import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import crandn, random_phases
from mbol import socp
from mbol.channel import sample_channels
from mbol.metrics import HybridPrecoder
from mbol.scenario import trial_rng


def sinr_of(z, m, sigma):
    others = np.sum(np.abs(z) ** 2) - abs(z[m]) ** 2
    return abs(z[m]) ** 2 / (others + sigma ** 2)


def random_row(rng, k):
    b = crandn(rng, k) * rng.uniform(0.1, 3.0)
    m = int(rng.integers(k))
    gamma = 10 ** rng.uniform(-1, 1.5)
    sigma = rng.uniform(0.1, 2.0)
    return b, m, gamma, sigma


def grid_oracle(b, m, gamma, sigma, step=1e-3):
    """Nearest feasible point by a grid over r = ||z_{-m}||, exact in t.

    The r spacing gives ``step`` resolution along the cone boundary.
    """
    others = np.ones(len(b), bool)
    others[m] = False
    t0, r0 = abs(b[m]), np.linalg.norm(b[others])
    dr = step / np.sqrt(1 + gamma)
    r = np.arange(0.0, r0 + dr, dr)
    t = np.maximum(t0, np.sqrt(gamma) * np.sqrt(r ** 2 + sigma ** 2))
    i = int(np.argmin((t - t0) ** 2 + (r - r0) ** 2))
    z = np.zeros_like(b)
    z[m] = t[i] * (b[m] / t0 if t0 > 0 else 1.0)
    if r0 > 0:
        z[others] = b[others] * r[i] / r0
    return z


def test_feasible_row_unchanged(rng):
    b = np.array([5.0 + 1j, 0.1, 0.2j])
    z = socp.project_row(b, 0, 1.0, 0.5)
    np.testing.assert_array_equal(z, b)


def test_zero_row():
    z = socp.project_row(np.zeros(3, complex), 1, 4.0, 0.5)
    np.testing.assert_allclose(z, [0, 0.5 * 2, 0], atol=1e-15)


def test_random_rows_feasible_idempotent_and_match_oracle(rng):
    for i in range(500):
        k = 2 if i % 2 == 0 else 3
        b, m, gamma, sigma = random_row(rng, k)
        z = socp.project_row(b, m, gamma, sigma)
        assert sinr_of(z, m, sigma) >= gamma * (1 - 1e-7)
        np.testing.assert_allclose(socp.project_row(z, m, gamma, sigma), z, atol=1e-9, rtol=0)
        if k == 2:
            assert np.linalg.norm(z - grid_oracle(b, m, gamma, sigma)) < 2e-3


def test_projection_beats_random_feasible_points(rng):
    b, m, gamma, sigma = np.array([0.3 + 0.2j, 1.0 - 0.5j]), 0, 3.0, 0.7
    z = socp.project_row(b, m, gamma, sigma)
    d = np.linalg.norm(z - b)
    cand = crandn(rng, 20000, 2) * 3
    ok = np.array([sinr_of(c, m, sigma) >= gamma for c in cand])
    assert ok.any()
    assert np.all(np.linalg.norm(cand[ok] - b, axis=1) >= d - 1e-12)


def test_active_constraint_holds_with_equality(rng):
    b = np.array([0.1, 2.0 + 1j, -1.0j])
    z = socp.project_row(b, 0, 2.0, 0.3)
    assert sinr_of(z, 0, 0.3) == pytest.approx(2.0, rel=1e-10)
    assert socp.soc_slack(z, 0, 2.0, 0.3) == pytest.approx(0.0, abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_distance_monotone_in_threshold(seed):
    rng = np.random.default_rng(seed)
    b, m, _, sigma = random_row(rng, 3)
    gammas = np.sort(10 ** rng.uniform(-1, 2, size=5))
    dist = [np.linalg.norm(socp.project_row(b, m, g, sigma) - b) for g in gammas]
    assert np.all(np.diff(dist) >= -1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_phase_of_desired_entry_preserved(seed):
    rng = np.random.default_rng(seed)
    b, m, gamma, sigma = random_row(rng, 3)
    z = socp.project_row(b, m, gamma, sigma)
    assert np.angle(z[m] * np.conj(b[m])) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("gamma, sigma", [(0.0, 1.0), (-1.0, 1.0), (1.0, -0.1)])
def test_invalid_parameters(gamma, sigma):
    with pytest.raises(ValueError):
        socp.project_row(np.ones(2, complex), 0, gamma, sigma)


def test_project_rows_and_aux_matrix(rng):
    b = crandn(rng, 2, 4)
    aux = socp.project_rows(b, [1.0, 10.0], [0.5, 0.5])
    assert aux.z.shape == b.shape
    assert np.all(aux.soc_slack() >= -1e-9)
    assert aux.residual(b) == pytest.approx(np.sum(np.abs(b - aux.z) ** 2))
    with pytest.raises(ValueError):
        socp.AuxMatrix(aux.z, aux.noise, np.array([0.0, 1.0]))


def test_update_aux_from_channels(small_config):
    ch = sample_channels(small_config, trial_rng(0, 0))
    rng = np.random.default_rng(5)
    p = HybridPrecoder(random_phases(rng, 16, 4), crandn(rng, 4, 4) * 1e-3)
    aux = socp.update_aux(p, ch, small_config.sinr_thresholds_lin)
    b = socp.precoder_products(ch.H, p.rf, p.bb)
    sig = np.sqrt(ch.noise_powers)
    for m in range(2):
        assert sinr_of(aux.z[m], m, sig[m]) >= small_config.sinr_thresholds_lin[m] * (1 - 1e-7)
    # the projection does not depend on the previous auxiliary matrix
    again = socp.update_aux(p, ch, small_config.sinr_thresholds_lin, prev=aux)
    np.testing.assert_array_equal(again.z, aux.z)
    # a feasible competitor (desired entry boosted) is farther from b
    boosted = aux.z.copy()
    boosted[0, 0] *= 1.5
    assert aux.residual(b) < np.sum(np.abs(b - boosted) ** 2)
