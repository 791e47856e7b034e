import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridpilot.scenario import (R_MIN, NetworkScenario, dump_config, hex_centers, in_hexagon,
                                  large_scale_fading, load_config, make_scenario, place_users,
                                  sample_channel, snr_to_noise, trial_rng)


def test_snr_convention():
    assert snr_to_noise(20.0) == pytest.approx(0.01)
    assert snr_to_noise(0.0) == 1.0


def test_trial_rng_substreams_are_reproducible_and_distinct():
    a = trial_rng(3, 0, 5).standard_normal(4)
    b = trial_rng(3, 0, 5).standard_normal(4)
    c = trial_rng(3, 0, 6).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)


@pytest.mark.parametrize("L", [1, 3, 7])
def test_hex_centers_are_adjacent(L):
    c = hex_centers(L)
    assert c.shape == (L, 2)
    assert np.all(c[0] == 0)
    if L > 1:
        assert np.allclose(np.linalg.norm(c[1:], axis=1), math.sqrt(3))


def test_unsupported_cell_count():
    with pytest.raises(ValueError, match="unsupported"):
        place_users(4, 2, np.random.default_rng(0))


def test_single_user_inside_unit_hexagon():
    pos = place_users(1, 1, np.random.default_rng(0))
    assert pos.shape == (1, 1, 2)
    assert in_hexagon(pos[0], (0, 0)).all()


def test_seven_cell_drop_containment():
    pos = place_users(7, 10, trial_rng(0, 1))
    centers = hex_centers(7)
    for j in range(7):
        assert in_hexagon(pos[j], centers[j]).all()
        assert np.all(np.linalg.norm(pos[j] - centers[j], axis=1) >= R_MIN)


def test_place_users_deterministic():
    a = place_users(7, 10, trial_rng(9))
    b = place_users(7, 10, trial_rng(9))
    assert np.array_equal(a, b)


def test_in_hexagon_vertices_and_outside():
    assert in_hexagon(np.array([[1.0, 0.0], [0.5, math.sqrt(3) / 2]]), (0, 0)).all()
    assert not in_hexagon(np.array([[1.01, 0.0], [0.0, 0.9]]), (0, 0)).any()


def test_fading_unit_ratio_and_power_law():
    centers = hex_centers(3)
    # user (1,0) at equal distance from its BS and from BS 0
    mid = centers[1] / 2
    # user (2,0) twice as far from BS 0 as from its own BS
    d = centers[2] / np.linalg.norm(centers[2])
    p2 = centers[2] + d * math.sqrt(3)  # distance sqrt(3) to own BS, 2 sqrt(3) to BS 0
    pos = np.array([[[0.3, 0.1]], [mid], [p2]])
    beta = large_scale_fading(pos, 3.8)
    assert beta[0, 0] == 1.0
    assert beta[1, 0] == pytest.approx(1.0, rel=1e-12)
    assert beta[2, 0] == pytest.approx(0.07179364718, rel=1e-9)


def test_fading_rejects_user_at_bs():
    pos = np.zeros((1, 1, 2))
    with pytest.raises(ValueError):
        large_scale_fading(pos, 3.8)


def test_in_cell_gain_equals_beta_ref():
    sc = make_scenario(beta_ref=2.5)
    assert np.all(sc.beta[0] == 2.5)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 5.0))
def test_fading_invariant_to_scaling(scale):
    """Only distance ratios matter (checked on the target-BS distances)."""
    pos = place_users(7, 4, trial_rng(2))
    centers = hex_centers(7)
    d_own = np.linalg.norm(pos - centers[:, None], axis=-1)
    d_tgt = np.linalg.norm(pos, axis=-1)
    ref = (d_own / d_tgt) ** 3.8
    scaled = ((scale * d_own) / (scale * d_tgt)) ** 3.8
    assert np.allclose(ref, scaled, rtol=1e-12)
    assert np.allclose(large_scale_fading(pos, 3.8)[1:], ref[1:], rtol=1e-12)


def test_fading_strictly_decreasing_in_target_distance():
    centers = hex_centers(3)
    own = centers[1]
    direction = (own - centers[0]) / np.linalg.norm(own)
    near = own - 0.5 * direction
    far = own + 0.5 * direction
    beta = large_scale_fading(np.array([[[0.2, 0.0], [0.3, 0.0]], [near, far], [centers[2] + 0.2, centers[2] + 0.3]]), 3.8)
    assert beta[1, 0] > beta[1, 1]


def test_path_loss_dominance():
    for seed in range(5):
        sc = make_scenario(seed=seed)
        assert sc.beta[1:].max() < sc.beta[0].min()


def test_scenario_validation():
    with pytest.raises(ValueError):
        NetworkScenario(1, 1, 4, 1, 3.8, 0.0, np.ones((1, 1)))
    with pytest.raises(ValueError):
        NetworkScenario(1, 2, 4, 1, 3.8, 0.1, np.ones((1, 2)))
    with pytest.raises(ValueError):
        NetworkScenario(1, 1, 4, 4, 3.8, 0.1, -np.ones((1, 1)))
    with pytest.raises(ValueError):
        make_scenario(layout="ring")


def test_beta_is_read_only():
    sc = make_scenario(L=3, K=2)
    with pytest.raises(ValueError):
        sc.beta[0, 0] = 3.0


def test_channel_column_power_large_m():
    sc = make_scenario(L=1, K=3, M=10_000, layout="unit")
    H = sample_channel(sc, trial_rng(0)).H
    assert np.allclose(np.mean(np.abs(H) ** 2, axis=0), 1.0, rtol=0.03)


def test_channel_scaled_by_beta():
    sc = make_scenario(L=3, K=2, M=20_000, seed=4)
    H = sample_channel(sc, trial_rng(1)).H
    assert np.allclose(np.mean(np.abs(H) ** 2, axis=0), sc.beta.reshape(-1), rtol=0.05)


def test_channel_mean_and_component_variance():
    sc = make_scenario(L=1, K=1, M=1, T=1, layout="unit")
    rng = trial_rng(5)
    g = np.array([sample_channel(sc, rng).H[0, 0] for _ in range(10_000)])
    assert abs(g.mean()) < 4 / math.sqrt(10_000)
    sc = make_scenario(L=1, K=2, M=100_000, T=2, layout="unit")
    g = sample_channel(sc, trial_rng(6)).H
    assert np.allclose(g.real.var(axis=0), 0.5, rtol=0.03)
    assert np.allclose(g.imag.var(axis=0), 0.5, rtol=0.03)


def test_channel_deterministic_and_read_only():
    sc = make_scenario(L=3, K=2, M=8)
    a = sample_channel(sc, trial_rng(1, 2)).H
    b = sample_channel(sc, trial_rng(1, 2)).H
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        a[0, 0] = 0


def test_config_round_trip(tmp_path):
    sc = make_scenario(L=3, K=4, M=32, T=40, gamma=3.5, snr_db=10.0, seed=7)
    path = tmp_path / "s.cfg"
    path.write_text(dump_config(sc))
    back, extra = load_config(path)
    assert extra == {}
    assert (back.L, back.K, back.M, back.T, back.gamma, back.seed) == (3, 4, 32, 40, 3.5, 7)
    assert back.sigma_n2 == pytest.approx(sc.sigma_n2)
    assert np.array_equal(back.beta, sc.beta)


def test_config_text_extra_keys_and_errors():
    sc, extra = load_config("L = 1\nK = 2\n# comment\nlayout = unit\nlabel = demo\n")
    assert sc.L == 1 and sc.K == 2 and extra == {"label": "demo"}
    with pytest.raises(ValueError, match="key = value"):
        load_config("L 1\nK = 2\n")
