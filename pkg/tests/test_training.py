import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fractalmesh.dynamics import QuadraticSurrogate
from fractalmesh.errors import InputError
from fractalmesh.mesh import NormalizationStats
from fractalmesh.policy import LinearPolicy, RunningStats
from fractalmesh.training import (ArsConfig, EpisodeRecord, ars_step, ars_train, evaluate_episode,
                                  fractal_return, select_top)

GAIN = 2.5
STEPS = 9
OPTIMUM = float(STEPS)  # 1 per step at weight == GAIN on unit-whitened +-1 states


def surrogate_config(**kw):
    return ArsConfig(**{"directions": 1, "top_directions": 1, "episode_steps": STEPS, "epochs": 400, **kw})


def test_surrogate_return_closed_form():
    env = QuadraticSurrogate(GAIN)
    for w in (0.0, 1.0, GAIN, 4.0):
        pol = LinearPolicy([[w]], NormalizationStats.identity(1))
        rec = evaluate_episode(env, pol, (0.0, 0.0), np.random.default_rng(0), STEPS)
        assert rec.return_ == pytest.approx(STEPS * (1 - (w - GAIN) ** 2))
        assert rec.steps == STEPS and len(rec.states) == STEPS + 1


@pytest.mark.parametrize("w0", [-1.0, 0.0, 1.5, 3.5, 6.0])
def test_single_direction_step_points_at_optimum(w0):
    # With N = b = 1 the update is -2 alpha |delta| sign(w - g): always toward g.
    env = QuadraticSurrogate(GAIN)
    init = LinearPolicy([[w0]], NormalizationStats.identity(1))
    for seed in range(5):
        pol, _ = ars_train(env, surrogate_config(epochs=1, seed=seed), init_policy=init)
        moved = pol.weights[0, 0] - w0
        assert np.sign(moved) == np.sign(GAIN - w0)


def test_surrogate_converges_monotonically():
    env = QuadraticSurrogate(GAIN)
    pol, log = ars_train(env, surrogate_config(seed=0))
    r = np.array([row["mean_return"] for row in log.rows])
    rolling = np.convolve(r, np.ones(100) / 100, "valid")
    assert np.min(rolling - np.maximum.accumulate(rolling)) >= -0.01 * abs(OPTIMUM)
    assert rolling[-1] >= 0.95 * OPTIMUM
    assert abs(pol.weights[0, 0] - GAIN) < 0.1


def test_zero_epochs_returns_init_bit_exactly():
    env = QuadraticSurrogate(GAIN)
    init = LinearPolicy([[0.123456789]], NormalizationStats([0.3], [1.7]), obs_count=9, meta={"epoch": 4})
    pol, log = ars_train(env, surrogate_config(epochs=0), init_policy=init)
    assert pol is init and not log.rows
    assert pol.weights.tobytes() == np.array([[0.123456789]]).tobytes()


def test_seed_reproduces_trajectory():
    env = QuadraticSurrogate(GAIN)
    a, la = ars_train(env, surrogate_config(epochs=60, seed=7, action_noise_std=0.01))
    b, lb = ars_train(env, surrogate_config(epochs=60, seed=7, action_noise_std=0.01))
    assert a.weights.tobytes() == b.weights.tobytes()
    assert la.rows == lb.rows
    c, _ = ars_train(env, surrogate_config(epochs=60, seed=8, action_noise_std=0.01))
    assert c.weights.tobytes() != a.weights.tobytes()


def test_zero_step_size_keeps_weights_updates_stats():
    env = QuadraticSurrogate(GAIN)
    pol, _ = ars_train(env, surrogate_config(epochs=5, step_size=0.0))
    assert pol.weights.tolist() == [[0.0]]
    assert pol.obs_count == 5 * 2 * (STEPS + 1)


def test_identical_returns_skip_update():
    rewards = np.array([[1.0, 1.0], [1.0, 1.0]])
    assert ars_step(np.ones((2, 1, 1)), rewards, np.array([0, 1]), 0.1) is None


def test_top_b_ties_go_to_lower_index():
    rewards = np.array([[1.0, 0.0], [3.0, 2.0], [0.0, 3.0], [2.0, 2.5]])
    assert select_top(rewards, 2).tolist() == [1, 2]
    assert select_top(rewards, 3).tolist() == [1, 2, 3]
    tied = np.array([[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    assert select_top(tied, 2).tolist() == [0, 1]


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(2, 8))
def test_update_invariant_to_direction_order(seed, n):
    rng = np.random.default_rng(seed)
    deltas = rng.normal(size=(n, 2, 3))
    rewards = rng.normal(size=(n, 2))
    b = max(1, n // 2)
    base = ars_step(deltas, rewards, select_top(rewards, b), 0.02)
    perm = rng.permutation(n)
    shuffled = ars_step(deltas[perm], rewards[perm], select_top(rewards[perm], b), 0.02)
    np.testing.assert_allclose(shuffled, base, rtol=1e-12, atol=1e-15)


def test_fractal_return_division():
    stats = NormalizationStats.identity(2)
    line = np.c_[np.arange(20.0), np.zeros(20)]
    rec = EpisodeRecord(line, 7.0, 19)
    assert fractal_return(rec, stats, 1.0, 1.5) == 7.0
    assert fractal_return(EpisodeRecord(line, 0.0, 19), stats, 1.0, 1.5) == 0.0
    g = np.linspace(0, 1, 60)
    area = np.array([(x, y) for x in g for y in g])
    dm_area = fractal_return(EpisodeRecord(area, 7.0, len(area) - 1), stats, 0.05, 2.0)
    assert 7.0 / dm_area == pytest.approx(1.93, abs=0.1)


def test_config_validation():
    with pytest.raises(InputError):
        ArsConfig(directions=2, top_directions=3)
    with pytest.raises(InputError):
        ArsConfig(exploration_std=0.0)
    with pytest.raises(InputError):
        ars_train(QuadraticSurrogate(), surrogate_config(), objective="other")
    noisy = ArsConfig.noisy()
    assert (noisy.action_noise_std, noisy.obs_noise_std) == (0.01, 0.001)


def test_fractal_objective_runs_and_logs(slip):
    cfg = ArsConfig(directions=2, top_directions=1, episode_steps=20, epochs=2, meshdim_d0=1.0)
    pol, log = ars_train(slip, cfg, "fractal")
    assert len(log.rows) == 2
    assert set(log.rows[0]) == {"epoch", "mean_return", "mean_fractal_return", "best_mesh_dim", "updated"}
    assert all(row["best_mesh_dim"] >= 1.0 for row in log.rows)
    assert pol.meta["objective"] == "fractal" and pol.meta["epoch"] == 2


def test_running_stats_match_numpy(rng):
    data = rng.normal(size=(500, 3)) * [1.0, 5.0, 0.1] + [2.0, -1.0, 0.0]
    rs = RunningStats(3)
    for chunk in np.array_split(data, 7):
        rs.push_many(chunk)
    np.testing.assert_allclose(rs.mean, data.mean(axis=0), rtol=1e-12)
    np.testing.assert_allclose(rs.std, data.std(axis=0), rtol=1e-10)


def test_policy_checkpoint_round_trip(tmp_path):
    pol = LinearPolicy([[0.1, -0.2, 1 / 3]], NormalizationStats([1.0, 2.0, 3.0], [0.5, 0.25, 1 / 7]),
                       obs_count=42, meta={"epoch": 3, "config": {"seed": 1}})
    path = tmp_path / "p.json"
    pol.save(path)
    back = LinearPolicy.load(path)
    assert back.weights.tobytes() == pol.weights.tobytes()
    assert back.obs_stats.std.tobytes() == pol.obs_stats.std.tobytes()
    assert back.obs_count == 42 and back.meta == pol.meta
