"""Smoke tests for the python surface."""

import json
import math

import numpy as np
import pytest

import drlpy


def test_causal_query_benchmark_values():
    res = drlpy.causal_query()
    assert res["paradox_flag"] is True
    assert res["observational"][0] == pytest.approx(-32.644450867052023, abs=1e-9)
    assert res["observational"][1] == pytest.approx(-29.389449541284404, abs=1e-9)
    assert res["interventional"][0] == pytest.approx(-22.890, abs=1e-9)
    assert res["interventional"][1] == pytest.approx(-34.034, abs=1e-9)
    assert res["preferred_observational"] == 1
    assert res["preferred_interventional"] == 0


def test_oracle_rewards_flip_preference():
    cond_t1 = drlpy.oracle_conditional_reward("pendulum", 1.5)
    cond_t2 = drlpy.oracle_conditional_reward("pendulum", 0.5)
    do_t1 = drlpy.oracle_do_reward("pendulum", 1.5)
    do_t2 = drlpy.oracle_do_reward("pendulum", 0.5)
    assert cond_t2 > cond_t1
    assert do_t1 > do_t2


def test_oracle_do_reward_mc_matches_exact():
    exact = drlpy.oracle_do_reward("pendulum", 1.5)
    est = drlpy.oracle_do_reward_mc("pendulum", 1.5, n=2000, seed=3)
    assert est["n_samples"] == 2000
    assert abs(est["mean"] - exact) <= 5 * est["std_error"]


def test_generate_sequences_shapes_and_determinism():
    a = drlpy.generate_sequences("glyph", n=4, T=5, H=16, W=16, seed=9)
    b = drlpy.generate_sequences("glyph", n=4, T=5, H=16, W=16, seed=9)
    assert len(a) == 4
    for ta, tb in zip(a, b):
        assert len(ta["frames"]) == 5
        assert np.asarray(ta["frames"][0]).shape == (16, 16)
        assert len(ta["actions"]) == 5
        assert len(ta["rewards"]) == 5
        assert ta["u"] in (0, 1)
        np.testing.assert_array_equal(ta["frames"][0], tb["frames"][0])
        assert ta["rewards"] == tb["rewards"]


def tiny_config(r_min, r_max):
    return json.dumps(
        {
            "H": 8,
            "W": 8,
            "D_z": 2,
            "D_u": 1,
            "T": 3,
            "hidden": 8,
            "rnn_hidden": 4,
            "conv_layers": 0,
            "r_min": r_min,
            "r_max": r_max,
        }
    )


def make_data(n):
    trajs = drlpy.generate_sequences("glyph", n=n, T=3, H=8, W=8, seed=21)
    rewards = [r for t in trajs for r in t["rewards"]]
    return trajs, min(rewards) - 1.0, max(rewards) + 1.0


def test_model_train_reduces_loss_and_round_trips(tmp_path):
    trajs, r_min, r_max = make_data(32)
    model = drlpy.Model(tiny_config(r_min, r_max), seed=1)
    losses = model.train(trajs, epochs=3, lr=1e-3, batch=16, seed=2)
    assert len(losses) == 3
    assert losses[-1] < losses[0]
    assert all(math.isfinite(v) for v in losses)

    path = str(tmp_path / "model.bin")
    model.save(path)
    back = drlpy.Model.load(path)
    e1 = model.elbo(trajs[:4], seed=5)
    e2 = back.elbo(trajs[:4], seed=5)
    assert e1["total"] == pytest.approx(e2["total"])
    assert e1["kl_u"] >= 0.0
    assert e1["kl_z1"] >= 0.0


def test_model_reconstruct_and_counterfactual():
    trajs, r_min, r_max = make_data(8)
    model = drlpy.Model(tiny_config(r_min, r_max), seed=7)
    frames = model.reconstruct(trajs[0], seed=1)
    assert len(frames) == 3
    assert np.asarray(frames[0]).shape == (8, 8)
    assert np.all(np.asarray(frames[0]) >= 0.0)
    assert np.all(np.asarray(frames[0]) <= 1.0)

    roll = model.counterfactual(np.asarray(trajs[0]["frames"][0]), [0.3], 2, seed=2)
    assert len(roll["frames"]) == 2
    assert len(roll["rewards"]) == 2
    assert all(math.isfinite(r) for r in roll["rewards"])

    u_mean = model.infer_u_mean(trajs[0])
    assert len(u_mean) == 1

    est = model.do_reward(np.zeros(2), 0.5, n=16, source="prior", seed=3)
    assert math.isfinite(est["mean"])
