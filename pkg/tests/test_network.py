import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradcheck import max_relative_error, random_instance
from pointcount.datagen import ConditionSpec, gen_sub_epoch, wire_arrays
from pointcount.network import (FREE_RUNNING, TEACHER_FORCED, BlockConfig, NetworkState, SequenceBatch,
                                bptt_gradients, forward_sequence, init_network, load_checkpoint,
                                save_checkpoint, stitch_pretrained)
from pointcount.numerics import make_rng, sum_squared_error


def zero_net(cfg):
    net = init_network(cfg, make_rng(0))
    return net.replace(**{k: np.zeros_like(v) for k, v in net.params().items()})


@pytest.fixture()
def sub_epoch(table):
    return gen_sub_epoch("stay_at_last", table, make_rng(11))


def test_zero_network_outputs(sub_epoch):
    spec = ConditionSpec(8)
    out = forward_sequence(zero_net(spec.block_config(5)), wire_arrays(spec, sub_epoch.arrays))
    np.testing.assert_array_equal(out.numbers, 0.5)
    np.testing.assert_array_equal(out.gestures, 0.0)


def test_init_shapes_and_zero_biases():
    cfg = BlockConfig(use_visual_input=True, use_gesture_output=True, use_jordan_loop=True, hidden_size=68)
    net = init_network(cfg, make_rng(1))
    assert net.w_in.shape == (68, 92)
    assert net.w_num.shape == (10, 68) and net.w_ges.shape == (3, 68)
    for b in (net.b_h, net.b_num, net.b_ges):
        np.testing.assert_array_equal(b, 0.0)


def test_init_deterministic():
    cfg = BlockConfig(hidden_size=9)
    a, b = init_network(cfg, make_rng(5)), init_network(cfg, make_rng(5))
    for k in a.params():
        np.testing.assert_array_equal(a.params()[k], b.params()[k])


@pytest.mark.parametrize("kwargs", [
    {"use_number_output": False, "use_gesture_output": False},
    {"use_jordan_loop": True, "use_gesture_output": False},
    {"use_jordan_loop": True, "use_gesture_output": True, "use_gesture_input": True},
    {"hidden_size": 0},
])
def test_invalid_block_configs(kwargs):
    with pytest.raises(ValueError):
        BlockConfig(**kwargs)


def test_width_mismatch_rejected(sub_epoch):
    net = init_network(ConditionSpec(1).block_config(6), make_rng(0))
    with pytest.raises(ValueError):
        NetworkState(ConditionSpec(7).block_config(6), **net.params())
    batch = wire_arrays(ConditionSpec(1), sub_epoch.arrays)
    batch.visual = batch.visual[..., :10]
    with pytest.raises(ValueError):
        forward_sequence(net, batch)


def test_hidden_bounded_and_context_starts_at_zero(sub_epoch):
    spec = ConditionSpec(3)
    net = init_network(spec.block_config(7), make_rng(2))
    batch = wire_arrays(spec, sub_epoch.arrays)
    out = forward_sequence(net, batch)
    assert np.all((out.hidden > 0) & (out.hidden < 1))
    # With a zero context, the first step only depends on the external inputs.
    x0 = np.concatenate([batch.trigger[:, :1], batch.visual[:, 0]], axis=1)
    from scipy.special import expit
    np.testing.assert_allclose(out.hidden[:, 0], expit(x0 @ net.w_in[:, :21].T + net.b_h))


def test_forward_has_no_side_effects(sub_epoch):
    spec = ConditionSpec(4)
    net = init_network(spec.block_config(6), make_rng(3))
    before = {k: v.copy() for k, v in net.params().items()}
    batch = wire_arrays(spec, sub_epoch.arrays)
    a = forward_sequence(net, batch).gestures
    b = forward_sequence(net, batch).gestures
    np.testing.assert_array_equal(a, b)
    for k, v in net.params().items():
        np.testing.assert_array_equal(v, before[k])


def test_free_running_equals_teacher_forcing_when_outputs_match_targets(sub_epoch):
    spec = ConditionSpec(4)
    net = zero_net(spec.block_config(4))
    const = np.array([0.3, -0.2, 0.1])
    net = net.replace(b_ges=const.copy(), w_in=make_rng(0).normal(size=net.w_in.shape))
    batch = wire_arrays(spec, sub_epoch.arrays)
    batch.gesture_target = np.broadcast_to(const, batch.gesture_target.shape).copy()
    free = forward_sequence(net, batch, FREE_RUNNING)
    forced = forward_sequence(net, batch, TEACHER_FORCED)
    np.testing.assert_array_equal(free.hidden, forced.hidden)
    # Once outputs differ from targets the two regimes part ways.
    batch.gesture_target = batch.gesture_target + 0.5
    forced = forward_sequence(net, batch, TEACHER_FORCED)
    assert not np.allclose(free.hidden[:, 1:], forced.hidden[:, 1:])


def test_no_loop_ignores_gesture_start(sub_epoch):
    spec = ConditionSpec(3)
    net = init_network(spec.block_config(5), make_rng(4))
    batch = wire_arrays(spec, sub_epoch.arrays)
    a = forward_sequence(net, batch)
    batch.gesture_start = np.ones((len(batch.trigger), 3))
    b = forward_sequence(net, batch)
    np.testing.assert_array_equal(a.numbers, b.numbers)
    np.testing.assert_array_equal(a.gestures, b.gestures)


@pytest.mark.parametrize("condition", range(1, 9))
def test_gradients_match_finite_differences(table, condition):
    net, batch = random_instance(condition, "stay_at_last", seed=condition, table=table)
    assert max_relative_error(net, batch) < 1e-5


@pytest.mark.parametrize("feedback, convention", [(TEACHER_FORCED, "stay_at_last"), (FREE_RUNNING, "go_to_base")])
def test_jordan_gradients_other_regimes(table, feedback, convention):
    net, batch = random_instance(4, convention, seed=99, table=table)
    assert max_relative_error(net, batch, feedback) < 1e-5


@given(st.integers(1, 8), st.integers(0, 10_000))
@settings(max_examples=10, deadline=None)
def test_gradients_random_instances(table, condition, seed):
    net, batch = random_instance(condition, "go_to_base", seed=seed, hidden=3, steps=3, table=table)
    assert max_relative_error(net, batch) < 1e-5


def test_perfect_outputs_give_zero_gradients(sub_epoch):
    spec = ConditionSpec(8)
    net = zero_net(spec.block_config(4))
    batch = wire_arrays(spec, sub_epoch.arrays)
    out = forward_sequence(net, batch)
    batch.number_target, batch.gesture_target = out.numbers.copy(), out.gestures.copy()
    g = bptt_gradients(net, batch)
    assert g.loss == 0.0
    for v in g.grads.values():
        np.testing.assert_array_equal(v, 0.0)


def test_loss_matches_recomputed_sse(sub_epoch):
    spec = ConditionSpec(4)
    net = init_network(spec.block_config(6), make_rng(8))
    batch = wire_arrays(spec, sub_epoch.arrays)
    out = forward_sequence(net, batch)
    g = bptt_gradients(net, batch)
    expected_num = sum_squared_error(out.numbers, batch.number_target)
    expected_ges = sum_squared_error(out.gestures, batch.gesture_target)
    assert g.number_loss == pytest.approx(expected_num, rel=1e-12)
    assert g.gesture_loss == pytest.approx(expected_ges, rel=1e-12)
    assert g.loss == pytest.approx(expected_num + expected_ges, rel=1e-12)


def test_missing_targets_rejected(sub_epoch):
    spec = ConditionSpec(3)
    net = init_network(spec.block_config(4), make_rng(0))
    batch = wire_arrays(spec, sub_epoch.arrays)
    batch.gesture_target = None
    with pytest.raises(ValueError):
        bptt_gradients(net, batch)


def test_batch_gradient_is_sum_over_sequences(sub_epoch):
    spec = ConditionSpec(4)
    net = init_network(spec.block_config(5), make_rng(6))
    data = sub_epoch.arrays
    whole = bptt_gradients(net, wire_arrays(spec, data)).grads
    parts = [bptt_gradients(net, wire_arrays(spec, data.select(slice(i, i + 1)))).grads for i in range(len(data))]
    for k, v in whole.items():
        np.testing.assert_allclose(v, sum(p[k] for p in parts), atol=1e-12)


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    cfg = ConditionSpec(4).block_config(11)
    net = init_network(cfg, make_rng(12))
    net = net.replace(b_h=make_rng(1).normal(size=11) / 3.0)
    save_checkpoint(net, tmp_path / "net.json")
    loaded = load_checkpoint(tmp_path / "net.json")
    assert loaded.cfg == cfg
    for k, v in net.params().items():
        assert loaded.params()[k].tobytes() == v.tobytes()


def _stage_cfgs():
    a = BlockConfig(use_visual_input=False, hidden_size=20)
    b = BlockConfig(use_visual_input=True, use_number_output=False, use_gesture_output=True, hidden_size=48)
    return a, b


def test_stitch_copies_pretrained_blocks():
    cfg_a, cfg_b = _stage_cfgs()
    a, b = init_network(cfg_a, make_rng(1)), init_network(cfg_b, make_rng(2))
    a = a.replace(b_h=np.full(20, 0.1), b_num=np.full(10, 0.2))
    b = b.replace(b_h=np.full(48, 0.3), b_ges=np.full(3, 0.4))
    cfg2 = ConditionSpec(4).block_config(68)
    net = stitch_pretrained(a, b, cfg2, make_rng(3))
    assert net.cfg.hidden_size == 68
    ctx = cfg2.context_cols.start
    np.testing.assert_array_equal(net.w_in[:20, 0], a.w_in[:, 0])
    np.testing.assert_array_equal(net.w_in[:20, ctx:ctx + 20], a.w_in[:, 1:])
    np.testing.assert_array_equal(net.w_num[:, :20], a.w_num)
    np.testing.assert_array_equal(net.b_num, a.b_num)
    np.testing.assert_array_equal(net.w_in[20:, 0], b.w_in[:, 0])
    np.testing.assert_array_equal(net.w_in[20:, 1:21], b.w_in[:, 1:21])
    np.testing.assert_array_equal(net.w_in[20:, ctx + 20:], b.w_in[:, 21:])
    np.testing.assert_array_equal(net.w_ges[:, 20:], b.w_ges)
    np.testing.assert_array_equal(net.b_ges, b.b_ges)
    np.testing.assert_array_equal(net.b_h, np.r_[np.full(20, 0.1), np.full(48, 0.3)])


def test_stitch_fresh_blocks_only():
    cfg_a, cfg_b = _stage_cfgs()
    a, b = zero_net(cfg_a), zero_net(cfg_b)
    cfg2 = ConditionSpec(4).block_config(68)
    net = stitch_pretrained(a, b, cfg2, make_rng(3))
    ctx = cfg2.context_cols.start
    fresh = np.zeros_like(net.w_in, dtype=bool)
    fresh[:20, 1:21] = True                 # vision -> recitation units
    fresh[:, cfg2.gesture_cols] = True      # Jordan gesture input
    fresh[:20, ctx + 20:] = True            # pointing context -> recitation units
    fresh[20:, ctx:ctx + 20] = True         # recitation context -> pointing units
    assert np.all(net.w_in[~fresh] == 0) and np.all(net.w_in[fresh] != 0)
    assert np.all(net.w_num[:, :20] == 0) and np.all(net.w_num[:, 20:] != 0)
    assert np.all(net.w_ges[:, 20:] == 0) and np.all(net.w_ges[:, :20] != 0)
    for bias in (net.b_h, net.b_num, net.b_ges):
        np.testing.assert_array_equal(bias, 0.0)


def test_stitch_single_source_and_size_errors():
    cfg_a, cfg_b = _stage_cfgs()
    a = init_network(cfg_a, make_rng(1))
    cfg2 = ConditionSpec(3).block_config(68)
    net = stitch_pretrained(a, None, cfg2, make_rng(4))
    np.testing.assert_array_equal(net.w_num[:, :20], a.w_num)
    with pytest.raises(ValueError):
        stitch_pretrained(a, init_network(cfg_b, make_rng(2)), ConditionSpec(3).block_config(60), make_rng(0))
