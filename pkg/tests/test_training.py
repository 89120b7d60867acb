import dataclasses

import numpy as np
import pytest

from pointcount.datagen import Convention
from pointcount.network import bptt_gradients
from pointcount.numerics import make_rng
from pointcount.training import (TrainSpec, TrainTrace, desk_scale, recites_correctly, run_experiment,
                                 run_repetition, train_stage1a, train_stage1b, train_stage2)


def tiny(**kw):
    base = dict(sub_epochs=15, repetitions=2, test_sets=2, stage1a_epochs=10, stage1b_sub_epochs=10)
    base.update(kw)
    return TrainSpec(**base)


def test_published_defaults():
    s = TrainSpec()
    assert (s.sub_epochs, s.repetitions, s.test_sets, s.hidden_size) == (20000, 15, 50, 68)
    assert s.main_learning_rate == 0.005
    assert TrainSpec(condition=2).main_learning_rate == 0.02
    assert (s.stage1a_epochs, s.stage1a_lr, s.stage1a_hidden) == (7000, 0.01, 20)
    assert s.stage1b_hidden + s.stage1a_hidden == 68
    assert TrainSpec(study=2, condition=3, pretraining="both").main_learning_rate == 0.001
    assert TrainSpec(study=2, condition=3, pretraining="stage1b").main_learning_rate == 0.001
    assert TrainSpec(study=2, condition=3, pretraining="none").main_learning_rate == 0.005


@pytest.mark.parametrize("kwargs", [
    {"study": 1, "pretraining": "both"},
    {"study": 2, "condition": 1},
    {"study": 2, "condition": 3, "pretraining": "both", "hidden_size": 60},
    {"condition": 9},
    {"pretraining": "stage3"},
    {"feedback": "sometimes"},
])
def test_invalid_specs(kwargs):
    with pytest.raises(ValueError):
        TrainSpec(**kwargs)


def test_stage1a_loss_drops():
    net, trace = train_stage1a(tiny(stage1a_epochs=200), make_rng(0))
    assert trace.losses.shape == (200, 3)
    assert trace.total[-1] < trace.total[0]
    np.testing.assert_allclose(trace.total, trace.counting + trace.gesture)
    assert np.all(trace.gesture == 0)


def test_stage1a_full_length_recites():
    net, trace = train_stage1a(TrainSpec(), make_rng(1))
    assert recites_correctly(net)
    assert trace.total[-1] < trace.total[0]


def test_stage1b_and_stage2_shapes(table):
    spec = tiny(study=2, condition=4, convention="go_to_base", pretraining="both")
    b, trace_b = train_stage1b(spec, table, make_rng(2))
    assert b.cfg.hidden_size == 48 and b.cfg.use_gesture_output and not b.cfg.use_number_output
    assert np.all(trace_b.counting == 0)
    a, _ = train_stage1a(spec, make_rng(3))
    net, trace = train_stage2(spec, a, b, table, make_rng(4))
    assert net.cfg.hidden_size == 68 and net.cfg.use_jordan_loop
    assert len(trace.losses) == spec.sub_epochs
    assert np.all(trace.losses >= 0)
    np.testing.assert_allclose(trace.total, trace.counting + trace.gesture)


def test_run_experiment_deterministic(table):
    spec = tiny(condition=3)
    a = run_experiment(spec, table)
    b = run_experiment(spec, table)
    assert len(a.repetitions) == 2
    for ra, rb in zip(a.repetitions, b.repetitions):
        assert ra.report == rb.report
        np.testing.assert_array_equal(ra.trace.losses, rb.trace.losses)


def test_parallel_matches_serial(table):
    spec = tiny(study=2, condition=3, pretraining="stage1b", repetitions=3)
    serial = run_experiment(spec, table, workers=1)
    parallel = run_experiment(spec, table, workers=3)
    for rs, rp in zip(serial.repetitions, parallel.repetitions):
        assert rs.repetition == rp.repetition
        assert rs.report == rp.report
        assert rs.trace.losses.tobytes() == rp.trace.losses.tobytes()
        for k, v in rs.net.params().items():
            assert v.tobytes() == rp.net.params()[k].tobytes()


def test_cache_does_not_change_results(table):
    spec = tiny(study=2, condition=3, pretraining="both")
    cache = {}
    first = run_repetition(spec, table, 0, cache)
    assert len(cache) == 2
    again = run_repetition(spec, table, 0, cache)
    fresh = run_repetition(spec, table, 0)
    assert first.report == again.report == fresh.report


def test_repetitions_use_distinct_streams(table):
    report = run_experiment(tiny(condition=1), table)
    a, b = report.repetitions
    assert a.seed != b.seed
    assert not np.array_equal(a.trace.losses, b.trace.losses)


def test_training_leaves_table_untouched(table):
    before = table.vectors.copy()
    run_repetition(tiny(condition=8), table, 0)
    np.testing.assert_array_equal(table.vectors, before)
    assert not table.vectors.flags.writeable


def test_fit_uses_one_step_per_sub_epoch(table):
    spec = tiny(condition=3, sub_epochs=1)
    rep = run_repetition(spec, table, 0)
    assert rep.trace.losses.shape == (1, 3)


def test_trace_text(tmp_path):
    trace = TrainTrace(np.array([[3.0, 2.0, 1.0], [1.5, 1.0, 0.5]]))
    trace.save(tmp_path / "t.tsv")
    lines = (tmp_path / "t.tsv").read_text().splitlines()
    assert lines[0].startswith("#")
    assert lines[2] == "2\t1.5\t1.0\t0.5"


def test_report_values_and_summary(table):
    report = run_experiment(tiny(study=2, condition=3, pretraining="stage1b"), table)
    assert len(report.values("counting")) == 2
    assert len(report.values("stage1b_gesture")) == 2
    mean, sd = report.summary("gesture")
    assert 0 <= mean <= 1 and sd >= 0
    assert run_experiment(tiny(condition=1), table).summary("gesture") is None


def test_desk_scale():
    s = desk_scale(TrainSpec(), 0.5)
    assert (s.repetitions, s.sub_epochs, s.test_sets, s.stage1a_epochs) == (8, 10000, 25, 3500)
    with pytest.raises(ValueError):
        desk_scale(TrainSpec(), 0.0)


def test_spec_round_trip():
    s = TrainSpec(study=2, condition=4, convention=Convention.GO_TO_BASE, pretraining="stage1a")
    assert TrainSpec.from_dict(s.to_dict()) == s
