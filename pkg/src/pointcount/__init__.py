"""Recurrent-network model of learning to count with pointing gestures."""

__version__ = "0.1.0"

from .datagen import ConditionSpec, Convention, gen_scene, gen_sub_epoch, build_sequence_pair, wire_condition
from .evaluation import aggregate, decode_gestures, decode_numbers, one_way_anova
from .gestures import ArmModel, GestureTable, build_gesture_table, solve_pointing
from .network import BlockConfig, NetworkState, bptt_gradients, forward_sequence, init_network, stitch_pretrained
from .numerics import adam_step, glorot_uniform, make_rng, pca_fit, sum_squared_error
from .training import TrainSpec, run_experiment, train_stage1a, train_stage1b, train_stage2

__all__ = [
    "ArmModel", "BlockConfig", "ConditionSpec", "Convention", "GestureTable", "NetworkState", "TrainSpec",
    "adam_step", "aggregate", "bptt_gradients", "build_gesture_table", "build_sequence_pair", "decode_gestures",
    "decode_numbers", "forward_sequence", "gen_scene", "gen_sub_epoch", "glorot_uniform", "init_network",
    "make_rng", "one_way_anova", "pca_fit", "run_experiment", "solve_pointing", "stitch_pretrained",
    "sum_squared_error", "train_stage1a", "train_stage1b", "train_stage2", "wire_condition",
]
