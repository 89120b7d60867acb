"""Elman network with optional gesture blocks and a Jordan gesture loop.

At every step the hidden layer sees ``[trigger, visual, gesture_in, h_prev]``
through a single weight matrix ``w_in`` whose columns follow that order.
Hidden units and number outputs are logistic; gesture outputs are linear.
With the Jordan loop, ``gesture_in`` at step ``t`` is the network's own
gesture output at ``t - 1`` (or the target, under teacher forcing), and a
convention-dependent rest signal at ``t = 0``.

Sequences are processed in batches: arrays carry a leading batch axis ``B``
and a time axis ``T``. The loss is the sum of squared errors over every
enabled output, step and sequence, and :func:`bptt_gradients` returns its
exact gradient.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .numerics import glorot_uniform

N_TRIGGER = 1
N_VISUAL = 20
N_GESTURE = 3
N_NUMBERS = 10

FREE_RUNNING = "free_running"
TEACHER_FORCED = "teacher_forced"

CHECKPOINT_FORMAT = "pointcount.checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class BlockConfig:
    use_visual_input: bool = True
    use_gesture_input: bool = False
    use_number_output: bool = True
    use_gesture_output: bool = False
    use_jordan_loop: bool = False
    hidden_size: int = 68

    def __post_init__(self):
        if self.hidden_size < 1:
            raise ValueError("hidden_size must be positive")
        if not (self.use_number_output or self.use_gesture_output):
            raise ValueError("at least one output block must be enabled")
        if self.use_jordan_loop and not self.use_gesture_output:
            raise ValueError("the Jordan loop feeds back gesture outputs, which are disabled")
        if self.use_jordan_loop and self.use_gesture_input:
            raise ValueError("the Jordan loop already occupies the gesture input block")

    @property
    def has_gesture_block(self) -> bool:
        return self.use_gesture_input or self.use_jordan_loop

    @property
    def visual_cols(self) -> slice:
        return slice(N_TRIGGER, N_TRIGGER + N_VISUAL * self.use_visual_input)

    @property
    def gesture_cols(self) -> slice:
        start = self.visual_cols.stop
        return slice(start, start + N_GESTURE * self.has_gesture_block)

    @property
    def context_cols(self) -> slice:
        start = self.gesture_cols.stop
        return slice(start, start + self.hidden_size)

    @property
    def input_width(self) -> int:
        return self.context_cols.stop

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class NetworkState:
    """Weights and biases. Disabled output blocks are ``None``."""

    cfg: BlockConfig
    w_in: np.ndarray
    b_h: np.ndarray
    w_num: np.ndarray | None = None
    b_num: np.ndarray | None = None
    w_ges: np.ndarray | None = None
    b_ges: np.ndarray | None = None

    def __post_init__(self):
        h, d = self.cfg.hidden_size, self.cfg.input_width
        _check(self.w_in, (h, d), "w_in")
        _check(self.b_h, (h,), "b_h")
        for on, w, b, n, name in ((self.cfg.use_number_output, self.w_num, self.b_num, N_NUMBERS, "num"),
                                  (self.cfg.use_gesture_output, self.w_ges, self.b_ges, N_GESTURE, "ges")):
            if on:
                _check(w, (n, h), f"w_{name}")
                _check(b, (n,), f"b_{name}")
            elif w is not None or b is not None:
                raise ValueError(f"w_{name}/b_{name} given for a disabled output block")

    def params(self) -> dict[str, np.ndarray]:
        names = ["w_in", "b_h"]
        if self.cfg.use_number_output:
            names += ["w_num", "b_num"]
        if self.cfg.use_gesture_output:
            names += ["w_ges", "b_ges"]
        return {k: getattr(self, k) for k in names}

    def replace(self, **arrays) -> "NetworkState":
        return NetworkState(self.cfg, **{**self.params(), **arrays})

    def copy(self) -> "NetworkState":
        return self.replace(**{k: v.copy() for k, v in self.params().items()})

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "config": self.cfg.to_dict(),
            "arrays": {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in self.params().items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkState":
        if d.get("format") != CHECKPOINT_FORMAT or d.get("version") != CHECKPOINT_VERSION:
            raise ValueError("not a version-1 pointcount checkpoint")
        arrays = {k: np.array(a["data"], dtype=np.float64).reshape(a["shape"]) for k, a in d["arrays"].items()}
        return cls(BlockConfig(**d["config"]), **arrays)


def _check(a, shape, name):
    if a is None or np.shape(a) != shape:
        raise ValueError(f"{name} must have shape {shape}, got {None if a is None else np.shape(a)}")


def save_checkpoint(net: NetworkState, path) -> None:
    # Python's float repr round-trips float64 exactly.
    Path(path).write_text(json.dumps(net.to_dict()) + "\n")


def load_checkpoint(path) -> NetworkState:
    return NetworkState.from_dict(json.loads(Path(path).read_text()))


def init_network(cfg: BlockConfig, rng: np.random.Generator) -> NetworkState:
    """Glorot-uniform weights, zero biases."""
    h = cfg.hidden_size
    w_in = glorot_uniform(h, cfg.input_width, rng)
    w_num = glorot_uniform(N_NUMBERS, h, rng) if cfg.use_number_output else None
    w_ges = glorot_uniform(N_GESTURE, h, rng) if cfg.use_gesture_output else None
    return NetworkState(cfg, w_in, np.zeros(h),
                        w_num, np.zeros(N_NUMBERS) if cfg.use_number_output else None,
                        w_ges, np.zeros(N_GESTURE) if cfg.use_gesture_output else None)


@dataclass
class SequenceBatch:
    """Network inputs and (optional) targets for ``B`` sequences of ``T`` steps.

    ``trigger`` (B, T); ``visual`` (B, T, 20); ``gesture_in`` (B, T, 3) external
    gesture input; ``gesture_start`` (B, 3) Jordan-loop input at ``t = 0``;
    ``number_target`` (B, T, 10); ``gesture_target`` (B, T, 3).
    """

    trigger: np.ndarray
    visual: np.ndarray | None = None
    gesture_in: np.ndarray | None = None
    gesture_start: np.ndarray | None = None
    number_target: np.ndarray | None = None
    gesture_target: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.trigger.shape[:2]


@dataclass
class ForwardResult:
    hidden: np.ndarray
    numbers: np.ndarray | None
    gestures: np.ndarray | None
    gesture_fed: np.ndarray | None = None
    external: np.ndarray = field(default=None, repr=False)


def _external_inputs(cfg: BlockConfig, batch: SequenceBatch) -> np.ndarray:
    """Stack the externally supplied columns ``[trigger, visual, gesture_in]``."""
    b, t = batch.shape
    parts = [np.asarray(batch.trigger, dtype=float).reshape(b, t, 1)]
    if cfg.use_visual_input:
        if batch.visual is None or batch.visual.shape != (b, t, N_VISUAL):
            raise ValueError(f"visual input must have shape {(b, t, N_VISUAL)}")
        parts.append(batch.visual)
    if cfg.use_gesture_input:
        if batch.gesture_in is None or batch.gesture_in.shape != (b, t, N_GESTURE):
            raise ValueError(f"gesture input must have shape {(b, t, N_GESTURE)}")
        parts.append(batch.gesture_in)
    return np.concatenate(parts, axis=-1) if len(parts) > 1 else parts[0]


def _check_feedback(feedback: str):
    if feedback not in (FREE_RUNNING, TEACHER_FORCED):
        raise ValueError(f"feedback mode must be {FREE_RUNNING!r} or {TEACHER_FORCED!r}, got {feedback!r}")


def forward_sequence(net: NetworkState, batch: SequenceBatch, feedback: str = FREE_RUNNING) -> ForwardResult:
    """Run the network over every sequence of ``batch``."""
    cfg = net.cfg
    _check_feedback(feedback)
    b, steps = batch.shape
    if steps < 1:
        raise ValueError("sequences need at least one step")
    x = _external_inputs(cfg, batch)
    ext_cols = slice(0, x.shape[-1]) if not cfg.use_jordan_loop else slice(0, cfg.gesture_cols.start)
    drive = x @ net.w_in[:, ext_cols].T + net.b_h
    w_ctx_t = net.w_in[:, cfg.context_cols].T
    h = np.zeros((b, cfg.hidden_size))
    hidden = np.empty((b, steps, cfg.hidden_size))

    if not cfg.use_jordan_loop:
        for t in range(steps):
            h = expit(drive[:, t] + h @ w_ctx_t)
            hidden[:, t] = h
        gestures = hidden @ net.w_ges.T + net.b_ges if cfg.use_gesture_output else None
        fed = None
    else:
        if batch.gesture_start is None:
            raise ValueError("the Jordan loop needs gesture_start")
        if feedback == TEACHER_FORCED and batch.gesture_target is None:
            raise ValueError("teacher forcing needs gesture targets")
        w_gin_t = net.w_in[:, cfg.gesture_cols].T
        w_ges_t = net.w_ges.T
        gestures = np.empty((b, steps, N_GESTURE))
        fed = np.empty((b, steps, N_GESTURE))
        g_in = np.asarray(batch.gesture_start, dtype=float)
        for t in range(steps):
            fed[:, t] = g_in
            h = expit(drive[:, t] + h @ w_ctx_t + g_in @ w_gin_t)
            hidden[:, t] = h
            gestures[:, t] = h @ w_ges_t + net.b_ges
            g_in = gestures[:, t] if feedback == FREE_RUNNING else batch.gesture_target[:, t]
    numbers = expit(hidden @ net.w_num.T + net.b_num) if cfg.use_number_output else None
    return ForwardResult(hidden, numbers, gestures, fed, x)


@dataclass
class Gradients:
    loss: float
    number_loss: float
    gesture_loss: float
    grads: dict[str, np.ndarray]


def _loss_terms(cfg: BlockConfig, out: ForwardResult, batch: SequenceBatch):
    d_num = d_ges = None
    num_loss = ges_loss = 0.0
    if cfg.use_number_output:
        if batch.number_target is None:
            raise ValueError("number targets are required for the enabled number output")
        err = out.numbers - batch.number_target
        num_loss = float(np.sum(err * err))
        d_num = 2.0 * err * out.numbers * (1.0 - out.numbers)
    if cfg.use_gesture_output:
        if batch.gesture_target is None:
            raise ValueError("gesture targets are required for the enabled gesture output")
        err = out.gestures - batch.gesture_target
        ges_loss = float(np.sum(err * err))
        d_ges = 2.0 * err
    return num_loss, ges_loss, d_num, d_ges


def sequence_loss(net: NetworkState, batch: SequenceBatch, feedback: str = FREE_RUNNING) -> float:
    out = forward_sequence(net, batch, feedback)
    num_loss, ges_loss, _, _ = _loss_terms(net.cfg, out, batch)
    return num_loss + ges_loss


def bptt_gradients(net: NetworkState, batch: SequenceBatch, feedback: str = FREE_RUNNING) -> Gradients:
    """Loss and its exact gradient with respect to every parameter.

    Gradients flow through the Elman context and, when free running, through
    the Jordan gesture loop. They are summed over the batch.
    """
    cfg = net.cfg
    out = forward_sequence(net, batch, feedback)
    num_loss, ges_loss, d_num, d_ges = _loss_terms(cfg, out, batch)
    hidden = out.hidden
    b, steps, nh = hidden.shape

    d_hidden_out = np.zeros_like(hidden)
    if d_num is not None:
        d_hidden_out += d_num @ net.w_num
    w_ctx = net.w_in[:, cfg.context_cols]
    d_z = np.empty_like(hidden)
    dz_next = np.zeros((b, nh))
    loop = cfg.use_jordan_loop and feedback == FREE_RUNNING
    if loop:
        w_gin = net.w_in[:, cfg.gesture_cols]
        d_ges = d_ges.copy()
        for t in range(steps - 1, -1, -1):
            if t < steps - 1:
                d_ges[:, t] += dz_next @ w_gin
            dh = d_hidden_out[:, t] + d_ges[:, t] @ net.w_ges + dz_next @ w_ctx
            h = hidden[:, t]
            dz_next = dh * h * (1.0 - h)
            d_z[:, t] = dz_next
    else:
        if d_ges is not None:
            d_hidden_out += d_ges @ net.w_ges
        for t in range(steps - 1, -1, -1):
            h = hidden[:, t]
            dz_next = (d_hidden_out[:, t] + dz_next @ w_ctx) * h * (1.0 - h)
            d_z[:, t] = dz_next

    flat_dz = d_z.reshape(-1, nh)
    prev = np.concatenate([np.zeros((b, 1, nh)), hidden[:, :-1]], axis=1).reshape(-1, nh)
    g_in = np.zeros_like(net.w_in)
    x = out.external.reshape(b * steps, -1)
    g_in[:, :x.shape[1]] = flat_dz.T @ x
    if cfg.use_jordan_loop:
        g_in[:, cfg.gesture_cols] = flat_dz.T @ out.gesture_fed.reshape(-1, N_GESTURE)
    g_in[:, cfg.context_cols] = flat_dz.T @ prev
    grads = {"w_in": g_in, "b_h": flat_dz.sum(axis=0)}
    flat_h = hidden.reshape(-1, nh)
    if d_num is not None:
        flat = d_num.reshape(-1, N_NUMBERS)
        grads["w_num"] = flat.T @ flat_h
        grads["b_num"] = flat.sum(axis=0)
    if d_ges is not None:
        flat = d_ges.reshape(-1, N_GESTURE)
        grads["w_ges"] = flat.T @ flat_h
        grads["b_ges"] = flat.sum(axis=0)
    return Gradients(num_loss + ges_loss, num_loss, ges_loss, grads)


def stitch_pretrained(stage1a: NetworkState | None, stage1b: NetworkState | None,
                      cfg: BlockConfig, rng: np.random.Generator) -> NetworkState:
    """Combine a recitation net and a pointing net into one counting net.

    Hidden units are laid out as ``[recitation | pointing]``. Pre-trained
    blocks are copied; every other weight comes from a fresh Glorot
    initialisation of the full network, and biases of units that were not
    pre-trained stay at zero. Either source may be ``None``, in which case
    its partition is left freshly initialised.
    """
    na = stage1a.cfg.hidden_size if stage1a is not None else None
    nb = stage1b.cfg.hidden_size if stage1b is not None else None
    if na is None and nb is None:
        return init_network(cfg, rng)
    if na is None:
        na = cfg.hidden_size - nb
    if nb is None:
        nb = cfg.hidden_size - na
    if na < 0 or nb < 0 or na + nb != cfg.hidden_size:
        raise ValueError(f"stage-2 hidden size {cfg.hidden_size} must equal {na} + {nb}")

    net = init_network(cfg, rng)
    a_rows, b_rows = slice(0, na), slice(na, na + nb)
    ctx = cfg.context_cols.start
    if stage1a is not None:
        src = stage1a.cfg
        if src.use_visual_input or src.has_gesture_block or not src.use_number_output:
            raise ValueError("stage 1A net must map trigger to numbers only")
        if not cfg.use_number_output:
            raise ValueError("stage-2 config has no number output for the stage 1A weights")
        net.w_in[a_rows, 0] = stage1a.w_in[:, 0]
        net.w_in[a_rows, ctx:ctx + na] = stage1a.w_in[:, src.context_cols]
        net.b_h[a_rows] = stage1a.b_h
        net.w_num[:, a_rows] = stage1a.w_num
        net.b_num[:] = stage1a.b_num
    if stage1b is not None:
        src = stage1b.cfg
        if not src.use_visual_input or src.has_gesture_block or not src.use_gesture_output:
            raise ValueError("stage 1B net must map trigger and vision to gestures")
        if not (cfg.use_gesture_output and cfg.use_visual_input):
            raise ValueError("stage-2 config lacks the visual input or gesture output of stage 1B")
        net.w_in[b_rows, 0] = stage1b.w_in[:, 0]
        net.w_in[b_rows, cfg.visual_cols] = stage1b.w_in[:, src.visual_cols]
        net.w_in[b_rows, ctx + na:ctx + na + nb] = stage1b.w_in[:, src.context_cols]
        net.b_h[b_rows] = stage1b.b_h
        net.w_ges[:, b_rows] = stage1b.w_ges
        net.b_ges[:] = stage1b.b_ges
    return net
