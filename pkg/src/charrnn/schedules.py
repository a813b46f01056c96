"""The four train/predict schedules for the character-level LSTM.

Training text is cut into ``batch_lanes`` contiguous streams. Every update
takes one window of ``k2`` characters from each lane and then advances every
lane by ``k1`` characters, so consecutive windows overlap by ``k2 - k1``.

========  =====================================  ==================
schedule  training window                        prediction
========  =====================================  ==================
1         starts at learned (h0, c0); k2 losses  windowed
2         starts at learned (h0, c0); last loss  windowed
3         same as schedule 1                     streaming
4         starts at carried state; k2 losses     streaming
========  =====================================  ==================

Schedule 4 carries, per lane, the state reached after the first ``k1``
characters of the previous window, which is exactly the state just before
the next window's first character. The carried state is a constant for the
backward pass. When a lane wraps around to offset 0 its state resets to the
learned (h0, c0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, ContractError
from .model import (
    LstmState,
    ModelParams,
    backward_window,
    cross_entropy,
    forward_window,
    logits_of,
    run_states,
)
from .numkernel import softmax
from .optim import AdamState, adam_step

SCHEDULES = (1, 2, 3, 4)


@dataclass(frozen=True)
class ScheduleConfig:
    schedule: int
    k1: int
    k2: int
    batch_lanes: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.schedule not in SCHEDULES:
            raise ContractError(f"schedule must be one of {SCHEDULES}, got {self.schedule}")
        if not 1 <= self.k1 <= self.k2:
            raise ContractError(f"need 1 <= k1 <= k2, got k1={self.k1}, k2={self.k2}")
        if self.batch_lanes < 1:
            raise ContractError(f"batch_lanes must be positive, got {self.batch_lanes}")

    @property
    def loss_positions(self) -> str:
        return "last" if self.schedule == 2 else "all"

    @property
    def carries_state(self) -> bool:
        return self.schedule == 4

    @property
    def streaming_eval(self) -> bool:
        return self.schedule in (3, 4)


@dataclass
class LaneCursors:
    """Per-lane read offsets, plus the carried state under schedule 4.

    ``carry is None`` means every lane's next window starts from the learned
    initial state.
    """

    offsets: np.ndarray
    carry: LstmState | None = None

    @classmethod
    def start(cls, lanes: int) -> LaneCursors:
        return cls(np.zeros(lanes, dtype=np.int64))


@dataclass
class Batch:
    chars: np.ndarray
    targets: np.ndarray
    offsets: np.ndarray
    state0: LstmState | None
    from_initial: np.ndarray


class StepResult(NamedTuple):
    params: ModelParams
    opt: AdamState
    loss: float
    carry: LstmState | None


def check_lanes(lanes: np.ndarray, cfg: ScheduleConfig) -> None:
    if lanes.ndim != 2 or lanes.shape[0] != cfg.batch_lanes:
        raise ConfigError(f"expected {cfg.batch_lanes} lanes, got array of shape {lanes.shape}")
    if lanes.shape[1] < cfg.k2 + 1:
        raise ConfigError(f"lanes of {lanes.shape[1]} characters cannot hold a window of k2={cfg.k2} plus target")


def next_batch(cursors: LaneCursors, lanes: np.ndarray, cfg: ScheduleConfig) -> tuple[Batch, LaneCursors]:
    """Slice one window per lane and advance the cursors by ``k1``."""
    check_lanes(lanes, cfg)
    L = lanes.shape[1]
    offsets = cursors.offsets.copy()
    wrap = offsets + cfg.k2 + 1 > L
    offsets[wrap] = 0

    idx = offsets[:, None] + np.arange(cfg.k2 + 1)[None, :]
    span = np.take_along_axis(lanes, idx, axis=1)

    if cfg.carries_state and cursors.carry is not None:
        state0 = cursors.carry
        from_initial = wrap.copy()
    else:
        state0 = None
        from_initial = np.ones(len(offsets), dtype=bool)

    batch = Batch(span[:, :-1], span[:, 1:], offsets, state0, from_initial)
    return batch, LaneCursors(offsets + cfg.k1, cursors.carry)


def batch_start_state(params: ModelParams, batch: Batch) -> LstmState | None:
    """Concrete initial state for a batch, with reset lanes pointed at (h0, c0)."""
    if batch.state0 is None:
        return None
    m = batch.from_initial[:, None]
    return LstmState(np.where(m, params.h0, batch.state0.h), np.where(m, params.c0, batch.state0.c))


def train_step(cfg: ScheduleConfig, params: ModelParams, opt: AdamState, batch: Batch) -> StepResult:
    """Forward, truncated backward and one Adam update on a batch.

    Gradients are the mean over lanes and scored positions. For schedule 4
    the returned ``carry`` is the state after ``k1`` characters of this
    window, computed with the pre-update parameters.
    """
    if cfg.schedule not in SCHEDULES:
        raise ContractError(f"unknown schedule {cfg.schedule}")
    state0 = batch_start_state(params, batch)
    trace = forward_window(params, batch.chars, batch.targets, cfg.loss_positions,
                           state0=state0, from_initial=batch.from_initial)
    grads = backward_window(params, trace)
    new_params, new_opt = adam_step(params, grads, opt)
    carry = trace.state_after(cfg.k1) if cfg.carries_state else None
    return StepResult(new_params, new_opt, trace.mean_loss, carry)


def eval_windowed(params: ModelParams, test, k2: int, chunk: int = 1024) -> float:
    """Perplexity when each test character is predicted from the ``k2`` before it.

    Every context window starts from the learned initial state.
    """
    test = np.asarray(test, dtype=np.int64)
    if len(test) <= k2:
        raise ContractError(f"test stream of {len(test)} characters is not longer than k2={k2}")
    windows = np.lib.stride_tricks.sliding_window_view(test[:-1], k2)
    targets = test[k2:]
    total = 0.0
    for a in range(0, len(targets), chunk):
        w = windows[a:a + chunk]
        st = run_states(params, w, LstmState.initial(params, len(w)))
        probs = softmax(logits_of(params, st.h))
        total += float(cross_entropy(probs, targets[a:a + chunk]).sum())
    return math.exp(total / len(targets))


def eval_streaming(params: ModelParams, test) -> float:
    """Perplexity with one running state over the whole test stream.

    The first character is predicted from the learned initial state itself.
    """
    test = np.asarray(test, dtype=np.int64)
    if len(test) < 1:
        raise ContractError("empty test stream")
    hs = np.empty((len(test), params.H))
    h, c = params.h0[None, :], params.c0[None, :]
    hs[0] = h[0]
    for t in range(1, len(test)):
        st = run_states(params, test[None, t - 1:t], LstmState(h, c))
        h, c = st.h, st.c
        hs[t] = h[0]
    probs = softmax(logits_of(params, hs))
    return math.exp(float(cross_entropy(probs, test).mean()))


def evaluate(cfg: ScheduleConfig, params: ModelParams, test) -> float:
    """Test perplexity using the prediction procedure tied to ``cfg.schedule``."""
    if cfg.streaming_eval:
        return eval_streaming(params, test)
    return eval_windowed(params, test, cfg.k2)


class ScheduleTrainer:
    """Mutable training loop for one run under one schedule."""

    def __init__(self, cfg: ScheduleConfig, lanes: np.ndarray, params: ModelParams, opt: AdamState):
        check_lanes(lanes, cfg)
        self.cfg = cfg
        self.lanes = lanes
        self.params = params
        self.opt = opt
        self.cursors = LaneCursors.start(cfg.batch_lanes)
        self.steps = 0

    @property
    def sequences_seen(self) -> int:
        return self.steps * self.cfg.batch_lanes

    def step(self) -> float:
        batch, self.cursors = next_batch(self.cursors, self.lanes, self.cfg)
        res = train_step(self.cfg, self.params, self.opt, batch)
        self.params, self.opt = res.params, res.opt
        if self.cfg.carries_state:
            self.cursors.carry = res.carry
        self.steps += 1
        return res.loss
