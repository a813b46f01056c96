"""One-layer LSTM with a dense softmax read-out, trained by truncated BPTT.

Shapes follow the row-batch convention: a batch of ``B`` lanes carries hidden
and cell states of shape ``(B, H)``. Single-sequence calls are the ``B == 1``
special case and get squeezed back on the way out.

Gate order in the stacked weight blocks is input, forget, output, candidate::

    i = sigmoid(Wi x + Ui h + bi)      f = sigmoid(Wf x + Uf h + bf)
    o = sigmoid(Wo x + Uo h + bo)      g = tanh(Wg x + Ug h + bg)
    c' = f * c + i * g                 h' = o * tanh(c')
    p  = softmax(Wy h' + by)

The loss of a window is the mean cross-entropy over all scored
(lane, position) pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import ContractError
from .numkernel import Rng, sigmoid, softmax

PROB_FLOOR = 1e-12

PARAM_FIELDS = (
    "Wi", "Wf", "Wo", "Wg",
    "Ui", "Uf", "Uo", "Ug",
    "bi", "bf", "bo", "bg",
    "Wy", "by", "h0", "c0",
)


class ModelParams:
    """All learnable quantities, stored in one flat ``float64`` buffer.

    The named fields (``Wi`` ... ``c0``) are views into :attr:`flat`, so
    optimizers can work on the flat vector while the model code reads the
    stacked blocks ``W`` (4H x V), ``U`` (4H x H) and ``b`` (4H).

    The same class doubles as the container for gradients, where ``h0`` and
    ``c0`` hold the gradients of the learned initial state.
    """

    def __init__(self, vocab_size: int, hidden_size: int, flat: np.ndarray | None = None):
        V, H = int(vocab_size), int(hidden_size)
        self.V, self.H = V, H
        n = self.size_for(V, H)
        if flat is None:
            flat = np.zeros(n)
        else:
            flat = np.ascontiguousarray(flat, dtype=np.float64)
            if flat.shape != (n,):
                raise ContractError(f"flat buffer has shape {flat.shape}, expected ({n},) for V={V}, H={H}")
        self.flat = flat

        o = 0

        def take(*shape):
            nonlocal o
            k = int(np.prod(shape))
            view = flat[o:o + k].reshape(shape)
            o += k
            return view

        self.W = take(4 * H, V)
        self.U = take(4 * H, H)
        self.b = take(4 * H)
        self.Wy = take(V, H)
        self.by = take(V)
        self.h0 = take(H)
        self.c0 = take(H)

    @staticmethod
    def size_for(V: int, H: int) -> int:
        return 4 * H * V + 4 * H * H + 4 * H + V * H + V + 2 * H

    # per-gate views into the stacked blocks
    Wi = property(lambda self: self.W[0:self.H])
    Wf = property(lambda self: self.W[self.H:2 * self.H])
    Wo = property(lambda self: self.W[2 * self.H:3 * self.H])
    Wg = property(lambda self: self.W[3 * self.H:])
    Ui = property(lambda self: self.U[0:self.H])
    Uf = property(lambda self: self.U[self.H:2 * self.H])
    Uo = property(lambda self: self.U[2 * self.H:3 * self.H])
    Ug = property(lambda self: self.U[3 * self.H:])
    bi = property(lambda self: self.b[0:self.H])
    bf = property(lambda self: self.b[self.H:2 * self.H])
    bo = property(lambda self: self.b[2 * self.H:3 * self.H])
    bg = property(lambda self: self.b[3 * self.H:])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.V, self.H)

    def items(self):
        for name in PARAM_FIELDS:
            yield name, getattr(self, name)

    def copy(self) -> ModelParams:
        return ModelParams(self.V, self.H, self.flat.copy())

    def zeros_like(self) -> ModelParams:
        return ModelParams(self.V, self.H)

    def __repr__(self):
        return f"ModelParams(V={self.V}, H={self.H}, n={self.flat.size})"


Gradients = ModelParams


@dataclass
class LstmState:
    """Hidden and cell state, shape ``(H,)`` or ``(B, H)``."""

    h: np.ndarray
    c: np.ndarray

    @classmethod
    def initial(cls, params: ModelParams, lanes: int | None = None) -> LstmState:
        if lanes is None:
            return cls(params.h0.copy(), params.c0.copy())
        return cls(np.tile(params.h0, (lanes, 1)), np.tile(params.c0, (lanes, 1)))

    def copy(self) -> LstmState:
        return LstmState(self.h.copy(), self.c.copy())


@dataclass
class ForwardTrace:
    """Everything a forward pass keeps around for the backward pass.

    Step arrays are indexed ``[t, lane, unit]``; ``h[t]`` and ``c[t]`` are the
    states after consuming ``chars[:, t]``. ``probs`` and ``loss_values`` are
    indexed ``[k, lane]`` for the k-th entry of ``positions``.
    """

    params: ModelParams
    chars: np.ndarray
    targets: np.ndarray
    positions: tuple[int, ...]
    h_init: np.ndarray
    c_init: np.ndarray
    from_initial: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    c: np.ndarray
    h: np.ndarray
    probs: np.ndarray
    loss_values: np.ndarray
    batched: bool = field(default=True)

    @property
    def length(self) -> int:
        return self.chars.shape[1]

    @property
    def losses(self) -> list[tuple[int, float]]:
        """(position, loss) pairs; the loss is averaged over lanes."""
        return [(p, float(v)) for p, v in zip(self.positions, self.loss_values.mean(axis=1))]

    @property
    def mean_loss(self) -> float:
        return float(self.loss_values.mean())

    def state_after(self, n: int) -> LstmState:
        """State after consuming the first ``n`` characters of the window."""
        if n == 0:
            st = LstmState(self.h_init.copy(), self.c_init.copy())
        else:
            st = LstmState(self.h[n - 1].copy(), self.c[n - 1].copy())
        if not self.batched:
            st = LstmState(st.h[0], st.c[0])
        return st


def init_params(seed: int, V: int, H: int) -> ModelParams:
    """Uniform ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` weights, zero biases and initial state."""
    if V < 2:
        raise ContractError(f"vocabulary size must be at least 2, got {V}")
    if H < 1:
        raise ContractError(f"hidden size must be at least 1, got {H}")
    rng = Rng(seed)
    p = ModelParams(V, H)
    p.W[...] = rng.uniform(-1.0, 1.0, p.W.size).reshape(p.W.shape) / np.sqrt(V)
    p.U[...] = rng.uniform(-1.0, 1.0, p.U.size).reshape(p.U.shape) / np.sqrt(H)
    p.Wy[...] = rng.uniform(-1.0, 1.0, p.Wy.size).reshape(p.Wy.shape) / np.sqrt(H)
    return p


def _gates(params: ModelParams, h: np.ndarray, x: np.ndarray):
    H = params.H
    pre = params.W[:, x].T + h @ params.U.T + params.b
    i = sigmoid(pre[:, :H])
    f = sigmoid(pre[:, H:2 * H])
    o = sigmoid(pre[:, 2 * H:3 * H])
    g = np.tanh(pre[:, 3 * H:])
    return i, f, o, g


def _step(params: ModelParams, h: np.ndarray, c: np.ndarray, x: np.ndarray):
    i, f, o, g = _gates(params, h, x)
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return i, f, o, g, c_new, h_new


def _check_chars(params: ModelParams, chars: np.ndarray) -> None:
    if chars.size and (chars.min() < 0 or chars.max() >= params.V):
        raise ContractError(f"character index out of range [0, {params.V})")


def lstm_step(params: ModelParams, state: LstmState, x) -> LstmState:
    """Advance ``state`` by one character (or one character per lane)."""
    x_arr = np.atleast_1d(np.asarray(x, dtype=np.int64))
    _check_chars(params, x_arr)
    h = np.asarray(state.h, dtype=np.float64)
    single = h.ndim == 1
    h2 = h[None, :] if single else h
    c2 = np.asarray(state.c, dtype=np.float64).reshape(h2.shape)
    *_, c_new, h_new = _step(params, h2, c2, x_arr)
    if single:
        return LstmState(h_new[0], c_new[0])
    return LstmState(h_new, c_new)


def run_states(params: ModelParams, chars: np.ndarray, state: LstmState) -> LstmState:
    """Consume ``chars`` of shape ``(B, T)`` without keeping a trace."""
    h, c = state.h, state.c
    for t in range(chars.shape[1]):
        *_, c, h = _step(params, h, c, chars[:, t])
    return LstmState(h, c)


def logits_of(params: ModelParams, h: np.ndarray) -> np.ndarray:
    return h @ params.Wy.T + params.by


def cross_entropy(probs, target) -> float | np.ndarray:
    """``-ln p[target]`` with probabilities floored at ``PROB_FLOOR``.

    Accepts a single distribution and index, or a ``(B, V)`` batch with ``B``
    targets (returns a ``(B,)`` array).
    """
    p = np.asarray(probs, dtype=np.float64)
    t = np.asarray(target, dtype=np.int64)
    if t.ndim == 0:
        if not 0 <= t < p.shape[-1]:
            raise ContractError(f"target {int(t)} outside vocabulary of size {p.shape[-1]}")
        return float(-np.log(max(p[t], PROB_FLOOR)))
    if t.size and (t.min() < 0 or t.max() >= p.shape[-1]):
        raise ContractError(f"target outside vocabulary of size {p.shape[-1]}")
    picked = p[np.arange(len(t)), t]
    return -np.log(np.maximum(picked, PROB_FLOOR))


def _resolve_positions(loss_positions, T: int) -> tuple[int, ...]:
    if isinstance(loss_positions, str):
        if loss_positions == "all":
            return tuple(range(T))
        if loss_positions == "last":
            return (T - 1,)
        raise ContractError(f"unknown loss position spec {loss_positions!r}")
    positions = tuple(sorted(set(int(p) for p in loss_positions)))
    for p in positions:
        if not 0 <= p < T:
            raise ContractError(f"loss position {p} outside window of length {T}")
    return positions


def forward_window(
    params: ModelParams,
    chars,
    targets=None,
    loss_positions: Iterable[int] | str = "all",
    state0: LstmState | None = None,
    from_initial=None,
) -> ForwardTrace:
    """Run the network over one window and record losses at ``loss_positions``.

    ``chars`` and ``targets`` have shape ``(T,)`` or ``(B, T)``; ``targets[t]``
    is the character that should be predicted after consuming ``chars[t]``.
    Negative targets mean "undefined" and are only allowed off the loss
    positions.

    With ``state0=None`` every lane starts from the learned ``(h0, c0)``.
    Otherwise ``state0`` is taken as a constant, except on lanes flagged in
    ``from_initial`` (a boolean per lane), whose start state is declared to be
    ``(h0, c0)`` and so passes gradient back to it.
    """
    chars = np.asarray(chars, dtype=np.int64)
    batched = chars.ndim == 2
    chars2 = chars if batched else chars[None, :]
    B, T = chars2.shape
    if T < 1:
        raise ContractError("empty window")
    _check_chars(params, chars2)
    positions = _resolve_positions(loss_positions, T)

    if targets is None:
        targets2 = np.full((B, T), -1, dtype=np.int64)
    else:
        targets2 = np.asarray(targets, dtype=np.int64).reshape(B, -1)
        if targets2.shape[1] != T:
            raise ContractError(f"targets length {targets2.shape[1]} does not match window length {T}")
    for p in positions:
        if np.any(targets2[:, p] < 0):
            raise ContractError(f"missing target at loss position {p}")
    _check_chars(params, targets2[:, list(positions)])

    H = params.H
    if state0 is None:
        h_init = np.tile(params.h0, (B, 1))
        c_init = np.tile(params.c0, (B, 1))
        mask = np.ones(B, dtype=bool)
    else:
        h_init = np.array(state0.h, dtype=np.float64).reshape(B, H)
        c_init = np.array(state0.c, dtype=np.float64).reshape(B, H)
        mask = np.zeros(B, dtype=bool) if from_initial is None else np.asarray(from_initial, dtype=bool).reshape(B)

    arrays = {k: np.empty((T, B, H)) for k in ("i", "f", "o", "g", "c", "h")}
    h, c = h_init, c_init
    for t in range(T):
        i, f, o, g, c, h = _step(params, h, c, chars2[:, t])
        for k, v in zip(("i", "f", "o", "g", "c", "h"), (i, f, o, g, c, h)):
            arrays[k][t] = v

    probs = np.empty((len(positions), B, params.V))
    loss_values = np.empty((len(positions), B))
    for k, p in enumerate(positions):
        probs[k] = softmax(logits_of(params, arrays["h"][p]))
        loss_values[k] = cross_entropy(probs[k], targets2[:, p])

    return ForwardTrace(
        params=params, chars=chars2, targets=targets2, positions=positions,
        h_init=h_init, c_init=c_init, from_initial=mask,
        probs=probs, loss_values=loss_values, batched=batched, **arrays,
    )


def restrict_losses(trace: ForwardTrace, positions: Iterable[int]) -> ForwardTrace:
    """Same forward pass, with only a subset of its recorded losses kept."""
    keep = tuple(sorted(set(int(p) for p in positions)))
    idx = []
    for p in keep:
        if p not in trace.positions:
            raise ContractError(f"position {p} carries no loss in this trace")
        idx.append(trace.positions.index(p))
    return ForwardTrace(
        params=trace.params, chars=trace.chars, targets=trace.targets, positions=keep,
        h_init=trace.h_init, c_init=trace.c_init, from_initial=trace.from_initial,
        i=trace.i, f=trace.f, o=trace.o, g=trace.g, c=trace.c, h=trace.h,
        probs=trace.probs[idx], loss_values=trace.loss_values[idx], batched=trace.batched,
    )


def backward_window(params: ModelParams, trace: ForwardTrace) -> Gradients:
    """Exact gradient of ``trace.mean_loss`` truncated at the window start."""
    if params.shape != trace.params.shape or not np.array_equal(params.flat, trace.params.flat):
        raise ContractError("trace was produced with different parameters")
    V, H = params.shape
    B, T = trace.chars.shape
    n_loss = len(trace.positions) * B
    grads = params.zeros_like()
    if n_loss == 0:
        return grads

    # dlogits at each scored position, already divided by the number of terms
    dlogits = {}
    for k, p in enumerate(trace.positions):
        d = trace.probs[k].copy()
        d[np.arange(B), trace.targets[:, p]] -= 1.0
        d /= n_loss
        dlogits[p] = d
        grads.Wy += d.T @ trace.h[p]
        grads.by += d.sum(axis=0)

    eye = np.eye(V)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    dpre = np.empty((B, 4 * H))
    for t in range(T - 1, -1, -1):
        dh = dh_next
        if t in dlogits:
            dh = dh + dlogits[t] @ params.Wy
        i, f, o, g, c = trace.i[t], trace.f[t], trace.o[t], trace.g[t], trace.c[t]
        h_prev = trace.h_init if t == 0 else trace.h[t - 1]
        c_prev = trace.c_init if t == 0 else trace.c[t - 1]
        tc = np.tanh(c)
        do = dh * tc
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dpre[:, :H] = dc * g * i * (1.0 - i)
        dpre[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
        dpre[:, 2 * H:3 * H] = do * o * (1.0 - o)
        dpre[:, 3 * H:] = dc * i * (1.0 - g * g)
        grads.W += dpre.T @ eye[trace.chars[:, t]]
        grads.U += dpre.T @ h_prev
        grads.b += dpre.sum(axis=0)
        dh_next = dpre @ params.U
        dc_next = dc * f

    m = trace.from_initial
    if m.any():
        grads.h0 += dh_next[m].sum(axis=0)
        grads.c0 += dc_next[m].sum(axis=0)
    return grads


def finite_difference_grad(
    params: ModelParams, loss_fn: Callable[[ModelParams], float], step: float = 1e-5
) -> Gradients:
    """Central differences of ``loss_fn`` in every coordinate of ``params``."""
    probe = params.copy()
    grads = params.zeros_like()
    flat = probe.flat
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + step
        up = loss_fn(probe)
        flat[k] = orig - step
        down = loss_fn(probe)
        flat[k] = orig
        grads.flat[k] = (up - down) / (2.0 * step)
    return grads


def window_loss(params: ModelParams, chars, targets, loss_positions="all",
                state0: LstmState | None = None) -> float:
    """Mean window loss; convenient as a ``loss_fn`` for :func:`finite_difference_grad`."""
    return forward_window(params, chars, targets, loss_positions, state0).mean_loss


def max_relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def gradient_suite(n_configs: int = 20, seed: int = 0, step: float = 1e-5) -> list[dict]:
    """Compare analytic and finite-difference gradients on random tiny models.

    Draws V in 3..6, H in 2..5 and a window length in 1..4 per configuration,
    perturbs every parameter (including h0 and c0) away from zero and checks
    both the all-positions and the final-position loss. Returns one dict per
    (configuration, placement) with the max relative error.
    """
    rng = Rng(seed)
    results = []
    for n in range(n_configs):
        V = rng.uniform_int(3, 6)
        H = rng.uniform_int(2, 5)
        T = rng.uniform_int(1, 4)
        params = init_params(rng.next_u64(), V, H)
        params.flat[:] += rng.uniform(-0.5, 0.5, params.flat.size)
        chars = [rng.uniform_int(0, V - 1) for _ in range(T)]
        targets = [rng.uniform_int(0, V - 1) for _ in range(T)]
        for placement in ("all", "last"):
            analytic = backward_window(params, forward_window(params, chars, targets, placement))
            numeric = finite_difference_grad(
                params, lambda p: window_loss(p, chars, targets, placement), step)
            results.append(dict(config=n, V=V, H=H, k2=T, placement=placement,
                                max_rel_error=max_relative_error(analytic.flat, numeric.flat)))
    return results
