"""Character-level LSTM training schedules with truncated BPTT, from scratch in numpy."""

from .data import Corpus, Vocab, build_vocab, load_corpus, make_lanes, sample_corpus_path, split_corpus
from .errors import ConfigError, ContractError
from .model import (
    ForwardTrace,
    Gradients,
    LstmState,
    ModelParams,
    backward_window,
    cross_entropy,
    finite_difference_grad,
    forward_window,
    init_params,
    lstm_step,
)
from .numkernel import Rng, matvec, rng_uniform_int, softmax
from .optim import AdamState, adam_init, adam_step
from .schedules import (
    LaneCursors,
    ScheduleConfig,
    ScheduleTrainer,
    eval_streaming,
    eval_windowed,
    next_batch,
    train_step,
)

__version__ = "0.1.0"
