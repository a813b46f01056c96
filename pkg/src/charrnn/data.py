"""Corpus loading, character vocabulary, train/test split and batch lanes."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContractError


def sample_corpus_path() -> Path:
    """Path of the bundled sample corpus (Macbeth, Project Gutenberg text)."""
    return Path(str(resources.files("charrnn") / "corpus" / "macbeth.txt"))


def load_corpus(path) -> str:
    """Read a UTF-8 text file.

    Raises ``OSError`` for missing files, ``ValueError`` with the failing byte
    offset for undecodable content, and ``ConfigError`` for an empty file.
    """
    path = Path(path)
    raw = path.read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ValueError(f"{path}: undecodable byte at offset {exc.start}") from exc
    if not text:
        raise ConfigError(f"{path}: corpus too small (empty file)")
    return text


@dataclass(frozen=True)
class Vocab:
    """Distinct characters in first-appearance order."""

    symbols: tuple[str, ...]
    index: dict = field(compare=False, repr=False)

    @property
    def size(self) -> int:
        return len(self.symbols)

    def __len__(self):
        return len(self.symbols)

    def encode(self, text: str) -> np.ndarray:
        try:
            return np.fromiter((self.index[ch] for ch in text), dtype=np.int64, count=len(text))
        except KeyError as exc:
            raise ContractError(f"character {exc.args[0]!r} not in vocabulary") from None

    def decode(self, ids) -> str:
        return "".join(self.symbols[int(i)] for i in ids)


def build_vocab(text: str) -> Vocab:
    if not text:
        raise ContractError("cannot build a vocabulary from empty text")
    symbols = tuple(dict.fromkeys(text))
    return Vocab(symbols, {ch: k for k, ch in enumerate(symbols)})


def split_corpus(text: str, test_fraction: float) -> tuple[str, str]:
    """Split off the final ``test_fraction`` of ``text`` as the test set."""
    if not 0 < test_fraction < 0.5:
        raise ContractError(f"test_fraction must lie in (0, 0.5), got {test_fraction}")
    n_test = int(round(len(text) * test_fraction))
    return text[:len(text) - n_test], text[len(text) - n_test:]


@dataclass
class Corpus:
    """Encoded train and test streams sharing a vocabulary built from the full text."""

    vocab: Vocab
    train: np.ndarray
    test: np.ndarray

    @classmethod
    def from_text(cls, text: str, test_fraction: float = 0.01) -> Corpus:
        vocab = build_vocab(text)
        train, test = split_corpus(text, test_fraction)
        return cls(vocab, vocab.encode(train), vocab.encode(test))

    @classmethod
    def from_path(cls, path, test_fraction: float = 0.01) -> Corpus:
        return cls.from_text(load_corpus(path), test_fraction)

    @property
    def V(self) -> int:
        return self.vocab.size


def make_lanes(train, lane_count: int, k2: int | None = None) -> np.ndarray:
    """Cut ``train`` into ``lane_count`` contiguous equal-length streams.

    Returns a ``(lane_count, L)`` array; the last ``len(train) % lane_count``
    characters are dropped. With ``k2`` given, every lane must hold at least
    one window plus its target (``k2 + 1`` characters).
    """
    train = np.asarray(train)
    if lane_count < 1:
        raise ContractError(f"lane_count must be positive, got {lane_count}")
    L = len(train) // lane_count
    need = 1 if k2 is None else k2 + 1
    if L < need:
        raise ConfigError(
            f"training text of {len(train)} characters is too small for {lane_count} lanes; "
            f"need at least {lane_count * need} characters"
        )
    return train[:L * lane_count].reshape(lane_count, L)
