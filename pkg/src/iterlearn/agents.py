"""The three agent kinds and their training protocols.

* :class:`OilmAgent` -- decoder network, encoder derived by obversion.
* :class:`AilmAgent` -- encoder and decoder networks, also trained together
  as an autoencoder.
* :class:`OneWayAgent` -- encoder network only.

Every agent exposes ``language()`` (its full meaning -> signal table) and,
where it has a decoder, ``decode_block(signals)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import ConfigError, NumericError, StateError
from .lang import LanguageTable, bits_to_indices, decide, indices_to_bits
from .neural import Mlp, TrainConfig, forward, forward_chunked, init_glorot, map_indices

OBVERSION_MAX_N = 13

AUTO_DIRECTIONS = {"m2m": K.M2M, "s2s": K.S2S, "both": K.BOTH}


@dataclass
class TrainStats:
    """Per-epoch mean losses (``None`` for networks the agent lacks) and step counts."""

    loss_dec: np.ndarray | None = None
    loss_enc: np.ndarray | None = None
    loss_auto: np.ndarray | None = None
    steps_dec: int = 0
    steps_enc: int = 0
    steps_auto: int = 0


@dataclass(eq=False)
class OilmAgent:
    decoder: Mlp
    encoder_table: LanguageTable | None = None
    stats: TrainStats = field(default_factory=TrainStats)

    kind = "oilm"

    @property
    def n(self) -> int:
        return self.decoder.n_in

    def language(self) -> LanguageTable:
        if self.encoder_table is None:
            raise StateError("O-ILM agent has no encoder until it is obverted")
        return self.encoder_table

    def decode_block(self, signals: np.ndarray) -> np.ndarray:
        return decide(forward_chunked(self.decoder, signals))

    def decode_indices(self, signal_index: np.ndarray) -> np.ndarray:
        return map_indices(self.decoder, signal_index)


def _tabulate(encoder: Mlp) -> LanguageTable:
    n = encoder.n_in
    if encoder.n_out != n:
        raise ConfigError("encoder input and output sizes differ")
    return LanguageTable(n, map_indices(encoder, np.arange(1 << n, dtype=np.int64)))


@dataclass(eq=False)
class AilmAgent:
    encoder: Mlp
    decoder: Mlp
    stats: TrainStats = field(default_factory=TrainStats)
    _table: LanguageTable | None = field(default=None, repr=False)

    kind = "ailm"

    @property
    def n(self) -> int:
        return self.encoder.n_in

    def language(self) -> LanguageTable:
        # cached: only valid once the agent has stopped learning
        if self._table is None:
            self._table = _tabulate(self.encoder)
        return self._table

    def decode_block(self, signals: np.ndarray) -> np.ndarray:
        return decide(forward_chunked(self.decoder, signals))

    def decode_indices(self, signal_index: np.ndarray) -> np.ndarray:
        return map_indices(self.decoder, signal_index)


@dataclass(eq=False)
class OneWayAgent:
    encoder: Mlp
    stats: TrainStats = field(default_factory=TrainStats)
    _table: LanguageTable | None = field(default=None, repr=False)

    kind = "oneway"
    decode_block = None

    @property
    def n(self) -> int:
        return self.encoder.n_in

    def language(self) -> LanguageTable:
        if self._table is None:
            self._table = _tabulate(self.encoder)
        return self._table


def encode(agent, meaning) -> np.ndarray:
    if isinstance(agent, OilmAgent):
        return agent.language().encode(meaning)
    return decide(forward(agent.encoder, meaning))


def encode_block(agent, meanings: np.ndarray) -> np.ndarray:
    """Signals for a ``(batch, n)`` block of meanings without materializing the whole table."""
    if isinstance(agent, OilmAgent) or not hasattr(agent, "encoder"):
        lang = agent.language()
        return indices_to_bits(lang.signal_index[bits_to_indices(meanings)], lang.n)
    return decide(forward_chunked(agent.encoder, meanings))


def decode(agent, signal) -> np.ndarray:
    if agent.decode_block is None:
        raise StateError(f"{agent.kind} agents have no decoder")
    return decide(forward(agent.decoder, signal))


def obvert(decoder: Mlp, n: int | None = None, allow_large: bool = False) -> LanguageTable:
    """Encoder table picking, per meaning, the signal the decoder finds most probable.

    Costs ``2**(2n)`` pair products; refused above n=13 unless ``allow_large``.
    Exact ties go to the lowest signal index.
    """
    n = decoder.n_in if n is None else n
    if decoder.n_in != n or decoder.n_out != n:
        raise ConfigError(f"decoder sizes ({decoder.n_in}, {decoder.n_out}) do not match n={n}")
    if n > OBVERSION_MAX_N and not allow_large:
        raise ConfigError(
            f"obversion at n={n} needs a table of 2^(2n) = {1 << (2 * n):,} probabilities; "
            f"the cap is n <= {OBVERSION_MAX_N}"
        )
    signals = indices_to_bits(np.arange(1 << n), n)
    probs = np.ascontiguousarray(forward(decoder, signals))
    return LanguageTable(n, K.obvert_table(probs, n))


def naive_agent(kind: str, n: int, hidden: int, rng: np.random.Generator):
    """A freshly initialised agent; O-ILM agents are obverted from their untrained decoder."""
    if kind == "oilm":
        agent = OilmAgent(init_glorot(n, hidden, n, rng))
        agent.encoder_table = obvert(agent.decoder, n)
        return agent
    if kind == "ailm":
        enc = init_glorot(n, hidden, n, rng)
        dec = init_glorot(n, hidden, n, rng)
        return AilmAgent(enc, dec)
    if kind == "oneway":
        return OneWayAgent(init_glorot(n, hidden, n, rng))
    raise ConfigError(f"unknown agent kind {kind!r}")


def naive_pupil(kind: str, n: int, hidden: int, rng: np.random.Generator):
    """Like :func:`naive_agent` but without the obversion an O-ILM pupil does only after training."""
    if kind == "oilm":
        return OilmAgent(init_glorot(n, hidden, n, rng))
    return naive_agent(kind, n, hidden, rng)


# -- training sets -----------------------------------------------------------


@dataclass(frozen=True)
class BottleneckSet:
    meanings: np.ndarray
    signals: np.ndarray

    def __len__(self) -> int:
        return len(self.meanings)

    @property
    def meaning_index(self) -> np.ndarray:
        return bits_to_indices(self.meanings)


@dataclass(frozen=True)
class AutoSet:
    meanings: np.ndarray
    signals: np.ndarray
    mode: str = "shared"

    def __len__(self) -> int:
        return len(self.meanings)


def _tutor_table(tutor) -> LanguageTable:
    return tutor if isinstance(tutor, LanguageTable) else tutor.language()


def make_bottleneck(tutor, n: int, size: int, rng: np.random.Generator) -> BottleneckSet:
    """``size`` distinct random meanings paired with the tutor's signals for them."""
    if not 1 <= size <= 1 << n:
        raise ConfigError(f"bottleneck size {size} outside [1, 2^{n}]")
    table = _tutor_table(tutor)
    idx = np.sort(rng.choice(1 << n, size=size, replace=False))
    return BottleneckSet(indices_to_bits(idx, n), indices_to_bits(table.signal_index[idx], n))


def make_auto_set(
    tutor, bottleneck: BottleneckSet, n: int, mode: str, size: int, rng: np.random.Generator
) -> AutoSet:
    """Meanings for unsupervised training, with the tutor's signals for the s2s direction."""
    if mode == "shared":
        return AutoSet(bottleneck.meanings, bottleneck.signals, "shared")
    if mode != "independent":
        raise ConfigError(f"unknown auto_mode {mode!r}")
    if not 1 <= size <= 1 << n:
        raise ConfigError(f"auto set size {size} outside [1, 2^{n}]")
    table = _tutor_table(tutor)
    idx = np.sort(rng.choice(1 << n, size=size, replace=False))
    return AutoSet(indices_to_bits(idx, n), indices_to_bits(table.signal_index[idx], n), "independent")


def _epoch_orders(size: int, epochs: int, rng: np.random.Generator) -> np.ndarray:
    return np.stack([rng.permutation(size) for _ in range(epochs)]).astype(np.int64)


def _f64(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def _train_pairs(net: Mlp, inputs, targets, cfg: TrainConfig, rng) -> tuple[np.ndarray, int]:
    order = _epoch_orders(len(inputs), cfg.epochs, rng)
    losses = np.zeros(cfg.epochs)
    steps = K.train_supervised(net.params, _f64(inputs), _f64(targets), order, cfg.eta, cfg.loss_kind, losses)
    if steps < 0:
        raise NumericError("non-finite loss or gradient during supervised training")
    net.steps += steps
    return losses, steps


def oilm_train(
    pupil: OilmAgent, bottleneck: BottleneckSet, cfg: TrainConfig, rng: np.random.Generator
) -> OilmAgent:
    """Train the decoder on (signal -> meaning) pairs, reshuffled each epoch, then obvert."""
    losses, steps = _train_pairs(pupil.decoder, bottleneck.signals, bottleneck.meanings, cfg, rng)
    pupil.stats = TrainStats(loss_dec=losses, steps_dec=steps)
    pupil.encoder_table = obvert(pupil.decoder, pupil.n)
    return pupil


def oneway_train(
    pupil: OneWayAgent, bottleneck: BottleneckSet, cfg: TrainConfig, rng: np.random.Generator
) -> OneWayAgent:
    losses, steps = _train_pairs(pupil.encoder, bottleneck.meanings, bottleneck.signals, cfg, rng)
    pupil.stats = TrainStats(loss_enc=losses, steps_enc=steps)
    pupil._table = None
    return pupil


def ailm_train(
    pupil: AilmAgent,
    bottleneck: BottleneckSet,
    auto: AutoSet,
    r: int,
    cfg: TrainConfig,
    rng: np.random.Generator,
    auto_rng: np.random.Generator | None = None,
    direction: str = "m2m",
) -> AilmAgent:
    """Mixed supervised/unsupervised training.

    Each epoch shuffles two copies of the bottleneck. For every position
    the decoder takes one step from the first copy, the encoder one step
    from the second, then ``r`` autoencoder steps use items drawn with
    replacement from ``auto``. ``direction`` picks the chain: meaning ->
    meaning (``m2m``), signal -> signal (``s2s``) or one of each per draw
    (``both``).
    """
    if direction not in AUTO_DIRECTIONS:
        raise ConfigError(f"unknown autoencoder direction {direction!r}")
    if r < 0:
        raise ConfigError("r must be >= 0")
    auto_rng = rng if auto_rng is None else auto_rng
    size = len(bottleneck)
    orders_dec = np.empty((cfg.epochs, size), dtype=np.int64)
    orders_enc = np.empty((cfg.epochs, size), dtype=np.int64)
    for e in range(cfg.epochs):
        orders_dec[e] = rng.permutation(size)
        orders_enc[e] = rng.permutation(size)
    if r > 0 and len(auto) == 0:
        raise ConfigError("autoencoder set is empty")
    draws = auto_rng.integers(0, max(len(auto), 1), size=(cfg.epochs, size, r)).astype(np.int64)
    losses = np.zeros((cfg.epochs, 3))
    counts = np.zeros(3, dtype=np.int64)
    ok = K.train_autoencoded(
        pupil.encoder.params, pupil.decoder.params,
        _f64(bottleneck.meanings), _f64(bottleneck.signals),
        orders_dec, orders_enc,
        _f64(auto.meanings), _f64(auto.signals), draws,
        AUTO_DIRECTIONS[direction], cfg.eta, cfg.loss_kind, losses, counts,
    )
    if not ok:
        raise NumericError("non-finite loss or gradient during A-ILM training")
    pupil.stats = TrainStats(
        loss_dec=losses[:, 0].copy(),
        loss_enc=losses[:, 1].copy(),
        loss_auto=losses[:, 2].copy() if r > 0 else None,
        steps_dec=int(counts[0]),
        steps_enc=int(counts[1]),
        steps_auto=int(counts[2]),
    )
    pupil._table = None
    return pupil
