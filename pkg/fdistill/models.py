"""
Tabular autoregressive sequence models over a small vocabulary.

Extended Summary
----------------
A sequence model assigns a conditional distribution over the next token to every
prefix of a fixed-length token sequence. The tabular model stores one row of logits
per (position, context) pair where the context is the last ``order`` tokens of the
prefix, so the ``order`` parameter controls the capacity of the model.

Sequences have exactly ``horizon`` tokens, each an integer in ``0..V-1``; there is
no end-of-sequence token.

Routine Listings
----------------
- SequenceModel
- TabularARModel
- enumerate_sequences()
- enumeration_cap()
- uniform_model()
- forced_model()
- random_model()
- bimodal_teacher()
- interpolate()

"""

import itertools
import math
import os
from abc import ABC, abstractmethod
from typing import Optional, TypeAlias, Union

import numpy as np
import numpy.typing as npt
from scipy.special import log_softmax

from fdistill.divergences import ProbVector

# TypeAlias deprecated. Move to `type` in py3.12+
#: A fixed-length sequence of integer tokens.
Sequence: TypeAlias = tuple[int, ...]

#: Anything numpy will turn into a random generator.
SeedLike: TypeAlias = Union[int, np.random.Generator, np.random.SeedSequence, None]

#: Default upper limit on the number of sequences enumerated by exact oracles.
DEFAULT_ENUM_CAP = 10**7

ENUM_CAP_ENV = "FDISTILL_ENUM_CAP"


class EnumerationCapError(ValueError):
    """Raised when an exhaustive computation would exceed the enumeration cap."""


def enumeration_cap() -> int:
    """
    Get the enumeration cap, honouring the ``FDISTILL_ENUM_CAP`` environment variable.

    Returns
    -------
    int
        maximum number of sequences exact oracles may enumerate

    Raises
    ------
    ValueError
        If the environment variable is set but is not a positive integer.
    """
    raw = os.environ.get(ENUM_CAP_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_ENUM_CAP
    try:
        cap = int(raw)
    except ValueError as exc:
        msg = f"{ENUM_CAP_ENV} must be a positive integer but is {raw!r}."
        raise ValueError(msg) from exc
    if cap < 1:
        msg = f"{ENUM_CAP_ENV} must be a positive integer but is {raw!r}."
        raise ValueError(msg)
    return cap


def check_enumerable(vocab_size: int, horizon: int) -> int:
    """
    Check that the sequence space is small enough to enumerate.

    Parameters
    ----------
    vocab_size : int
        vocabulary size V
    horizon : int
        sequence length T

    Returns
    -------
    int
        the number of sequences V**T

    Raises
    ------
    EnumerationCapError
        If V**T exceeds the enumeration cap.
    """
    n_seqs = vocab_size**horizon
    cap = enumeration_cap()
    if n_seqs > cap:
        msg = (
            f"Enumerating {vocab_size}^{horizon} = {n_seqs} sequences exceeds the "
            f"enumeration cap of {cap}. Reduce the scale or raise {ENUM_CAP_ENV}."
        )
        raise EnumerationCapError(msg)
    return n_seqs


def enumerate_sequences(vocab_size: int, horizon: int) -> list[Sequence]:
    """
    List every sequence of a given length in lexicographic order.

    Parameters
    ----------
    vocab_size : int
        vocabulary size V
    horizon : int
        sequence length T

    Returns
    -------
    list of Sequence
        all V**T sequences, lexicographically ordered

    Raises
    ------
    EnumerationCapError
        If V**T exceeds the enumeration cap.

    Examples
    --------
    >>> enumerate_sequences(2, 2)
    [(0, 0), (0, 1), (1, 0), (1, 1)]
    """
    check_enumerable(vocab_size, horizon)
    return list(itertools.product(range(vocab_size), repeat=horizon))


def _draw(probs: ProbVector, rng: np.random.Generator) -> int:
    """Draw one categorical token by inverting the cumulative distribution."""
    cumulative = np.cumsum(probs)
    threshold = rng.random() * cumulative[-1]
    token = int(np.searchsorted(cumulative, threshold, side="right"))
    # Never land on a zero-probability tail token through rounding.
    last_nonzero = int(np.flatnonzero(probs)[-1])
    return min(token, last_nonzero)


class SequenceModel(ABC):
    """
    Abstract Base Class for an autoregressive model over fixed-length sequences.

    Subclasses provide the conditional distribution of the next token; sampling,
    scoring and decoding are built on top of it.

    Attributes
    ----------
    vocab_size : int
        size V of the vocabulary, tokens are ``0..V-1``
    horizon : int
        length T of every sequence

    See Also
    --------
    TabularARModel : The concrete tabular implementation.
    """

    vocab_size: int
    horizon: int

    @abstractmethod
    def cond_dist(
        self, prefix: Sequence, position: Optional[int] = None
    ) -> ProbVector:
        """
        Get the distribution of the next token given a prefix.

        Parameters
        ----------
        prefix : Sequence
            tokens generated so far
        position : int or None, default=None
            1-based position of the token to predict, must equal ``len(prefix) + 1``

        Returns
        -------
        ProbVector
            distribution over the vocabulary
        """

    def _check_position(self, prefix: Sequence, position: Optional[int]) -> int:
        """Validate a (prefix, position) pair, returning the position."""
        if position is None:
            position = len(prefix) + 1
        if not 1 <= position <= self.horizon:
            msg = (
                f"Position {position} is out of range for a model of horizon "
                f"{self.horizon}."
            )
            raise ValueError(msg)
        if len(prefix) != position - 1:
            msg = (
                f"A prefix of length {len(prefix)} cannot precede position {position}."
            )
            raise ValueError(msg)
        return position

    def check_sequence(self, seq: Sequence) -> None:
        """Validate length and token range of a full sequence."""
        if len(seq) != self.horizon:
            msg = f"Sequence {seq} does not have length {self.horizon}."
            raise ValueError(msg)
        if any(not 0 <= tok < self.vocab_size for tok in seq):
            msg = f"Sequence {seq} has tokens outside 0..{self.vocab_size - 1}."
            raise ValueError(msg)

    def seq_logprob(self, seq: Sequence) -> float:
        """
        Calculate the log-probability of a full sequence by the chain rule.

        Parameters
        ----------
        seq : Sequence
            sequence of length T

        Returns
        -------
        float
            sum over positions of the log conditional probability, may be -inf

        Examples
        --------
        >>> uniform_model(2, 3).seq_logprob((0, 1, 1))
        -2.0794415416798357
        """
        self.check_sequence(seq)
        total = 0.0
        with np.errstate(divide="ignore"):
            for t in range(self.horizon):
                total += float(np.log(self.cond_dist(seq[:t], t + 1)[seq[t]]))
        return total

    def sample(self, rng: np.random.Generator) -> Sequence:
        """
        Draw one sequence by ancestral sampling.

        Parameters
        ----------
        rng : np.random.Generator
            random generator owned by the caller, advanced by T draws

        Returns
        -------
        Sequence
            the sampled sequence
        """
        seq: list[int] = []
        for t in range(1, self.horizon + 1):
            seq.append(_draw(self.cond_dist(tuple(seq), t), rng))
        return tuple(seq)

    def sample_many(self, n_samples: int, rng: np.random.Generator) -> list[Sequence]:
        """
        Draw several independent sequences.

        Parameters
        ----------
        n_samples : int
            number of sequences to draw
        rng : np.random.Generator
            random generator owned by the caller

        Returns
        -------
        list of Sequence
            the sampled sequences in draw order
        """
        return [self.sample(rng) for _ in range(n_samples)]

    def beam_search(self, width: int) -> Sequence:
        """
        Decode a high-probability sequence by beam search.

        Parameters
        ----------
        width : int
            number of hypotheses kept after each position

        Returns
        -------
        Sequence
            the best hypothesis of length T

        Raises
        ------
        ValueError
            If width is less than 1.

        Notes
        -----
        Hypotheses are ranked by total log-probability; ties are broken towards the
        lexicographically smallest token sequence, so a width of at least V**T
        returns the exact argmax sequence with the same tie rule.
        """
        if width < 1:
            msg = f"Beam width must be at least 1 but got {width}."
            raise ValueError(msg)
        beams: list[tuple[Sequence, float]] = [((), 0.0)]
        for t in range(1, self.horizon + 1):
            candidates = []
            for prefix, score in beams:
                with np.errstate(divide="ignore"):
                    log_probs = np.log(self.cond_dist(prefix, t))
                candidates.extend(
                    (prefix + (tok,), score + float(log_probs[tok]))
                    for tok in range(self.vocab_size)
                )
            candidates.sort(key=lambda cand: (-cand[1], cand[0]))
            beams = candidates[:width]
        return beams[0][0]


class TabularARModel(SequenceModel):
    """
    Class to represent an order-k Markov autoregressive model with tabulated logits.

    Parameters
    ----------
    vocab_size : int
        size V of the vocabulary, at least 2
    horizon : int
        sequence length T, at least 1
    order : int
        Markov context length k with ``0 <= k < T``
    logits : ArrayLike or None, default=None
        logits table of shape ``(n_rows, V)``, all zeros (uniform) when None
    stationary : bool, default=False
        share one context table across all positions whose context is full length

    Attributes
    ----------
    vocab_size : int
        size V of the vocabulary
    horizon : int
        sequence length T
    order : int
        Markov context length k
    stationary : bool
        whether full-context positions share a table
    logits : NDArray
        read-only logits table, one row per (position, context)

    Raises
    ------
    ValueError
        If the sizes are invalid or the logits table has the wrong shape.

    Notes
    -----
    Rows are laid out position by position. Position t uses a block of
    ``V**min(k, t-1)`` rows indexed by the base-V value of its context (most
    significant token first). With ``stationary=True`` every position t > k uses
    the same block.

    Examples
    --------
    >>> model = TabularARModel(2, 3, order=1)
    >>> model.logits.shape
    (5, 2)
    >>> model.cond_dist((0, 1), 3)
    array([0.5, 0.5])
    """

    def __init__(
        self,
        vocab_size: int,
        horizon: int,
        order: int,
        logits: Optional[npt.ArrayLike] = None,
        stationary: bool = False,
    ) -> None:
        if vocab_size < 2:  # noqa: PLR2004
            msg = f"Vocabulary size must be at least 2 but got {vocab_size}."
            raise ValueError(msg)
        if horizon < 1:
            msg = f"Horizon must be at least 1 but got {horizon}."
            raise ValueError(msg)
        if not 0 <= order < horizon:
            msg = f"Order must satisfy 0 <= order < horizon={horizon} but got {order}."
            raise ValueError(msg)

        self.vocab_size = vocab_size
        self.horizon = horizon
        self.order = order
        self.stationary = stationary
        self._blocks, self.n_rows = self._table_layout()

        if logits is None:
            table = np.zeros((self.n_rows, vocab_size))
        else:
            table = np.array(logits, dtype=np.float64)
        if table.shape != (self.n_rows, vocab_size):
            msg = (
                f"Logits table must have shape {(self.n_rows, vocab_size)} "
                f"but has shape {table.shape}."
            )
            raise ValueError(msg)
        if np.any(np.isnan(table)) or np.any(np.isposinf(table)):
            msg = "Logits cannot contain NaN or +inf."
            raise ValueError(msg)

        table.setflags(write=False)
        self._logits = table
        self._log_probs = log_softmax(table, axis=1)
        self._log_probs.setflags(write=False)
        self._probs = np.exp(self._log_probs)
        self._probs.setflags(write=False)

    def _table_layout(self) -> tuple[list[tuple[int, int]], int]:
        """Work out the (row offset, context length) of every position."""
        blocks = []
        offset = 0
        shared: Optional[int] = None
        for t in range(1, self.horizon + 1):
            ctx_len = min(self.order, t - 1)
            if self.stationary and ctx_len == self.order:
                if shared is None:
                    shared = offset
                    offset += self.vocab_size**ctx_len
                blocks.append((shared, ctx_len))
            else:
                blocks.append((offset, ctx_len))
                offset += self.vocab_size**ctx_len
        return blocks, offset

    def __repr__(self) -> str:
        """Return a representation of a TabularARModel instance."""
        return (
            "TabularARModel("
            f"vocab_size={self.vocab_size}, "
            f"horizon={self.horizon}, "
            f"order={self.order}, "
            f"stationary={self.stationary}"
            ")"
        )

    def __eq__(self, other: object) -> bool:
        """Check equality of models based on layout and logits."""
        if not isinstance(other, TabularARModel):
            return NotImplemented
        return self.same_layout(other) and np.array_equal(self._logits, other._logits)

    def same_layout(self, other: "TabularARModel") -> bool:
        """Check whether another model has an identical logits layout."""
        return (
            self.vocab_size,
            self.horizon,
            self.order,
            self.stationary,
        ) == (other.vocab_size, other.horizon, other.order, other.stationary)

    @property
    def logits(self) -> npt.NDArray[np.float64]:
        """Get the read-only logits table."""
        return self._logits

    @property
    def probs(self) -> npt.NDArray[np.float64]:
        """Get the read-only table of conditional probabilities, one row per context."""
        return self._probs

    @property
    def log_probs(self) -> npt.NDArray[np.float64]:
        """Get the read-only table of conditional log-probabilities."""
        return self._log_probs

    def with_logits(self, logits: npt.ArrayLike) -> "TabularARModel":
        """
        Build a model with the same layout and new logits.

        Parameters
        ----------
        logits : ArrayLike
            replacement logits table

        Returns
        -------
        TabularARModel
            new model; this one is left untouched
        """
        return TabularARModel(
            self.vocab_size,
            self.horizon,
            self.order,
            logits=logits,
            stationary=self.stationary,
        )

    def row_index(self, prefix: Sequence) -> int:
        """
        Get the logits row used to predict the token after a prefix.

        Parameters
        ----------
        prefix : Sequence
            tokens generated so far, shorter than the horizon

        Returns
        -------
        int
            row of the logits table
        """
        offset, ctx_len = self._blocks[len(prefix)]
        index = 0
        for tok in prefix[len(prefix) - ctx_len :]:
            index = index * self.vocab_size + tok
        return offset + index

    def cond_dist(
        self, prefix: Sequence, position: Optional[int] = None
    ) -> ProbVector:
        """
        Get the distribution of the next token given a prefix.

        Parameters
        ----------
        prefix : Sequence
            tokens generated so far
        position : int or None, default=None
            1-based position of the token to predict, must equal ``len(prefix) + 1``

        Returns
        -------
        ProbVector
            softmax of the logits row for this position and context (read-only)

        Raises
        ------
        ValueError
            If the position is out of range or inconsistent with the prefix.
        """
        self._check_position(prefix, position)
        return self._probs[self.row_index(prefix)]

    def _table_rows(self, position: int) -> npt.NDArray[np.int_]:
        """Rows used at a position for every prefix in lexicographic order."""
        if not 1 <= position <= self.horizon:
            msg = f"Position {position} is out of range for horizon {self.horizon}."
            raise ValueError(msg)
        offset, ctx_len = self._blocks[position - 1]
        n_prefixes = self.vocab_size ** (position - 1)
        return offset + np.arange(n_prefixes) % (self.vocab_size**ctx_len)

    def cond_table(self, position: int) -> npt.NDArray[np.float64]:
        """
        Tabulate the conditional distribution at a position for every prefix.

        Parameters
        ----------
        position : int
            1-based position t

        Returns
        -------
        NDArray
            array of shape ``(V**(t-1), V)``, prefixes in lexicographic order
        """
        return self._probs[self._table_rows(position)]

    def cond_log_table(self, position: int) -> npt.NDArray[np.float64]:
        """
        Tabulate conditional log-probabilities at a position for every prefix.

        Parameters
        ----------
        position : int
            1-based position t

        Returns
        -------
        NDArray
            array of shape ``(V**(t-1), V)``, prefixes in lexicographic order
        """
        return self._log_probs[self._table_rows(position)]

    def prefix_log_probs(self, length: int) -> npt.NDArray[np.float64]:
        """
        Calculate the log-probability of every prefix of a given length.

        Parameters
        ----------
        length : int
            prefix length, between 0 and T

        Returns
        -------
        NDArray
            length ``V**length`` array in lexicographic prefix order

        Raises
        ------
        EnumerationCapError
            If V**length exceeds the enumeration cap.
        """
        check_enumerable(self.vocab_size, length)
        log_probs = np.zeros(1)
        for t in range(1, length + 1):
            log_probs = (log_probs[:, None] + self.cond_log_table(t)).reshape(-1)
        return log_probs

    def seq_probs(self) -> npt.NDArray[np.float64]:
        """
        Calculate the probability of every full sequence.

        Returns
        -------
        NDArray
            length ``V**T`` array, sequences in the order of ``enumerate_sequences``
        """
        return np.exp(self.prefix_log_probs(self.horizon))

    def seq_distribution(self) -> dict[Sequence, float]:
        """
        Get the distribution over whole sequences by exhaustive enumeration.

        Returns
        -------
        dict of Sequence : float
            probability of each of the V**T sequences, summing to one

        Raises
        ------
        EnumerationCapError
            If V**T exceeds the enumeration cap.

        Examples
        --------
        >>> dist = uniform_model(2, 2).seq_distribution()
        >>> list(dist)
        [(0, 0), (0, 1), (1, 0), (1, 1)]
        >>> round(dist[(0, 1)], 12)
        0.25
        """
        probs = self.seq_probs()
        return {
            seq: float(prob)
            for seq, prob in zip(
                enumerate_sequences(self.vocab_size, self.horizon), probs, strict=True
            )
        }

    def seq_logprob(self, seq: Sequence) -> float:
        """
        Calculate the log-probability of a full sequence by the chain rule.

        Parameters
        ----------
        seq : Sequence
            sequence of length T

        Returns
        -------
        float
            sum over positions of the log conditional probability, may be -inf
        """
        self.check_sequence(seq)
        return float(
            sum(
                self._log_probs[self.row_index(seq[:t]), seq[t]]
                for t in range(self.horizon)
            )
        )


def uniform_model(vocab_size: int, horizon: int, order: int = 0) -> TabularARModel:
    """
    Build a model whose every conditional is uniform.

    Parameters
    ----------
    vocab_size : int
        vocabulary size V
    horizon : int
        sequence length T
    order : int, default=0
        Markov context length

    Returns
    -------
    TabularARModel
        model with all-zero logits
    """
    return TabularARModel(vocab_size, horizon, order)


def forced_model(vocab_size: int, horizon: int, seq: Sequence) -> TabularARModel:
    """
    Build a deterministic model that always generates one sequence.

    Parameters
    ----------
    vocab_size : int
        vocabulary size V
    horizon : int
        sequence length T
    seq : Sequence
        the forced sequence

    Returns
    -------
    TabularARModel
        order-0 model with one-hot conditionals (``-inf`` logits off the sequence)
    """
    if len(seq) != horizon:
        msg = f"Forced sequence {seq} does not have length {horizon}."
        raise ValueError(msg)
    logits = np.full((horizon, vocab_size), -np.inf)
    logits[np.arange(horizon), list(seq)] = 0.0
    return TabularARModel(vocab_size, horizon, 0, logits=logits)


def random_model(  # noqa: PLR0913 - Too many arguments
    vocab_size: int,
    horizon: int,
    order: int,
    rng: SeedLike = None,
    scale: float = 1.0,
    stationary: bool = False,
) -> TabularARModel:
    """
    Build a model with i.i.d. Gaussian logits.

    Parameters
    ----------
    vocab_size : int
        vocabulary size V
    horizon : int
        sequence length T
    order : int
        Markov context length
    rng : int, Generator, SeedSequence or None, default=None
        seed or generator for the logits
    scale : float, default=1.0
        standard deviation of the logits
    stationary : bool, default=False
        share the full-context table across positions

    Returns
    -------
    TabularARModel
        the random model, identical for identical seeds

    Raises
    ------
    ValueError
        If scale is not positive.
    """
    if not scale > 0.0:
        msg = f"Logit scale must be positive but got {scale}."
        raise ValueError(msg)
    generator = np.random.default_rng(rng)
    layout = TabularARModel(vocab_size, horizon, order, stationary=stationary)
    logits = generator.normal(0.0, scale, size=layout.logits.shape)
    return layout.with_logits(logits)


def bimodal_teacher(
    vocab_size: int,
    horizon: int,
    mode_a: Sequence,
    mode_b: Sequence,
    sharpness: float = 5.0,
) -> TabularARModel:
    """
    Build a full-history teacher with two dominant sequences.

    Parameters
    ----------
    vocab_size : int
        vocabulary size V
    horizon : int
        sequence length T
    mode_a : Sequence
        first dominant sequence
    mode_b : Sequence
        second dominant sequence, different from the first
    sharpness : float, default=5.0
        logit given to on-mode tokens

    Returns
    -------
    TabularARModel
        order T-1 model

    Raises
    ------
    ValueError
        If the modes are identical, have the wrong length, or sharpness is not
        positive.

    Notes
    -----
    Along a prefix of either mode the tokens continuing a mode get logit
    ``sharpness`` while the remaining tokens share a total weight of one
    (each gets ``-ln(n_off)``). Every other context is uniform. A mode therefore
    keeps probability ``e^s/(e^s+1)`` at each step where the modes agree and
    ``e^s/(2e^s+1)`` where they split, giving each mode probability above 0.45 for
    ``sharpness >= 5`` up to horizons of about a dozen tokens.
    """
    mode_a = tuple(mode_a)
    mode_b = tuple(mode_b)
    if mode_a == mode_b:
        msg = f"The two modes must differ but both are {mode_a}."
        raise ValueError(msg)
    if len(mode_a) != horizon or len(mode_b) != horizon:
        msg = f"Both modes must have length {horizon}."
        raise ValueError(msg)
    if not sharpness > 0.0:
        msg = f"Sharpness must be positive but got {sharpness}."
        raise ValueError(msg)

    layout = TabularARModel(vocab_size, horizon, horizon - 1)
    logits = np.zeros(layout.logits.shape)
    for t in range(horizon):
        prefixes = {mode_a[:t], mode_b[:t]}
        for prefix in prefixes:
            on_mode = {mode[t] for mode in (mode_a, mode_b) if mode[:t] == prefix}
            n_off = vocab_size - len(on_mode)
            row = np.full(vocab_size, -math.log(n_off) if n_off else 0.0)
            row[list(on_mode)] = sharpness
            logits[layout.row_index(prefix)] = row
    return layout.with_logits(logits)


def interpolate(
    start: TabularARModel, end: TabularARModel, weight: float
) -> TabularARModel:
    """
    Linearly interpolate the logits of two models with the same layout.

    Parameters
    ----------
    start : TabularARModel
        model returned at weight 0
    end : TabularARModel
        model returned at weight 1
    weight : float
        interpolation weight

    Returns
    -------
    TabularARModel
        model with logits ``(1 - weight) * start + weight * end``; ``start`` itself at
        weight 0 and ``end`` itself at weight 1, so infinite logits survive the end
        points

    Raises
    ------
    ValueError
        If the layouts differ.
    """
    if not start.same_layout(end):
        msg = f"Cannot interpolate between {start!r} and {end!r}."
        raise ValueError(msg)
    if weight == 0.0:
        return start
    if weight == 1.0:
        return end
    return start.with_logits((1.0 - weight) * start.logits + weight * end.logits)
