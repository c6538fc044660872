"""
Exact f-divergences between finite categorical distributions.

Extended Summary
----------------
Provides the four generator functions of the f-divergence family used for
distillation, and the divergence between two probability vectors (or two stacks
of probability vectors, one per row) under exact limit conventions for zero
probabilities.

Routine Listings
----------------
- f_value()
- pointwise_divergence()
- rowwise_divergence()
- mixture()
- as_prob_vector()

Notes
-----
All logarithms are natural logarithms, so divergences are measured in nats.
The Jensen-Shannon generator carries a factor of one half so that
``D_f(p||q)`` is the Jensen-Shannon divergence itself (bounded by ``ln 2``)
rather than twice it.

"""

import math
from typing import Literal, TypeAlias, get_args

import numpy as np
import numpy.typing as npt
from scipy.special import xlogy

# TypeAlias deprecated. Move to `type` in py3.12+
#: The f-divergences that fdistill knows how to handle.
DivergenceKind: TypeAlias = Literal["KL", "RKL", "JS", "TVD"]

#: A finite categorical distribution stored as a 1D array of probabilities.
ProbVector: TypeAlias = npt.NDArray[np.float64]

DIVERGENCE_KINDS: tuple[DivergenceKind, ...] = get_args(DivergenceKind)

#: Tolerance on the total mass of a probability vector.
SUM_TOL = 1.0e-9

_LN2 = math.log(2.0)


def check_kind(kind: str) -> DivergenceKind:
    """
    Check a divergence identifier, returning it unchanged when valid.

    Parameters
    ----------
    kind : str
        divergence identifier to check

    Returns
    -------
    DivergenceKind
        the validated identifier

    Raises
    ------
    ValueError
        If kind is not one of the supported divergences.
    """
    if kind not in DIVERGENCE_KINDS:
        msg = (
            f"{kind} is not a recognised divergence.\n"
            f"""Please select from '{"', '".join(DIVERGENCE_KINDS)}'."""
        )
        raise ValueError(msg)
    return kind  # type: ignore[return-value]


def f_value(kind: DivergenceKind, t: float) -> float:
    """
    Evaluate the generator function f of an f-divergence.

    Parameters
    ----------
    kind : DivergenceKind
        which divergence's generator to evaluate
    t : float
        likelihood ratio at which to evaluate, must be positive

    Returns
    -------
    float
        f(t), with f(1) = 0 for every kind

    Raises
    ------
    ValueError
        If t is not strictly positive or kind is not recognised.

    Examples
    --------
    >>> f_value("TVD", 3.0)
    1.0
    >>> f_value("RKL", math.e)
    -1.0
    """
    check_kind(kind)
    if not t > 0.0:
        msg = f"The generator f is defined on t > 0 but got t = {t}."
        raise ValueError(msg)

    if kind == "KL":
        return t * math.log(t)
    if kind == "RKL":
        return -math.log(t)
    if kind == "JS":
        return 0.5 * (t * math.log(t) - (t + 1.0) * math.log((t + 1.0) / 2.0))
    return 0.5 * abs(t - 1.0)


def as_prob_vector(values: npt.ArrayLike) -> ProbVector:
    """
    Convert values to a validated probability vector.

    Parameters
    ----------
    values : ArrayLike
        1D collection of probabilities

    Returns
    -------
    ProbVector
        float64 copy of the input

    Raises
    ------
    ValueError
        If the input is not 1D, has negative entries, or does not sum to one
        within 1e-9.
    """
    probs = np.array(values, dtype=np.float64)
    if probs.ndim != 1:
        msg = f"A probability vector must be 1D but has shape {probs.shape}."
        raise ValueError(msg)
    if np.any(probs < 0.0):
        msg = "A probability vector cannot contain negative entries."
        raise ValueError(msg)
    total = float(np.sum(probs))
    if abs(total - 1.0) > SUM_TOL:
        msg = f"A probability vector must sum to 1 but sums to {total!r}."
        raise ValueError(msg)
    return probs


def _kl_terms(p: npt.NDArray[np.float64], q: npt.NDArray[np.float64]):
    """Elementwise p*ln(p/q) with 0*ln(0/q) = 0 and p*ln(p/0) = +inf for p > 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = xlogy(p, p) - xlogy(p, q)
    return np.where((p > 0.0) & (q <= 0.0), np.inf, terms)


def rowwise_divergence(
    p_rows: npt.ArrayLike,
    q_rows: npt.ArrayLike,
    kind: DivergenceKind,
) -> npt.NDArray[np.float64]:
    """
    Calculate the divergence between matching rows of two stacked distributions.

    Parameters
    ----------
    p_rows : ArrayLike
        array of shape (n, V), each row a distribution p
    q_rows : ArrayLike
        array of shape (n, V), each row a distribution q
    kind : DivergenceKind
        which f-divergence to compute

    Returns
    -------
    NDArray
        length-n array with D_f(p_i || q_i) for each row, possibly +inf for KL/RKL

    Raises
    ------
    ValueError
        If the two arrays do not have the same shape.

    See Also
    --------
    pointwise_divergence : The single-distribution version with the conventions.
    """
    check_kind(kind)
    p = np.atleast_2d(np.asarray(p_rows, dtype=np.float64))
    q = np.atleast_2d(np.asarray(q_rows, dtype=np.float64))
    if p.shape != q.shape:
        msg = (
            "Distributions must be over the same vocabulary but have shapes "
            f"{p.shape} and {q.shape}."
        )
        raise ValueError(msg)

    if kind == "KL":
        return np.sum(_kl_terms(p, q), axis=1)
    if kind == "RKL":
        return np.sum(_kl_terms(q, p), axis=1)
    if kind == "JS":
        m = 0.5 * p + 0.5 * q
        return 0.5 * np.sum(_kl_terms(p, m) + _kl_terms(q, m), axis=1)
    return 0.5 * np.sum(np.abs(p - q), axis=1)


def pointwise_divergence(
    p: npt.ArrayLike,
    q: npt.ArrayLike,
    kind: DivergenceKind,
) -> float:
    """
    Calculate the f-divergence D_f(p||q) = sum_i q_i f(p_i / q_i).

    Parameters
    ----------
    p : ArrayLike
        first distribution (the teacher in distillation)
    q : ArrayLike
        second distribution (the student in distillation)
    kind : DivergenceKind
        which f-divergence to compute

    Returns
    -------
    float
        divergence in nats, or ``math.inf`` for KL/RKL with uncovered support

    Raises
    ------
    ValueError
        If p and q are not over the same vocabulary.

    Notes
    -----
    Zero probabilities follow the limits of q f(p/q):

    - p_i = q_i = 0 contributes nothing for every kind
    - q_i = 0 < p_i contributes +inf (KL), p_i/2 (TVD), p_i ln(2)/2 (JS), 0 (RKL)
    - p_i = 0 < q_i contributes +inf (RKL) and the symmetric limits otherwise

    Examples
    --------
    >>> pointwise_divergence([1.0, 0.0], [0.0, 1.0], "TVD")
    1.0
    >>> pointwise_divergence([1.0, 0.0], [0.0, 1.0], "JS")
    0.6931471805599453
    """
    p_arr = np.asarray(p, dtype=np.float64)
    q_arr = np.asarray(q, dtype=np.float64)
    if p_arr.ndim != 1 or q_arr.shape != p_arr.shape:
        msg = (
            "Distributions must be 1D and over the same vocabulary but have shapes "
            f"{p_arr.shape} and {q_arr.shape}."
        )
        raise ValueError(msg)
    return float(rowwise_divergence(p_arr, q_arr, kind)[0])


def mixture(p: npt.ArrayLike, q: npt.ArrayLike) -> ProbVector:
    """
    Return the equal-weight mixture m = p/2 + q/2.

    Parameters
    ----------
    p : ArrayLike
        first distribution
    q : ArrayLike
        second distribution

    Returns
    -------
    ProbVector
        the elementwise average

    Raises
    ------
    ValueError
        If p and q are not over the same vocabulary.

    Examples
    --------
    >>> mixture([0.2, 0.8], [0.6, 0.4])
    array([0.4, 0.6])
    """
    p_arr = np.asarray(p, dtype=np.float64)
    q_arr = np.asarray(q, dtype=np.float64)
    if p_arr.shape != q_arr.shape:
        msg = f"Cannot mix distributions of shapes {p_arr.shape} and {q_arr.shape}."
        raise ValueError(msg)
    return 0.5 * p_arr + 0.5 * q_arr


#: Upper bounds used by sanity checks: JS <= ln 2 and TVD <= 1.
DIVERGENCE_UPPER_BOUNDS: dict[DivergenceKind, float] = {
    "KL": math.inf,
    "RKL": math.inf,
    "JS": _LN2,
    "TVD": 1.0,
}
