"""
First-order optimizers for logits tables.

Routine Listings
----------------
- AdamState
- adam_init()
- adam_step()
- sgd_step()

"""

from typing import NamedTuple

import numpy as np
import numpy.typing as npt

FloatTable = npt.NDArray[np.float64]

#: Default exponential decay rates of the Adam moment estimates.
ADAM_BETAS = (0.9, 0.999)

#: Denominator offset in the Adam update.
ADAM_EPS = 1.0e-8


class AdamState(NamedTuple):
    """
    Moment estimates carried between Adam updates.

    Attributes
    ----------
    m : NDArray
        first moment (mean) estimate
    v : NDArray
        second raw moment estimate
    t : int
        number of updates taken so far
    """

    m: FloatTable
    v: FloatTable
    t: int


def adam_init(shape: tuple[int, ...]) -> AdamState:
    """
    Create a fresh Adam state for parameters of a given shape.

    Parameters
    ----------
    shape : tuple of int
        parameter array shape

    Returns
    -------
    AdamState
        zero moments at step 0
    """
    return AdamState(np.zeros(shape), np.zeros(shape), 0)


def _check_shapes(params: FloatTable, grad: FloatTable) -> None:
    if params.shape != grad.shape:
        msg = f"Gradient shape {grad.shape} does not match parameters {params.shape}."
        raise ValueError(msg)


def _check_lr(lr: float) -> None:
    if not lr > 0.0:
        msg = f"Learning rate must be positive but got {lr}."
        raise ValueError(msg)


def sgd_step(params: FloatTable, grad: FloatTable, lr: float) -> FloatTable:
    """
    Take one plain gradient-descent step.

    Parameters
    ----------
    params : NDArray
        current parameters
    grad : NDArray
        gradient of the loss at ``params``
    lr : float
        learning rate

    Returns
    -------
    NDArray
        ``params - lr * grad`` as a new array

    Raises
    ------
    ValueError
        If the shapes differ or the learning rate is not positive.

    Examples
    --------
    >>> sgd_step(np.array([1.0, 2.0]), np.array([0.5, -0.5]), 1.0)
    array([0.5, 2.5])
    """
    _check_shapes(params, grad)
    _check_lr(lr)
    return params - lr * grad


def adam_step(
    params: FloatTable,
    grad: FloatTable,
    state: AdamState,
    lr: float,
    betas: tuple[float, float] = ADAM_BETAS,
) -> tuple[FloatTable, AdamState]:
    """
    Take one Adam step with bias-corrected moment estimates.

    Parameters
    ----------
    params : NDArray
        current parameters
    grad : NDArray
        gradient of the loss at ``params``
    state : AdamState
        moment estimates from the previous step
    lr : float
        learning rate
    betas : tuple of float, default=(0.9, 0.999)
        decay rates of the first and second moment estimates

    Returns
    -------
    params : NDArray
        updated parameters as a new array
    state : AdamState
        updated moment estimates

    Raises
    ------
    ValueError
        If the shapes differ or the learning rate is not positive.

    Notes
    -----
    On the first step from a fresh state the update of every coordinate is
    ``-lr * g / (|g| + eps)``, i.e. close to ``lr`` in magnitude.
    """
    _check_shapes(params, grad)
    _check_lr(lr)
    beta1, beta2 = betas
    step = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad**2
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return new_params, AdamState(m, v, step)
