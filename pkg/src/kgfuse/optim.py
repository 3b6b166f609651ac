"""SGD and Adagrad parameter updates over full and row-sparse gradients.

Row-sparse updates aggregate duplicate row contributions before the
squared-gradient accumulation, matching what a dense batch gradient
would produce, and only touch the referenced rows.
"""

from __future__ import annotations

import numpy as np

ADAGRAD_EPS = 1e-8


def sparse_rows_sum(rows: np.ndarray, grads: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum gradient contributions per unique row id."""
    uniq, inv = np.unique(rows, return_inverse=True)
    summed = np.zeros((uniq.shape[0], grads.shape[1]), dtype=grads.dtype)
    np.add.at(summed, inv, grads)
    return uniq, summed


def sgd_sparse(param: np.ndarray, rows: np.ndarray, grads: np.ndarray, lr: float) -> None:
    uniq, g = sparse_rows_sum(rows, grads)
    param[uniq] -= lr * g


def adagrad_sparse(
    param: np.ndarray, accum: np.ndarray, rows: np.ndarray, grads: np.ndarray, lr: float
) -> None:
    uniq, g = sparse_rows_sum(rows, grads)
    accum[uniq] += g * g
    param[uniq] -= lr * g / (np.sqrt(accum[uniq]) + ADAGRAD_EPS)


def sgd_dense(param: np.ndarray, grad: np.ndarray, lr: float) -> None:
    param -= lr * grad


def adagrad_dense(param: np.ndarray, accum: np.ndarray, grad: np.ndarray, lr: float) -> None:
    accum += grad * grad
    param -= lr * grad / (np.sqrt(accum) + ADAGRAD_EPS)
