"""Dense tensor helpers shared by the other modules.

Tensors are plain numpy arrays interpreted in row-major (C) order; every
reshape in this package relies on that linearization. Real float64 arrays
carry probability data, complex128 arrays carry operators.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError

DEFAULT_EPS = 1e-16


def contract(a: np.ndarray, b: np.ndarray, pairs) -> np.ndarray:
    """Contract ``a`` with ``b`` over the given ``(axis_of_a, axis_of_b)`` pairs.

    The result carries the free axes of ``a`` followed by the free axes of
    ``b``, each group in its original order.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    pairs = [(int(i), int(j)) for i, j in pairs]
    axes_a = [i for i, _ in pairs]
    axes_b = [j for _, j in pairs]
    if len(set(axes_a)) != len(axes_a) or len(set(axes_b)) != len(axes_b):
        raise DimensionError(f"repeated axis in contraction pairs {pairs}")
    for i, j in pairs:
        if not (0 <= i < a.ndim and 0 <= j < b.ndim):
            raise DimensionError(
                f"axis pair ({i}, {j}) out of range for shapes {a.shape}, {b.shape}"
            )
        if a.shape[i] != b.shape[j]:
            raise DimensionError(
                f"extent mismatch on axes ({i}, {j}): {a.shape[i]} != {b.shape[j]}"
            )
    return np.tensordot(a, b, axes=(axes_a, axes_b))


def hadamard_div(num: np.ndarray, den: np.ndarray, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Elementwise ``num / (den + eps)`` for arrays of identical shape.

    ``eps`` keeps the quotient finite when entries of ``den`` underflow to
    zero, which happens in multiplicative updates once parts of the support
    die out. It is added to the denominator only.
    """
    num = np.asarray(num)
    den = np.asarray(den)
    if num.shape != den.shape:
        raise DimensionError(f"shape mismatch {num.shape} vs {den.shape}")
    return num / (den + eps)
