"""Central finite-difference gradient checking.

The numeric side is the independent oracle for every analytic backward
rule in the package: 64-bit, central differences with step 1e-5, relative
tolerance 1e-4 and absolute floor 1e-7 unless a caller overrides them.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import DiffTensor, Tape

FD_STEP = 1e-5
FD_REL_TOL = 1e-4
FD_ABS_FLOOR = 1e-7


def numeric_gradient(f: Callable[[], float], arr: np.ndarray,
                     step: float = FD_STEP) -> np.ndarray:
    """Central differences of a scalar-valued closure wrt ``arr`` (in place)."""
    g = np.zeros_like(arr)
    flat = arr.ravel()
    gflat = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = f()
        flat[i] = orig - step
        down = f()
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * step)
    return g


def relative_error(analytic: np.ndarray, numeric: np.ndarray,
                   abs_floor: float = FD_ABS_FLOOR) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), abs_floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def max_gradcheck_error(build: Callable[[Sequence[DiffTensor]], DiffTensor],
                        arrays: Sequence[np.ndarray],
                        step: float = FD_STEP,
                        abs_floor: float = FD_ABS_FLOOR) -> float:
    """Worst relative error between taped and finite-difference gradients.

    ``build`` maps leaf tensors (wrapping ``arrays``, which must be float64)
    to a scalar loss; it is re-invoked for every probe so it must be a pure
    function of the leaf values.
    """
    leaves = [DiffTensor(a, requires_grad=True) for a in arrays]
    with Tape():
        loss = build(leaves)
    loss.backward()
    analytic = [np.zeros_like(a) if leaf.grad is None else np.asarray(leaf.grad)
                for a, leaf in zip(arrays, leaves)]

    def eval_loss() -> float:
        probes = [DiffTensor(a) for a in arrays]
        return float(build(probes).data)

    worst = 0.0
    for arr, ana in zip(arrays, analytic):
        num = numeric_gradient(eval_loss, arr, step=step)
        worst = max(worst, relative_error(ana, num, abs_floor=abs_floor))
    return worst
