"""Finite-alphabet information measures and typicality tests (all in bits)."""

from typing import Iterable, Sequence

import numpy as np

from .constants import MI_CLAMP_TOLERANCE, ZERO_PROB
from .errors import DimensionMismatch, OverlappingAxes, SymbolOutOfRange
from .schemas import JointPmf, Pmf


def _entropy_of(
    probs: np.ndarray,
):
    p = probs[probs > ZERO_PROB]
    return float(-np.sum(p * np.log2(p)))


def _clamp(
    value: float,
):
    if -MI_CLAMP_TOLERANCE < value < 0.0:
        return 0.0
    return value


def _axes(
    j: JointPmf,
    axes: Iterable[int],
):
    axes = tuple(sorted(set(int(a) for a in axes)))
    for axis in axes:
        if not 0 <= axis < j.ndim:
            raise DimensionMismatch(f"axis {axis} is not an axis of a {j.ndim}-axis joint")
    return axes


def _disjoint(
    *axis_sets: tuple[int, ...],
):
    seen: set[int] = set()
    for axes in axis_sets:
        if seen & set(axes):
            raise OverlappingAxes(f"axis sets {axis_sets} overlap")
        seen |= set(axes)


def marginal_probs(
    probs: np.ndarray,
    axes: Sequence[int],
):
    drop = tuple(a for a in range(probs.ndim) if a not in axes)
    return probs.sum(axis=drop) if drop else probs


def marginal(
    j: JointPmf,
    axes: Iterable[int],
):
    return JointPmf(probs=marginal_probs(j.probs, _axes(j, axes)))


def binary_entropy(
    p: float,
):
    return _entropy_of(np.array([p, 1.0 - p]))


def entropy(
    p: Pmf,
):
    return _entropy_of(p.probs)


def joint_entropy(
    j: JointPmf,
    axes: Iterable[int],
):
    axes = _axes(j, axes)
    if not axes:
        return 0.0
    return _entropy_of(marginal_probs(j.probs, axes))


def conditional_entropy(
    j: JointPmf,
    axes_a: Iterable[int],
    axes_given: Iterable[int],
):
    a, c = _axes(j, axes_a), _axes(j, axes_given)
    _disjoint(a, c)
    return _clamp(joint_entropy(j, a + c) - joint_entropy(j, c))


def _h(
    probs: np.ndarray,
    axes: tuple[int, ...],
):
    return _entropy_of(marginal_probs(probs, axes)) if axes else 0.0


def mutual_information_probs(
    probs: np.ndarray,
    a: tuple[int, ...],
    b: tuple[int, ...],
):
    """Unchecked I(A;B) on a raw probability tensor, for optimizer inner loops."""
    return _clamp(_h(probs, a) + _h(probs, b) - _h(probs, a + b))


def conditional_mutual_information_probs(
    probs: np.ndarray,
    a: tuple[int, ...],
    b: tuple[int, ...],
    c: tuple[int, ...],
):
    return _clamp(_h(probs, a + c) + _h(probs, b + c) - _h(probs, a + b + c) - _h(probs, c))


def mutual_information(
    j: JointPmf,
    axes_a: Iterable[int],
    axes_b: Iterable[int],
):
    a, b = _axes(j, axes_a), _axes(j, axes_b)
    _disjoint(a, b)
    return mutual_information_probs(j.probs, a, b)


def conditional_mutual_information(
    j: JointPmf,
    axes_a: Iterable[int],
    axes_b: Iterable[int],
    axes_c: Iterable[int],
):
    a, b, c = _axes(j, axes_a), _axes(j, axes_b), _axes(j, axes_c)
    _disjoint(a, b, c)
    return conditional_mutual_information_probs(j.probs, a, b, c)


def _pair_table(
    j: JointPmf,
):
    if j.ndim != 2:
        raise DimensionMismatch(f"typicality needs a joint over (X, Y), got {j.ndim} axes")
    return j.probs


def _typical_counts(
    counts: np.ndarray,
    n: int,
    probs: np.ndarray,
    eps: float,
):
    # counts: (..., |X|*|Y|)
    expected = probs.ravel()
    empirical = counts / n
    support = expected > ZERO_PROB
    inside = np.abs(empirical - expected) <= eps * expected
    return np.all(np.where(support, inside, counts == 0), axis=-1)


def _check_symbols(
    seq: np.ndarray,
    size: int,
    name: str,
):
    if seq.size and (seq.min() < 0 or seq.max() >= size):
        raise SymbolOutOfRange(f"{name} symbols must lie in [0, {size})")


def is_jointly_typical(
    xs: Sequence[int],
    ys: Sequence[int],
    j: JointPmf,
    eps: float,
):
    """Strong typicality: |pi(a,b) - p(a,b)| <= eps p(a,b) on the support, pi = 0 off it."""
    probs = _pair_table(j)
    xs, ys = np.asarray(xs, dtype=np.int64), np.asarray(ys, dtype=np.int64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise DimensionMismatch(f"sequence lengths differ: {xs.shape} vs {ys.shape}")
    if xs.size == 0:
        raise DimensionMismatch("sequences must have length n >= 1")
    if eps <= 0:
        raise ValueError("eps must be positive")
    size_x, size_y = probs.shape
    _check_symbols(xs, size_x, "x")
    _check_symbols(ys, size_y, "y")
    counts = np.bincount(xs * size_y + ys, minlength=size_x * size_y)
    return bool(_typical_counts(counts, xs.size, probs, eps))


def jointly_typical_rows(
    words: np.ndarray,
    ys: Sequence[int],
    j: JointPmf,
    eps: float,
):
    """Typicality of every row of `words` against the single sequence `ys`."""
    probs = _pair_table(j)
    words = np.asarray(words, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    if words.ndim != 2 or words.shape[1] != ys.shape[0]:
        raise DimensionMismatch(f"words {words.shape} do not match sequence {ys.shape}")
    _check_symbols(words, probs.shape[0], "x")
    _check_symbols(ys, probs.shape[1], "y")
    num_words, n = words.shape
    cells = probs.size
    keys = words * probs.shape[1] + ys[None, :]
    keys += (np.arange(num_words, dtype=np.int64) * cells)[:, None]
    counts = np.bincount(keys.ravel(), minlength=num_words * cells)
    return _typical_counts(counts.reshape(num_words, cells), n, probs, eps)
