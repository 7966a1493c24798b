"""
Multilevel Haar wavelet transforms, 1D and 2D, with their inverses.

Coefficients use a packed multilevel layout: the approximation block first,
then detail bands from the coarsest level to the finest. For n = 4 and two
levels this is [a'0, d'0, d0, d1]. A full-depth transform equals
``haar_matrix(log2 n) @ x``.

Two variants are available. ``Orthonormal`` scales every level step by 1/sqrt(2)
so the transform is orthogonal. ``IntegerAddSub`` only adds and subtracts; its
coefficients are the orthonormal ones times ``integer_scale(plan)`` and integer
inputs round-trip bit-exactly.

The Walsh-Hadamard transform lives here too, since it shares the 2x2 kernel.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from config.hwt_config import MAX_LEVELS
from src.errors import HaarSizeError, ShapeError
from src.project_logger import get_logger

logger = get_logger(__name__)

_SQRT1_2 = 1.0 / np.sqrt(2.0)


class Variant(Enum):
    ORTHONORMAL = 'orthonormal'
    INTEGER_ADD_SUB = 'integer'


class Ordering(Enum):
    MULTILEVEL_PACKED = 'multilevel_packed'


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def log2_int(n: int) -> int:
    """Exact log2 of a power of two."""
    return int(n).bit_length() - 1


@dataclass(frozen=True)
class HaarPlan:
    """
    Precomputed description of a transform.

    Attributes:
        n (int): Signal length, a power of two >= 2.
        levels (int): Decomposition depth, 1 <= levels <= log2(n).
        variant (Variant): Orthonormal or integer add/sub filter bank.
        ordering (Ordering): Coefficient layout. Only the packed layout exists.
    """
    n: int
    levels: int
    variant: Variant = Variant.ORTHONORMAL
    ordering: Ordering = Ordering.MULTILEVEL_PACKED

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 2 or not is_power_of_two(int(self.n)):
            raise ShapeError(f"plan size must be a power of two >= 2, got {self.n}")
        max_levels = log2_int(self.n)
        if max_levels > MAX_LEVELS:
            raise HaarSizeError(f"plan size 2^{max_levels} exceeds the 2^{MAX_LEVELS} limit")
        if not 1 <= self.levels <= max_levels:
            raise ShapeError(f"levels must be in [1, {max_levels}] for n={self.n}, got {self.levels}")
        if not isinstance(self.variant, Variant):
            object.__setattr__(self, 'variant', Variant(self.variant))

    @classmethod
    def full(cls, n: int, variant: Variant = Variant.ORTHONORMAL) -> 'HaarPlan':
        """Full-depth plan, levels = log2(n)."""
        if not isinstance(n, (int, np.integer)) or n < 2 or not is_power_of_two(int(n)):
            raise ShapeError(f"plan size must be a power of two >= 2, got {n}")
        return cls(n=int(n), levels=log2_int(int(n)), variant=variant)

    @property
    def band_sizes(self) -> list:
        """Lengths of the packed blocks: approximation, then details coarse to fine."""
        coarse = self.n >> self.levels
        return [coarse] + [self.n >> lvl for lvl in range(self.levels, 0, -1)]


def _check_order(k: int) -> None:
    if not isinstance(k, (int, np.integer)) or k < 1 or k > MAX_LEVELS:
        raise HaarSizeError(f"transform order k must be in [1, {MAX_LEVELS}], got {k}")


def haar_matrix(k: int) -> np.ndarray:
    """
    Orthonormal 2^k x 2^k Haar matrix.

    Built with the Kronecker recursion
    H_2n = [H_n (x) [1, 1]; I_n (x) [1, -1]] / sqrt(2), starting from
    H_2 = [[1, 1], [1, -1]] / sqrt(2). Each step keeps the rows at unit norm.

    Args:
        k (int): Number of levels, 1 <= k <= MAX_LEVELS.

    Returns:
        np.ndarray: The (2^k, 2^k) matrix.

    Raises:
        HaarSizeError: if k is out of range.
    """
    _check_order(k)
    logger.debug("building %dx%d Haar matrix", 2 ** k, 2 ** k)
    mat = np.array([[1.0, 1.0], [1.0, -1.0]]) * _SQRT1_2
    for _ in range(k - 1):
        size = mat.shape[0]
        upper = np.kron(mat, [1.0, 1.0])
        lower = np.kron(np.eye(size), [1.0, -1.0])
        mat = np.vstack([upper, lower]) * _SQRT1_2
    return mat


def hadamard_matrix(k: int, normalized: bool = False) -> np.ndarray:
    """
    Walsh-Hadamard matrix from the block recursion W_2n = [[W_n, W_n], [W_n, -W_n]].

    Args:
        k (int): Order, the matrix is 2^k x 2^k.
        normalized (bool): Scale by 2^(-k/2) to make the matrix orthonormal.

    Returns:
        np.ndarray: Sylvester-ordered Hadamard matrix.
    """
    _check_order(k)
    mat = np.array([[1.0]])
    for _ in range(k):
        mat = np.block([[mat, mat], [mat, -mat]])
    if normalized:
        mat = mat * 2.0 ** (-k / 2.0)
    return mat


def integer_haar_rows(k: int) -> np.ndarray:
    """
    Unnormalized Haar analysis matrix with entries in {-1, 0, 1}.

    Same recursion as ``haar_matrix`` without the 1/sqrt(2), so for k = 2 the
    last two rows are [1, -1, 0, 0] and [0, 0, 1, -1]. Rows are orthogonal but
    not unit norm; ``integer_haar_inverse`` gives the inverse.
    """
    if not isinstance(k, (int, np.integer)) or k < 2:
        raise HaarSizeError(f"integer Haar matrix needs k >= 2, got {k}")
    _check_order(k)
    mat = np.array([[1, 1], [1, -1]], dtype=np.int64)
    for _ in range(k - 1):
        size = mat.shape[0]
        upper = np.kron(mat, np.array([1, 1], dtype=np.int64))
        lower = np.kron(np.eye(size, dtype=np.int64), np.array([1, -1], dtype=np.int64))
        mat = np.vstack([upper, lower])
    return mat


def integer_haar_inverse(k: int) -> np.ndarray:
    """
    Biorthogonal inverse of ``integer_haar_rows(k)``: M^T diag(1 / ||row||^2).

    Squared row norms are powers of two, so every entry is a dyadic rational and
    integer round-trips are exact in double precision.
    """
    mat = integer_haar_rows(k)
    row_norms_sq = np.sum(mat * mat, axis=1)
    return mat.T.astype(np.float64) / row_norms_sq[np.newaxis, :]


def integer_scale(plan: HaarPlan) -> np.ndarray:
    """
    Factors s with  integer_coeffs = s * orthonormal_coeffs  for ``plan``.

    The approximation block carries 2^(L/2); detail band of level j carries 2^(j/2).
    """
    scale = np.empty(plan.n)
    sizes = plan.band_sizes
    scale[:sizes[0]] = 2.0 ** (plan.levels / 2.0)
    start = sizes[0]
    for lvl, size in zip(range(plan.levels, 0, -1), sizes[1:]):
        scale[start:start + size] = 2.0 ** (lvl / 2.0)
        start += size
    return scale


def _check_length(x: np.ndarray, plan: HaarPlan, axis_name: str = 'last axis') -> None:
    if x.ndim == 0 or x.shape[-1] != plan.n:
        raise ShapeError(f"expected length {plan.n} along the {axis_name}, got shape {x.shape}")


def _working_copy(x, plan: HaarPlan) -> np.ndarray:
    arr = np.asarray(x)
    if plan.variant is Variant.INTEGER_ADD_SUB and np.issubdtype(arr.dtype, np.integer):
        return arr.astype(np.int64, copy=True)
    return arr.astype(np.float64, copy=True)


def dwt1d(x, plan: HaarPlan) -> np.ndarray:
    """
    Forward multilevel Haar transform along the last axis.

    Each level replaces the leading ``m`` entries with m/2 pairwise sums followed by
    m/2 pairwise differences, then recurses on the sums. O(n) per row.

    Args:
        x (array_like): Input with ``x.shape[-1] == plan.n``. Leading axes are batch.
        plan (HaarPlan): Transform description.

    Returns:
        np.ndarray: Packed coefficients, same shape as ``x``.

    Raises:
        ShapeError: if the last axis does not have length ``plan.n``.
    """
    out = _working_copy(x, plan)
    _check_length(out, plan)
    integer = plan.variant is Variant.INTEGER_ADD_SUB
    m = plan.n
    for _ in range(plan.levels):
        even = out[..., 0:m:2].copy()
        odd = out[..., 1:m:2].copy()
        half = m // 2
        if integer:
            out[..., :half] = even + odd
            out[..., half:m] = even - odd
        else:
            out[..., :half] = (even + odd) * _SQRT1_2
            out[..., half:m] = (even - odd) * _SQRT1_2
        m = half
    return out


def idwt1d(coeffs, plan: HaarPlan) -> np.ndarray:
    """
    Inverse of ``dwt1d`` along the last axis.

    For IntegerAddSub on integer input the reconstruction x_even = (a + d) / 2,
    x_odd = (a - d) / 2 is done with floor division, which is exact because
    a + d = 2 * x_even.
    """
    out = _working_copy(coeffs, plan)
    _check_length(out, plan)
    integer = plan.variant is Variant.INTEGER_ADD_SUB
    exact_int = integer and np.issubdtype(out.dtype, np.integer)
    m = plan.n >> (plan.levels - 1)
    for _ in range(plan.levels):
        half = m // 2
        approx = out[..., :half].copy()
        detail = out[..., half:m].copy()
        if exact_int:
            out[..., 0:m:2] = (approx + detail) // 2
            out[..., 1:m:2] = (approx - detail) // 2
        elif integer:
            out[..., 0:m:2] = (approx + detail) * 0.5
            out[..., 1:m:2] = (approx - detail) * 0.5
        else:
            out[..., 0:m:2] = (approx + detail) * _SQRT1_2
            out[..., 1:m:2] = (approx - detail) * _SQRT1_2
        m *= 2
    return out


def _check_square(img: np.ndarray, plan: HaarPlan) -> None:
    if img.ndim < 2 or img.shape[-1] != img.shape[-2]:
        raise ShapeError(f"2D transform needs square blocks, got shape {img.shape}")
    if img.shape[-1] != plan.n:
        raise ShapeError(f"expected {plan.n}x{plan.n} blocks, got shape {img.shape}")


def dwt2d_separable(img, row_plan: HaarPlan, col_plan: HaarPlan) -> np.ndarray:
    """
    Separable 2D transform of the last two axes: rows first, then columns.

    ``row_plan`` transforms along the last axis (length W), ``col_plan`` along the
    second to last (length H), i.e. Y = H_col X H_row^T for full-depth plans.
    """
    arr = np.asarray(img)
    if arr.ndim < 2:
        raise ShapeError(f"2D transform needs at least 2 dimensions, got shape {arr.shape}")
    if arr.shape[-2] != col_plan.n:
        raise ShapeError(f"expected {col_plan.n} rows, got shape {arr.shape}")
    rows_done = dwt1d(arr, row_plan)
    cols_done = dwt1d(np.swapaxes(rows_done, -1, -2), col_plan)
    return np.swapaxes(cols_done, -1, -2)


def idwt2d_separable(coeffs, row_plan: HaarPlan, col_plan: HaarPlan) -> np.ndarray:
    """Inverse of ``dwt2d_separable``."""
    arr = np.asarray(coeffs)
    if arr.ndim < 2:
        raise ShapeError(f"2D transform needs at least 2 dimensions, got shape {arr.shape}")
    if arr.shape[-2] != col_plan.n:
        raise ShapeError(f"expected {col_plan.n} rows, got shape {arr.shape}")
    cols_done = idwt1d(np.swapaxes(arr, -1, -2), col_plan)
    return idwt1d(np.swapaxes(cols_done, -1, -2), row_plan)


def dwt2d(img, plan: HaarPlan) -> np.ndarray:
    """
    Separable 2D Haar transform of square n x n blocks (last two axes).

    For a full-depth orthonormal plan the result is H_N X H_N^T.

    Raises:
        ShapeError: for non-square blocks or a size other than ``plan.n``.
    """
    arr = np.asarray(img)
    _check_square(arr, plan)
    return dwt2d_separable(arr, plan, plan)


def idwt2d(coeffs, plan: HaarPlan) -> np.ndarray:
    """Inverse of ``dwt2d``; H_N^T Y H_N for full-depth orthonormal plans."""
    arr = np.asarray(coeffs)
    _check_square(arr, plan)
    return idwt2d_separable(arr, plan, plan)


def fwht(x, axis: int = -1, normalized: bool = True) -> np.ndarray:
    """
    Fast Walsh-Hadamard transform along ``axis`` in Sylvester (natural) order.

    Equals ``hadamard_matrix(k, normalized) @ x``. The normalized transform is
    orthonormal and its own inverse.

    Raises:
        ShapeError: if the axis length is not a power of two.
    """
    out = np.moveaxis(np.asarray(x, dtype=np.float64), axis, -1).copy()
    n = out.shape[-1]
    if not is_power_of_two(n):
        raise ShapeError(f"Walsh-Hadamard length must be a power of two, got {n}")
    lead = out.shape[:-1]
    h = 1
    while h < n:
        blocks = out.reshape(lead + (n // (2 * h), 2, h))
        first = blocks[..., 0, :].copy()
        second = blocks[..., 1, :]
        blocks[..., 0, :] = first + second
        blocks[..., 1, :] = first - second
        out = blocks.reshape(lead + (n,))
        h *= 2
    if normalized:
        out *= 1.0 / np.sqrt(n)
    return np.moveaxis(out, -1, axis)


def fwht2d(img, normalized: bool = True) -> np.ndarray:
    """Separable 2D Walsh-Hadamard transform of the last two axes (W X W^T)."""
    return fwht(fwht(img, axis=-1, normalized=normalized), axis=-2, normalized=normalized)
