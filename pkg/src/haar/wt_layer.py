"""
Haar-domain perceptron layer.

    y = IDWT2( sum_i ST_i( V_i (DWT2(x) o A_i) ) )   (+ x when residual)

DWT2 is the full-depth orthonormal 2D Haar transform applied per channel, A_i an
H x W scaling map, V_i a C_out x C_in channel mix (a 1x1 convolution), and ST_i
soft-thresholding with the map T_i = softplus(T_raw_i). Inputs are zero-padded
to power-of-two sides (at least 2) and the output is cropped back.

The same layer can run on the Walsh-Hadamard transform instead (transform =
'hadamard'), which is the HT-perceptron the Haar layer is compared against.
"""
import json
import os
import tempfile
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.special import expit

from config.hwt_config import INIT_THRESHOLD
from src.errors import CacheError, ParameterError, ShapeError
from src.haar.haar_core import (HaarPlan, dwt2d_separable, fwht2d,
                                idwt2d_separable, is_power_of_two)
from src.project_logger import get_logger

logger = get_logger(__name__)

TRANSFORMS = ('haar', 'hadamard')


class ThresholdMode(Enum):
    SOFTPLUS = 'softplus'
    # effective thresholds are exactly zero; used for identity checks
    ZERO = 'zero'


@dataclass(frozen=True)
class PadRecord:
    """Spatial size before ``pad_pow2``."""
    height: int
    width: int


@dataclass
class LayerParams:
    """
    Learnable state of a P-path layer.

    Attributes:
        A (np.ndarray): (P, H, W) scaling maps.
        V (np.ndarray): (P, C_out, C_in) channel-mixing matrices.
        T_raw (np.ndarray): (P, H, W) threshold maps before softplus.
        residual (bool): Add the input to the output.
        threshold_mode (ThresholdMode): SOFTPLUS, or ZERO for hard-zero thresholds.
        transform (str): 'haar' or 'hadamard'.
    """
    A: np.ndarray
    V: np.ndarray
    T_raw: np.ndarray
    residual: bool = False
    threshold_mode: ThresholdMode = ThresholdMode.SOFTPLUS
    transform: str = 'haar'

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.float64)
        self.V = np.asarray(self.V, dtype=np.float64)
        self.T_raw = np.asarray(self.T_raw, dtype=np.float64)
        self.threshold_mode = ThresholdMode(self.threshold_mode)
        if self.transform not in TRANSFORMS:
            raise ParameterError(f"transform must be one of {TRANSFORMS}, got {self.transform!r}")
        if self.A.ndim != 3 or self.V.ndim != 3 or self.T_raw.ndim != 3:
            raise ShapeError("A and T_raw must be (P, H, W) and V must be (P, C_out, C_in)")
        if self.A.shape != self.T_raw.shape:
            raise ShapeError(f"A {self.A.shape} and T_raw {self.T_raw.shape} must share a shape")
        if self.V.shape[0] != self.A.shape[0]:
            raise ShapeError(f"path count differs: A has {self.A.shape[0]}, V has {self.V.shape[0]}")

    @property
    def paths(self) -> int:
        return self.A.shape[0]

    @property
    def c_in(self) -> int:
        return self.V.shape[2]

    @property
    def c_out(self) -> int:
        return self.V.shape[1]

    @property
    def spatial(self) -> tuple:
        return self.A.shape[1:]

    def thresholds(self) -> np.ndarray:
        """Effective (P, H, W) thresholds, always >= 0."""
        if self.threshold_mode is ThresholdMode.ZERO:
            return np.zeros_like(self.T_raw)
        return np.logaddexp(0.0, self.T_raw)

    def threshold_slope(self) -> np.ndarray:
        """d T / d T_raw."""
        if self.threshold_mode is ThresholdMode.ZERO:
            return np.zeros_like(self.T_raw)
        return expit(self.T_raw)


@dataclass
class LayerGrads:
    """Gradients matching the fields of LayerParams, plus the input gradient."""
    x: np.ndarray
    A: np.ndarray
    V: np.ndarray
    T_raw: np.ndarray


@dataclass
class ForwardCache:
    """Intermediates kept by ``forward`` for ``backward``."""
    params: LayerParams
    input_shape: tuple
    record: PadRecord
    coeffs: np.ndarray                  # (B, C_in, H, W) transformed padded input
    mixed: list = field(default_factory=list)   # per path Z_i, (B, C_out, H, W)
    thresholds: np.ndarray = None


def next_pow2(n: int) -> int:
    """Smallest power of two >= n, and never below 2 (one Haar level)."""
    return 2 if n <= 2 else 1 << (int(n) - 1).bit_length()


def pad_pow2(x):
    """
    Zero-pads the spatial axes of a (B, C, H, W) tensor to powers of two.

    Returns:
        tuple: (padded tensor, PadRecord with the original H and W).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise ShapeError(f"expected a (B, C, H, W) tensor, got shape {x.shape}")
    _, _, height, width = x.shape
    record = PadRecord(height, width)
    new_h, new_w = next_pow2(height), next_pow2(width)
    if (new_h, new_w) == (height, width):
        return x, record
    padded = np.pad(x, ((0, 0), (0, 0), (0, new_h - height), (0, new_w - width)))
    return padded, record


def crop(x, record: PadRecord) -> np.ndarray:
    """Undo ``pad_pow2``."""
    return np.asarray(x)[..., :record.height, :record.width]


def soft_threshold(z, thresholds):
    """
    sign(z) * max(|z| - T, 0), elementwise.

    Args:
        z (np.ndarray): Coefficients.
        thresholds (np.ndarray): Non-negative map broadcastable to ``z``.

    Raises:
        ParameterError: if any threshold is negative.
    """
    thresholds = np.asarray(thresholds, dtype=np.float64)
    if np.any(thresholds < 0):
        raise ParameterError("soft-threshold needs non-negative thresholds")
    z = np.asarray(z, dtype=np.float64)
    return np.sign(z) * np.maximum(np.abs(z) - thresholds, 0.0)


def _plans(height: int, width: int) -> tuple:
    return HaarPlan.full(width), HaarPlan.full(height)


def _forward_transform(x: np.ndarray, transform: str) -> np.ndarray:
    if transform == 'hadamard':
        return fwht2d(x)
    height, width = x.shape[-2:]
    row_plan, col_plan = _plans(height, width)
    return dwt2d_separable(x, row_plan, col_plan)


def _inverse_transform(coeffs: np.ndarray, transform: str) -> np.ndarray:
    if transform == 'hadamard':
        # normalized WHT is symmetric and orthogonal, so it is its own inverse
        return fwht2d(coeffs)
    height, width = coeffs.shape[-2:]
    row_plan, col_plan = _plans(height, width)
    return idwt2d_separable(coeffs, row_plan, col_plan)


def forward(x, params: LayerParams):
    """
    Runs the layer.

    Args:
        x (np.ndarray): (B, C_in, H, W) input.
        params (LayerParams): Parameters defined on the padded H x W.

    Returns:
        tuple: (output of shape (B, C_out, H, W), ForwardCache).

    Raises:
        ShapeError: on channel or spatial mismatches, or a residual layer whose
            C_out differs from C_in.
    """
    x = np.asarray(x, dtype=np.float64)
    padded, record = pad_pow2(x)
    batch, channels, height, width = padded.shape
    if channels != params.c_in:
        raise ShapeError(f"input has {channels} channels, parameters expect {params.c_in}")
    if (height, width) != params.spatial:
        raise ShapeError(f"padded input is {height}x{width}, parameters are {params.spatial}")
    if params.residual and params.c_out != params.c_in:
        raise ShapeError(f"residual needs C_out == C_in, got {params.c_out} and {params.c_in}")

    coeffs = _forward_transform(padded, params.transform)
    thresholds = params.thresholds()
    total = np.zeros((batch, params.c_out, height, width))
    mixed = []
    for i in range(params.paths):
        scaled = coeffs * params.A[i]
        z_i = np.einsum('oc,bchw->bohw', params.V[i], scaled)
        mixed.append(z_i)
        total += soft_threshold(z_i, thresholds[i])

    y = crop(_inverse_transform(total, params.transform), record)
    if params.residual:
        y = y + x
    cache = ForwardCache(params=params, input_shape=x.shape, record=record,
                         coeffs=coeffs, mixed=mixed, thresholds=thresholds)
    return y, cache


def backward(grad_out, cache: ForwardCache) -> LayerGrads:
    """
    Analytic gradients of ``forward``.

    The soft-threshold derivative is 1 where |z| > T and 0 elsewhere (including
    |z| == T). The inverse transform's adjoint is the forward transform and vice
    versa, because both are orthonormal.

    Raises:
        CacheError: if ``cache`` is not a ForwardCache or ``grad_out`` does not
            match the output it describes.
    """
    if not isinstance(cache, ForwardCache):
        raise CacheError(f"expected a ForwardCache, got {type(cache).__name__}")
    params = cache.params
    grad_out = np.asarray(grad_out, dtype=np.float64)
    batch, _, height, width = cache.input_shape
    expected = (batch, params.c_out, height, width)
    if grad_out.shape != expected:
        raise CacheError(f"grad_out shape {grad_out.shape} does not match forward output {expected}")
    if len(cache.mixed) != params.paths:
        raise CacheError("cache holds a different number of paths than its parameters")

    pad_h, pad_w = params.spatial
    grad_padded = np.zeros((batch, params.c_out, pad_h, pad_w))
    grad_padded[..., :height, :width] = grad_out
    grad_total = _forward_transform(grad_padded, params.transform)

    slope = params.threshold_slope()
    grad_coeffs = np.zeros_like(cache.coeffs)
    grad_a = np.zeros_like(params.A)
    grad_v = np.zeros_like(params.V)
    grad_t = np.zeros_like(params.T_raw)
    for i in range(params.paths):
        z_i = cache.mixed[i]
        active = np.abs(z_i) > cache.thresholds[i]
        grad_z = grad_total * active
        # d ST / d T = -sign(z) on the active set
        grad_t[i] = -np.sum(np.sign(z_i) * grad_z, axis=(0, 1)) * slope[i]
        scaled = cache.coeffs * params.A[i]
        grad_v[i] = np.einsum('bohw,bchw->oc', grad_z, scaled)
        grad_scaled = np.einsum('oc,bohw->bchw', params.V[i], grad_z)
        grad_a[i] = np.sum(grad_scaled * cache.coeffs, axis=(0, 1))
        grad_coeffs += grad_scaled * params.A[i]

    grad_x = crop(_inverse_transform(grad_coeffs, params.transform), cache.record)
    if params.residual:
        grad_x = grad_x + grad_out
    return LayerGrads(x=grad_x, A=grad_a, V=grad_v, T_raw=grad_t)


def softplus_inverse(value: float) -> float:
    """T_raw giving softplus(T_raw) == value."""
    if value <= 0:
        raise ParameterError(f"softplus only reaches positive values, got {value}")
    return float(np.log(np.expm1(value)))


def init_params(paths: int, c_in: int, c_out: int, height: int, width: int, seed: int = 0,
                residual: bool = False, transform: str = 'haar',
                threshold: float = INIT_THRESHOLD) -> LayerParams:
    """
    Default initialization.

    A_i are all ones, V_i ~ U(-b, b) with b = sqrt(1 / C_in), and T_raw_i is set so
    the effective threshold equals ``threshold``. Deterministic for a given seed.
    The maps live on the padded grid, so a side of 1 gets maps of side 2.

    Raises:
        ParameterError: for non-positive sizes or non-power-of-two spatial sides.
    """
    for name, value in (('paths', paths), ('c_in', c_in), ('c_out', c_out),
                        ('height', height), ('width', width)):
        if int(value) != value or value < 1:
            raise ParameterError(f"{name} must be a positive integer, got {value}")
    if not (is_power_of_two(height) and is_power_of_two(width)):
        raise ParameterError(f"spatial sides must be powers of two, got {height}x{width}")
    rng = np.random.default_rng(seed)
    bound = np.sqrt(1.0 / c_in)
    grid = (next_pow2(height), next_pow2(width))
    A = np.ones((paths,) + grid)
    V = rng.uniform(-bound, bound, size=(paths, c_out, c_in))
    T_raw = np.full((paths,) + grid, softplus_inverse(threshold))
    logger.debug("initialized %d-path layer %d->%d on %dx%d (seed %s)",
                 paths, c_in, c_out, height, width, seed)
    return LayerParams(A=A, V=V, T_raw=T_raw, residual=residual, transform=transform)


def apply_grads(params: LayerParams, grads: LayerGrads, lr: float) -> LayerParams:
    """One plain SGD step; returns new parameters and leaves ``params`` untouched."""
    return replace(params,
                   A=params.A - lr * grads.A,
                   V=params.V - lr * grads.V,
                   T_raw=params.T_raw - lr * grads.T_raw)


def _array_record(arr: np.ndarray) -> dict:
    return {'shape': list(arr.shape), 'values': arr.ravel(order='C').tolist()}


def _array_from_record(record: dict) -> np.ndarray:
    try:
        return np.asarray(record['values'], dtype=np.float64).reshape(record['shape'])
    except (KeyError, TypeError, ValueError) as exc:
        raise ShapeError(f"malformed array record in checkpoint: {exc}") from None


def save_params(params: LayerParams, path: str) -> None:
    """
    Writes a JSON checkpoint: flags plus shapes and row-major values.

    The file is written to a temporary name first and moved into place.
    """
    doc = {
        'paths': params.paths,
        'residual': params.residual,
        'threshold_mode': params.threshold_mode.value,
        'transform': params.transform,
        'A': _array_record(params.A),
        'V': _array_record(params.V),
        'T_raw': _array_record(params.T_raw),
    }
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise OSError(f"The path {directory} is not a valid directory.")
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix='.tmp')
    try:
        with os.fdopen(fd, 'w') as handle:
            json.dump(doc, handle)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    logger.info("saved %d-path layer checkpoint to %s", params.paths, path)


def load_params(path: str) -> LayerParams:
    """Reads a checkpoint written by ``save_params``."""
    with open(path, 'r') as handle:
        doc = json.load(handle)
    try:
        return LayerParams(A=_array_from_record(doc['A']),
                           V=_array_from_record(doc['V']),
                           T_raw=_array_from_record(doc['T_raw']),
                           residual=bool(doc['residual']),
                           threshold_mode=ThresholdMode(doc['threshold_mode']),
                           transform=doc['transform'])
    except KeyError as exc:
        raise ShapeError(f"checkpoint {path} is missing field {exc}") from None
