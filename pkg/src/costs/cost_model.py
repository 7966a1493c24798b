"""
MAC and parameter counts for KxK convolutions and P-path transform-domain
perceptrons, plus a CIFAR ResNet-20 parameter counter.

All counts are exact integers.
"""
import itertools
from dataclasses import dataclass
from enum import Enum

import pandas as pd

from config.hwt_config import (RESNET20_BLOCKS_PER_STAGE, RESNET20_CLASSES, RESNET20_STAGES,
                               RESNET20_STEM)
from src.errors import ModelDescriptionError
from src.haar.haar_core import is_power_of_two
from src.project_logger import get_logger

logger = get_logger(__name__)


class LayerKind(Enum):
    CONV = 'conv'
    HT_PERCEPTRON = 'ht_perceptron'


@dataclass(frozen=True)
class LayerSpec:
    """
    Attributes:
        kind (LayerKind): CONV (KxK Conv2D) or HT_PERCEPTRON.
        c_in (int): Input channels.
        c_out (int): Output channels.
        n (int): Spatial side N (power of two for perceptrons).
        k (int): Kernel size, CONV only.
        paths (int): Path count P, HT_PERCEPTRON only.
    """
    kind: LayerKind
    c_in: int
    c_out: int
    n: int
    k: int = 3
    paths: int = 1

    def __post_init__(self):
        try:
            object.__setattr__(self, 'kind', LayerKind(self.kind))
        except ValueError:
            raise ModelDescriptionError(f"unknown layer kind {self.kind!r}") from None
        for name in ('c_in', 'c_out', 'n', 'k', 'paths'):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ModelDescriptionError(f"{name} must be a positive integer, got {value!r}")
        if self.kind is LayerKind.HT_PERCEPTRON and not is_power_of_two(self.n):
            raise ModelDescriptionError(f"perceptron side N must be a power of two, got {self.n}")

    @classmethod
    def conv(cls, c, n, k=3, c_out=None) -> 'LayerSpec':
        return cls(LayerKind.CONV, c, c if c_out is None else c_out, n, k=k)

    @classmethod
    def perceptron(cls, c, n, paths, c_out=None) -> 'LayerSpec':
        return cls(LayerKind.HT_PERCEPTRON, c, c if c_out is None else c_out, n, paths=paths)

    @classmethod
    def from_dict(cls, doc: dict) -> 'LayerSpec':
        if not isinstance(doc, dict):
            raise ModelDescriptionError(f"layer entry must be an object, got {doc!r}")
        allowed = {'kind', 'c_in', 'c_out', 'n', 'k', 'paths', 'c'}
        unknown = set(doc) - allowed
        if unknown:
            raise ModelDescriptionError(f"unknown layer fields {sorted(unknown)}")
        fields = dict(doc)
        if 'c' in fields:
            channels = fields.pop('c')
            fields.setdefault('c_in', channels)
            fields.setdefault('c_out', channels)
        try:
            return cls(**fields)
        except TypeError as exc:
            raise ModelDescriptionError(f"incomplete layer entry {doc!r}: {exc}") from None

    def to_dict(self) -> dict:
        doc = {'kind': self.kind.value, 'c_in': self.c_in, 'c_out': self.c_out, 'n': self.n}
        if self.kind is LayerKind.CONV:
            doc['k'] = self.k
        else:
            doc['paths'] = self.paths
        return doc


@dataclass(frozen=True)
class CostReport:
    macs: int
    params: int
    baseline_macs: int
    reduction_vs_baseline: float

    def to_dict(self) -> dict:
        return {'macs': self.macs, 'params': self.params, 'baseline_macs': self.baseline_macs,
                'reduction_vs_baseline': self.reduction_vs_baseline}


def macs(spec: LayerSpec) -> int:
    """
    Multiply-accumulates of one layer.

    KxK conv: K^2 N^2 C_in C_out. P-path perceptron: P N^2 C_in (scaling and
    soft-thresholding) + P N^2 C_in C_out (channel mixing). With C_in = C_out = C
    these are K^2 N^2 C^2 and P N^2 C + P N^2 C^2.
    """
    n_sq = spec.n * spec.n
    if spec.kind is LayerKind.CONV:
        return spec.k * spec.k * n_sq * spec.c_in * spec.c_out
    return spec.paths * n_sq * spec.c_in + spec.paths * n_sq * spec.c_in * spec.c_out


def params(spec: LayerSpec) -> int:
    """
    Learnable parameters: K^2 C_in C_out for a bias-free conv, P (2 N^2 + C_in C_out)
    for a perceptron (scaling map, threshold map and 1x1 mix per path).
    """
    if spec.kind is LayerKind.CONV:
        return spec.k * spec.k * spec.c_in * spec.c_out
    return spec.paths * (2 * spec.n * spec.n + spec.c_in * spec.c_out)


def reduction(a: LayerSpec, b: LayerSpec) -> float:
    """
    Fractional MAC saving of ``b`` relative to ``a``: 1 - macs(b) / macs(a).

    Raises:
        ModelDescriptionError: if the layers have different N.
    """
    if a.n != b.n:
        raise ModelDescriptionError(f"layers must share N to compare, got {a.n} and {b.n}")
    base = macs(a)
    if base == 0:
        raise ModelDescriptionError("baseline layer has zero MACs")
    return 1.0 - macs(b) / base


def perceptron_cheaper(paths: int, c: int, k: int = 3) -> bool:
    """True when P-path perceptron MACs are below KxK conv MACs: P (1 + C) < K^2 C."""
    return paths * (1 + c) < k * k * c


def table1(c: int, n: int, k: int = 3, paths=(1, 3, 5)) -> pd.DataFrame:
    """
    MAC table for a C-channel N x N input, one row per layer type.

    Returns:
        pd.DataFrame: columns layer, formula, macs.
    """
    rows = [
        {'layer': f'{k}x{k} Conv2D', 'formula': 'K^2 N^2 C^2',
         'macs': macs(LayerSpec.conv(c, n, k=k))},
        {'layer': 'Scaling, Soft-thresholding', 'formula': 'N^2 C', 'macs': n * n * c},
        {'layer': 'Channel-wise Processing', 'formula': 'N^2 C^2', 'macs': n * n * c * c},
    ]
    for p in paths:
        rows.append({'layer': f'{p}-path HT-perceptron', 'formula': f'{p} N^2 C + {p} N^2 C^2',
                     'macs': macs(LayerSpec.perceptron(c, n, p))})
    return pd.DataFrame(rows, columns=['layer', 'formula', 'macs'])


def _baseline_equivalent(spec: LayerSpec) -> LayerSpec:
    if spec.kind is LayerKind.HT_PERCEPTRON:
        return LayerSpec.conv(spec.c_in, spec.n, k=3, c_out=spec.c_out)
    return spec


def parse_model(doc) -> list:
    """
    Layer list from a JSON document: either a list of layer objects or
    ``{"layers": [...]}``.
    """
    if isinstance(doc, dict):
        if 'layers' not in doc:
            raise ModelDescriptionError("model object must contain a 'layers' list")
        doc = doc['layers']
    if not isinstance(doc, list):
        raise ModelDescriptionError(f"model must be a list of layers, got {type(doc).__name__}")
    return [LayerSpec.from_dict(entry) for entry in doc]


def cost_report(layers) -> CostReport:
    """
    Total MACs and parameters of a layer list.

    The baseline prices every perceptron as the 3x3 conv with the same channels and
    N; ``reduction_vs_baseline`` is 1 - macs / baseline_macs (0 for an empty list).
    """
    layers = [entry if isinstance(entry, LayerSpec) else LayerSpec.from_dict(entry) for entry in layers]
    total_macs = sum(macs(spec) for spec in layers)
    total_params = sum(params(spec) for spec in layers)
    baseline = sum(macs(_baseline_equivalent(spec)) for spec in layers)
    saving = 1.0 - total_macs / baseline if baseline else 0.0
    logger.info("cost report over %d layers: %d MACs, %d params", len(layers), total_macs, total_params)
    return CostReport(macs=total_macs, params=total_params, baseline_macs=baseline,
                      reduction_vs_baseline=saving)


# ----------------------------------------------------------------------------
# ResNet-20
# ----------------------------------------------------------------------------

class Variant(Enum):
    BASELINE = 'baseline'
    HWT = 'hwt'
    HT = 'ht'


REPLACEMENT_POLICIES = ('none', 'second_conv', 'all_same_shape')


@dataclass(frozen=True)
class ConvSlot:
    """A 3x3 conv of ResNet-20 with its stage, block and position in the block."""
    name: str
    c_in: int
    c_out: int
    n: int
    stage: int
    block: int
    position: int


def resnet20_convs() -> list:
    """
    The 19 3x3 convolutions of CIFAR ResNet-20 in forward order (stem first).
    """
    name, c_in, c_out, n = RESNET20_STEM
    slots = [ConvSlot(name, c_in, c_out, n, stage=0, block=0, position=0)]
    prev = c_out
    for stage, (channels, side) in enumerate(RESNET20_STAGES, start=1):
        for block in range(RESNET20_BLOCKS_PER_STAGE):
            first_in = prev if block == 0 else channels
            slots.append(ConvSlot(f'stage{stage}.block{block}.conv1', first_in, channels, side,
                                  stage, block, 1))
            slots.append(ConvSlot(f'stage{stage}.block{block}.conv2', channels, channels, side,
                                  stage, block, 2))
        prev = channels
    return slots


def _resnet20_fixed_params() -> int:
    """BatchNorm, projection shortcuts and classifier: everything but the 3x3 convs."""
    total = 2 * RESNET20_STEM[2]                    # stem BN
    prev = RESNET20_STEM[2]
    for channels, _ in RESNET20_STAGES:
        total += RESNET20_BLOCKS_PER_STAGE * 2 * 2 * channels   # two BNs per block
        if channels != prev:
            total += prev * channels + 2 * channels             # 1x1 projection + BN
        prev = channels
    total += prev * RESNET20_CLASSES + RESNET20_CLASSES
    return total


def replaced_slots(policy: str) -> list:
    """
    Conv slots swapped for perceptrons under ``policy``.

    'none' keeps every conv, 'second_conv' replaces the second conv of every
    residual block, 'all_same_shape' replaces every block conv with C_in == C_out.
    """
    if policy not in REPLACEMENT_POLICIES:
        raise ModelDescriptionError(f"unknown replacement policy {policy!r}; "
                                    f"expected one of {REPLACEMENT_POLICIES}")
    slots = resnet20_convs()
    if policy == 'none':
        return []
    if policy == 'second_conv':
        return [s for s in slots if s.position == 2]
    return [s for s in slots if s.position > 0 and s.c_in == s.c_out]


def resnet20_params(variant='baseline', paths: int = 1, policy: str = 'second_conv') -> int:
    """
    Parameter count of CIFAR ResNet-20 or a transform-domain variant of it.

    The baseline uses 1x1 projection shortcuts and counts BatchNorm scale/shift,
    giving 272,474. Variants replace the convs chosen by ``policy`` with P-path
    perceptrons of H*W + C_in*C_out + H*W parameters per path.

    Raises:
        ModelDescriptionError: for an unknown variant or policy, or P outside 1..3.
    """
    try:
        variant = Variant(variant)
    except ValueError:
        raise ModelDescriptionError(f"unknown variant {variant!r}") from None
    total = _resnet20_fixed_params() + sum(9 * s.c_in * s.c_out for s in resnet20_convs())
    if variant is Variant.BASELINE:
        return total
    if paths not in (1, 2, 3):
        raise ModelDescriptionError(f"path count must be 1, 2 or 3, got {paths}")
    for slot in replaced_slots(policy):
        total -= 9 * slot.c_in * slot.c_out
        total += params(LayerSpec.perceptron(slot.c_in, slot.n, paths, c_out=slot.c_out))
    return total


def parameter_reduction(variant='hwt', paths: int = 1, policy: str = 'second_conv') -> float:
    """1 - params(variant) / params(baseline)."""
    return 1.0 - resnet20_params(variant, paths, policy) / resnet20_params('baseline')


def search_replacement_counts(target: int, paths: int = 1) -> list:
    """
    Finds how many same-shape block convs per stage must be replaced to hit ``target``.

    Convs within a stage with C_in == C_out are interchangeable for counting, so
    the search runs over per-stage counts.

    Returns:
        list: tuples (count in stage 1, stage 2, stage 3) whose count equals ``target``.
    """
    baseline = resnet20_params('baseline')
    per_stage = []
    for stage in range(1, len(RESNET20_STAGES) + 1):
        pool = [s for s in resnet20_convs() if s.stage == stage and s.c_in == s.c_out]
        delta = (params(LayerSpec.perceptron(pool[0].c_in, pool[0].n, paths))
                 - 9 * pool[0].c_in * pool[0].c_out)
        per_stage.append((len(pool), delta))
    matches = []
    for counts in itertools.product(*(range(size + 1) for size, _ in per_stage)):
        total = baseline + sum(c * delta for c, (_, delta) in zip(counts, per_stage))
        if total == target:
            matches.append(tuple(counts))
    logger.debug("replacement search for %d (P=%d): %s", target, paths, matches)
    return matches
