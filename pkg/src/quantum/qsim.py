"""
Statevector simulation of the four-qubit circuit that realizes the 4x4 2D Haar
transform.

Conventions: big-endian qubit order (q0 is the most significant bit of a basis
index, the leftmost tensor factor acts on q0), |0> = [1, 0]^T, and a 4x4 patch is
amplitude-encoded in row-major order so q0 q1 index the row and q2 q3 the column.

The gate sequence, applied in this order,

    SWAP(q0,q1) SWAP(q2,q3); H(q1) H(q3); X(q1) X(q3); CH(q1->q0) CH(q3->q2); X(q1) X(q3)

multiplies out to (S (x) S)(H4 (x) H4)(S (x) S): the Haar transform conjugated by
the bit reversal of each two-qubit register. The pipeline therefore relabels the
qubits of the encoded state (no gate needed) and reads coefficients out through
the same permutation, READOUT_PERMUTATION.
"""
import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd
from tqdm import tqdm

from config.hwt_config import DEFAULT_SHOTS, NOISE_TRIALS, PATCH_SIZE
from src.errors import EncodingError, ParameterError, QubitIndexError, ShapeError
from src.haar.haar_core import HaarPlan, dwt2d
from src.project_logger import get_logger

logger = get_logger(__name__)

_H = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128) / np.sqrt(2.0)

GATE_MATRICES = {
    'I': np.eye(2, dtype=np.complex128),
    'H': _H,
    'X': np.array([[0, 1], [1, 0]], dtype=np.complex128),
    'Y': np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    'Z': np.array([[1, 0], [0, -1]], dtype=np.complex128),
    'SWAP': np.array([[1, 0, 0, 0],
                      [0, 0, 1, 0],
                      [0, 1, 0, 0],
                      [0, 0, 0, 1]], dtype=np.complex128),
    # basis |control target>; H acts on the target when control is |1>
    'CH': np.block([[np.eye(2), np.zeros((2, 2))],
                    [np.zeros((2, 2)), _H]]).astype(np.complex128),
}

GATE_ARITY = {kind: int(np.log2(mat.shape[0])) for kind, mat in GATE_MATRICES.items()}
PAULIS = ('X', 'Y', 'Z')

HAAR_QUBITS = 4


class ReadoutMode(Enum):
    EXACT_STATEVECTOR = 'exact'
    SHOT_MAGNITUDES = 'shots'


@dataclass(frozen=True)
class GateOp:
    """One gate application. For CH the qubits are (control, target)."""
    kind: str
    qubits: tuple

    def to_dict(self) -> dict:
        return {'kind': self.kind, 'qubits': list(self.qubits)}


@dataclass(frozen=True)
class GateSeq:
    """Ordered gate applications on an ``n_qubits`` register (first op applied first)."""
    n_qubits: int
    ops: tuple = ()

    def __post_init__(self):
        for op in self.ops:
            _validate(op.kind, op.qubits, self.n_qubits)

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)


@dataclass
class StateVector:
    """2^n complex amplitudes in big-endian computational-basis order."""
    n_qubits: int
    amps: np.ndarray

    def __post_init__(self):
        self.amps = np.asarray(self.amps, dtype=np.complex128)
        if self.amps.shape != (2 ** self.n_qubits,):
            raise ShapeError(f"{self.n_qubits} qubits need {2 ** self.n_qubits} amplitudes, "
                             f"got shape {self.amps.shape}")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    @classmethod
    def zero(cls, n_qubits: int) -> 'StateVector':
        amps = np.zeros(2 ** n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(n_qubits, amps)


@dataclass
class MeasurementResult:
    """
    Attributes:
        shots (int): Number of samples drawn.
        counts (np.ndarray): Hits per basis state, sums to ``shots``.
        magnitudes (np.ndarray): sqrt(counts / shots), i.e. estimated |amplitude|.
        mode (ReadoutMode): How the result was produced.
    """
    shots: int
    counts: np.ndarray
    magnitudes: np.ndarray
    mode: ReadoutMode = ReadoutMode.SHOT_MAGNITUDES
    probabilities: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.probabilities is None:
            self.probabilities = self.counts / self.shots


def _validate(kind: str, qubits, n_qubits: int) -> None:
    if kind not in GATE_MATRICES:
        raise ParameterError(f"unknown gate {kind!r}; expected one of {sorted(GATE_MATRICES)}")
    qubits = tuple(qubits)
    if len(qubits) != GATE_ARITY[kind]:
        raise QubitIndexError(f"{kind} acts on {GATE_ARITY[kind]} qubit(s), got {qubits}")
    for q in qubits:
        if int(q) != q or not 0 <= q < n_qubits:
            raise QubitIndexError(f"qubit index {q} out of range for a {n_qubits}-qubit register")
    if len(set(qubits)) != len(qubits):
        raise QubitIndexError(f"{kind} needs distinct qubits, got {qubits}")


def _apply_matrix(amps: np.ndarray, matrix: np.ndarray, qubits: tuple, n_qubits: int) -> np.ndarray:
    # amps may carry trailing batch axes (used to lift gates to full matrices)
    batch = amps.shape[1:]
    k = len(qubits)
    tensor = amps.reshape((2,) * n_qubits + batch)
    tensor = np.moveaxis(tensor, list(qubits), list(range(k)))
    moved_shape = tensor.shape
    tensor = (matrix @ tensor.reshape(2 ** k, -1)).reshape(moved_shape)
    tensor = np.moveaxis(tensor, list(range(k)), list(qubits))
    return tensor.reshape((2 ** n_qubits,) + batch)


def apply_gate(state: StateVector, gate, qubits=None) -> StateVector:
    """
    Applies one gate and returns the new state.

    Args:
        state (StateVector): Input state, left unchanged.
        gate (str | GateOp): Gate kind ('H', 'X', 'Y', 'Z', 'I', 'SWAP', 'CH') or a GateOp.
        qubits (tuple): Target qubits; (control, target) for CH. Ignored for a GateOp.

    Raises:
        QubitIndexError: for out-of-range indices or control == target.
    """
    if isinstance(gate, GateOp):
        kind, qubits = gate.kind, gate.qubits
    else:
        kind = gate
        qubits = (qubits,) if isinstance(qubits, (int, np.integer)) else tuple(qubits)
    _validate(kind, qubits, state.n_qubits)
    amps = _apply_matrix(state.amps, GATE_MATRICES[kind], tuple(int(q) for q in qubits),
                         state.n_qubits)
    return StateVector(state.n_qubits, amps)


def gate_lift(gate: GateOp, n_qubits: int) -> np.ndarray:
    """Full 2^n x 2^n matrix of a single gate on an n-qubit register."""
    _validate(gate.kind, gate.qubits, n_qubits)
    eye = np.eye(2 ** n_qubits, dtype=np.complex128)
    return _apply_matrix(eye, GATE_MATRICES[gate.kind], tuple(gate.qubits), n_qubits)


def run_circuit(state: StateVector, seq: GateSeq) -> StateVector:
    if seq.n_qubits != state.n_qubits:
        raise ShapeError(f"circuit is for {seq.n_qubits} qubits, state has {state.n_qubits}")
    for op in seq:
        state = apply_gate(state, op)
    return state


def haar_circuit() -> GateSeq:
    """
    The fixed four-qubit gate sequence of the Haar realization, in application order.

    The product reads (I X I X)(CH_10 CH_32)(I X I X)(I H I H)(S S) right to left.
    Identity factors are not emitted as gates.
    """
    ops = [GateOp('SWAP', (0, 1)), GateOp('SWAP', (2, 3)),
           GateOp('H', (1,)), GateOp('H', (3,)),
           GateOp('X', (1,)), GateOp('X', (3,)),
           GateOp('CH', (1, 0)), GateOp('CH', (3, 2)),
           GateOp('X', (1,)), GateOp('X', (3,))]
    return GateSeq(HAAR_QUBITS, tuple(ops))


def circuit_unitary(seq: GateSeq) -> np.ndarray:
    """
    Dense unitary of a gate sequence (product of lifted gates, last op leftmost).

    Returns a real array when every entry is real, which is the case for the
    Haar circuit; complex otherwise.
    """
    mat = np.eye(2 ** seq.n_qubits, dtype=np.complex128)
    for op in seq:
        mat = _apply_matrix(mat, GATE_MATRICES[op.kind], tuple(op.qubits), seq.n_qubits)
    if np.max(np.abs(mat.imag), initial=0.0) == 0.0:
        return mat.real.copy()
    return mat


def circuit_stats(seq: GateSeq) -> dict:
    """Gate count, depth (as-soon-as-possible layering) and count per gate kind."""
    busy_until = [0] * seq.n_qubits
    counts = {}
    for op in seq:
        layer = max(busy_until[q] for q in op.qubits) + 1
        for q in op.qubits:
            busy_until[q] = layer
        counts[op.kind] = counts.get(op.kind, 0) + 1
    return {'gates': len(seq), 'depth': max(busy_until, default=0), 'counts': counts}


def gates_to_json(seq: GateSeq) -> str:
    return json.dumps({'n_qubits': seq.n_qubits, 'gates': [op.to_dict() for op in seq]},
                      sort_keys=True)


def gates_from_json(text: str) -> GateSeq:
    doc = json.loads(text)
    try:
        ops = tuple(GateOp(g['kind'], tuple(g['qubits'])) for g in doc['gates'])
        return GateSeq(int(doc['n_qubits']), ops)
    except (KeyError, TypeError) as exc:
        raise ParameterError(f"malformed gate list: {exc}") from None


def _register_reversal_permutation(n_qubits: int, register: int) -> np.ndarray:
    """Index map reversing the bit order inside each ``register``-qubit block."""
    perm = np.empty(2 ** n_qubits, dtype=np.int64)
    for idx in range(2 ** n_qubits):
        bits = [(idx >> (n_qubits - 1 - q)) & 1 for q in range(n_qubits)]
        blocks = [bits[s:s + register][::-1] for s in range(0, n_qubits, register)]
        flipped = [b for block in blocks for b in block]
        perm[idx] = int(''.join(str(b) for b in flipped), 2)
    return perm


# Frozen readout map: circuit_unitary(haar_circuit())[i, j] == kron(H4, H4)[P[i], P[j]].
# It is an involution, so it also serves as the input relabeling.
READOUT_PERMUTATION = np.array([0, 2, 1, 3, 8, 10, 9, 11, 4, 6, 5, 7, 12, 14, 13, 15])


def encode_patch(patch):
    """
    Amplitude-encodes a 4x4 patch (row-major, L2-normalized).

    Args:
        patch (array_like): 4x4 real values, not all zero.

    Returns:
        tuple: (StateVector on 4 qubits, original L2 norm).

    Raises:
        ShapeError: if the patch is not 4x4.
        EncodingError: if the patch is all zero or contains non-finite values.
    """
    patch = np.asarray(patch, dtype=np.float64)
    if patch.shape != (PATCH_SIZE, PATCH_SIZE):
        raise ShapeError(f"expected a {PATCH_SIZE}x{PATCH_SIZE} patch, got shape {patch.shape}")
    if not np.all(np.isfinite(patch)):
        raise EncodingError("patch contains non-finite values")
    norm = float(np.linalg.norm(patch))
    if norm == 0.0:
        raise EncodingError("cannot amplitude-encode an all-zero patch")
    if np.any(patch < 0):
        logger.warning("patch has negative entries; encoding signed amplitudes")
    return StateVector(HAAR_QUBITS, patch.ravel(order='C') / norm), norm


def _prepared_state(patch):
    state, norm = encode_patch(patch)
    # logical qubit relabeling of the input registers
    return StateVector(HAAR_QUBITS, state.amps[READOUT_PERMUTATION]), norm


def _readout(values: np.ndarray, norm: float) -> np.ndarray:
    return values[READOUT_PERMUTATION].reshape(PATCH_SIZE, PATCH_SIZE) * norm


def make_rng(seed) -> np.random.Generator:
    """NumPy Generator on the PCG64 bit generator; ``seed`` may be an int or SeedSequence."""
    return np.random.Generator(np.random.PCG64(seed))


def measure(state: StateVector, shots: int, rng: np.random.Generator) -> MeasurementResult:
    """
    Samples ``shots`` computational-basis measurements.

    Raises:
        ParameterError: if shots < 1.
    """
    if int(shots) != shots or shots < 1:
        raise ParameterError(f"shots must be a positive integer, got {shots}")
    probs = state.probabilities()
    probs = probs / probs.sum()
    counts = rng.multinomial(int(shots), probs)
    magnitudes = np.sqrt(counts / shots)
    return MeasurementResult(shots=int(shots), counts=counts, magnitudes=magnitudes)


def sample_coefficients(patch, shots: int = DEFAULT_SHOTS, seed=0):
    """
    Shot-based readout: magnitudes of the 2D Haar coefficients, signs lost.

    Returns:
        tuple: (4x4 non-negative magnitudes scaled by the patch norm, MeasurementResult).
    """
    state, norm = _prepared_state(patch)
    out = run_circuit(state, haar_circuit())
    result = measure(out, shots, make_rng(seed))
    logger.debug("sampled %d shots (seed %s)", shots, seed)
    return _readout(result.magnitudes, norm), result


def run_2d_haar_quantum(patch, mode=ReadoutMode.EXACT_STATEVECTOR, shots: int = DEFAULT_SHOTS,
                        seed=0) -> np.ndarray:
    """
    2D Haar transform of a 4x4 patch through the gate-level circuit.

    Exact mode reads the final amplitudes and returns signed coefficients equal to
    ``dwt2d``. Shot mode samples ``shots`` measurements and returns
    sqrt(empirical probability) * norm, which carries magnitudes only.

    Raises:
        ParameterError: for shots < 1 in shot mode.
    """
    mode = ReadoutMode(mode)
    if mode is ReadoutMode.SHOT_MAGNITUDES:
        magnitudes, _ = sample_coefficients(patch, shots=shots, seed=seed)
        return magnitudes
    state, norm = _prepared_state(patch)
    out = run_circuit(state, haar_circuit())
    return _readout(out.amps.real, norm)


def classical_reference(patch) -> np.ndarray:
    """Full-depth orthonormal dwt2d of a 4x4 patch."""
    return dwt2d(np.asarray(patch, dtype=np.float64), HaarPlan.full(PATCH_SIZE))


def mse(Q, C) -> float:
    """Mean of squared entrywise differences."""
    Q = np.asarray(Q, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    if Q.shape != C.shape:
        raise ShapeError(f"shape mismatch: {Q.shape} vs {C.shape}")
    return float(np.mean((Q - C) ** 2))


def max_abs_error(ideal, noisy) -> float:
    """Largest entrywise absolute deviation."""
    ideal = np.asarray(ideal, dtype=np.float64)
    noisy = np.asarray(noisy, dtype=np.float64)
    if ideal.shape != noisy.shape:
        raise ShapeError(f"shape mismatch: {ideal.shape} vs {noisy.shape}")
    return float(np.max(np.abs(ideal - noisy)))


def _pauli_channel(state: StateVector, p: float, rng: np.random.Generator, qubits, paulis) -> tuple:
    # Draw every random number up front so runs at different p share the same
    # draws for a given seed.
    fire = rng.random(len(qubits)) < p
    picks = rng.integers(len(paulis), size=len(qubits))
    y_count = 0
    for q, fired, pick in zip(qubits, fire, picks):
        if fired:
            kind = paulis[pick]
            state = apply_gate(state, kind, (q,))
            y_count += kind == 'Y'
    return state, y_count


def pauli_noise_trial(patch, p: float, seed=0, paulis=PAULIS, per_gate: bool = False) -> np.ndarray:
    """
    One noisy run of the Haar circuit with exact readout.

    After the gate sequence each qubit independently suffers, with probability p,
    a Pauli drawn uniformly from ``paulis``. With ``per_gate`` the channel acts on
    the touched qubits after every gate instead. Y = i X Z, so the global phase
    i^(number of Y errors) is divided out before reading real coefficients.

    Raises:
        ParameterError: if p is outside [0, 1] or ``paulis`` names a non-Pauli gate.
    """
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"error probability must be in [0, 1], got {p}")
    paulis = tuple(paulis)
    if not paulis or any(kind not in PAULIS for kind in paulis):
        raise ParameterError(f"paulis must be drawn from {PAULIS}, got {paulis}")
    rng = make_rng(seed)
    state, norm = _prepared_state(patch)
    y_count = 0
    for op in haar_circuit():
        state = apply_gate(state, op)
        if per_gate:
            state, hits = _pauli_channel(state, p, rng, op.qubits, paulis)
            y_count += hits
    if not per_gate:
        state, y_count = _pauli_channel(state, p, rng, range(HAAR_QUBITS), paulis)
    amps = state.amps / (1j ** y_count)
    return _readout(amps.real, norm)


def noise_sweep(patch, probs, trials: int = NOISE_TRIALS, seed=0, paulis=PAULIS,
                per_gate: bool = False, progress: bool = False) -> pd.DataFrame:
    """
    Mean and worst eps_max over ``trials`` noisy runs for each p in ``probs``.

    Trial t uses the t-th child of SeedSequence(seed) at every p.

    Returns:
        pd.DataFrame: columns p, trials, mean_eps_max, max_eps_max.
    """
    if int(trials) != trials or trials < 1:
        raise ParameterError(f"trials must be a positive integer, got {trials}")
    probs = [float(p) for p in probs]
    for p in probs:
        if not 0.0 <= p <= 1.0:
            raise ParameterError(f"error probability must be in [0, 1], got {p}")
    ideal = run_2d_haar_quantum(patch)
    children = np.random.SeedSequence(seed).spawn(int(trials))
    rows = []
    for p in probs:
        errors = np.array([
            max_abs_error(ideal, pauli_noise_trial(patch, p, seed=child, paulis=paulis,
                                                   per_gate=per_gate))
            for child in tqdm(children, disable=not progress, desc=f'p={p}')
        ])
        rows.append({'p': p, 'trials': int(trials),
                     'mean_eps_max': float(errors.mean()), 'max_eps_max': float(errors.max())})
        logger.info("noise sweep p=%s: mean eps_max %.3e over %d trials", p, errors.mean(), trials)
    return pd.DataFrame(rows, columns=['p', 'trials', 'mean_eps_max', 'max_eps_max'])


def run_patchwise(image, mode=ReadoutMode.EXACT_STATEVECTOR, shots: int = DEFAULT_SHOTS,
                  seed=0) -> np.ndarray:
    """
    Applies the quantum 2D Haar pipeline to every 4x4 tile of an image.

    All-zero tiles map to zero coefficients. In shot mode tile k is sampled with
    the k-th child of SeedSequence(seed).

    Raises:
        ShapeError: if the image sides are not multiples of 4.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.shape[0] % PATCH_SIZE or image.shape[1] % PATCH_SIZE:
        raise ShapeError(f"image sides must be multiples of {PATCH_SIZE}, got shape {image.shape}")
    rows, cols = image.shape[0] // PATCH_SIZE, image.shape[1] // PATCH_SIZE
    children = np.random.SeedSequence(seed).spawn(rows * cols)
    out = np.zeros_like(image)
    for k in range(rows * cols):
        r, c = divmod(k, cols)
        block = (slice(r * PATCH_SIZE, (r + 1) * PATCH_SIZE), slice(c * PATCH_SIZE, (c + 1) * PATCH_SIZE))
        tile = image[block]
        if not np.any(tile):
            continue
        out[block] = run_2d_haar_quantum(tile, mode=mode, shots=shots, seed=children[k])
    logger.info("patch-wise transform of %dx%d image (%d tiles, mode %s)",
                image.shape[0], image.shape[1], rows * cols, ReadoutMode(mode).value)
    return out


def quantum_report(patch, mode=ReadoutMode.EXACT_STATEVECTOR, shots: int = DEFAULT_SHOTS,
                   seed=0) -> dict:
    """
    Report comparing the circuit output with the classical transform.

    ``mse_vs_classical`` and ``eps_max`` compare against the signed classical
    coefficients; ``mse_vs_classical_magnitude`` against their absolute values.
    """
    mode = ReadoutMode(mode)
    coeffs = run_2d_haar_quantum(patch, mode=mode, shots=shots, seed=seed)
    classical = classical_reference(patch)
    logger.info("quantum run mode=%s shots=%s seed=%s", mode.value, shots, seed)
    return {
        'mode': mode.value,
        'shots': int(shots) if mode is ReadoutMode.SHOT_MAGNITUDES else None,
        'seed': seed,
        'coefficients': coeffs.ravel().tolist(),
        'mse_vs_classical': mse(coeffs, classical),
        'mse_vs_classical_magnitude': mse(coeffs, np.abs(classical)),
        'eps_max': max_abs_error(classical, coeffs),
    }
