"""Exact pure-state quantum mechanics for up to four qubits.

Conventions used throughout the package:

* Qubit 0 is the most significant bit of the amplitude index.
* A measurement at angle ``theta`` projects onto
  ``|+theta> = cos(theta/2)|0> + sin(theta/2)|1>`` (outcome +1) and
  ``|-theta> = sin(theta/2)|0> - cos(theta/2)|1>`` (outcome -1).
  With this choice the singlet has ``E(a, b) = -cos(a - b)``.
* Bell labels: C0 = Psi-, C1 = Phi+, C2 = Phi-, C3 = Psi+.

The scalar API (``PureState`` and friends) is thin sugar over batched
kernels (``project_batch``, ``bell_measure_batch``) which the protocol
runners call on whole chunks of trials at once.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rng import sample_categorical

MAX_QUBITS = 4
NORM_TOL = 1e-9
DEGENERATE_NORM = 1e-15
TWO_PI = 2.0 * math.pi
SQRT_HALF = 1.0 / math.sqrt(2.0)

OUTCOMES = (1, -1)


class BellLabel(enum.IntEnum):
    C0 = 0
    C1 = 1
    C2 = 2
    C3 = 3

    PSI_MINUS = 0
    PHI_PLUS = 1
    PHI_MINUS = 2
    PSI_PLUS = 3

    @classmethod
    def parse(cls, value: "str | int | BellLabel") -> "BellLabel":
        """Accept ``BellLabel``, ``0..3``, ``"C2"``, or ``"phi_minus"``."""
        if isinstance(value, BellLabel):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        key = str(value).strip().upper().replace("-", "_")
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown Bell label {value!r}") from None

    def __str__(self) -> str:
        return f"C{int(self)}"


# rows indexed by label; columns by the two-qubit basis index 2*bit_i + bit_j
_BELL_VECTORS = np.array(
    [
        [0.0, SQRT_HALF, -SQRT_HALF, 0.0],
        [SQRT_HALF, 0.0, 0.0, SQRT_HALF],
        [SQRT_HALF, 0.0, 0.0, -SQRT_HALF],
        [0.0, SQRT_HALF, SQRT_HALF, 0.0],
    ],
    dtype=complex,
)


def normalize_angle(theta: float) -> float:
    """Map ``theta`` into ``[0, 2*pi)``."""
    theta = float(theta)
    if not math.isfinite(theta):
        raise ValueError(f"angle must be finite, got {theta!r}")
    t = theta % TWO_PI
    # x % 2pi can round up to exactly 2pi for tiny negative x
    return 0.0 if t >= TWO_PI else t


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized state vector on 1 to 4 qubits."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        n = amps.size
        if n < 2 or n & (n - 1) or n > 2**MAX_QUBITS:
            raise ValueError(f"amplitude count must be 2..{2**MAX_QUBITS} and a power of two, got {n}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def fidelity(self, other: "PureState") -> float:
        """``|<self|other>|^2``; insensitive to global phase."""
        if other.n_qubits != self.n_qubits:
            raise ValueError("fidelity needs states on the same number of qubits")
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)

    def __repr__(self) -> str:
        return f"PureState(n_qubits={self.n_qubits}, amplitudes={np.round(self.amplitudes, 6).tolist()})"


def basis_state(bits: str) -> PureState:
    """Computational basis state, e.g. ``basis_state("01")``."""
    if not bits or set(bits) - {"0", "1"}:
        raise ValueError(f"bits must be a non-empty 0/1 string, got {bits!r}")
    amps = np.zeros(2 ** len(bits), dtype=complex)
    amps[int(bits, 2)] = 1.0
    return PureState(amps)


def bell_state(label: "BellLabel | str | int") -> PureState:
    return PureState(_BELL_VECTORS[BellLabel.parse(label)].copy())


def tensor(s1: PureState, s2: PureState) -> PureState:
    if s1.n_qubits + s2.n_qubits > MAX_QUBITS:
        raise ValueError(f"tensor product would exceed {MAX_QUBITS} qubits")
    return PureState(np.kron(s1.amplitudes, s2.amplitudes))


def _check_qubit(n_qubits: int, qubit: int) -> int:
    if not 0 <= int(qubit) < n_qubits:
        raise ValueError(f"qubit index {qubit} out of range for {n_qubits}-qubit state")
    return int(qubit)


def _split(amps: np.ndarray, n_qubits: int, qubit: int) -> np.ndarray:
    m = amps.shape[0]
    return amps.reshape(m, 2**qubit, 2, 2 ** (n_qubits - qubit - 1))


def _branches(amps: np.ndarray, n_qubits: int, qubit: int, theta: np.ndarray):
    """Contract ``qubit`` with the +/- basis vectors; returns (c, s, plus, minus)."""
    psi = _split(amps, n_qubits, qubit)
    half = np.asarray(theta, dtype=float).reshape(-1, 1, 1) / 2.0
    c, s = np.cos(half), np.sin(half)
    plus = c * psi[:, :, 0, :] + s * psi[:, :, 1, :]
    minus = s * psi[:, :, 0, :] - c * psi[:, :, 1, :]
    return c, s, plus, minus


def probabilities_batch(amps: np.ndarray, n_qubits: int, qubit: int, theta) -> tuple[np.ndarray, np.ndarray]:
    """Born probabilities of +1 and -1 for every row of ``amps``."""
    _, _, plus, minus = _branches(amps, n_qubits, qubit, theta)
    p_plus = np.sum(np.abs(plus) ** 2, axis=(1, 2))
    p_minus = np.sum(np.abs(minus) ** 2, axis=(1, 2))
    return p_plus, p_minus


def project_batch(amps: np.ndarray, n_qubits: int, qubit: int, theta, u) -> tuple[np.ndarray, np.ndarray]:
    """Measure ``qubit`` on every row; outcome is +1 iff ``u < p_plus``.

    Returns ``(outcomes, collapsed)`` with ``outcomes`` an int8 array of +/-1.
    """
    m = amps.shape[0]
    c, s, plus, minus = _branches(amps, n_qubits, qubit, theta)
    p_plus = np.sum(np.abs(plus) ** 2, axis=(1, 2))
    p_minus = np.sum(np.abs(minus) ** 2, axis=(1, 2))
    # rounding residue counts as zero so that u == 0 cannot select it
    tol = DEGENERATE_NORM**2
    take_plus = (np.asarray(u, dtype=float) < np.where(p_plus < tol, 0.0, p_plus)) | (p_minus < tol)
    prob = np.where(take_plus, p_plus, p_minus)
    if np.any(prob < DEGENERATE_NORM**2):
        raise RuntimeError("degenerate projection: selected branch has vanishing norm")
    coeff = np.where(take_plus[:, None, None], plus, minus) / np.sqrt(prob)[:, None, None]
    v0 = np.where(take_plus[:, None, None], c, s)
    v1 = np.where(take_plus[:, None, None], s, -c)
    out = np.empty((m, coeff.shape[1], 2, coeff.shape[2]), dtype=complex)
    out[:, :, 0, :] = v0 * coeff
    out[:, :, 1, :] = v1 * coeff
    outcomes = np.where(take_plus, 1, -1).astype(np.int8)
    return outcomes, out.reshape(m, -1)


def _pair_view(amps: np.ndarray, n_qubits: int, qi: int, qj: int) -> np.ndarray:
    m = amps.shape[0]
    t = amps.reshape((m,) + (2,) * n_qubits)
    t = np.moveaxis(t, (qi + 1, qj + 1), (n_qubits - 1, n_qubits))
    return t.reshape(m, -1, 4)


def _unpair_view(pairs: np.ndarray, n_qubits: int, qi: int, qj: int) -> np.ndarray:
    m = pairs.shape[0]
    t = pairs.reshape((m,) + (2,) * n_qubits)
    t = np.moveaxis(t, (n_qubits - 1, n_qubits), (qi + 1, qj + 1))
    return t.reshape(m, -1)


def bell_probabilities_batch(amps: np.ndarray, n_qubits: int, qi: int, qj: int) -> np.ndarray:
    pairs = _pair_view(amps, n_qubits, qi, qj)
    overlaps = np.einsum("kc,mrc->mrk", _BELL_VECTORS.conj(), pairs)
    return np.sum(np.abs(overlaps) ** 2, axis=1)


def bell_measure_batch(amps: np.ndarray, n_qubits: int, qi: int, qj: int, u) -> tuple[np.ndarray, np.ndarray]:
    """Bell-basis measurement of qubits ``(qi, qj)`` on every row.

    Labels are drawn by cumulative-sum inversion in C0..C3 order.
    """
    pairs = _pair_view(amps, n_qubits, qi, qj)
    overlaps = np.einsum("kc,mrc->mrk", _BELL_VECTORS.conj(), pairs)
    probs = np.sum(np.abs(overlaps) ** 2, axis=1)
    labels = sample_categorical(np.where(probs < DEGENERATE_NORM**2, 0.0, probs), u)
    rows = np.arange(amps.shape[0])
    p = probs[rows, labels]
    if np.any(p < DEGENERATE_NORM**2):
        raise RuntimeError("degenerate Bell projection: selected label has vanishing probability")
    rest = overlaps[rows, :, labels] / np.sqrt(p)[:, None]
    collapsed = rest[:, :, None] * _BELL_VECTORS[labels][:, None, :]
    return labels.astype(np.int8), _unpair_view(collapsed, n_qubits, qi, qj)


def outcome_probabilities(state: PureState, qubit: int, angle: float) -> tuple[float, float]:
    qubit = _check_qubit(state.n_qubits, qubit)
    p_plus, p_minus = probabilities_batch(state.amplitudes[None, :], state.n_qubits, qubit, [normalize_angle(angle)])
    return float(p_plus[0]), float(p_minus[0])


def measure_qubit(state: PureState, qubit: int, angle: float, u: float) -> tuple[int, PureState]:
    """Deterministic projective measurement driven by the uniform draw ``u``."""
    qubit = _check_qubit(state.n_qubits, qubit)
    if not 0.0 <= u < 1.0:
        raise ValueError(f"u must lie in [0, 1), got {u!r}")
    outcomes, amps = project_batch(state.amplitudes[None, :], state.n_qubits, qubit, [normalize_angle(angle)], [u])
    return int(outcomes[0]), PureState(amps[0])


def project(state: PureState, qubit: int, angle: float, outcome: int) -> tuple[float, PureState | None]:
    """Probability of ``outcome`` and the renormalized post-measurement state.

    The state is ``None`` when the outcome has probability below 1e-30.
    """
    qubit = _check_qubit(state.n_qubits, qubit)
    if outcome not in OUTCOMES:
        raise ValueError(f"outcome must be +1 or -1, got {outcome!r}")
    p_plus, p_minus = outcome_probabilities(state, qubit, angle)
    prob = p_plus if outcome == 1 else p_minus
    if prob < DEGENERATE_NORM**2:
        return prob, None
    c, s, plus, minus = _branches(state.amplitudes[None, :], state.n_qubits, qubit, [normalize_angle(angle)])
    coeff = (plus if outcome == 1 else minus) / math.sqrt(prob)
    v0, v1 = (c, s) if outcome == 1 else (s, -c)
    out = np.empty((1, coeff.shape[1], 2, coeff.shape[2]), dtype=complex)
    out[:, :, 0, :] = v0 * coeff
    out[:, :, 1, :] = v1 * coeff
    return prob, PureState(out.reshape(-1))


def bell_probabilities(state: PureState, qubit_i: int, qubit_j: int) -> np.ndarray:
    """Probabilities of the four Bell labels on qubits ``(i, j)``."""
    qi = _check_qubit(state.n_qubits, qubit_i)
    qj = _check_qubit(state.n_qubits, qubit_j)
    if qi == qj:
        raise ValueError("Bell measurement needs two distinct qubits")
    return bell_probabilities_batch(state.amplitudes[None, :], state.n_qubits, qi, qj)[0]


def bell_project(state: PureState, qubit_i: int, qubit_j: int, label) -> tuple[float, PureState | None]:
    """Probability of Bell ``label`` on ``(i, j)`` and the collapsed state."""
    label = BellLabel.parse(label)
    probs = bell_probabilities(state, qubit_i, qubit_j)
    prob = float(probs[label])
    if prob < DEGENERATE_NORM**2:
        return prob, None
    pairs = _pair_view(state.amplitudes[None, :], state.n_qubits, qubit_i, qubit_j)
    rest = pairs[0] @ _BELL_VECTORS[label].conj() / math.sqrt(prob)
    collapsed = rest[None, :, None] * _BELL_VECTORS[label][None, None, :]
    return prob, PureState(_unpair_view(collapsed, state.n_qubits, qubit_i, qubit_j)[0])


def bell_measure(state: PureState, qubit_i: int, qubit_j: int, u: float) -> tuple[BellLabel, PureState]:
    qi = _check_qubit(state.n_qubits, qubit_i)
    qj = _check_qubit(state.n_qubits, qubit_j)
    if qi == qj:
        raise ValueError("Bell measurement needs two distinct qubits")
    if not 0.0 <= u < 1.0:
        raise ValueError(f"u must lie in [0, 1), got {u!r}")
    labels, amps = bell_measure_batch(state.amplitudes[None, :], state.n_qubits, qi, qj, [u])
    return BellLabel(int(labels[0])), PureState(amps[0])


def reduce_to(state: PureState, keep: Sequence[int]) -> PureState:
    """Extract the factor on ``keep`` from a state that is a product across the cut.

    Raises ``ValueError`` if the state is entangled across the cut.
    """
    n = state.n_qubits
    keep = [_check_qubit(n, q) for q in keep]
    rest = [q for q in range(n) if q not in keep]
    t = state.amplitudes.reshape((2,) * n).transpose(keep + rest)
    mat = t.reshape(2 ** len(keep), 2 ** len(rest))
    u, sv, _ = np.linalg.svd(mat)
    if len(sv) > 1 and sv[1] > 1e-6:
        raise ValueError("state is entangled across the requested cut")
    return PureState(u[:, 0])


def joint_distribution(state: PureState, a: float, b: float, order: tuple[int, int] = (0, 1)) -> np.ndarray:
    """``P(A, B)`` for qubit 0 at angle ``a`` and qubit 1 at ``b``.

    Returns a 2x2 array indexed ``[A_index, B_index]`` with index 0 for
    outcome +1 and 1 for -1. ``order`` chooses which qubit is measured first;
    the result is the same either way.
    """
    if state.n_qubits != 2:
        raise ValueError(f"joint_distribution needs a 2-qubit state, got {state.n_qubits}")
    if sorted(order) != [0, 1]:
        raise ValueError("order must be a permutation of (0, 1)")
    angles = {0: normalize_angle(a), 1: normalize_angle(b)}
    first, second = order
    table = np.zeros((2, 2))
    for i, o1 in enumerate(OUTCOMES):
        p1, post = project(state, first, angles[first], o1)
        if post is None:
            continue
        q_plus, q_minus = outcome_probabilities(post, second, angles[second])
        for j, p2 in enumerate((q_plus, q_minus)):
            idx = (i, j) if first == 0 else (j, i)
            table[idx] = p1 * p2
    return table


def correlation(state: PureState, a: float, b: float) -> float:
    """``E(a, b) = sum A*B*P(A, B)``."""
    table = joint_distribution(state, a, b)
    return float(table[0, 0] + table[1, 1] - table[0, 1] - table[1, 0])


def bell_joint_distribution(label, a: float, b: float) -> np.ndarray:
    return joint_distribution(bell_state(label), a, b)
