"""Monte Carlo runners for the V-shaped, W-shaped and classical-filter experiments.

Each runner returns an :class:`Ensemble`: a columnar record of every trial.
Trial ``t`` consumes a fixed set of uniform slots from
``rng.uniforms(seed, t, ...)``, so results do not depend on chunking or on
the number of worker threads.

Slot layout (shared by all protocols so seed schedules line up):

======  ==========================  ===========================
slot    quantum protocols            classical filters
======  ==========================  ===========================
0       setting pair                 Alice setting bit
1       measurement at A             Alice outcome bit
2       measurement at B             Bob setting bit
3       preparation label / M        Bob outcome bit
4       (unused)                     keep / hopper draw
======  ==========================  ===========================
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, Sequence

import numpy as np

from . import quantum as qc
from .quantum import BellLabel, normalize_angle
from .rng import check_seed, sample_categorical, uniforms

DEFAULT_TRIALS = 1_000_000
DEFAULT_CHUNK = 1 << 16
ZERO_PROB = 1e-12

V_FIXED = "v_fixed"
V_RANDOM = "v_random"
W_SWAP = "w_swap"
CHARLIE = "charlie"
HOPPER = "hopper"
PROTOCOLS = (V_FIXED, V_RANDOM, W_SWAP, CHARLIE, HOPPER)


class Geometry(str, enum.Enum):
    """Where the swap measurement M sits relative to the wing measurements."""

    M_PAST = "MPast"
    M_INTERMEDIATE = "MIntermediate"
    M_FUTURE = "MFuture"

    @property
    def order(self) -> tuple[str, str, str]:
        return {
            Geometry.M_PAST: ("M", "A", "B"),
            Geometry.M_INTERMEDIATE: ("A", "M", "B"),
            Geometry.M_FUTURE: ("A", "B", "M"),
        }[self]


@dataclass(frozen=True, eq=False)
class SettingStrategy:
    """Setting choices for each wing and the joint weights over pairs."""

    a_choices: tuple[float, ...]
    b_choices: tuple[float, ...]
    weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        a = tuple(normalize_angle(x) for x in self.a_choices)
        b = tuple(normalize_angle(x) for x in self.b_choices)
        if not a or not b:
            raise ValueError("setting choice lists must be non-empty")
        if self.weights is None:
            w = np.full((len(a), len(b)), 1.0 / (len(a) * len(b)))
        else:
            w = np.array(self.weights, dtype=float)
            if w.shape != (len(a), len(b)):
                raise ValueError(f"weights must have shape {(len(a), len(b))}, got {w.shape}")
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise ValueError("weights must be nonnegative and sum to 1")
        w.flags.writeable = False
        object.__setattr__(self, "a_choices", a)
        object.__setattr__(self, "b_choices", b)
        object.__setattr__(self, "weights", w)

    @property
    def pairs(self) -> list[tuple[float, float]]:
        return [(a, b) for a in self.a_choices for b in self.b_choices]

    @property
    def is_uniform(self) -> bool:
        return bool(np.allclose(self.weights, 1.0 / self.weights.size, rtol=0, atol=1e-15))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SettingStrategy):
            return NotImplemented
        return (
            self.a_choices == other.a_choices
            and self.b_choices == other.b_choices
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self) -> int:
        return hash((self.a_choices, self.b_choices, self.weights.tobytes()))

    def to_dict(self) -> dict[str, Any]:
        return {"a": list(self.a_choices), "b": list(self.b_choices), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SettingStrategy":
        return cls(tuple(d["a"]), tuple(d["b"]), d.get("weights"))


CHSH_STRATEGY = SettingStrategy((0.0, math.pi / 2), (math.pi / 4, 3 * math.pi / 4))
# (a1, b1), (a1, b2), (a2, b1), (a2, b2) with a1 = pi/2, a2 = 0; the minus sign
# goes on the last pair, so the singlet reaches |S| = 2*sqrt(2)
CHSH_PAIRS = (
    (math.pi / 2, math.pi / 4),
    (math.pi / 2, 3 * math.pi / 4),
    (0.0, math.pi / 4),
    (0.0, 3 * math.pi / 4),
)


@dataclass(frozen=True)
class EventRecord:
    trial: int
    protocol: str
    prep: BellLabel | None
    m_outcome: BellLabel | None
    a: float
    b: float
    A: int
    B: int
    kept: bool
    hopper: int | None


@dataclass(eq=False)
class Ensemble:
    """All trials of one run, stored column-wise.

    Label columns (``prep``, ``m``, ``hopper``) hold -1 where absent.
    """

    protocol: str
    config: dict[str, Any]
    master_seed: int
    strategy: SettingStrategy
    trial: np.ndarray
    a_idx: np.ndarray
    b_idx: np.ndarray
    A: np.ndarray
    B: np.ndarray
    prep: np.ndarray
    m: np.ndarray
    kept: np.ndarray
    hopper: np.ndarray

    COLUMNS = ("trial", "a_idx", "b_idx", "A", "B", "prep", "m", "kept", "hopper")

    def __len__(self) -> int:
        return int(self.trial.size)

    @property
    def a_choices(self) -> tuple[float, ...]:
        return self.strategy.a_choices

    @property
    def b_choices(self) -> tuple[float, ...]:
        return self.strategy.b_choices

    @property
    def a(self) -> np.ndarray:
        return np.asarray(self.a_choices)[self.a_idx]

    @property
    def b(self) -> np.ndarray:
        return np.asarray(self.b_choices)[self.b_idx]

    def record(self, i: int) -> EventRecord:
        def label(x: int) -> BellLabel | None:
            return None if x < 0 else BellLabel(int(x))

        return EventRecord(
            trial=int(self.trial[i]),
            protocol=self.protocol,
            prep=label(self.prep[i]),
            m_outcome=label(self.m[i]),
            a=self.a_choices[self.a_idx[i]],
            b=self.b_choices[self.b_idx[i]],
            A=int(self.A[i]),
            B=int(self.B[i]),
            kept=bool(self.kept[i]),
            hopper=None if self.hopper[i] < 0 else int(self.hopper[i]),
        )

    def records(self) -> Iterator[EventRecord]:
        for i in range(len(self)):
            yield self.record(i)

    __iter__ = records

    def mask(self, predicate: "Callable[[EventRecord], bool] | np.ndarray | None") -> np.ndarray:
        """Boolean mask from a per-record predicate or an existing mask."""
        if predicate is None:
            return np.ones(len(self), dtype=bool)
        if callable(predicate):
            return np.fromiter((bool(predicate(r)) for r in self.records()), dtype=bool, count=len(self))
        mask = np.asarray(predicate, dtype=bool)
        if mask.shape != (len(self),):
            raise ValueError(f"mask must have shape ({len(self)},), got {mask.shape}")
        return mask

    def select(self, predicate) -> "Ensemble":
        """Sub-ensemble of the records passing ``predicate``."""
        keep = self.mask(predicate)
        cols = {c: getattr(self, c)[keep] for c in self.COLUMNS}
        return Ensemble(self.protocol, self.config, self.master_seed, self.strategy, **cols)


def _trial_columns(n: int) -> dict[str, np.ndarray]:
    return {
        "prep": np.full(n, -1, dtype=np.int8),
        "m": np.full(n, -1, dtype=np.int8),
        "kept": np.ones(n, dtype=bool),
        "hopper": np.full(n, -1, dtype=np.int8),
    }


def _run(
    protocol: str,
    config: dict[str, Any],
    strategy: SettingStrategy,
    kernel: Callable[[np.ndarray], dict[str, np.ndarray]],
    trials: int,
    seed: int,
    workers: int,
    chunk_size: int,
) -> Ensemble:
    trials = int(trials)
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    check_seed(seed)
    starts = range(0, trials, chunk_size)
    chunks = [np.arange(s, min(s + chunk_size, trials), dtype=np.int64) for s in starts]
    if workers == 1 or len(chunks) == 1:
        parts = [kernel(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(kernel, chunks))
    cols = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
    cols["trial"] = np.arange(trials, dtype=np.int64)
    return Ensemble(protocol, config, int(seed), strategy, **{c: cols[c] for c in Ensemble.COLUMNS})


def _draw_settings(strategy: SettingStrategy, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pair = sample_categorical(strategy.weights.reshape(1, -1), u)
    a_idx, b_idx = np.divmod(pair, len(strategy.b_choices))
    return a_idx.astype(np.int8), b_idx.astype(np.int8)


def _measure_pair(strategy: SettingStrategy, amps: np.ndarray, u: np.ndarray, a_idx, b_idx):
    a = np.asarray(strategy.a_choices)[a_idx]
    b = np.asarray(strategy.b_choices)[b_idx]
    A, amps = qc.project_batch(amps, 2, 0, a, u[:, 1])
    B, _ = qc.project_batch(amps, 2, 1, b, u[:, 2])
    return A, B


def run_v_fixed(
    label,
    strategy: SettingStrategy = CHSH_STRATEGY,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    *,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> Ensemble:
    """Two-qubit Bell test with every run prepared in ``label``."""
    label = BellLabel.parse(label)
    vec = qc.bell_state(label).amplitudes

    def kernel(t: np.ndarray) -> dict[str, np.ndarray]:
        u = uniforms(seed, t, 5)
        a_idx, b_idx = _draw_settings(strategy, u[:, 0])
        amps = np.broadcast_to(vec, (t.size, 4)).copy()
        A, B = _measure_pair(strategy, amps, u, a_idx, b_idx)
        cols = _trial_columns(t.size)
        cols["prep"][:] = label
        return dict(cols, a_idx=a_idx, b_idx=b_idx, A=A, B=B)

    config = {"protocol": V_FIXED, "label": str(label), "settings": strategy.to_dict(), "trials": int(trials)}
    return _run(V_FIXED, config, strategy, kernel, trials, seed, workers, chunk_size)


def run_v_random(
    strategy: SettingStrategy = CHSH_STRATEGY,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    *,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> Ensemble:
    """Two-qubit Bell test with the Bell state drawn uniformly on each run."""
    vectors = np.stack([qc.bell_state(lab).amplitudes for lab in BellLabel])

    def kernel(t: np.ndarray) -> dict[str, np.ndarray]:
        u = uniforms(seed, t, 5)
        a_idx, b_idx = _draw_settings(strategy, u[:, 0])
        labels = sample_categorical(np.full((1, 4), 0.25), u[:, 3]).astype(np.int8)
        amps = vectors[labels]
        A, B = _measure_pair(strategy, amps, u, a_idx, b_idx)
        cols = _trial_columns(t.size)
        cols["prep"] = labels
        return dict(cols, a_idx=a_idx, b_idx=b_idx, A=A, B=B)

    config = {"protocol": V_RANDOM, "settings": strategy.to_dict(), "trials": int(trials)}
    return _run(V_RANDOM, config, strategy, kernel, trials, seed, workers, chunk_size)


# qubit 0 -> A, qubits 1 and 2 -> M, qubit 3 -> B
_W_INITIAL = qc.tensor(qc.bell_state(BellLabel.C0), qc.bell_state(BellLabel.C0)).amplitudes


def run_w_swap(
    geometry: "Geometry | str" = Geometry.M_FUTURE,
    strategy: SettingStrategy = CHSH_STRATEGY,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    *,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> Ensemble:
    """Entanglement swapping: two singlets, Bell measurement on the inner pair."""
    geometry = Geometry(geometry)
    a_arr = np.asarray(strategy.a_choices)
    b_arr = np.asarray(strategy.b_choices)

    def kernel(t: np.ndarray) -> dict[str, np.ndarray]:
        u = uniforms(seed, t, 5)
        a_idx, b_idx = _draw_settings(strategy, u[:, 0])
        amps = np.broadcast_to(_W_INITIAL, (t.size, 16)).copy()
        out: dict[str, np.ndarray] = {}
        for step in geometry.order:
            if step == "A":
                out["A"], amps = qc.project_batch(amps, 4, 0, a_arr[a_idx], u[:, 1])
            elif step == "B":
                out["B"], amps = qc.project_batch(amps, 4, 3, b_arr[b_idx], u[:, 2])
            else:
                out["m"], amps = qc.bell_measure_batch(amps, 4, 1, 2, u[:, 3])
        cols = _trial_columns(t.size)
        cols["m"] = out["m"]
        return dict(cols, a_idx=a_idx, b_idx=b_idx, A=out["A"], B=out["B"])

    config = {"protocol": W_SWAP, "geometry": geometry.value, "settings": strategy.to_dict(), "trials": int(trials)}
    return _run(W_SWAP, config, strategy, kernel, trials, seed, workers, chunk_size)


def _check_two_by_two(strategy: SettingStrategy) -> None:
    if len(strategy.a_choices) != 2 or len(strategy.b_choices) != 2:
        raise ValueError("classical filters map each setting bit to exactly two angles")
    if not strategy.is_uniform:
        raise ValueError("classical filters draw setting bits with fair coins; weights must be uniform")


def _coin_tuples(u: np.ndarray):
    a_idx = (u[:, 0] >= 0.5).astype(np.int8)
    A = np.where(u[:, 1] < 0.5, 1, -1).astype(np.int8)
    b_idx = (u[:, 2] >= 0.5).astype(np.int8)
    B = np.where(u[:, 3] < 0.5, 1, -1).astype(np.int8)
    return a_idx, A, b_idx, B


def _singlet_tables(strategy: SettingStrategy) -> np.ndarray:
    """``P(A, B | a, b)`` for the singlet, shape (na, nb, 2, 2)."""
    singlet = qc.bell_state(BellLabel.C0)
    return np.array(
        [[qc.joint_distribution(singlet, a, b) for b in strategy.b_choices] for a in strategy.a_choices]
    )


def _outcome_index(x: np.ndarray) -> np.ndarray:
    return (np.asarray(x) < 0).astype(np.intp)


def run_classical_charlie(
    strategy: SettingStrategy = CHSH_STRATEGY,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    *,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> Ensemble:
    """Fair-coin settings and outcomes, retained with probability ``P(A,B|a,b)``.

    Discarded tuples stay in the ensemble with ``kept=False``.
    """
    _check_two_by_two(strategy)
    keep_prob = _singlet_tables(strategy)

    def kernel(t: np.ndarray) -> dict[str, np.ndarray]:
        u = uniforms(seed, t, 5)
        a_idx, A, b_idx, B = _coin_tuples(u)
        p = keep_prob[a_idx, b_idx, _outcome_index(A), _outcome_index(B)]
        cols = _trial_columns(t.size)
        cols["kept"] = u[:, 4] < p
        return dict(cols, a_idx=a_idx, b_idx=b_idx, A=A, B=B)

    config = {"protocol": CHARLIE, "settings": strategy.to_dict(), "trials": int(trials)}
    return _run(CHARLIE, config, strategy, kernel, trials, seed, workers, chunk_size)


def hopper_weights(strategy: SettingStrategy = CHSH_STRATEGY) -> np.ndarray:
    """Posterior ``P(C_i | a, b, A, B)`` under a uniform prior on the Bell labels.

    Shape ``(na, nb, 2, 2, 4)``; the last axis is the hopper / label index.
    """
    likelihood = np.array(
        [
            [[qc.bell_joint_distribution(lab, a, b) for lab in BellLabel] for b in strategy.b_choices]
            for a in strategy.a_choices
        ]
    )  # (na, nb, label, A, B)
    likelihood = np.moveaxis(likelihood, 2, -1)
    joint = 0.25 * likelihood
    evidence = joint.sum(axis=-1, keepdims=True)
    posterior = joint / evidence
    if np.any(np.abs(posterior.sum(axis=-1) - 1.0) > 1e-9):
        raise RuntimeError("hopper weights do not sum to 1")
    return posterior


def run_hopper_sort(
    strategy: SettingStrategy = CHSH_STRATEGY,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    *,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> Ensemble:
    """Fair-coin tuples sorted into four hoppers; nothing is discarded."""
    _check_two_by_two(strategy)
    weights = hopper_weights(strategy)

    def kernel(t: np.ndarray) -> dict[str, np.ndarray]:
        u = uniforms(seed, t, 5)
        a_idx, A, b_idx, B = _coin_tuples(u)
        w = weights[a_idx, b_idx, _outcome_index(A), _outcome_index(B)]
        cols = _trial_columns(t.size)
        cols["hopper"] = sample_categorical(w, u[:, 4]).astype(np.int8)
        return dict(cols, a_idx=a_idx, b_idx=b_idx, A=A, B=B)

    config = {"protocol": HOPPER, "settings": strategy.to_dict(), "trials": int(trials)}
    return _run(HOPPER, config, strategy, kernel, trials, seed, workers, chunk_size)


def w_joint_distribution(geometry: "Geometry | str", a: float, b: float) -> np.ndarray:
    """Exact ``P(M, A, B | a, b)`` for the swap protocol, shape (4, 2, 2).

    Computed by chaining projections in the geometry's measurement order.
    """
    geometry = Geometry(geometry)
    start = qc.PureState(_W_INITIAL)
    table = np.zeros((4, 2, 2))

    def branches(step: str):
        if step == "A":
            return [("A", i, o) for i, o in enumerate(qc.OUTCOMES)]
        if step == "B":
            return [("B", i, o) for i, o in enumerate(qc.OUTCOMES)]
        return [("M", int(lab), lab) for lab in BellLabel]

    def descend(state: qc.PureState, prob: float, steps: tuple[str, ...], idx: dict[str, int]) -> None:
        if not steps:
            table[idx["M"], idx["A"], idx["B"]] = prob
            return
        for name, i, value in branches(steps[0]):
            if name == "A":
                p, post = qc.project(state, 0, a, value)
            elif name == "B":
                p, post = qc.project(state, 3, b, value)
            else:
                p, post = qc.bell_project(state, 1, 2, value)
            if post is None:
                continue
            descend(post, prob * p, steps[1:], {**idx, name: i})

    descend(start, 1.0, geometry.order, {})
    return table


def analytic_w_table(strategy: SettingStrategy, geometry: "Geometry | str" = Geometry.M_FUTURE) -> np.ndarray:
    """``P(M, a, b, A, B)`` including setting weights, shape (4, na, nb, 2, 2)."""
    t = np.array(
        [[w_joint_distribution(geometry, a, b) for b in strategy.b_choices] for a in strategy.a_choices]
    )  # (na, nb, M, A, B)
    t = np.moveaxis(t, 2, 0)
    return t * strategy.weights[None, :, :, None, None]


def analytic_v_random_table(strategy: SettingStrategy) -> np.ndarray:
    """``P(C, a, b, A, B)`` for uniformly random preparations, shape (4, na, nb, 2, 2)."""
    t = np.array(
        [
            [[qc.bell_joint_distribution(lab, a, b) for b in strategy.b_choices] for a in strategy.a_choices]
            for lab in BellLabel
        ]
    )
    return 0.25 * t * strategy.weights[None, :, :, None, None]


def zero_probability_combos(
    geometry: "Geometry | str", setting_grid: Iterable[tuple[float, float]]
) -> list[tuple[float, float, int, int, BellLabel]]:
    """Every ``(a, b, A, B, M)`` whose exact swap-protocol probability is below 1e-12."""
    geometry = Geometry(geometry)
    grid = sorted({(normalize_angle(a), normalize_angle(b)) for a, b in setting_grid})
    combos = []
    for a, b in grid:
        table = w_joint_distribution(geometry, a, b)
        for m in BellLabel:
            for i, A in enumerate(qc.OUTCOMES):
                for j, B in enumerate(qc.OUTCOMES):
                    if table[m, i, j] < ZERO_PROB:
                        combos.append((a, b, A, B, m))
    return sorted(combos, key=lambda c: (c[0], c[1], -c[2], -c[3], int(c[4])))


@dataclass(frozen=True)
class EquivalenceMap:
    """Analytic ``(label, a, b, A, B)`` tables of the two protocols, paired."""

    v_random: np.ndarray
    w_swap: np.ndarray
    mapping: tuple[int, int, int, int]
    tv: float = field(init=False)

    def __post_init__(self) -> None:
        from .stats import tv_distance

        object.__setattr__(self, "tv", tv_distance(self.v_random, self.w_swap))


def equivalence_map(
    v_random: Ensemble, w_swap: Ensemble, mapping: Sequence[int] = (0, 1, 2, 3)
) -> EquivalenceMap:
    """Pair preparation ``C_i`` in the V-random run with outcome ``M_mapping[i]`` in the W run."""
    if v_random.protocol != V_RANDOM or w_swap.protocol != W_SWAP:
        raise ValueError("equivalence_map needs a v_random ensemble and a w_swap ensemble")
    if v_random.strategy != w_swap.strategy:
        raise ValueError("ensembles were run with different setting strategies")
    mapping = tuple(int(x) for x in mapping)
    if sorted(mapping) != [0, 1, 2, 3]:
        raise ValueError(f"mapping must be a permutation of 0..3, got {mapping}")
    v_table = analytic_v_random_table(v_random.strategy)
    w_table = analytic_w_table(w_swap.strategy, w_swap.config.get("geometry", Geometry.M_FUTURE))
    return EquivalenceMap(v_table, w_table[list(mapping)], mapping)
