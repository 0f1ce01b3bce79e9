"""Selection-bias demonstrations that need no quantum mechanics.

* ``survivorship``: returning aircraft only show hits in non-lethal regions.
* ``coin_factory``: a common cause (the coin) that screens off.
* ``clinic``: range restriction on a common cause hides an association.
* ``digit_parity``: purely logical selection on digit streams.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .rng import check_seed, uniforms
from .stats import (
    GATE_SIGMAS,
    CorrEstimate,
    OddsRatio,
    ScreenReport,
    corr,
    odds_ratio,
    phi_coefficient,
    screening_off,
    tabulate,
)

DIGIT_CAP = 100_000
_GUARD = 20


@dataclass(frozen=True)
class SurvivorshipConfig:
    regions: int = 10
    lethal: frozenset[int] = frozenset({0, 1, 2})
    hits_per_sortie: int = 5
    sorties: int = 100_000
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "lethal", frozenset(int(r) for r in self.lethal))
        if self.regions < 1:
            raise ValueError("regions must be >= 1")
        if not self.lethal <= set(range(self.regions)):
            raise ValueError(f"lethal regions {sorted(self.lethal)} outside 0..{self.regions - 1}")
        if self.hits_per_sortie < 1 or self.sorties < 1:
            raise ValueError("hits_per_sortie and sorties must be >= 1")
        check_seed(self.seed)


@dataclass(frozen=True)
class SurvivorshipReport:
    hit_counts: np.ndarray
    survivor_counts: np.ndarray
    ratio: np.ndarray
    survivors: int
    survival_rate: float
    expected_survival_rate: float
    super_uniform: bool
    lethal_survivor_hits: int


def survivorship(config: SurvivorshipConfig = SurvivorshipConfig()) -> SurvivorshipReport:
    """Uniform hits; an aircraft returns iff none of its hits is lethal."""
    sortie = np.arange(config.sorties, dtype=np.int64)
    u = uniforms(config.seed, sortie, config.hits_per_sortie)
    region = np.minimum((u * config.regions).astype(np.int64), config.regions - 1)
    lethal = np.zeros(config.regions, dtype=bool)
    lethal[list(config.lethal)] = True
    survived = ~lethal[region].any(axis=1)
    hits = np.bincount(region.ravel(), minlength=config.regions)
    survivor_hits = np.bincount(region[survived].ravel(), minlength=config.regions)
    n_hits = hits.sum()
    p = 1.0 / config.regions
    se = math.sqrt(p * (1 - p) / n_hits)
    uniform = bool(np.all(np.abs(hits / n_hits - p) <= GATE_SIGMAS * se))
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = (survivor_hits / max(survivor_hits.sum(), 1)) / (hits / n_hits)
    n_survivors = int(survived.sum())
    return SurvivorshipReport(
        hit_counts=hits,
        survivor_counts=survivor_hits,
        ratio=ratio,
        survivors=n_survivors,
        survival_rate=n_survivors / config.sorties,
        expected_survival_rate=(1 - len(config.lethal) / config.regions) ** config.hits_per_sortie,
        super_uniform=uniform,
        lethal_survivor_hits=int(survivor_hits[lethal].sum()),
    )


NORMAL, DOUBLE = 0, 1
COIN_TYPES = ("HT", "TH", "HH", "TT")


@dataclass(frozen=True)
class CoinFactoryConfig:
    shifts: int = 1_000
    coins_per_shift: int = 100
    error_rate: float = 0.0
    p_double: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.shifts < 1 or self.coins_per_shift < 1:
            raise ValueError("shifts and coins_per_shift must be >= 1")
        if not 0.0 <= self.error_rate < 0.5:
            raise ValueError("error_rate must lie in [0, 0.5)")
        if not 0.0 <= self.p_double <= 1.0:
            raise ValueError("p_double must lie in [0, 1]")
        check_seed(self.seed)


@dataclass(eq=False)
class CoinEnsemble:
    """One row per coin; A and B are +1 for Heads seen, -1 for Tails.

    ``coin_type`` is the pair of faces (Alice's side first), which is the
    complete common cause of what the two inspectors see.
    """

    config: CoinFactoryConfig
    shift: np.ndarray
    setting: np.ndarray
    coin_type: np.ndarray
    A: np.ndarray
    B: np.ndarray
    a_choices: tuple[float, ...] = (0.0,)
    b_choices: tuple[float, ...] = (0.0,)

    def __len__(self) -> int:
        return int(self.A.size)

    @property
    def a_idx(self) -> np.ndarray:
        return np.zeros(len(self), dtype=np.int64)

    b_idx = a_idx


def coin_factory(config: CoinFactoryConfig = CoinFactoryConfig()) -> CoinEnsemble:
    shifts = np.arange(config.shifts, dtype=np.int64)
    setting = (uniforms(config.seed, shifts, 1, stream=0)[:, 0] < config.p_double).astype(np.int8)
    coin = np.arange(config.shifts * config.coins_per_shift, dtype=np.int64)
    shift = coin // config.coins_per_shift
    u = uniforms(config.seed, coin, 3, stream=1)
    heads_first = u[:, 0] < 0.5
    double = setting[shift] == DOUBLE
    # normal coins: Bob sees the opposite face; double coins: both faces equal
    alice_face = np.where(heads_first, 1, -1)
    bob_face = np.where(double, alice_face, -alice_face)
    coin_type = np.where(double, np.where(heads_first, 2, 3), np.where(heads_first, 0, 1))
    A = np.where(u[:, 1] < config.error_rate, -alice_face, alice_face).astype(np.int8)
    B = np.where(u[:, 2] < config.error_rate, -bob_face, bob_face).astype(np.int8)
    return CoinEnsemble(config, shift, setting[shift], np.asarray(COIN_TYPES)[coin_type], A, B)


@dataclass(frozen=True)
class CoinFactoryReport:
    overall: CorrEstimate
    per_setting: dict[int, CorrEstimate]
    expected_overall: float
    expected_per_setting: dict[int, float]
    by_coin_type: ScreenReport
    by_setting: ScreenReport

    @property
    def overall_matches(self) -> bool:
        return self.overall.within(self.expected_overall)


def coin_factory_report(ensemble: CoinEnsemble) -> CoinFactoryReport:
    """Correlations overall, per factory setting, and per coin type.

    The expected overall correlation uses the realized fraction of coins
    minted under each setting.
    """
    eps = ensemble.config.error_rate
    strength = (1 - 2 * eps) ** 2
    pair = (0.0, 0.0)
    per_setting = {}
    for s in (NORMAL, DOUBLE):
        per_setting[s] = corr(tabulate(ensemble, where=ensemble.setting == s), pair)
    w_double = float(np.mean(ensemble.setting == DOUBLE))
    return CoinFactoryReport(
        overall=corr(tabulate(ensemble), pair),
        per_setting=per_setting,
        expected_overall=strength * (w_double - (1 - w_double)),
        expected_per_setting={NORMAL: -strength, DOUBLE: strength},
        by_coin_type=screening_off(ensemble, "coin_type", labels=COIN_TYPES),
        by_setting=screening_off(ensemble, "setting", labels=(NORMAL, DOUBLE)),
    )


PRESELECT = "preselect"
POSTSELECT = "postselect"


@dataclass(frozen=True)
class ClinicConfig:
    population: int = 1_000_000
    p_disease_a: float = 0.05
    p_disease_b: float = 0.05
    p_y: float = 0.5
    mode: str = POSTSELECT
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population < 1:
            raise ValueError("population must be >= 1")
        for name in ("p_disease_a", "p_disease_b"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        if not 0.0 < self.p_y <= 1.0:
            raise ValueError("p_y must lie in (0, 1]")
        if self.mode not in (PRESELECT, POSTSELECT):
            raise ValueError(f"mode must be {PRESELECT!r} or {POSTSELECT!r}")
        check_seed(self.seed)


@dataclass(frozen=True)
class ClinicReport:
    mode: str
    full_cells: np.ndarray
    restricted_cells: np.ndarray
    full_phi: CorrEstimate
    restricted_phi: CorrEstimate
    full_odds: OddsRatio
    restricted_odds: OddsRatio
    degenerate: bool


def _disease_cells(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """2x2 counts, index 0 = disease present."""
    cells = np.zeros((2, 2))
    np.add.at(cells, ((~a).astype(int), (~b).astype(int)), 1)
    return cells


def clinic(config: ClinicConfig = ClinicConfig()) -> ClinicReport:
    """Two diseases that both need a Y chromosome; the clinic sees only Y carriers.

    In ``postselect`` mode the population is generated and then filtered.
    In ``preselect`` mode only Y carriers are ever admitted: the clinic's
    patients are drawn afresh from a separate stream, one per Y carrier.
    """
    people = np.arange(config.population, dtype=np.int64)
    u = uniforms(config.seed, people, 3, stream=0)
    y = u[:, 0] < config.p_y
    a = y & (u[:, 1] < config.p_disease_a)
    b = y & (u[:, 2] < config.p_disease_b)
    full = _disease_cells(a, b)
    if config.mode == POSTSELECT:
        restricted = _disease_cells(a[y], b[y])
    else:
        admitted = np.arange(int(y.sum()), dtype=np.int64)
        v = uniforms(config.seed, admitted, 2, stream=1)
        restricted = _disease_cells(v[:, 0] < config.p_disease_a, v[:, 1] < config.p_disease_b)
    return ClinicReport(
        mode=config.mode,
        full_cells=full,
        restricted_cells=restricted,
        full_phi=phi_coefficient(full),
        restricted_phi=phi_coefficient(restricted),
        full_odds=odds_ratio(full),
        restricted_odds=odds_ratio(restricted),
        degenerate=restricted.sum() == 0,
    )


PI = "pi_spigot"
E = "e_series"
SYNTHETIC = "synthetic_uniform"
FILE = "file"
DIGIT_KINDS = (PI, E, SYNTHETIC, FILE)


@dataclass(frozen=True)
class DigitStreamSource:
    """Where a digit stream comes from.

    Computed streams (pi, e) give exact fractional decimal digits; the
    integer part is excluded.
    """

    kind: str
    path: str | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in DIGIT_KINDS:
            raise ValueError(f"unknown digit source {self.kind!r}; expected one of {DIGIT_KINDS}")
        if self.kind == FILE and not self.path:
            raise ValueError("file digit source needs a path")


def _chudnovsky_terms(a: int, b: int) -> tuple[int, int, int]:
    """Binary-split sums P, Q, T of the Chudnovsky series over terms [a, b)."""
    if b - a == 1:
        if a == 0:
            p = q = 1
        else:
            p = (6 * a - 5) * (2 * a - 1) * (6 * a - 1)
            q = a * a * a * 10939058860032000
        t = p * (13591409 + 545140134 * a)
        return p, q, -t if a & 1 else t
    mid = (a + b) // 2
    p1, q1, t1 = _chudnovsky_terms(a, mid)
    p2, q2, t2 = _chudnovsky_terms(mid, b)
    return p1 * p2, q1 * q2, q2 * t1 + p1 * t2


def _low_digits(x: int, n: int) -> list[int]:
    """The last ``n`` decimal digits of ``x``, most significant first.

    Divide and conquer, so it is not subject to the interpreter's limit on
    int-to-str conversion.
    """
    if n <= 1000:
        return [int(c) for c in str(x % 10**n).zfill(n)] if n else []
    half = n // 2
    high, low = divmod(x % 10**n, 10**half)
    return _low_digits(high, n - half) + _low_digits(low, half)


def pi_digits(n: int) -> list[int]:
    """First ``n`` fractional decimal digits of pi (Chudnovsky series)."""
    scale = 10 ** (n + _GUARD)
    # each term adds about 14.18 digits
    _, q, t = _chudnovsky_terms(0, (n + _GUARD) // 14 + 2)
    value = q * 426880 * math.isqrt(10005 * scale * scale) // t
    return _low_digits(value // 10**_GUARD, n)


def e_digits(n: int) -> list[int]:
    """First ``n`` fractional decimal digits of e from ``sum 1/k!``."""
    scale = 10 ** (n + _GUARD)
    total, term, k = 0, scale, 0
    while term:
        total += term
        k += 1
        term //= k
    return _low_digits(total // 10**_GUARD, n)


def read_digits(path: str | Path) -> list[int]:
    """One ASCII digit per byte; newlines (and CR) between blocks are ignored."""
    data = Path(path).read_bytes()
    digits = []
    for pos, byte in enumerate(data):
        if 48 <= byte <= 57:
            digits.append(byte - 48)
        elif byte not in (10, 13):
            raise ValueError(f"{path}: byte {pos} is not a decimal digit ({byte!r})")
    return digits


def write_digits(path: str | Path, digits: Sequence[int], line_length: int = 1000) -> None:
    text = "".join(str(int(d)) for d in digits)
    if any(c not in "0123456789" for c in text):
        raise ValueError("digits must be in 0..9")
    lines = [text[i : i + line_length] for i in range(0, len(text), line_length)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def generate_digits(source: DigitStreamSource, n: int) -> list[int]:
    if n < 0:
        raise ValueError("n must be >= 0")
    if source.kind in (PI, E, SYNTHETIC) and n > DIGIT_CAP:
        raise ValueError(f"computed digit streams are capped at {DIGIT_CAP}, asked for {n}")
    if source.kind == PI:
        return pi_digits(n)
    if source.kind == E:
        return e_digits(n)
    if source.kind == SYNTHETIC:
        u = uniforms(source.seed, np.arange(n, dtype=np.int64), 1)[:, 0]
        return np.minimum((u * 10).astype(int), 9).tolist()
    digits = read_digits(source.path)
    if len(digits) < n:
        raise ValueError(f"{source.path} holds {len(digits)} digits, need {n}")
    return digits[:n]


@dataclass(frozen=True)
class DigitParityReport:
    n: int
    cells: np.ndarray
    within_s: np.ndarray
    phi_full: CorrEstimate
    phi_within_s: CorrEstimate
    odd_odd_within_s: int = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "odd_odd_within_s", int(self.within_s[0, 0]))


def digit_parity(source_a: DigitStreamSource, source_b: DigitStreamSource, n: int) -> DigitParityReport:
    """Parity cross-table of two digit streams, overall and within S.

    S keeps the positions where the two digits are not both odd. Tables
    are indexed ``[parity_a, parity_b]`` with index 0 = odd.
    """
    da = np.asarray(generate_digits(source_a, n))
    db = np.asarray(generate_digits(source_b, n))
    if da.size < n or db.size < n:
        raise ValueError(f"digit streams shorter than {n}")
    odd_a, odd_b = da % 2 == 1, db % 2 == 1
    cells = _disease_cells(odd_a, odd_b)
    in_s = ~(odd_a & odd_b)
    within = _disease_cells(odd_a[in_s], odd_b[in_s])
    return DigitParityReport(n, cells, within, phi_coefficient(cells), phi_coefficient(within))
