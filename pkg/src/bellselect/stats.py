"""Tabulation and estimators over ensembles.

Everything works on :class:`JointTable`, a count array indexed by
``(stratum, a_index, b_index, A_index, B_index)`` where outcome index 0 is
+1 and index 1 is -1. Uncertainties use the normal approximation; gates
throughout the package compare against five standard errors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats as sps

from . import quantum as qc
from .quantum import BellLabel, PureState, normalize_angle

GATE_SIGMAS = 5.0
LABEL_COLUMNS = ("prep", "m", "hopper")

Pair = tuple[float, float]


@dataclass(eq=False)
class JointTable:
    """Counts of ``(A, B)`` per setting pair, optionally split into strata.

    ``labels`` is ``(None,)`` for an unstratified table. ``exact`` marks a
    table built from probabilities rather than samples; estimators then
    report zero uncertainty.
    """

    a_values: tuple[float, ...]
    b_values: tuple[float, ...]
    counts: np.ndarray
    labels: tuple[Hashable, ...] = (None,)
    exact: bool = False
    unassigned: int = 0

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=float)
        expected = (len(self.labels), len(self.a_values), len(self.b_values), 2, 2)
        if self.counts.shape != expected:
            raise ValueError(f"counts must have shape {expected}, got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")

    @classmethod
    def from_probabilities(
        cls,
        probs: np.ndarray,
        a_values: Sequence[float],
        b_values: Sequence[float],
        labels: Sequence[Hashable] = (None,),
    ) -> "JointTable":
        """Exact table; ``probs`` has shape (na, nb, 2, 2) or (L, na, nb, 2, 2)."""
        probs = np.asarray(probs, dtype=float)
        if probs.ndim == 4:
            probs = probs[None]
        return cls(tuple(a_values), tuple(b_values), probs, tuple(labels), exact=True)

    @property
    def stratified(self) -> bool:
        return self.labels != (None,)

    @property
    def pairs(self) -> list[Pair]:
        return [(a, b) for a in self.a_values for b in self.b_values]

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    @property
    def is_empty(self) -> bool:
        return self.total == 0

    def stratum_totals(self) -> dict[Hashable, float]:
        return {lab: float(self.counts[i].sum()) for i, lab in enumerate(self.labels)}

    def empty_strata(self) -> list[Hashable]:
        return [lab for lab, n in self.stratum_totals().items() if n == 0]

    def _label_index(self, label: Hashable) -> int:
        if label is None and not self.stratified:
            return 0
        for i, lab in enumerate(self.labels):
            if lab == label:
                return i
        raise KeyError(f"no stratum labelled {label!r}")

    def pair_index(self, pair: Pair) -> tuple[int, int]:
        a, b = (normalize_angle(x) for x in pair)
        for i, av in enumerate(self.a_values):
            if math.isclose(av, a, abs_tol=1e-12):
                break
        else:
            raise KeyError(f"setting a={pair[0]!r} not in table")
        for j, bv in enumerate(self.b_values):
            if math.isclose(bv, b, abs_tol=1e-12):
                break
        else:
            raise KeyError(f"setting b={pair[1]!r} not in table")
        return i, j

    def cells(self, pair: Pair, label: Hashable = None) -> np.ndarray:
        """2x2 counts for one setting pair; pooled over strata when ``label`` is None."""
        i, j = self.pair_index(pair)
        if label is None:
            return self.counts[:, i, j].sum(axis=0)
        return self.counts[self._label_index(label), i, j]

    def stratum(self, label: Hashable) -> "JointTable":
        k = self._label_index(label)
        return JointTable(self.a_values, self.b_values, self.counts[k : k + 1].copy(), exact=self.exact)

    def pooled(self) -> "JointTable":
        return JointTable(
            self.a_values, self.b_values, self.counts.sum(axis=0, keepdims=True), exact=self.exact
        )


def _outcome_index(x: np.ndarray) -> np.ndarray:
    return (np.asarray(x) < 0).astype(np.int64)


def tabulate(
    ensemble: Any,
    where: "Callable[[Any], bool] | np.ndarray | None" = None,
    by: str | None = None,
    labels: Sequence[Hashable] | None = None,
) -> JointTable:
    """Count the records of ``ensemble`` that pass ``where``.

    ``ensemble`` needs ``A``, ``B``, ``a_idx``, ``b_idx`` columns and
    ``a_choices``/``b_choices``. ``where`` is a per-record predicate or a
    boolean mask. ``by`` names a column to stratify on; for ``prep``, ``m``
    and ``hopper`` the strata are always the four Bell labels, so empty
    ones show up in the table rather than vanishing.
    """
    n = len(ensemble.A)
    if where is None:
        mask = np.ones(n, dtype=bool)
    elif hasattr(ensemble, "mask"):
        mask = ensemble.mask(where)
    elif callable(where):
        raise TypeError("per-record predicates need an ensemble with a mask() method")
    else:
        mask = np.asarray(where, dtype=bool)
    na, nb = len(ensemble.a_choices), len(ensemble.b_choices)
    unassigned = 0
    if by is None:
        label_values: tuple[Hashable, ...] = (None,)
        stratum = np.zeros(n, dtype=np.int64)
    else:
        column = np.asarray(getattr(ensemble, by))
        if labels is not None:
            label_values = tuple(labels)
        elif by in LABEL_COLUMNS:
            label_values = tuple(BellLabel) if by != "hopper" else (0, 1, 2, 3)
        else:
            label_values = tuple(v.item() if hasattr(v, "item") else v for v in np.unique(column[mask]))
        lookup = {(int(v) if by in LABEL_COLUMNS else v): k for k, v in enumerate(label_values)}
        uniq, inverse = np.unique(column, return_inverse=True)
        mapped = np.array([lookup.get(v.item(), -1) for v in uniq], dtype=np.int64)
        stratum = mapped[inverse.reshape(-1)] if n else np.zeros(0, dtype=np.int64)
        assigned = stratum >= 0
        unassigned = int(np.count_nonzero(mask & ~assigned))
        mask = mask & assigned
    flat = (
        ((stratum * na + np.asarray(ensemble.a_idx, dtype=np.int64)) * nb + np.asarray(ensemble.b_idx, dtype=np.int64)) * 4
        + _outcome_index(ensemble.A) * 2
        + _outcome_index(ensemble.B)
    )
    counts = np.bincount(flat[mask], minlength=len(label_values) * na * nb * 4)
    counts = counts.reshape(len(label_values), na, nb, 2, 2)
    return JointTable(tuple(ensemble.a_choices), tuple(ensemble.b_choices), counts, label_values, unassigned=unassigned)


@dataclass(frozen=True)
class CorrEstimate:
    value: float
    stderr: float
    n: float

    @property
    def empty(self) -> bool:
        return self.n == 0

    def within(self, target: float, k: float = GATE_SIGMAS) -> bool:
        return not self.empty and not abs(self.value - target) > k * self.stderr

    def significant(self, k: float = GATE_SIGMAS) -> bool:
        return not self.empty and abs(self.value) > k * self.stderr


EMPTY = CorrEstimate(math.nan, math.nan, 0)


def _corr_from_cells(cells: np.ndarray, exact: bool) -> CorrEstimate:
    n = float(cells.sum())
    if n == 0:
        return EMPTY
    value = float((cells[0, 0] + cells[1, 1] - cells[0, 1] - cells[1, 0]) / n)
    value = max(-1.0, min(1.0, value))
    stderr = 0.0 if exact else math.sqrt(max(0.0, 1.0 - value * value) / n)
    return CorrEstimate(value, stderr, n)


def corr(table: JointTable, pair: Pair, label: Hashable = None) -> CorrEstimate:
    """``(N_same - N_diff) / N``; an empty stratum gives ``n == 0`` and NaN value."""
    return _corr_from_cells(table.cells(pair, label), table.exact)


def phi_coefficient(cells: np.ndarray, exact: bool = False) -> CorrEstimate:
    """Pearson correlation of two binary variables from a 2x2 count table.

    The standard error is the delta-method value under the multinomial
    model. Constant margins give ``value = 0`` and ``stderr = 0``.
    """
    cells = np.asarray(cells, dtype=float)
    n = float(cells.sum())
    if n == 0:
        return EMPTY
    p = cells / n
    p11, p12, p21, p22 = p[0, 0], p[0, 1], p[1, 0], p[1, 1]
    r1, r2, c1, c2 = p11 + p12, p21 + p22, p11 + p21, p12 + p22
    m = r1 * r2 * c1 * c2
    if m <= 0:
        return CorrEstimate(0.0, 0.0, n)
    d = p11 * p22 - p12 * p21
    phi = d / math.sqrt(m)
    if exact:
        return CorrEstimate(float(phi), 0.0, n)
    grad_d = np.array([p22, -p21, -p12, p11])
    grad_m = np.array([r2 * c2 * (r1 + c1), r2 * c1 * (r1 + c2), r1 * c2 * (r2 + c1), r1 * c1 * (r2 + c2)])
    g = grad_d / math.sqrt(m) - d * grad_m / (2.0 * m**1.5)
    pv = np.array([p11, p12, p21, p22])
    var = float(g @ (np.diag(pv) - np.outer(pv, pv)) @ g) / n
    return CorrEstimate(float(max(-1.0, min(1.0, phi))), math.sqrt(max(var, 0.0)), n)


@dataclass(frozen=True)
class OddsRatio:
    value: float
    log_stderr: float

    def above_one(self, k: float = GATE_SIGMAS) -> bool:
        return self.value > 0 and math.log(self.value) > k * self.log_stderr


def odds_ratio(cells: np.ndarray) -> OddsRatio:
    """Odds ratio with Woolf's standard error of the log; Haldane correction on zero cells."""
    c = np.asarray(cells, dtype=float)
    if np.any(c == 0):
        c = c + 0.5
    value = (c[0, 0] * c[1, 1]) / (c[0, 1] * c[1, 0])
    return OddsRatio(float(value), float(math.sqrt(np.sum(1.0 / c))))


@dataclass(frozen=True)
class ChshReport:
    S: float
    stderr: float
    analytic_S: float | None
    violates_classical_bound: bool
    terms: tuple[CorrEstimate, ...] = ()
    missing: tuple[Pair, ...] = ()

    def within(self, target: float, k: float = GATE_SIGMAS) -> bool:
        return not self.missing and not abs(abs(self.S) - abs(target)) > k * self.stderr


def _analytic_state(analytic: "PureState | BellLabel | str | int | None") -> PureState | None:
    if analytic is None or isinstance(analytic, PureState):
        return analytic
    return qc.bell_state(analytic)


def chsh(
    table: JointTable,
    pairs: Sequence[Pair] | None = None,
    minus: int = 3,
    label: Hashable = None,
    analytic: "PureState | BellLabel | str | None" = None,
) -> ChshReport:
    """``S = E1 + E2 + E3 + E4`` with the sign flipped on ``pairs[minus]``.

    The default pairs are ``(a1,b1), (a1,b2), (a2,b1), (a2,b2)`` with
    ``a1 = pi/2, a2 = 0, b1 = pi/4, b2 = 3pi/4``.
    """
    from .protocols import CHSH_PAIRS

    pairs = tuple(CHSH_PAIRS if pairs is None else pairs)
    if len(pairs) != 4 or not 0 <= minus < 4:
        raise ValueError("chsh needs four setting pairs and a minus index in 0..3")
    signs = [(-1.0 if k == minus else 1.0) for k in range(4)]
    terms = tuple(corr(table, pr, label) for pr in pairs)
    missing = tuple(pr for pr, t in zip(pairs, terms) if t.empty)
    state = _analytic_state(analytic)
    analytic_S = None
    if state is not None:
        analytic_S = float(sum(s * qc.correlation(state, a, b) for s, (a, b) in zip(signs, pairs)))
    if missing:
        return ChshReport(math.nan, math.nan, analytic_S, False, terms, missing)
    S = float(sum(s * t.value for s, t in zip(signs, terms)))
    stderr = math.sqrt(sum(t.stderr**2 for t in terms))
    violates = abs(S) - 2.0 > GATE_SIGMAS * stderr if stderr > 0 else abs(S) > 2.0 + 1e-12
    return ChshReport(S, stderr, analytic_S, bool(violates), terms)


@dataclass(frozen=True)
class FactReport:
    max_deviation: float
    argmax: tuple[Pair, int, int, Hashable] | None
    per_cell: np.ndarray
    stderr: float
    analytic_max: float | None = None
    empty_strata: tuple[Hashable, ...] = ()

    def factorizes(self, k: float = GATE_SIGMAS) -> bool:
        # exact tables carry zero stderr; allow floating-point residue
        return not self.max_deviation > k * self.stderr + 1e-12


def _fact_deviations(p: np.ndarray) -> np.ndarray:
    """|P(A,B) - P(A)P(B)| per cell for arrays of 2x2 distributions."""
    pa = p.sum(axis=-1, keepdims=True)
    pb = p.sum(axis=-2, keepdims=True)
    return np.abs(p - pa * pb)


def fact_deviation(
    table: JointTable,
    analytic: "PureState | Mapping[Hashable, PureState] | None" = None,
) -> FactReport:
    """Departure from ``P(A,B|a,b,C) = P(A|a,C) P(B|b,C)`` per cell and stratum.

    Marginals are taken within each setting pair. ``analytic`` supplies the
    exact state for every stratum (one state, or a mapping from stratum
    label to state) to fill in ``analytic_max``.
    """
    totals = table.counts.sum(axis=(-1, -2), keepdims=True)
    populated = totals[..., 0, 0] > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(totals > 0, table.counts / totals, 0.0)
    dev = np.where(populated[..., None, None], _fact_deviations(p), 0.0)
    empty = tuple(
        lab for k, lab in enumerate(table.labels) if not populated[k].any()
    )
    if not populated.any():
        return FactReport(math.nan, None, dev, math.nan, None, empty)
    k, i, j, x, y = np.unravel_index(int(np.argmax(dev)), dev.shape)
    n = float(totals[k, i, j, 0, 0])
    pc = float(p[k, i, j, x, y])
    stderr = 0.0 if table.exact else math.sqrt(pc * (1 - pc) / n) if 0 < pc < 1 else 1.0 / n
    argmax = ((table.a_values[i], table.b_values[j]), qc.OUTCOMES[x], qc.OUTCOMES[y], table.labels[k])
    analytic_max = None
    if analytic is not None:
        states = analytic if isinstance(analytic, Mapping) else {lab: analytic for lab in table.labels}
        analytic_max = max(
            float(_fact_deviations(qc.joint_distribution(states[lab], a, b)).max())
            for k, lab in enumerate(table.labels)
            if populated[k].any()
            for a, b in table.pairs
        )
    return FactReport(float(dev[k, i, j, x, y]), argmax, dev, stderr, analytic_max, empty)


@dataclass(frozen=True)
class ScreenReport:
    """Conditional correlations given each value of a candidate common cause."""

    per_stratum: dict[tuple[Hashable, Pair], CorrEstimate]
    pooled: dict[Pair, CorrEstimate]
    max_abs_conditional_corr: float
    screens_off: bool
    degenerate: bool
    empty_strata: tuple[Hashable, ...] = ()


def screening_off(
    ensemble: Any,
    cause: str,
    where=None,
    pairs: Sequence[Pair] | None = None,
    labels: Sequence[Hashable] | None = None,
) -> ScreenReport:
    """Pearson correlation of A and B within each stratum of ``cause``.

    The cause screens off the correlation when every populated stratum has
    ``|corr| <= 5 stderr``. A cause with fewer than two observed values is
    flagged ``degenerate``.
    """
    table = tabulate(ensemble, where, by=cause, labels=labels)
    pairs = table.pairs if pairs is None else list(pairs)
    per: dict[tuple[Hashable, Pair], CorrEstimate] = {}
    for lab in table.labels:
        for pr in pairs:
            per[(lab, pr)] = phi_coefficient(table.cells(pr, lab))
    pooled = {pr: phi_coefficient(table.cells(pr)) for pr in pairs}
    filled = [e for e in per.values() if not e.empty]
    observed = [lab for lab, n in table.stratum_totals().items() if n > 0]
    max_abs = max((abs(e.value) for e in filled), default=math.nan)
    screens = bool(filled) and all(not e.significant() for e in filled)
    return ScreenReport(per, pooled, float(max_abs), screens, len(observed) < 2, tuple(table.empty_strata()))


@dataclass(frozen=True)
class MsmReport:
    super_corr: CorrEstimate
    sub_corr: CorrEstimate
    delta: float
    z_score: float

    @property
    def empty(self) -> bool:
        return self.super_corr.empty or self.sub_corr.empty


def msm_delta(
    super_table: JointTable,
    sub_table: JointTable,
    pair: Pair = (0.0, 0.0),
    super_label: Hashable = None,
    sub_label: Hashable = None,
    measure: str = "corr",
) -> MsmReport:
    """Correlation change between a super-ensemble and a selected sub-ensemble.

    ``measure`` is ``"corr"`` for ``(N_same - N_diff)/N`` or ``"phi"`` for
    the Pearson correlation (needed when marginals are far from 1/2).
    """
    if measure == "corr":
        sup, sub = corr(super_table, pair, super_label), corr(sub_table, pair, sub_label)
    elif measure == "phi":
        sup = phi_coefficient(super_table.cells(pair, super_label), super_table.exact)
        sub = phi_coefficient(sub_table.cells(pair, sub_label), sub_table.exact)
    else:
        raise ValueError(f"unknown measure {measure!r}")
    if sup.empty or sub.empty:
        return MsmReport(sup, sub, math.nan, math.nan)
    delta = sub.value - sup.value
    se = math.hypot(sup.stderr, sub.stderr)
    z = 0.0 if delta == 0 else (math.copysign(math.inf, delta) if se == 0 else delta / se)
    return MsmReport(sup, sub, delta, z)


@dataclass(frozen=True)
class OracleComparison:
    """Empirical cell frequencies against exact Born-rule probabilities."""

    max_deviation: float
    max_z: float
    chi2: float
    dof: int
    p_value: float
    deviations: np.ndarray = field(repr=False)
    empty: bool = False
    empty_strata: tuple[Hashable, ...] = ()

    def passed(self, k: float = GATE_SIGMAS) -> bool:
        return not self.empty and not self.max_z > k


def analytic_table(state: "PureState | BellLabel | str", a_values: Sequence[float], b_values: Sequence[float]) -> np.ndarray:
    state = _analytic_state(state)
    return np.array([[qc.joint_distribution(state, a, b) for b in b_values] for a in a_values])


def compare_to_analytic(
    table: JointTable, analytic: "PureState | BellLabel | str | None" = None
) -> OracleComparison:
    """Compare every populated (stratum, pair) against the quantum prediction.

    With ``analytic=None`` each stratum is compared with the Bell state of
    its own label (strata must be labelled by ``BellLabel`` or 0..3).
    """
    empty_strata = tuple(table.empty_strata())
    if table.is_empty:
        return OracleComparison(math.nan, math.nan, math.nan, 0, math.nan, np.zeros(0), True, empty_strata)
    expected = []
    for lab in table.labels:
        state = analytic if analytic is not None else lab
        if state is None:
            raise ValueError("unstratified table needs an explicit analytic state")
        expected.append(analytic_table(state, table.a_values, table.b_values))
    p = np.array(expected)
    n = table.counts.sum(axis=(-1, -2), keepdims=True)
    populated = np.broadcast_to(n > 0, p.shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        freq = np.where(n > 0, table.counts / n, 0.0)
        dev = np.where(populated, np.abs(freq - p), 0.0)
        se = np.sqrt(p * (1 - p) / np.where(n > 0, n, 1))
        z = np.where(se > 1e-15, dev / se, np.where(dev > 1e-12, np.inf, 0.0))
        z = np.where(populated, z, 0.0)
        e_counts = p * n
        chi_terms = np.where(
            populated & (e_counts > 1e-12), (table.counts - e_counts) ** 2 / e_counts, 0.0
        )
    impossible = populated & (e_counts <= 1e-12) & (table.counts > 0)
    chi2 = math.inf if impossible.any() else float(chi_terms.sum())
    live = populated & (e_counts > 1e-12)
    groups = live.reshape(*live.shape[:3], 4).sum(axis=-1)
    dof = int(np.sum(np.clip(groups - 1, 0, None)))
    p_value = float(sps.chi2.sf(chi2, dof)) if dof > 0 and math.isfinite(chi2) else (0.0 if not math.isfinite(chi2) else 1.0)
    return OracleComparison(float(dev.max()), float(z.max()), chi2, dof, p_value, dev, False, empty_strata)


def tv_distance(p: "np.ndarray | Mapping", q: "np.ndarray | Mapping") -> float:
    """Total variation distance ``(1/2) sum |p - q|`` over matching index sets."""
    if isinstance(p, Mapping) or isinstance(q, Mapping):
        if not (isinstance(p, Mapping) and isinstance(q, Mapping)) or set(p) != set(q):
            raise ValueError("tv_distance needs tables over the same index set")
        return 0.5 * float(sum(abs(p[k] - q[k]) for k in p))
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"tv_distance needs matching shapes, got {p.shape} and {q.shape}")
    return 0.5 * float(np.abs(p - q).sum())


@dataclass(frozen=True)
class Homogeneity:
    chi2: float
    dof: int
    p_value: float

    def passed(self, level: float = 1e-3) -> bool:
        return self.p_value > level


def homogeneity(tables: Iterable["JointTable | np.ndarray"]) -> Homogeneity:
    """Chi-square test that several count tables share one distribution.

    Each table is flattened to a row of a contingency table; categories
    that are empty in every table are dropped.
    """
    rows = np.array([np.ravel(t.counts if isinstance(t, JointTable) else t) for t in tables], dtype=float)
    if rows.shape[0] < 2:
        raise ValueError("homogeneity needs at least two tables")
    rows = rows[:, rows.sum(axis=0) > 0]
    if rows.shape[1] < 2:
        return Homogeneity(0.0, 0, 1.0)
    chi2, p, dof, _ = sps.chi2_contingency(rows, correction=False)
    return Homogeneity(float(chi2), int(dof), float(p))
